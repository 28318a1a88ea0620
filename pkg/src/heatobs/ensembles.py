"""Seeded analytic data families for ensembles and refinement studies.

Every generator draws parameters (mode coefficients, centers, widths) from a
seeded PCG64 stream and then evaluates an analytic profile on the lattice, so
the same seed describes the same physical field at every resolution.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidParameter
from .grid import Field, GridSpec, field_from_function, lp_norm
from .obsregion import ObservationRegion


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def trig_field(
    spec: GridSpec, rng: np.random.Generator, kmax: int = 8, amplitude: float = 1.0
) -> Field:
    """Random band-limited trigonometric polynomial, decaying ~ 1/(1+k^2).

    Coefficients are drawn in a fixed mode order independent of m, so the
    same stream produces the same physical field on refined grids.
    """
    if kmax < 1:
        raise InvalidParameter("kmax must be >= 1")
    base = np.pi / spec.X
    if spec.n == 1:
        modes = [(k,) for k in range(1, kmax + 1)]
    elif spec.n == 2:
        modes = [(k1, k2) for k1 in range(kmax + 1) for k2 in range(kmax + 1)][1:]
    else:
        modes = [
            (k1, k2, k3)
            for k1 in range(kmax + 1)
            for k2 in range(kmax + 1)
            for k3 in range(kmax + 1)
        ][1:]
    coeffs = []
    for mode in modes:
        decay = 1.0 / (1.0 + sum(k * k for k in mode))
        a, b = rng.standard_normal(2)
        coeffs.append((mode, amplitude * decay * a, amplitude * decay * b))

    def fn(*coords):
        out = np.zeros_like(coords[0])
        for mode, ca, cb in coeffs:
            phase = np.zeros_like(coords[0])
            for axis, k in enumerate(mode):
                phase = phase + base * k * coords[axis]
            out += ca * np.cos(phase) + cb * np.sin(phase)
        return out

    return field_from_function(spec, fn)


def gaussian_bump(spec: GridSpec, center, width: float, amplitude: float = 1.0) -> Field:
    """Analytic Gaussian amplitude * exp(-|x-center|^2 / (2 width^2)),
    minimum-image metric."""
    if width <= 0:
        raise InvalidParameter("width must be positive")
    d = spec.distance_to(center)
    return Field(spec, (amplitude * np.exp(-(d * d) / (2.0 * width**2))).reshape(-1))


def bump_mixture(
    spec: GridSpec,
    rng: np.random.Generator,
    count: int = 3,
    amp_range: tuple[float, float] = (0.3, 1.0),
    width_range: tuple[float, float] = (0.2, 0.8),
) -> Field:
    """Sum of `count` random Gaussian bumps with seeded centers/widths/amps."""
    vals = np.zeros(spec.size)
    for _ in range(count):
        center = rng.uniform(-spec.X, spec.X, size=spec.n)
        width = rng.uniform(*width_range)
        amp = rng.uniform(*amp_range) * rng.choice([-1.0, 1.0])
        vals += gaussian_bump(spec, center, width, amp).values
    return Field(spec, vals)


def _smootherstep(u: np.ndarray) -> np.ndarray:
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def compact_bump(
    spec: GridSpec, center, r_plateau: float, r_support: float, amplitude: float = 1.0
) -> Field:
    """C^2 radial bump: `amplitude` inside r_plateau, exactly 0 outside
    r_support (smootherstep transition)."""
    if not 0 < r_plateau < r_support:
        raise InvalidParameter("need 0 < r_plateau < r_support")
    d = spec.distance_to(center)
    u = np.clip((d - r_plateau) / (r_support - r_plateau), 0.0, 1.0)
    return Field(spec, (amplitude * (1.0 - _smootherstep(u))).reshape(-1))


def far_bump(region: ObservationRegion, amplitude: float = 1.0) -> Field:
    """Compact bump centered at the lattice point farthest from the
    observation balls, supported strictly outside omega."""
    spec = region.spec
    nearest = np.full(spec.size, np.inf)
    for j in range(region.ncubes):
        d = spec.distance_to(region.centers[j]).reshape(-1)
        nearest = np.minimum(nearest, d)
    idx = int(np.argmax(nearest))
    margin = float(nearest[idx]) - region.r
    if margin <= 3.0 * spec.dx:
        raise InvalidParameter("no room for a bump outside omega")
    coords = spec.coordinates()
    center = np.array([c.reshape(-1)[idx] for c in coords])
    return compact_bump(spec, center, 0.45 * margin, 0.9 * margin, amplitude)


def spike_field(spec: GridSpec, q: float, core_cells: float = 1.5) -> Field:
    """Initial data whose sup-norm decay probes the L^q smoothing exponent.

    q = 1 is a resolved narrow Gaussian (near-delta); q > 1 samples the
    homogeneous profile (|x|^2 + core^2)^(-n/2q) whose heat evolution is
    self-similar with sup norm ~ t^(-n/2q).  The analytic core at
    core_cells * dx keeps the sampled profile alias-free.
    """
    if q < 1:
        raise InvalidParameter("q must be >= 1")
    core = core_cells * spec.dx
    d = spec.distance_to(np.zeros(spec.n))
    if q == 1:
        vals = np.exp(-(d * d) / (4.0 * core**2))
    else:
        vals = (d * d + core * core) ** (-spec.n / (2.0 * q))
    return Field(spec, vals.reshape(-1))


def bump_potential(spec: GridSpec, center=None, width: float | None = None) -> Field:
    """Smooth compact potential bump normalized to unit L^1 norm."""
    if center is None:
        center = np.zeros(spec.n)
    if width is None:
        width = spec.X / 4.0
    raw = compact_bump(spec, center, 0.5 * width, width, 1.0)
    norm = lp_norm(raw, 1)
    return Field(spec, raw.values / norm)


def single_mode(spec: GridSpec, k: int = 1, amplitude: float = 1.0) -> Field:
    """cos(pi k x1 / X): one resolved Fourier mode along the first axis."""
    base = np.pi * k / spec.X

    def fn(*coords):
        return amplitude * np.cos(base * coords[0])

    return field_from_function(spec, fn)


def gaussian_heat_profile(spec: GridSpec, s: float, center=None, amplitude: float = 1.0) -> Field:
    """amplitude * exp(-|x-center|^2 / 4s): closed-form heat data at scale s."""
    if s <= 0:
        raise InvalidParameter("s must be positive")
    if center is None:
        center = np.zeros(spec.n)
    d = spec.distance_to(center)
    return Field(spec, (amplitude * np.exp(-(d * d) / (4.0 * s))).reshape(-1))


def localized_pair_data(
    spec: GridSpec,
    rng: np.random.Generator,
    anchor,
    base_width: float = 0.6,
    perturbation: float = 0.3,
) -> tuple[Field, Field]:
    """Two initial data differing by a seeded bump near `anchor` (for
    frequency-function ensembles that need mass around one cube center)."""
    y1 = gaussian_bump(spec, anchor, base_width, 1.0)
    offset = rng.uniform(-0.3 * base_width, 0.3 * base_width, size=spec.n)
    width = base_width * rng.uniform(0.5, 0.9)
    amp = perturbation * rng.uniform(0.5, 1.0)
    y2 = Field(
        spec,
        y1.values + gaussian_bump(spec, np.asarray(anchor) + offset, width, amp).values,
    )
    return y1, y2
