"""Observation sets built from a cube tiling with one ball per cube.

The box is tiled by (2X/L)^n axis-aligned cubes; each cube I_j receives a
center x_j with B_r(x_j) inside I_j, and the observation set is exactly the
union of those balls (the minimal admissible choice, hence the hardest
test). Rasterization is cell-center membership with no antialiasing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import IndexOutOfRange, InvalidGeometry, InvalidParameter, ResolutionTooCoarse
from .grid import Field, GridSpec, write_snapshot


@dataclass(frozen=True)
class ObservationRegion:
    """Cube lattice {I_j}, ball centers x_j, ball radius r, and the 0/1 mask."""

    spec: GridSpec
    L: float
    r: float
    centers: np.ndarray  # shape (ncubes, n), row-major cube order
    mask: Field
    cube_index: np.ndarray  # flat int array, cell -> cube index
    placement: str = "centered"
    seed: int | None = None

    @property
    def R(self) -> float:
        """Covering-ball radius sqrt(n) * L (cube diagonal half-length bound)."""
        return math.sqrt(self.spec.n) * self.L

    @property
    def ncubes(self) -> int:
        return self.centers.shape[0]

    @property
    def cubes_per_axis(self) -> int:
        return int(round(2.0 * self.spec.X / self.L))

    def cube_mask(self, j: int) -> Field:
        if not 0 <= j < self.ncubes:
            raise IndexOutOfRange(f"cube index {j} out of range")
        return Field(self.spec, (self.cube_index == j).astype(float))


def build_region(
    spec: GridSpec,
    L: float,
    r: float,
    placement: str = "centered",
    seed: int | None = None,
) -> ObservationRegion:
    """Tile the box with cubes of side L and place one ball of radius r per cube.

    placement "centered" puts x_j at cube centers; "jittered" draws x_j
    uniformly (seeded) subject to B_r(x_j) staying inside its cube.
    """
    if placement not in ("centered", "jittered"):
        raise InvalidParameter(f"unknown placement {placement!r}")
    k_axis = 2.0 * spec.X / L
    if abs(k_axis - round(k_axis)) > 1e-9 or round(k_axis) < 1:
        raise InvalidGeometry(f"cube side L={L} does not divide the box side {2 * spec.X}")
    if not (0 < r <= L / 2.0):
        raise InvalidGeometry(f"need 0 < r <= L/2, got r={r}, L={L}")
    if r < 2.0 * spec.dx:
        raise ResolutionTooCoarse(f"ball radius {r} below 2*dx={2 * spec.dx}")
    k_axis = int(round(k_axis))

    lows = -spec.X + L * np.arange(k_axis)
    if placement == "centered":
        per_axis = [lows + L / 2.0] * spec.n
        mesh = np.meshgrid(*per_axis, indexing="ij")
        centers = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    else:
        rng = np.random.Generator(np.random.PCG64(0 if seed is None else seed))
        ncubes = k_axis**spec.n
        centers = np.empty((ncubes, spec.n))
        for j in range(ncubes):
            idx = np.unravel_index(j, (k_axis,) * spec.n)
            for axis in range(spec.n):
                lo = lows[idx[axis]] + r
                hi = lows[idx[axis]] + L - r
                centers[j, axis] = lo if hi <= lo else rng.uniform(lo, hi)

    # cube membership of every cell, by cell-center coordinates
    coords = spec.coordinates()
    cube_of = np.zeros(spec.shape, dtype=np.int64)
    for axis in range(spec.n):
        ia = np.clip(((coords[axis] + spec.X) / L).astype(np.int64), 0, k_axis - 1)
        cube_of = cube_of * k_axis + ia
    cube_index = cube_of.reshape(-1)

    # mask = union of the balls; each ball lies inside its own cube, no wrap
    mask = np.zeros(spec.size)
    for j in range(centers.shape[0]):
        d = spec.distance_to(centers[j]).reshape(-1)
        mask[d < r] = 1.0
    return ObservationRegion(
        spec, float(L), float(r), centers, Field(spec, mask), cube_index,
        placement, seed,
    )


def thickness(region: ObservationRegion) -> float:
    """min_j measure(omega intersect I_j) / measure(I_j), on the lattice."""
    mask = region.mask.values
    counts = np.bincount(region.cube_index, minlength=region.ncubes)
    hits = np.bincount(
        region.cube_index, weights=mask, minlength=region.ncubes
    )
    return float(np.min(hits / counts))


def ball_mask(region: ObservationRegion, j: int, rho: float) -> Field:
    """0/1 mask of B_rho(x_j) with the minimum-image metric (may wrap)."""
    if not 0 <= j < region.ncubes:
        raise IndexOutOfRange(f"cube index {j} out of range")
    if rho <= 0:
        raise InvalidParameter(f"rho must be positive, got {rho}")
    d = region.spec.distance_to(region.centers[j]).reshape(-1)
    return Field(region.spec, (d < rho).astype(float))


def save_region(region: ObservationRegion, directory) -> None:
    """Write the region manifest (plain key=value text) and the mask snapshot."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [
        f"L={region.L!r}",
        f"r={region.r!r}",
        f"placement={region.placement}",
        f"seed={'' if region.seed is None else region.seed}",
        f"ncubes={region.ncubes}",
    ]
    for j in range(region.ncubes):
        coords = ",".join(repr(float(c)) for c in region.centers[j])
        lines.append(f"center.{j}={coords}")
    (directory / "region.txt").write_text("\n".join(lines) + "\n")
    write_snapshot(region.mask, directory / "mask.hobs")
