"""Periodic lattice truncation of R^n: field storage, norms, and transforms.

The computational domain is the box [-X, X)^n sampled on a uniform lattice of
m points per axis (m a power of two), stored flat in row-major order with
axis 0 slowest.  All integrals are plain Riemann sums, which are spectrally
accurate for smooth periodic integrands.  Fields are immutable after
construction; every operation here is pure.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatch, InvalidParameter, NonFinite

SNAPSHOT_MAGIC = b"HOBS"
SNAPSHOT_VERSION = 1


def _is_power_of_two(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic lattice on the box [-X, X)^n.

    n: spatial dimension (1-3); m: points per axis (power of two >= 16);
    X: box half-width.  The spacing dx = 2X/m is exact in floating point
    because m is a power of two.
    """

    n: int
    m: int
    X: float

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise InvalidParameter(f"n must be 1, 2 or 3, got {self.n}")
        if not _is_power_of_two(self.m) or self.m < 16:
            raise InvalidParameter(f"m must be a power of two >= 16, got {self.m}")
        if not (self.X > 0 and math.isfinite(self.X)):
            raise InvalidParameter(f"X must be positive and finite, got {self.X}")

    @property
    def dx(self) -> float:
        return 2.0 * self.X / self.m

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.n

    @property
    def size(self) -> int:
        return self.m**self.n

    @property
    def cell_volume(self) -> float:
        return self.dx**self.n

    def axis_points(self) -> np.ndarray:
        """Lattice coordinates along one axis: -X + i*dx, i = 0..m-1."""
        return -self.X + self.dx * np.arange(self.m)

    def coordinates(self) -> list[np.ndarray]:
        """Per-axis coordinate arrays of shape (m,)*n (row-major meshgrid)."""
        axes = [self.axis_points()] * self.n
        return list(np.meshgrid(*axes, indexing="ij"))

    def wavenumbers(self) -> list[np.ndarray]:
        """Per-axis lattice wavenumbers xi_k = pi*k/X in FFT order."""
        k = np.fft.fftfreq(self.m, d=1.0 / self.m)  # integers -m/2..m/2-1
        return [(np.pi / self.X) * k] * self.n

    def wavenumber_grids(self) -> list[np.ndarray]:
        ks = self.wavenumbers()
        return list(np.meshgrid(*ks, indexing="ij"))

    def xi_squared(self) -> np.ndarray:
        """|xi|^2 on the full wavenumber lattice, shape (m,)*n."""
        grids = self.wavenumber_grids()
        out = np.zeros(self.shape)
        for g in grids:
            out += g * g
        return out

    @property
    def xi_max_squared(self) -> float:
        """Largest |xi|^2 representable on the lattice (Nyquist corner)."""
        return self.n * (np.pi * (self.m // 2) / self.X) ** 2

    def min_image_delta(self, x: np.ndarray, center: float) -> np.ndarray:
        """Signed minimum-image displacement x - center on the 2X torus."""
        d = x - center
        return d - 2.0 * self.X * np.round(d / (2.0 * self.X))

    def distance_to(self, center) -> np.ndarray:
        """Minimum-image distance field to `center`, shape (m,)*n."""
        center = np.atleast_1d(np.asarray(center, dtype=float))
        if center.shape != (self.n,):
            raise InvalidParameter(f"center must have {self.n} components")
        coords = self.coordinates()
        d2 = np.zeros(self.shape)
        for axis in range(self.n):
            delta = self.min_image_delta(coords[axis], center[axis])
            d2 += delta * delta
        return np.sqrt(d2)


@dataclass(frozen=True)
class Field:
    """Scalar lattice function with grid metadata and optional time tag.

    Values are stored flat (length m^n, row-major, axis 0 slowest) and frozen
    read-only; arithmetic helpers return new Fields.
    """

    spec: GridSpec
    values: np.ndarray
    time: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size != self.spec.size:
            raise InvalidParameter(
                f"expected {self.spec.size} values, got {v.size}"
            )
        if not np.all(np.isfinite(v)):
            raise NonFinite("field contains NaN or Inf")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def grid_view(self) -> np.ndarray:
        return self.values.reshape(self.spec.shape)

    def with_time(self, t: float | None) -> "Field":
        return Field(self.spec, self.values, t)

    def _check_same_grid(self, other: "Field"):
        if other.spec != self.spec:
            raise GridMismatch("fields live on different grids")

    def __add__(self, other: "Field") -> "Field":
        self._check_same_grid(other)
        return Field(self.spec, self.values + other.values, self.time)

    def __sub__(self, other: "Field") -> "Field":
        self._check_same_grid(other)
        return Field(self.spec, self.values - other.values, self.time)

    def __mul__(self, c: float) -> "Field":
        return Field(self.spec, self.values * float(c), self.time)

    __rmul__ = __mul__


def field_from_function(spec: GridSpec, fn, time: float | None = None) -> Field:
    """Sample fn(x1, ..., xn) (vectorized over coordinate arrays) on the lattice."""
    coords = spec.coordinates()
    vals = np.asarray(fn(*coords), dtype=float)
    return Field(spec, np.broadcast_to(vals, spec.shape).reshape(-1), time)


def constant_field(spec: GridSpec, c: float, time: float | None = None) -> Field:
    return Field(spec, np.full(spec.size, float(c)), time)


# ---------------------------------------------------------------------------
# norms and quadrature


def lp_norm(field: Field, p: float) -> float:
    """L^p norm by Riemann-sum quadrature; p = inf returns max |v|."""
    if p == math.inf:
        return float(np.max(np.abs(field.values))) if field.spec.size else 0.0
    if p < 1:
        raise InvalidParameter(f"p must satisfy p >= 1, got {p}")
    vol = field.spec.cell_volume
    if p == 2:
        return float(np.sqrt(vol * np.dot(field.values, field.values)))
    return float((vol * np.sum(np.abs(field.values) ** p)) ** (1.0 / p))


def _spectral_weight(spec: GridSpec) -> float:
    # Parseval: dx^n * sum |v|^2 == weight * sum |fft(v)|^2
    return spec.cell_volume / spec.size


def sobolev_norm(field: Field, s: int) -> float:
    """H^s norm (s = +1 or -1) as the Fourier multiplier (1+|xi|^2)^{s/2}.

    Normalized so a multiplier identically 1 reproduces lp_norm(field, 2).
    """
    if s not in (-1, 1):
        raise InvalidParameter(f"s must be -1 or +1, got {s}")
    spec = field.spec
    coeffs = np.fft.fftn(field.grid_view())
    mult = (1.0 + spec.xi_squared()) ** s
    total = np.sum(mult * (coeffs.real**2 + coeffs.imag**2))
    return float(np.sqrt(_spectral_weight(spec) * total))


def gradient(field: Field) -> list[Field]:
    """Exact spectral gradient of the trigonometric interpolant.

    The Nyquist mode is zeroed in each derivative so the result stays real.
    """
    spec = field.spec
    coeffs = np.fft.fftn(field.grid_view())
    k = np.fft.fftfreq(spec.m, d=1.0 / spec.m)
    xi = (np.pi / spec.X) * k
    if spec.m % 2 == 0:
        xi = xi.copy()
        xi[spec.m // 2] = 0.0
    out = []
    for axis in range(spec.n):
        shape = [1] * spec.n
        shape[axis] = spec.m
        d = np.fft.ifftn(coeffs * (1j * xi.reshape(shape))).real
        out.append(Field(spec, d.reshape(-1), field.time))
    return out


def laplacian(field: Field) -> Field:
    """Exact spectral Laplacian of the trigonometric interpolant."""
    spec = field.spec
    coeffs = np.fft.fftn(field.grid_view())
    lap = np.fft.ifftn(-spec.xi_squared() * coeffs).real
    return Field(spec, lap.reshape(-1), field.time)


def masked_l2(field: Field, mask: Field) -> float:
    """Squared L^2 mass over a 0/1 mask: dx^n * sum(mask * v^2)."""
    field._check_same_grid(mask)
    return float(field.spec.cell_volume * np.sum(mask.values * field.values**2))


def dirichlet_energy_masked(field: Field, mask: Field) -> float:
    """Squared L^2 mass of the spectral gradient over a 0/1 mask."""
    return sum(masked_l2(g, mask) for g in gradient(field))


# ---------------------------------------------------------------------------
# binary snapshot format (shared by all modules)
#
#   magic "HOBS" | u32 version=1 | u8 n | u64 m | f64 X | f64 time | m^n f64
#
# all little-endian; time is NaN when the field carries no time tag.

_HEADER = struct.Struct("<4sIBQdd")


def write_snapshot(field: Field, path) -> None:
    t = math.nan if field.time is None else float(field.time)
    header = _HEADER.pack(
        SNAPSHOT_MAGIC, SNAPSHOT_VERSION, field.spec.n, field.spec.m, field.spec.X, t
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(field.values.astype("<f8").tobytes())


def read_snapshot(path) -> Field:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise InvalidParameter(f"truncated snapshot header in {path}")
        magic, version, n, m, X, t = _HEADER.unpack(raw)
        if magic != SNAPSHOT_MAGIC:
            raise InvalidParameter(f"bad snapshot magic in {path}")
        if version != SNAPSHOT_VERSION:
            raise InvalidParameter(f"unsupported snapshot version {version}")
        spec = GridSpec(n=n, m=m, X=X)
        vals = np.frombuffer(fh.read(8 * spec.size), dtype="<f8")
        if vals.size != spec.size:
            raise InvalidParameter(f"truncated snapshot payload in {path}")
    return Field(spec, vals, None if math.isnan(t) else t)
