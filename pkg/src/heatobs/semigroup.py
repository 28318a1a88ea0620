"""The heat semigroup e^{t*Laplace} as a spectral multiplier, and its kernel.

Stateless given a GridSpec.  The kernel carries the (4*pi*t)^{-n/2}
normalization so that propagating the constant 1 returns 1; kernel sampling
uses minimum-image distance, valid while 4t << X^2 (a runtime warning fires
beyond t = X^2/16).
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import InvalidParameter
from .grid import Field, GridSpec, lp_norm
from .reporting import EstimateReport


def heat_propagate(field: Field, t: float) -> Field:
    """Multiply Fourier coefficients by exp(-|xi|^2 t); t = 0 is the identity."""
    if t < 0:
        raise InvalidParameter(f"t must be nonnegative, got {t}")
    if t == 0:
        return field
    spec = field.spec
    coeffs = np.fft.fftn(field.grid_view())
    out = np.fft.ifftn(np.exp(-spec.xi_squared() * t) * coeffs).real
    new_time = None if field.time is None else field.time + t
    return Field(spec, out.reshape(-1), new_time)


def heat_kernel(spec: GridSpec, t: float, center) -> Field:
    """Sample (4*pi*t)^{-n/2} exp(-|x-center|^2 / 4t) with minimum-image distance."""
    if t <= 0:
        raise InvalidParameter(f"t must be positive, got {t}")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape != (spec.n,):
        raise InvalidParameter(f"center must have {spec.n} components")
    if np.any(center < -spec.X) or np.any(center >= spec.X):
        raise InvalidParameter("center must lie inside the box [-X, X)^n")
    if t > spec.X**2 / 16.0:
        warnings.warn(
            f"heat_kernel with t={t} exceeds X^2/16={spec.X ** 2 / 16.0}; "
            "periodic aliasing may be significant",
            RuntimeWarning,
            stacklevel=2,
        )
    d = spec.distance_to(center)
    vals = (4.0 * math.pi * t) ** (-spec.n / 2.0) * np.exp(-(d * d) / (4.0 * t))
    return Field(spec, vals.reshape(-1))


def lp_lq_check(field: Field, t: float, q: float, p: float, tol: float = 1e-8) -> EstimateReport:
    """Check the L^q -> L^p smoothing bound of the semigroup at time t.

    lhs = ||e^{t*Lap} f||_p, rhs = (4 pi t)^{-(n/2)(1/q - 1/p)} ||f||_q,
    pass iff lhs <= rhs * (1 + tol).
    """
    if t <= 0:
        raise InvalidParameter(f"t must be positive, got {t}")
    if q < 1 or (p != math.inf and p < q) or (q == math.inf and p != math.inf):
        raise InvalidParameter(f"need 1 <= q <= p <= inf, got q={q}, p={p}")
    n = field.spec.n
    inv_q = 0.0 if q == math.inf else 1.0 / q
    inv_p = 0.0 if p == math.inf else 1.0 / p
    prefactor = (4.0 * math.pi * t) ** (-(n / 2.0) * (inv_q - inv_p))
    norm_q = lp_norm(field, q)
    lhs = lp_norm(heat_propagate(field, t), p)
    rhs = prefactor * norm_q
    return EstimateReport(
        kind="eq_2_1",
        lhs=lhs,
        rhs_factors={"prefactor": prefactor, "initial_lq_norm": norm_q, "rhs": rhs},
        passed=bool(lhs <= rhs * (1.0 + tol)),
        meta={"t": t, "p": p, "q": q, "n": n, "tol": tol},
    )
