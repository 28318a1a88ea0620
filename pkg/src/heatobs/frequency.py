"""Cutoff families, Gaussian weights, the local frequency function, and the
three-point logarithmic-convexity test.

The frequency of a localized difference phi_j = eta_j * phi is the ratio of
the Gaussian-weighted Dirichlet energy to the weighted mass over B_{3R}(x_j).
Its differential inequalities are checked with second-order centered
differences in time; the exact localized source H_j - eta_j F replaces any
time differencing on the right-hand sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .errors import (
    BadOrdering,
    BoundarySample,
    EmptyWindow,
    IndexOutOfRange,
    InsufficientSamples,
    InvalidGeometry,
    InvalidParameter,
    NonPositiveG,
    ZeroDenominator,
    ZeroTerminalMass,
)
from .grid import Field, GridSpec, gradient, laplacian
from .obsregion import ObservationRegion, ball_mask
from .reporting import EstimateReport

# (plateau radius, support radius) in units of R
CUTOFF_RADII = {
    "eta": (2.5, 3.0),
    "sigma": (4.0, 5.0),
    "sigma_tilde": (3.0, 4.0),
}

# quintic smootherstep: C^2 transition with vanishing 1st/2nd derivatives
# at both ends; max |s'| = 15/8 at the midpoint.
_SMOOTHERSTEP_MAX_SLOPE = 15.0 / 8.0


def _smootherstep(u: np.ndarray) -> np.ndarray:
    return u * u * u * (10.0 + u * (-15.0 + 6.0 * u))


def _smootherstep_d1(u: np.ndarray) -> np.ndarray:
    return 30.0 * u * u * (u - 1.0) ** 2


def _smootherstep_d2(u: np.ndarray) -> np.ndarray:
    return 60.0 * u * (2.0 * u - 1.0) * (u - 1.0)


@dataclass(frozen=True)
class CutoffFamily:
    """Radial C^2 bump: 1 on the plateau ball, 0 outside the support ball.

    Carries the sampled value, gradient components, and Laplacian (all from
    the analytic radial profile), plus the uniform gradient bound.
    """

    center: np.ndarray
    R: float
    kind: str
    field: Field
    grad: tuple[Field, ...]
    lap: Field
    grad_bound: float

    @property
    def r_plateau(self) -> float:
        return CUTOFF_RADII[self.kind][0] * self.R

    @property
    def r_support(self) -> float:
        return CUTOFF_RADII[self.kind][1] * self.R


def cutoff_family(spec: GridSpec, center, R: float, kind: str) -> CutoffFamily:
    if kind not in CUTOFF_RADII:
        raise InvalidParameter(f"unknown cutoff kind {kind!r}")
    if R <= 0:
        raise InvalidParameter(f"R must be positive, got {R}")
    rin, rout = (c * R for c in CUTOFF_RADII[kind])
    if rout > spec.X:
        raise InvalidGeometry(
            f"cutoff support radius {rout} exceeds the box half-width {spec.X}"
        )
    center = np.atleast_1d(np.asarray(center, dtype=float))
    width = rout - rin
    d = spec.distance_to(center)
    u = np.clip((d - rin) / width, 0.0, 1.0)
    vals = 1.0 - _smootherstep(u)
    inside = (d > rin) & (d < rout)
    radial_d1 = np.where(inside, -_smootherstep_d1(u) / width, 0.0)
    radial_d2 = np.where(inside, -_smootherstep_d2(u) / width**2, 0.0)

    coords = spec.coordinates()
    grads = []
    with np.errstate(invalid="ignore", divide="ignore"):
        for axis in range(spec.n):
            delta = spec.min_image_delta(coords[axis], center[axis])
            g = np.where(inside, radial_d1 * delta / np.where(d == 0, 1.0, d), 0.0)
            grads.append(Field(spec, g.reshape(-1)))
        lap = np.where(
            inside,
            radial_d2 + (spec.n - 1) * radial_d1 / np.where(d == 0, 1.0, d),
            0.0,
        )
    return CutoffFamily(
        center=center,
        R=float(R),
        kind=kind,
        field=Field(spec, vals.reshape(-1)),
        grad=tuple(grads),
        lap=Field(spec, lap.reshape(-1)),
        grad_bound=_SMOOTHERSTEP_MAX_SLOPE / width,
    )


def gaussian_weight(spec: GridSpec, x_j, h: float, t: float, T: float) -> Field:
    """Backward Gaussian weight (T-t+h)^{-n/2} exp(-|x-x_j|^2 / 4(T-t+h))."""
    if h <= 0:
        raise InvalidParameter(f"h must be positive, got {h}")
    if not 0 <= t <= T:
        raise InvalidParameter(f"t={t} outside [0, T={T}]")
    tau = T - t + h
    d = spec.distance_to(x_j)
    vals = tau ** (-spec.n / 2.0) * np.exp(-(d * d) / (4.0 * tau))
    return Field(spec, vals.reshape(-1), t)


@dataclass
class FrequencyTrace:
    """Per-time frequency samples with numerator/denominator components."""

    j: int
    h: float
    T: float
    times: np.ndarray
    N: np.ndarray
    num: np.ndarray  # weighted Dirichlet energies
    den: np.ndarray  # weighted masses

    def __len__(self) -> int:
        return self.times.size

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("t,N,num,den,j,h,T\n")
            for t, n, a, b in zip(self.times, self.N, self.num, self.den):
                fh.write(
                    f"{t!r},{n!r},{a!r},{b!r},{self.j},{self.h!r},{self.T!r}\n"
                )

    def mass_lookup(self):
        """Exact-time lookup of the weighted mass, for convexity checks."""
        table = {float(t): float(d) for t, d in zip(self.times, self.den)}
        return lambda t: table[float(t)]


def _weighted_integrals(
    phi: Field, cutoff: CutoffFamily, mask: Field, weight: Field
) -> tuple[float, float]:
    """(weighted Dirichlet energy, weighted mass) of eta*phi over the mask."""
    spec = phi.spec
    phi_j = Field(spec, cutoff.field.values * phi.values, phi.time)
    vol = spec.cell_volume
    mw = mask.values * weight.values
    den = vol * float(np.sum(mw * phi_j.values**2))
    num = vol * sum(
        float(np.sum(mw * g.values**2)) for g in gradient(phi_j)
    )
    return num, den


def frequency(phi: Field, cutoff: CutoffFamily, h: float, T: float) -> float:
    """N = (weighted Dirichlet energy)/(weighted mass) of the localized field."""
    if cutoff.kind != "eta":
        raise InvalidParameter("frequency uses the eta cutoff family")
    if phi.time is None:
        raise InvalidParameter("field must carry a time tag")
    spec = phi.spec
    mask_vals = (spec.distance_to(cutoff.center) < cutoff.r_support).astype(float)
    mask = Field(spec, mask_vals.reshape(-1))
    weight = gaussian_weight(spec, cutoff.center, h, phi.time, T)
    num, den = _weighted_integrals(phi, cutoff, mask, weight)
    if den <= 0.0:
        raise ZeroDenominator("weighted mass of the localized field vanishes")
    return num / den


def frequency_trace(
    phi_traj: Trajectory,
    region: ObservationRegion,
    j: int,
    h: float,
    window: tuple[float, float],
) -> FrequencyTrace:
    """Frequency samples for cube j over `window`; the window end is the
    terminal time of the Gaussian weight.  Zero-mass samples are omitted."""
    if h <= 0:
        raise InvalidParameter(f"h must be positive, got {h}")
    if not 0 <= j < region.ncubes:
        raise IndexOutOfRange(f"cube index {j} out of range")
    t_lo, T = window
    if not (0 <= t_lo < T <= phi_traj.T * (1 + 1e-12)):
        raise EmptyWindow(f"window {window} not inside [0, {phi_traj.T}]")
    sel = (phi_traj.times >= t_lo - 1e-12) & (phi_traj.times <= T + 1e-12)
    if not np.any(sel):
        raise EmptyWindow(f"no snapshots inside window {window}")
    spec = phi_traj.spec
    cutoff = cutoff_family(spec, region.centers[j], region.R, "eta")
    mask = ball_mask(region, j, 3.0 * region.R)
    times, Ns, nums, dens = [], [], [], []
    for k in np.nonzero(sel)[0]:
        t = float(phi_traj.times[k])
        weight = gaussian_weight(spec, region.centers[j], h, min(t, T), T)
        num, den = _weighted_integrals(phi_traj.fields[k], cutoff, mask, weight)
        if den <= 0.0:
            continue  # the frequency is defined only where the mass is nonzero
        times.append(t)
        Ns.append(num / den)
        nums.append(num)
        dens.append(den)
    return FrequencyTrace(
        j=j, h=float(h), T=float(T),
        times=np.array(times), N=np.array(Ns),
        num=np.array(nums), den=np.array(dens),
    )


def variational_identity_check(
    phi_traj: Trajectory,
    region: ObservationRegion,
    j: int,
    h: float,
    t: float,
    rel_tol: float = 0.05,
) -> EstimateReport:
    """Check  (1/2) d/dt(mass) + N * mass = int phi_j (dt phi_j - Lap phi_j) G.

    Time derivatives use centered second-order differences on neighboring
    snapshots; the Laplacian is spectral.  Passes when the relative residual
    stays below rel_tol plus a (dt/(T-t+h))^2 differencing allowance.
    """
    spec = phi_traj.spec
    T = phi_traj.T
    k = phi_traj.index_at(t)
    if k == 0 or k == len(phi_traj) - 1:
        raise BoundarySample(f"t={t} has no neighbors for centered differences")
    cutoff = cutoff_family(spec, region.centers[j], region.R, "eta")
    mask = ball_mask(region, j, 3.0 * region.R)
    dt_back = phi_traj.times[k] - phi_traj.times[k - 1]
    dt_fwd = phi_traj.times[k + 1] - phi_traj.times[k]
    if abs(dt_fwd - dt_back) > 1e-9 * max(dt_fwd, dt_back):
        raise InvalidParameter("centered differences need uniform snapshot spacing")
    step = float(dt_fwd)

    def mass_at(i: int) -> float:
        w = gaussian_weight(spec, region.centers[j], h, float(phi_traj.times[i]), T)
        _, den = _weighted_integrals(phi_traj.fields[i], cutoff, mask, w)
        return den

    weight = gaussian_weight(spec, region.centers[j], h, float(t), T)
    num, den = _weighted_integrals(phi_traj.fields[k], cutoff, mask, weight)
    if den <= 0.0:
        raise ZeroDenominator("weighted mass vanishes at the requested time")
    half_mass_dot = 0.5 * (mass_at(k + 1) - mass_at(k - 1)) / (2.0 * step)
    lhs = half_mass_dot + num  # N * mass equals the weighted Dirichlet energy

    eta = cutoff.field.values
    dphi_dt = eta * (
        phi_traj.fields[k + 1].values - phi_traj.fields[k - 1].values
    ) / (2.0 * step)
    phi_j = Field(spec, eta * phi_traj.fields[k].values)
    lap_phi_j = laplacian(phi_j).values
    integrand = phi_j.values * (dphi_dt - lap_phi_j)
    rhs = spec.cell_volume * float(
        np.sum(mask.values * weight.values * integrand)
    )

    # the two sides can cancel to a small boundary term, so the residual is
    # measured against the size of the identity's constituent terms
    scale = max(abs(half_mass_dot), num, abs(rhs), 1e-300)
    residual = abs(lhs - rhs) / scale
    allowance = (step / (T - t + h)) ** 2
    return EstimateReport(
        kind="lemma_2_4_i",
        lhs=lhs,
        rhs_factors={"rhs": rhs, "residual": residual, "allowance": allowance},
        passed=bool(residual < rel_tol + allowance),
        meta={"j": j, "h": h, "t": t, "T": T, "dt": step, "rel_tol": rel_tol},
    )


def localized_source(
    phi: Field, cutoff: CutoffFamily, F: Field | None
) -> Field:
    """The exact source dt(phi_j) - Lap(phi_j) = H_j - eta_j F, where
    H_j = -2 grad(phi).grad(eta_j) - phi * Lap(eta_j)."""
    spec = phi.spec
    grads = gradient(phi)
    H = np.zeros(spec.size)
    for g, ge in zip(grads, cutoff.grad):
        H -= 2.0 * g.values * ge.values
    H -= phi.values * cutoff.lap.values
    if F is not None:
        H = H - cutoff.field.values * F.values
    return Field(spec, H, phi.time)


def frequency_derivative_check(
    trace: FrequencyTrace,
    phi_traj: Trajectory,
    region: ObservationRegion,
    source_fields: list[Field] | None = None,
    rel_tol: float = 0.05,
) -> EstimateReport:
    """Check  N'(t) <= N/(T-t+h) + int (source)^2 G / int phi_j^2 G  at every
    interior trace sample, with the source evaluated exactly.

    `source_fields`, when given, holds F = f(y1) - f(y2) aligned with the
    trajectory snapshots; None means a source-free (linear heat) difference.
    """
    if len(trace) < 3:
        raise InsufficientSamples("need at least 3 trace samples")
    spec = phi_traj.spec
    j, h, T = trace.j, trace.h, trace.T
    cutoff = cutoff_family(spec, region.centers[j], region.R, "eta")
    mask = ball_mask(region, j, 3.0 * region.R)
    if source_fields is not None and len(source_fields) != len(phi_traj):
        raise InvalidParameter("source_fields must align with the trajectory")

    rows = []
    worst = -math.inf
    all_pass = True
    for k in range(1, len(trace) - 1):
        t = float(trace.times[k])
        step = 0.5 * float(trace.times[k + 1] - trace.times[k - 1])
        n_prime = float(
            (trace.N[k + 1] - trace.N[k - 1])
            / (trace.times[k + 1] - trace.times[k - 1])
        )
        idx = phi_traj.index_at(t)
        F = None if source_fields is None else source_fields[idx]
        src = localized_source(phi_traj.fields[idx], cutoff, F)
        weight = gaussian_weight(spec, region.centers[j], h, t, T)
        src_mass = spec.cell_volume * float(
            np.sum(mask.values * weight.values * src.values**2)
        )
        rhs = trace.N[k] / (T - t + h) + src_mass / trace.den[k]
        allowance = rhs * (step / (T - t + h)) ** 2 + step**2
        ok = n_prime <= rhs * (1.0 + rel_tol) + allowance
        all_pass &= bool(ok)
        worst = max(worst, n_prime - rhs)
        rows.append(
            {"t": t, "n_prime": n_prime, "rhs": float(rhs), "pass": bool(ok)}
        )
    return EstimateReport(
        kind="lemma_2_4_ii",
        lhs=worst,
        rhs_factors={"samples": float(len(rows))},
        passed=all_pass,
        meta={"j": j, "h": h, "T": T, "rel_tol": rel_tol, "samples": rows},
    )


# ---------------------------------------------------------------------------
# three-point logarithmic convexity


def _eval_g(g, t: float) -> float:
    if callable(g):
        return float(g(t))
    return float(g[t])


def log_convexity_check(
    g,
    t1: float,
    t2: float,
    t3: float,
    h: float,
    T: float,
    Ctilde: float,
    Cbar: float,
    slack: float = 1e-10,
) -> EstimateReport:
    """Three-point test  g(t2)^{1+D} <= g(t3) g(t1)^D e^K  in closed form.

    D is the ratio of the weight-clock increments of [t2,t3] and [t1,t2];
    K combines Ctilde and Cbar exactly as the convexity lemma prescribes.
    Comparison happens in log space so large exponents cannot overflow.
    """
    if h <= 0:
        raise InvalidParameter(f"h must be positive, got {h}")
    if not t1 < t2 < t3 <= T:
        raise BadOrdering(f"need t1 < t2 < t3 <= T, got {t1}, {t2}, {t3}, T={T}")
    if Ctilde < 0 or Cbar < 0:
        raise InvalidParameter("Ctilde and Cbar must be nonnegative")
    g1, g2, g3 = (_eval_g(g, t) for t in (t1, t2, t3))
    if min(g1, g2, g3) <= 0:
        raise NonPositiveG("g must be strictly positive at the three points")
    tau1, tau2, tau3 = (T - t + h for t in (t1, t2, t3))
    D = math.log(tau2 / tau3) / math.log(tau1 / tau2)
    inner = tau2 * math.log(tau2 / tau3)
    K = 2.0 * D * (t2 - t1) * (Ctilde + Cbar * (t2 - t1)) + 2.0 * (t3 - t2) * (
        Ctilde + Cbar * inner
    )
    log_lhs = (1.0 + D) * math.log(g2)
    log_rhs = math.log(g3) + D * math.log(g1) + K
    passed = log_lhs <= log_rhs + math.log1p(slack)
    return EstimateReport(
        kind="lemma_2_5",
        lhs=math.exp(min(log_lhs, 700.0)),
        rhs_factors={
            "D": D,
            "K": K,
            "log_lhs": log_lhs,
            "log_rhs": log_rhs,
            "g1": g1,
            "g2": g2,
            "g3": g3,
        },
        passed=bool(passed),
        meta={"t1": t1, "t2": t2, "t3": t3, "h": h, "T": T,
              "Ctilde": Ctilde, "Cbar": Cbar, "slack": slack},
    )


def convexity_hypotheses_from_trace(
    trace: FrequencyTrace, inflation: float = 1.25
) -> tuple[float, float]:
    """Empirical (Ctilde, Cbar) bounding the trace's differential system.

    Ctilde bounds |(1/2) D' + N D| / D and Cbar the positive excess of
    N' - N/(T-t+h), both from centered differences on the sampled trace;
    `inflation` covers inter-sample variation.
    """
    if len(trace) < 3:
        raise InsufficientSamples("need at least 3 trace samples")
    ctilde = 0.0
    cbar = 0.0
    for k in range(1, len(trace) - 1):
        dt2 = trace.times[k + 1] - trace.times[k - 1]
        d_dot = (trace.den[k + 1] - trace.den[k - 1]) / dt2
        n_dot = (trace.N[k + 1] - trace.N[k - 1]) / dt2
        ctilde = max(
            ctilde, abs(0.5 * d_dot + trace.N[k] * trace.den[k]) / trace.den[k]
        )
        cbar = max(cbar, n_dot - trace.N[k] / (trace.T - trace.times[k] + trace.h))
    return inflation * ctilde, inflation * max(cbar, 1e-12)


# ---------------------------------------------------------------------------
# diagnostic constants


@dataclass
class ProofConstants:
    """User-supplied constants so the diagnostic formulas are computable.

    The estimates only assert their existence; defaults of 1.0 make every
    formula runnable, and reports echo the constants used.
    """

    L2: float = 1.0
    L3: float = 1.0
    L4: float = 1.0
    L5: float = 1.0
    L6: float = 1.0
    Chat: float | None = None

    def __post_init__(self):
        for name in ("L2", "L3", "L4", "L5", "L6"):
            if getattr(self, name) <= 0:
                raise InvalidParameter(f"{name} must be positive")

    @classmethod
    def for_radius(cls, R: float, **overrides) -> "ProofConstants":
        """Defaults with the one explicitly known constant L6 = 9 R^2 / 16."""
        overrides.setdefault("L6", 9.0 * R * R / 16.0)
        return cls(**overrides)

    @property
    def k(self) -> float:
        return min(self.L6 / (2.0 * self.L2), 0.5)


def chat_constant(C1: float, L1: float, L_M: float, T: float) -> float:
    """The aggregated source bound (1+C1) L1 (1+L_M^2) (1+1/T)."""
    if T <= 0:
        raise InvalidParameter(f"T must be positive, got {T}")
    return (1.0 + C1) * L1 * (1.0 + L_M**2) * (1.0 + 1.0 / T)


def epsilon_and_h(theta: float, mu: float, pc: ProofConstants) -> tuple[float, float]:
    """Window half-length eps = k*theta and weight offset h = mu*eps."""
    if not 0 < mu < 1:
        raise InvalidParameter(f"mu must lie in (0, 1), got {mu}")
    if theta <= 0:
        raise InvalidParameter(f"theta must be positive, got {theta}")
    eps = pc.k * theta
    return eps, mu * eps


def theta_estimate(
    E_j: float,
    terminal_ball_mass: float,
    T: float,
    L_M: float,
    pc: ProofConstants,
) -> float:
    """Invert the localization-window formula for theta_j (diagnostic only).

    1/theta = L3 * (L4*L_M*T + L5*(1+1/T) + ln(E_j / terminal_ball_mass)),
    clamped into (0, min(1, T/2)].
    """
    if terminal_ball_mass <= 0:
        raise ZeroTerminalMass("terminal ball mass must be positive")
    if E_j <= 0:
        raise InvalidParameter(f"E_j must be positive, got {E_j}")
    if T <= 0:
        raise InvalidParameter(f"T must be positive, got {T}")
    inv = pc.L3 * (
        pc.L4 * L_M * T + pc.L5 * (1.0 + 1.0 / T) + math.log(E_j / terminal_ball_mass)
    )
    cap = min(1.0, T / 2.0)
    if inv <= 0:
        return cap
    return min(1.0 / inv, cap)


def convexity_bookkeeping(l: float, h: float, Chat: float) -> dict[str, float]:
    """Closed forms for the convexity exponent D_l and correction K_l."""
    if l < 1:
        raise InvalidParameter(f"l must be >= 1, got {l}")
    if h <= 0:
        raise InvalidParameter(f"h must be positive, got {h}")
    if Chat < 0:
        raise InvalidParameter(f"Chat must be nonnegative, got {Chat}")
    D_l = math.log(l + 1.0) / math.log((2.0 * l + 1.0) / (l + 1.0))
    lh = l * h
    K_l = (
        2.0 * D_l * ((Chat + 1.0) * lh + 4.0 * Chat * lh * lh)
        + 2.0 * (Chat + 1.0) * lh
        + 8.0 * Chat * l * (l + 1.0) * h * h * math.log(l + 1.0)
    )
    return {"D_l": D_l, "K_l": K_l}
