"""Nonlinearities, time stepping, and the fixed-point solver.

The stepper is Strang splitting with exact spectral diffusion and a pointwise
reaction flow (closed form for the defocusing odd power, one RK4 stage
otherwise), second order in dt.  A Duhamel fixed-point solver serves as an
independent cross-check on short horizons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import (
    BlowUp,
    InvalidParameter,
    NoContraction,
    NonFinite,
    ZeroInitialData,
)
from .grid import Field, GridSpec, lp_norm, read_snapshot, write_snapshot
from .reporting import EstimateReport
from .semigroup import heat_propagate

DEFAULT_SUP_THRESHOLD = 1e8

KINDS = ("zero", "power_odd", "bounded_lipschitz")


@dataclass(frozen=True)
class NonlinearitySpec:
    """Pointwise reaction term f with f(0) = 0.

    zero:              f(y) = 0
    power_odd:         f(y) = lam * |y|^(p-1) * y        (p > 1)
    bounded_lipschitz: f(y) = lam * sin(y)
    """

    kind: str
    lam: float = 0.0
    p: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "power_odd":
            if self.p is None or not self.p > 1:
                raise InvalidParameter(f"power_odd needs p > 1, got {self.p}")

    def f(self, y: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros_like(y)
        if self.kind == "power_odd":
            return self.lam * np.abs(y) ** (self.p - 1.0) * y
        return self.lam * np.sin(y)

    def fprime(self, y: np.ndarray) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros_like(y)
        if self.kind == "power_odd":
            return self.lam * self.p * np.abs(y) ** (self.p - 1.0)
        return self.lam * np.cos(y)


def apply_f(fspec: NonlinearitySpec, field: Field) -> Field:
    return Field(field.spec, fspec.f(field.values), field.time)


def lipschitz_on_ball(fspec: NonlinearitySpec, M: float) -> float:
    """Lipschitz constant of f on {|s| <= M}, from the analytic derivative."""
    if M < 0:
        raise InvalidParameter(f"M must be nonnegative, got {M}")
    if fspec.kind == "zero":
        return 0.0
    if fspec.kind == "power_odd":
        return abs(fspec.lam) * fspec.p * M ** (fspec.p - 1.0)
    return abs(fspec.lam)  # |cos| attains 1 at the origin for any M


@dataclass
class Trajectory:
    """Time-ordered snapshots of one solve.

    `dt` is the integrator step; stored snapshots are `stride` steps apart,
    so consecutive stored times differ by dt*stride.  `potential` carries the
    (time, Field) samples of a(x, t) for linear-potential solves.
    """

    spec: GridSpec
    times: np.ndarray
    fields: list[Field]
    fspec: NonlinearitySpec
    dt: float
    stride: int = 1
    potential: list[tuple[float, Field]] | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.fields) != self.times.size:
            raise InvalidParameter("times and fields length mismatch")
        if self.times.size == 0 or self.times[0] != 0.0:
            raise InvalidParameter("trajectory must start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise InvalidParameter("times must be strictly increasing")

    def __len__(self) -> int:
        return self.times.size

    @property
    def T(self) -> float:
        return float(self.times[-1])

    def index_at(self, t: float, tol: float = 1e-9) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol * max(1.0, self.T):
            raise InvalidParameter(f"t={t} is not a stored snapshot time")
        return k

    def field_at(self, t: float) -> Field:
        return self.fields[self.index_at(t)]


def sup_norm_bound(traj: Trajectory) -> float:
    """Max over stored snapshots of the sup norm (the shared bound M)."""
    if len(traj) == 0:
        raise InvalidParameter("empty trajectory")
    return max(lp_norm(f, math.inf) for f in traj.fields)


# ---------------------------------------------------------------------------
# reaction substep flows


def _ode_flow(fspec: NonlinearitySpec, y: np.ndarray, dt: float) -> np.ndarray:
    """Pointwise flow of y' = -f(y) over one substep of length dt."""
    if fspec.kind == "zero":
        return y
    if fspec.kind == "power_odd" and fspec.lam > 0:
        # exact dissipative power flow
        pm1 = fspec.p - 1.0
        base = 1.0 + pm1 * fspec.lam * np.abs(y) ** pm1 * dt
        return y * base ** (-1.0 / pm1)
    # classical 4-stage one-step integration of the pointwise ODE
    k1 = -fspec.f(y)
    k2 = -fspec.f(y + 0.5 * dt * k1)
    k3 = -fspec.f(y + 0.5 * dt * k2)
    k4 = -fspec.f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _resolve_steps(T: float, dt: float, stride: int) -> tuple[int, float]:
    if not (T > 0 and dt > 0):
        raise InvalidParameter("T and dt must be positive")
    if dt > T * (1 + 1e-12):
        raise InvalidParameter(f"dt={dt} exceeds T={T}")
    if stride < 1:
        raise InvalidParameter(f"stride must be >= 1, got {stride}")
    nsteps = max(1, round(T / dt))
    if nsteps % stride != 0:
        raise InvalidParameter(
            f"snapshot stride {stride} must divide the step count {nsteps}"
        )
    return nsteps, T / nsteps  # dt coerced so the steps tile [0, T] exactly


def _guard_state(v: np.ndarray, sup_threshold: float, t: float):
    sup = float(np.max(np.abs(v)))
    if sup > sup_threshold:  # inf counts: the threshold was crossed
        raise BlowUp(f"sup norm exceeded {sup_threshold} near t={t}")
    if not math.isfinite(sup):  # NaN survives the comparison above
        raise NonFinite(f"solution lost finiteness near t={t}")


def solve_semilinear(
    y0: Field,
    fspec: NonlinearitySpec,
    T: float,
    dt: float,
    snapshot_stride: int = 1,
    sup_threshold: float = DEFAULT_SUP_THRESHOLD,
) -> Trajectory:
    """Strang-split solve of  d_t y - Lap y + f(y) = 0  on [0, T].

    Per step: half-step exact diffusion, pointwise reaction flow over dt,
    half-step exact diffusion.  Stores every `snapshot_stride`-th step
    (step 0 included); `snapshot_stride` must divide the step count.
    """
    nsteps, dt = _resolve_steps(T, dt, snapshot_stride)
    spec = y0.spec
    half = np.exp(-spec.xi_squared() * (dt / 2.0))

    v = y0.values.reshape(spec.shape).copy()
    times = [0.0]
    fields = [y0.with_time(0.0)]
    for k in range(1, nsteps + 1):
        v = np.fft.ifftn(half * np.fft.fftn(v)).real
        v = _ode_flow(fspec, v, dt)
        v = np.fft.ifftn(half * np.fft.fftn(v)).real
        t = k * dt
        _guard_state(v, sup_threshold, t)
        if k % snapshot_stride == 0:
            times.append(t)
            fields.append(Field(spec, v.reshape(-1), t))
    return Trajectory(spec, np.array(times), fields, fspec, dt, snapshot_stride)


# ---------------------------------------------------------------------------
# Duhamel fixed-point solver (independent oracle for the stepper)


def picard_solve(
    y0: Field,
    fspec: NonlinearitySpec,
    Tstar: float,
    n_quad: int = 64,
    tol: float = 1e-10,
    max_sweeps: int = 200,
) -> Field:
    """Fixed point of the mild-solution map, returned at t = Tstar.

    The map xi -> e^{t Lap} y0 - int_0^t e^{(t-s) Lap} f(xi(s)) ds is iterated
    on n_quad uniform nodes with trapezoid weights until the sup-in-time
    L^inf distance between sweeps drops below tol.  Raises NoContraction if
    that distance fails to decrease for 5 consecutive sweeps (Tstar beyond
    the contraction regime) or the sweep budget is exhausted.
    """
    if Tstar <= 0:
        raise InvalidParameter(f"Tstar must be positive, got {Tstar}")
    if n_quad < 2:
        raise InvalidParameter(f"n_quad must be >= 2, got {n_quad}")
    spec = y0.spec
    ds = Tstar / (n_quad - 1)
    decay = np.exp(-spec.xi_squared() * ds)  # one-node propagator in Fourier

    y0_hat = np.fft.fftn(y0.grid_view())
    free = []  # e^{s_i Lap} y0 at every node
    cur = y0_hat.copy()
    for i in range(n_quad):
        free.append(np.fft.ifftn(cur).real)
        cur = cur * decay

    xi = [f.copy() for f in free]  # initial guess: the free evolution
    prev_dist = None
    stall = 0
    for _ in range(max_sweeps):
        with np.errstate(over="ignore", invalid="ignore"):
            f_hat = [np.fft.fftn(fspec.f(x)) for x in xi]
            new = [free[0].copy()]
            run = f_hat[0].copy()   # sum_j E^{i-j} f_j (unit weights)
            head = f_hat[0].copy()  # E^i f_0 (endpoint correction)
            for i in range(1, n_quad):
                run = run * decay + f_hat[i]
                head = head * decay
                quad = ds * (run - 0.5 * f_hat[i] - 0.5 * head)
                new.append(free[i] - np.fft.ifftn(quad).real)
            dist = 0.0
            for a, b in zip(new, xi):
                d = np.max(np.abs(a - b))
                dist = max(dist, float(d) if np.isfinite(d) else math.inf)
        xi = new
        if dist < tol:
            out = xi[-1]
            if not np.all(np.isfinite(out)):
                raise NonFinite("fixed point is not finite")
            return Field(spec, out.reshape(-1), Tstar)
        if prev_dist is not None and not dist < prev_dist:
            stall += 1
            if stall >= 5:
                raise NoContraction(
                    f"iteration distance failed to decrease for {stall} sweeps "
                    f"(Tstar={Tstar} likely beyond the contraction regime)"
                )
        else:
            stall = 0
        prev_dist = dist
    raise NoContraction(f"no fixed point within {max_sweeps} sweeps at Tstar={Tstar}")


# ---------------------------------------------------------------------------
# linear equation with potential


def _normalize_potential(a, spec: GridSpec) -> list[tuple[float, Field]]:
    if isinstance(a, Field):
        return [(0.0, a)]
    if isinstance(a, Trajectory):
        return [(float(t), f) for t, f in zip(a.times, a.fields)]
    samples = []
    for item in a:
        if isinstance(item, Field):
            if item.time is None:
                raise InvalidParameter("potential Field samples need time tags")
            samples.append((float(item.time), item))
        else:
            t, f = item
            samples.append((float(t), f))
    if not samples:
        raise InvalidParameter("empty potential sampling")
    samples.sort(key=lambda p: p[0])
    for _, f in samples:
        if f.spec != spec:
            raise InvalidParameter("potential sampled on a different grid")
    return samples


def _interp_potential(samples: list[tuple[float, Field]], t: float) -> np.ndarray:
    times = [s[0] for s in samples]
    if t <= times[0]:
        return samples[0][1].values
    if t >= times[-1]:
        return samples[-1][1].values
    k = int(np.searchsorted(times, t)) - 1
    t0, f0 = samples[k]
    t1, f1 = samples[k + 1]
    w = (t - t0) / (t1 - t0)
    return (1.0 - w) * f0.values + w * f1.values


def solve_linear_potential(
    u0: Field,
    a,
    T: float,
    dt: float,
    snapshot_stride: int = 1,
    sup_threshold: float = DEFAULT_SUP_THRESHOLD,
) -> Trajectory:
    """Strang-split solve of  d_t u - Lap u + a(x,t) u = 0  on [0, T].

    `a` may be a single Field (static), a Trajectory, or a list of time-tagged
    Fields; it is interpolated linearly in time and should be sampled at
    least as finely as dt.  The reaction substep is the exact pointwise flow
    u -> u * exp(-a dt) with a evaluated at the step midpoint.
    """
    nsteps, dt = _resolve_steps(T, dt, snapshot_stride)
    spec = u0.spec
    samples = _normalize_potential(a, spec)
    half = np.exp(-spec.xi_squared() * (dt / 2.0))

    v = u0.values.reshape(spec.shape).copy()
    times = [0.0]
    fields = [u0.with_time(0.0)]
    for k in range(1, nsteps + 1):
        a_mid = _interp_potential(samples, (k - 0.5) * dt).reshape(spec.shape)
        v = np.fft.ifftn(half * np.fft.fftn(v)).real
        v = v * np.exp(-a_mid * dt)
        v = np.fft.ifftn(half * np.fft.fftn(v)).real
        t = k * dt
        _guard_state(v, sup_threshold, t)
        if k % snapshot_stride == 0:
            times.append(t)
            fields.append(Field(spec, v.reshape(-1), t))
    fspec = NonlinearitySpec("zero")
    return Trajectory(spec, np.array(times), fields, fspec, dt, snapshot_stride, samples)


# ---------------------------------------------------------------------------
# smoothing checks


def _loglog_slope(ts: np.ndarray, vals: np.ndarray) -> float:
    return float(np.polyfit(np.log(ts), np.log(vals), 1)[0])


def _decade_selector(ts: np.ndarray) -> np.ndarray:
    sel = ts <= 10.0 * ts[0]  # smallest decade of positive samples
    if np.sum(sel) < 2:
        sel = np.zeros(ts.shape, dtype=bool)
        sel[: min(3, ts.size)] = True
    return sel


def _window_selector(ts: np.ndarray, window: tuple[float, float] | None) -> np.ndarray:
    if window is None:
        return _decade_selector(ts)
    sel = (ts >= window[0]) & (ts <= window[1])
    if np.sum(sel) < 2:
        sel = np.zeros(ts.shape, dtype=bool)
        sel[: min(3, ts.size)] = True
    return sel


def smoothing_check(
    traj: Trajectory,
    q: float,
    window: tuple[float, float] | None = None,
    slope_floor: float = -0.05,
) -> EstimateReport:
    """Trace t -> t^{n/2q} ||y(t)||_inf / ||y0||_q and its supremum.

    Passes when the weighted trace shows no growth trend toward t -> 0+: the
    log-log fit over the smallest decade of sampled times must have slope
    >= slope_floor.  `window` selects the fit range of the reported decay
    slopes only (defaulting to the same decade).
    """
    if q < 1:
        raise InvalidParameter(f"q must be >= 1, got {q}")
    if len(traj) < 3:
        raise InvalidParameter("need at least 3 snapshots")
    n = traj.spec.n
    norm_q = lp_norm(traj.fields[0], q)
    if norm_q == 0:
        raise ZeroInitialData("initial data is identically zero")
    ts, sups = [], []
    for t, f in zip(traj.times, traj.fields):
        if t > 0:
            ts.append(t)
            sups.append(lp_norm(f, math.inf))
    ts = np.asarray(ts)
    sups = np.asarray(sups)
    trace = ts ** (n / (2.0 * q)) * sups / norm_q
    decade = _decade_selector(ts)
    decade_slope = _loglog_slope(ts[decade], trace[decade])
    sel = _window_selector(ts, window)
    trace_slope = _loglog_slope(ts[sel], trace[sel])
    sup_slope = _loglog_slope(ts[sel], sups[sel])
    return EstimateReport(
        kind="eq_3_5",
        lhs=float(np.max(trace)),
        rhs_factors={
            "initial_lq_norm": norm_q,
            "decade_slope": decade_slope,
            "trace_slope": trace_slope,
            "supnorm_slope": sup_slope,
        },
        passed=bool(decade_slope >= slope_floor),
        meta={
            "n": n,
            "q": q,
            "slope_floor": slope_floor,
            "fit_t_lo": float(ts[sel][0]),
            "fit_t_hi": float(ts[sel][-1]),
            "trace_t": [float(t) for t in ts],
            "trace": [float(v) for v in trace],
        },
    )


def potential_smoothing_check(
    traj: Trajectory,
    sigma: float,
    gamma: float,
    window: tuple[float, float] | None = None,
    slope_floor: float = -0.05,
) -> EstimateReport:
    """Weighted sup-norm trace for the potential equation.

    Uses L = sup_t ||a(t)||_sigma and theta = 2*sigma/(2*sigma - n); the trace
    is ||u(t)||_inf * t^{n/2gamma} / (e^{L^theta t} ||u0||_gamma).
    """
    n = traj.spec.n
    if sigma <= n / 2.0 or sigma < 1:
        raise InvalidParameter(f"need sigma > n/2 and sigma >= 1, got {sigma}")
    if gamma < 1:
        raise InvalidParameter(f"gamma must be >= 1, got {gamma}")
    if traj.potential is None:
        raise InvalidParameter("trajectory carries no potential samples")
    norm_g = lp_norm(traj.fields[0], gamma)
    if norm_g == 0:
        raise ZeroInitialData("initial data is identically zero")
    pot_norm = max(lp_norm(f, sigma) for _, f in traj.potential)
    theta = 2.0 * sigma / (2.0 * sigma - n)
    rate = pot_norm**theta
    ts, sups = [], []
    for t, f in zip(traj.times, traj.fields):
        if t > 0:
            ts.append(t)
            sups.append(lp_norm(f, math.inf))
    ts = np.asarray(ts)
    sups = np.asarray(sups)
    trace = ts ** (n / (2.0 * gamma)) * sups / (np.exp(rate * ts) * norm_g)
    decade = _decade_selector(ts)
    decade_slope = _loglog_slope(ts[decade], trace[decade])
    sel = _window_selector(ts, window)
    trace_slope = _loglog_slope(ts[sel], trace[sel])
    sup_slope = _loglog_slope(ts[sel], sups[sel])
    return EstimateReport(
        kind="eq_2_3a",
        lhs=float(np.max(trace)),
        rhs_factors={
            "potential_norm": pot_norm,
            "theta": theta,
            "decade_slope": decade_slope,
            "trace_slope": trace_slope,
            "supnorm_slope": sup_slope,
        },
        passed=bool(decade_slope >= slope_floor),
        meta={
            "n": n,
            "sigma": sigma,
            "gamma": gamma,
            "slope_floor": slope_floor,
            "fit_t_lo": float(ts[sel][0]),
            "fit_t_hi": float(ts[sel][-1]),
        },
    )


# ---------------------------------------------------------------------------
# trajectory serialization: a directory of snapshots plus a manifest


def save_trajectory(traj: Trajectory, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    lines = [
        f"n={traj.spec.n}",
        f"m={traj.spec.m}",
        f"X={traj.spec.X!r}",
        f"dt={traj.dt!r}",
        f"T={traj.T!r}",
        f"fspec.kind={traj.fspec.kind}",
        f"lambda={traj.fspec.lam!r}",
        f"p={'' if traj.fspec.p is None else repr(traj.fspec.p)}",
        f"stride={traj.stride}",
        f"count={len(traj)}",
    ]
    (directory / "manifest.txt").write_text("\n".join(lines) + "\n")
    for k, f in enumerate(traj.fields):
        write_snapshot(f, directory / f"snap_{k:05d}.hobs")


def load_trajectory(directory) -> Trajectory:
    directory = Path(directory)
    manifest = {}
    for line in (directory / "manifest.txt").read_text().splitlines():
        if "=" in line:
            key, val = line.split("=", 1)
            manifest[key.strip()] = val.strip()
    count = int(manifest["count"])
    fields = [read_snapshot(directory / f"snap_{k:05d}.hobs") for k in range(count)]
    fspec = NonlinearitySpec(
        manifest["fspec.kind"],
        float(manifest["lambda"]),
        float(manifest["p"]) if manifest.get("p") else None,
    )
    times = np.array([f.time for f in fields], dtype=float)
    return Trajectory(
        fields[0].spec, times, fields, fspec,
        float(manifest["dt"]), int(manifest["stride"]),
    )
