"""Reusable experiment suites: seeded ensembles wired into the checks.

These functions are the single implementation behind both the CLI
subcommands and the acceptance tests, so a passing suite means the same
thing everywhere.  All randomness flows through explicit seeds and all
reductions preserve ensemble order, keeping outputs byte-reproducible.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .dynamics import (
    NonlinearitySpec,
    Trajectory,
    smoothing_check,
    solve_linear_potential,
    solve_semilinear,
)
from .ensembles import (
    bump_mixture,
    bump_potential,
    localized_pair_data,
    rng_for,
    spike_field,
    trig_field,
)
from .errors import InvalidParameter
from .estimates import (
    SolutionPair,
    chi_bound_check,
    backward_bound_check,
    conditional_stability_check,
    fit_beta_C,
    fit_stability,
    global_interpolation_check,
    gronwall_superlinear_check,
    make_pair,
    observation_estimate_check,
    source_fields,
    unique_continuation_probe,
)
from .frequency import (
    convexity_hypotheses_from_trace,
    frequency_derivative_check,
    frequency_trace,
    log_convexity_check,
    variational_identity_check,
)
from .grid import Field, GridSpec, constant_field
from .obsregion import ObservationRegion, build_region
from .reporting import EstimateReport
from .semigroup import lp_lq_check


def _map_ordered(fn, items, jobs: int = 1):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _l2(field: Field) -> float:
    from .grid import lp_norm

    return lp_norm(field, 2)


# ---------------------------------------------------------------------------
# semigroup smoothing suite


def semigroup_suite(
    spec: GridSpec | None = None,
    count: int = 100,
    t_list=(0.1, 0.5, 1.0),
    pq_pairs=((math.inf, 1.0), (2.0, 1.0), (math.inf, 2.0), (2.0, 2.0)),
    seed: int = 2024,
    tol: float = 1e-8,
    kmax: int = 12,
    jobs: int = 1,
) -> list[EstimateReport]:
    """Seeded band-limited fields against the L^q -> L^p smoothing bound."""
    spec = spec or GridSpec(1, 256, 10.0)
    rng = rng_for(seed)
    fields = [trig_field(spec, rng, kmax=kmax) for _ in range(count)]
    tasks = [
        (f, t, q, p) for f in fields for (p, q) in pq_pairs for t in t_list
    ]
    return _map_ordered(
        lambda args: lp_lq_check(args[0], args[1], args[2], args[3], tol=tol),
        tasks,
        jobs,
    )


# ---------------------------------------------------------------------------
# pair ensembles


def ensemble_pairs(
    spec: GridSpec,
    fspec: NonlinearitySpec,
    T: float,
    dt: float,
    stride: int,
    count: int,
    seed: int,
    family: str = "perturbed_bumps",
    anchor=None,
    normalize_l2: float | None = None,
    perturb_amp: tuple[float, float] = (0.05, 0.3),
    perturb_width: tuple[float, float] = (0.3, 0.8),
    jobs: int = 1,
) -> list[SolutionPair]:
    """Seeded solution pairs.  Families:

    bumps_vs_zero    y2 = 0 (linear-heat phi = y1)
    perturbed_bumps  y2 = y1 + smaller random mixture
    localized        both data concentrated near `anchor` (frequency runs)
    """
    from .grid import lp_norm

    rng = rng_for(seed)
    data = []
    for _ in range(count):
        if family == "bumps_vs_zero":
            y1 = bump_mixture(spec, rng)
            if normalize_l2 is not None:
                y1 = y1 * (normalize_l2 / lp_norm(y1, 2))
            y2 = constant_field(spec, 0.0)
        elif family == "perturbed_bumps":
            y1 = bump_mixture(spec, rng)
            if normalize_l2 is not None:
                # normalize the base state only, so the pair difference keeps
                # the drawn perturbation scale (the class is a norm ball)
                y1 = y1 * (normalize_l2 / lp_norm(y1, 2))
            y2 = y1 + bump_mixture(
                spec, rng, count=2, amp_range=perturb_amp, width_range=perturb_width
            )
        elif family == "localized":
            if anchor is None:
                raise InvalidParameter("localized family needs an anchor point")
            y1, y2 = localized_pair_data(spec, rng, anchor)
        else:
            raise InvalidParameter(f"unknown ensemble family {family!r}")
        data.append((y1, y2))

    def solve_pair(pair_data):
        y1_0, y2_0 = pair_data
        t1 = solve_semilinear(y1_0, fspec, T, dt, stride)
        t2 = solve_semilinear(y2_0, fspec, T, dt, stride)
        return make_pair(t1, t2)

    return _map_ordered(solve_pair, data, jobs)


# ---------------------------------------------------------------------------
# interpolation / observation / stability ensembles


def interpolation_suite(
    spec: GridSpec,
    region: ObservationRegion,
    T: float = 0.5,
    dt: float = 0.05,
    count: int = 20,
    seed: int = 7,
    holdout_frac: float = 0.2,
    holdout_inflation: float = 1.5,
    jobs: int = 1,
) -> dict:
    """Linear-heat ensemble, minimax fit of (beta, C), and a holdout check."""
    fspec = NonlinearitySpec("zero")
    pairs = ensemble_pairs(
        spec, fspec, T, dt, 1, count, seed, family="bumps_vs_zero", jobs=jobs
    )
    reports = [global_interpolation_check(p, region) for p in pairs]
    triples = [
        (r.lhs, r.rhs_factors["phi0_l2sq"], r.rhs_factors["omega_mass"])
        for r in reports
    ]
    n_hold = max(1, int(round(holdout_frac * len(triples))))
    order = rng_for(seed + 1).permutation(len(triples))
    hold_idx = set(order[:n_hold].tolist())
    train = [t for i, t in enumerate(triples) if i not in hold_idx]
    hold = [t for i, t in enumerate(triples) if i in hold_idx]
    beta, C = fit_beta_C(train)
    train_ok = all(
        lhs <= C * a ** (1.0 - beta) * b**beta * (1.0 + 1e-9) for lhs, a, b in train
    )
    hold_ok = all(
        lhs <= holdout_inflation * C * a ** (1.0 - beta) * b**beta
        for lhs, a, b in hold
    )
    return {
        "beta": beta,
        "C": C,
        "triples": triples,
        "reports": reports,
        "train_ok": train_ok,
        "holdout_ok": hold_ok,
    }


def observation_suite(
    spec: GridSpec,
    region: ObservationRegion,
    fspec: NonlinearitySpec,
    T: float = 0.5,
    dt: float = 0.01,
    count: int = 10,
    seed: int = 11,
    jobs: int = 1,
) -> dict:
    pairs = ensemble_pairs(
        spec, fspec, T, dt, 1, count, seed, family="perturbed_bumps", jobs=jobs
    )
    reports = [observation_estimate_check(p, region) for p in pairs]
    c_values = [r.rhs_factors["C_req"] for r in reports]
    return {"reports": reports, "C_req": c_values, "max_C_req": max(c_values)}


def stability_suite(
    spec: GridSpec,
    region: ObservationRegion,
    fspec: NonlinearitySpec,
    T: float = 0.5,
    dt: float = 0.01,
    count: int = 15,
    seed: int = 13,
    holdout_frac: float = 0.2,
    holdout_inflation: float = 1.5,
    jobs: int = 1,
) -> dict:
    """Conditional stability ensemble with the delta = T/2 shift and a fit."""
    from .ensembles import gaussian_bump

    # fixed perturbation shape at a seeded random position: the samples then
    # span omega masses through localization alone, so the fitted exponent
    # reflects observation geometry rather than amplitude or decay scaling
    rng = rng_for(seed)
    data = []
    for _ in range(count):
        y1 = bump_mixture(spec, rng)
        y1 = y1 * (1.0 / _l2(y1))
        center = rng.uniform(-spec.X, spec.X, size=spec.n)
        y2 = y1 + gaussian_bump(spec, center, 0.3, 0.2)
        data.append((y1, y2))

    def solve_one(d):
        t1 = solve_semilinear(d[0], fspec, T, dt, 1)
        t2 = solve_semilinear(d[1], fspec, T, dt, 1)
        return make_pair(t1, t2)

    pairs = _map_ordered(solve_one, data, jobs)
    reports = [conditional_stability_check(p, region) for p in pairs]
    samples = [(r.lhs, r.rhs_factors["omega_mass"]) for r in reports]
    n_hold = max(1, int(round(holdout_frac * len(samples))))
    order = rng_for(seed + 1).permutation(len(samples))
    hold_idx = set(order[:n_hold].tolist())
    train = [s for i, s in enumerate(samples) if i not in hold_idx]
    hold = [s for i, s in enumerate(samples) if i in hold_idx]
    beta, C = fit_stability(train)
    train_ok = all(lhs <= C * b**beta * (1.0 + 1e-9) for lhs, b in train)
    hold_ok = all(lhs <= holdout_inflation * C * b**beta for lhs, b in hold)
    return {
        "beta": beta,
        "C": C,
        "samples": samples,
        "reports": reports,
        "train_ok": train_ok,
        "holdout_ok": hold_ok,
    }


# ---------------------------------------------------------------------------
# frequency-function suites


def frequency_suite(
    spec: GridSpec,
    region: ObservationRegion,
    fspec: NonlinearitySpec,
    T: float = 0.5,
    dt: float = 1e-3,
    stride: int = 10,
    count: int = 10,
    seed: int = 17,
    h: float = 0.1,
    j: int | None = None,
    window_lo: float = 0.3,
    jobs: int = 1,
) -> dict:
    """Lemma 2.4 derivative checks across a localized ensemble."""
    if j is None:
        j = region.ncubes // 2
    pairs = ensemble_pairs(
        spec, fspec, T, dt, stride, count, seed,
        family="localized", anchor=region.centers[j], jobs=jobs,
    )
    reports = []
    traces = []
    for pair in pairs:
        trace = frequency_trace(pair.phi, region, j, h, (window_lo, T))
        src = None if fspec.kind == "zero" else source_fields(pair)
        reports.append(
            frequency_derivative_check(trace, pair.phi, region, src)
        )
        traces.append(trace)
    return {"reports": reports, "traces": traces, "pairs": pairs, "j": j}


def identity_residual(
    pair: SolutionPair,
    region: ObservationRegion,
    j: int,
    h: float,
    t: float,
) -> EstimateReport:
    return variational_identity_check(pair.phi, region, j, h, t)


def convexity_suite(
    trace, max_triples: int = 400, inflation: float = 1.25
) -> list[EstimateReport]:
    """Three-point convexity checks on every sampled triple of one trace
    (subsampled deterministically when the triple count explodes)."""
    ctilde, cbar = convexity_hypotheses_from_trace(trace, inflation)
    g = trace.mass_lookup()
    n = len(trace)
    triples = [
        (i1, i2, i3)
        for i1 in range(n)
        for i2 in range(i1 + 1, n)
        for i3 in range(i2 + 1, n)
    ]
    if len(triples) > max_triples:
        step = len(triples) // max_triples + 1
        triples = triples[::step]
    reports = []
    for i1, i2, i3 in triples:
        reports.append(
            log_convexity_check(
                g,
                float(trace.times[i1]),
                float(trace.times[i2]),
                float(trace.times[i3]),
                trace.h,
                trace.T,
                ctilde,
                cbar,
            )
        )
    return reports


# ---------------------------------------------------------------------------
# chi / backward suites


def chi_suite(
    spec: GridSpec,
    fspec: NonlinearitySpec,
    T: float = 0.5,
    dt: float = 1e-3,
    stride: int = 25,
    count: int = 20,
    seed: int = 19,
    slack: float = 0.05,
    jobs: int = 1,
) -> dict:
    pairs = ensemble_pairs(
        spec, fspec, T, dt, stride, count, seed, family="perturbed_bumps", jobs=jobs
    )
    chi_reports = [chi_bound_check(p, slack) for p in pairs]
    backward_reports = [backward_bound_check(p, slack) for p in pairs]
    return {"chi": chi_reports, "backward": backward_reports, "pairs": pairs}


# ---------------------------------------------------------------------------
# solver-order and smoothing studies


def final_state(y0: Field, fspec: NonlinearitySpec, T: float, dt: float) -> Field:
    nsteps = max(1, round(T / dt))
    return solve_semilinear(y0, fspec, T, T / nsteps, nsteps).fields[-1]


def order_study(
    y0: Field, fspec: NonlinearitySpec, T: float, dt: float
) -> list[float]:
    """Observed Strang orders from dt, dt/2, dt/4 against a dt/8 reference."""
    from .grid import lp_norm

    ref = final_state(y0, fspec, T, dt / 8.0)
    errs = []
    for k in range(3):
        approx = final_state(y0, fspec, T, dt / 2.0**k)
        errs.append(lp_norm(approx - ref, 2))
    return [math.log2(errs[k] / errs[k + 1]) for k in range(2)]


def smoothing_case(
    n: int, q: float, fspec: NonlinearitySpec | None = None
) -> EstimateReport:
    """Tuned spike-decay experiment for one (n, q): grid, horizon, and fit
    window chosen so the self-similar decay dominates core and box effects."""
    fspec = fspec or NonlinearitySpec("zero")
    core = 1.5
    if (n, q) == (1, 1):
        spec, T, dt, window = GridSpec(1, 512, 16.0), 2.0, 0.025, (0.5, 2.0)
    elif (n, q) == (1, 2):
        # the homogeneous profile's core correction decays like (core^2/t)^(1/4),
        # so the smallest alias-safe core and a late window minimize the bias
        spec, T, dt, window = GridSpec(1, 512, 16.0), 16.0, 0.25, (6.0, 16.0)
        core = 0.5
    elif (n, q) == (2, 1):
        spec, T, dt, window = GridSpec(2, 128, 6.0), 1.8, 0.025, (0.3, 1.8)
    else:
        raise InvalidParameter(f"no tuned configuration for (n, q) = ({n}, {q})")
    y0 = spike_field(spec, q, core_cells=core)
    traj = solve_semilinear(y0, fspec, T, dt, 1)
    return smoothing_check(traj, q, window=window)


def potential_smoothing_case() -> "EstimateReport":
    """Unit-L1 bump potential against the sup-norm decay of a spike."""
    from .dynamics import potential_smoothing_check

    spec = GridSpec(1, 512, 16.0)
    a = bump_potential(spec, width=spec.X / 2.0)
    u0 = spike_field(spec, 1.0, core_cells=1.0)
    traj = solve_linear_potential(u0, a, T=0.5, dt=0.01)
    return potential_smoothing_check(traj, sigma=1.0, gamma=1.0, window=(0.1, 0.5))


# ---------------------------------------------------------------------------
# unique continuation and Gronwall sweeps


def uc_probe_suite(
    fspec: NonlinearitySpec,
    eps_list=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5),
    spec: GridSpec | None = None,
    region: ObservationRegion | None = None,
    T: float = 0.5,
    dt: float = 0.01,
    seed: int = 23,
) -> list[dict]:
    spec = spec or GridSpec(1, 256, 8.0)
    # wider cubes leave room for a perturbation bump strictly outside omega
    region = region or build_region(spec, 2.0, 0.5)
    rng = rng_for(seed)
    y0 = bump_mixture(spec, rng, count=2, amp_range=(0.5, 1.0), width_range=(0.5, 1.0))
    return unique_continuation_probe(y0, eps_list, fspec, region, T, dt)


def gronwall_sweep(
    count: int = 50, seed: int = 29, samples: int = 50, slack: float = 1e-6
) -> list[EstimateReport]:
    rng = rng_for(seed)
    reports = []
    for _ in range(count):
        A = rng.uniform(0.1, 5.0)
        B = rng.uniform(0.0, 3.0)
        alpha = rng.uniform(0.3, 2.5)
        g0 = rng.uniform(0.1, 20.0)
        T = rng.uniform(0.5, 2.0)
        reports.append(
            gronwall_superlinear_check(A, B, alpha, g0, T, samples, slack)
        )
    return reports
