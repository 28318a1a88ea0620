"""Batch experiment runner: every check as a subcommand plus a config-driven
`run` that executes a list of checks and writes deterministic reports.

Exit codes: 0 all requested checks passed, 2 a check ran and failed,
1 the run could not be executed (bad config, module error).  Identical
configs and seeds produce byte-identical output files.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import suites
from .dynamics import NonlinearitySpec, solve_semilinear, save_trajectory
from .ensembles import gaussian_bump, rng_for
from .errors import HeatObsError, ConfigInvalid, NoReports
from .estimates import make_pair, source_fields
from .frequency import frequency_trace, log_convexity_check, variational_identity_check
from .grid import GridSpec
from .obsregion import build_region, save_region
from .reporting import EstimateReport, read_reports, write_reports, write_table

DEFAULTS = {
    "grid": {"n": "1", "m": "256", "X": "8.0"},
    "dynamics": {
        "kind": "power_odd", "lambda": "1.0", "p": "3.0",
        "T": "0.5", "dt": "0.001", "stride": "10",
    },
    "region": {"L": "1.0", "r": "0.25", "placement": "centered", "seed": "0"},
    "ensemble": {"count": "10", "seed": "42"},
    "semigroup": {
        "count": "100", "kmax": "12", "tol": "1e-8",
        "t_list": "0.1,0.5,1.0", "pairs": "inf:1,2:1,inf:2,2:2",
    },
    "gronwall": {"count": "50", "samples": "50", "seed": "29", "slack": "1e-6"},
    "interpolate": {"count": "12", "T": "0.5", "dt": "0.05", "seed": "7"},
    "observe": {"count": "8", "T": "0.5", "dt": "0.01", "seed": "11"},
    "stability": {"count": "12", "T": "0.5", "dt": "0.01", "seed": "13"},
    "frequency": {"h": "0.1", "window_lo": "0.3", "j": "-1", "count": "4", "seed": "17"},
    "ucprobe": {"eps": "1e-1,1e-2,1e-3,1e-4,1e-5", "T": "0.5", "dt": "0.01", "seed": "23"},
    "solve": {"family": "gaussian", "width": "1.0", "amplitude": "1.0"},
    "checks": {"names": "verify_semigroup,gronwall,interpolate"},
    "output": {"dir": "out"},
}


def load_config(path: str | None) -> dict:
    """Merge the INI-style config file over the documented defaults."""
    merged = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    raw = b""
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigInvalid(f"config file {path} not found")
        raw = p.read_bytes()
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keys like T, X, L are case-sensitive
        try:
            parser.read_string(raw.decode())
        except (configparser.Error, UnicodeDecodeError) as exc:
            raise ConfigInvalid(f"cannot parse config {path}: {exc}") from exc
        for section in parser.sections():
            merged.setdefault(section, {})
            for key, val in parser.items(section):
                merged[section][key] = val
    merged["_raw"] = raw
    return merged


def _f(cfg, sec, key) -> float:
    try:
        return float(cfg[sec][key])
    except (KeyError, ValueError) as exc:
        raise ConfigInvalid(f"bad float for [{sec}] {key}") from exc


def _i(cfg, sec, key) -> int:
    try:
        return int(cfg[sec][key])
    except (KeyError, ValueError) as exc:
        raise ConfigInvalid(f"bad integer for [{sec}] {key}") from exc


def _floats(text: str) -> list[float]:
    return [math.inf if tok.strip() in ("inf", "Inf") else float(tok)
            for tok in text.split(",") if tok.strip()]


def grid_from_config(cfg) -> GridSpec:
    return GridSpec(_i(cfg, "grid", "n"), _i(cfg, "grid", "m"), _f(cfg, "grid", "X"))


def fspec_from_config(cfg) -> NonlinearitySpec:
    kind = cfg["dynamics"]["kind"]
    lam = _f(cfg, "dynamics", "lambda")
    p = _f(cfg, "dynamics", "p") if kind == "power_odd" else None
    return NonlinearitySpec(kind, lam, p)


def region_from_config(cfg, spec: GridSpec):
    seed_txt = cfg["region"].get("seed", "").strip()
    return build_region(
        spec,
        _f(cfg, "region", "L"),
        _f(cfg, "region", "r"),
        cfg["region"]["placement"],
        int(seed_txt) if seed_txt else None,
    )


def _seed(cfg, sec, override: int | None) -> int:
    return _i(cfg, sec, "seed") if override is None else override


# ---------------------------------------------------------------------------
# check runners (each returns a list of pass flags it contributed)


def run_verify_semigroup(cfg, out: Path, seed, jobs, tol_scale) -> list[bool]:
    spec = grid_from_config(cfg)
    pq = []
    for tok in cfg["semigroup"]["pairs"].split(","):
        p_txt, q_txt = tok.strip().split(":")
        pq.append((math.inf if p_txt == "inf" else float(p_txt), float(q_txt)))
    reports = suites.semigroup_suite(
        spec,
        count=_i(cfg, "semigroup", "count"),
        t_list=tuple(_floats(cfg["semigroup"]["t_list"])),
        pq_pairs=tuple(pq),
        seed=_seed(cfg, "ensemble", seed),
        tol=_f(cfg, "semigroup", "tol") * tol_scale,
        kmax=_i(cfg, "semigroup", "kmax"),
        jobs=jobs,
    )
    write_reports(reports, out / "semigroup_reports.json")
    return [r.passed for r in reports]


def run_gronwall(cfg, out: Path, seed, jobs, tol_scale) -> list[bool]:
    reports = suites.gronwall_sweep(
        count=_i(cfg, "gronwall", "count"),
        seed=_seed(cfg, "gronwall", seed),
        samples=_i(cfg, "gronwall", "samples"),
        slack=_f(cfg, "gronwall", "slack") * tol_scale,
    )
    write_reports(reports, out / "gronwall_reports.json")
    return [r.passed for r in reports]


def run_interpolate(cfg, out: Path, seed, jobs, tol_scale) -> list[bool]:
    spec = grid_from_config(cfg)
    region = region_from_config(cfg, spec)
    result = suites.interpolation_suite(
        spec,
        region,
        T=_f(cfg, "interpolate", "T"),
        dt=_f(cfg, "interpolate", "dt"),
        count=_i(cfg, "interpolate", "count"),
        seed=_seed(cfg, "interpolate", seed),
        jobs=jobs,
    )
    write_reports(result["reports"], out / "interpolation_reports.json")
    rows = [
        {"pair": i, "phiT_l2sq": l, "phi0_l2sq": a, "omega_mass": b}
        for i, (l, a, b) in enumerate(result["triples"])
    ]
    write_table(rows, ["pair", "phiT_l2sq", "phi0_l2sq", "omega_mass"],
                out / "interpolation_table.csv")
    fit = {
        "beta": result["beta"], "C": result["C"],
        "train_ok": result["train_ok"], "holdout_ok": result["holdout_ok"],
    }
    (out / "interpolation_fit.json").write_text(
        json.dumps(fit, sort_keys=True, indent=2) + "\n"
    )
    flags = [r.passed for r in result["reports"]]
    flags += [result["train_ok"], result["holdout_ok"], 0.0 < result["beta"] < 1.0]
    return flags


def run_observe(cfg, out: Path, seed, jobs, tol_scale) -> list[bool]:
    spec = grid_from_config(cfg)
    region = region_from_config(cfg, spec)
    result = suites.observation_suite(
        spec, region, fspec_from_config(cfg),
        T=_f(cfg, "observe", "T"), dt=_f(cfg, "observe", "dt"),
        count=_i(cfg, "observe", "count"), seed=_seed(cfg, "observe", seed),
        jobs=jobs,
    )
    write_reports(result["reports"], out / "observation_reports.json")
    rows = [
        {
            "pair": i,
            "phi0_l2sq": r.lhs,
            "omega_mass": r.rhs_factors["omega_mass"],
            "chi0": r.rhs_factors["chi0"],
            "C_req": r.rhs_factors["C_req"],
        }
        for i, r in enumerate(result["reports"])
    ]
    write_table(rows, ["pair", "phi0_l2sq", "omega_mass", "chi0", "C_req"],
                out / "observation_table.csv")
    return [r.passed for r in result["reports"]]


def run_stability(cfg, out: Path, seed, jobs, tol_scale) -> list[bool]:
    spec = grid_from_config(cfg)
    region = region_from_config(cfg, spec)
    fspec = fspec_from_config(cfg)
    result = suites.stability_suite(
        spec, region, fspec,
        T=_f(cfg, "stability", "T"), dt=_f(cfg, "stability", "dt"),
        count=_i(cfg, "stability", "count"), seed=_seed(cfg, "stability", seed),
        jobs=jobs,
    )
    write_reports(result["reports"], out / "stability_reports.json")
    fit = {
        "beta": result["beta"], "C": result["C"],
        "train_ok": result["train_ok"], "holdout_ok": result["holdout_ok"],
    }
    (out / "stability_fit.json").write_text(
        json.dumps(fit, sort_keys=True, indent=2) + "\n"
    )
    return [r.passed for r in result["reports"]] + [
        result["train_ok"], result["holdout_ok"], 0.0 < result["beta"] < 1.0
    ]


def run_frequency(cfg, out: Path, seed, jobs, tol_scale) -> list[bool]:
    spec = grid_from_config(cfg)
    region = region_from_config(cfg, spec)
    fspec = fspec_from_config(cfg)
    j_cfg = _i(cfg, "frequency", "j")
    result = suites.frequency_suite(
        spec, region, fspec,
        T=_f(cfg, "dynamics", "T"), dt=_f(cfg, "dynamics", "dt"),
        stride=_i(cfg, "dynamics", "stride"),
        count=_i(cfg, "frequency", "count"),
        seed=_seed(cfg, "frequency", seed),
        h=_f(cfg, "frequency", "h"),
        j=None if j_cfg < 0 else j_cfg,
        window_lo=_f(cfg, "frequency", "window_lo"),
        jobs=jobs,
    )
    for i, trace in enumerate(result["traces"]):
        trace.to_csv(out / f"frequency_trace_{i:03d}.csv")
    reports = list(result["reports"])
    # identity check at the mid-window sample of the first pair
    pair = result["pairs"][0]
    trace0 = result["traces"][0]
    mid_t = float(trace0.times[len(trace0) // 2])
    reports.append(
        variational_identity_check(
            pair.phi, region, result["j"], _f(cfg, "frequency", "h"), mid_t
        )
    )
    write_reports(reports, out / "frequency_reports.json")
    return [r.passed for r in reports]


def run_convexity(cfg, out: Path, seed, jobs, tol_scale) -> list[bool]:
    spec = grid_from_config(cfg)
    region = region_from_config(cfg, spec)
    result = suites.frequency_suite(
        spec, region, NonlinearitySpec("zero"),
        T=_f(cfg, "dynamics", "T"), dt=_f(cfg, "dynamics", "dt"),
        stride=_i(cfg, "dynamics", "stride"),
        count=1, seed=_seed(cfg, "frequency", seed),
        h=_f(cfg, "frequency", "h"),
        window_lo=_f(cfg, "frequency", "window_lo"),
        jobs=jobs,
    )
    reports = suites.convexity_suite(result["traces"][0])
    write_reports(reports, out / "convexity_reports.json")
    return [r.passed for r in reports]


def run_probe_uc(cfg, out: Path, seed, jobs, tol_scale) -> list[bool]:
    spec = grid_from_config(cfg)
    region = region_from_config(cfg, spec)
    rows = suites.uc_probe_suite(
        fspec_from_config(cfg),
        eps_list=tuple(_floats(cfg["ucprobe"]["eps"])),
        spec=spec, region=region,
        T=_f(cfg, "ucprobe", "T"), dt=_f(cfg, "ucprobe", "dt"),
        seed=_seed(cfg, "ucprobe", seed),
    )
    write_table(rows, ["eps", "omega_mass_T", "phiT_l2sq", "phi0_l2sq"],
                out / "uc_probe_table.csv")
    from .estimates import rank_correlation

    rho = rank_correlation(
        [r["omega_mass_T"] for r in rows], [r["phiT_l2sq"] for r in rows]
    )
    (out / "uc_probe_summary.json").write_text(
        json.dumps({"rank_correlation": rho}, sort_keys=True, indent=2) + "\n"
    )
    return [rho == 1.0]


CHECK_RUNNERS = {
    "verify_semigroup": run_verify_semigroup,
    "gronwall": run_gronwall,
    "interpolate": run_interpolate,
    "observe": run_observe,
    "stability": run_stability,
    "frequency": run_frequency,
    "convexity": run_convexity,
    "probe_uc": run_probe_uc,
}


def _resolve_out(args) -> Path:
    out = os.environ.get("HEATOBS_OUT") or args.out
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_manifest(cfg, out: Path, seed, jobs, tol_scale, checks) -> None:
    digest = hashlib.sha256(cfg["_raw"] + str(seed).encode()).hexdigest()
    manifest = {
        "checks": checks,
        "config": {k: v for k, v in cfg.items() if k != "_raw"},
        "content_hash": digest,
        "jobs": jobs,
        "seed": seed,
        "tol_scale": tol_scale,
    }
    (out / "run_manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n"
    )


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = _resolve_out(args)
    names = [n.strip() for n in cfg["checks"]["names"].split(",") if n.strip()]
    for name in names:
        if name not in CHECK_RUNNERS:
            raise ConfigInvalid(f"unknown check {name!r}")
    _write_manifest(cfg, out, args.seed, args.jobs, args.tol_scale, names)
    flags = []
    for name in names:
        flags.extend(CHECK_RUNNERS[name](cfg, out, args.seed, args.jobs, args.tol_scale))
    return 0 if all(flags) else 2


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    out = _resolve_out(args)
    spec = grid_from_config(cfg)
    fspec = fspec_from_config(cfg)
    y0 = gaussian_bump(
        spec, np.zeros(spec.n),
        _f(cfg, "solve", "width"), _f(cfg, "solve", "amplitude"),
    )
    traj = solve_semilinear(
        y0, fspec, _f(cfg, "dynamics", "T"), _f(cfg, "dynamics", "dt"),
        _i(cfg, "dynamics", "stride"),
    )
    save_trajectory(traj, out / "trajectory")
    return 0


def cmd_pair(args) -> int:
    cfg = load_config(args.config)
    out = _resolve_out(args)
    spec = grid_from_config(cfg)
    region = region_from_config(cfg, spec)
    fspec = fspec_from_config(cfg)
    pairs = suites.ensemble_pairs(
        spec, fspec, _f(cfg, "dynamics", "T"), _f(cfg, "dynamics", "dt"),
        _i(cfg, "dynamics", "stride"), 1,
        _seed(cfg, "ensemble", args.seed), family="perturbed_bumps",
    )
    pair = pairs[0]
    from .grid import lp_norm

    summary = {
        "L_M": pair.L_M,
        "M": pair.M,
        "phi0_l2sq": lp_norm(pair.phi.fields[0], 2) ** 2,
        "phiT_l2sq": lp_norm(pair.phi.fields[-1], 2) ** 2,
    }
    (out / "pair_summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n"
    )
    save_trajectory(pair.phi, out / "phi_trajectory")
    save_region(region, out / "region")
    return 0


def cmd_convexity(args) -> int:
    out = _resolve_out(args)
    table = {}
    with open(args.samples) as fh:
        header = fh.readline()
        for line in fh:
            t_txt, g_txt = line.strip().split(",")[:2]
            table[float(t_txt)] = float(g_txt)
    report = log_convexity_check(
        lambda t: table[t], args.t1, args.t2, args.t3,
        args.h, args.T, args.ctilde, args.cbar,
    )
    write_reports([report], out / "convexity_reports.json")
    return 0 if report.passed else 2


def cmd_gronwall(args) -> int:
    out = _resolve_out(args)
    from .estimates import gronwall_superlinear_check

    report = gronwall_superlinear_check(
        args.A, args.B, args.alpha, args.g0, args.T, args.samples
    )
    write_reports([report], out / "gronwall_reports.json")
    print(f"lemma_2_2 worst ratio {report.lhs:.9f} pass={report.passed}")
    return 0 if report.passed else 2


def cmd_report(args) -> int:
    out = _resolve_out(args)
    files = sorted(out.glob("*_reports.json"))
    if not files:
        raise NoReports(f"no report files under {out}")
    rows = []
    for path in files:
        for i, rec in enumerate(read_reports(path)):
            rows.append(
                {
                    "file": path.name,
                    "index": i,
                    "kind": rec.get("kind", "?"),
                    "lhs": rec.get("lhs", float("nan")),
                    "pass": rec.get("pass", False),
                }
            )
    write_table(rows, ["file", "index", "kind", "lhs", "pass"], out / "summary.csv")
    n_pass = sum(1 for r in rows if r["pass"])
    print(f"{n_pass}/{len(rows)} checks passed across {len(files)} report files")
    return 0


def _single_check_cmd(name):
    def runner(args) -> int:
        cfg = load_config(args.config)
        out = _resolve_out(args)
        _write_manifest(cfg, out, args.seed, args.jobs, args.tol_scale, [name])
        flags = CHECK_RUNNERS[name](cfg, out, args.seed, args.jobs, args.tol_scale)
        return 0 if all(flags) else 2

    return runner


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatobs",
        description="Spectral heat-equation experiments and estimate checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="INI config path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override ensemble seeds")
        p.add_argument("--jobs", type=int, default=1, help="worker pool size")
        p.add_argument("--tol-scale", type=float, default=1.0,
                       help="global tolerance multiplier for coarse-grid CI")

    p_run = sub.add_parser("run", help="execute the checks listed in the config")
    common(p_run)
    p_run.set_defaults(fn=cmd_run)

    for name, help_text in [
        ("verify-semigroup", "L^q -> L^p smoothing suite"),
        ("interpolate", "global interpolation ensemble and fit"),
        ("observe", "observation-constant ensemble"),
        ("stability", "conditional stability pipeline"),
        ("frequency", "frequency traces and derivative checks"),
        ("probe-uc", "unique continuation probe table"),
    ]:
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.set_defaults(fn=_single_check_cmd(name.replace("-", "_")))

    p_solve = sub.add_parser("solve", help="single trajectory with snapshots")
    common(p_solve)
    p_solve.set_defaults(fn=cmd_solve)

    p_pair = sub.add_parser("pair", help="build and summarize a solution pair")
    common(p_pair)
    p_pair.set_defaults(fn=cmd_pair)

    p_cvx = sub.add_parser("convexity", help="three-point convexity on supplied samples")
    common(p_cvx)
    p_cvx.add_argument("--samples", required=True, help="CSV with t,g columns")
    for flag in ("t1", "t2", "t3", "h", "T", "ctilde", "cbar"):
        p_cvx.add_argument(f"--{flag}", type=float, required=flag not in ("ctilde", "cbar"),
                           default=0.0 if flag in ("ctilde", "cbar") else None)
    p_cvx.set_defaults(fn=cmd_convexity)

    p_gw = sub.add_parser("gronwall", help="superlinear Gronwall bound check")
    common(p_gw)
    p_gw.add_argument("--A", type=float, required=True)
    p_gw.add_argument("--B", type=float, default=0.0)
    p_gw.add_argument("--alpha", type=float, required=True)
    p_gw.add_argument("--g0", type=float, required=True)
    p_gw.add_argument("--T", type=float, default=1.0)
    p_gw.add_argument("--samples", type=int, default=50)
    p_gw.set_defaults(fn=cmd_gronwall)

    p_rep = sub.add_parser("report", help="merge JSON reports into a summary table")
    common(p_rep)
    p_rep.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except HeatObsError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
