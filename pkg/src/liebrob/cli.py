"""Command-line harness: run an experiment kind over a sweep grid and write
flat files (CSV, JSON, gnuplot .dat and a manifest)."""

import argparse
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import beta as beta_dist

from . import __version__
from . import bounds as bd
from . import config as cfgmod
from . import ensembles as ens
from . import io
from . import martingale as mg
from . import paths as pth
from .dynamics import monte_carlo
from .errors import ConfigError, InvalidInputError, ResourceError

log = logging.getLogger("liebrob")

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
ROUNDOFF = 1e-12

_SYSTEM_KEYS = {
    "NN1dBrownianOTOC": ("a", "r", "D_P", "tau", "xi", "T"),
    "NNdBrownianOTOC": ("a", "r", "d", "D_P", "tau", "xi", "T"),
    "NN1dBrownianSpectral": ("a", "r", "D", "lam", "simplified", "tau", "xi", "T"),
    "KLocalStaticOTOC": ("J", "t", "N", "k", "D_P"),
    "KLocalBrownianOTOC": ("J", "tau", "N", "k", "D_P"),
    "PowerLawStaticOTOC": ("alpha", "r", "D_P", "t"),
    "PowerLawBrownianOTOC": ("alpha", "r", "D_P", "tau"),
    "PowerLawStaticSpectral": ("alpha", "r", "D", "t"),
    "PowerLawBrownianSpectral": ("alpha", "r", "D", "tau"),
}
_GEOMETRY = {
    "NN1dBrownianOTOC": ("chain",), "NNdBrownianOTOC": ("chain", "grid"),
    "NN1dBrownianSpectral": ("chain",), "KLocalStaticOTOC": ("complete_k_local",),
    "KLocalBrownianOTOC": ("complete_k_local",), "PowerLawStaticOTOC": ("powerlaw_chain",),
    "PowerLawBrownianOTOC": ("powerlaw_chain",), "PowerLawStaticSpectral": ("powerlaw_chain",),
    "PowerLawBrownianSpectral": ("powerlaw_chain",),
}


def observable_for(system):
    return "half_spectral" if system.endswith("Spectral") else "projected_half_norm"


def is_static_system(system):
    return "Static" in system


def check_pairing(system, spec, plan):
    """The bound system has to describe the simulated ensemble."""
    if spec.geometry not in _GEOMETRY[system]:
        raise InvalidInputError(f"bound system {system} does not match geometry {spec.geometry}")
    if is_static_system(system) != (plan.mode == "static"):
        raise InvalidInputError(f"bound system {system} does not match evolution mode {plan.mode}")


def bound_params(cfg, point, spec=None, plan=None):
    system = cfg.bound["system"]
    p = {}
    if "r" in point:
        p["r"] = int(point["r"])
    for key in ("t", "alpha"):
        if key in point:
            p[key] = float(point[key])
    for key in ("N", "k"):
        if key in point:
            p[key] = int(point[key])
    if "tau" in point:
        p["tau"] = float(point["tau"])
    if spec is not None:
        p.setdefault("a", spec.coupling)
        p.setdefault("J", spec.coupling)
        p["N"], p["k"], p["d"] = spec.n_sites, spec.k, spec.lattice_dim
        p.setdefault("D", spec.local_dim)
        if spec.geometry == "powerlaw_chain":
            p["alpha"] = spec.alpha
        p["D_P"] = int(cfg.probe.get("projector_rank", 1))
    if plan is not None:
        if plan.mode == "static":
            p["t"] = plan.t
        else:
            p["tau"] = plan.tau
            if cfg.bound.get("form", "discrete") == "discrete":
                p["xi"], p["T"] = plan.xi, plan.steps
    elif "xi" in point and cfg.bound.get("form", "discrete") == "discrete" and "tau" in point:
        p["xi"], p["T"] = float(point["xi"]), point["tau"] / float(point["xi"]) ** 2
    p.update(cfg.bound.get("params", {}))
    keys = _SYSTEM_KEYS[system]
    if cfg.bound.get("form", "discrete") == "continuum":
        keys = tuple(k for k in keys if k not in ("xi", "T"))
    return {k: v for k, v in p.items() if k in keys}


def clopper_pearson_upper(k, n, level=0.95):
    """One-sided upper confidence limit for a binomial proportion."""
    if k >= n:
        return 1.0
    return float(beta_dist.ppf(level, k + 1, n - k))


def exceeds(values, eps):
    """X >= eps, ignoring round-off-level observables."""
    v = np.asarray(values, float)
    return (v >= eps) & (v > ROUNDOFF)


@dataclass
class VerificationRow:
    point: int
    params: dict
    delta: float
    epsilon: float
    branch: str
    exceedances: int
    samples: int
    frequency: float
    upper: float
    vacuous: bool
    passed: bool


@dataclass
class VerificationReport:
    rows: list = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.rows)


def _point_label(point):
    return ", ".join(f"{k}={v}" for k, v in point.items())


def _at_point(point, fn):
    try:
        return fn()
    except ResourceError as exc:
        raise ResourceError(f"sweep point ({_point_label(point)}): {exc.what}", exc.required, exc.allowed) from exc


def verify(cfg):
    report = VerificationReport()
    system = cfg.bound["system"]
    variant = cfg.bound.get("variant", "printed")
    obs = observable_for(system)
    for i, point in enumerate(cfg.points()):
        spec, plan = cfg.ensemble_spec(point), cfg.plan(point)
        check_pairing(system, spec, plan)
        probe = cfg.probe_for(point)
        projected_only = obs == "projected_half_norm" and cfg.probe.get("projected_only", True)
        rec = _at_point(point, lambda: monte_carlo(spec, plan, [probe], cfg.samples, cfg.seed,
                                                   cfg.quantile_levels, cfg.workers, projected_only))
        vals = rec.values(obs)
        params = bound_params(cfg, point, spec, plan)
        tb = bd.tail_bound(system, variant, **params)
        for delta in cfg.bound["deltas"]:
            ev = tb.epsilon(float(delta))
            k = int(np.sum(exceeds(vals, ev.epsilon))) if not math.isnan(ev.epsilon) else len(vals)
            n = len(vals)
            up = clopper_pearson_upper(k, n)
            ok = ev.vacuous or up <= delta
            report.rows.append(VerificationRow(i, dict(point), float(delta), ev.epsilon, ev.branch,
                                               k, n, k / n, up, ev.vacuous, bool(ok)))
        log.info("verify point %d (%s) done", i, _point_label(point))
    return report


# ---- experiment kinds --------------------------------------------------------

def _axis_x(point, i):
    return float(next(iter(point.values()))) if point else float(i)


def _run_verify(cfg, out):
    rep = verify(cfg)
    axes = list(cfg.sweep)
    cols = ["point"] + axes + ["delta", "epsilon", "branch", "exceedances", "samples",
                               "frequency", "upper95", "vacuous", "pass"]
    rows = []
    for r in rep.rows:
        row = {"point": r.point, "delta": r.delta, "epsilon": r.epsilon, "branch": r.branch,
               "exceedances": r.exceedances, "samples": r.samples, "frequency": r.frequency,
               "upper95": r.upper, "vacuous": r.vacuous, "pass": r.passed}
        row.update({a: r.params[a] for a in axes})
        rows.append(row)
    files = [io.write_csv(os.path.join(out, "verify.csv"), cols, rows)]
    for delta in cfg.bound["deltas"]:
        sel = [r for r in rep.rows if r.delta == delta]
        files.append(io.write_dat(os.path.join(out, f"verify_eps_delta{delta:g}.dat"),
                                  [_axis_x(r.params, r.point) for r in sel], [r.epsilon for r in sel],
                                  f"{axes[0]} epsilon(delta={delta:g})"))
        files.append(io.write_dat(os.path.join(out, f"verify_freq_delta{delta:g}.dat"),
                                  [_axis_x(r.params, r.point) for r in sel], [r.frequency for r in sel],
                                  f"{axes[0]} exceedance frequency"))
    summary = {"passed": rep.passed, "rows": len(rep.rows),
               "failures": [r.__dict__ for r in rep.rows if not r.passed],
               "vacuous_rows": sum(r.vacuous for r in rep.rows)}
    return rep.passed, files, summary


def _run_simulate(cfg, out):
    rows, qrows, files = [], [], []
    axes = list(cfg.sweep)
    for i, point in enumerate(cfg.points()):
        spec, plan = cfg.ensemble_spec(point), cfg.plan(point)
        probe = cfg.probe_for(point)
        rec = _at_point(point, lambda: monte_carlo(spec, plan, [probe], cfg.samples, cfg.seed,
                                                   cfg.quantile_levels, cfg.workers,
                                                   cfg.probe.get("projected_only", False)))
        for m, res in enumerate(rec.results[0]):
            row = {"point": i, "sample": m, "tau": plan.tau if plan.tau is not None else float("nan"),
                   "t": plan.t}
            row.update({a: point[a] for a in axes})
            for obs in ("half_spectral", "frobenius_otoc", "state_otoc", "projected_half_norm"):
                row[obs] = getattr(res, obs)
            rows.append(row)
        for obs, qs in rec.quantiles().items():
            for lvl, val in qs.items():
                qrows.append({"point": i, "x": _axis_x(point, i), "observable": obs,
                              "level": float(lvl), "value": val})
    cols = ["point", "sample"] + axes + ["t", "tau", "half_spectral", "frobenius_otoc",
                                         "state_otoc", "projected_half_norm"]
    files.append(io.write_csv(os.path.join(out, "simulate.csv"), cols, rows))
    files.append(io.write_csv(os.path.join(out, "quantiles.csv"),
                              ["point", "x", "observable", "level", "value"], qrows))
    for obs in sorted({q["observable"] for q in qrows}):
        for lvl in cfg.quantile_levels:
            sel = [q for q in qrows if q["observable"] == obs and q["level"] == lvl]
            files.append(io.write_dat(os.path.join(out, f"{obs}_q{lvl:g}.dat"),
                                      [q["x"] for q in sel], [q["value"] for q in sel],
                                      f"{axes[0]} quantile {lvl:g} of {obs}"))
    return True, files, {"points": len(list(cfg.points())), "samples": cfg.samples}


def _run_bound(cfg, out):
    system, variant = cfg.bound["system"], cfg.bound.get("variant", "printed")
    rows, files = [], []
    axes = list(cfg.sweep)
    for i, point in enumerate(cfg.points()):
        spec = cfg.ensemble_spec(point) if cfg.ensemble else None
        plan = cfg.plan(point) if cfg.evolution else None
        tb = bd.tail_bound(system, variant, **bound_params(cfg, point, spec, plan))
        for delta in cfg.bound["deltas"]:
            ev = tb.epsilon(float(delta))
            row = {"point": i, "delta": float(delta), "epsilon": ev.epsilon, "branch": ev.branch,
                   "vacuous": ev.vacuous, "boundary": ev.boundary if ev.boundary is not None else float("nan")}
            row.update({a: point[a] for a in axes})
            rows.append(row)
    cols = ["point"] + axes + ["delta", "epsilon", "branch", "vacuous", "boundary"]
    files.append(io.write_csv(os.path.join(out, "bound.csv"), cols, rows))
    for delta in cfg.bound["deltas"]:
        sel = [r for r in rows if r["delta"] == float(delta)]
        files.append(io.write_dat(os.path.join(out, f"epsilon_delta{delta:g}.dat"),
                                  [_axis_x({a: r[a] for a in axes}, r["point"]) for r in sel],
                                  [r["epsilon"] for r in sel], f"{axes[0]} epsilon"))
    return True, files, {"rows": len(rows), "vacuous_rows": sum(r["vacuous"] for r in rows)}


def _diameter(spec):
    if spec.geometry == "chain":
        return spec.n_sites - 1
    if spec.geometry == "grid":
        return sum(d - 1 for d in spec.dims)
    return 1


def _run_paths(cfg, out):
    rows, files, totals = [], [], []
    axes = list(cfg.sweep)
    for i, point in enumerate(cfg.points()):
        spec = cfg.ensemble_spec(point)
        probe = cfg.probe_for(point)
        graph = pth.InteractionGraph(ens.build_terms(spec))
        L_max = int(cfg.paths.get("L_max", pth.default_L_max(probe.r, _diameter(spec))))
        en = pth.enumerate_paths(graph, probe.o0_sites, probe.ar_sites, L_max,
                                 materialize=cfg.paths.get("materialize", False))
        for l in range(1, L_max + 1):
            row = {"point": i, "length": l, "count": en.counts_by_length.get(l, 0),
                   "weight": en.total_weight_by_length.get(l, 0.0), "truncated": en.truncated}
            row.update({a: point[a] for a in axes})
            rows.append(row)
        totals.append((_axis_x(point, i), en.total_count()))
    cols = ["point"] + axes + ["length", "count", "weight", "truncated"]
    files.append(io.write_csv(os.path.join(out, "paths.csv"), cols, rows))
    files.append(io.write_dat(os.path.join(out, "path_totals.dat"), [x for x, _ in totals],
                              [c for _, c in totals], f"{axes[0]} total path count"))
    return True, files, {"backend": pth.BACKEND, "points": len(totals)}


def _smoothness_instance(rng, dim):
    A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    B = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return mg.deterministic(A), mg.rademacher(B)


def _run_martingale(cfg, out):
    m = cfg.martingale
    axes = list(cfg.sweep)
    files = []
    if m["task"] == "smoothness":
        ps = [float(p) for p in cfg.sweep.get("p", [2.0])]
        dims = [int(d) for d in m.get("dims", [2, 3, 4])]
        recs = []
        rng = np.random.default_rng(cfg.seed)
        for inst in range(int(m.get("instances", 100))):
            X, Y = _smoothness_instance(rng, dims[inst % len(dims)])
            for p in ps:
                if "q" in m:
                    recs.append((inst, mg.check_general_smoothness(X, Y, p, float(m["q"]))))
                else:
                    recs.append((inst, mg.check_uniform_smoothness(X, Y, p)))
        files.append(io.write_slack_csv(os.path.join(out, "slack.csv"), recs))
        ok = all(r.passed for _, r in recs)
        return ok, files, {"instances": len(recs), "min_slack": min(r.slack for _, r in recs)}
    rows, summary, ok = [], [], True
    for i, point in enumerate(cfg.points()):
        N = int(point.get("N", m.get("N_terms", 100)))
        rec = mg.sum_matrices_demo(N, int(m.get("D", 16)), float(m.get("b", 1.0)), cfg.samples,
                                   cfg.seed, int(m.get("D_P", 1)))
        ok &= rec.passed
        for j, e in enumerate(rec.eps_grid):
            row = {"point": i, "eps": float(e), "tail_spectral": float(rec.tail_spectral[j]),
                   "bound_spectral": float(rec.bound_spectral[j]),
                   "tail_frobenius": float(rec.tail_frobenius[j]),
                   "bound_frobenius": float(rec.bound_frobenius[j]),
                   "tail_projected": float(rec.tail_projected[j]),
                   "bound_projected": float(rec.bound_projected[j]),
                   "exp_region": bool(rec.exp_region[j])}
            row.update({a: point[a] for a in axes})
            rows.append(row)
        summary.append({"N": N, "v": rec.v, "mean_spectral": rec.mean_spectral,
                        "expectation_ratio": mg.expectation_ratio(rec), "passed": rec.passed,
                        "violations": rec.violations})
        files.append(io.write_dat(os.path.join(out, f"tail_spectral_point{i}.dat"),
                                  rec.eps_grid, rec.tail_spectral, "eps empirical P(||S|| >= eps)"))
    cols = ["point"] + axes + ["eps", "tail_spectral", "bound_spectral", "tail_frobenius",
                               "bound_frobenius", "tail_projected", "bound_projected", "exp_region"]
    files.append(io.write_csv(os.path.join(out, "sum_matrices.csv"), cols, rows))
    return bool(ok), files, {"points": summary}


_RUNNERS = {
    "simulate": _run_simulate, "bound": _run_bound, "paths": _run_paths,
    "verify": _run_verify, "martingale": _run_martingale,
}


def run(cfg, out=None):
    """Execute the configured experiment; returns (passed, files, summary)."""
    out = out or cfg.out
    os.makedirs(out, exist_ok=True)
    start = time.time()
    ok, files, summary = _RUNNERS[cfg.kind](cfg, out)
    wall = time.time() - start
    summary = dict(summary, kind=cfg.kind, passed=bool(ok))
    files.append(io.write_json(os.path.join(out, "summary.json"), summary))
    manifest = {
        "config": cfg.raw, "seed": cfg.seed, "version": __version__, "kind": cfg.kind,
        "workers": cfg.workers, "wall_time_s": wall, "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(start)),
        "path_backend": pth.BACKEND, "files": [os.path.basename(f) for f in files],
    }
    files.append(io.write_json(os.path.join(out, "manifest.json"), manifest))
    return bool(ok), files, summary


def build_parser():
    ap = argparse.ArgumentParser(prog="liebrob", description="Operator-growth bounds versus simulation.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in cfgmod.KINDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML experiment file")
        sp.add_argument("--seed", type=int, help="overrides the config seed")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--workers", type=int, help="worker processes (overrides config)")
        sp.add_argument("--verbose", "-v", action="store_true")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = cfgmod.load(args.config, seed=args.seed)
        if cfg.kind != args.command:
            raise ConfigError([f"config kind {cfg.kind!r} does not match subcommand {args.command!r}"])
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError(["--workers must be >= 1"])
            cfg.workers = args.workers
        ok, files, summary = run(cfg, args.out)
    except ConfigError as exc:
        for prob in exc.problems:
            print(f"config error: {prob}", file=sys.stderr)
        return EXIT_ERROR
    except (OSError, ValueError, ResourceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{cfg.kind}: {'pass' if ok else 'FAIL'} ({len(files)} files in {args.out or cfg.out})")
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
