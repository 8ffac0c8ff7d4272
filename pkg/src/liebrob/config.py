"""Experiment configuration: a TOML file with named blocks.

Unknown keys are errors, and validation reports every problem at once.
"""

import itertools
from dataclasses import dataclass, field, replace

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import ensembles as ens
from .bounds import SYSTEMS
from .dynamics import MODES, CommutatorProbe, EvolutionPlan
from .errors import ConfigError

KINDS = ("simulate", "bound", "paths", "verify", "martingale")
SWEEP_AXES = ("r", "t", "tau", "xi", "alpha", "N", "k", "p")
U64 = 1 << 64

_num = (int, float)

# key -> accepted python types, per block
_TOP = {
    "kind": str, "seed": int, "samples": int, "out": str, "workers": int,
    "quantile_levels": list,
}
_BLOCKS = {
    "ensemble": {
        "geometry": str, "n_sites": int, "dims": list, "k": int, "alpha": _num,
        "local_dim": int, "coupling": _num, "sampler": str, "time_model": str, "xi": _num,
    },
    "evolution": {"mode": str, "t": _num, "xi": _num, "steps": int},
    "probe": {
        "o0_sites": list, "state": (str, list), "projector_rank": int, "projected_only": bool,
    },
    "sweep": {a: list for a in SWEEP_AXES},
    "bound": {"system": str, "variant": str, "deltas": list, "form": str, "params": dict},
    "paths": {"L_max": int, "materialize": bool},
    "martingale": {
        "task": str, "instances": int, "dims": list, "D": int, "N_terms": int, "b": _num,
        "D_P": int, "q": _num,
    },
}
_REQUIRED_BLOCKS = {
    "simulate": ("ensemble", "evolution", "sweep"),
    "bound": ("bound", "sweep"),
    "paths": ("ensemble", "sweep"),
    "verify": ("ensemble", "evolution", "bound", "sweep"),
    "martingale": ("martingale", "sweep"),
}


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    samples: int = 100
    out: str = "results"
    workers: int = 1
    quantile_levels: tuple = (0.5, 0.9, 0.99)
    ensemble: dict = field(default_factory=dict)
    evolution: dict = field(default_factory=dict)
    probe: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    bound: dict = field(default_factory=dict)
    paths: dict = field(default_factory=dict)
    martingale: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    def points(self):
        """Sweep grid in row-major order of the axes as written."""
        axes = list(self.sweep)
        for combo in itertools.product(*(self.sweep[a] for a in axes)):
            yield dict(zip(axes, combo))

    # ---- per-point objects ---------------------------------------------------

    def ensemble_spec(self, point):
        kw = dict(self.ensemble)
        if "dims" in kw:
            kw["dims"] = tuple(kw["dims"])
        if "N" in point:
            kw["n_sites"] = int(point["N"])
        if "k" in point:
            kw["k"] = int(point["k"])
        if "alpha" in point:
            kw["alpha"] = float(point["alpha"])
        if "xi" in point and kw.get("time_model") == "brownian":
            kw["xi"] = float(point["xi"])
        return ens.EnsembleSpec(**kw)

    def plan(self, point):
        ev = dict(self.evolution)
        mode = ev.get("mode", "static")
        if mode == "static":
            return EvolutionPlan("static", t=float(point.get("t", ev.get("t", 0.0))))
        xi = float(point.get("xi", ev.get("xi", 0.0)))
        if "tau" in point:
            steps = int(round(point["tau"] / xi**2))
        else:
            steps = int(ev.get("steps", 0))
        return EvolutionPlan(mode, xi=xi, steps=steps)

    def probe_for(self, point):
        pr = self.probe
        o0 = tuple(int(s) for s in pr.get("o0_sites", [0]))
        r = int(point.get("r", 1))
        state = pr.get("state", "maximally_mixed")
        if isinstance(state, list):
            state = (str(state[0]), int(state[1]))
        return CommutatorProbe(o0, (o0[0] + r,), state, int(pr.get("projector_rank", 1)))


def _type_ok(v, typ):
    if typ is int or typ == (int,):
        return isinstance(v, int) and not isinstance(v, bool)
    if typ is _num:
        return isinstance(v, (int, float)) and not isinstance(v, bool)
    return isinstance(v, typ)


def _check_keys(where, got, allowed, problems):
    for key, v in got.items():
        if key not in allowed:
            problems.append(f"{where}: unknown key {key!r}")
        elif not _type_ok(v, allowed[key]):
            problems.append(f"{where}.{key}: wrong type {type(v).__name__}")


def validate(raw):
    """Turn a parsed TOML dict into an ExperimentConfig or raise ConfigError
    listing every problem."""
    problems = []
    top = {k: v for k, v in raw.items() if k not in _BLOCKS}
    _check_keys("config", top, _TOP, problems)
    for name, block in raw.items():
        if name in _BLOCKS:
            if not isinstance(block, dict):
                problems.append(f"[{name}] must be a table")
                continue
            _check_keys(f"[{name}]", block, _BLOCKS[name], problems)

    kind = raw.get("kind")
    if kind not in KINDS:
        problems.append(f"kind: expected one of {KINDS}, got {kind!r}")
    seed = raw.get("seed")
    if seed is None:
        problems.append("seed: required (no default seed)")
    elif not _type_ok(seed, int) or not 0 <= seed < U64:
        problems.append(f"seed: must be an integer in [0, 2^64), got {seed!r}")
    if _type_ok(raw.get("samples", 1), int) and raw.get("samples", 1) < 1:
        problems.append("samples: must be >= 1")
    if _type_ok(raw.get("workers", 1), int) and raw.get("workers", 1) < 1:
        problems.append("workers: must be >= 1")
    for q in raw.get("quantile_levels", []) if isinstance(raw.get("quantile_levels"), list) else []:
        if not _type_ok(q, _num) or not 0 <= q <= 1:
            problems.append(f"quantile_levels: {q!r} is not in [0, 1]")

    if kind in KINDS:
        for b in _REQUIRED_BLOCKS[kind]:
            if b not in raw:
                problems.append(f"[{b}]: required for kind {kind!r}")

    sweep = raw.get("sweep", {}) if isinstance(raw.get("sweep"), dict) else {}
    if "sweep" in raw and not sweep:
        problems.append("[sweep]: needs at least one axis")
    for axis, vals in sweep.items():
        if isinstance(vals, list):
            if not vals:
                problems.append(f"sweep.{axis}: axis is empty")
            elif not all(_type_ok(v, _num) for v in vals):
                problems.append(f"sweep.{axis}: values must be numbers")

    ev = raw.get("evolution") if isinstance(raw.get("evolution"), dict) else None
    if ev is not None and ev.get("mode", "static") not in MODES:
        problems.append(f"evolution.mode: expected one of {MODES}, got {ev.get('mode')!r}")
    if ev is not None and ev.get("mode", "static") != "static":
        if "xi" not in ev and "xi" not in sweep:
            problems.append("evolution.xi: required for non-static modes (or sweep xi)")
        if "steps" not in ev and "tau" not in sweep:
            problems.append("evolution.steps: required for non-static modes (or sweep tau)")

    bd = raw.get("bound") if isinstance(raw.get("bound"), dict) else None
    if bd is not None:
        if bd.get("system") not in SYSTEMS:
            problems.append(f"bound.system: expected one of {SYSTEMS}, got {bd.get('system')!r}")
        if bd.get("variant", "printed") not in ("printed", "derived"):
            problems.append("bound.variant: expected 'printed' or 'derived'")
        if bd.get("form", "discrete") not in ("discrete", "continuum"):
            problems.append("bound.form: expected 'discrete' or 'continuum'")
        deltas = bd.get("deltas", [])
        if not isinstance(deltas, list) or not deltas:
            problems.append("bound.deltas: needs at least one delta")
        else:
            for d in deltas:
                if not _type_ok(d, _num) or not 0 < d <= 1:
                    problems.append(f"bound.deltas: {d!r} is not in (0, 1]")

    mg = raw.get("martingale") if isinstance(raw.get("martingale"), dict) else None
    if mg is not None and mg.get("task") not in ("smoothness", "sum_matrices"):
        problems.append(f"martingale.task: expected 'smoothness' or 'sum_matrices', got {mg.get('task')!r}")

    if problems:
        raise ConfigError(problems)

    cfg = ExperimentConfig(
        kind=kind, seed=int(seed), samples=int(raw.get("samples", 100)),
        out=str(raw.get("out", "results")), workers=int(raw.get("workers", 1)),
        quantile_levels=tuple(float(q) for q in raw.get("quantile_levels", (0.5, 0.9, 0.99))),
        **{b: dict(raw.get(b, {})) for b in _BLOCKS}, raw=raw,
    )
    # build one point eagerly so block-level errors surface here
    try:
        first = next(cfg.points())
        if "ensemble" in raw:
            cfg.ensemble_spec(first)
        if "evolution" in raw:
            cfg.plan(first)
            if "ensemble" in raw:
                cfg.probe_for(first)
    except (ValueError, TypeError) as exc:
        raise ConfigError([f"invalid block content: {exc}"]) from exc
    return cfg


def load(path, seed=None):
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    if seed is not None:
        raw["seed"] = int(seed)
    return validate(raw)


def loads(text, seed=None):
    raw = tomllib.loads(text)
    if seed is not None:
        raw["seed"] = int(seed)
    return validate(raw)


def with_overrides(cfg, **kw):
    return replace(cfg, **kw)
