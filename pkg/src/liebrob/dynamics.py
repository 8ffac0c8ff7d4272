"""Heisenberg-picture evolution of local operators under sampled random
Hamiltonians, and the commutator observables measured against a probe."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from . import ensembles as ens
from .errors import InvalidInputError, InvalidSpecError, UnsupportedError
from .linalg import (
    apply_local_conjugation,
    as_matrix,
    embed_local,
    hermitian_exponential,
    is_hermitian,
)

MODES = ("static", "brownian", "brickwall")
RHO_TRACE_TOL = 1e-10


@dataclass(frozen=True)
class EvolutionPlan:
    mode: str
    t: float = 0.0
    xi: float = 0.0
    steps: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidSpecError(f"unknown evolution mode {self.mode!r}")
        if self.mode == "static":
            if self.t < 0:
                raise InvalidSpecError("static evolution needs t >= 0")
        else:
            if self.xi <= 0:
                raise InvalidSpecError(f"{self.mode} evolution needs xi > 0")
            if self.steps < 0 or int(self.steps) != self.steps:
                raise InvalidSpecError("steps must be a non-negative integer")

    @property
    def tau(self):
        """Brownian time xi^2 T; None for static plans."""
        if self.mode == "static":
            return None
        return self.xi**2 * self.steps

    def as_dict(self):
        return {"mode": self.mode, "t": self.t, "xi": self.xi, "steps": self.steps, "tau": self.tau}


def static(t):
    return EvolutionPlan("static", t=float(t))


def brownian(xi, steps):
    return EvolutionPlan("brownian", xi=float(xi), steps=int(steps))


def brickwall(xi, rounds):
    return EvolutionPlan("brickwall", xi=float(xi), steps=int(rounds))


# ---- evolution --------------------------------------------------------------

def evolve_static(H, t, O):
    """e^{iHt} O e^{-iHt}."""
    O = as_matrix(O)
    if t == 0:
        return O.copy()
    U = hermitian_exponential(H, t)
    return U.conj().T @ O @ U


def _within(terms, site_limit):
    if site_limit is None:
        return list(terms)
    return [t for t in terms if max(t.support) <= site_limit]


def brickwall_layers(spec, terms):
    """Edge layers applied in order within one round. On a chain these are the
    even edges {2i, 2i+1} then the odd edges; on a grid the same split is done
    per lattice axis by the parity of the lower endpoint."""
    if spec.geometry == "chain":
        even = [t for t in terms if t.support[0] % 2 == 0]
        odd = [t for t in terms if t.support[0] % 2 == 1]
        return [even, odd]
    if spec.geometry == "grid":
        dims = spec.dims
        strides = [int(np.prod(dims[a + 1:])) for a in range(len(dims))]
        layers = []
        for a in range(len(dims)):
            for parity in (0, 1):
                layers.append([
                    t for t in terms
                    if t.support[1] - t.support[0] == strides[a]
                    and (t.support[0] // strides[a]) % dims[a] % 2 == parity
                ])
        return layers
    raise InvalidSpecError(f"brickwall evolution needs a chain or grid geometry, got {spec.geometry}")


def _full_gate(gate, support, spec):
    return embed_local(gate, list(support), spec.n_sites, spec.local_dim)


def _is_contiguous(sup):
    return list(sup) == list(range(sup[0], sup[0] + len(sup)))


def _conjugate_by_gate(O, gate, support, spec):
    """G^dagger O G; support None means gate is already full-size."""
    if support is not None and _is_contiguous(support):
        return apply_local_conjugation(O, gate, list(support), spec.n_sites, spec.local_dim)
    G = gate if support is None else _full_gate(gate, support, spec)
    return G.conj().T @ O @ G


def _apply_gate(V, gate, support, spec, adjoint=False):
    """G V (or G^dagger V) for a dim x m block of column vectors."""
    g = gate.conj().T if adjoint else gate
    if support is None:
        return g @ V
    if not _is_contiguous(support):
        return _full_gate(g, support, spec) @ V
    D = spec.local_dim
    lo, k = support[0], len(support)
    left, mid = D**lo, D**k
    right = D ** (spec.n_sites - lo - k)
    return np.matmul(g, V.reshape(left, mid, right * V.shape[1])).reshape(V.shape)


def _gate(h, xi):
    # h is Hermitian by construction; skip the input checks of the public helper
    w, V = np.linalg.eigh(h)
    return (V * np.exp(-1j * xi * w)) @ V.conj().T


def step_gates(seed, spec, plan, step, terms, layers=None):
    """Unitaries of one step in application (Schrodinger) order as
    (matrix, support) pairs; support None marks a full-space matrix."""
    if plan.mode == "brickwall":
        raw = ens.sample_raw(seed, spec, step, terms)
        out = []
        for layer in layers:
            for t in layer:
                out.append((_gate(t.coefficient * raw[t.id], plan.xi), t.support))
        return out
    sample = ens.EnsembleSample(spec, int(seed), step, ens.sample_raw(seed, spec, step, terms))
    return [(_gate(ens.assemble(spec, terms, sample), plan.xi), None)]


def _prepare(seed, spec, plan, site_limit, terms):
    if plan.mode not in ("brownian", "brickwall"):
        raise InvalidSpecError(f"stepped evolution needs a brownian or brickwall plan, got {plan.mode}")
    ens.check_dimension(spec)
    terms = _within(ens.build_terms(spec) if terms is None else terms, site_limit)
    terms = [t for t in terms if t.coefficient != 0.0]
    layers = brickwall_layers(spec, terms) if plan.mode == "brickwall" else None
    return terms, layers


def evolve_brownian(seed, spec, plan, O, site_limit=None, terms=None):
    """Apply the T fresh-sample steps of a brownian or brickwall plan to O.

    The Schrodinger product is U = U_T ... U_1, so the Heisenberg operator
    U^dagger O U is built by conjugating with the last step first.
    `site_limit` keeps only terms supported on sites <= site_limit while
    reusing the same random draws.
    """
    terms, layers = _prepare(seed, spec, plan, site_limit, terms)
    O = as_matrix(O).copy()
    if not terms:
        return O
    for step in reversed(range(plan.steps)):
        for gate, sup in reversed(step_gates(seed, spec, plan, step, terms, layers)):
            O = _conjugate_by_gate(O, gate, sup, spec)
    return O


def evolve_columns(seed, spec, plan, O, V, site_limit=None, terms=None):
    """O(T) V computed as U^dagger O U V by evolving the columns of V.

    Exactly equal to evolve(...) @ V, at the cost of a few vectors rather
    than a full operator; used when only projected observables are needed.
    """
    V = np.asarray(V, dtype=complex)
    if plan.mode == "static":
        ens.check_dimension(spec)
        terms = _within(ens.build_terms(spec) if terms is None else terms, site_limit)
        sample = ens.EnsembleSample(spec, int(seed), 0, ens.sample_raw(seed, spec, 0, terms))
        U = hermitian_exponential(ens.assemble(spec, terms, sample), plan.t)
        return U.conj().T @ (O @ (U @ V))
    terms, layers = _prepare(seed, spec, plan, site_limit, terms)
    if not terms:
        return O @ V
    gates = [step_gates(seed, spec, plan, s, terms, layers) for s in range(plan.steps)]
    W = V.copy()
    for step in gates:
        for gate, sup in step:
            W = _apply_gate(W, gate, sup, spec)
    W = O @ W
    for step in reversed(gates):
        for gate, sup in reversed(step):
            W = _apply_gate(W, gate, sup, spec, adjoint=True)
    return W


def evolve(seed, spec, plan, O, site_limit=None, terms=None):
    """Evolve O for any plan; static plans draw a single time-independent H."""
    if plan.mode == "static":
        ens.check_dimension(spec)
        terms = _within(ens.build_terms(spec) if terms is None else terms, site_limit)
        sample = ens.EnsembleSample(spec, int(seed), 0, ens.sample_raw(seed, spec, 0, terms))
        H = ens.assemble(spec, terms, sample)
        return evolve_static(H, plan.t, O)
    return evolve_brownian(seed, spec, plan, O, site_limit=site_limit, terms=terms)


# ---- probes and observables -------------------------------------------------

@dataclass(frozen=True)
class CommutatorProbe:
    """O_0 on `o0_sites`, A_r on `ar_sites`. `state` is "maximally_mixed",
    ("pure", index) or an explicit density matrix. P projects onto the first
    `projector_rank` computational basis states."""

    o0_sites: tuple = (0,)
    ar_sites: tuple = (1,)
    state: Any = "maximally_mixed"
    projector_rank: int = 1
    o0_op: Optional[Any] = field(default=None, compare=False, repr=False)
    ar_op: Optional[Any] = field(default=None, compare=False, repr=False)

    @property
    def r(self):
        return min(abs(a - b) for a in self.ar_sites for b in self.o0_sites)

    def describe(self):
        st = self.state if isinstance(self.state, (str, tuple)) else "custom"
        return {"o0_sites": list(self.o0_sites), "ar_sites": list(self.ar_sites),
                "r": self.r, "state": st, "projector_rank": self.projector_rank}


def default_probe(r, projector_rank=1, state="maximally_mixed"):
    return CommutatorProbe((0,), (int(r),), state, projector_rank)


@dataclass
class BuiltProbe:
    probe: CommutatorProbe
    O0: np.ndarray
    A: np.ndarray
    rho_kind: str
    rho: Any
    D_P: int


def _local_op(op, sites, D):
    k = len(sites)
    if op is None:
        if k != 1:
            raise InvalidInputError("default probe operators are single-site")
        return ens.local_x(D)
    op = as_matrix(op)
    if op.shape[0] != D**k:
        raise InvalidInputError(f"probe operator dim {op.shape[0]} does not match {D}^{k}")
    return op


def validate_density(rho, dim):
    rho = as_matrix(rho)
    if rho.shape[0] != dim:
        raise InvalidInputError(f"density matrix dim {rho.shape[0]} != {dim}")
    if abs(np.trace(rho).real - 1.0) > RHO_TRACE_TOL or abs(np.trace(rho).imag) > RHO_TRACE_TOL:
        raise InvalidInputError(f"density matrix trace {np.trace(rho)} is not 1")
    if not is_hermitian(rho, 1e-10):
        raise InvalidInputError("density matrix is not Hermitian")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise InvalidInputError("density matrix is not positive semidefinite")
    return rho


def build_probe(probe, spec):
    N, D = spec.n_sites, spec.local_dim
    dim = D**N
    for s in tuple(probe.o0_sites) + tuple(probe.ar_sites):
        if not 0 <= s < N:
            raise InvalidInputError(f"probe site {s} outside [0, {N})")
    if not 1 <= probe.projector_rank <= dim:
        raise InvalidInputError(f"projector rank {probe.projector_rank} outside [1, {dim}]")
    O0 = embed_local(_local_op(probe.o0_op, probe.o0_sites, D), probe.o0_sites, N, D)
    A = embed_local(_local_op(probe.ar_op, probe.ar_sites, D), probe.ar_sites, N, D)
    st = probe.state
    if isinstance(st, str):
        if st != "maximally_mixed":
            raise InvalidInputError(f"unknown state {st!r}")
        kind, rho = "mixed", None
    elif isinstance(st, tuple) and len(st) == 2 and st[0] == "pure":
        idx = int(st[1])
        if not 0 <= idx < dim:
            raise InvalidInputError(f"basis state {idx} outside [0, {dim})")
        kind, rho = "pure", idx
    else:
        kind, rho = "custom", validate_density(st, dim)
    return BuiltProbe(probe, O0, A, kind, rho, int(probe.projector_rank))


@dataclass(frozen=True)
class CommutatorResult:
    half_spectral: float
    frobenius_otoc: float
    state_otoc: float
    projected_half_norm: float
    seed: Optional[int] = None
    plan: Optional[EvolutionPlan] = None
    probe: Optional[CommutatorProbe] = None

    @property
    def tau(self):
        return None if self.plan is None else self.plan.tau


OBSERVABLES = ("half_spectral", "frobenius_otoc", "state_otoc", "projected_half_norm")


def _spectral(C):
    iC = 1j * C
    if is_hermitian(iC, 1e-10):
        w = np.linalg.eigvalsh(0.5 * (iC + iC.conj().T))
        return float(np.abs(w).max())
    return float(np.linalg.norm(C, 2))


def measure(O_t, built, seed=None, plan=None):
    O_t = np.asarray(O_t)
    if O_t.shape != built.A.shape:
        raise InvalidInputError(f"operator dim {O_t.shape} != probe dim {built.A.shape}")
    C = O_t @ built.A - built.A @ O_t
    dim = C.shape[0]
    fro = float(np.vdot(C, C).real) / dim
    if built.rho_kind == "mixed":
        st = fro
    elif built.rho_kind == "pure":
        col = C[:, built.rho]
        st = float(np.vdot(col, col).real)
    else:
        st = float(np.trace(C @ built.rho @ C.conj().T).real)
    cols = C[:, : built.D_P]
    gram = cols.conj().T @ cols
    proj = 0.5 * float(np.sqrt(max(np.linalg.eigvalsh(gram).max(), 0.0)))
    return CommutatorResult(0.5 * _spectral(C), fro, st, proj, seed, plan, built.probe)


def measure_projected(seed, spec, plan, built):
    """Only the projected observable, via evolve_columns; the other fields
    are NaN. C P = O(T) A P - A O(T) P needs O(T) on 2 D_P vectors.
    `built` may be one BuiltProbe or a list sharing the same O_0."""
    group = built if isinstance(built, list) else [built]
    O0 = group[0].O0
    dim = O0.shape[0]
    blocks = []
    for b in group:
        E = np.zeros((dim, b.D_P), complex)
        E[np.arange(b.D_P), np.arange(b.D_P)] = 1.0
        blocks += [b.A @ E, E]
    W = evolve_columns(seed, spec, plan, O0, np.hstack(blocks))
    out = []
    col = 0
    nan = float("nan")
    for b in group:
        k = b.D_P
        CP = W[:, col:col + k] - b.A @ W[:, col + k:col + 2 * k]
        col += 2 * k
        gram = CP.conj().T @ CP
        proj = 0.5 * float(np.sqrt(max(np.linalg.eigvalsh(gram).max(), 0.0)))
        out.append(CommutatorResult(nan, nan, nan, proj, seed, plan, b.probe))
    return out if isinstance(built, list) else out[0]


# ---- support-reach decomposition ---------------------------------------------

def reach_components(seed, spec, plan, O):
    """Operators O_l, l = 0..N-1: O_0 is O itself and O_l (l >= 1) is the
    difference of evolutions under the terms supported within sites [0, l]
    and within [0, l-1], using one realization throughout. Their sum is the
    fully evolved operator."""
    if spec.geometry not in ("chain", "powerlaw_chain"):
        raise UnsupportedError(f"reach decomposition needs a 1d geometry, got {spec.geometry}")
    O = as_matrix(O)
    terms = ens.build_terms(spec)
    comps = [O.copy()]
    prev = O
    for l in range(1, spec.n_sites):
        cur = evolve(seed, spec, plan, O, site_limit=l, terms=terms)
        comps.append(cur - prev)
        prev = cur
    return comps


def reach_profile(seed, spec, plan, O, cutoffs):
    """[(l, spectral norm of O_l)] for each requested cutoff; l >= N gives 0."""
    comps = reach_components(seed, spec, plan, O)
    out = []
    for l in cutoffs:
        l = int(l)
        if l < 0:
            raise InvalidInputError(f"cutoff must be >= 0, got {l}")
        out.append((l, float(np.linalg.norm(comps[l], 2)) if l < len(comps) else 0.0))
    return out


# ---- Monte Carlo ----------------------------------------------------------------

@dataclass
class MonteCarloRecord:
    spec: ens.EnsembleSpec
    plan: EvolutionPlan
    probes: list
    seed: int
    results: list  # results[i][m]: probe i, sample m
    quantile_levels: tuple

    def values(self, observable, probe_index=0):
        return np.array([getattr(r, observable) for r in self.results[probe_index]])

    def quantiles(self, probe_index=0):
        out = {}
        for obs in OBSERVABLES:
            v = self.values(obs, probe_index)
            if np.all(np.isnan(v)):
                continue
            out[obs] = {str(q): float(np.quantile(v, q)) for q in self.quantile_levels}
        return out


def sample_seed(seed, index):
    return (int(seed) ^ int(index)) & ((1 << 64) - 1)


def _one_sample(args):
    spec, plan, probes, seed, projected_only = args
    built = [build_probe(p, spec) for p in probes]
    if projected_only:
        groups = {}
        for i, b in enumerate(built):
            groups.setdefault(b.O0.tobytes(), []).append(i)
        out = [None] * len(built)
        for idx in groups.values():
            for i, res in zip(idx, measure_projected(seed, spec, plan, [built[i] for i in idx])):
                out[i] = res
        return out
    cache = {}
    out = []
    for b in built:
        key = b.O0.tobytes()
        if key not in cache:
            cache[key] = evolve(seed, spec, plan, b.O0)
        out.append(measure(cache[key], b, seed, plan))
    return out


def monte_carlo(spec, plan, probes, samples, seed, quantile_levels=(0.5, 0.9, 0.99), workers=1,
                projected_only=False):
    """Run `samples` independent realizations; sample m uses seed ^ m.
    Results are ordered by sample index whatever the worker count.
    projected_only computes just projected_half_norm (much cheaper)."""
    if samples < 1:
        raise InvalidInputError("samples must be >= 1")
    if isinstance(probes, CommutatorProbe):
        probes = [probes]
    probes = list(probes)
    ens.check_dimension(spec)
    for p in probes:
        build_probe(p, spec)
    tasks = [(spec, plan, probes, sample_seed(seed, m), projected_only) for m in range(samples)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_one_sample, tasks, chunksize=max(1, samples // (4 * workers))))
    else:
        rows = [_one_sample(t) for t in tasks]
    results = [[row[i] for row in rows] for i in range(len(probes))]
    return MonteCarloRecord(spec, plan, probes, int(seed), results, tuple(quantile_levels))
