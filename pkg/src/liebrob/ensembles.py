"""Interaction geometries and zero-mean, norm-bounded random term samplers."""

from dataclasses import dataclass, field
from itertools import combinations
from math import factorial, prod, sqrt
from typing import Optional

import numpy as np

from .errors import InvalidSpecError, ResourceError
from .linalg import embed_local

GEOMETRIES = ("chain", "grid", "complete_k_local", "powerlaw_chain")
SAMPLERS = ("rademacher_pauli", "signed_normalized_gaussian")
TIME_MODELS = ("static", "brownian")
DEFAULT_DIM_CAP = 2**14
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class InteractionTerm:
    id: int
    support: tuple
    bound: float
    coefficient: float


@dataclass(frozen=True)
class EnsembleSpec:
    geometry: str
    n_sites: int = 0
    dims: tuple = ()
    k: int = 2
    alpha: float = 0.0
    local_dim: int = 2
    coupling: float = 1.0
    sampler: str = "rademacher_pauli"
    time_model: str = "static"
    xi: Optional[float] = None

    def __post_init__(self):
        if self.geometry == "grid":
            object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
            object.__setattr__(self, "n_sites", int(prod(self.dims)) if self.dims else 0)
        validate_spec(self)

    @property
    def dimension(self):
        return self.local_dim**self.n_sites

    @property
    def lattice_dim(self):
        return len(self.dims) if self.geometry == "grid" else 1


def chain(n_sites, a=1.0, **kw):
    return EnsembleSpec("chain", n_sites=n_sites, coupling=a, **kw)


def grid(dims, a=1.0, **kw):
    return EnsembleSpec("grid", dims=tuple(dims), coupling=a, **kw)


def complete_k_local(n_sites, k, J=1.0, **kw):
    return EnsembleSpec("complete_k_local", n_sites=n_sites, k=k, coupling=J, **kw)


def powerlaw_chain(n_sites, alpha, coupling=1.0, **kw):
    return EnsembleSpec("powerlaw_chain", n_sites=n_sites, alpha=alpha, coupling=coupling, **kw)


def validate_spec(spec):
    g = spec.geometry
    if g not in GEOMETRIES:
        raise InvalidSpecError(f"unknown geometry {g!r}; expected one of {GEOMETRIES}")
    if spec.sampler not in SAMPLERS:
        raise InvalidSpecError(f"unknown sampler {spec.sampler!r}")
    if spec.time_model not in TIME_MODELS:
        raise InvalidSpecError(f"unknown time model {spec.time_model!r}")
    if spec.time_model == "brownian" and (spec.xi is None or spec.xi <= 0):
        raise InvalidSpecError("brownian time model needs xi > 0")
    if spec.local_dim < 2:
        raise InvalidSpecError("local_dim must be >= 2")
    if g == "grid":
        if not spec.dims or any(d < 1 for d in spec.dims):
            raise InvalidSpecError(f"grid dims must be positive, got {spec.dims}")
    if spec.n_sites < 2:
        raise InvalidSpecError(f"need at least 2 sites, got {spec.n_sites}")
    if g == "complete_k_local" and not (2 <= spec.k <= spec.n_sites):
        raise InvalidSpecError(f"complete_k_local needs 2 <= k <= N, got k={spec.k}, N={spec.n_sites}")
    if g == "powerlaw_chain" and not spec.alpha > 1:
        raise InvalidSpecError(f"powerlaw_chain needs alpha > 1, got {spec.alpha}")


def klocal_coefficient(n_sites, k, J):
    return sqrt(J**2 * factorial(k - 1) / (k * n_sites ** (k - 1)))


def term_coefficient(spec, support):
    g = spec.geometry
    if g in ("chain", "grid"):
        return float(spec.coupling)
    if g == "complete_k_local":
        return klocal_coefficient(spec.n_sites, spec.k, spec.coupling)
    i, j = support
    return float(spec.coupling) * abs(i - j) ** (-spec.alpha)


def grid_edges(dims):
    dims = tuple(dims)
    strides = [prod(dims[a + 1:]) for a in range(len(dims))]
    edges = []
    for site in range(prod(dims)):
        coords = [(site // strides[a]) % dims[a] for a in range(len(dims))]
        for a in range(len(dims)):
            if coords[a] + 1 < dims[a]:
                edges.append((site, site + strides[a]))
    return edges


def supports(spec):
    g = spec.geometry
    N = spec.n_sites
    if g == "chain":
        return [(i, i + 1) for i in range(N - 1)]
    if g == "grid":
        return grid_edges(spec.dims)
    if g == "complete_k_local":
        return list(combinations(range(N), spec.k))
    return list(combinations(range(N), 2))


def build_terms(spec):
    """Deterministic list of InteractionTerm for the geometry."""
    out = []
    for tid, sup in enumerate(supports(spec)):
        c = term_coefficient(spec, sup)
        out.append(InteractionTerm(tid, tuple(sup), abs(c), c))
    return out


# ---- local operator bases -------------------------------------------------

_BASIS_CACHE = {}


def hermitian_basis(D):
    """Identity followed by the D^2 - 1 generalized Gell-Mann matrices, each
    scaled to unit spectral norm. For D = 2 this is I, X, Y, Z."""
    if D in _BASIS_CACHE:
        return _BASIS_CACHE[D]
    mats = [np.eye(D, dtype=complex)]
    for j in range(D):
        for k in range(j + 1, D):
            s = np.zeros((D, D), complex)
            s[j, k] = s[k, j] = 1
            a = np.zeros((D, D), complex)
            a[j, k] = -1j
            a[k, j] = 1j
            mats += [s, a]
    for l in range(1, D):
        d = np.zeros(D)
        d[:l] = 1
        d[l] = -l
        mats.append(np.diag(d / np.abs(d).max()).astype(complex))
    _BASIS_CACHE[D] = mats
    return mats


def pauli_string(index, n_factors, D=2):
    """Tensor product of basis elements; digits of index in base D^2, most
    significant digit on the first factor."""
    basis = hermitian_basis(D)
    q = D * D
    digits = []
    for _ in range(n_factors):
        digits.append(index % q)
        index //= q
    out = np.ones((1, 1), complex)
    for d in reversed(digits):
        out = np.kron(out, basis[d])
    return out


def local_x(D=2):
    """|0><1| + |1><0|; Pauli X when D = 2."""
    return hermitian_basis(D)[1]


# ---- seeded streams and sampling ------------------------------------------

def term_stream(seed, step, term_id):
    """Counter-based generator keyed on (seed, step, term id)."""
    ss = np.random.SeedSequence([int(seed) & _MASK64, int(step) & _MASK64, int(term_id) & _MASK64])
    return np.random.Generator(np.random.Philox(ss))


def sample_term(rng, term, local_dim=2, sampler="rademacher_pauli"):
    """Raw Hermitian matrix on the term's support with spectral norm <= 1."""
    k = len(term.support)
    dim = local_dim**k
    sign = 1.0 if rng.integers(0, 2) else -1.0
    if sampler == "rademacher_pauli":
        idx = int(rng.integers(1, (local_dim * local_dim) ** k))
        return sign * pauli_string(idx, k, local_dim)
    if sampler == "signed_normalized_gaussian":
        G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        H = 0.5 * (G + G.conj().T)
        nrm = np.abs(np.linalg.eigvalsh(H)).max()
        return sign * H / nrm
    raise InvalidSpecError(f"unknown sampler {sampler!r}")


@dataclass(frozen=True)
class EnsembleSample:
    spec: EnsembleSpec
    seed: int
    step_index: int
    raw: dict = field(repr=False)

    def term_matrix(self, term):
        return term.coefficient * self.raw[term.id]


def check_dimension(spec, cap=DEFAULT_DIM_CAP):
    need = spec.dimension
    if need > cap:
        raise ResourceError("Hilbert-space dimension", need, cap)


def sample_raw(seed, spec, step_index, terms):
    return {
        t.id: sample_term(term_stream(seed, step_index, t.id), t, spec.local_dim, spec.sampler)
        for t in terms
    }


def assemble(spec, terms, sample):
    dim = spec.dimension
    H = np.zeros((dim, dim), complex)
    for t in terms:
        if t.coefficient == 0.0:
            continue
        H += t.coefficient * embed_local(sample.raw[t.id], t.support, spec.n_sites, spec.local_dim)
    return H


def sample_hamiltonian(seed, spec, step_index=0, cap=DEFAULT_DIM_CAP, terms=None):
    """Draw every term and return (EnsembleSample, embedded Hamiltonian)."""
    check_dimension(spec, cap)
    terms = build_terms(spec) if terms is None else terms
    sample = EnsembleSample(spec, int(seed), int(step_index), sample_raw(seed, spec, step_index, terms))
    return sample, assemble(spec, terms, sample)
