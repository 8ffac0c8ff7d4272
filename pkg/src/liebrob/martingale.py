"""Exact-enumeration and Monte Carlo checks of the matrix martingale
inequalities: uniform smoothness, low-rank domination, the norm facts and the
sum of bounded random matrices."""

from dataclasses import dataclass, field
from math import e, log, sqrt
from typing import Optional

import numpy as np

from .ensembles import pauli_string
from .errors import InvalidInputError, PreconditionError, ResourceError
from .linalg import as_matrix, is_hermitian

PROB_TOL = 1e-12
MEAN_TOL = 1e-12
SLACK_TOL = -1e-10
MAX_ATOMS = 10**6


@dataclass
class FiniteMatrixDistribution:
    """Finitely many matrix atoms with probabilities. `children` optionally
    maps an atom index to the conditional distribution of a second matrix Y
    given that atom."""

    atoms: list
    probs: list
    children: Optional[dict] = None

    def __post_init__(self):
        if len(self.atoms) == 0 or len(self.atoms) != len(self.probs):
            raise InvalidInputError("need equally many atoms and probabilities (at least one)")
        self.atoms = [as_matrix(a) for a in self.atoms]
        self.probs = np.asarray(self.probs, float)
        if np.any(self.probs <= 0):
            raise InvalidInputError("probabilities must be positive")
        if abs(self.probs.sum() - 1.0) > PROB_TOL:
            raise InvalidInputError(f"probabilities sum to {self.probs.sum()!r}, not 1")
        dims = {a.shape for a in self.atoms}
        if len(dims) != 1:
            raise InvalidInputError(f"atoms have mixed shapes {dims}")
        if self.children is not None:
            for i, child in self.children.items():
                if not 0 <= i < len(self.atoms):
                    raise InvalidInputError(f"child key {i} is not an atom index")
                if child.dim != self.dim:
                    raise InvalidInputError("conditional atoms must match the parent dimension")

    @property
    def dim(self):
        return self.atoms[0].shape[0]

    def __len__(self):
        return len(self.atoms)

    def mean(self):
        return sum(p * a for p, a in zip(self.probs, self.atoms))

    def is_zero_mean(self, tol=MEAN_TOL):
        return float(np.max(np.abs(self.mean()))) <= tol

    def is_conditionally_zero_mean(self, tol=MEAN_TOL):
        if not self.children:
            return False
        return all(c.is_zero_mean(tol) for c in self.children.values())

    def total_atoms(self):
        if not self.children:
            return len(self.atoms)
        return sum(len(self.children[i]) if i in self.children else 1 for i in range(len(self.atoms)))

    def sample(self, rng, size):
        idx = rng.choice(len(self.atoms), size=size, p=self.probs)
        return [self.atoms[i] for i in idx]


def deterministic(M):
    return FiniteMatrixDistribution([M], [1.0])


def rademacher(B, center=None):
    """+-B with probability 1/2 each, optionally shifted by a fixed center."""
    B = as_matrix(B)
    c = np.zeros_like(B) if center is None else as_matrix(center)
    return FiniteMatrixDistribution([c + B, c - B], [0.5, 0.5])


def conditional(X, Y_given):
    """Attach Y | X (dict index -> distribution, or one distribution for all)."""
    if isinstance(Y_given, FiniteMatrixDistribution):
        Y_given = {i: Y_given for i in range(len(X))}
    return FiniteMatrixDistribution(X.atoms, X.probs, dict(Y_given))


def _joint(X, Y_given):
    """Yield (x, y, prob) over the joint support."""
    if X.total_atoms() > MAX_ATOMS:
        raise ResourceError("joint atom count", X.total_atoms(), MAX_ATOMS)
    for i, (x, px) in enumerate(zip(X.atoms, X.probs)):
        child = Y_given.get(i) if Y_given else None
        if child is None:
            yield x, np.zeros_like(x), px
            continue
        for y, py in zip(child.atoms, child.probs):
            yield x, y, px * py


def _check_atoms(n):
    if n > MAX_ATOMS:
        raise ResourceError("joint atom count", n, MAX_ATOMS)


def _schatten_pow(M, p):
    """||M||_p^p from the singular values."""
    s = np.linalg.svd(M, compute_uv=False)
    if p == np.inf:
        return float(s[0])
    return float(np.sum(s**p))


@dataclass(frozen=True)
class MomentEstimate:
    kind: str
    p: float
    value: float
    exact: bool
    variance_proxy: Optional[float] = None
    stderr: Optional[float] = None
    q: Optional[float] = None


def _lq_sp(pairs, p, q=None):
    """(E ||M||_p^q)^{1/q} over (matrix, prob) pairs; q defaults to p."""
    q = p if q is None else q
    acc = 0.0
    for M, w in pairs:
        n = _schatten_pow(M, p) ** (1.0 / p)
        acc += w * n**q
    return acc ** (1.0 / q)


def exact_expected_norm(dist, p, projector=None, q=None):
    """(E ||M P||_p^q)^{1/q} by enumeration; with conditional children the
    random matrix is the parent atom plus the child atom."""
    _check_atoms(dist.total_atoms())
    pairs = [(x + y, w) for x, y, w in _joint(dist, dist.children)]
    if projector is not None:
        P = as_matrix(projector)
        pairs = [(M @ P, w) for M, w in pairs]
    kind = "schatten_p" if projector is None else f"schatten_p_with_projector({int(round(np.trace(P).real))})"
    return MomentEstimate(kind, p, _lq_sp(pairs, p, q), True, q=q)


@dataclass(frozen=True)
class SlackRecord:
    check: str
    p: float
    slack: float
    passed: bool
    detail: dict = field(default_factory=dict)


def _require_zero_mean(X):
    for i, child in (X.children or {}).items():
        if not child.is_zero_mean():
            raise PreconditionError(f"conditional mean of Y given atom {i} is not zero "
                                    f"(max entry {np.max(np.abs(child.mean())):.3e})")


def _smoothness_terms(X, p, q=None, P=None):
    pairs_x, pairs_y, pairs_s = [], [], []
    for x, y, w in _joint(X, X.children):
        if P is not None:
            x, y = x @ P, y @ P
        pairs_x.append((x, w))
        pairs_y.append((y, w))
        pairs_s.append((x + y, w))
    return _lq_sp(pairs_x, p, q) ** 2, _lq_sp(pairs_y, p, q) ** 2, _lq_sp(pairs_s, p, q) ** 2


def check_uniform_smoothness(X, Y_conditional=None, p=2.0):
    """S = |||X|||_p^2 + (p-1)|||Y|||_p^2 - |||X+Y|||_p^2; passes iff
    S >= -1e-10. Y | X comes from X.children or Y_conditional."""
    if not p >= 2:
        raise InvalidInputError(f"p must be >= 2, got {p}")
    if Y_conditional is not None:
        X = conditional(X, Y_conditional)
    _require_zero_mean(X)
    nx, ny, ns = _smoothness_terms(X, p)
    S = nx + (p - 1) * ny - ns
    return SlackRecord("uniform_smoothness", p, float(S), bool(S >= SLACK_TOL), {"X": nx, "Y": ny, "X+Y": ns})


def random_projector(rng, dim, rank):
    G = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    Q, _ = np.linalg.qr(G)
    return Q @ Q.conj().T


def check_projected_smoothness(X, Y_conditional=None, p=2.0, rank=1, n_projectors=50, seed=0):
    """Low-rank-input smoothness over sampled projectors of the given rank.

    Each projector gives an exact instance (XP, YP still has zero conditional
    mean). The supremum form is checked over the same sample; the sampled
    supremum is a lower bound on the true one.
    """
    if Y_conditional is not None:
        X = conditional(X, Y_conditional)
    _require_zero_mean(X)
    rng = np.random.default_rng(seed)
    worst, sx, sy, ss = np.inf, 0.0, 0.0, 0.0
    for _ in range(n_projectors):
        P = random_projector(rng, X.dim, rank)
        nx, ny, ns = _smoothness_terms(X, p, P=P)
        worst = min(worst, nx + (p - 1) * ny - ns)
        sx, sy, ss = max(sx, nx), max(sy, ny), max(ss, ns)
    sup_slack = sx + (p - 1) * sy - ss
    S = min(worst, sup_slack)
    return SlackRecord("projected_smoothness", p, float(S), bool(S >= SLACK_TOL),
                       {"per_projector_min": worst, "sup_slack": sup_slack, "rank": rank})


def check_general_smoothness(X, Y_conditional=None, p=2.0, q=2.0):
    """L_q(S_p) smoothness with C = 4(p+q); reports the smallest constant
    that works on this instance."""
    if Y_conditional is not None:
        X = conditional(X, Y_conditional)
    _require_zero_mean(X)
    nx, ny, ns = _smoothness_terms(X, p, q)
    C = 4 * (p + q)
    c_min = (ns - nx) / ny if ny > 0 else 0.0
    S = nx + C * ny - ns
    return SlackRecord("general_smoothness", p, float(S), bool(S >= SLACK_TOL),
                       {"q": q, "C": C, "C_min": float(max(c_min, 0.0))})


def validate_density(rho):
    rho = as_matrix(rho)
    if abs(np.trace(rho).real - 1) > 1e-10 or not is_hermitian(rho, 1e-10):
        raise PreconditionError("rho must be Hermitian with unit trace")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -1e-10:
        raise PreconditionError("rho must be positive semidefinite")
    return rho


def _state_moment(pairs, psi_or_rho, p, is_rho):
    acc = 0.0
    for M, w in pairs:
        G = M.conj().T @ M
        if is_rho:
            val = float(np.trace(psi_or_rho @ G).real)
        else:
            val = float(np.vdot(psi_or_rho, G @ psi_or_rho).real)
        acc += w * max(val, 0.0) ** (p / 2)
    return acc ** (2 / p)


def check_low_rank_domination(dist, rho, p=2.0, n_random=100, seed=0):
    """E[Tr(rho X^dag X)^{p/2}]^{2/p} against the largest pure-state value
    over the eigenvectors of rho plus random pure states."""
    rho = validate_density(rho)
    _check_atoms(dist.total_atoms())
    pairs = [(x + y, w) for x, y, w in _joint(dist, dist.children)]
    lhs = _state_moment(pairs, rho, p, True)
    _, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    rng = np.random.default_rng(seed)
    best = 0.0
    cands = [vecs[:, i] for i in range(vecs.shape[1])]
    for _ in range(n_random):
        v = rng.standard_normal(rho.shape[0]) + 1j * rng.standard_normal(rho.shape[0])
        cands.append(v / np.linalg.norm(v))
    for psi in cands:
        best = max(best, _state_moment(pairs, psi, p, False))
    S = best - lhs
    return SlackRecord("low_rank_domination", p, float(S), bool(S >= SLACK_TOL), {"lhs": lhs, "rhs": best})


# ---- norm facts ------------------------------------------------------------

def _dp2_norm(pairs, rank):
    """|||X|||_{D_P,2}: square root of the top-rank eigenvalue sum of E[X^dag X]."""
    G = sum(w * (M.conj().T @ M) for M, w in pairs)
    ev = np.sort(np.linalg.eigvalsh(0.5 * (G + G.conj().T)))[::-1]
    return float(np.sqrt(max(ev[:rank].sum(), 0.0)))


def random_unitary(rng, dim):
    G = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    Q, R = np.linalg.qr(G)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def check_norm_facts(A, O, O2=None, p=2.0, rank=None, seed=0, tol=1e-10):
    """Minkowski, operator-ideal and unitary invariance for |||.|||_p and,
    when `rank` is given, for |||.|||_{D_P,2}. O and O2 are distributions
    over a common index set (O2 defaults to an independent copy of O)."""
    A = as_matrix(A)
    rng = np.random.default_rng(seed)
    U, V = random_unitary(rng, A.shape[0]), random_unitary(rng, A.shape[0])
    if O2 is None:
        pairs_sum = [(a + b, wa * wb) for a, wa in zip(O.atoms, O.probs) for b, wb in zip(O.atoms, O.probs)]
        pairs_2 = [(b, wa * wb) for a, wa in zip(O.atoms, O.probs) for b, wb in zip(O.atoms, O.probs)]
        pairs_1 = [(a, wa * wb) for a, wa in zip(O.atoms, O.probs) for b, wb in zip(O.atoms, O.probs)]
    else:
        if len(O2) != len(O):
            raise InvalidInputError("O and O2 must share their index set")
        pairs_1 = list(zip(O.atoms, O.probs))
        pairs_2 = list(zip(O2.atoms, O.probs))
        pairs_sum = [(a + b, w) for a, b, w in zip(O.atoms, O2.atoms, O.probs)]
    opA = float(np.linalg.norm(A, 2))
    norms = {"p": lambda pr: _lq_sp(pr, p)}
    if rank is not None:
        norms["dp2"] = lambda pr: _dp2_norm(pr, rank)
    out = {}
    base = list(zip(O.atoms, O.probs))
    for key, nrm in norms.items():
        n_o = nrm(base)
        out[f"minkowski[{key}]"] = bool(nrm(pairs_sum) <= nrm(pairs_1) + nrm(pairs_2) + tol)
        out[f"ideal_left[{key}]"] = bool(nrm([(A @ M, w) for M, w in base]) <= opA * n_o + tol)
        out[f"ideal_right[{key}]"] = bool(nrm([(M @ A, w) for M, w in base]) <= opA * n_o + tol)
        out[f"unitary[{key}]"] = bool(abs(nrm([(U @ M @ V, w) for M, w in base]) - n_o) <= tol * max(1.0, n_o))
    return out


# ---- sum of bounded random matrices ----------------------------------------

def _term_matrices(N, D, rng):
    """N fixed Hermitian unit-norm matrices: random Pauli strings when D is a
    power of two, otherwise random non-identity basis elements on one D-level
    factor."""
    if D == 1:
        return np.ones((N, 1, 1), complex)
    n = int(round(np.log2(D)))
    if 2**n == D:
        idx = rng.integers(1, 4**n, size=N)
        return np.stack([pauli_string(int(i), n, 2) for i in idx])
    idx = rng.integers(1, D * D, size=N)
    return np.stack([pauli_string(int(i), 1, D) for i in idx])


@dataclass
class SumMatricesRecord:
    N: int
    D: int
    D_P: int
    v: float
    samples: int
    eps_grid: np.ndarray
    tail_spectral: np.ndarray
    tail_frobenius: np.ndarray
    tail_projected: np.ndarray
    bound_spectral: np.ndarray
    bound_frobenius: np.ndarray
    bound_projected: np.ndarray
    exp_region: np.ndarray
    mean_spectral: float
    mean_frobenius: float
    mean_projected: float
    passed: bool
    violations: list


def sum_matrices_demo(N_terms, D, bounds=1.0, samples=10_000, seed=0, D_P=1, eps_grid=None):
    """Rademacher series S = sum_i s_i b_i sigma_i against the exponential
    tails D exp(-eps^2/(e^2 v)) (asserted only where eps^2 > 2 e^2 v) and the
    Chebyshev branch D v / eps^2 elsewhere."""
    if samples < 100:
        raise InvalidInputError("samples must be >= 100")
    if not 1 <= D_P <= D:
        raise InvalidInputError("need 1 <= D_P <= D")
    b = np.broadcast_to(np.asarray(bounds, float), (N_terms,)).copy()
    v = float(np.sum(b**2))
    rng = np.random.default_rng(seed)
    mats = _term_matrices(N_terms, D, rng) * b[:, None, None]
    signs = rng.choice([-1.0, 1.0], size=(samples, N_terms))
    S = np.einsum("mn,nij->mij", signs, mats)
    spec = np.abs(np.linalg.eigvalsh(S)).max(axis=1)
    frob = np.sqrt(np.einsum("mij,mij->m", S.conj(), S).real / D)
    proj = np.linalg.norm(S[:, :, :D_P], ord=2, axis=(1, 2))
    if eps_grid is None:
        top = max(float(spec.max()), sqrt(2) * e * sqrt(v)) * 1.5 + 1e-12
        eps_grid = np.linspace(top / 200, top, 200)
    eps_grid = np.asarray(eps_grid, float)

    def tail(x):
        return (x[None, :] >= eps_grid[:, None]).mean(axis=1)

    region = eps_grid**2 > 2 * e**2 * v
    with np.errstate(divide="ignore", over="ignore"):
        def bnd(pref, scale):
            ex = pref * np.exp(-(eps_grid**2) / (e**2 * v * scale)) if v > 0 else np.zeros_like(eps_grid)
            ch = pref * v * scale / eps_grid**2 if v > 0 else np.zeros_like(eps_grid)
            return np.where(region, ex, ch)

        b_spec = bnd(D, 1.0)
        b_frob = bnd(1.0, 1.0)
        b_proj = bnd(D_P, 1.0)
    t_spec, t_frob, t_proj = tail(spec), tail(frob), tail(proj)
    violations = []
    for name, t, bb in (("spectral", t_spec, b_spec), ("frobenius", t_frob, b_frob), ("projected", t_proj, b_proj)):
        bad = np.nonzero(t > bb + 1e-15)[0]
        violations += [(name, float(eps_grid[i]), float(t[i]), float(bb[i])) for i in bad]
    return SumMatricesRecord(
        N_terms, D, D_P, v, samples, eps_grid, t_spec, t_frob, t_proj, b_spec, b_frob, b_proj, region,
        float(spec.mean()), float(frob.mean()), float(proj.mean()), not violations, violations,
    )


def expectation_ratio(record):
    """E||S|| / sqrt(v ln D); NaN when D = 1 or v = 0."""
    if record.D < 2 or record.v == 0:
        return float("nan")
    return record.mean_spectral / sqrt(record.v * log(record.D))


# ---- Monte Carlo moments ----------------------------------------------------

def monte_carlo_norm_moment(dist, p, samples, seed=0):
    """Sample mean of ||X||_p^p with its standard error; value is the p-th root."""
    rng = np.random.default_rng(seed)
    draws = np.array([_schatten_pow(M, p) for M in dist.sample(rng, samples)])
    mean = float(draws.mean())
    se = float(draws.std(ddof=1) / np.sqrt(samples))
    return MomentEstimate("schatten_p", p, mean ** (1.0 / p), False, stderr=se)


def standard_error_curve(dist, p, M0=200, doublings=5, seed=0):
    """Standard errors of the moment estimator at M0, 2 M0, ..."""
    out = []
    for j in range(doublings + 1):
        est = monte_carlo_norm_moment(dist, p, M0 * 2**j, seed=seed + j)
        out.append((M0 * 2**j, est.stderr))
    return out
