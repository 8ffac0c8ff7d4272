"""Moment bounds on operator growth, Markov conversion to tails, and the
closed-form epsilon(delta) tail bounds for each supported system.

Moment functions return log |||O|||^2 (the squared moment norm) so that
expressions with r in the exponent stay finite. Probabilities and epsilons
are computed in log space and exponentiated at the end.
"""

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln, hyp1f1, logsumexp

from .errors import InvalidInputError, RegimeError
from .powerlaw import beta_exponent, check_regime, powerlaw_constants

E = math.e
LN_1M_INV_E = math.log(1 - 1 / E)


class TruncationWarning(UserWarning):
    """Path enumeration stopped at L_max while longer paths still exist."""


def g_of_eta(eta):
    return 1.0 + eta + eta * eta / 2.0


def _seq(x, n, name):
    if np.ndim(x) == 0:
        return [float(x)] * n
    x = [float(v) for v in x]
    if len(x) < n:
        raise InvalidInputError(f"{name} schedule has {len(x)} entries, need {n}")
    return x[:n]


@dataclass(frozen=True)
class MomentBoundParams:
    """Inputs shared by the general moment formulas.

    beta is a constant or a per-step list beta_1, beta_2, ...; when it is None
    the static formula uses beta = sqrt(4 (p - 1) w) with w the neighborhood
    weight (sum of b^2 over possible next steps). The Brownian formula uses w
    directly, again constant or per step.
    """

    p: float
    beta: object = None
    eta: float = 0.0
    g_eta: Optional[float] = None
    D: int = 2
    D_P: int = 1
    neighborhood_weight: object = None

    def __post_init__(self):
        if not self.p >= 2:
            raise InvalidInputError(f"moment order p must be >= 2, got {self.p}")
        if self.beta is not None and np.any(np.asarray(self.beta, float) <= 0):
            raise InvalidInputError("beta must be > 0")
        g = g_of_eta(self.eta)
        if self.g_eta is None:
            object.__setattr__(self, "g_eta", g)
        elif abs(self.g_eta - g) > 1e-12 * g:
            raise InvalidInputError(f"g_eta={self.g_eta} inconsistent with eta={self.eta} (expected {g})")
        if self.D_P < 1:
            raise InvalidInputError("D_P must be >= 1")

    @property
    def norm0_sq(self):
        """|||O_0|||^2 <= D_P^{2/p} for a unit-norm initial operator."""
        return self.D_P ** (2.0 / self.p)

    def static_betas(self, ell):
        if self.beta is not None:
            return _seq(self.beta, ell, "beta")
        if self.neighborhood_weight is None:
            raise InvalidInputError("need beta or neighborhood_weight")
        w = _seq(self.neighborhood_weight, ell, "neighborhood_weight")
        return [math.sqrt(4 * (self.p - 1) * x) for x in w]

    def brownian_rates(self, ell):
        if self.neighborhood_weight is None:
            raise InvalidInputError("need neighborhood_weight")
        return [x / self.p for x in _seq(self.neighborhood_weight, ell, "neighborhood_weight")]

    def constant_schedule(self, brownian=False):
        src = self.neighborhood_weight if (brownian or self.beta is None) else self.beta
        return np.ndim(src) == 0


# ---- time-ordered simplex integrals ---------------------------------------

def ordered_exponential_integral(betas, t):
    """int_{0<t_1<...<t_l<t} prod_k exp(beta_k (t_{k+1} - t_k)), t_{l+1} = t.

    Solves G_k' = beta_k G_k + G_{k-1}, G_0 = 1, via the exponential of a
    bidiagonal generator; returns G_l(t).
    """
    betas = [float(b) for b in betas]
    ell = len(betas)
    if ell == 0:
        return 1.0
    A = np.zeros((ell + 1, ell + 1))
    A[np.arange(1, ell + 1), np.arange(1, ell + 1)] = betas
    A[np.arange(1, ell + 1), np.arange(0, ell)] = 1.0
    return float(expm(A * t)[ell, 0])


def log_simplex_envelope(beta, ell, t):
    """log of e^{beta t} t^l / l!."""
    if t == 0:
        return -math.inf if ell > 0 else 0.0
    return beta * t + ell * math.log(t) - gammaln(ell + 1)


def log_simplex_exact(beta, ell, t):
    """log of the constant-beta integral: t^l/l! * 1F1(l; l+1; beta t),
    written as e^{beta t} t^l/l! * 1F1(1; l+1; -beta t) to avoid overflow."""
    if ell == 0:
        return 0.0
    if t == 0:
        return -math.inf
    return beta * t + ell * math.log(t) - gammaln(ell + 1) + math.log(hyp1f1(1, ell + 1, -beta * t))


def _path_weights(path_data):
    """(dict l -> W_l, truncated flag). Accepts a PathEnumeration or a dict."""
    if hasattr(path_data, "total_weight_by_length"):
        return dict(path_data.total_weight_by_length), bool(path_data.truncated)
    return {int(k): float(v) for k, v in dict(path_data).items()}, False


def _log_moment_sum(path_data, horizon, step_factor, schedule, constant, method, rate0, label):
    W, truncated = _path_weights(path_data)
    if truncated:
        warnings.warn(f"{label}: path enumeration truncated at L_max; longer paths are missing",
                      TruncationWarning, stacklevel=3)
    terms = []
    for ell, w in sorted(W.items()):
        if w <= 0 or ell < 1:
            continue
        rates, prefactor = schedule(ell)
        base = math.log(w) + sum(math.log(f) for f in prefactor)
        if constant and method in ("envelope", "exact"):
            fn = log_simplex_envelope if method == "envelope" else log_simplex_exact
            li = fn(rate0, ell, horizon)
        else:
            val = ordered_exponential_integral(rates, horizon)
            li = math.log(val) if val > 0 else -math.inf
        terms.append(base + li)
    if not terms:
        return -math.inf
    return float(logsumexp(terms))


def static_moment_bound(path_data, t, params, method="envelope", norm0_sq=None, log=False):
    """Upper bound on |||1/2 [A_r, O_0(t)]|||^2 for a time-independent
    random Hamiltonian.

    Sum over paths of W_l prod_k (4p/beta_k) times the time-ordered integral.
    method: "envelope" (e^{beta t} t^l/l!), "exact" (confluent closed form of
    the constant-beta integral) or "schedule" (matrix-exponential solve; used
    automatically for per-step beta).
    """
    if t < 0:
        raise InvalidInputError("t must be >= 0")
    p = params.p
    constant = params.constant_schedule()

    def schedule(ell):
        betas = params.static_betas(ell)
        return betas, [4 * p / b for b in betas]

    rate0 = params.static_betas(1)[0] if constant else None
    lv = _log_moment_sum(path_data, t, None, schedule, constant, method, rate0, "static_moment_bound")
    n0 = params.norm0_sq if norm0_sq is None else norm0_sq
    out = lv + math.log(n0) if n0 > 0 else -math.inf
    return out if log else math.exp(out)


def brownian_moment_bound(path_data, tau, params, method="envelope", norm0_sq=None, log=False):
    """Continuum-limit Brownian bound: sum over paths of W_l (8p)^l times the
    time-ordered integral with rates w_k / p. With constant w the envelope is
    e^{w tau/p} tau^l / l!."""
    if tau < 0:
        raise InvalidInputError("tau must be >= 0")
    p = params.p
    constant = params.constant_schedule(brownian=True)

    def schedule(ell):
        return params.brownian_rates(ell), [8 * p] * ell

    rate0 = params.brownian_rates(1)[0] if constant else None
    lv = _log_moment_sum(path_data, tau, None, schedule, constant, method, rate0, "brownian_moment_bound")
    n0 = params.norm0_sq if norm0_sq is None else norm0_sq
    out = lv + math.log(n0) if n0 > 0 else -math.inf
    return out if log else math.exp(out)


def klocal_brownian_closed_form(N, k, J, tau, p, D_P=1):
    """D_P^{2/p} e^{R b^2 tau/p} (k-1)/N e^{8 p R b^2 tau} with R the
    next-step count and b^2 the squared coefficient."""
    from .ensembles import klocal_coefficient
    from .paths import klocal_branching

    R = klocal_branching(N, k)
    b2 = klocal_coefficient(N, k, J) ** 2
    x = R * b2 * tau
    return D_P ** (2 / p) * math.exp(x / p) * (k - 1) / N * math.exp(8 * p * x)


# ---- Markov conversion ----------------------------------------------------

DEFAULT_P_GRID = np.geomspace(2.0, 200.0, 4001)


@dataclass(frozen=True)
class MarkovTail:
    probability: float
    log_raw: float
    p_star: float
    vacuous: bool


def markov_log_tail(log_moment_sq, p, eps):
    """log of |||O|||_p^p / eps^p given log |||O|||_p^2."""
    return 0.5 * p * log_moment_sq(p) - p * math.log(eps)


def markov_tail(moment_fn, eps, p_rule="grid", log_moment=True, p_grid=None):
    """P[||O|| >= eps] <= |||O|||_p^p / eps^p at the chosen p, clamped to 1.

    moment_fn(p) gives |||O|||_p^2 (or its log when log_moment is True).
    p_rule is a callable eps -> p (clamped to p >= 2), a fixed number, or
    "grid" for a search over p in [2, 200].
    """
    if not eps > 0:
        raise InvalidInputError(f"eps must be > 0, got {eps}")
    if log_moment:
        lm = moment_fn
    else:
        def lm(p):
            v = moment_fn(p)
            return math.log(v) if v > 0 else -math.inf
    if callable(p_rule):
        p = max(float(p_rule(eps)), 2.0)
        lt = markov_log_tail(lm, p, eps)
    elif p_rule == "grid":
        grid = DEFAULT_P_GRID if p_grid is None else p_grid
        vals = [markov_log_tail(lm, float(q), eps) for q in grid]
        i = int(np.nanargmin(vals))
        p, lt = float(grid[i]), vals[i]
    else:
        p = max(float(p_rule), 2.0)
        lt = markov_log_tail(lm, p, eps)
    prob = 1.0 if lt >= 0 else math.exp(lt)
    return MarkovTail(prob, lt, p, lt >= 0)


# ---- system tail bounds ---------------------------------------------------

SYSTEMS = (
    "NN1dBrownianOTOC",
    "NN1dBrownianSpectral",
    "NNdBrownianOTOC",
    "KLocalStaticOTOC",
    "KLocalBrownianOTOC",
    "PowerLawStaticOTOC",
    "PowerLawStaticSpectral",
    "PowerLawBrownianOTOC",
    "PowerLawBrownianSpectral",
)


@dataclass(frozen=True)
class TailEvaluation:
    system: str
    delta: float
    epsilon: float
    branch: str
    vacuous: bool
    boundary: Optional[float]
    log_epsilon: float = field(default=math.nan, repr=False)


@dataclass(frozen=True)
class TailValue:
    probability: float
    log_raw: float
    branch: str
    vacuous: bool


@dataclass(frozen=True)
class VelocityEstimate:
    kind: str
    value: float
    almost_sure: bool = True
    exact: Optional[Fraction] = None


def _safe_exp(x):
    if x > 709:
        return math.inf
    return math.exp(x)


def _require(cond, msg):
    if not cond:
        raise RegimeError(msg)


class _System:
    name = ""
    branches = ("exponential", "polynomial")

    def __init__(self, params, variant="printed"):
        self.params = dict(params)
        if variant not in ("printed", "derived"):
            raise InvalidInputError(f"variant must be 'printed' or 'derived', got {variant!r}")
        self.variant = variant
        self.setup()

    def setup(self):
        pass

    # log of the delta boundary; None for single-branch systems
    def log_boundary(self):
        return None

    def log_moment_sq(self, p):
        return None

    def p_star(self, eps):
        return None

    def _tail(self, eps):
        raise NotImplementedError

    def _eps_branch(self, delta, branch):
        raise NotImplementedError

    def tail(self, eps):
        if not eps > 0:
            raise InvalidInputError(f"eps must be > 0, got {eps}")
        lt, branch = self._tail(eps)
        return TailValue(1.0 if lt >= 0 else math.exp(lt), lt, branch, not lt < 0)

    def branch_for(self, delta):
        lb = self.log_boundary()
        if lb is None:
            return self.branches[0]
        # delta < boundary -> first branch; ties go to the second
        return self.branches[0] if math.log(delta) < lb else self.branches[1]

    def epsilon(self, delta):
        if not 0 < delta <= 1:
            raise RegimeError(f"delta must be in (0, 1], got {delta}")
        branch = self.branch_for(delta)
        le = self._eps_branch(delta, branch)
        eps = _safe_exp(le) if not math.isnan(le) else math.nan
        vac = not (math.isfinite(eps) and eps < 1)
        lb = self.log_boundary()
        return TailEvaluation(self.name, float(delta), eps, branch, vac,
                              None if lb is None else _safe_exp(lb), le)

    def velocity(self):
        raise NotImplementedError


def _time_params(p, allow_discrete=True):
    """('continuum', tau) or ('discrete', xi, T)."""
    if allow_discrete and p.get("xi") is not None:
        _require(p.get("T") is not None, "discrete form needs both xi and T")
        _require(p["xi"] > 0 and p["T"] >= 0, "need xi > 0 and T >= 0")
        return "discrete"
    _require(p.get("tau") is not None, "need tau (or xi and T for the discrete form)")
    _require(p["tau"] >= 0, "tau must be >= 0")
    return "continuum"


def _pos_int(p, key):
    v = p.get(key)
    _require(v is not None and int(v) == v and v >= 1, f"{key} must be a positive integer, got {v}")
    return int(v)


class NN1dBrownianOTOC(_System):
    name = "NN1dBrownianOTOC"

    def setup(self):
        p = self.params
        self.a = float(p.get("a", 1.0))
        self.r = _pos_int(p, "r")
        self.D_P = float(p.get("D_P", 1))
        self.form = _time_params(p)
        if self.form == "discrete":
            eta = self.a * p["xi"]
            T = p["T"]
            self.x = eta**2 * g_of_eta(eta) * (T + self.r - 1)
            self.E = eta**2 * T
        else:
            self.x = self.a**2 * p["tau"]
            self.E = self.x
        self.lnDP = math.log(self.D_P)

    @property
    def lam(self):
        return 8 * E * self.x / self.r

    def log_moment_sq(self, p):
        return 2 * self.lnDP / p + self.E / p + self.r * math.log(p * self.lam)

    def p_star(self, eps):
        return max(eps ** (2 / self.r) / (E * self.lam), 2.0)

    def _tail(self, eps):
        r, x = self.r, self.x
        base = self.lnDP + self.E / 2
        if r * math.log(16 * E**2 * x / r) < 2 * math.log(eps):
            return base - eps ** (2 / r) * r * r / (16 * E**2 * x), "exponential"
        return base + r * math.log(16 * E * x / r) - 2 * math.log(eps), "polynomial"

    def log_boundary(self):
        return self.lnDP + self.E / 2 - self.r

    def _eps_branch(self, delta, branch):
        r, x = self.r, self.x
        if x == 0:
            return -math.inf
        if branch == "exponential":
            inner = 16 * E**2 * x / r**2 * (self.E / 2 + self.lnDP - math.log(delta))
            return r / 2 * math.log(inner)
        return 0.5 * (self.lnDP + self.E / 2 - math.log(delta) + r * math.log(16 * E * x / r))

    def velocity(self):
        return VelocityEstimate("linear_velocity", 16 * E * math.exp(1 / (32 * E)) * self.a**2)


class NNdBrownianOTOC(_System):
    name = "NNdBrownianOTOC"

    def setup(self):
        p = self.params
        self.a = float(p.get("a", 1.0))
        self.r = _pos_int(p, "r")
        self.d = _pos_int(p, "d")
        self.D_P = float(p.get("D_P", 1))
        self.form = _time_params(p)
        if self.form == "discrete":
            eta = self.a * p["xi"]
            T = p["T"]
            self.x = eta**2 * g_of_eta(eta) * (T + self.r - 1)
            self.E2 = eta**2 * self.d * T  # eta^2 R T / 2 with R = 2d
        else:
            self.x = self.a**2 * p["tau"]
            self.E2 = self.d * self.x
        self.lnDP = math.log(self.D_P)

    @property
    def lam(self):
        return 16 * E * self.d * self.x / self.r

    def log_moment_sq(self, p):
        pl = p * self.lam
        if pl >= 1:
            return math.inf
        return 2 * self.lnDP / p + 2 * self.E2 / p + self.r * math.log(pl) - math.log1p(-pl)

    def p_star(self, eps):
        return max(eps ** (2 / self.r) / (E * self.lam), 2.0)

    def _tail(self, eps):
        r, x, d = self.r, self.x, self.d
        if r * math.log(32 * E**2 * d * x / r) < 2 * math.log(eps):
            lt = self.lnDP - LN_1M_INV_E + self.E2 - eps ** (2 / r) * r * r / (32 * E**2 * d * x)
            return lt, "exponential"
        u = 32 * E * d * x / r
        if u >= 1:
            return math.inf, "polynomial"
        return self.lnDP + self.E2 - 2 * math.log(eps) + r * math.log(u) - math.log1p(-u), "polynomial"

    def log_boundary(self):
        return self.lnDP - LN_1M_INV_E + self.E2 - self.r

    def _eps_branch(self, delta, branch):
        r, x, d = self.r, self.x, self.d
        if x == 0:
            return -math.inf
        if branch == "exponential":
            inner = 32 * E**2 * d * x / r**2 * (self.E2 + self.lnDP - LN_1M_INV_E - math.log(delta))
            power = r if self.variant == "printed" else r / 2
            return power * math.log(inner)
        u = 32 * E * d * x / r
        if u >= 1:
            return math.inf
        return 0.5 * (self.lnDP + self.E2 - math.log(delta) + r * math.log(u) - math.log1p(-u))

    def velocity(self):
        return VelocityEstimate("linear_velocity", 32 * E * self.d * math.exp(1 / (32 * E)) * self.a**2)


class NN1dBrownianSpectral(_System):
    """Union bound over support sizes; delta is the total failure
    probability delta_0 / (1 - lam), or 2 delta_0 for the simplified form."""

    name = "NN1dBrownianSpectral"
    branches = ("union",)

    def setup(self):
        p = self.params
        self.a = float(p.get("a", 1.0))
        self.r = _pos_int(p, "r")
        self.D = int(p.get("D", 2))
        self.lam_union = float(p.get("lam", 0.5))
        _require(0 < self.lam_union < 1, "lam must be in (0, 1)")
        self.simplified = bool(p.get("simplified", False))
        self.form = _time_params(p)
        if self.form == "discrete":
            eta = self.a * p["xi"]
            self.eta = eta
            self.x = p["T"] * eta**2 * g_of_eta(eta)
        else:
            self.eta = 0.0
            self.x = self.a**2 * p["tau"]

    def Y(self, delta):
        r = self.r
        if self.simplified:
            d0 = delta / 2
            return (math.log(4 * self.D) + 1 / (16 * E**2) - math.log(d0) / r) * 32 * E**2 * self.x / r
        d0 = delta * (1 - self.lam_union)
        return (math.log(2 * self.D / self.lam_union) + 1 / (16 * E**2) - math.log(d0) / r) * 16 * E**2 * self.x / r

    def _eps_branch(self, delta, branch):
        Y = self.Y(delta)
        if Y == 0:
            return -math.inf
        lead = self.r / 2 * math.log(Y)
        if self.simplified:
            return lead - math.log(1 - 1 / math.sqrt(2))
        if Y >= 1:
            return math.inf
        return lead - math.log(1 - math.sqrt(Y))

    def _tail(self, eps):
        raise NotImplementedError("the spectral bound is stated only as epsilon(delta)")

    def velocity(self):
        g = g_of_eta(self.eta)
        return VelocityEstimate("linear_velocity", g * self.a**2 * (16 * E**2 * math.log(2 * self.D) + 1))


class KLocalStaticOTOC(_System):
    name = "KLocalStaticOTOC"

    def setup(self):
        p = self.params
        self.J = float(p.get("J", 1.0))
        self.t = float(p["t"])
        self.N = _pos_int(p, "N")
        self.k = _pos_int(p, "k")
        _require(2 <= self.k <= self.N, "needs 2 <= k <= N")
        self.D_P = float(p.get("D_P", 1))
        self.lnDP = math.log(self.D_P)
        self.lnq = math.log((self.k - 1) / self.N)

    def L(self, eps):
        return math.log(self.N * eps * eps / (self.k - 1))

    def log_moment_sq(self, p):
        # sqrt(p - 1) bounded by sqrt(p) above p = 2, as in the tail algebra
        s = math.sqrt(p) if p > 2 else math.sqrt(p - 1)
        return 2 * self.lnDP / p + 4 * self.J * self.t * s + self.lnq

    def p_star(self, eps):
        return max((self.L(eps) / (6 * self.J * self.t)) ** 2, 2.0)

    def _tail(self, eps):
        L, Jt = self.L(eps), self.J * self.t
        if (L / (6 * Jt)) ** 2 > 2:
            return self.lnDP - (L / 6) ** 3 / (Jt * Jt), "exponential"
        return self.lnDP + 4 * Jt + self.lnq - 2 * math.log(eps), "polynomial"

    def log_boundary(self):
        return self.lnDP + (4 - 6 * math.sqrt(2)) * self.J * self.t

    def _eps_branch(self, delta, branch):
        Jt = self.J * self.t
        if branch == "exponential":
            ex = 6 * np.cbrt((self.lnDP - math.log(delta)) * Jt * Jt)
            val = self.lnq + ex
            return val if self.variant == "printed" else 0.5 * val
        return 0.5 * (self.lnDP + 4 * Jt + self.lnq - math.log(delta))

    def velocity(self):
        return VelocityEstimate("scrambling_time_ratio", 0.25, True, Fraction(1, 4))


class KLocalBrownianOTOC(_System):
    name = "KLocalBrownianOTOC"

    def setup(self):
        p = self.params
        self.J = float(p.get("J", 1.0))
        self.tau = float(p["tau"])
        self.N = _pos_int(p, "N")
        self.k = _pos_int(p, "k")
        _require(2 <= self.k <= self.N, "needs 2 <= k <= N")
        self.D_P = float(p.get("D_P", 1))
        self.lnDP = math.log(self.D_P)
        self.lnq = math.log((self.k - 1) / self.N)
        self.s = self.J**2 * self.tau
        # exponent constants: printed (32, 17/2, -23/2) or Markov-derived (64, 33/2, -31/2)
        if self.variant == "printed":
            self.c_exp, self.c_poly, self.c_bound = 32.0, 8.5, -11.5
        else:
            self.c_exp, self.c_poly, self.c_bound = 64.0, 16.5, -15.5

    def L(self, eps):
        return math.log(self.N * eps * eps / (self.k - 1))

    def log_moment_sq(self, p):
        return 2 * self.lnDP / p + self.s / p + self.lnq + 8 * p * self.s

    def p_star(self, eps):
        return max(self.L(eps) / (16 * self.s), 2.0)

    def _tail(self, eps):
        L = self.L(eps)
        if L / (16 * self.s) > 2:
            return self.lnDP + self.s / 2 - L * L / (self.c_exp * self.s), "exponential"
        return self.lnDP + self.c_poly * self.s + self.lnq - 2 * math.log(eps), "polynomial"

    def log_boundary(self):
        return self.lnDP + self.c_bound * self.s

    def _eps_branch(self, delta, branch):
        if branch == "exponential":
            inner = self.c_exp * self.s * (self.s / 2 - (math.log(delta) - self.lnDP))
            return 0.5 * (self.lnq + math.sqrt(inner))
        return 0.5 * (self.lnDP + self.c_poly * self.s + self.lnq - math.log(delta))

    def velocity(self):
        frac = Fraction(2, 17) if self.variant == "printed" else Fraction(2, 33)
        return VelocityEstimate("scrambling_time_ratio", float(frac), True, frac)


class _PowerLawOTOC(_System):
    """Shared algebra: |||O|||_p^2 <= D_P^{2/p} p kappa with
    kappa = c_alpha * scale / (2e)."""

    case = ""

    def setup(self):
        p = self.params
        self.alpha = float(p["alpha"])
        self.r = _pos_int(p, "r")
        self.D_P = float(p.get("D_P", 1))
        self.lnDP = math.log(self.D_P)
        self.const = powerlaw_constants(self.alpha, self.case, self.r)
        self.beta = self.const.beta
        self.c_alpha = self.const.c_alpha
        self.scale = self._scale()
        self.kappa = self.c_alpha * self.scale / (2 * E)

    def log_moment_sq(self, p):
        return 2 * self.lnDP / p + math.log(p) + math.log(self.kappa)

    def p_star(self, eps):
        return max(eps * eps / (E * self.kappa), 2.0)

    def _tail(self, eps):
        if eps * eps >= self.c_alpha * self.scale:
            return self.lnDP - eps * eps / (self.c_alpha * self.scale), "exponential"
        return self.lnDP + math.log(self.c_alpha * self.scale / E) - 2 * math.log(eps), "polynomial"

    def log_boundary(self):
        return self.lnDP - 1.0

    def _eps_branch(self, delta, branch):
        if self.scale == 0:
            return -math.inf
        if branch == "exponential":
            return 0.5 * math.log(self.c_alpha * (self.lnDP - math.log(delta)) * self.scale)
        return 0.5 * (self.lnDP + math.log(self.c_alpha / (E * delta)) + math.log(self.scale))

    def velocity(self):
        return VelocityEstimate("algebraic_exponent", self.beta)


class PowerLawStaticOTOC(_PowerLawOTOC):
    name = "PowerLawStaticOTOC"
    case = "static_otoc"

    def _scale(self):
        _require("t" in self.params, "needs t")
        return float(self.params["t"]) ** 2 / self.r ** (2 * self.beta)


class PowerLawBrownianOTOC(_PowerLawOTOC):
    name = "PowerLawBrownianOTOC"
    case = "brownian_otoc"

    def _scale(self):
        _require("tau" in self.params, "needs tau")
        return float(self.params["tau"]) / self.r**self.beta


class _PowerLawSpectral(_System):
    case = ""

    def setup(self):
        p = self.params
        self.alpha = float(p["alpha"])
        self.r = _pos_int(p, "r")
        self.D = int(p.get("D", 2))
        self.lnD = math.log(self.D)
        self.const = powerlaw_constants(self.alpha, self.case, self.r)
        self.regime = self.const.regime
        self.branches = (self.regime,)
        self.a_alpha = self.const.a_alpha
        self.b_alpha = self.const.b_alpha
        self.c_alpha = self.const.c_alpha

    def velocity(self):
        return VelocityEstimate("algebraic_exponent", self.const.beta)


class PowerLawStaticSpectral(_PowerLawSpectral):
    name = "PowerLawStaticSpectral"
    case = "static_spectral"

    def _eps_branch(self, delta, branch):
        t, r, a = float(self.params["t"]), self.r, self.alpha
        if t == 0:
            return -math.inf
        if self.regime == "high":
            inner = (self.a_alpha * self.lnD - math.log(delta)) / self.c_alpha
            return math.log(t / r) + 0.5 * math.log(inner)
        inner = (self.lnD * self.a_alpha - math.log(delta / self.b_alpha) / r ** (1 - 2 * a / 5)) / self.c_alpha
        return math.log(t) - (a - 1.5) * math.log(r) + 0.5 * math.log(inner)

    def _tail(self, eps):
        t, r, a = float(self.params["t"]), self.r, self.alpha
        if self.regime == "high":
            return self.a_alpha * self.lnD - self.c_alpha * r * r * eps * eps / (t * t), self.regime
        return (math.log(self.b_alpha) + self.a_alpha * r ** (1 - 2 * a / 5) * self.lnD
                - self.c_alpha * eps * eps * r ** (8 * a / 5 - 2) / (t * t)), self.regime


class PowerLawBrownianSpectral(_PowerLawSpectral):
    name = "PowerLawBrownianSpectral"
    case = "brownian_spectral"

    def _eps_branch(self, delta, branch):
        tau, r, a = float(self.params["tau"]), self.r, self.alpha
        if tau == 0:
            return -math.inf
        if self.regime == "high":
            inner = (self.a_alpha * self.lnD - math.log(delta)) * tau / (self.c_alpha * r)
            return 0.5 * math.log(inner)
        inner = tau / (self.c_alpha * r ** (1.5 * a - 2)) * (
            self.lnD * self.a_alpha * r ** (1 - a / 2) - math.log(delta / self.b_alpha))
        return 0.5 * math.log(inner)

    def _tail(self, eps):
        tau, r, a = float(self.params["tau"]), self.r, self.alpha
        if self.regime == "high":
            return self.a_alpha * self.lnD - self.c_alpha * r * eps * eps / tau, self.regime
        return (math.log(self.b_alpha) + self.a_alpha * r ** (1 - a / 2) * self.lnD
                - self.c_alpha * eps * eps * r ** (1.5 * a - 2) / tau), self.regime


_REGISTRY = {cls.name: cls for cls in (
    NN1dBrownianOTOC, NN1dBrownianSpectral, NNdBrownianOTOC, KLocalStaticOTOC,
    KLocalBrownianOTOC, PowerLawStaticOTOC, PowerLawStaticSpectral,
    PowerLawBrownianOTOC, PowerLawBrownianSpectral,
)}


def tail_bound(system, variant="printed", **parameters):
    """Build the tail-bound object for a named system."""
    if system not in _REGISTRY:
        raise InvalidInputError(f"unknown system {system!r}; expected one of {SYSTEMS}")
    return _REGISTRY[system](parameters, variant)


def epsilon_of_delta(system, parameters, delta, variant="printed"):
    return tail_bound(system, variant, **parameters).epsilon(delta)


def velocity(system, parameters, variant="printed"):
    return tail_bound(system, variant, **parameters).velocity()


def branch_discontinuity(bound):
    """Both branch formulas evaluated at the delta boundary."""
    lb = bound.log_boundary()
    if lb is None:
        return None
    delta = math.exp(lb)
    if not 0 < delta <= 1:
        return {"boundary": delta, "first": math.nan, "second": math.nan, "gap": math.nan}
    first = _safe_exp(bound._eps_branch(delta, bound.branches[0]))
    second = _safe_exp(bound._eps_branch(delta, bound.branches[1]))
    return {"boundary": delta, "first": first, "second": second, "gap": abs(first - second)}


def nn_otoc_velocity(d=1, a=1.0):
    """16 e e^{1/(32e)} a^2 in one dimension, 32 e d e^{1/(32e)} a^2 above."""
    base = 16 * E if d == 1 else 32 * E * d
    return base * math.exp(1 / (32 * E)) * a * a


def brownian_limit_gaps(delta, r, tau, a=1.0, xi0=0.2, halvings=5, D_P=1):
    """Discrete-minus-continuum epsilon(delta) for the 1d NN OTOC bound as
    xi is halved at fixed tau = xi^2 T. Returns (xis, gaps, continuum)."""
    cont = tail_bound("NN1dBrownianOTOC", a=a, r=r, tau=tau, D_P=D_P).epsilon(delta).epsilon
    xis, gaps = [], []
    for j in range(halvings + 1):
        xi = xi0 / 2**j
        T = tau / xi**2
        disc = tail_bound("NN1dBrownianOTOC", a=a, r=r, xi=xi, T=T, D_P=D_P).epsilon(delta).epsilon
        xis.append(xi)
        gaps.append(disc - cont)
    return xis, gaps, cont


__all__ = [
    "E", "SYSTEMS", "MomentBoundParams", "TailEvaluation", "TailValue", "VelocityEstimate",
    "MarkovTail", "TruncationWarning", "g_of_eta", "ordered_exponential_integral",
    "log_simplex_envelope", "log_simplex_exact", "static_moment_bound", "brownian_moment_bound",
    "klocal_brownian_closed_form", "markov_tail", "markov_log_tail", "tail_bound",
    "epsilon_of_delta", "velocity", "branch_discontinuity", "nn_otoc_velocity",
    "brownian_limit_gaps", "beta_exponent", "check_regime", "powerlaw_constants",
]
