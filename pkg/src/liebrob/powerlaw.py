"""Multi-scale constant chains for 1d power-law interacting chains.

Four cases are supported: static_otoc, brownian_otoc, static_spectral and
brownian_spectral. Each has a high-alpha regime with a linear light cone and a
low-alpha regime with an algebraic one. Every intermediate constant is exposed
on the returned record so that downstream code (and tests) can audit it.
"""

from dataclasses import dataclass, field
from math import ceil, e, exp, log2, sqrt

from .errors import RegimeError

CASES = ("static_otoc", "brownian_otoc", "static_spectral", "brownian_spectral")

# (lower alpha limit, regime split) per case
_LIMITS = {
    "static_otoc": (1.0, 2.0),
    "brownian_otoc": (1.0, 1.5),
    "static_spectral": (1.5, 2.5),
    "brownian_spectral": (1.5, 2.0),
}


def _schedule_exponent(alpha, case):
    """Exponent x in M = sum_k 2^{-k x}; N_k decays like 2^{-k (x + 1)}."""
    return {
        "static_otoc": (alpha - 2) / 2,
        "brownian_otoc": (2 * alpha - 3) / 3,
        "static_spectral": (2 * alpha - 5) / 5,
        "brownian_spectral": (2 * alpha - 4) / 4,
    }[case]


def check_regime(alpha, case):
    """Return "high" or "low"; raise RegimeError on the boundaries or below
    the lower limit."""
    if case not in CASES:
        raise RegimeError(f"unknown power-law case {case!r}; expected one of {CASES}")
    lo, split = _LIMITS[case]
    if not alpha > lo:
        raise RegimeError(f"{case} requires alpha > {lo:g}, got {alpha}")
    if alpha == split:
        raise RegimeError(f"{case} requires alpha != {split:g} (regime boundary)")
    return "high" if alpha > split else "low"


def beta_exponent(alpha, case):
    """Light-cone exponent beta for the case and alpha."""
    regime = check_regime(alpha, case)
    if regime == "high":
        return 1.0
    return {
        "static_otoc": alpha - 1,
        "brownian_otoc": 2 * alpha - 2,
        "static_spectral": alpha - 1.5,
        "brownian_spectral": 2 * alpha - 3,
    }[case]


def n_star(r):
    return max(1, ceil(log2(r))) if r > 1 else 1


def schedule(alpha, case, r):
    """(M, N_k list for k = 1..n_*, k_*, n_*)."""
    x = _schedule_exponent(alpha, case)
    ns = n_star(r)
    M = sum(2.0 ** (-k * x) for k in range(1, ns + 1))
    decay = x + 1
    N = [max(1, ceil(r * 2.0 ** (-k * decay) / (2 * M))) for k in range(1, ns + 1)]
    k_star = next((k for k in range(1, ns + 1) if M / r >= 2.0 ** (-(1 + k * decay))), ns + 1)
    return M, N, k_star, ns


def geometric_tail(alpha):
    """Sum over scales decaying like 2^{-(alpha-1) k}: 1/(1 - 2^{1-alpha})."""
    return 1.0 / (1.0 - 2.0 ** (1 - alpha))


@dataclass
class PowerLawConstants:
    alpha: float
    case: str
    r: int
    regime: str
    beta: float
    M: float
    M_prime: float
    N: list
    k_star: int
    n_star: int
    values: dict = field(default_factory=dict)

    def __getattr__(self, name):
        vals = self.__dict__.get("values", {})
        if name in vals:
            return vals[name]
        raise AttributeError(name)

    def N_k(self, k):
        return self.N[k - 1] if 1 <= k <= self.n_star else 1

    def as_dict(self):
        out = {
            "alpha": self.alpha, "case": self.case, "r": self.r, "regime": self.regime,
            "beta": self.beta, "M": self.M, "M_prime": self.M_prime, "N": list(self.N),
            "k_star": self.k_star, "n_star": self.n_star,
        }
        out.update(self.values)
        return out


def _static_otoc(alpha, high, r):
    geo = geometric_tail(alpha)
    if high:
        Mp = 1 / (1 - 2 ** (-(alpha - 2) / 2))
        b1 = e**2 * 2 ** (4 + alpha) * Mp**2
        b2 = 4 * e**2 * 2 ** (2 + alpha) * Mp**2 * geo
        c = 2 * b1 / (1 - b1 / (2 * (b1 + b2))) + 2 * b2
        Mr = Mp
    else:
        q = 1 - 2 ** (-(2 - alpha) / 2)
        b1 = e**2 * 2 ** (4 + alpha) / q**2
        b2 = 4 * e**2 * 2 ** (2 + alpha) * geo / q**2
        c = 4 * b1 / (1 - b1 / (2 * (2 * b1 + b2))) + 2 * b2
        Mr = r ** ((2 - alpha) / 2) / q
    return Mr, {"b1": b1, "b2": b2, "c": c, "c_alpha": 2 * e * c**2}


def _brownian_otoc(alpha, high, r):
    geo = geometric_tail(alpha)
    if high:
        Mp = 1 / (1 - 2 ** (-(2 * alpha - 3) / 3))
        b1 = exp(1 / (e**3 * 2**10 * e**3 * Mp**2)) * sqrt(e**3 * 2 ** (8 + 2 * alpha) * Mp**3)
        b2 = exp(1 / (2**7 * e**3 * Mp**2)) * 4 * sqrt(e) * e * sqrt(2 ** (2 * alpha + 2) * Mp**3) * geo
        S = 2 * b1 / (1 - b1 / (2 * (b1 + b2))) + 2 * b2
        Mr = Mp
    else:
        q = 1 - 2 ** (-(3 - 2 * alpha) / 3)
        b1 = exp(q**2 / (e**3 * 2**10 * 2 ** (4 * alpha / 3 - 1))) * sqrt(e**3 * 2 ** (8 + 2 * alpha) / q**3)
        b2 = exp(q ** (3 / alpha) / (2**7 * e**3 * 8 ** (1 / alpha))) * 4 * sqrt(2 * e) * e * geo * sqrt(4 / q**3)
        S = 4 * b1 / (1 - b1 / (2 * (2 * b1 + b2))) + 2 * b2
        Mr = r ** ((3 - 2 * alpha) / 3) / q
    c = S**2
    return Mr, {"b1": b1, "b2": b2, "S": S, "c": c, "c_alpha": 2 * e * c}


def _static_spectral(alpha, high, r):
    c2 = exp(1 / (1 - 2 ** (-alpha / 5))) * 2 / (1 - 2 ** (1 - alpha))
    if high:
        Mp = 1 / (1 - 2 ** (-(2 * alpha - 5) / 5))
        a = 4 * Mp * 2 ** (2 * alpha / 5)
        b = e**2 * 2 ** (4 + 4 * alpha / 5) * Mp**2
        c2p = 2 * c2
        c = (c2p * b / (1 - 1 / c2p)) ** 2
        vals = {"c_2": c2, "c_2_prime": c2p, "a": a, "b": b, "c": c,
                "a_alpha": a, "b_alpha": 1.0, "c_alpha": 1 / (2 * e * c)}
        return Mp, vals
    q = 1 - 2 ** (-(5 - 2 * alpha) / 5)
    a_p = 2 ** (2 + 2 * alpha / 5) / q
    b = e**2 * 2 ** (4 + 4 * alpha / 5) / q**2
    c_prime = (c2 * b / (1 - 1 / c2)) ** 2
    c = 1 / (2 * e * c_prime)
    c0 = c * (1 - 2 ** (1.5 - alpha)) ** 2
    c3 = 1 / (e * (1 - 1 / e) * (1 - 2 * alpha / 5))
    vals = {"c_2": c2, "a_prime": a_p, "b": b, "c_prime": c_prime, "c": c, "c0": c0, "c3": c3,
            "a_alpha": a_p, "b_alpha": c3 * e, "c_alpha": c0}
    return r ** ((5 - 2 * alpha) / 5) / q, vals


def _brownian_spectral(alpha, high, r):
    c2 = exp(1 / (1 - 2 ** (-alpha / 4))) * 2 / (1 - 2 ** (-2 * alpha + 2))
    if high:
        Mp = 1 / (1 - 2 ** (-(2 * alpha - 4) / 4))
        c1 = exp(1 / (4 * e**3 * 2 ** (8 - alpha / 2) * Mp**3))
        a = 8 * Mp * 2 ** (alpha / 2)
        b = c1 * e**3 * 2 ** (8 + 3 * alpha / 2) * Mp**3
        c2p = c2 / (1 - 1 / sqrt(2))
        c = b * (c2p / (1 - 1 / c2p)) ** 2
        vals = {"c_2": c2, "c_2_prime": c2p, "c1": c1, "a": a, "b": b, "c": c,
                "a_alpha": a / 2, "b_alpha": 1.0, "c_alpha": 1 / (2 * e * c)}
        return Mp, vals
    q = 1 - 2 ** (-(4 - 2 * alpha) / 4)
    a_p = 2 ** (2 + alpha / 2) / q
    ln_c1 = q**3 / (2 * e**3 * 2 ** (8 + 3 * alpha / 2)) * 2 ** (2 * alpha) / 4 / q
    c1 = exp(ln_c1)
    b = c1 * e**3 * 2 ** (8 + 3 * alpha / 2) / q**3
    c_prime = b * (c2 / (1 - 1 / c2)) ** 2
    c = 1 / (2 * e * c_prime)
    c0 = c * (1 - 2 ** (1.5 - alpha)) ** 2
    c3 = 1 / (e * (1 - 1 / e) * (1 - alpha / 2))
    vals = {"c_2": c2, "c1": c1, "a_prime": a_p, "b": b, "c_prime": c_prime, "c": c, "c0": c0,
            "c3": c3, "a_alpha": a_p, "b_alpha": c3 * e, "c_alpha": c0}
    return r ** ((4 - 2 * alpha) / 4) / q, vals


_CHAINS = {
    "static_otoc": _static_otoc,
    "brownian_otoc": _brownian_otoc,
    "static_spectral": _static_spectral,
    "brownian_spectral": _brownian_spectral,
}


def powerlaw_constants(alpha, case, r=1):
    """Every constant of the chosen case at distance r.

    The theorem-level aliases a_alpha, b_alpha, c_alpha are reported next to
    the chain constants they are identified with.
    """
    regime = check_regime(alpha, case)
    r = int(r)
    if r < 1:
        raise RegimeError(f"r must be >= 1, got {r}")
    M, N, k_star, ns = schedule(alpha, case, r)
    M_prime, vals = _CHAINS[case](alpha, regime == "high", r)
    return PowerLawConstants(
        alpha=float(alpha), case=case, r=r, regime=regime, beta=beta_exponent(alpha, case),
        M=M, M_prime=M_prime, N=N, k_star=k_star, n_star=ns, values=vals,
    )
