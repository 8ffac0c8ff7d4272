import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from liebrob import bounds as bd
from liebrob import ensembles as ens
from liebrob import paths as pth
from liebrob.errors import InvalidInputError, RegimeError
from oracles import mp_klocal_brownian_eps, mp_nn1d_otoc_eps, mp_nn_velocity, nested_quadrature


def chain_paths(n, r, a=1.0, L=None):
    g = pth.InteractionGraph(ens.build_terms(ens.chain(n, a=a)))
    return pth.enumerate_paths(g, [0], [r], L or n)


# ---- moment bounds ---------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(p=1.5), dict(p=2, beta=0.0), dict(p=2, beta=[1.0, -1.0]),
                                dict(p=2, eta=0.1, g_eta=1.0), dict(p=2, D_P=0)])
def test_params_validation(kw):
    with pytest.raises(InvalidInputError):
        bd.MomentBoundParams(**kw)


def test_params_defaults():
    P = bd.MomentBoundParams(p=4, eta=0.2, D_P=4)
    assert P.g_eta == pytest.approx(1.22)
    assert P.norm0_sq == pytest.approx(2.0)
    assert bd.MomentBoundParams(p=3, neighborhood_weight=2.0).static_betas(2) == [pytest.approx(4.0)] * 2
    with pytest.raises(InvalidInputError):
        bd.MomentBoundParams(p=3, beta=[1.0]).static_betas(3)


def test_zero_couplings_give_zero():
    en = chain_paths(5, 4, a=0.0)
    P = bd.MomentBoundParams(p=2, beta=1.0, neighborhood_weight=1.0)
    assert bd.static_moment_bound(en, 3.0, P) == 0.0
    assert bd.brownian_moment_bound(en, 3.0, P) == 0.0
    assert bd.tail_bound("NN1dBrownianOTOC", a=0.0, r=3, tau=1.0).epsilon(0.1).epsilon == 0.0


@given(st.integers(1, 6), st.floats(0.2, 3.0), st.floats(0.1, 4.0), st.floats(2, 10), st.floats(0.3, 2.0))
def test_chain_static_closed_form(r, beta, t, p, b):
    en = chain_paths(r + 1, r, a=b)
    P = bd.MomentBoundParams(p=p, beta=beta)
    got = bd.static_moment_bound(en, t, P, log=True)
    want = beta * t + r * math.log(4 * p * b * b / beta) + r * math.log(t) - math.lgamma(r + 1)
    assert got - math.log(P.norm0_sq) == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_brownian_single_step():
    b, tau, p = 0.7, 1.3, 3.0
    en = chain_paths(2, 1, a=b)
    P = bd.MomentBoundParams(p=p, neighborhood_weight=b * b)
    val = bd.brownian_moment_bound(en, tau, P, norm0_sq=1.0)
    assert val == pytest.approx(math.exp(b * b * tau / p) * 8 * p * b * b * tau, rel=1e-12)
    assert bd.brownian_moment_bound(en, 0.0, P) == 0.0


def test_methods_ordering_and_schedule():
    en = chain_paths(7, 6)
    P = bd.MomentBoundParams(p=4, beta=1.5)
    env = bd.static_moment_bound(en, 2.0, P, "envelope")
    ex = bd.static_moment_bound(en, 2.0, P, "exact")
    sch = bd.static_moment_bound(en, 2.0, P, "schedule")
    assert ex <= env
    assert sch == pytest.approx(ex, rel=1e-10)
    Pv = bd.MomentBoundParams(p=4, beta=[1.5] * 6)
    assert bd.static_moment_bound(en, 2.0, Pv) == pytest.approx(ex, rel=1e-10)


@pytest.mark.parametrize("betas,t", [([1.0, 2.0, 0.5], 1.7), ([3.0] * 4, 2.0), ([0.1, 5.0], 0.3)])
def test_ordered_integral_against_quadrature(betas, t):
    got = bd.ordered_exponential_integral(betas, t)
    assert got == pytest.approx(nested_quadrature(betas, t), rel=1e-9)
    if len(set(betas)) == 1:
        assert math.log(got) == pytest.approx(bd.log_simplex_exact(betas[0], len(betas), t), rel=1e-12)
        assert bd.log_simplex_envelope(betas[0], len(betas), t) >= math.log(got)


def test_klocal_enumerated_below_closed_form():
    N, k, J, tau, p = 6, 2, 1.0, 0.4, 3.0
    g = pth.InteractionGraph(ens.build_terms(ens.complete_k_local(N, k, J=J)))
    en = pth.enumerate_paths(g, [0], [N - 1], 8, materialize=False)
    R = pth.klocal_branching(N, k)
    b2 = ens.klocal_coefficient(N, k, J) ** 2
    P = bd.MomentBoundParams(p=p, neighborhood_weight=R * b2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", bd.TruncationWarning)
        val = bd.brownian_moment_bound(en, tau, P)
    assert 0 < val <= bd.klocal_brownian_closed_form(N, k, J, tau, p)


def test_truncation_warning():
    g = pth.InteractionGraph(ens.build_terms(ens.grid((3, 3))))
    en = pth.enumerate_paths(g, [0], [8], 4)
    with pytest.warns(bd.TruncationWarning):
        bd.static_moment_bound(en, 1.0, bd.MomentBoundParams(p=2, beta=1.0))


# ---- Markov conversion -----------------------------------------------------

def test_markov_example_clamps_p():
    r, lam = 4, 0.05
    s = bd.tail_bound("NN1dBrownianOTOC", r=r, tau=lam * r / (8 * math.e))
    assert s.lam == pytest.approx(lam)
    assert s.p_star(0.01) == 2.0
    m = bd.markov_tail(s.log_moment_sq, 0.01, p_rule=s.p_star)
    assert m.p_star == 2.0 and m.vacuous and m.probability == 1.0
    with pytest.raises(InvalidInputError):
        bd.markov_tail(s.log_moment_sq, 0.0)


def test_markov_plain_moment():
    m = bd.markov_tail(lambda p: 4.0, 4.0, p_rule=2, log_moment=False)
    assert m.probability == pytest.approx(0.25) and not m.vacuous


def test_grid_search_close_to_p_star():
    rng = np.random.default_rng(7)
    n = 0
    while n < 20:
        r = int(rng.integers(2, 20))
        tau = float(rng.uniform(0.01, 0.5))
        s = bd.tail_bound("NN1dBrownianOTOC", r=r, tau=tau)
        eps = float(rng.uniform(0.05, 1.0))
        if not 2 < s.p_star(eps) < 200:
            continue
        n += 1
        grid = bd.markov_tail(s.log_moment_sq, eps, "grid")
        star = bd.markov_tail(s.log_moment_sq, eps, s.p_star)
        assert grid.log_raw >= star.log_raw - 0.05 * abs(star.log_raw)


# ---- moment-to-tail consistency of the closed forms ------------------------

def markov_and_tail(s, eps):
    return bd.markov_tail(s.log_moment_sq, eps, p_rule=s.p_star).log_raw, s.tail(eps)


EPS = np.geomspace(1e-3, 0.99, 40)
EXACT = [
    ("NN1dBrownianOTOC", dict(a=1.0, r=10, tau=0.05)),
    ("NN1dBrownianOTOC", dict(a=0.8, r=6, xi=0.1, T=3, D_P=2)),
    ("NNdBrownianOTOC", dict(a=1.0, r=10, d=2, tau=0.017)),
    ("KLocalStaticOTOC", dict(N=200, k=3, J=1.0, t=0.2)),
    ("KLocalBrownianOTOC", dict(N=500, k=2, J=1.0, tau=0.02)),
    ("PowerLawStaticOTOC", dict(alpha=3.0, r=40, t=1.0)),
    ("PowerLawBrownianOTOC", dict(alpha=2.0, r=40, tau=1.0)),
]


# the printed k-local Brownian constants are checked separately below
CASES = [(s, p, v) for s, p in EXACT for v in ("printed", "derived")
         if not (s == "KLocalBrownianOTOC" and v == "printed")]


@pytest.mark.parametrize("system,params,variant", CASES)
def test_tail_equals_markov_at_p_star(system, params, variant):
    s = bd.tail_bound(system, variant, **params)
    checked = 0
    for eps in EPS:
        if system == "KLocalStaticOTOC" and s.L(eps) <= 0:
            continue
        if system == "NNdBrownianOTOC" and s.tail(eps).branch == "exponential":
            continue
        mk, tv = markov_and_tail(s, eps)
        if not math.isfinite(tv.log_raw):
            continue
        assert tv.log_raw == pytest.approx(mk, rel=1e-12, abs=1e-12)
        checked += 1
    assert checked >= 10


def test_nnd_exponential_branch_offset():
    # the closed form replaces (1 - p lam)^{-p/2} by (1 - 1/e)^{-1}
    s = bd.tail_bound("NNdBrownianOTOC", a=1.0, r=12, d=2, tau=0.002)
    seen = 0
    for eps in EPS:
        tv = s.tail(eps)
        if tv.branch != "exponential":
            continue
        p = s.p_star(eps)
        mk, _ = markov_and_tail(s, eps)
        offset = -0.5 * p * math.log1p(-p * s.lam) + bd.LN_1M_INV_E
        assert mk - tv.log_raw == pytest.approx(offset, rel=1e-10, abs=1e-10)
        seen += 1
    assert seen >= 10


def test_klocal_brownian_printed_vs_derived():
    kw = dict(N=500, k=2, J=1.0, tau=0.02)
    pr = bd.tail_bound("KLocalBrownianOTOC", "printed", **kw)
    de = bd.tail_bound("KLocalBrownianOTOC", "derived", **kw)
    for eps in EPS:
        a, b = pr.tail(eps), de.tail(eps)
        assert a.branch == b.branch
        s = de.s
        expect = -pr.L(eps) ** 2 / (64 * s) if a.branch == "exponential" else -8 * s
        assert a.log_raw - b.log_raw == pytest.approx(expect, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("system,params", EXACT)
def test_epsilon_inverts_tail(system, params):
    s = bd.tail_bound(system, "derived", **params)
    for delta in (1e-6, 1e-3, 0.1, 0.5):
        ev = s.epsilon(delta)
        if ev.vacuous or ev.epsilon == 0:
            continue
        tv = s.tail(ev.epsilon)
        if tv.branch == ev.branch:
            assert tv.log_raw == pytest.approx(math.log(delta), rel=1e-9, abs=1e-9)


# ---- epsilon(delta) values --------------------------------------------------

@pytest.mark.parametrize("form", [dict(tau=1.0), dict(xi=0.1, T=100)])
@pytest.mark.parametrize("delta", [0.01, 1e-8, 0.5])
def test_nn1d_against_mpmath(form, delta):
    s = bd.tail_bound("NN1dBrownianOTOC", a=1.0, r=10, **form)
    want, branch = mp_nn1d_otoc_eps(delta, 10, **form)
    ev = s.epsilon(delta)
    assert ev.branch == branch
    assert ev.epsilon == pytest.approx(float(want), rel=1e-12)


def test_klocal_brownian_second_branch_mpmath():
    kw = dict(N=1000, k=3, J=1.0, tau=0.1)
    s = bd.tail_bound("KLocalBrownianOTOC", **kw)
    ev = s.epsilon(0.5)
    assert ev.branch == "polynomial"
    assert ev.epsilon == pytest.approx(float(mp_klocal_brownian_eps(0.5, **kw)), rel=1e-12)


def test_velocities():
    for d, a in [(1, 1.0), (2, 0.5), (3, 1.7)]:
        assert bd.nn_otoc_velocity(d, a) == pytest.approx(float(mp_nn_velocity(d, a)), rel=1e-12)
    assert bd.velocity("NN1dBrownianOTOC", dict(r=3, tau=1.0)).value == pytest.approx(bd.nn_otoc_velocity(1))
    v = bd.velocity("KLocalStaticOTOC", dict(N=10, k=2, t=1.0))
    assert v.exact == bd.Fraction(1, 4) and v.kind == "scrambling_time_ratio"
    assert bd.velocity("KLocalBrownianOTOC", dict(N=10, k=2, tau=1.0)).exact == bd.Fraction(2, 17)
    assert bd.velocity("KLocalBrownianOTOC", dict(N=10, k=2, tau=1.0), "derived").exact == bd.Fraction(2, 33)
    assert bd.velocity("PowerLawStaticOTOC", dict(alpha=3.0, r=4, t=1.0)).value == 1.0


def test_branch_ties_and_discontinuity():
    s = bd.tail_bound("KLocalBrownianOTOC", N=10, k=2, tau=0.0)
    assert s.log_boundary() == 0.0 and s.branch_for(1.0) == "polynomial"
    pl = bd.tail_bound("PowerLawBrownianOTOC", alpha=2.0, r=10, tau=1.0)
    assert math.log(math.exp(-1.0)) == pl.log_boundary()
    assert pl.branch_for(math.exp(-1.0)) == "polynomial"
    assert pl.branch_for(math.exp(-1.0) * 0.999) == "exponential"
    nn = bd.tail_bound("NN1dBrownianOTOC", r=5, tau=1.0)
    rep = bd.branch_discontinuity(nn)
    assert rep["gap"] <= 1e-9 * rep["first"]
    ks = bd.tail_bound("KLocalStaticOTOC", N=50, k=2, t=0.5)
    rep = bd.branch_discontinuity(ks)
    assert rep["boundary"] == pytest.approx(math.exp((4 - 6 * math.sqrt(2)) * 0.5))
    assert rep["gap"] > 0
    assert bd.branch_discontinuity(bd.tail_bound("NN1dBrownianSpectral", r=5, tau=1.0)) is None


def test_light_cone_flip():
    tau, delta = 0.5, 0.01
    flags = [bd.tail_bound("NN1dBrownianOTOC", r=r, tau=tau).epsilon(delta).vacuous for r in range(1, 200)]
    first_ok = flags.index(False)
    assert first_ok > 0 and not any(flags[first_ok:])
    r_flip = first_ok + 1
    assert 0.5 * bd.nn_otoc_velocity() * tau < r_flip < 2 * bd.nn_otoc_velocity() * tau


def test_vacuous_and_errors():
    s = bd.tail_bound("NN1dBrownianOTOC", r=2, tau=5.0)
    assert s.epsilon(0.01).vacuous
    with pytest.raises(RegimeError):
        s.epsilon(0.0)
    with pytest.raises(RegimeError):
        s.epsilon(1.5)
    with pytest.raises(InvalidInputError):
        bd.tail_bound("Nope", r=1)
    with pytest.raises(InvalidInputError):
        bd.tail_bound("NN1dBrownianOTOC", "other", r=1, tau=1.0)
    with pytest.raises(RegimeError):
        bd.tail_bound("NN1dBrownianOTOC", r=0, tau=1.0)
    with pytest.raises(RegimeError):
        bd.tail_bound("NN1dBrownianOTOC", r=2, xi=0.1)
    with pytest.raises(RegimeError):
        bd.tail_bound("KLocalStaticOTOC", N=3, k=4, t=1.0)
    with pytest.raises(RegimeError):
        bd.tail_bound("PowerLawStaticOTOC", alpha=2.0, r=3, t=1.0)
    with pytest.raises(NotImplementedError):
        bd.tail_bound("NN1dBrownianSpectral", r=3, tau=1.0).tail(0.5)


@given(st.sampled_from(bd.SYSTEMS), st.floats(1e-9, 1.0), st.floats(1e-9, 1.0))
def test_epsilon_monotone_in_delta(system, d1, d2):
    params = dict(a=1.0, r=20, d=2, tau=0.05, t=0.3, N=400, k=2, alpha=3.0, D=2)
    s = bd.tail_bound(system, **params)
    lo, hi = sorted((d1, d2))
    a, b = s.epsilon(lo), s.epsilon(hi)
    if a.branch == b.branch and math.isfinite(a.epsilon) and math.isfinite(b.epsilon):
        assert a.epsilon >= b.epsilon * (1 - 1e-12)


def test_brownian_limit_gaps_shrink():
    xis, gaps, cont = bd.brownian_limit_gaps(0.1, 5, 1.0)
    assert len(xis) == 6 and cont > 0
    assert all(g > 0 for g in gaps)
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


@given(st.sampled_from(["NN1dBrownianOTOC", "NNdBrownianOTOC", "PowerLawStaticOTOC", "PowerLawBrownianOTOC"]),
       st.integers(2, 60), st.floats(1e-9, 0.9))
def test_epsilon_non_increasing_in_r_when_informative(system, r, delta):
    params = dict(a=1.0, d=2, tau=0.05, t=0.5, alpha=3.0)
    a = bd.tail_bound(system, **params, r=r).epsilon(delta)
    b = bd.tail_bound(system, **params, r=r + 1).epsilon(delta)
    if a.branch == b.branch and not a.vacuous and not b.vacuous:
        assert b.epsilon <= a.epsilon * (1 + 1e-12)
