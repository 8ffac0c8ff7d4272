from math import comb, factorial, sqrt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from liebrob import ensembles as ens
from liebrob.errors import InvalidSpecError, ResourceError
from liebrob.linalg import embed_local, spectral_norm


def test_chain_terms():
    terms = ens.build_terms(ens.chain(5))
    assert len(terms) == 4
    assert all(t.bound == 1.0 for t in terms)
    assert [t.support for t in terms] == [(0, 1), (1, 2), (2, 3), (3, 4)]


def test_klocal_terms():
    terms = ens.build_terms(ens.complete_k_local(4, 2, J=1.0))
    assert len(terms) == 6
    assert all(t.coefficient == pytest.approx(sqrt(1 / 8)) for t in terms)


def test_powerlaw_terms():
    terms = ens.build_terms(ens.powerlaw_chain(4, 2.0))
    assert len(terms) == 6
    t03 = next(t for t in terms if t.support == (0, 3))
    assert t03.coefficient == pytest.approx(1 / 9)


def test_grid_terms():
    terms = ens.build_terms(ens.grid((3, 3)))
    assert len(terms) == 12


@pytest.mark.parametrize("kw", [
    dict(geometry="complete_k_local", n_sites=3, k=4),
    dict(geometry="powerlaw_chain", n_sites=4, alpha=1.0),
    dict(geometry="chain", n_sites=1),
    dict(geometry="ring", n_sites=4),
    dict(geometry="chain", n_sites=4, sampler="uniform"),
    dict(geometry="chain", n_sites=4, time_model="brownian"),
])
def test_invalid_specs(kw):
    with pytest.raises(InvalidSpecError):
        ens.EnsembleSpec(**kw)


@given(st.sampled_from(["chain", "complete_k_local", "powerlaw_chain"]), st.integers(2, 7),
       st.floats(0.1, 3.0), st.floats(1.1, 4.0))
def test_coefficient_audit(geometry, N, coupling, alpha):
    k = min(3, N)
    spec = ens.EnsembleSpec(geometry, n_sites=N, k=k, alpha=alpha, coupling=coupling)
    for t in ens.build_terms(spec):
        if geometry == "chain":
            expect = coupling
        elif geometry == "complete_k_local":
            expect = sqrt(coupling**2 * factorial(k - 1) / (k * N ** (k - 1)))
        else:
            expect = coupling * abs(t.support[0] - t.support[1]) ** (-alpha)
        assert t.coefficient == expect
        assert t.bound == abs(t.coefficient)
    if geometry == "complete_k_local":
        assert len(ens.build_terms(spec)) == comb(N, k)


@given(st.integers(0, 2**64 - 1), st.integers(0, 1000), st.integers(0, 50),
       st.sampled_from(ens.SAMPLERS), st.integers(1, 3))
def test_sample_norm_and_hermitian(seed, step, tid, sampler, k):
    term = ens.InteractionTerm(tid, tuple(range(k)), 1.0, 1.0)
    M = ens.sample_term(ens.term_stream(seed, step, tid), term, 2, sampler)
    assert M.shape == (2**k, 2**k)
    assert np.allclose(M, M.conj().T)
    assert spectral_norm(M) <= 1 + 1e-12


def test_pauli_sampler_support():
    term = ens.InteractionTerm(0, (0, 1), 1.0, 1.0)
    strings = [ens.pauli_string(i, 2) for i in range(1, 16)]
    for s in range(50):
        M = ens.sample_term(ens.term_stream(s, 0, 0), term)
        assert any(np.array_equal(M, P) or np.array_equal(M, -P) for P in strings)


@pytest.mark.parametrize("sampler", ens.SAMPLERS)
def test_zero_mean(sampler):
    term = ens.InteractionTerm(3, (0,), 1.0, 1.0)
    n = 10_000
    draws = np.array([ens.sample_term(ens.term_stream(9, s, 3), term, 2, sampler) for s in range(n)])
    mean = draws.mean(axis=0)
    assert np.all(np.abs(mean) <= 4 / np.sqrt(n))
    sd = draws.std(axis=0)
    assert np.all(np.abs(mean) <= 4 * sd / np.sqrt(n) + 1e-15)


def test_independence_across_terms():
    a = ens.InteractionTerm(0, (0,), 1.0, 1.0)
    b = ens.InteractionTerm(1, (0,), 1.0, 1.0)
    n = 4000
    xa = np.array([ens.sample_term(ens.term_stream(1, s, 0), a)[0, 1].real for s in range(n)])
    xb = np.array([ens.sample_term(ens.term_stream(1, s, 1), b)[0, 1].real for s in range(n)])
    cov = np.mean(xa * xb) - xa.mean() * xb.mean()
    assert abs(cov) <= 4 / np.sqrt(n)


def test_hamiltonian_single_term_and_determinism():
    spec = ens.chain(2, a=0.7)
    sample, H = ens.sample_hamiltonian(11, spec)
    term = ens.build_terms(spec)[0]
    assert np.allclose(H, 0.7 * embed_local(sample.raw[0], term.support, 2))
    _, H2 = ens.sample_hamiltonian(11, spec)
    assert np.array_equal(H, H2)


@given(st.integers(0, 10**9), st.integers(2, 5))
def test_hamiltonian_triangle(seed, N):
    spec = ens.powerlaw_chain(N, 1.7)
    _, H = ens.sample_hamiltonian(seed, spec)
    assert spectral_norm(H) <= sum(t.bound for t in ens.build_terms(spec)) + 1e-10


def test_dimension_cap():
    with pytest.raises(ResourceError) as exc:
        ens.sample_hamiltonian(0, ens.chain(15))
    assert exc.value.required == 2**15 and exc.value.allowed == 2**14


def test_brownian_steps_differ():
    spec = ens.chain(3, time_model="brownian", xi=0.1)
    _, H0 = ens.sample_hamiltonian(4, spec, 0)
    _, H1 = ens.sample_hamiltonian(4, spec, 1)
    assert not np.array_equal(H0, H1)
