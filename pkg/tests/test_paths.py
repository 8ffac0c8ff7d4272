import io
from math import prod

import pytest
from hypothesis import given
from hypothesis import strategies as st

from liebrob import ensembles as ens
from liebrob import paths as pth
from liebrob.errors import InvalidInputError
from oracles import brute_force_paths


def graph_of(spec):
    return pth.InteractionGraph(ens.build_terms(spec))


def test_chain_single_path():
    g = graph_of(ens.chain(8))
    for r in range(1, 8):
        en = pth.enumerate_paths(g, [0], [r], 10)
        assert en.counts_by_length == {r: 1}
        assert en.paths == [tuple(range(r))]


def test_no_incident_terms():
    g = pth.InteractionGraph([t for t in ens.build_terms(ens.chain(4)) if 2 not in t.support])
    en = pth.enumerate_paths(g, [2], [2], 4)
    assert en.total_count() == 0


def test_empty_graph():
    en = pth.enumerate_paths(pth.InteractionGraph([]), [0], [1], 3, materialize=False)
    assert en.total_count() == 0 and not en.truncated


def test_lmax_validation():
    with pytest.raises(InvalidInputError):
        pth.enumerate_paths(graph_of(ens.chain(3)), [0], [1], 0)


def test_grid_against_brute_force():
    terms = ens.build_terms(ens.grid((3, 3)))
    g = pth.InteractionGraph(terms)
    en = pth.enumerate_paths(g, [0], [8], 6)
    oracle = brute_force_paths([t.support for t in terms], [0], [8], 6)
    assert sorted(en.paths) == sorted(tuple(terms[i].id for i in s) for s in oracle)
    for p in en.paths:
        assert pth.is_valid_path(p, g, [0], [8])


@pytest.mark.parametrize("backend", ["python", "compiled"])
def test_backends_agree(backend):
    g = graph_of(ens.complete_k_local(6, 2))
    ref = pth.enumerate_paths(g, [0], [5], 5, materialize=True)
    got = pth.enumerate_paths(g, [0], [5], 5, materialize=False, backend=backend)
    assert got.counts_by_length == ref.counts_by_length
    for l, w in ref.total_weight_by_length.items():
        assert got.total_weight_by_length[l] == pytest.approx(w, rel=1e-12)
    assert got.truncated == ref.truncated


def test_truncation_flag():
    g = graph_of(ens.grid((3, 3)))
    assert pth.enumerate_paths(g, [0], [8], 4).truncated
    assert not pth.enumerate_paths(graph_of(ens.chain(5)), [0], [4], 4).truncated


@given(st.integers(3, 6), st.randoms(use_true_random=False))
def test_relabeling_invariance(N, rnd):
    terms = ens.build_terms(ens.complete_k_local(N, 2))
    ids = list(range(len(terms)))
    rnd.shuffle(ids)
    relabeled = [ens.InteractionTerm(i, t.support, t.bound, t.coefficient) for i, t in zip(ids, terms)]
    rnd.shuffle(relabeled)
    a = pth.enumerate_paths(pth.InteractionGraph(terms), [0], [N - 1], N, materialize=False)
    b = pth.enumerate_paths(pth.InteractionGraph(relabeled), [0], [N - 1], N, materialize=False)
    assert a.counts_by_length == b.counts_by_length


@given(st.integers(2, 6), st.integers(2, 3))
def test_klocal_branching_bound(N, k):
    if k > N:
        return
    g = graph_of(ens.complete_k_local(N, k))
    R = pth.klocal_branching(N, k)
    en = pth.enumerate_paths(g, [0], [N - 1], 3)
    for p in en.paths:
        gamma = list(reversed(p))
        for j in range(len(gamma)):
            assert len(pth.next_steps(gamma[:j + 1], g, [N - 1])) <= R


def test_next_steps_examples():
    g = graph_of(ens.chain(6))
    r = 5
    last = next(t.id for t in g.terms if t.support == (r - 1, r))
    step = pth.next_steps([last], g, [r])
    assert [g.term(i).support for i in step] == [(r - 2, r - 1)]
    gk = graph_of(ens.complete_k_local(4, 2))
    anchor = pth.next_steps([], gk, [1])
    assert len(anchor) == 3 == pth.klocal_branching(4, 2)


@given(st.integers(0, 11))
def test_next_steps_brute_force(seed):
    import random
    terms = ens.build_terms(ens.grid((3, 3)))
    g = pth.InteractionGraph(terms)
    en = pth.enumerate_paths(g, [0], [8], 6)
    p = random.Random(seed).choice(en.paths)
    gamma = list(reversed(p))
    for j in range(1, len(gamma) + 1):
        got = set(pth.next_steps(gamma[:j], g, [8]))
        last = set(g.term(gamma[j - 1]).support)
        earlier = {8}.union(*(set(g.term(x).support) for x in gamma[:j - 1]))
        want = {t.id for t in terms if t.id != gamma[j - 1] and set(t.support) & last
                and not set(t.support) & earlier}
        assert got == want


def test_excluded_sets():
    g = graph_of(ens.chain(5))
    path = (0, 1, 2, 3)
    assert pth.excluded_set(path, 3, g, [4]) == frozenset({4})
    assert pth.excluded_set(path, 0, g, [4]) == frozenset({1, 2, 3, 4})
    assert pth.excluded_set((0,), 0, graph_of(ens.chain(2)), [1]) == frozenset({1})
    with pytest.raises(InvalidInputError):
        pth.excluded_set(path, 4, g, [4])


def test_delta_forms_on_chain_agree():
    g = graph_of(ens.chain(6))
    assert pth.compare_delta_forms((0, 1, 2, 3, 4), g, [5]) == []


@pytest.mark.parametrize("spec,target,L", [
    (ens.grid((3, 3)), 8, 6), (ens.complete_k_local(5, 2), 4, 4), (ens.powerlaw_chain(5, 2.0), 4, 4),
])
def test_delta_forms_agree_on_complete_paths(spec, target, L):
    g = graph_of(spec)
    en = pth.enumerate_paths(g, [0], [target], L)
    assert en.paths
    for p in en.paths:
        assert pth.compare_delta_forms(p, g, [target]) == []


def test_weighted_sum():
    spec = ens.chain(6, a=0.5)
    en = pth.enumerate_paths(graph_of(spec), [0], [4], 8)
    val, tail = pth.weighted_path_sum(en, lambda l: 1.0)
    assert val == pytest.approx(0.25**4) and not tail
    val, _ = pth.weighted_path_sum(en, lambda l: 2.0**l)
    assert val == pytest.approx(0.25**4 * 16)


def test_weighted_sum_materialized_oracle():
    spec = ens.complete_k_local(6, 2, J=1.3)
    g = graph_of(spec)
    en = pth.enumerate_paths(g, [0], [5], 4)
    f = lambda l: 1.5**l  # noqa: E731
    direct = sum(prod(g.term(x).bound ** 2 for x in p) * f(len(p)) for p in en.paths)
    val, tail = pth.weighted_path_sum(en, f)
    assert val == pytest.approx(direct, rel=1e-12)
    assert tail == en.truncated


def test_dump_roundtrip():
    en = pth.enumerate_paths(graph_of(ens.grid((2, 3))), [0], [5], 5)
    buf = io.StringIO()
    pth.dump_paths(en, buf)
    buf.seek(0)
    assert pth.load_paths(buf) == en.paths


def test_pure_fallback_selected_by_env():
    import os
    import subprocess
    import sys
    code = ("from liebrob import paths, ensembles as e; "
            "g = paths.InteractionGraph(e.build_terms(e.grid((3, 3)))); "
            "en = paths.enumerate_paths(g, [0], [8], 6, materialize=False); "
            "print(paths.BACKEND, en.backend, en.total_count())")
    env = dict(os.environ, LIEBROB_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    ref = pth.enumerate_paths(graph_of(ens.grid((3, 3))), [0], [8], 6).total_count()
    assert out.stdout.split() == ["python", "python", str(ref)]
