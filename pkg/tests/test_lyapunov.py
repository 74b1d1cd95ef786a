import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import frozen as fz
from compsync import matrixcore as mc
from compsync.collection import collection_from_matrices, synthesize_free, synthesize_graph
from compsync.errors import InfeasibleCollection, InvalidGain, NotSimultaneous
from compsync.lyapunov import (
    GAIN_PAD,
    build_block_H,
    build_block_M,
    build_tilde,
    certification_report,
    certify_identity,
    certify_positivity,
    closed_loop_field,
    gain_lower_bound,
    gain_terms,
    lyapunov_pack,
    mode_decomposition_residual,
    per_mode_H,
    random_disagreement,
)
from conftest import K2, P3, rel_close


@st.composite
def collections(draw, max_n=5, max_N=8):
    N = draw(st.integers(2, max_N))
    n = draw(st.integers(2, max_n))
    top = draw(st.lists(st.floats(1.0, 10.0), min_size=N - 1, max_size=N - 1))
    return synthesize_free(N, n, top_eigs=top)


def k2_collection(s1=1.8, s2=1.0):
    return collection_from_matrices([s1 * K2, s2 * K2])


# ---------------------------------------------------------------- block matrices


@pytest.mark.parametrize("scales", sorted(fz.K2_BLOCK_M))
def test_block_m_k2(scales):
    M = build_block_M(k2_collection(*scales))
    tl, off, tr = fz.K2_BLOCK_M[scales]
    assert rel_close(M[:2, :2], tl * K2)
    assert rel_close(M[:2, 2:], off * K2) and rel_close(M[2:, :2], off * K2)
    assert rel_close(M[2:, 2:], tr * K2)


def test_block_h_n2():
    c = k2_collection(1.0, 1.0)
    H = build_block_H(c)
    assert np.allclose(H[:2, :2], K2 @ K2)
    assert np.allclose(H[:2, 2:], 0.0)
    assert np.allclose(H[2:, 2:], K2 @ K2 - K2)


def test_per_mode_h_example():
    lam = np.array([0.0, 1.0, 2.0, 0.5])
    assert np.array_equal(per_mode_H(lam, 2), np.array(fz.N2_MODE["H1"]))


def test_tilde_n2_form():
    c = k2_collection()
    l = 3.0
    Mt, _ = build_tilde(c, l)
    L1, L2 = c.L
    assert np.allclose(Mt[:2, :2], 2 * l * L1 @ L2)
    assert np.allclose(Mt[:2, 2:], L1) and np.allclose(Mt[2:, 2:], L2)


@settings(max_examples=30)
@given(collections())
def test_tilde_at_unit_gain_is_plain(c):
    Mt, Ht = build_tilde(c, 1.0)
    assert np.array_equal(Mt, build_block_M(c)) and np.array_equal(Ht, build_block_H(c))


@settings(max_examples=30)
@given(collections())
def test_consensus_kernel(c):
    n, N = c.n, c.N
    for X in (build_block_M(c), build_block_H(c)):
        assert np.allclose(X, X.T, atol=0)
        for k in range(n):
            v = np.kron(np.eye(n)[k], np.ones(N))
            assert mc.max_norm(X @ v) <= 1e-12 * max(1.0, mc.max_norm(X)) * N


def test_gain_below_one_rejected():
    with pytest.raises(InvalidGain):
        build_tilde(k2_collection(), 0.5)


def test_noncommuting_products_rejected():
    star = np.array([[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    c, _ = synthesize_graph(P3, 2)
    with pytest.raises(NotSimultaneous):
        build_block_M(dataclasses.replace(c, L=(c.L[0], star)))


def test_tilde_projected_psd_n3():
    c = synthesize_free(5, 3, top_eigs=[1.0, 2.0, 3.0, 4.0])
    Mt, _ = build_tilde(c, 2.0)
    P = mc.disagreement_basis(c.U, 3)
    assert np.allclose(Mt, Mt.T) and mc.min_eig(P.T @ Mt @ P) > 0


# ---------------------------------------------------------------- gain bound


def test_gain_bound_zero_w():
    c = synthesize_free(4, 3, top_eigs=[1.0, 2.0, 3.0])
    assert gain_lower_bound(c, 0.0) == pytest.approx(1.0 + GAIN_PAD, rel=1e-15)


def test_gain_bound_hand_iteration():
    c = collection_from_matrices([0.5 * K2, K2])
    t = gain_terms(c)
    assert rel_close(t.beta_bar, fz.N2_MODE["beta0"])
    assert rel_close(t.lambda_bar_max, 3.0)
    assert rel_close(gain_lower_bound(c, 1.0), fz.N2_MODE["gain_bound_w1"] * (1 + GAIN_PAD))


@given(collections(max_n=4), st.floats(0, 50), st.floats(0, 50))
def test_gain_bound_monotone_in_w(c, w1, w2):
    lo, hi = sorted((w1, w2))
    assert gain_lower_bound(c, lo) <= gain_lower_bound(c, hi)


def test_gain_bound_errors():
    c = synthesize_free(2, 2)
    with pytest.raises(InvalidGain):
        gain_lower_bound(c, -1.0)
    lam = c.lam.copy()
    lam[1, 1] = 1.01 * lam[2, 1] ** 2
    with pytest.raises(InfeasibleCollection):
        gain_lower_bound(dataclasses.replace(c, lam=lam), 1.0)


# ---------------------------------------------------------------- identity


@pytest.mark.parametrize("e", sorted(fz.K2_IDENTITY))
def test_identity_k2_hand_arithmetic(e):
    c, _ = synthesize_graph(K2, 2, margin=0.9)
    Mt, Ht = build_tilde(c, 2.0)
    e = np.array(e)
    lhs = e @ Mt @ closed_loop_field(c, 2.0, e)
    rhs = e @ Ht @ e
    assert rel_close(lhs, fz.K2_IDENTITY[tuple(e)][0])
    assert rel_close(rhs, fz.K2_IDENTITY[tuple(e)][1])


def test_identity_on_consensus_is_zero():
    c = synthesize_free(4, 3, top_eigs=[1.0, 2.0, 3.0])
    Mt, Ht = build_tilde(c, 2.0)
    e = np.kron([1.0, -2.0, 0.5], np.ones(4))
    assert abs(e @ Mt @ closed_loop_field(c, 2.0, e)) < 1e-12
    assert abs(e @ Ht @ e) < 1e-12


def test_identity_n4_n5():
    c = synthesize_free(5, 4, top_eigs=[1.0, 2.0, 3.0, 4.0])
    assert certify_identity(c, gain_lower_bound(c, 1.0), trials=100) <= 1e-8


@settings(max_examples=40)
@given(collections(), st.floats(1.0, 100.0), st.integers(0, 1000))
def test_identity_fuzzed(c, l, seed):
    assert certify_identity(c, l, trials=20, seed=seed) <= 1e-8


# ---------------------------------------------------------------- positivity


@settings(max_examples=25)
@given(collections(), st.integers(0, 1000))
def test_mode_decomposition_and_floor(c, seed):
    assert mode_decomposition_residual(c, trials=20, seed=seed) <= 1e-9
    H1 = build_block_H(c)
    beta_bar = gain_terms(c).beta_bar
    ys = random_disagreement(np.random.default_rng(seed), c.n, c.N, 200)
    q = np.einsum("ti,ij,tj->t", ys, H1, ys)
    assert np.all(q >= beta_bar - 1e-9 * max(1.0, beta_bar))


def test_positivity_n2_and_n3():
    for c in (synthesize_free(3, 2, top_eigs=[1.0, 2.0]), synthesize_free(6, 3, top_eigs=[1, 2, 3, 4, 5])):
        rep = certify_positivity(c, gain_lower_bound(c, 1.0), trials=1000)
        assert rep.passed, [ch.name for ch in rep.failures()]


def test_positivity_flags_corrupted_collection():
    c = synthesize_free(2, 2, top_eigs=[2.0])
    lam = c.lam.copy()
    lam[1, 1] = 1.01 * lam[2, 1] ** 2
    L = tuple((c.U * lam[k]) @ c.U.T for k in (1, 2))
    rep = certify_positivity(dataclasses.replace(c, lam=lam, L=L), 2.0, trials=50)
    names = [ch.name for ch in rep.failures()]
    assert "mode2.H_n" in names


def test_certification_report_and_pack():
    c = synthesize_free(4, 3, top_eigs=[1.0, 2.0, 3.0])
    l = gain_lower_bound(c, 2.0)
    assert certification_report(c, l, trials=50).passed
    pack = lyapunov_pack(c, l)
    e = mc.project_disagreement(np.arange(12.0), 3, 4)
    assert pack.value(e) > 0
    assert abs(pack.value(np.ones(12))) <= 1e-14 * mc.max_norm(pack.M_tilde) * 12**2
