import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import frozen as fz
from compsync import graphs
from compsync.collection import synthesize_free, synthesize_graph
from compsync.control import (
    assemble_pd,
    assemble_pid,
    companion_matrix,
    control_all,
    estimate_weak_lipschitz,
    evaluate_control,
    linear_canonical_transform,
    wrap_nonlinear,
)
from compsync.errors import (
    InvalidAgent,
    InvalidAugmentation,
    InvalidDimensions,
    InvalidGain,
    NotControllable,
    SingularDecoupling,
)
from compsync.lyapunov import gain_lower_bound
from conftest import K2, rel_close

A_OSC = np.array([[4.0, 5.0], [-5.0, -4.0]])
B_OSC = np.array([1.0, 1.0])


def graph_pd(kind="random", N=7, n=2, seed=3, w=1.0):
    L = graphs.laplacian(graphs.make_graph(kind, N, seed=seed))
    c, _ = synthesize_graph(L, n)
    return L, c, assemble_pd(c, w)


# ---------------------------------------------------------------- assembly


def test_pd_two_agent_hand_expansion():
    c, _ = synthesize_graph(K2, 2)
    spec = assemble_pd(c, 0.0)
    x = np.array([[0.3, -1.2], [2.0, 0.7]])
    w1 = -c.L[0][0, 1]
    w2 = -c.L[1][0, 1]
    hand = spec.l * (w1 * (x[1, 0] - x[0, 0]) + w2 * (x[1, 1] - x[0, 1]))
    assert rel_close(evaluate_control(spec, x, agent=0), hand, 1e-13)
    assert rel_close(evaluate_control(spec, x, agent=1), -hand, 1e-13)
    assert spec.l == pytest.approx(gain_lower_bound(c, 0.0))


def test_explicit_gain_and_bound():
    c = synthesize_free(3, 2, top_eigs=[1.0, 2.0])
    spec = assemble_pd(c, 1.0, l=50.0)
    assert spec.l == 50.0 and spec.bound < 50.0
    with pytest.raises(InvalidGain):
        assemble_pd(c, 1.0, l=0.5 * spec.bound)
    with pytest.raises(InvalidGain):
        assemble_pd(c, -1.0)


def test_pid_reindexing_h1():
    c = synthesize_free(4, 3, top_eigs=[1.0, 2.0, 3.0])
    spec = assemble_pid(c, 2, 1, 0.0)
    assert spec.L_I[0] is c.L[0] or np.array_equal(spec.L_I[0], c.L[0])
    assert np.array_equal(spec.L_PD[0], c.L[1]) and np.array_equal(spec.L_PD[1], c.L[2])


def test_pid_reindexing_h2():
    c = synthesize_free(4, 4, top_eigs=[1.0, 2.0, 3.0])
    spec = assemble_pid(c, 2, 2, 0.0)
    assert np.array_equal(spec.L_I[1], c.L[0]) and np.array_equal(spec.L_I[0], c.L[1])
    assert np.array_equal(spec.L_PD[0], c.L[2]) and np.array_equal(spec.L_PD[1], c.L[3])
    assert all(np.array_equal(a, b) for a, b in zip(spec.source_matrices, c.L))


def test_pid_h0_is_pd():
    c = synthesize_free(5, 3, top_eigs=[1.0, 2.0, 3.0, 4.0])
    pd, pid = assemble_pd(c, 2.0), assemble_pid(c, 3, 0, 2.0)
    assert pd == pid
    assert np.array_equal(pd.gain_matrix, pid.gain_matrix)


def test_pid_order_mismatch():
    c = synthesize_free(3, 3)
    with pytest.raises(InvalidAugmentation):
        assemble_pid(c, 2, 2, 0.0)


# ---------------------------------------------------------------- evaluation


def test_consensus_gives_zero_control():
    _, c, spec = graph_pd(n=3)
    x = np.tile([0.4, -2.0, 7.5], (spec.N, 1))
    scale = np.abs(spec.gain_matrix).sum(axis=1).max() * 7.5
    assert np.allclose(control_all(spec, x), 0.0, atol=1e-14 * scale)
    cp = synthesize_free(spec.N, 3, top_eigs=np.linspace(1, 3, spec.N - 1))
    pid = assemble_pid(cp, 2, 1, 0.0)
    q = np.full((spec.N, 1), 3.3)
    assert np.allclose(control_all(pid, x[:, :2], q), 0.0, atol=1e-12)


@settings(max_examples=30)
@given(st.sampled_from(["path", "cycle", "random"]), st.integers(4, 10), st.integers(0, 50))
def test_locality(kind, N, seed):
    L, c, spec = graph_pd(kind, N, 2, seed)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((N, 2))
    agent = int(rng.integers(N))
    nbrs = set(spec.neighbours(agent))
    assert nbrs == set(np.flatnonzero(L[agent] != 0))
    y = x.copy()
    for j in range(N):
        if j not in nbrs:
            y[j] += rng.standard_normal(2)
    assert evaluate_control(spec, x, agent=agent) == pytest.approx(evaluate_control(spec, y, agent=agent), rel=1e-12, abs=1e-12)


def test_single_agent_matches_vectorized():
    _, c, spec = graph_pd(N=6)
    x = np.random.default_rng(1).standard_normal((6, 2))
    u = control_all(spec, x)
    assert np.allclose([evaluate_control(spec, x, agent=i) for i in range(6)], u, rtol=1e-12, atol=1e-12)


def test_pair_swap_flips_sign():
    c, _ = synthesize_graph(K2, 2)
    spec = assemble_pd(c, 0.0)
    x = np.array([[1.0, 2.0], [-0.5, 0.25]])
    assert evaluate_control(spec, x, agent=0) == pytest.approx(-evaluate_control(spec, x[::-1], agent=0))


def test_evaluation_errors():
    _, _, spec = graph_pd(N=5)
    with pytest.raises(InvalidAgent):
        evaluate_control(spec, np.zeros((5, 2)), agent=5)
    with pytest.raises(InvalidDimensions):
        evaluate_control(spec, np.zeros((4, 2)))


# ---------------------------------------------------------------- transforms


def test_linear_transform_oscillator():
    tr = linear_canonical_transform(A_OSC, B_OSC)
    assert np.allclose(tr.matrix, fz.LINOSC_T, atol=1e-3)
    assert rel_close(tr.matrix, fz.LINOSC_T, 1e-9)
    assert np.allclose(tr.companion_row, [-9.0, 0.0], atol=1e-12)
    assert tr.lipschitz_w == pytest.approx(9.0)


def test_linear_transform_trivial_cases():
    a = np.array([2.0, -1.0, 0.5])
    tr = linear_canonical_transform(companion_matrix(a), np.eye(3)[2])
    assert np.allclose(tr.matrix, np.eye(3), atol=1e-12)
    tr = linear_canonical_transform([[0.0, 1.0], [0.0, 0.0]], [0.0, 1.0])
    assert np.allclose(tr.matrix, np.eye(2)) and tr.lipschitz_w == 0.0


def test_uncontrollable_pair():
    with pytest.raises(NotControllable):
        linear_canonical_transform(np.eye(2), [1.0, 1.0])


def test_random_controllable_pairs():
    rng = np.random.default_rng(11)
    done = 0
    while done < 50:
        n = int(rng.integers(1, 7))
        A = rng.standard_normal((n, n))
        b = rng.standard_normal(n)
        try:
            tr = linear_canonical_transform(A, b)
        except NotControllable:
            continue
        if tr.condition > 1e6:
            continue
        T = tr.matrix
        Ac = T @ A @ np.linalg.inv(T)
        assert np.allclose(Ac[:-1], np.eye(n, k=1)[:-1], atol=1e-8)
        assert np.allclose(T @ b, np.eye(n)[-1], atol=1e-10)
        done += 1


def test_nonlinear_wrapper_matches_linear():
    lin = linear_canonical_transform(A_OSC, B_OSC)
    T = lin.matrix.copy()
    wrapped = wrap_nonlinear(lambda x: np.einsum("ij,...j->...i", T, x), lambda x: np.ones(np.shape(x)[:-1]), 9.0, 2)
    xs = np.random.default_rng(0).uniform(-10, 10, (100, 2))
    assert np.max(np.abs(wrapped.apply(xs) - lin.apply(xs))) <= 1e-10
    c = synthesize_free(100, 2, top_eigs=np.linspace(1, 2, 99))
    a = assemble_pd(c, 9.0, transform=lin)
    b = assemble_pd(c, 9.0, transform=wrapped)
    assert np.max(np.abs(control_all(a, xs) - control_all(b, xs))) <= 1e-10 * np.max(np.abs(control_all(a, xs)))


def test_identity_wrapper_matches_plain_pd():
    c = synthesize_free(4, 2, top_eigs=[1.0, 2.0, 3.0])
    ident = wrap_nonlinear(lambda x: x, lambda x: np.ones(np.shape(x)[:-1]), 0.0, 2)
    x = np.random.default_rng(2).standard_normal((4, 2))
    assert np.allclose(control_all(assemble_pd(c, 0.0, transform=ident), x), control_all(assemble_pd(c, 0.0), x), rtol=0, atol=0)


def test_singular_scale_raises():
    tr = wrap_nonlinear(lambda x: x, lambda x: x[..., 0], 0.0, 2)
    c = synthesize_free(3, 2)
    spec = assemble_pd(c, 0.0, transform=tr)
    x = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 1.0]])
    with pytest.raises(SingularDecoupling) as err:
        control_all(spec, x)
    assert err.value.agent == 1


def test_weak_lipschitz_estimate_linear_drift():
    # exact constant of a . z is max_i (a_i + |a|) / 2
    a = np.array([-9.0, 0.0])
    est = estimate_weak_lipschitz(lambda z: z @ a, [-10, -10], [10, 10], samples=20000)
    assert 0.0 <= est <= 4.5 + 1e-9
    assert est > 4.0
