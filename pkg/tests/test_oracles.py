"""The oracles must keep producing the frozen values."""
import mpmath as mp
import pytest

import frozen as fz
import oracles as o

REL = mp.mpf("1e-15")


def close(a, b, rel=REL):
    return abs(mp.mpf(a) - mp.mpf(b)) <= rel * max(1, abs(mp.mpf(b)))


def test_p3_roots():
    roots = o.p3_laplacian_eigs()
    assert all(close(mp.re(r), v) for r, v in zip(roots, fz.P3_EIGS))


def test_n2_mode():
    c = o.n2_coefficients(1, 2)
    assert close(c["alpha1"], fz.N2_MODE["alpha1"])
    assert close(c["alpha1"], 3 - mp.sqrt(2))
    assert close(c["beta1"], fz.N2_MODE["beta1"])
    assert close(c["beta0"], fz.N2_MODE["beta0"])
    assert close(o.n2_gain_bound(1, 2, 1), fz.N2_MODE["gain_bound_w1"])
    H = o.per_mode_H_n2(1, 2)
    assert [[float(v) for v in r] for r in H] == [list(r) for r in fz.N2_MODE["H1"]]


def test_free_n3():
    d = o.free_n3_example()
    for key in ("alpha2", "gamma1", "beta2", "r1", "r2"):
        assert close(d[key], fz.FREE_N3[key]), key
    assert close(d["l1"], fz.FREE_N3["lambda1"])
    assert close(d["alpha2"], 5 - mp.sqrt(13))
    assert close(d["r2"], mp.sqrt(288) - 16)
    alpha, beta, _ = o.mode_table([d["l1"], d["l2"], d["l3"]])
    assert close(alpha[1], fz.FREE_N3["alpha1"])
    assert close(beta[1], fz.FREE_N3["beta1"])
    assert close(beta[0], fz.FREE_N3["beta0"])


def test_mode_table_agrees_with_n2_closed_form():
    alpha, beta, gamma = o.mode_table([1, 2])
    assert close(alpha[1], fz.N2_MODE["alpha1"]) and close(beta[0], 1) and gamma[1] == 1


def test_graph_rho():
    rho, rb = o.graph_rho_n2([2], mp.mpf("0.9"))
    assert close(rho[0], fz.K2_GRAPH["rho"]) and close(rb, fz.K2_GRAPH["rho_bar"])
    rho, rb = o.graph_rho_n2([1, 3], mp.mpf("0.9"))
    assert close(rb, fz.P3_GRAPH["rho_bar"])
    alpha, beta, _ = o.mode_table([mp.mpf("3.6"), 2])
    assert close(beta[0], fz.K2_GRAPH["beta0"]) and close(alpha[1], fz.K2_GRAPH["alpha1"])


@pytest.mark.parametrize("scales", sorted(fz.K2_BLOCK_M))
def test_block_m(scales):
    M = o.k2_block_M(mp.mpf(scales[0]), mp.mpf(scales[1]))
    tl, off, tr = fz.K2_BLOCK_M[scales]
    assert close(M[0][0], tl) and close(M[0][2], off) and close(M[2][2], tr)


@pytest.mark.parametrize("e", sorted(fz.K2_IDENTITY))
def test_identity_sides(e):
    lhs, rhs = o.k2_identity_sides(mp.mpf("1.8"), 1, 2, e)
    assert close(lhs, fz.K2_IDENTITY[e][0]) and close(rhs, fz.K2_IDENTITY[e][1])
    assert close(lhs, -rhs)


def test_linear_transform():
    T = o.linear_transform_T([[4, 5], [-5, -4]], [1, 1])
    for i in range(2):
        for j in range(2):
            assert close(T[i][j], fz.LINOSC_T[i][j])


def test_van_der_pol():
    assert o.van_der_pol_drift(2.5, 0, 1) == fz.VDP_DRIFT_0_1
