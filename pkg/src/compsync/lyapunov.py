"""Block Lyapunov matrices for a collection and their numerical certificates.

Stacked vectors are order-major: ``e = [e_1; ...; e_n]`` with each
``e_k`` in R^N.  Block ``(j, m)`` of an nN-by-nN matrix acts between
orders ``j`` and ``m`` (1-based in the formulas below).

    M[j, m] = 2 L_j L_{m+1}                    (j <= m)
    H[j, j] = L_j^2 - 2 L_{j-1} L_{j+1}
    H[j, m] = -L_{j-1} L_{m+1}                 (j < m)

with ``L_0 = 0`` and ``L_{n+1} = I/2``.  The gain-modified matrices scale
every block strictly inside the leading (n-1)N square by ``l``; the last
block column stays as is, except that the trailing block of H becomes
``l L_n^2 - L_{n-1}``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matrixcore as mc
from .collection import SpectralCollection, VerificationReport, coefficient_table
from .errors import InfeasibleCollection, InvalidDimensions, InvalidGain, NotSimultaneous

GAIN_PAD = 1e-6
IDENTITY_TOL = 1e-8
POSITIVITY_TOL = -1e-9


def _product(c: SpectralCollection, a: int, b: int) -> np.ndarray:
    La, Lb = c.matrix(a), c.matrix(b)
    p = La @ Lb
    asym = mc.max_norm(p - p.T)
    lim = 1e-9 * max(mc.max_norm(La) * mc.max_norm(Lb) * c.N, 1e-300)
    if asym > lim:
        raise NotSimultaneous(f"L_{a} L_{b} is not symmetric (asymmetry {asym:.3e}); matrices do not commute")
    return 0.5 * (p + p.T)


def _assemble(blocks, n, N):
    out = np.zeros((n * N, n * N))
    for (j, m), blk in blocks.items():
        out[(j - 1) * N : j * N, (m - 1) * N : m * N] = blk
        if j != m:
            out[(m - 1) * N : m * N, (j - 1) * N : j * N] = blk.T
    return out


def _m_blocks(c, l=1.0):
    n = c.n
    blocks = {}
    for j in range(1, n + 1):
        for m in range(j, n + 1):
            scale = l if m < n else 1.0
            blocks[(j, m)] = scale * 2.0 * _product(c, j, m + 1)
    return blocks


def _h_blocks(c, l=1.0):
    n = c.n
    blocks = {}
    for j in range(1, n + 1):
        for m in range(j, n + 1):
            if j == m == n:
                blocks[(j, m)] = l * _product(c, n, n) - c.matrix(n - 1)
            elif j == m:
                blocks[(j, m)] = l * (_product(c, j, j) - 2.0 * _product(c, j - 1, j + 1))
            else:
                scale = l if m < n else 1.0
                blocks[(j, m)] = -scale * _product(c, j - 1, m + 1)
    return blocks


def build_block_M(c: SpectralCollection) -> np.ndarray:
    return _assemble(_m_blocks(c), c.n, c.N)


def build_block_H(c: SpectralCollection) -> np.ndarray:
    return _assemble(_h_blocks(c), c.n, c.N)


def build_tilde(c: SpectralCollection, l: float):
    """Gain-modified pair ``(M_tilde, H_tilde)``; ``l = 1`` returns the plain pair."""
    if not l >= 1.0:
        raise InvalidGain(f"gain must be >= 1, got {l}")
    return _assemble(_m_blocks(c, l), c.n, c.N), _assemble(_h_blocks(c, l), c.n, c.N)


def per_mode_M(lam: np.ndarray, n: int) -> np.ndarray:
    """n-by-n analogue of the M matrix for one mode, from ``lam[0..n+1]``."""
    out = np.empty((n, n))
    for j in range(1, n + 1):
        for m in range(j, n + 1):
            out[j - 1, m - 1] = out[m - 1, j - 1] = 2.0 * lam[j] * lam[m + 1]
    return out


def per_mode_H(lam: np.ndarray, n: int) -> np.ndarray:
    out = np.empty((n, n))
    for j in range(1, n + 1):
        out[j - 1, j - 1] = lam[j] ** 2 - 2.0 * lam[j - 1] * lam[j + 1]
        for m in range(j + 1, n + 1):
            out[j - 1, m - 1] = out[m - 1, j - 1] = -lam[j - 1] * lam[m + 1]
    return out


@dataclass(frozen=True)
class GainTerms:
    beta_bar: float
    beta_tilde: float
    lambda_bar_max: float
    beta0: np.ndarray


def gain_terms(c: SpectralCollection, *, check: bool = True) -> GainTerms:
    table = coefficient_table(c, check=check)
    beta0 = table.beta0
    beta_bar = float(np.min(beta0))
    beta_tilde = float(min(beta_bar, np.min(c.lam[c.n, 1:] ** 2)))
    lbar = sum(c.matrix(k) for k in range(1, c.n + 1))
    lambda_bar_max = float(mc.eigvalsh(lbar)[-1])
    return GainTerms(beta_bar, beta_tilde, lambda_bar_max, beta0)


def gain_lower_bound(c: SpectralCollection, w: float) -> float:
    """Smallest usable coupling gain for weak-Lipschitz constant ``w``.

    Any ``l`` at or above the returned value satisfies both ``l > 1`` and
    ``l > (w * lambda_bar_max + beta_tilde - beta_bar) / beta_tilde``; a
    relative pad of 1e-6 turns the strict bound into a usable number.
    """
    if not w >= 0.0:
        raise InvalidGain(f"weak-Lipschitz constant must be >= 0, got {w}")
    t = gain_terms(c)
    if not t.beta_tilde > 0.0:
        raise InfeasibleCollection(f"beta_tilde = {t.beta_tilde:.3e} is not positive")
    raw = (w * t.lambda_bar_max + t.beta_tilde - t.beta_bar) / t.beta_tilde
    return max(1.0, raw) * (1.0 + GAIN_PAD)


@dataclass(frozen=True)
class LyapunovPack:
    N: int
    n: int
    l: float
    M1: np.ndarray
    H1: np.ndarray
    M_tilde: np.ndarray
    H_tilde: np.ndarray
    per_mode_M: tuple  # modes 2..N
    per_mode_H: tuple
    beta_bar: float
    beta_tilde: float
    lambda_bar_max: float

    def value(self, e) -> float:
        e = np.asarray(e, dtype=float)
        return 0.5 * float(e @ self.M_tilde @ e)


def lyapunov_pack(c: SpectralCollection, l: float) -> LyapunovPack:
    M1, H1 = build_block_M(c), build_block_H(c)
    Mt, Ht = build_tilde(c, l)
    t = gain_terms(c, check=False)
    pm = tuple(per_mode_M(c.mode_eigs(i), c.n) for i in range(1, c.N))
    ph = tuple(per_mode_H(c.mode_eigs(i), c.n) for i in range(1, c.N))
    return LyapunovPack(c.N, c.n, float(l), M1, H1, Mt, Ht, pm, ph, t.beta_bar, t.beta_tilde, t.lambda_bar_max)


def closed_loop_field(c: SpectralCollection, l: float, e: np.ndarray) -> np.ndarray:
    """Linear part of the stacked error dynamics: ``[e_2; ...; e_n; -l sum_k L_k e_k]``."""
    n, N = c.n, c.N
    blocks = e.reshape(n, N)
    out = np.empty_like(blocks)
    out[:-1] = blocks[1:]
    out[-1] = -l * sum(c.matrix(k) @ blocks[k - 1] for k in range(1, n + 1))
    return out.reshape(-1)


def random_disagreement(rng, n: int, N: int, count: int) -> np.ndarray:
    """``count`` random unit vectors in the disagreement subspace (rows)."""
    out = np.empty((count, n * N))
    for t in range(count):
        y = mc.project_disagreement(rng.standard_normal(n * N), n, N)
        out[t] = y / np.linalg.norm(y)
    return out


def certify_identity(c: SpectralCollection, l: float, trials: int = 100, seed: int = 0) -> float:
    """Max relative residual of ``e' M~ F(e) = -e' H~ e`` over random disagreement vectors,
    where ``F`` is :func:`closed_loop_field`.  A pass is ``<= 1e-8``."""
    Mt, Ht = build_tilde(c, l)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for e in random_disagreement(rng, c.n, c.N, trials):
        lhs = float(e @ Mt @ closed_loop_field(c, l, e))
        rhs = float(e @ Ht @ e)
        worst = max(worst, abs(lhs + rhs) / (1.0 + abs(rhs)))
    return worst


def mode_decomposition_residual(c: SpectralCollection, trials: int = 100, seed: int = 0) -> float:
    """Max relative gap between ``y' M1 y`` and the sum of per-mode quadratic forms."""
    M1, H1 = build_block_M(c), build_block_H(c)
    pm = [per_mode_M(c.mode_eigs(i), c.n) for i in range(1, c.N)]
    ph = [per_mode_H(c.mode_eigs(i), c.n) for i in range(1, c.N)]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for y in random_disagreement(rng, c.n, c.N, trials):
        coeffs = y.reshape(c.n, c.N) @ c.U  # coeffs[k, i] = u_i . y_k
        for big, small in ((M1, pm), (H1, ph)):
            full = float(y @ big @ y)
            modal = sum(float(coeffs[:, i] @ small[i - 1] @ coeffs[:, i]) for i in range(1, c.N))
            worst = max(worst, abs(full - modal) / max(abs(full), 1e-300))
    return worst


def certify_positivity(c: SpectralCollection, l: float, trials: int = 1000, seed: int = 0) -> VerificationReport:
    """Positivity certificates for the Lyapunov construction.

    (a) smallest eigenvalue of every per-mode M and H matrix (graded Jacobi,
        so tiny eigenvalues keep their relative accuracy);
    (b) the H floor ``y' H1 y >= beta0 y'y`` per mode;
    (c) on the disagreement subspace, ``M~ >= 0`` and
        ``H~ - (beta_bar + (l - 1) beta_tilde) I >= 0``, both by
        eigendecomposition of the projected matrix and by sampling.
    """
    rep = VerificationReport()
    n, N = c.n, c.N
    table = coefficient_table(c, check=False)
    for i in range(1, N):
        lam = c.mode_eigs(i)
        pm, ph = per_mode_M(lam, n), per_mode_H(lam, n)
        em = mc.graded_min_eig(pm)
        eh = mc.graded_min_eig(ph)
        rep.add(f"mode{i + 1}.M1.min_eig", em, 0.0, em > 0.0)
        rep.add(f"mode{i + 1}.H1.min_eig", eh, 0.0, eh > 0.0)
        rep.add(f"mode{i + 1}.H_n", ph[-1, -1], 0.0, ph[-1, -1] > 0.0, "trailing 1x1 block")
        b0 = table.beta[0, i]
        floor_gap = eh - b0
        lim = -1e-9 * abs(b0) if np.isfinite(b0) else 0.0
        rep.add(f"mode{i + 1}.H1.floor", floor_gap, lim, bool(floor_gap >= lim), "min eig(H1) - beta0")

    if l < 1.0:
        raise InvalidGain(f"gain must be >= 1, got {l}")
    Mt, Ht = build_tilde(c, l)
    t = gain_terms(c, check=False)
    floor = t.beta_bar + (l - 1.0) * t.beta_tilde
    P = mc.disagreement_basis(c.U, n)
    pm_proj = P.T @ Mt @ P
    ph_proj = P.T @ Ht @ P - floor * np.eye(P.shape[1])
    # a dense eigensolver only resolves eigenvalues to eps * norm, so these
    # two thresholds scale with the matrix; the sampled checks stay absolute
    v1 = mc.min_eig(pm_proj)
    v2 = mc.min_eig(ph_proj)
    tol1 = POSITIVITY_TOL * max(1.0, mc.max_norm(pm_proj) * pm_proj.shape[0])
    tol2 = POSITIVITY_TOL * max(1.0, mc.max_norm(ph_proj) * ph_proj.shape[0])
    rep.add("projected.M_tilde.min_eig", v1, tol1, v1 >= tol1)
    rep.add("projected.H_tilde_floor.min_eig", v2, tol2, v2 >= tol2)

    rng = np.random.default_rng(seed)
    ys = random_disagreement(rng, n, N, trials)
    qm = np.einsum("ti,ij,tj->t", ys, Mt, ys)
    qh = np.einsum("ti,ij,tj->t", ys, Ht, ys) - floor
    rep.add("sampled.M_tilde.min", float(qm.min()), POSITIVITY_TOL, qm.min() >= POSITIVITY_TOL)
    rep.add("sampled.H_tilde_floor.min", float(qh.min()), POSITIVITY_TOL, qh.min() >= POSITIVITY_TOL)
    return rep


def certification_report(c: SpectralCollection, l: float, trials: int = 100, seed: int = 0) -> VerificationReport:
    """Identity, mode-decomposition and positivity certificates in one report."""
    rep = certify_positivity(c, l, trials=max(trials, 1000), seed=seed)
    resid = certify_identity(c, l, trials=trials, seed=seed)
    rep.add("identity.residual", resid, IDENTITY_TOL, resid <= IDENTITY_TOL)
    dec = mode_decomposition_residual(c, trials=trials, seed=seed)
    rep.add("mode_decomposition.residual", dec, 1e-9, dec <= 1e-9)
    return rep


def check_pack_dims(pack: LyapunovPack, N: int, n: int) -> None:
    if pack.N != N or pack.n != n:
        raise InvalidDimensions(f"pack is for N={pack.N}, n={pack.n}; got N={N}, n={n}")
