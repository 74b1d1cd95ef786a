"""Synthesis and verification of coupling-matrix collections.

A collection is an ordered list ``L_1 .. L_n`` of symmetric N-by-N
matrices sharing one orthonormal eigenbasis ``U`` whose first column is
the consensus direction.  Mode ``i`` (column ``i`` of ``U``) carries the
eigenvalues ``lam[1, i] .. lam[n, i]``; synthesis works mode by mode from
the top order ``n`` downwards, bounding each new eigenvalue by the
positive-definiteness requirements of two 2x2 matrices.

Index conventions used throughout the package:

* ``lam`` has shape ``(n + 2, N)``; row ``k`` is order ``k``.  Row 0 is
  identically 0 and row ``n + 1`` identically 1/2 (the padding orders used
  by the Lyapunov construction).  Column 0 is the consensus mode (zero for
  orders ``1..n``).
* coefficient arrays are indexed ``[j, i]`` with ``j = n - k`` the order
  they refer to.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import matrixcore as mc
from .errors import InfeasibleCollection, InvalidDimensions, InvalidOrder, InvalidSpectrum, NotConnected

FREE_MARGIN = 0.5
GRAPH_MARGIN = 0.9
STRICT_REL = 1e-12


def min_eig_2x2(a: float, b: float, c: float) -> float:
    """Smallest eigenvalue of [[a, b], [b, c]] without cancellation."""
    half_tr = 0.5 * (a + c)
    rad = math.hypot(0.5 * (a - c), b)
    if half_tr >= 0.0:
        big = half_tr + rad
        return (a * c - b * b) / big if big != 0.0 else 0.0
    return half_tr - rad


def positive_root(qa: float, qb: float, qc: float) -> float:
    """Positive root of qa r^2 + qb r + qc with qa > 0 and qc < 0."""
    disc = math.sqrt(qb * qb - 4.0 * qa * qc)
    # 2c / (-b - sqrt(disc)) avoids cancellation when qb > 0
    if qb >= 0.0:
        return (2.0 * qc) / (-qb - disc)
    return (-qb + disc) / (2.0 * qa)


@dataclass(frozen=True)
class SpectralCollection:
    N: int
    n: int
    L: tuple  # L[k-1] is L_k
    U: np.ndarray
    lam: np.ndarray  # (n + 2, N), see module docstring
    margin: float | tuple | None = None
    kind: str = "free"

    def matrix(self, k: int) -> np.ndarray:
        """``L_k`` including the padding orders ``L_0 = 0`` and ``L_{n+1} = I/2``."""
        if k == 0:
            return np.zeros((self.N, self.N))
        if k == self.n + 1:
            return 0.5 * np.eye(self.N)
        if 1 <= k <= self.n:
            return self.L[k - 1]
        raise IndexError(f"order {k} outside 0..{self.n + 1}")

    def mode_eigs(self, i: int) -> np.ndarray:
        """``lam[0..n+1]`` for mode ``i`` (0-based column of ``U``)."""
        return self.lam[:, i]


@dataclass(frozen=True)
class CoefficientTable:
    """Per-mode iterates; arrays indexed ``[j, i]`` with ``j`` the order.

    alpha, gamma are defined for ``j = 1..n-1``; beta for ``j = 0..n-1``.
    A2[j, i] is the 2x2 matrix whose smallest eigenvalue is alpha[j, i];
    B2[j, i] (``j = 0..n-2``) likewise for beta.  Undefined slots are NaN.
    Column 0 (consensus mode) is NaN throughout.
    """

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    A2: np.ndarray  # (n, N, 2, 2)
    B2: np.ndarray  # (n, N, 2, 2)

    @property
    def beta0(self) -> np.ndarray:
        return self.beta[0, 1:]


@dataclass(frozen=True)
class ScalingSchedule:
    base_laplacian: np.ndarray
    rho: np.ndarray  # rho[j, i]: per-mode upper ratio for order j (j = 1..n-1), NaN elsewhere
    rho_bar: np.ndarray  # rho_bar[j] for j = 1..n-1 (index 0 and n unused, NaN)
    gains: np.ndarray  # gains[k - 1] = l_k, l_n = 1


def _a_matrix(lam, alpha, gamma, j, n):
    if j == n - 1:
        return np.array([[2 * lam[j] * lam[j + 1], lam[j]], [lam[j], lam[j + 1]]])
    off = gamma[j] * lam[j]
    return np.array([[2 * lam[j] * lam[j + 1], off], [off, alpha[j + 1]]])


def _b_matrix(lam, beta, gamma, j):
    off = -0.5 * gamma[j + 1] * lam[j]
    return np.array([[lam[j + 1] ** 2 - 2 * lam[j] * lam[j + 2], off], [off, beta[j + 1]]])


def _mode_coefficients(lam: np.ndarray, n: int):
    """alpha, beta, gamma, A2, B2 for one mode, given ``lam[0..n+1]``."""
    alpha = np.full(n, np.nan)
    beta = np.full(n, np.nan)
    gamma = np.full(n, np.nan)
    a2 = np.full((n, 2, 2), np.nan)
    b2 = np.full((n, 2, 2), np.nan)

    a2[n - 1] = _a_matrix(lam, alpha, gamma, n - 1, n)
    alpha[n - 1] = min_eig_2x2(a2[n - 1, 0, 0], a2[n - 1, 0, 1], a2[n - 1, 1, 1])
    beta[n - 1] = lam[n] ** 2 - lam[n - 1]
    gamma[n - 1] = 1.0
    for k in range(2, n + 1):
        j = n - k
        if k <= n - 1:
            gamma[j] = gamma[j + 1] + 2 * lam[j + 2]
            a2[j] = _a_matrix(lam, alpha, gamma, j, n)
            alpha[j] = min_eig_2x2(a2[j, 0, 0], a2[j, 0, 1], a2[j, 1, 1])
        b2[j] = _b_matrix(lam, beta, gamma, j)
        beta[j] = min_eig_2x2(b2[j, 0, 0], b2[j, 0, 1], b2[j, 1, 1])
    return alpha, beta, gamma, a2, b2


def coefficient_table(c: SpectralCollection, *, check: bool = True) -> CoefficientTable:
    n, N = c.n, c.N
    alpha = np.full((n, N), np.nan)
    beta = np.full((n, N), np.nan)
    gamma = np.full((n, N), np.nan)
    a2 = np.full((n, N, 2, 2), np.nan)
    b2 = np.full((n, N, 2, 2), np.nan)
    for i in range(1, N):
        al, be, ga, aa, bb = _mode_coefficients(c.mode_eigs(i), n)
        alpha[:, i], beta[:, i], gamma[:, i] = al, be, ga
        a2[:, i], b2[:, i] = aa, bb
    table = CoefficientTable(alpha, beta, gamma, a2, b2)
    if check:
        for name, arr in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
            vals = arr[:, 1:]
            bad = ~np.isnan(vals) & ~(vals > 0)
            if bad.any():
                j, i = np.argwhere(bad)[0]
                raise InfeasibleCollection(
                    f"{name}[{j}] of mode {i + 1} is {vals[j, i]:.3e}; the spectral constraints are violated"
                )
    return table


def _bounds(lam, alpha, beta, gamma, j):
    """Upper bounds on ``lam[j]`` for ``j <= n-2``: the A- and B-determinant bounds."""
    r1 = 2 * lam[j + 1] * alpha[j + 1] / gamma[j] ** 2
    r2 = positive_root(gamma[j + 1] ** 2, 8 * lam[j + 2] * beta[j + 1], -4 * lam[j + 1] ** 2 * beta[j + 1])
    return r1, r2


def _advance(lam, alpha, beta, gamma, j, n):
    """Fill alpha/beta at order ``j`` once ``lam[j]`` has been chosen."""
    a = _a_matrix(lam, alpha, gamma, j, n)
    alpha[j] = min_eig_2x2(a[0, 0], a[0, 1], a[1, 1])
    b = _b_matrix(lam, beta, gamma, j)
    beta[j] = min_eig_2x2(b[0, 0], b[0, 1], b[1, 1])


def default_basis(N: int) -> np.ndarray:
    """Consensus vector extended to an orthonormal basis by Gram-Schmidt over
    the canonical vectors ``e_1, e_2, ...`` (deterministic)."""
    cols = [mc.consensus_vector(N)]
    for idx in range(N):
        v = np.zeros(N)
        v[idx] = 1.0
        for _ in range(2):
            for q in cols:
                v = v - (q @ v) * q
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            cols.append(v / norm)
        if len(cols) == N:
            break
    return np.column_stack(cols)


def _check_order(N: int, n: int) -> None:
    if n < 2:
        raise InvalidOrder(f"order n must be >= 2, got {n}")
    if N < 2:
        raise InvalidOrder(f"agent count N must be >= 2, got {N}")


def _assemble(N, n, U, lam, margin, kind, matrices=None) -> SpectralCollection:
    if matrices is None:
        matrices = []
        for k in range(1, n + 1):
            m = (U * lam[k]) @ U.T
            matrices.append(0.5 * (m + m.T))
    return SpectralCollection(N=N, n=n, L=tuple(matrices), U=U, lam=lam, margin=margin, kind=kind)


def step_margins(margin, n: int) -> np.ndarray:
    """Per-step margins indexed by ``j = n-1 .. 1``; a scalar applies to every step.

    A sequence is read in assignment order, first entry for ``lambda_{n-1}``.
    """
    m = np.atleast_1d(np.asarray(margin, dtype=float))
    if m.size == 1:
        m = np.full(n - 1, m[0])
    if m.size != n - 1:
        raise InvalidSpectrum(f"need one margin or n-1 = {n - 1} margins, got {m.size}")
    if not np.all((m > 0.0) & (m < 1.0)):
        raise InvalidSpectrum(f"margins must lie in (0, 1), got {m.tolist()}")
    out = np.full(n, np.nan)
    out[n - 1 : 0 : -1] = m
    return out


def _margin_record(margin):
    m = np.atleast_1d(np.asarray(margin, dtype=float))
    return float(m[0]) if m.size == 1 else tuple(float(v) for v in m)


def synthesize_free(N: int, n: int, top_eigs=None, basis=None, margin=FREE_MARGIN) -> SpectralCollection:
    """Free spectral assignment: pick every lower-order eigenvalue at
    ``margin`` times the tightest upper bound, mode by mode."""
    _check_order(N, n)
    mj = step_margins(margin, n)
    top = np.ones(N - 1) if top_eigs is None else np.asarray(top_eigs, dtype=float).reshape(-1)
    if top.shape != (N - 1,):
        raise InvalidDimensions(f"need {N - 1} top eigenvalues, got {top.size}")
    if not np.all(np.isfinite(top)) or np.any(top <= 0.0):
        raise InvalidSpectrum("top eigenvalues must be finite and strictly positive")
    U = default_basis(N) if basis is None else np.asarray(basis, dtype=float)
    if U.shape != (N, N) or mc.max_norm(U.T @ U - np.eye(N)) > 1e-10:
        raise InvalidDimensions("basis must be an N-by-N orthonormal matrix")
    if mc.max_norm(np.abs(U[:, 0]) - mc.consensus_vector(N)) > 1e-10:
        raise InvalidDimensions("first basis column must be the consensus vector")

    lam = np.zeros((n + 2, N))
    lam[n + 1] = 0.5
    for i in range(1, N):
        col = lam[:, i]
        col[n] = top[i - 1]
        col[n - 1] = mj[n - 1] * col[n] ** 2
        alpha = np.full(n, np.nan)
        beta = np.full(n, np.nan)
        gamma = np.full(n, np.nan)
        a = _a_matrix(col, alpha, gamma, n - 1, n)
        alpha[n - 1] = min_eig_2x2(a[0, 0], a[0, 1], a[1, 1])
        beta[n - 1] = col[n] ** 2 - col[n - 1]
        gamma[n - 1] = 1.0
        for k in range(2, n):
            j = n - k
            gamma[j] = gamma[j + 1] + 2 * col[j + 2]
            col[j] = mj[j] * min(_bounds(col, alpha, beta, gamma, j))
            _advance(col, alpha, beta, gamma, j, n)
    return _assemble(N, n, U, lam, _margin_record(margin), "free")


def synthesize_graph(L_graph, n: int, margin=GRAPH_MARGIN, tol: float = mc.DEFAULT_TOL):
    """Graph-constrained assignment: every ``L_k`` is a positive multiple of
    ``L_graph``, so the sparsity pattern of the graph is preserved."""
    L_graph = mc.sym_matrix(L_graph)
    N = L_graph.shape[0]
    _check_order(N, n)
    mj = step_margins(margin, n)
    report = mc.check_ln_class(L_graph, tol)
    if not report.is_member:
        if report.kernel_residual <= report.tol and report.negative_eig_excess <= report.tol:
            raise NotConnected(f"graph is not connected (lambda2 = {report.lambda2:.3e})")
        raise InvalidSpectrum("base matrix is not a Laplacian-class matrix")

    U, (top,) = mc.simultaneous_eigenbasis([L_graph], tol)
    top = top.copy()
    top[0] = 0.0
    lam = np.zeros((n + 2, N))
    lam[n + 1] = 0.5
    lam[n] = top
    rho = np.full((n + 1, N), np.nan)
    rho_bar = np.full(n + 1, np.nan)
    modes = range(1, N)

    rho[n - 1, 1:] = top[1:] ** 2 / top[1:]
    rho_bar[n - 1] = mj[n - 1] * np.min(rho[n - 1, 1:])
    lam[n - 1] = rho_bar[n - 1] * lam[n]

    alpha = np.full((n, N), np.nan)
    beta = np.full((n, N), np.nan)
    gamma = np.full((n, N), np.nan)
    for i in modes:
        a = _a_matrix(lam[:, i], alpha[:, i], gamma[:, i], n - 1, n)
        alpha[n - 1, i] = min_eig_2x2(a[0, 0], a[0, 1], a[1, 1])
        beta[n - 1, i] = lam[n, i] ** 2 - lam[n - 1, i]
        gamma[n - 1, i] = 1.0
    for k in range(2, n):
        j = n - k
        for i in modes:
            col = lam[:, i]
            gamma[j, i] = gamma[j + 1, i] + 2 * col[j + 2]
            s = min(_bounds(col, alpha[:, i], beta[:, i], gamma[:, i], j))
            rho[j, i] = s / col[j + 1]
        rho_bar[j] = mj[j] * np.min(rho[j, 1:])
        lam[j] = rho_bar[j] * lam[j + 1]
        for i in modes:
            _advance(lam[:, i], alpha[:, i], beta[:, i], gamma[:, i], j, n)

    gains = np.ones(n)
    for k in range(1, n):
        gains[n - k - 1] = rho_bar[n - k] * gains[n - k]
    matrices = [g * L_graph for g in gains]
    coll = _assemble(N, n, U, lam, _margin_record(margin), "graph", matrices)
    schedule = ScalingSchedule(base_laplacian=L_graph, rho=rho[:n], rho_bar=rho_bar[:n], gains=gains)
    return coll, schedule


def collection_from_matrices(mats, tol: float = mc.DEFAULT_TOL, margin=None, kind: str = "external") -> SpectralCollection:
    """Wrap externally supplied matrices; the eigen table comes from their
    common eigenbasis."""
    mats = [mc.sym_matrix(m) for m in mats]
    n = len(mats)
    N = mats[0].shape[0] if mats else 0
    _check_order(N, n)
    U, table = mc.simultaneous_eigenbasis(mats, tol)
    lam = np.zeros((n + 2, N))
    lam[n + 1] = 0.5
    for k, d in enumerate(table, start=1):
        lam[k] = d
    return SpectralCollection(N=N, n=n, L=tuple(mats), U=U, lam=lam, margin=margin, kind=kind)


# ---------------------------------------------------------------- verification


@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "value": float(self.value),
            "threshold": float(self.threshold),
            "passed": bool(self.passed),
            "detail": self.detail,
        }


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(ch.passed for ch in self.checks)

    def failures(self) -> list:
        return [ch for ch in self.checks if not ch.passed]

    def add(self, name, value, threshold, passed, detail="") -> None:
        self.checks.append(Check(name, float(value), float(threshold), bool(passed), detail))

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [ch.as_dict() for ch in self.checks],
            "notes": list(self.notes),
        }


def _strict(report, name, slack, scale):
    """Record a strict inequality ``slack > 0`` with a relative guard band."""
    threshold = STRICT_REL * abs(scale)
    report.add(name, slack, threshold, slack > threshold)


def verify_collection(c: SpectralCollection, graph=None, tol: float = mc.DEFAULT_TOL) -> VerificationReport:
    """Check every defining property of a collection and report slacks.

    The spectral inequalities are evaluated on the eigenvalue table; the
    table itself is tied to the matrices through the reconstruction check.
    """
    rep = VerificationReport()
    n, N = c.n, c.N
    if n < 2 or N < 2:
        rep.add("order", min(n, N), 2, False, "need n >= 2 and N >= 2")
        return rep

    ortho = mc.max_norm(c.U.T @ c.U - np.eye(N))
    rep.add("basis.orthonormal", ortho, 1e-10, ortho <= 1e-10)
    nu_err = mc.max_norm(np.abs(c.U[:, 0]) - mc.consensus_vector(N))
    rep.add("basis.consensus_first", nu_err, 1e-10, nu_err <= 1e-10)

    for k in range(1, n + 1):
        Lk = c.matrix(k)
        ln = mc.check_ln_class(Lk, tol)
        rep.add(f"L{k}.ln_class.kernel", ln.kernel_residual, ln.tol, ln.kernel_residual <= ln.tol)
        rep.add(f"L{k}.ln_class.lambda2", ln.lambda2, ln.tol, ln.lambda2 > ln.tol)
        rep.add(f"L{k}.ln_class.negative", ln.negative_eig_excess, ln.tol, ln.negative_eig_excess <= ln.tol)
        recon = mc.max_norm(Lk - (c.U * c.lam[k]) @ c.U.T)
        lim = tol * max(mc.max_norm(Lk), 1e-300)
        rep.add(f"L{k}.reconstruction", recon, lim, recon <= lim)
        consensus = abs(c.lam[k, 0])
        rep.add(f"L{k}.consensus_eig", consensus, lim, consensus <= lim)
        minpos = float(np.min(c.lam[k, 1:]))
        rep.add(f"L{k}.positive_spectrum", minpos, 0.0, minpos > 0.0)

    for a in range(1, n + 1):
        for b in range(a + 1, n + 1):
            La, Lb = c.matrix(a), c.matrix(b)
            comm = mc.commutator_norm(La, Lb)
            lim = tol * max(mc.max_norm(La) * mc.max_norm(Lb) * N, 1e-300)
            rep.add(f"commute.L{a}.L{b}", comm, lim, comm <= lim)

    for i in range(1, N):
        lam = c.mode_eigs(i)
        _strict(rep, f"mode{i + 1}.init.positive", lam[n - 1], lam[n - 1])
        _strict(rep, f"mode{i + 1}.init.upper", lam[n] ** 2 - lam[n - 1], lam[n] ** 2)
        alpha, beta, gamma, _, _ = _mode_coefficients(lam, n)
        for k in range(2, n):
            j = n - k
            _strict(rep, f"mode{i + 1}.k{k}.10a", lam[j], lam[j])
            r1 = 2 * lam[j + 1] * alpha[j + 1] / gamma[j] ** 2
            _strict(rep, f"mode{i + 1}.k{k}.10b", r1 - lam[j], r1)
            qa = gamma[j + 1] ** 2
            qb = 8 * lam[j + 2] * beta[j + 1]
            qc = -4 * lam[j + 1] ** 2 * beta[j + 1]
            quad = qa * lam[j] ** 2 + qb * lam[j] + qc
            _strict(rep, f"mode{i + 1}.k{k}.10c", -quad, abs(qc))
        for j in range(n):
            for name, arr in (("alpha", alpha), ("beta", beta), ("gamma", gamma)):
                if not np.isnan(arr[j]):
                    rep.add(f"mode{i + 1}.{name}{j}", arr[j], 0.0, arr[j] > 0.0)

    if graph is not None:
        _check_graph_pattern(rep, c, np.asarray(graph, dtype=float), tol)
    rep.notes.append(
        "orders n+1 and 0 are padded with lambda = 1/2 and lambda = 0; "
        "the n-1 iterates are initialised directly and never use the padding"
    )
    return rep


def graph_adjacency(graph) -> np.ndarray:
    """Boolean adjacency from a Laplacian or adjacency matrix (nonzero off-diagonal)."""
    g = np.asarray(graph, dtype=float)
    adj = np.abs(g) > 0
    np.fill_diagonal(adj, False)
    return adj


def _check_graph_pattern(rep, c, graph, tol):
    if graph.shape != (c.N, c.N):
        rep.add("graph.shape", graph.shape[0], c.N, False, "graph size does not match N")
        return
    adj = graph_adjacency(graph)
    off_mask = ~adj & ~np.eye(c.N, dtype=bool)
    for k in range(1, c.n + 1):
        Lk = c.matrix(k)
        lim = tol * max(mc.max_norm(Lk), 1e-300)
        outside = float(np.max(np.abs(Lk[off_mask]))) if off_mask.any() else 0.0
        rep.add(f"L{k}.graph.support", outside, lim, outside <= lim, "off-edge entries must vanish")
        weights = -Lk[adj]
        worst = float(-np.min(weights)) if weights.size else 0.0
        rep.add(f"L{k}.graph.nonnegative_weights", worst, lim, worst <= lim, "edge weights must be >= 0")
        rows = mc.max_norm(Lk.sum(axis=1))
        rep.add(f"L{k}.graph.row_sums", rows, lim, rows <= lim)
