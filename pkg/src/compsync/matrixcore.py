"""Dense symmetric-matrix primitives.

Everything here works on plain ``numpy`` arrays.  The eigen-solver is a
cyclic Jacobi method with round-robin (parallel) ordering; it has two
stopping rules:

* absolute: every off-diagonal entry is below ``tol * max|A|``;
* relative: every off-diagonal entry satisfies
  ``|a_pq| <= tol * sqrt(|a_pp * a_qq|)``.

The relative rule keeps tiny eigenvalues of graded positive definite
matrices accurate to a few ulps of *themselves*, which matters because
the per-mode Lyapunov matrices routinely have eigenvalues 40 orders of
magnitude below their largest entry.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensions, InvalidMatrix, NotSimultaneous

DEFAULT_TOL = 1e-9
JACOBI_ABS_TOL = 1e-12
JACOBI_REL_TOL = 1e-15
CLUSTER_GAP = 1e-8


def max_norm(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


def _scale(a) -> float:
    s = max_norm(a)
    return s if s > 0.0 else 1.0


def sym_matrix(a, tol: float = 1e-10) -> np.ndarray:
    """Return a float copy of ``a`` with exact symmetry enforced.

    Raises InvalidMatrix if ``a`` is not square, has non-finite entries, or
    is asymmetric beyond ``tol * max|a|``.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidMatrix(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix("matrix has non-finite entries")
    asym = max_norm(a - a.T)
    if asym > tol * _scale(a):
        raise InvalidMatrix(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class EigenDecomposition:
    values: np.ndarray  # ascending
    vectors: np.ndarray  # columns, same order as values
    sweeps: int = 0
    converged: bool = True

    def reconstruct(self) -> np.ndarray:
        v = self.vectors
        return (v * self.values) @ v.T

    def orthogonality_error(self) -> float:
        v = self.vectors
        return max_norm(v.T @ v - np.eye(v.shape[1]))


def _round_robin(m: int) -> list[list[tuple[int, int]]]:
    """Tournament schedule: m-1 rounds of m/2 disjoint pairs (m even)."""
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = []
        for i in range(m // 2):
            p, q = players[i], players[m - 1 - i]
            pairs.append((min(p, q), max(p, q)))
        rounds.append(pairs)
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def eigh(a, *, relative: bool = False, tol: float | None = None, max_sweeps: int = 80) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    a : array_like
        Symmetric matrix with finite entries.
    relative : bool
        Use the relative stopping rule (see module docstring).  Recommended
        for positive definite matrices with widely graded diagonals.
    tol : float, optional
        Stopping tolerance; defaults to 1e-12 (absolute) or 1e-15 (relative).
    """
    a = sym_matrix(a)
    m = a.shape[0]
    if m == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0)))
    if tol is None:
        tol = JACOBI_REL_TOL if relative else JACOBI_ABS_TOL
    v = np.eye(m)
    if m == 1:
        return EigenDecomposition(a.diagonal().copy(), v)

    abs_floor = tol * max_norm(a)
    padded = m + (m % 2)
    schedule = []
    for pairs in _round_robin(padded):
        kept = [(p, q) for p, q in pairs if q < m]
        schedule.append((np.array([p for p, _ in kept]), np.array([q for _, q in kept])))

    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        rotated = False
        for ps, qs in schedule:
            apq = a[ps, qs]
            app = a[ps, ps]
            aqq = a[qs, qs]
            if relative:
                limit = tol * np.sqrt(np.abs(app * aqq))
                need = (np.abs(apq) > limit) & (apq != 0.0)
            else:
                need = np.abs(apq) > abs_floor
            if not need.any():
                continue
            rotated = True
            ps, qs, apq, app, aqq = ps[need], qs[need], apq[need], app[need], aqq[need]
            with np.errstate(over="ignore", divide="ignore"):
                tau = (aqq - app) / (2.0 * apq)
                t = np.where(np.isinf(tau), 0.0, 1.0 / (np.abs(tau) + np.hypot(1.0, tau)))
            t = np.where(tau < 0.0, -t, t)
            c = 1.0 / np.hypot(1.0, t)
            s = t * c
            j = np.eye(m)
            j[ps, ps] = c
            j[qs, qs] = c
            j[ps, qs] = s
            j[qs, ps] = -s
            a = j.T @ a @ j
            a = 0.5 * (a + a.T)
            a[ps, qs] = 0.0
            a[qs, ps] = 0.0
            a[ps, ps] = app - t * apq
            a[qs, qs] = aqq + t * apq
            v = v @ j
        sweeps += 1
        if not rotated:
            converged = True
            break

    vals = a.diagonal().copy()
    order = np.argsort(vals, kind="stable")
    return EigenDecomposition(vals[order], v[:, order], sweeps=sweeps, converged=converged)


def eigvalsh(a, **kwargs) -> np.ndarray:
    return eigh(a, **kwargs).values


def min_eig(a, **kwargs) -> float:
    return float(eigh(a, **kwargs).values[0])


def graded_min_eig(a) -> float:
    """Smallest eigenvalue with relative accuracy for graded matrices.

    The matrix is first congruence-scaled to unit diagonal (when the diagonal
    is positive), which does not change the sign pattern of the spectrum;
    Jacobi with the relative stopping rule then resolves eigenvalues far
    below ``eps * max|a|``.
    """
    return min_eig(a, relative=True)


@dataclass(frozen=True)
class LNClassReport:
    is_member: bool
    kernel_residual: float
    lambda2: float
    negative_eig_excess: float
    tol: float  # effective (scaled) tolerance used for the decision


def check_ln_class(L, tol: float = DEFAULT_TOL) -> LNClassReport:
    """Membership test for symmetric matrices annihilating ``1_N`` with a
    simple zero eigenvalue and the rest positive.

    ``tol`` is scaled by ``max|L|``.
    """
    L = sym_matrix(L)
    eff = tol * _scale(L)
    vals = eigvalsh(L)
    kernel = float(np.max(np.abs(L.sum(axis=1))))
    lambda2 = float(vals[1]) if len(vals) > 1 else float("nan")
    neg = float(max(0.0, -vals[0]))
    member = bool(kernel <= eff and lambda2 > eff and neg <= eff)
    return LNClassReport(member, kernel, lambda2, neg, eff)


def consensus_vector(N: int) -> np.ndarray:
    return np.full(N, 1.0 / np.sqrt(N))


def _normalize_signs(u: np.ndarray) -> np.ndarray:
    u = u.copy()
    for j in range(u.shape[1]):
        col = u[:, j]
        big = np.flatnonzero(np.abs(col) > 1e-12 * max(max_norm(col), 1e-300))
        if big.size and col[big[0]] < 0:
            u[:, j] = -col
    return u


def _clusters(values: np.ndarray, gap: float) -> list[np.ndarray]:
    """Split positions of (ascending) ``values`` wherever consecutive gaps exceed ``gap``."""
    order = np.argsort(values, kind="stable")
    groups = [[order[0]]]
    for prev, cur in zip(order[:-1], order[1:]):
        if values[cur] - values[prev] > gap:
            groups.append([cur])
        else:
            groups[-1].append(cur)
    return [np.array(g) for g in groups]


def simultaneous_eigenbasis(mats, tol: float = DEFAULT_TOL):
    """Common orthonormal eigenbasis of a list of symmetric matrices.

    Returns ``(U, D)`` where ``D[k]`` holds the eigenvalues of ``mats[k]``
    in the column order of ``U``.  Columns are sorted by the eigenvalues of
    the first matrix (ties resolved by the following matrices).  When every
    matrix is of the Laplacian-like class, the consensus vector
    ``1/sqrt(N)`` is pinned to column 0.

    Raises NotSimultaneous when some ``U.T @ L @ U`` keeps an off-diagonal
    entry above ``tol * max|L|``.
    """
    mats = [sym_matrix(m) for m in mats]
    if not mats:
        raise InvalidDimensions("need at least one matrix")
    N = mats[0].shape[0]
    if any(m.shape != (N, N) for m in mats):
        raise InvalidDimensions("all matrices must share one dimension")

    first = eigh(mats[0])
    u = first.vectors.copy()
    keys = [[] for _ in range(N)]
    groups = []
    for rank, g in enumerate(_clusters(first.values, CLUSTER_GAP * _scale(mats[0]))):
        for j in g:
            keys[j].append(rank)
        groups.append(g)

    for b in mats[1:]:
        gap = CLUSTER_GAP * _scale(b)
        refined = []
        for g in groups:
            if len(g) == 1:
                keys[g[0]].append(0)
                refined.append(g)
                continue
            qc = u[:, g]
            sub = eigh(qc.T @ b @ qc)
            u[:, g] = qc @ sub.vectors
            for rank, sg in enumerate(_clusters(sub.values, gap)):
                for j in sg:
                    keys[g[j]].append(rank)
                refined.append(g[sg])
        groups = refined

    order = sorted(range(N), key=lambda j: tuple(keys[j]))
    u = u[:, order]

    if all(check_ln_class(m, tol).is_member for m in mats):
        nu = consensus_vector(N)
        j0 = int(np.argmax(np.abs(nu @ u)))
        rest = [j for j in range(N) if j != j0]
        u = np.column_stack([nu, u[:, rest]])
    u = _normalize_signs(u)

    table = []
    for m in mats:
        d = u.T @ m @ u
        off = d - np.diag(d.diagonal())
        if max_norm(off) > tol * _scale(m):
            raise NotSimultaneous(
                f"no common eigenbasis: residual off-diagonal {max_norm(off):.3e} "
                f"exceeds {tol * _scale(m):.3e}"
            )
        table.append(d.diagonal().copy())
    return u, table


def commutator_norm(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return max_norm(a @ b - b @ a)


def leading_trailing_minors(a):
    """Leading and trailing principal minors; index k is the (k+1)x(k+1) block."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidDimensions(f"expected a square matrix, got shape {a.shape}")
    m = a.shape[0]
    leading = np.array([np.linalg.det(a[: k + 1, : k + 1]) for k in range(m)])
    trailing = np.array([np.linalg.det(a[m - k - 1 :, m - k - 1 :]) for k in range(m)])
    return leading, trailing


def is_positive_definite(a, which: str = "leading") -> bool:
    """Sylvester's criterion on the leading (or trailing) minors."""
    leading, trailing = leading_trailing_minors(a)
    minors = leading if which == "leading" else trailing
    return bool(np.all(minors > 0.0))


def project_disagreement(y, n: int, N: int) -> np.ndarray:
    """Remove the per-order mean from a stacked vector ``[y_1; ...; y_n]``."""
    y = np.asarray(y, dtype=float)
    if y.shape != (n * N,):
        raise InvalidDimensions(f"expected a vector of length {n * N}, got shape {y.shape}")
    blocks = y.reshape(n, N)
    return (blocks - blocks.mean(axis=1, keepdims=True)).reshape(-1)


def disagreement_basis(u, n: int) -> np.ndarray:
    """Orthonormal basis of the disagreement subspace, mode-major.

    Column ``(i - 1) * n + k`` is ``eps_k (x) u[:, i]`` for ``i >= 1``, so a
    block-diagonal ``P.T @ X @ P`` exposes one n-by-n block per mode.
    """
    u = np.asarray(u, dtype=float)
    N = u.shape[0]
    cols = []
    for i in range(1, N):
        for k in range(n):
            c = np.zeros(n * N)
            c[k * N : (k + 1) * N] = u[:, i]
            cols.append(c)
    return np.column_stack(cols) if cols else np.zeros((n * N, 0))
