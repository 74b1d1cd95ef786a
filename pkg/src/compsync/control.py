"""Distributed PD and PID coupling laws built from a spectral collection.

Sign convention.  Every collection matrix is Laplacian-like, so the
coupling that drives agents together is

    u~_i = -l * sum_k (L_k z_k)_i - l * sum_m (L_{I,m} q_m)_i

which equals ``l * sum_j a_kij (z_k^j - z_k^i)`` with ``a_kij = -l_kij``
the (nonnegative, for graph collections) neighbour weights.  ``z`` are
companion coordinates and ``q_m`` the m-fold integral of ``z_1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .collection import SpectralCollection
from .errors import (
    InvalidAgent,
    InvalidAugmentation,
    InvalidDimensions,
    InvalidGain,
    InvalidOrder,
    NotControllable,
    SingularDecoupling,
)
from .lyapunov import gain_lower_bound

SCALE_GUARD = 1e-12
CONTROLLABILITY_RCOND = 1e-12


@dataclass(frozen=True)
class StateTransform:
    """Map from plant coordinates to companion coordinates.

    ``forward`` and ``input_scale`` must accept arrays of shape ``(..., n)``
    and act row-wise; ``input_scale`` returns the factor that multiplies the
    companion-form control (``1 / L_g L_f^{n-1} h`` for feedback-linearizable
    plants, constant 1 for linear ones).
    """

    n: int
    forward: Callable
    input_scale: Callable
    lipschitz_w: float
    matrix: Optional[np.ndarray] = None
    companion_row: Optional[np.ndarray] = None
    kind: str = "nonlinear"
    condition: float = float("nan")
    constant_scale: Optional[float] = None  # skips evaluation of input_scale when set

    def apply(self, x) -> np.ndarray:
        return np.asarray(self.forward(np.asarray(x, dtype=float)), dtype=float)

    def scale(self, x, t=None) -> np.ndarray:
        """Evaluate the input scale row-wise, refusing near-zero values."""
        x = np.asarray(x, dtype=float)
        if self.constant_scale is not None:
            return np.full(x.shape[:-1], self.constant_scale)
        s = np.broadcast_to(np.asarray(self.input_scale(x), dtype=float), x.shape[:-1])
        bad = np.flatnonzero(np.abs(np.atleast_1d(s)) <= SCALE_GUARD)
        if bad.size:
            i = int(bad[0])
            state = x if x.ndim == 1 else x[i]
            raise SingularDecoupling(
                f"input scale vanished for agent {i} at state {state}", state=state, t=t, agent=i
            )
        return np.array(s)


def identity_transform(n: int) -> StateTransform:
    return StateTransform(n, lambda x: x, lambda x: np.ones(x.shape[:-1]), 0.0, np.eye(n), None, "identity", 1.0, 1.0)


@dataclass(frozen=True)
class ControllerSpec:
    kind: str  # "PD" or "PID"
    n: int
    h: int
    L_PD: tuple
    L_I: tuple
    l: float
    transform: Optional[StateTransform] = None
    bound: float = float("nan")
    w: float = float("nan")

    @property
    def N(self) -> int:
        return self.L_PD[0].shape[0]

    @property
    def source_matrices(self) -> tuple:
        """Collection order ``[L_1..L_{n+h}]`` recovered from the reindexing."""
        return tuple(reversed(self.L_I)) + tuple(self.L_PD)

    @cached_property
    def gain_matrix(self) -> np.ndarray:
        """``-l [L_PD,1 .. L_PD,n  L_I,1 .. L_I,h]`` acting on order-major stacked states."""
        return -self.l * np.hstack(self.L_PD + self.L_I)

    def neighbours(self, agent: int) -> np.ndarray:
        rows = np.array([m[agent] for m in self.source_matrices])
        return np.flatnonzero(np.any(rows != 0.0, axis=0))


def _check_w(w):
    if not w >= 0.0:
        raise InvalidGain(f"weak-Lipschitz constant must be >= 0, got {w}")


def _resolve_gain(bound: float, l: Optional[float]) -> float:
    if l is None:
        return bound
    if not l >= bound:
        raise InvalidGain(f"gain {l} is below the lower bound {bound}")
    return float(l)


def assemble_pd(c: SpectralCollection, w: float, *, l: Optional[float] = None, transform=None) -> ControllerSpec:
    """PD^{n-1} coupling: every collection matrix acts on one companion coordinate."""
    _check_w(w)
    bound = gain_lower_bound(c, w)
    mats = tuple(c.matrix(k) for k in range(1, c.n + 1))
    return ControllerSpec("PD", c.n, 0, mats, (), _resolve_gain(bound, l), transform, bound, float(w))


def assemble_pid(c: SpectralCollection, n: int, h: int, w: float, *, l=None, transform=None) -> ControllerSpec:
    """PI^h D^{n-1} coupling from a collection of order ``n + h``.

    The first ``h`` matrices act on the integral states in reverse order
    (``L_{I,h-t+1} = L_t``) and the remaining ``n`` on the companion
    coordinates (``L_{PD,t-h} = L_t``).
    """
    if h < 0 or n < 1:
        raise InvalidAugmentation(f"need n >= 1 and h >= 0, got n={n}, h={h}")
    if c.n != n + h:
        raise InvalidAugmentation(f"collection has order {c.n}, expected n + h = {n + h}")
    if h == 0:
        return assemble_pd(c, w, l=l, transform=transform)
    _check_w(w)
    bound = gain_lower_bound(c, w)
    mats = [c.matrix(k) for k in range(1, c.n + 1)]
    L_I = tuple(mats[h - m] for m in range(1, h + 1))  # L_{I,m} = L_{h-m+1}
    L_PD = tuple(mats[h:])
    return ControllerSpec("PID", n, h, L_PD, L_I, _resolve_gain(bound, l), transform, bound, float(w))


def coupling(spec: ControllerSpec, z: np.ndarray, q: Optional[np.ndarray] = None) -> np.ndarray:
    """Companion-form control for every agent.  ``z`` is N x n, ``q`` is N x h."""
    stacked = z.T.reshape(-1) if not spec.h else np.concatenate([z.T.reshape(-1), q.T.reshape(-1)])
    return spec.gain_matrix @ stacked


def _check_shapes(spec, states, integral_states):
    states = np.asarray(states, dtype=float)
    if states.ndim != 2 or states.shape != (spec.N, spec.n):
        raise InvalidDimensions(f"states must be {spec.N}x{spec.n}, got {states.shape}")
    if spec.h:
        if integral_states is None:
            raise InvalidDimensions("integral states required for a PID controller")
        integral_states = np.asarray(integral_states, dtype=float)
        if integral_states.shape != (spec.N, spec.h):
            raise InvalidDimensions(f"integral states must be {spec.N}x{spec.h}, got {integral_states.shape}")
    return states, integral_states


def control_all(spec: ControllerSpec, states, integral_states=None, t=None) -> np.ndarray:
    """Applied input ``u`` for all agents; plant coordinates if a transform is attached."""
    states, integral_states = _check_shapes(spec, states, integral_states)
    if spec.transform is None:
        return coupling(spec, states, integral_states)
    z = spec.transform.apply(states)
    return spec.transform.scale(states, t) * coupling(spec, z, integral_states)


def evaluate_control(spec: ControllerSpec, states, integral_states=None, agent: int = 0) -> float:
    """Input of one agent, computed from its own row of every coupling matrix."""
    states, integral_states = _check_shapes(spec, states, integral_states)
    if not 0 <= agent < spec.N:
        raise InvalidAgent(f"agent {agent} out of range for N={spec.N}")
    z = states if spec.transform is None else spec.transform.apply(states)
    u = sum(L[agent] @ z[:, k] for k, L in enumerate(spec.L_PD))
    for m, L in enumerate(spec.L_I):
        u += L[agent] @ integral_states[:, m]
    u = -spec.l * u
    if spec.transform is not None:
        u *= float(spec.transform.scale(states[agent]))
    return float(u)


def controllability_matrix(A, b) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    cols = [b]
    for _ in range(1, A.shape[0]):
        cols.append(A @ cols[-1])
    return np.column_stack(cols)


def linear_canonical_transform(A, b) -> StateTransform:
    """Transform ``z = T x`` bringing ``x' = A x + b u`` to companion form.

    The last row of ``C^{-1}`` (``C`` the controllability matrix) gives
    ``q``; the rows of ``T`` are ``q' A^k`` for ``k = 0..n-1``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise InvalidDimensions(f"A must be square and b match it; got {A.shape}, {b.shape}")
    if n < 1:
        raise InvalidOrder("order must be >= 1")
    C = controllability_matrix(A, b)
    sv = np.linalg.svd(C, compute_uv=False)
    if sv[-1] <= CONTROLLABILITY_RCOND * max(sv[0], 1e-300):
        raise NotControllable(f"controllability matrix is rank deficient (singular values {sv})")
    cond = float(sv[0] / sv[-1])
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    q = np.linalg.solve(C.T, e_n)
    rows = [q]
    for _ in range(1, n):
        rows.append(rows[-1] @ A)
    T = np.vstack(rows)
    a = (rows[-1] @ A) @ np.linalg.inv(T)
    return StateTransform(
        n,
        lambda x, T=T: x @ T.T,
        lambda x: np.ones(np.shape(x)[:-1]),
        float(np.linalg.norm(a)),
        T,
        a,
        "linear",
        cond,
        1.0,
    )


def companion_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    n = a.size
    out = np.eye(n, k=1)
    out[-1] = a
    return out


def wrap_nonlinear(forward: Callable, input_scale: Callable, w: float, n: int) -> StateTransform:
    """Wrap user-supplied coordinate and input-scale maps.

    The caller vouches for the structural conditions (independence and
    involutivity of the relevant vector fields) and for ``w``; only the
    runtime division guard on ``input_scale`` is enforced here.
    """
    _check_w(w)
    return StateTransform(n, forward, input_scale, float(w), kind="nonlinear")


def estimate_weak_lipschitz(f: Callable, low, high, samples: int = 20000, seed: int = 0, local: float = 1e-3) -> float:
    """Sampled lower estimate of the weak-Lipschitz constant of ``f`` on a box.

    Evaluates ``max_i (x_i - y_i)(f(x) - f(y)) / |x - y|^2`` over random
    pairs, half of them far apart and half within ``local`` of each other
    (relative to the box size) so that local slopes are seen too.  This is
    a lower bound on the true constant, never a certificate.
    """
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)
    rng = np.random.default_rng(seed)
    x = rng.uniform(low, high, size=(samples, low.size))
    y = rng.uniform(low, high, size=(samples, low.size))
    half = samples // 2
    y[:half] = np.clip(x[:half] + local * (high - low) * rng.standard_normal((half, low.size)), low, high)
    d = x - y
    nrm = np.einsum("ij,ij->i", d, d)
    keep = nrm > 0
    df = np.asarray(f(x), dtype=float) - np.asarray(f(y), dtype=float)
    ratio = (d[keep] * df[keep, None]).max(axis=1) / nrm[keep]
    return max(0.0, float(ratio.max()))

