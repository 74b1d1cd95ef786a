"""Fixed-step RK4 simulation of a network of identical agents.

Two plant descriptions are supported.  ``AgentDynamics`` is already in
companion form (``x_k' = x_{k+1}``, ``x_n' = f + g u``); the controller is
applied as ``u = u~ / g`` so the last equation reads ``f + u~ + d``.
``StatePlant`` is a general ``x' = F(x) + G(x)(u + d)`` whose controller
carries a ``StateTransform``.

PID controllers add ``h`` integrator states per agent, ``q_1' = z_1`` and
``q_m' = q_{m-1}``, integrated jointly with the plant.  Drift and input
maps act row-wise on N x n arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import control as ctl
from .errors import Diverged, InvalidDimensions, InvalidOrder, SingularDecoupling
from .lyapunov import LyapunovPack

DIVERGENCE_LIMIT = 1e9
MONOTONE_REL_TOL = 1e-6


@dataclass(frozen=True)
class AgentDynamics:
    n: int
    drift: Callable
    g_factor: Optional[Callable] = None
    name: str = "custom"

    def __post_init__(self):
        if self.n < 1:
            raise InvalidOrder(f"order must be >= 1, got {self.n}")


@dataclass(frozen=True)
class StatePlant:
    """``x' = F(t, x) + G(t, x) (u + d)`` in plant coordinates.

    ``input_field`` may return one n-vector shared by all agents or an N x n array.
    """

    n: int
    field: Callable
    input_field: Callable
    name: str = "custom"

    @classmethod
    def linear(cls, A, b, name="linear"):
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float).reshape(-1)
        return cls(A.shape[0], lambda t, x: x @ A.T, lambda t, x: b, name)


@dataclass(frozen=True)
class DisturbanceSpec:
    kind: str = "none"  # none | step | custom
    magnitude: float = 0.0
    onset: float = 0.0
    target_agent: int = 0
    func: Optional[Callable] = None  # custom: t -> N-vector

    def __call__(self, t: float, N: int) -> np.ndarray:
        d = np.zeros(N)
        if self.kind == "step":
            if t >= self.onset:
                d[self.target_agent] = self.magnitude
        elif self.kind == "custom":
            d = np.asarray(self.func(t), dtype=float).reshape(N)
        return d


@dataclass(frozen=True)
class NetworkScenario:
    N: int
    dynamics: object  # AgentDynamics | StatePlant
    controller: Optional[ctl.ControllerSpec]
    initial_states: np.ndarray
    t_end: float
    dt: float = 1e-3
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    record_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0 or not self.t_end >= self.dt:
            raise InvalidDimensions(f"need dt > 0 and t_end >= dt, got dt={self.dt}, t_end={self.t_end}")
        x0 = np.asarray(self.initial_states, dtype=float)
        if x0.shape != (self.N, self.dynamics.n):
            raise InvalidDimensions(f"initial states must be {self.N}x{self.dynamics.n}, got {x0.shape}")
        c = self.controller
        if c is not None and (c.N != self.N or c.n != self.dynamics.n):
            raise InvalidDimensions(f"controller is for N={c.N}, n={c.n}")
        if isinstance(self.dynamics, StatePlant) and c is not None and c.transform is None:
            raise InvalidDimensions("a StatePlant needs a controller with a StateTransform")


@dataclass(frozen=True)
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray  # time x N x n, plant coordinates
    companion: np.ndarray  # time x N x n, companion coordinates
    integrals: np.ndarray  # time x N x h
    controls: np.ndarray  # time x N
    error_norm: np.ndarray  # plant coordinates
    lyapunov: Optional[np.ndarray] = None

    @property
    def companion_error_norm(self) -> np.ndarray:
        return error_norm(self.companion)

    @property
    def augmented(self) -> np.ndarray:
        """Companion chain with integrals first: ``[q_h..q_1, z_1..z_n]`` per agent."""
        return np.concatenate([self.integrals[:, :, ::-1], self.companion], axis=2)


def disagreement(x: np.ndarray) -> np.ndarray:
    """Subtract the per-order agent mean; works on (..., N, n) arrays."""
    return x - x.mean(axis=-2, keepdims=True)


def error_norm(x: np.ndarray) -> np.ndarray:
    e = disagreement(x)
    return np.sqrt(np.sum(e * e, axis=(-2, -1)))


def _transform(sc):
    c = sc.controller
    if c is not None and c.transform is not None:
        return c.transform
    return None


def _rhs_factory(sc: NetworkScenario):
    dyn, spec = sc.dynamics, sc.controller
    tr = _transform(sc)
    h = spec.h if spec is not None else 0
    N, n = sc.N, dyn.n

    def companion(x):
        return x if tr is None else tr.apply(x)

    def rhs(t, x, q):
        z = companion(x)
        u_tilde = np.zeros(N) if spec is None else ctl.coupling(spec, z, q if h else None)
        d = sc.disturbance(t, N)
        if isinstance(dyn, AgentDynamics):
            if dyn.g_factor is not None:
                g = np.broadcast_to(np.asarray(dyn.g_factor(t, x), dtype=float), (N,))
                bad = np.flatnonzero(np.abs(g) <= ctl.SCALE_GUARD)
                if bad.size:
                    i = int(bad[0])
                    raise SingularDecoupling(f"g vanished for agent {i} at t={t}", state=x[i], t=t, agent=i)
                u = u_tilde / g
            else:
                u = u_tilde
            dx = np.empty_like(x)
            dx[:, :-1] = x[:, 1:]
            dx[:, -1] = np.asarray(dyn.drift(t, x), dtype=float) + u_tilde + d
        else:
            u = u_tilde if tr is None else tr.scale(x, t) * u_tilde
            dx = np.asarray(dyn.field(t, x), dtype=float) + np.asarray(dyn.input_field(t, x), dtype=float) * (u + d)[:, None]
        dq = np.empty((N, h))
        if h:
            dq[:, 0] = z[:, 0]
            dq[:, 1:] = q[:, :-1]
        return dx, dq, u

    return rhs, companion


def simulate(sc: NetworkScenario, pack: Optional[LyapunovPack] = None) -> TrajectoryRecord:
    """Integrate the closed loop with classical RK4; controls are re-evaluated at every stage.

    Samples are kept every ``record_every`` steps plus the final one.  When
    ``pack`` is given, ``V = 1/2 e' M~ e`` is recorded on the (augmented)
    companion error.
    """
    rhs, companion = _rhs_factory(sc)
    N, n = sc.N, sc.dynamics.n
    h = sc.controller.h if sc.controller is not None else 0
    x = np.array(sc.initial_states, dtype=float)
    q = np.zeros((N, h))
    dt = sc.dt
    steps = int(round(sc.t_end / dt))
    idx = list(range(0, steps + 1, sc.record_every))
    if idx[-1] != steps:
        idx.append(steps)
    rec_t, rec_x, rec_z, rec_q, rec_u = [], [], [], [], []
    nxt = 0
    t = 0.0
    for step in range(steps + 1):
        t = step * dt
        k1x, k1q, u0 = rhs(t, x, q)
        if step == idx[nxt]:
            rec_t.append(t)
            rec_x.append(x.copy())
            rec_z.append(companion(x).copy())
            rec_q.append(q.copy())
            rec_u.append(np.array(u0, dtype=float))
            nxt += 1
        if step == steps:
            break
        k2x, k2q, _ = rhs(t + dt / 2, x + dt / 2 * k1x, q + dt / 2 * k1q)
        k3x, k3q, _ = rhs(t + dt / 2, x + dt / 2 * k2x, q + dt / 2 * k2q)
        k4x, k4q, _ = rhs(t + dt, x + dt * k3x, q + dt * k3q)
        x = x + dt / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        if h:
            q = q + dt / 6 * (k1q + 2 * k2q + 2 * k3q + k4q)
        bad = ~np.isfinite(x) | (np.abs(x) > DIVERGENCE_LIMIT)
        if h:
            bad = np.concatenate([bad, ~np.isfinite(q) | (np.abs(q) > DIVERGENCE_LIMIT)], axis=1)
        if bad.any():
            agent = int(np.argwhere(bad)[0, 0])
            raise Diverged(f"state of agent {agent} left the finite range at t={t + dt:.6g}", t=t + dt, agent=agent)

    rec = TrajectoryRecord(
        times=np.array(rec_t),
        states=np.array(rec_x),
        companion=np.array(rec_z),
        integrals=np.array(rec_q),
        controls=np.array(rec_u),
        error_norm=error_norm(np.array(rec_x)),
    )
    if pack is not None:
        rec = TrajectoryRecord(**{**rec.__dict__, "lyapunov": lyapunov_trace(rec, pack)})
    return rec


def lyapunov_trace(rec: TrajectoryRecord, pack: LyapunovPack) -> np.ndarray:
    """``V(e) = 1/2 e' M~ e`` along the record, with ``e`` stacked order-major."""
    aug = rec.augmented
    if aug.shape[1] != pack.N or aug.shape[2] != pack.n:
        raise InvalidDimensions(f"record is {aug.shape[1]}x{aug.shape[2]}, pack is for N={pack.N}, n={pack.n}")
    e = disagreement(aug).transpose(0, 2, 1).reshape(len(rec.times), -1)
    return 0.5 * np.einsum("ti,ij,tj->t", e, pack.M_tilde, e)


@dataclass(frozen=True)
class MonotonicityReport:
    nonincreasing: bool
    worst_rate: float
    tol: float
    violations: int


def check_monotone(times, V, rel_tol: float = MONOTONE_REL_TOL) -> MonotonicityReport:
    """Finite-difference test ``dV/dt <= rel_tol * max V``; reports, never raises."""
    V = np.asarray(V, dtype=float)
    tol = rel_tol * float(np.max(V)) if V.size else 0.0
    rate = np.diff(V) / np.diff(times)
    worst = float(rate.max()) if rate.size else 0.0
    viol = int(np.sum(rate > tol))
    return MonotonicityReport(viol == 0, worst, tol, viol)


def van_der_pol(mu: float = 2.5) -> AgentDynamics:
    """Van der Pol variant ``f = -x_1 + mu (1 - |x_1|) x_2``."""
    return AgentDynamics(2, lambda t, x: -x[..., 0] + mu * (1.0 - np.abs(x[..., 0])) * x[..., 1], name=f"van_der_pol(mu={mu})")


def linear_oscillator():
    """Oscillator pair ``(A, b)`` with eigenvalues +/- 3i."""
    return np.array([[4.0, 5.0], [-5.0, -4.0]]), np.array([1.0, 1.0])


def integrator_chain(n: int) -> AgentDynamics:
    if n < 1:
        raise InvalidOrder(f"order must be >= 1, got {n}")
    return AgentDynamics(n, lambda t, x: np.zeros(np.shape(x)[:-1]), name=f"integrator_chain({n})")


def builtin_models() -> dict:
    return {"van_der_pol": van_der_pol, "linear_oscillator": linear_oscillator, "integrator_chain": integrator_chain}


def uniform_initial_states(N: int, n: int, low: float, high: float, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).uniform(low, high, size=(N, n))
