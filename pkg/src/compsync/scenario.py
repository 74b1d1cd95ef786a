"""Scenario configuration, presets and the synthesis-to-simulation pipeline.

A scenario document is JSON validated against :data:`SCENARIO_SCHEMA`
(unknown keys rejected) and then turned into the dataclasses below.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import jsonschema
import numpy as np

from . import control as ctl
from . import graphs
from . import simkit as sk
from .collection import SpectralCollection, synthesize_graph, verify_collection
from .errors import ConfigError
from .io import SCHEMA_VERSION
from .lyapunov import LyapunovPack, lyapunov_pack

_number_or_list = {
    "oneOf": [
        {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}, "minItems": 1},
    ]
}

SCENARIO_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "model", "agents"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "description": {"type": "string"},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": ["van_der_pol", "linear_oscillator", "integrator_chain"]},
                "mu": {"type": "number"},
                "order": {"type": "integer", "minimum": 1},
            },
        },
        "agents": {"type": "integer", "minimum": 2},
        "graph": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["path", "cycle", "complete", "random-connected", "edges"]},
                "seed": {"type": "integer", "minimum": 0},
                "scale": {"type": "number", "exclusiveMinimum": 0},
                "edges": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 3},
                },
            },
        },
        "controller": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["none", "PD", "PID"]},
                "h": {"type": "integer", "minimum": 0},
                "margin": _number_or_list,
                "w": {"oneOf": [{"type": "number", "minimum": 0}, {"enum": ["auto", "estimate"]}]},
                "gain": {"type": ["number", "null"], "exclusiveMinimum": 1},
            },
        },
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "low": {"type": "number"},
                "high": {"type": "number"},
                "seed": {"type": "integer", "minimum": 0},
                "center": {"type": "boolean"},
            },
        },
        "disturbance": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["none", "step"]},
                "magnitude": {"type": "number"},
                "onset": {"type": "number", "minimum": 0},
                "target_agent": {"type": "integer", "minimum": 0},
            },
        },
        "dt": {"type": "number", "exclusiveMinimum": 0},
        "t_end": {"type": "number", "exclusiveMinimum": 0},
        "record_every": {"type": "integer", "minimum": 1},
        "lyapunov": {"type": "boolean"},
    },
}


@dataclass(frozen=True)
class ModelConfig:
    name: str
    mu: float = 2.5
    order: int = 2


@dataclass(frozen=True)
class GraphConfig:
    kind: str = "random-connected"
    seed: int = 0
    scale: float = 1.0
    edges: tuple = ()


@dataclass(frozen=True)
class ControllerConfig:
    kind: str = "PD"
    h: int = 0
    margin: Union[float, tuple] = 0.9
    w: Union[float, str] = "auto"
    gain: Optional[float] = None


@dataclass(frozen=True)
class InitialConfig:
    low: float = 0.0
    high: float = 5.0
    seed: int = 0
    center: bool = False


@dataclass(frozen=True)
class DisturbanceConfig:
    kind: str = "none"
    magnitude: float = 0.0
    onset: float = 0.0
    target_agent: int = 0


@dataclass(frozen=True)
class ScenarioConfig:
    model: ModelConfig
    agents: int
    graph: GraphConfig = field(default_factory=GraphConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    disturbance: DisturbanceConfig = field(default_factory=DisturbanceConfig)
    dt: float = 1e-3
    t_end: float = 10.0
    record_every: int = 10
    lyapunov: bool = True
    name: str = "custom"
    description: str = ""

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        try:
            jsonschema.validate(doc, SCENARIO_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"invalid scenario at {where}: {exc.message}") from exc
        ctrl = dict(doc.get("controller", {}))
        if isinstance(ctrl.get("margin"), list):
            ctrl["margin"] = tuple(ctrl["margin"])
        gr = dict(doc.get("graph", {}))
        gr["edges"] = tuple(tuple(e) for e in gr.get("edges", ()))
        cfg = cls(
            model=ModelConfig(**doc["model"]),
            agents=doc["agents"],
            graph=GraphConfig(**gr),
            controller=ControllerConfig(**ctrl),
            initial=InitialConfig(**doc.get("initial", {})),
            disturbance=DisturbanceConfig(**doc.get("disturbance", {})),
            **{k: doc[k] for k in ("dt", "t_end", "record_every", "lyapunov", "name", "description") if k in doc},
        )
        cfg.check()
        return cfg

    def to_dict(self) -> dict:
        doc = {"schema_version": SCHEMA_VERSION, **asdict(self)}
        doc["graph"]["edges"] = [list(e) for e in self.graph.edges]
        if isinstance(self.controller.margin, tuple):
            doc["controller"]["margin"] = list(self.controller.margin)
        return doc

    def check(self) -> None:
        if self.t_end < self.dt:
            raise ConfigError("t_end must be at least dt")
        if self.initial.high < self.initial.low:
            raise ConfigError("initial.high must be >= initial.low")
        if self.disturbance.target_agent >= self.agents:
            raise ConfigError("disturbance.target_agent out of range")
        if self.controller.kind == "PID" and self.controller.h < 1:
            raise ConfigError("a PID controller needs h >= 1")
        if self.controller.kind == "PD" and self.controller.h != 0:
            raise ConfigError("a PD controller has h = 0")


def _cfg(**kw) -> ScenarioConfig:
    return ScenarioConfig(**kw)


# Parameters the source example leaves open (graph draw, Laplacian scale,
# margins, disturbance size and onset) are fixed here and echoed in every
# summary under "provenance".
PRESETS = {
    "vanderpol": _cfg(
        name="vanderpol",
        description="Ten Van der Pol agents (mu = 2.5) coupled by a (G,2)-collection on a random connected graph.",
        model=ModelConfig("van_der_pol", mu=2.5),
        agents=10,
        graph=GraphConfig("random-connected", seed=0, scale=2.0),
        controller=ControllerConfig("PD", margin=0.3, w="estimate"),
        initial=InitialConfig(0.0, 5.0, seed=1),
        dt=1e-3,
        t_end=40.0,
    ),
    "vanderpol-uncoupled": _cfg(
        name="vanderpol-uncoupled",
        description="Same agents and initial conditions without coupling.",
        model=ModelConfig("van_der_pol", mu=2.5),
        agents=10,
        graph=GraphConfig("random-connected", seed=0, scale=2.0),
        controller=ControllerConfig("none"),
        initial=InitialConfig(0.0, 5.0, seed=1),
        dt=1e-3,
        t_end=40.0,
    ),
    "linosc-uncoupled": _cfg(
        name="linosc-uncoupled",
        description="Ten linear oscillators, no coupling.",
        model=ModelConfig("linear_oscillator"),
        agents=10,
        graph=GraphConfig("complete", scale=0.2),
        controller=ControllerConfig("none"),
        initial=InitialConfig(-10.0, 10.0, seed=0),
        t_end=80.0,
    ),
    "linosc-pd": _cfg(
        name="linosc-pd",
        description="Linear oscillators with a PD coupling from a (G,2)-collection.",
        model=ModelConfig("linear_oscillator"),
        agents=10,
        graph=GraphConfig("complete", scale=0.2),
        controller=ControllerConfig("PD", margin=0.3),
        initial=InitialConfig(-10.0, 10.0, seed=0),
        t_end=80.0,
    ),
    "linosc-pd-disturbed": _cfg(
        name="linosc-pd-disturbed",
        description="PD coupling with a unit step disturbance on agent 0.",
        model=ModelConfig("linear_oscillator"),
        agents=10,
        graph=GraphConfig("complete", scale=0.2),
        controller=ControllerConfig("PD", margin=0.3),
        initial=InitialConfig(-10.0, 10.0, seed=0),
        disturbance=DisturbanceConfig("step", 1.0, 0.0, 0),
        t_end=80.0,
    ),
    "linosc-pid-disturbed": _cfg(
        name="linosc-pid-disturbed",
        description="PID coupling (n = 2, h = 1) from a (G,3)-collection with the same disturbance.",
        model=ModelConfig("linear_oscillator"),
        agents=10,
        graph=GraphConfig("complete", scale=0.16),
        controller=ControllerConfig("PID", h=1, margin=(0.35, 0.99)),
        initial=InitialConfig(-10.0, 10.0, seed=0),
        disturbance=DisturbanceConfig("step", 1.0, 0.0, 0),
        dt=5e-4,
        t_end=80.0,
        record_every=20,
    ),
    "chain2": _cfg(
        name="chain2",
        description="Double integrators, PD consensus on K6.",
        model=ModelConfig("integrator_chain", order=2),
        agents=6,
        graph=GraphConfig("complete", scale=0.52),
        controller=ControllerConfig("PD", margin=0.3),
        initial=InitialConfig(-1.0, 1.0, seed=0),
        dt=0.01,
        t_end=30.0,
    ),
    "chain3": _cfg(
        name="chain3",
        description="Triple integrators, PD consensus on K6.",
        model=ModelConfig("integrator_chain", order=3),
        agents=6,
        graph=GraphConfig("complete", scale=0.176),
        controller=ControllerConfig("PD", margin=0.9),
        initial=InitialConfig(-1.0, 1.0, seed=0),
        dt=0.02,
        t_end=300.0,
    ),
    "chain4": _cfg(
        name="chain4",
        description="Fourth-order integrators, PD consensus on K6 from mean-free initial states.",
        model=ModelConfig("integrator_chain", order=4),
        agents=6,
        graph=GraphConfig("complete", scale=0.264),
        controller=ControllerConfig("PD", margin=0.6),
        initial=InitialConfig(-1.0, 1.0, seed=0, center=True),
        dt=0.05,
        t_end=8000.0,
        record_every=100,
    ),
}

SOURCE_PARAMETERS = {
    "van_der_pol": ["mu = 2.5", "N = 10", "initial box [0, 5]^2", "random connected graph", "(G,2)-collection"],
    "linear_oscillator": ["A = [[4, 5], [-5, -4]], b = (1, 1)", "N = 10", "initial box [-10, 10]^2", "PID uses a (G,3)-collection"],
    "integrator_chain": ["f = 0"],
}


def preset(name: str) -> ScenarioConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass
class Plant:
    dynamics: object
    transform: Optional[ctl.StateTransform]
    companion_drift: object  # (z) -> f, for weak-Lipschitz estimation


def build_plant(m: ModelConfig) -> Plant:
    if m.name == "van_der_pol":
        dyn = sk.van_der_pol(m.mu)
        return Plant(dyn, None, lambda z: dyn.drift(0.0, z))
    if m.name == "integrator_chain":
        dyn = sk.integrator_chain(m.order)
        return Plant(dyn, None, lambda z: dyn.drift(0.0, z))
    A, b = sk.linear_oscillator()
    tr = ctl.linear_canonical_transform(A, b)
    a = tr.companion_row
    return Plant(sk.StatePlant.linear(A, b, name="linear_oscillator"), tr, lambda z: z @ a)


def resolve_w(cfg: ScenarioConfig, plant: Plant) -> tuple:
    """Weak-Lipschitz constant and where it came from."""
    w = cfg.controller.w
    if isinstance(w, (int, float)):
        return float(w), "user supplied"
    if w == "auto" and cfg.model.name == "integrator_chain":
        return 0.0, "exact (zero drift)"
    if w == "auto" and plant.transform is not None:
        return plant.transform.lipschitz_w, "norm of the companion-form drift row"
    n = plant.dynamics.n
    low, high = [cfg.initial.low] * n, [cfg.initial.high] * n
    if plant.transform is not None:
        # box corners mapped to companion coordinates
        corners = np.array(np.meshgrid(*zip(low, high))).reshape(n, -1).T
        zc = plant.transform.apply(corners)
        low, high = zc.min(axis=0), zc.max(axis=0)
    est = ctl.estimate_weak_lipschitz(plant.companion_drift, low, high, samples=100000, seed=cfg.initial.seed)
    return est, "sampled lower estimate on the initial-condition box"


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    record: sk.TrajectoryRecord
    collection: Optional[SpectralCollection]
    controller: Optional[ctl.ControllerSpec]
    pack: Optional[LyapunovPack]
    summary: dict


def initial_states(cfg: ScenarioConfig, n: int) -> np.ndarray:
    x0 = sk.uniform_initial_states(cfg.agents, n, cfg.initial.low, cfg.initial.high, cfg.initial.seed)
    if cfg.initial.center:
        x0 = x0 - x0.mean(axis=0)
    return x0


def build(cfg: ScenarioConfig):
    """Plant, collection, controller and Lyapunov pack for a scenario."""
    plant = build_plant(cfg.model)
    n = plant.dynamics.n
    g = graphs.make_graph(cfg.graph.kind, cfg.agents, cfg.graph.seed, cfg.graph.edges)
    L_graph = graphs.laplacian(g, cfg.graph.scale)
    info = {"edges": sorted([list(e) for e in g.edges]), "laplacian_scale": cfg.graph.scale}
    if cfg.controller.kind == "none":
        return plant, None, None, None, info, None
    h = cfg.controller.h
    coll, schedule = synthesize_graph(L_graph, n + h, margin=cfg.controller.margin)
    report = verify_collection(coll, graph=L_graph)
    w, w_source = resolve_w(cfg, plant)
    if h:
        spec = ctl.assemble_pid(coll, n, h, w, l=cfg.controller.gain, transform=plant.transform)
    else:
        spec = ctl.assemble_pd(coll, w, l=cfg.controller.gain, transform=plant.transform)
    info.update(
        w=w,
        w_source=w_source,
        gain=spec.l,
        gain_bound=spec.bound,
        schedule_gains=schedule.gains.tolist(),
        collection_verified=report.passed,
    )
    pack = lyapunov_pack(coll, spec.l) if cfg.lyapunov else None
    return plant, coll, spec, pack, info, report


def run(cfg: ScenarioConfig) -> ScenarioResult:
    plant, coll, spec, pack, info, report = build(cfg)
    n = plant.dynamics.n
    d = cfg.disturbance
    scenario = sk.NetworkScenario(
        N=cfg.agents,
        dynamics=plant.dynamics,
        controller=spec,
        initial_states=initial_states(cfg, n),
        t_end=cfg.t_end,
        dt=cfg.dt,
        disturbance=sk.DisturbanceSpec(d.kind, d.magnitude, d.onset, d.target_agent),
        record_every=cfg.record_every,
        seed=cfg.initial.seed,
    )
    t0 = time.perf_counter()
    rec = sk.simulate(scenario, pack)
    elapsed = time.perf_counter() - t0
    summary = {
        "scenario": cfg.name,
        "final_error_norm": float(rec.error_norm[-1]),
        "final_companion_error_norm": float(rec.companion_error_norm[-1]),
        "initial_error_norm": float(rec.error_norm[0]),
        "runtime_s": round(elapsed, 3),
        "samples": len(rec.times),
        **info,
        "provenance": {
            "from_source_example": SOURCE_PARAMETERS.get(cfg.model.name, []),
            "chosen_here": {
                "graph": asdict(cfg.graph) | {"edges": info["edges"]},
                "controller": asdict(cfg.controller),
                "initial_seed": cfg.initial.seed,
                "disturbance": asdict(cfg.disturbance),
                "dt": cfg.dt,
                "t_end": cfg.t_end,
            },
        },
    }
    if rec.lyapunov is not None:
        mono = sk.check_monotone(rec.times, rec.lyapunov)
        summary["lyapunov"] = {
            "nonincreasing": mono.nonincreasing,
            "worst_rate": mono.worst_rate,
            "tol": mono.tol,
            "violations": mono.violations,
            "note": "decrease is only claimed for the disturbance-free closed loop" if d.kind != "none" else "",
        }
    if report is not None and not report.passed:
        summary["collection_failures"] = [ch.name for ch in report.failures()]
    return ScenarioResult(cfg, rec, coll, spec, pack, summary)
