"""Strict JSON experiment configuration.

One document describes a full experiment: the coupling topology (a named
example or explicit edge lists), per-agent dynamics overrides, cost
parameters, noise levels, learning knobs, the architectures to run, and the
seed list.  Unknown keys are rejected at every level so typos in sweep
definitions fail loudly.  Parsing and serialization round-trip to a
canonical form.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from .examples import build_example_system, generate_example1, generate_example2
from .graphs import CouplingGraphs, build_coupling_graphs
from .policy_iteration import Architecture, MalspiConfig
from .system import MultiAgentSystem


class ConfigError(ValueError):
    """Raised for malformed experiment configuration documents."""


_EXAMPLES = {"example1": generate_example1, "example2": generate_example2}


def _reject_unknown(section: str, data: Mapping[str, Any], allowed: Sequence[str]) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {unknown}")


def _get(data: Mapping[str, Any], key: str, default):
    value = data.get(key, default)
    return default if value is None and default is not None else value


@dataclass(frozen=True)
class DynamicsConfig:
    a_self: Optional[tuple[tuple[float, ...], ...]] = None
    b_self: Optional[tuple[tuple[float, ...], ...]] = None
    coupling_scale: float = 0.01
    b_coupling_scale: float = 0.0

    @classmethod
    def parse(cls, data: Mapping[str, Any]) -> "DynamicsConfig":
        _reject_unknown(
            "dynamics", data, ["a_self", "b_self", "coupling_scale", "b_coupling_scale"]
        )
        a_self = data.get("a_self")
        b_self = data.get("b_self")
        return cls(
            a_self=None if a_self is None else tuple(tuple(float(v) for v in row) for row in a_self),
            b_self=None if b_self is None else tuple(tuple(float(v) for v in row) for row in b_self),
            coupling_scale=float(_get(data, "coupling_scale", 0.01)),
            b_coupling_scale=float(_get(data, "b_coupling_scale", 0.0)),
        )

    def to_json_dict(self) -> dict:
        return {
            "a_self": None if self.a_self is None else [list(r) for r in self.a_self],
            "b_self": None if self.b_self is None else [list(r) for r in self.b_self],
            "coupling_scale": self.coupling_scale,
            "b_coupling_scale": self.b_coupling_scale,
        }


@dataclass(frozen=True)
class CostConfig:
    s_diag: float = 200.0
    s_off: float = -10.0

    @classmethod
    def parse(cls, data: Mapping[str, Any]) -> "CostConfig":
        _reject_unknown("cost", data, ["s_diag", "s_off"])
        return cls(s_diag=float(_get(data, "s_diag", 200.0)), s_off=float(_get(data, "s_off", -10.0)))

    def to_json_dict(self) -> dict:
        return {"s_diag": self.s_diag, "s_off": self.s_off}


@dataclass(frozen=True)
class GraphConfig:
    edges_s: tuple[tuple[int, int], ...]
    edges_o: tuple[tuple[int, int], ...]
    edges_c: tuple[tuple[int, int], ...]

    @classmethod
    def parse(cls, data: Mapping[str, Any]) -> "GraphConfig":
        _reject_unknown("graphs", data, ["edges_s", "edges_o", "edges_c"])
        def edges(key: str) -> tuple[tuple[int, int], ...]:
            if key not in data:
                raise ConfigError(f"graphs section is missing {key}")
            return tuple(sorted((int(a), int(b)) for a, b in data[key]))
        return cls(edges("edges_s"), edges("edges_o"), edges("edges_c"))

    def to_json_dict(self) -> dict:
        return {
            "edges_s": [list(e) for e in self.edges_s],
            "edges_o": [list(e) for e in self.edges_o],
            "edges_c": [list(e) for e in self.edges_c],
        }


_TOP_LEVEL_KEYS = [
    "n_agents",
    "example",
    "graphs",
    "n_x",
    "n_u",
    "dynamics",
    "cost",
    "sigma_w",
    "sigma_eta",
    "t_rollout",
    "t_eval",
    "n_iterations",
    "alpha",
    "zeta",
    "sigma0",
    "architectures",
    "seeds",
    "output_dir",
    "force_full_sets",
    "oracle_diagnostics",
]


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, canonical experiment description."""

    n_agents: int
    example: Optional[str] = "example1"
    graphs: Optional[GraphConfig] = None
    n_x: int = 3
    n_u: int = 3
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)
    cost: CostConfig = field(default_factory=CostConfig)
    sigma_w: float = 1.0
    sigma_eta: float = 1.0
    t_rollout: int = 500
    t_eval: int = 500
    n_iterations: int = 15
    alpha: float = 1e-3
    zeta: float = 1e-6
    sigma0: float = 1.0
    architectures: tuple[str, ...] = ("indirect", "direct", "undecomposed_direct", "centralized")
    seeds: tuple[int, ...] = (0,)
    output_dir: Optional[str] = None
    force_full_sets: bool = False
    oracle_diagnostics: bool = False

    def __post_init__(self):
        if (self.example is None) == (self.graphs is None):
            raise ConfigError("exactly one of 'example' or 'graphs' must be set")
        if self.example is not None and self.example not in _EXAMPLES:
            raise ConfigError(
                f"unknown example {self.example!r}; expected one of {sorted(_EXAMPLES)}"
            )
        if not self.architectures:
            raise ConfigError("at least one architecture is required")
        for name in self.architectures:
            Architecture.parse(name)
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.n_agents < 1:
            raise ConfigError(f"n_agents must be positive, got {self.n_agents}")
        # Fail early on out-of-range explicit edges.
        self.build_graphs()

    def build_graphs(self) -> CouplingGraphs:
        if self.example is not None:
            return _EXAMPLES[self.example](self.n_agents)
        assert self.graphs is not None
        return build_coupling_graphs(
            self.n_agents, self.graphs.edges_s, self.graphs.edges_o, self.graphs.edges_c
        )

    def build_system(self) -> MultiAgentSystem:
        return build_example_system(
            self.build_graphs(),
            n_x=self.n_x,
            n_u=self.n_u,
            a_self=None if self.dynamics.a_self is None else np.array(self.dynamics.a_self),
            b_self=None if self.dynamics.b_self is None else np.array(self.dynamics.b_self),
            coupling_scale=self.dynamics.coupling_scale,
            b_coupling_scale=self.dynamics.b_coupling_scale,
            s_diag=self.cost.s_diag,
            s_off=self.cost.s_off,
            sigma_w=self.sigma_w,
        )

    def malspi_config(self, seed: int) -> MalspiConfig:
        return MalspiConfig(
            n_iterations=self.n_iterations,
            t_rollout=self.t_rollout,
            t_eval=self.t_eval,
            sigma_eta=self.sigma_eta,
            alpha=self.alpha,
            zeta=self.zeta,
            seed=seed,
            sigma0=self.sigma0,
            force_full_sets=self.force_full_sets,
            oracle_diagnostics=self.oracle_diagnostics,
        )

    def to_json_dict(self) -> dict:
        return {
            "n_agents": self.n_agents,
            "example": self.example,
            "graphs": None if self.graphs is None else self.graphs.to_json_dict(),
            "n_x": self.n_x,
            "n_u": self.n_u,
            "dynamics": self.dynamics.to_json_dict(),
            "cost": self.cost.to_json_dict(),
            "sigma_w": self.sigma_w,
            "sigma_eta": self.sigma_eta,
            "t_rollout": self.t_rollout,
            "t_eval": self.t_eval,
            "n_iterations": self.n_iterations,
            "alpha": self.alpha,
            "zeta": self.zeta,
            "sigma0": self.sigma0,
            "architectures": list(self.architectures),
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
            "force_full_sets": self.force_full_sets,
            "oracle_diagnostics": self.oracle_diagnostics,
        }


def parse_config(data: Mapping[str, Any]) -> ExperimentConfig:
    """Parse and validate a configuration mapping; unknown keys are errors."""
    if not isinstance(data, Mapping):
        raise ConfigError(f"configuration must be a mapping, got {type(data).__name__}")
    _reject_unknown("configuration", data, _TOP_LEVEL_KEYS)
    if "n_agents" not in data:
        raise ConfigError("configuration is missing n_agents")
    graphs = data.get("graphs")
    example = data.get("example")
    if graphs is None and example is None:
        example = "example1"
    return ExperimentConfig(
        n_agents=int(data["n_agents"]),
        example=example,
        graphs=None if graphs is None else GraphConfig.parse(graphs),
        n_x=int(_get(data, "n_x", 3)),
        n_u=int(_get(data, "n_u", 3)),
        dynamics=DynamicsConfig.parse(data.get("dynamics") or {}),
        cost=CostConfig.parse(data.get("cost") or {}),
        sigma_w=float(_get(data, "sigma_w", 1.0)),
        sigma_eta=float(_get(data, "sigma_eta", 1.0)),
        t_rollout=int(_get(data, "t_rollout", 500)),
        t_eval=int(_get(data, "t_eval", 500)),
        n_iterations=int(_get(data, "n_iterations", 15)),
        alpha=float(_get(data, "alpha", 1e-3)),
        zeta=float(_get(data, "zeta", 1e-6)),
        sigma0=float(_get(data, "sigma0", 1.0)),
        architectures=tuple(
            str(a) for a in _get(data, "architectures", ["indirect", "direct", "undecomposed_direct", "centralized"])
        ),
        seeds=tuple(int(s) for s in _get(data, "seeds", [0])),
        output_dir=data.get("output_dir"),
        force_full_sets=bool(_get(data, "force_full_sets", False)),
        oracle_diagnostics=bool(_get(data, "oracle_diagnostics", False)),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Load and validate a JSON configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return parse_config(data)


def dump_config(config: ExperimentConfig, path: str | Path) -> None:
    """Write the canonical JSON form of a configuration."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_json_dict(), fh, indent=2, sort_keys=False)
        fh.write("\n")
