"""Experiment configuration: a strict, declarative TOML file.

Unknown sections or keys are rejected, and every run embeds the fully
resolved configuration in its outputs so artifacts are reproducible from
themselves.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

import numpy as np

from . import __version__
from .adversary import (
    adaptive_cut_adversary,
    degree_changing_adversary,
    schedule_provider,
    static_provider,
)
from .dynamics import BiasConfig, make_initial_assignment
from .graphs import (
    Graph,
    build_graph,
    complete_graph,
    cycle_graph,
    generate_circulant,
    generate_cut_graph,
    generate_random_regular,
    generate_subdivided_expander,
    petersen_graph,
    read_edge_list,
    star_graph,
)
from .rng import make_rng

SEED_ENV_VAR = "VOTERLAB_SEED"


class ConfigInvalid(Exception):
    pass


_SCHEMA = {
    "graph": {"family", "n", "k", "d", "n_prime", "ell", "phi", "seed", "path"},
    "model": {"kind", "alphas"},
    "provider": {"kind", "phi", "phi_schedule", "gamma", "c", "seed", "n_prime"},
    "init": {"rule", "kappa", "k", "assignment"},
    "run": {"trials", "seed", "max_rounds", "threads", "regeneration"},
    "monitors": {"balance", "steps", "good_sequence", "checkpoints"},
    "output": {"out_dir", "prefix"},
}

_DEFAULTS = {
    "model": {"kind": "standard"},
    "provider": {"kind": "static"},
    "init": {"rule": "distinct"},
    "run": {"trials": 1, "seed": 0, "max_rounds": 10**6, "threads": 0},
    "monitors": {},
    "output": {"out_dir": "."},
}


@dataclass
class ExperimentConfig:
    graph: dict
    model: dict = field(default_factory=lambda: dict(_DEFAULTS["model"]))
    provider: dict = field(default_factory=lambda: dict(_DEFAULTS["provider"]))
    init: dict = field(default_factory=lambda: dict(_DEFAULTS["init"]))
    run: dict = field(default_factory=lambda: dict(_DEFAULTS["run"]))
    monitors: dict = field(default_factory=dict)
    output: dict = field(default_factory=lambda: dict(_DEFAULTS["output"]))

    def resolved(self) -> dict:
        out = asdict(self)
        out["version"] = __version__
        return out

    # ---- factory helpers -------------------------------------------------

    def build_graph(self) -> Graph:
        return graph_from_spec(self.graph)

    def bias(self) -> BiasConfig | None:
        if self.model.get("kind") != "biased":
            return None
        alphas = self.model.get("alphas")
        if alphas is None:
            raise ConfigInvalid("model.alphas is required for the biased model")
        return BiasConfig(np.asarray(alphas, dtype=np.float64))

    def build_provider(self, g: Graph | None = None):
        kind = self.provider.get("kind", "static")
        if kind == "static":
            if g is None:
                g = self.build_graph()
            return static_provider(g, self.provider.get("phi"))
        if kind == "cut-adversary":
            n = int(self.graph["n"])
            d = int(self.graph["d"])
            sched = self.provider.get("phi_schedule", self.provider.get("phi"))
            if sched is None:
                raise ConfigInvalid("cut-adversary needs provider.phi or phi_schedule")
            return adaptive_cut_adversary(
                n,
                d,
                sched,
                gamma=float(self.provider.get("gamma", 0.125)),
                c=float(self.provider.get("c", 1.0)),
            )
        if kind == "degree-adversary":
            return degree_changing_adversary(int(self.graph["n"]))
        if kind == "schedule":
            sched = self.provider.get("phi_schedule", self.provider.get("phi"))
            if sched is None:
                raise ConfigInvalid("schedule provider needs provider.phi or phi_schedule")
            return schedule_provider(
                "cut",
                sched,
                int(self.provider.get("seed", 0)),
                n=int(self.graph["n"]),
                d=int(self.graph["d"]),
                n_prime=self.provider.get("n_prime"),
            )
        raise ConfigInvalid(f"provider.kind {kind!r} not recognised")

    def initial_assignment(self, n: int, seed: int) -> np.ndarray:
        rule = self.init.get("rule", "distinct")
        return make_initial_assignment(
            n,
            rule,
            kappa=int(self.init.get("kappa", 2)),
            k=int(self.init.get("k", 1)),
            rng=make_rng(seed),
            assignment=self.init.get("assignment"),
        )

    def seed(self, override: int | None = None) -> int:
        if override is not None:
            return int(override)
        env = os.environ.get(SEED_ENV_VAR)
        if env is not None:
            return int(env)
        return int(self.run.get("seed", 0))


def graph_from_spec(spec: dict) -> Graph:
    family = spec.get("family")
    if family is None:
        raise ConfigInvalid("graph.family is required")
    n = spec.get("n")
    if family == "cycle":
        return cycle_graph(int(n))
    if family == "circulant":
        return generate_circulant(int(n), int(spec["k"]))
    if family == "complete":
        return complete_graph(int(n))
    if family == "star":
        return star_graph(int(n))
    if family == "petersen":
        return petersen_graph()
    if family == "random-regular":
        return generate_random_regular(int(n), int(spec["d"]), int(spec.get("seed", 0)))
    if family == "cut":
        g, _ = generate_cut_graph(
            int(n), int(spec["n_prime"]), int(spec["d"]), float(spec["phi"])
        )
        return g
    if family == "subdivided-expander":
        return generate_subdivided_expander(
            int(spec["n_prime"]), int(spec["d"]), int(spec["ell"]), int(spec.get("seed", 0))
        )
    if family == "file":
        return read_edge_list(spec["path"])
    raise ConfigInvalid(f"graph.family {family!r} not recognised")


def parse_family_string(text: str) -> Graph:
    """Compact CLI form like cycle:8, circulant:10:2, regular:64:3:7."""
    parts = text.split(":")
    name, args = parts[0], [int(p) if "." not in p else float(p) for p in parts[1:]]
    if name == "cycle":
        return cycle_graph(int(args[0]))
    if name == "circulant":
        return generate_circulant(int(args[0]), int(args[1]))
    if name == "complete":
        return complete_graph(int(args[0]))
    if name == "star":
        return star_graph(int(args[0]))
    if name == "petersen":
        return petersen_graph()
    if name in ("regular", "random-regular"):
        seed = int(args[2]) if len(args) > 2 else 0
        return generate_random_regular(int(args[0]), int(args[1]), seed)
    raise ConfigInvalid(f"family spec {text!r} not recognised")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    unknown_sections = set(raw) - set(_SCHEMA)
    if unknown_sections:
        raise ConfigInvalid(f"unknown config sections: {sorted(unknown_sections)}")
    for section, keys in raw.items():
        if not isinstance(keys, dict):
            raise ConfigInvalid(f"[{section}] must be a table, got {type(keys).__name__}")
        bad = set(keys) - _SCHEMA[section]
        if bad:
            raise ConfigInvalid(
                f"unknown keys in [{section}]: {sorted(bad)}"
            )
    if "graph" not in raw:
        raise ConfigInvalid("missing required [graph] section")
    merged = {}
    for section in _SCHEMA:
        merged[section] = dict(_DEFAULTS.get(section, {}))
        merged[section].update(raw.get(section, {}))
    return ExperimentConfig(**merged)
