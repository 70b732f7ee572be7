"""Run configuration: TOML tables flattened to dotted keys.

A file such as

    [grid]
    n1 = 128
    [physics]
    g = 1.0

is held as ``{"grid.n1": 128, "physics.g": 1.0}``. Unknown keys are errors;
``init.*`` keys other than ``init.kind`` are passed to the chosen generator.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import tomli
import tomli_w

from .dynamics import SimParams
from .intervals import ClassifierConfig
from .spectral import Grid


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "grid.n1": 128,
    "grid.n2": 128,
    "physics.g": 1.0,
    "physics.dealias": True,
    "physics.advection": True,
    "physics.chemotaxis": True,
    "physics.diffusion": True,
    "physics.diffusive_cap": False,
    "time.t_end": 1.0,
    "time.cfl": 0.5,
    "time.dt_max": 1e-3,
    "time.dt_min": 1e-9,
    "time.output_every": 0.01,
    "thresholds.blowup_linf": 1e5,
    "thresholds.blowup_l2sq": 1e6,
    "init.kind": "gaussian_bump",
    "classifier.N0": 4,
    "nash.a": 0.25,
    "nash.N_values": [16, 64, 256, 1024],
    "nash.members": 50,
    "nash.n": 256,
    "output.directory": "out",
    "output.snapshot_every": 0.0,
    "output.nash_ratio": False,
    "sweep.g_values": [0.0, 1.0],
}

OPTIONAL = {"classifier.c1_g_over_N", "classifier.C1_budget"}

INIT_PARAMS = {
    "gaussian_bump": {"mass", "center", "sigma", "floor"},
    "multi_bump": {"mass", "centers", "sigma", "weights", "floor"},
    "eigenmode": {"k1", "k2", "amplitude", "floor"},
    "random": {"seed", "decay", "floor", "amplitude", "kmax"},
    "from_snapshot": {"path"},
}


def flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def unflatten(flat: dict) -> dict:
    tree: dict = {}
    for key, v in flat.items():
        node = tree
        *head, last = key.split(".")
        for part in head:
            node = node.setdefault(part, {})
        node[last] = v
    return tree


def parse_value(text: str):
    """Interpret an override value as a TOML literal, else as a bare string."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


@dataclass
class RunConfig:
    values: dict

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        flat = {}
        if path is not None:
            try:
                with open(path, "rb") as fh:
                    flat = flatten(tomli.load(fh))
            except FileNotFoundError as exc:
                raise ConfigError(f"config file {path} not found") from exc
            except tomli.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, text = item.split("=", 1)
            flat[key.strip()] = parse_value(text.strip())
        cfg = cls({**DEFAULTS, **flat})
        cfg.validate()
        return cfg

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cfg = cls({**DEFAULTS, **flatten(tomli.loads(text))})
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def to_toml(self) -> str:
        return tomli_w.dumps(unflatten(dict(sorted(self.values.items()))))

    # -- validation and derived objects --------------------------------------

    def init_kind(self) -> str:
        return self.values["init.kind"]

    def init_spec(self) -> dict:
        kind = self.init_kind()
        spec = {"kind": kind}
        for key, v in self.values.items():
            name = key[len("init."):]
            if key.startswith("init.") and name in INIT_PARAMS[kind]:
                spec[name] = v
        return spec

    def validate(self):
        v = self.values
        known = set(DEFAULTS) | OPTIONAL
        kind = v.get("init.kind")
        if kind not in INIT_PARAMS:
            raise ConfigError(f"init.kind must be one of {sorted(INIT_PARAMS)}, got {kind!r}")
        allowed_init = {f"init.{p}" for p in INIT_PARAMS[kind] | {"seed"}}
        for key in v:
            if key not in known and key not in allowed_init:
                raise ConfigError(f"unknown configuration key {key!r}")
        for key in ("grid.n1", "grid.n2", "classifier.N0", "nash.members", "nash.n"):
            if not isinstance(v[key], int) or isinstance(v[key], bool):
                raise ConfigError(f"{key} must be an integer")
        for key in ("physics.dealias", "physics.advection", "physics.chemotaxis", "physics.diffusion",
                    "physics.diffusive_cap", "output.nash_ratio"):
            if not isinstance(v[key], bool):
                raise ConfigError(f"{key} must be true or false")
        for key in ("physics.g", "time.t_end", "time.cfl", "time.dt_max", "time.dt_min", "time.output_every",
                    "thresholds.blowup_linf", "thresholds.blowup_l2sq", "nash.a", "output.snapshot_every"):
            x = v[key]
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise ConfigError(f"{key} must be a finite number")
        if v["output.snapshot_every"] < 0:
            raise ConfigError("output.snapshot_every must be >= 0")
        if not isinstance(v["sweep.g_values"], list) or not v["sweep.g_values"]:
            raise ConfigError("sweep.g_values must be a non-empty list")
        if kind == "from_snapshot":
            path = v.get("init.path")
            if not isinstance(path, str) or not os.path.exists(path):
                raise ConfigError(f"init.path {path!r} does not exist")
        try:
            self.params()
            self.classifier()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def grid(self) -> Grid:
        return Grid(self.values["grid.n1"], self.values["grid.n2"])

    def params(self, g: float | None = None) -> SimParams:
        v = self.values
        return SimParams(
            grid=self.grid(),
            g=float(v["physics.g"] if g is None else g),
            t_end=float(v["time.t_end"]),
            cfl=float(v["time.cfl"]),
            dt_max=float(v["time.dt_max"]),
            dt_min=float(v["time.dt_min"]),
            blowup_linf=float(v["thresholds.blowup_linf"]),
            blowup_l2sq=float(v["thresholds.blowup_l2sq"]),
            dealias=v["physics.dealias"],
            output_every=float(v["time.output_every"]),
            advection=v["physics.advection"],
            chemotaxis=v["physics.chemotaxis"],
            diffusion=v["physics.diffusion"],
            diffusive_cap=v["physics.diffusive_cap"],
        )

    def classifier(self) -> ClassifierConfig:
        v = self.values
        return ClassifierConfig(
            N0=v["classifier.N0"],
            c1_g_over_N=v.get("classifier.c1_g_over_N"),
            C1_budget=v.get("classifier.C1_budget"),
        )
