"""Config parsing and validation for the experiment driver.

Configs are plain JSON objects; every key is checked against the command's
schema and unknown keys are rejected with their dotted path, so typos fail
fast instead of silently falling back to defaults.
"""
from __future__ import annotations

import numpy as np

from .density import DensityModel, density_from_config
from .pairwise import PairwiseConfig
from .transport import KernelSpec, TransportConfig

__all__ = ["ConfigError", "Section", "build_density", "build_pairwise_config",
           "build_transport_config"]

_REQUIRED = object()


class ConfigError(ValueError):
    """Invalid configuration; carries the dotted path of the offending key."""

    def __init__(self, message, path=""):
        self.path = path
        where = f" at '{path}'" if path else ""
        super().__init__(f"config error{where}: {message}")


class Section:
    """One object level of the config with typed, consumed-key access."""

    def __init__(self, data, path=""):
        if not isinstance(data, dict):
            raise ConfigError("expected an object", path)
        self._data = dict(data)
        self._path = path

    def _sub(self, key):
        return f"{self._path}.{key}" if self._path else key

    def get(self, key, kind, default=_REQUIRED, positive=False):
        if key not in self._data:
            if default is _REQUIRED:
                raise ConfigError("missing required key", self._sub(key))
            return default
        value = self._data.pop(key)
        path = self._sub(key)
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError("expected a number", path)
            value = float(value)
        elif kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError("expected an integer", path)
        elif kind is bool:
            if not isinstance(value, bool):
                raise ConfigError("expected true/false", path)
        elif kind is str:
            if not isinstance(value, str):
                raise ConfigError("expected a string", path)
        elif kind is list:
            if not isinstance(value, list):
                raise ConfigError("expected a list", path)
        if positive and isinstance(value, (int, float)) and value <= 0:
            raise ConfigError("must be positive", path)
        return value

    def get_number_or_auto(self, key, default=_REQUIRED):
        if key not in self._data:
            if default is _REQUIRED:
                raise ConfigError("missing required key", self._sub(key))
            return default
        value = self._data.pop(key)
        path = self._sub(key)
        if value == "auto":
            return "auto"
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError("expected a positive number or 'auto'", path)
        if value <= 0:
            raise ConfigError("must be positive", path)
        return float(value)

    def section(self, key, default_empty=False):
        if key not in self._data:
            if default_empty:
                return Section({}, self._sub(key))
            raise ConfigError("missing required section", self._sub(key))
        return Section(self._data.pop(key), self._sub(key))

    def has(self, key):
        return key in self._data

    def finish(self):
        if self._data:
            keys = ", ".join(sorted(self._data))
            raise ConfigError(f"unknown key(s): {keys}", self._path or "<root>")


def point_list(value, path, dim=2):
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != dim or not np.all(np.isfinite(arr)):
        raise ConfigError(f"expected a list of finite {dim}-d points", path)
    return arr


def point(value, path, dim=2):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (dim,) or not np.all(np.isfinite(arr)):
        raise ConfigError(f"expected one finite {dim}-d point", path)
    return arr


def build_density(sec: Section) -> DensityModel:
    kind = sec.get("kind", str)
    try:
        if kind == "gaussian":
            model = density_from_config({"kind": "gaussian",
                                         "dim": sec.get("dim", int, 2)})
        elif kind == "constant":
            model = density_from_config({"kind": "constant",
                                         "value": sec.get("value", float, 1.0, positive=True),
                                         "dim": sec.get("dim", int, 2)})
        elif kind == "ring":
            model = density_from_config({
                "kind": "ring",
                "sigma": sec.get("sigma", float, 0.2, positive=True),
                "z_min": sec.get("z_min", float, 0.0),
                "z_max": sec.get("z_max", float, 2.0 * np.pi),
                "n_z": sec.get("n_z", int, 64, positive=True),
                "c_rho": sec.get("c_rho", float, 1.0, positive=True)})
        elif kind == "mixture":
            comps = sec.get("components", list)
            parsed = []
            for i, comp in enumerate(comps):
                csec = Section(comp, f"{sec._path}.components[{i}]")
                parsed.append({
                    "weight": csec.get("weight", float, positive=True),
                    "mean": point(csec.get("mean", list), f"{csec._path}.mean"),
                    "sigma": csec.get("sigma", float, positive=True)})
                csec.finish()
            model = density_from_config({"kind": "mixture", "components": parsed})
        else:
            raise ConfigError(f"unknown density kind {kind!r}", sec._path)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), sec._path) from exc
    sec.finish()
    return model


def build_pairwise_config(sec: Section) -> PairwiseConfig:
    cfg = PairwiseConfig(
        alpha=sec.get("alpha", float, 1.0),
        lam=sec.get("lambda", float, 1e5),
        eta=sec.get("eta", float, 0.1),
        n_cheb=sec.get("n_cheb", int, 10),
        quad_order=sec.get("quad_order", int, 50),
        max_iters=sec.get("max_iters", int, 20000),
        grad_tol=sec.get("grad_tol", float, 1e-6),
        backtracking=sec.get("backtracking", bool, True))
    sec.finish()
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc), sec._path) from exc
    return cfg


def build_transport_config(sec: Section, seed: int) -> TransportConfig:
    ksec = sec.section("kernel", default_empty=True)
    bandwidth = ksec.get("bandwidth", None, "median")
    if bandwidth != "median":
        if isinstance(bandwidth, bool) or not isinstance(bandwidth, (int, float)) \
                or bandwidth <= 0:
            raise ConfigError("expected a positive number or 'median'",
                              f"{ksec._path}.bandwidth")
        bandwidth = float(bandwidth)
    kernel = KernelSpec(kind=ksec.get("kind", str, "rbf"), bandwidth=bandwidth)
    ksec.finish()
    cfg = TransportConfig(
        alpha=sec.get("alpha", float, 1.0),
        eta=sec.get("eta", float, 0.1),
        max_iters=sec.get("max_iters", int, 20000),
        grad_tol=sec.get("grad_tol", float, 1e-6),
        lambda0=sec.get_number_or_auto("lambda0", 1e4),
        lambda1=sec.get_number_or_auto("lambda1", 1e4),
        n_cheb=sec.get("n_cheb", int, 10),
        quad_order=sec.get("quad_order", int, 50),
        kernel=kernel,
        seed=seed,
        init_jitter=sec.get("init_jitter", float, 0.0),
        backtracking=sec.get("backtracking", bool, True),
        refit_every=sec.get("refit_every", int, 0),
        sigma_star=sec.get("sigma_star", float, 1.0))
    sec.finish()
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc), sec._path) from exc
    return cfg
