"""INI-style run configuration.

Sections and keys (``None`` defaults defer to the experiment's own choice)::

    [problem]  kind, epsilon, beta, c, potential, supg_delta, bc
    [mesh]     domain, h, n, l_max
    [lambda]   re, im
    [scheme]   fd_scheme, weighting, mass, powers, m_max, eps_tol, tau, cycles,
               pseudo_eps, n_angles, n_rays, rank_tol, n_random, seed
    [solver]   tol, max_iter, start_vector
    [output]   directory, id, svg

Unknown sections or keys raise ``ConfigError``.
"""
from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path

from gammah.errors import ConfigError
from gammah.linalg import SolverConfig


def parse_float(text: str) -> float:
    """Float that also accepts powers written as ``2^-4``."""
    t = text.strip()
    m = re.fullmatch(r"([+-]?\d+(?:\.\d*)?)\s*\^\s*([+-]?\d+)", t)
    if m:
        return float(m.group(1)) ** int(m.group(2))
    try:
        return float(t)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def parse_float_list(text: str) -> list:
    items = [s for s in re.split(r"[,\s]+", text.strip()) if s]
    if not items:
        raise ConfigError("empty list")
    return [parse_float(s) for s in items]


def parse_int_list(text: str) -> list:
    out = []
    for v in parse_float_list(text):
        if v != int(v):
            raise ConfigError(f"expected an integer, got {v}")
        out.append(int(v))
    return out


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text.strip() in ("", "none", "default") else parse_float(text)


def _opt_int(text):
    v = _opt_float(text)
    if v is not None and v != int(v):
        raise ConfigError(f"expected an integer, got {v}")
    return None if v is None else int(v)


def _str(text):
    return text.strip()


# section -> key -> (parser, default)
SCHEMA = {
    "problem": {
        "kind": (_str, None),
        "epsilon": (parse_float, None),
        "beta": (parse_float_list, None),
        "c": (parse_float, None),
        "potential": (parse_float, None),
        "supg_delta": (parse_float, None),
        "bc": (_str, None),
    },
    "mesh": {
        "domain": (_str, None),
        "h": (parse_float_list, None),
        "n": (parse_int_list, None),
        "l_max": (int, None),
    },
    "lambda": {
        "re": (parse_float, None),
        "im": (parse_float, None),
    },
    "scheme": {
        "fd_scheme": (_str, None),
        "weighting": (_str, None),
        "mass": (_str, None),
        "powers": (parse_int_list, None),
        "m_max": (int, None),
        "eps_tol": (parse_float, None),
        "tau": (parse_float, None),
        "cycles": (int, None),
        "pseudo_eps": (parse_float, None),
        "n_angles": (int, None),
        "n_rays": (int, None),
        "rank_tol": (_opt_float, None),
        "n_random": (int, None),
        "seed": (int, None),
    },
    "solver": {
        "tol": (parse_float, 1e-10),
        "max_iter": (_opt_int, None),
        "start_vector": (_str, "perturbed-ones"),
    },
    "output": {
        "directory": (_str, "results"),
        "id": (_str, None),
        "svg": (parse_bool, False),
    },
}


@dataclass
class ExperimentConfig:
    """Parsed configuration; ``values[section][key]`` holds explicit settings only."""

    values: dict = field(default_factory=dict)
    experiment_id: str | None = None

    def get(self, section: str, key: str, default=None):
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown configuration key [{section}] {key}")
        v = self.values.get(section, {}).get(key)
        if v is not None:
            return v
        schema_default = SCHEMA[section][key][1]
        return schema_default if schema_default is not None else default

    def set(self, section: str, key: str, value):
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"unknown configuration key [{section}] {key}")
        self.values.setdefault(section, {})[key] = value

    @property
    def solver(self) -> SolverConfig:
        try:
            return SolverConfig(tol=self.get("solver", "tol"),
                                max_iter=self.get("solver", "max_iter"),
                                start_vector=self.get("solver", "start_vector"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def output_dir(self) -> Path:
        return Path(self.get("output", "directory"))

    @property
    def lam(self) -> complex | None:
        re_, im_ = self.values.get("lambda", {}).get("re"), self.values.get("lambda", {}).get("im")
        if re_ is None and im_ is None:
            return None
        return complex(re_ or 0.0, im_ or 0.0)

    def validate(self):
        hs = self.values.get("mesh", {}).get("h")
        if hs is not None and not all(0 < h < 1 for h in hs):
            raise ConfigError("every h must lie in (0, 1)")
        ns = self.values.get("mesh", {}).get("n")
        if ns is not None and not all(n >= 1 for n in ns):
            raise ConfigError("every n must be >= 1")
        self.solver  # noqa: B018  (raises on bad solver settings)


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    cfg = ExperimentConfig()
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key [{section}] {key}")
            parser = SCHEMA[section][key][0]
            try:
                cfg.set(section, key, parser(raw))
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None
    cfg.experiment_id = cfg.values.get("output", {}).get("id")
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"configuration file not found: {p}")
    return parse_config(p.read_text())
