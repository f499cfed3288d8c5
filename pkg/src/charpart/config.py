"""TOML experiment files: a ``[run]`` table plus optional study tables.

Example::

    [run]
    flux = "quartic"
    domain = [-3.0, 3.0]
    n = 100
    t_end = 8.0
    output_times = [0.0, 0.25, 8.0]

    [run.ic]
    name = "gauss_cos"

    [converge]
    resolutions = [0.0234375, 0.01171875, 0.005859375]
    times = [0.25, 0.35]

Overrides use dotted keys (``run.d_min=0.01``); keys without a table prefix
address ``[run]``.
"""

import copy
import sys
from dataclasses import dataclass, field, fields

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigurationError
from .solver import RunConfig


@dataclass
class ConvergeConfig:
    resolutions: list = field(default_factory=list)  # spacings h
    times: list = field(default_factory=list)
    reference: str = "particle"  # or "fv"
    reference_factor: int = 8
    fv_cells: int = 80000
    fv_cfl: float = 0.9
    fit_levels: int = 3
    jobs: int = 1


@dataclass
class CompareConfig:
    times: list = field(default_factory=list)
    fv_cells: int = 60
    fv_second_order: bool = True
    fv_numerical_flux: str = "godunov"
    fv_cfl: float = 0.45
    reference_cells: int = 80000
    reference_cfl: float = 0.9


@dataclass
class ValidateConfig:
    average_samples: int = 200
    seed: int = 0
    tol_area: float = 1e-12
    tol_tv: float = 1e-12
    tol_entropy: float = 1e-10


@dataclass
class Experiment:
    run: RunConfig
    converge: ConvergeConfig
    compare: CompareConfig
    validate: ValidateConfig
    raw: dict

    def effective(self):
        return self.raw


def _parse_value(text):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def apply_override(raw, spec):
    """Set ``table.key=value`` (value in TOML syntax, bare words become strings)."""
    if "=" not in spec:
        raise ConfigurationError(f"override {spec!r} is not of the form key=value")
    key, value = spec.split("=", 1)
    path = key.strip().split(".")
    if len(path) == 1 or path[0] not in ("run", "converge", "compare", "validate"):
        path = ["run"] + path
    node = raw
    for part in path[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"override {spec!r} descends into a non-table")
    node[path[-1]] = _parse_value(value.strip())
    return raw


def _build(cls, table, name):
    table = dict(table or {})
    known = {f.name for f in fields(cls)}
    unknown = set(table) - known
    if unknown:
        raise ConfigurationError(f"unknown keys in [{name}]: {sorted(unknown)}")
    try:
        return cls(**table)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"bad [{name}] table: {exc}") from None


def from_dict(raw):
    raw = copy.deepcopy(raw)
    unknown = set(raw) - {"run", "converge", "compare", "validate"}
    if unknown:
        raise ConfigurationError(f"unknown tables: {sorted(unknown)}")
    if "run" not in raw:
        raise ConfigurationError("missing [run] table")
    run = _build(RunConfig, raw["run"], "run")
    return Experiment(
        run=run,
        converge=_build(ConvergeConfig, raw.get("converge"), "converge"),
        compare=_build(CompareConfig, raw.get("compare"), "compare"),
        validate=_build(ValidateConfig, raw.get("validate"), "validate"),
        raw=raw,
    )


def load(path, overrides=()):
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from None
    for spec in overrides:
        apply_override(raw, spec)
    return from_dict(raw)
