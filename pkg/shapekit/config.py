"""Run configuration: a flat ``key = value`` text file validated against a packaged JSON schema.

Values are read as JSON literals where possible (``1e-3``, ``true``, ``[0.01, 0.05]``,
``null``) and as bare strings otherwise. ``#`` starts a comment. Example::

    lambda = 0.1
    s = 1
    kernel.lengthscale = 0.5
    test.alpha_index = 1
    test.levels = [0.05]
"""

import json
import logging
import pkgutil
import re
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional

from jsonschema import Draft7Validator

from . import const
from .errors import InputError
from .kernel import KernelModel
from .simulation import SimulationConfig

_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*$")
_TEXT_KEYS = frozenset({"test.alpha_index"})

DEFAULTS: Dict[str, Any] = {
    "kernel.family": const.KERNEL_FAMILY,
    "kernel.lengthscale": const.KERNEL_LENGTHSCALE,
    "lambda": None,
    "s": const.ORDER_S,
    "active": "auto",
    "weights.preset": const.WEIGHT_PRESET,
    "rank_tol": const.RANK_TOL,
    "max_rank": const.MAX_RANK,
    "nnls.kkt_tol": const.NNLS_KKT_TOL,
    "omega.jitter": const.OMEGA_JITTER,
    "solver.path": const.SOLVER_PATH,
    "solver.dense_max_m": const.DENSE_MAX_M,
    "threads": const.THREADS,
    "test.alpha_index": const.TEST_ALPHA_INDEX,
    "test.direction": const.TEST_DIRECTION,
    "test.mc_reps": const.MC_REPS,
    "test.seed": const.TEST_SEED,
    "test.levels": list(const.TEST_LEVELS),
    "simulation.n_list": list(const.SIM_N_LIST),
    "simulation.N_list": list(const.SIM_SAMPLE_LIST),
    "simulation.designs": list(const.SIM_DESIGNS),
    "simulation.violations": list(const.SIM_VIOLATIONS),
    "simulation.reps": const.SIM_REPS,
    "simulation.level": const.SIM_LEVEL,
    "simulation.mc_reps": const.SIM_MC_REPS,
    "simulation.seed": const.SIM_SEED,
    "simulation.c_mild": const.SIM_C_MILD,
    "simulation.c_mod": const.SIM_C_MOD,
    "simulation.c_strong": const.SIM_C_STRONG,
    "simulation.plugin": const.SIM_PLUGIN,
    "simulation.plugin_ridge": const.SIM_PLUGIN_RIDGE,
    "simulation.decay_gamma": const.SIM_DECAY_GAMMA,
    "simulation.spike_value": const.SIM_SPIKE_VALUE,
    "simulation.spike_count": None,
    "simulation.bulk_low": const.SIM_BULK_LOW,
    "simulation.bulk_high": const.SIM_BULK_HIGH,
}

_validator = None


def _load_json_schema(schema_file: str = const.CONFIG_SCHEMA_FILE) -> Dict:
    logging.debug("Loading configuration schema from %s", schema_file)
    return json.loads(pkgutil.get_data(__package__, schema_file))


def _schema_validator() -> Draft7Validator:
    global _validator  # pylint: disable=global-statement
    if _validator is None:
        _validator = Draft7Validator(_load_json_schema())
    return _validator


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except ValueError:
        return text


def parse_config_text(text: str) -> Dict[str, Any]:
    """Parse ``key = value`` lines into a flat mapping.

    Raises:
        InputError: on a line without ``=``, a malformed key or a repeated key; the message names the line
    """
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if " #" in line:
            line = line.split(" #", 1)[0].rstrip()
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise InputError(f"configuration line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if not _KEY.match(key):
            raise InputError(f"configuration line {lineno}: malformed key {key!r}")
        if key in values:
            raise InputError(f"configuration line {lineno}: key {key!r} is repeated")
        parsed = _parse_value(value)
        if key in _TEXT_KEYS and parsed is not None and not isinstance(parsed, str):
            # multi-indices such as 1.10 must not round-trip through a float
            parsed = value
        values[key] = parsed
    return values


def validate(values: Mapping[str, Any]) -> None:
    """Check a flat mapping against the packaged schema and the lambda constraint"""
    errors = sorted(_schema_validator().iter_errors(dict(values)), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = ".".join(str(p) for p in err.absolute_path) or "configuration"
        raise InputError(f"invalid configuration at {where}: {err.message}")
    lam = values.get("lambda")
    if lam is not None and not lam > 0:
        raise InputError("lambda must be positive")


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration, echoed into every output"""

    values: Dict[str, Any] = field(default_factory=lambda: dict(DEFAULTS))

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    def to_dict(self) -> Dict[str, Any]:
        out = {"format_version": const.FORMAT_VERSION}
        out.update({key: self.values[key] for key in sorted(self.values)})
        return out

    def dumps(self) -> str:
        """Dotted text that :py:func:`parse_config_text` reads back to the same mapping"""
        return "".join(f"{key} = {json.dumps(self.values[key])}\n" for key in sorted(self.values))

    def require_lambda(self) -> float:
        lam = self.values.get("lambda")
        if lam is None:
            raise InputError("lambda is required for fitting; set 'lambda = <positive number>'")
        return float(lam)


def load_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None, text: Optional[str] = None) -> RunConfig:
    """Merge defaults, a config file (or text) and overrides, then validate.

    ``None`` values in ``overrides`` are ignored so unset command-line flags do not mask the file.
    """
    values = dict(DEFAULTS)
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as ifh:
                text = ifh.read()
        except OSError as exc:
            raise InputError(f"cannot read configuration {path}: {exc}") from exc
    if text is not None:
        values.update(parse_config_text(text))
    for key, value in (overrides or {}).items():
        if value is not None:
            logging.info("Configuration override %s = %r", key, value)
            values[key] = value
    validate(values)
    return RunConfig(values=values)


def kernel_from_config(config: RunConfig) -> KernelModel:
    return KernelModel(family=config["kernel.family"], lengthscale=config["kernel.lengthscale"], s_max=const.S_MAX)


def simulation_config(config: RunConfig) -> SimulationConfig:
    """The ``simulation.*`` keys as a :py:class:`shapekit.simulation.SimulationConfig`"""
    prefix = "simulation."
    return SimulationConfig(**{key[len(prefix) :]: value for key, value in config.values.items() if key.startswith(prefix)})
