"""Size and power of the shape test in the Gaussian limit experiment.

Each replication draws ``theta_hat = theta + Omega^(1/2) Z / sqrt(N)`` around
either ``theta = 0`` (least favorable null) or a violated ``theta`` whose negative
part has a fixed Euclidean norm ``c * sqrt(log n)`` spread over ``k`` random
coordinates, then runs the test with a plug-in ``Omega_hat``.

Random streams are keyed by (seed, design, n, N, violation, replication), so
results do not depend on the number of worker threads.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import qr

from . import const
from .errors import DegenerateInferenceError, InputError, SolverError
from .inference import NullDistribution, wald_statistic
from .linalg import sqrt_psd

Design = Literal["identity", "decay", "spike"]
Violation = Literal["null", "mild", "moderate", "strong"]
Plugin = Literal["exact", "sample"]


@dataclass(frozen=True)
class SimulationConfig:
    """Grid of experiment cells and the constants of the designs"""

    n_list: Tuple[int, ...] = const.SIM_N_LIST
    N_list: Tuple[int, ...] = const.SIM_SAMPLE_LIST
    designs: Tuple[str, ...] = const.SIM_DESIGNS
    violations: Tuple[str, ...] = const.SIM_VIOLATIONS
    reps: int = const.SIM_REPS
    level: float = const.SIM_LEVEL
    mc_reps: int = const.SIM_MC_REPS
    seed: int = const.SIM_SEED
    c_mild: float = const.SIM_C_MILD
    c_mod: float = const.SIM_C_MOD
    c_strong: float = const.SIM_C_STRONG
    plugin: Plugin = const.SIM_PLUGIN
    plugin_ridge: float = const.SIM_PLUGIN_RIDGE
    decay_gamma: float = const.SIM_DECAY_GAMMA
    spike_value: float = const.SIM_SPIKE_VALUE
    spike_count: Optional[int] = None
    bulk_low: float = const.SIM_BULK_LOW
    bulk_high: float = const.SIM_BULK_HIGH

    def __post_init__(self):
        for name in ("n_list", "N_list", "designs", "violations"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        for name in ("n_list", "N_list"):
            values = getattr(self, name)
            if not values or any(int(v) != v or v < 1 for v in values):
                raise InputError(f"simulation.{name} must be a non-empty list of counts >= 1")
        for name in ("reps", "mc_reps"):
            if getattr(self, name) < 1:
                raise InputError(f"simulation.{name} must be at least 1")
        if self.mc_reps < const.MC_REPS_MIN:
            raise InputError(f"simulation.mc_reps must be at least {const.MC_REPS_MIN}")
        if not 0.0 < self.level < 1.0:
            raise InputError("simulation.level must be in (0, 1)")
        if self.seed < 0:
            raise InputError("simulation.seed must be non-negative")
        unknown = set(self.designs) - set(const.SIM_DESIGNS)
        if not self.designs or unknown:
            raise InputError(f"simulation.designs must be a non-empty subset of {list(const.SIM_DESIGNS)}")
        unknown = set(self.violations) - set(const.SIM_VIOLATIONS)
        if not self.violations or unknown:
            raise InputError(f"simulation.violations must be a non-empty subset of {list(const.SIM_VIOLATIONS)}")
        if any(v != "null" for v in self.violations) and min(self.n_list) < 2:
            raise InputError("violations need n >= 2")
        if self.plugin not in ("exact", "sample"):
            raise InputError(f"Unknown plug-in {self.plugin!r}; expected exact or sample")
        for name in ("c_mild", "c_mod", "c_strong", "spike_value", "bulk_low"):
            if not getattr(self, name) > 0:
                raise InputError(f"simulation.{name} must be positive")
        if self.bulk_high < self.bulk_low:
            raise InputError("simulation.bulk_high must not be below simulation.bulk_low")
        if self.plugin_ridge < 0 or self.decay_gamma < 0:
            raise InputError("simulation.plugin_ridge and simulation.decay_gamma must be non-negative")
        if self.spike_count is not None and self.spike_count < 1:
            raise InputError("simulation.spike_count must be at least 1")

    def spikes(self, n: int) -> int:
        """Number of spiked eigenvalues for dimension ``n``"""
        if self.spike_count is not None:
            return min(self.spike_count, n)
        return min(n, max(const.SIM_SPIKE_MIN, math.ceil(const.SIM_SPIKE_FRACTION * n)))

    def constant(self, violation: str) -> float:
        return {"mild": self.c_mild, "moderate": self.c_mod, "strong": self.c_strong}[violation]

    def to_dict(self) -> Dict:
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix from the QR factorization of a Gaussian matrix"""
    Q, R = qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.where(np.diag(R) == 0.0, 1.0, np.diag(R)))


def design_eigenvalues(design: str, n: int, cfg: SimulationConfig) -> np.ndarray:
    if design == "identity":
        return np.ones(n)
    if design == "decay":
        return np.arange(1, n + 1, dtype=float) ** (-cfg.decay_gamma)
    if design == "spike":
        k = cfg.spikes(n)
        return np.concatenate([np.full(k, cfg.spike_value), np.linspace(cfg.bulk_low, cfg.bulk_high, n - k)])
    raise InputError(f"Unknown design {design!r}; expected one of {list(const.SIM_DESIGNS)}")


def make_covariance(design: str, n: int, cfg: SimulationConfig = None, seed: int = const.SIM_SEED) -> np.ndarray:
    """True covariance of a design: ``U diag(eigenvalues) U^T`` with a seeded random rotation (none for identity)"""
    if n < 1:
        raise InputError("n must be at least 1")
    cfg = SimulationConfig() if cfg is None else cfg
    eigenvalues = design_eigenvalues(design, n, cfg)
    if design == "identity":
        return np.eye(n)
    rng = np.random.default_rng(np.random.SeedSequence([seed, const.SIM_DESIGNS.index(design), n]))
    U = random_orthogonal(n, rng)
    omega = (U * eigenvalues) @ U.T
    return 0.5 * (omega + omega.T)


def make_violation(violation: str, n: int, cfg: SimulationConfig = None, rng=None) -> Tuple[np.ndarray, float]:
    """Support and size of the negative shift of a violated ``theta``.

    ``k = max(1, round(frac * n))`` coordinates are shifted by ``-delta`` with
    ``delta = c sqrt(log n) / sqrt(k)``, so the shift has norm ``c sqrt(log n)`` at every level.
    """
    cfg = SimulationConfig() if cfg is None else cfg
    if violation == "null":
        return np.zeros(0, dtype=int), 0.0
    if violation not in const.VIOLATION_FRACTIONS:
        raise InputError(f"Unknown violation level {violation!r}; expected one of {list(const.SIM_VIOLATIONS)}")
    if n < 2:
        raise InputError("violations need n >= 2")
    rng = np.random.default_rng(rng)
    k = max(1, math.floor(const.VIOLATION_FRACTIONS[violation] * n + 0.5))
    delta = cfg.constant(violation) * math.sqrt(math.log(n)) / math.sqrt(k)
    support = np.sort(rng.choice(n, size=k, replace=False))
    return support, delta


@dataclass(frozen=True)
class SimulationRow:
    design: str
    n: int
    N: int
    violation: str
    reps: int
    rejection_rate: float
    mc_stderr: float


@dataclass(frozen=True)
class SimulationResult:
    rows: List[SimulationRow]
    config: SimulationConfig
    failures: Dict[str, int] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.rows], columns=list(const.SIMULATION_CSV_COLUMNS))

    def to_csv(self) -> str:
        return self.to_frame().to_csv(index=False, float_format=const.CSV_FLOAT_FORMAT, lineterminator="\n")

    def metadata(self) -> Dict:
        return {
            "format_version": const.FORMAT_VERSION,
            "config": self.config.to_dict(),
            "spike_counts": {str(n): self.config.spikes(n) for n in self.config.n_list},
            "failures": dict(self.failures),
        }


def _cell_key(cfg: SimulationConfig, design: str, n: int, N: int, violation: str) -> List[int]:
    return [cfg.seed, const.SIM_DESIGNS.index(design), n, N, const.SIM_VIOLATIONS.index(violation)]


def _replicate(cfg: SimulationConfig, design: str, n: int, N: int, violation: str, rep: int, root: np.ndarray, omega: np.ndarray, null: Optional[NullDistribution]) -> bool:
    rng = np.random.default_rng(np.random.SeedSequence(_cell_key(cfg, design, n, N, violation) + [rep]))
    theta = np.zeros(n)
    support, delta = make_violation(violation, n, cfg, rng)
    theta[support] -= delta
    theta_hat = theta + root @ rng.standard_normal(n) / math.sqrt(N)
    if cfg.plugin == "exact":
        omega_hat = omega
    else:
        draws = rng.standard_normal((N, n)) @ root
        omega_hat = np.atleast_2d(np.cov(draws, rowvar=False))
        omega_hat = omega_hat + cfg.plugin_ridge * np.trace(omega_hat) / n * np.eye(n)
        null = NullDistribution.simulate(omega_hat, reps=cfg.mc_reps, seed=int(rng.integers(0, 2**63 - 1)))
    W = wald_statistic(theta_hat, omega_hat, N).W_N
    return null.pvalue(W) <= cfg.level


def run_cell(cfg: SimulationConfig, design: str, n: int, N: int, violation: str, omega: np.ndarray, threads: int = 1, progress=None) -> Tuple[SimulationRow, int]:
    """All replications of one cell; returns the row and the number of failed replications"""
    root = sqrt_psd(omega)
    null = None
    if cfg.plugin == "exact":
        null_seed = int(np.random.SeedSequence(_cell_key(cfg, design, n, N, violation)).generate_state(1)[0])
        null = NullDistribution.simulate(omega, reps=cfg.mc_reps, seed=null_seed)

    def one(rep: int) -> Optional[bool]:
        try:
            return _replicate(cfg, design, n, N, violation, rep, root, omega, null)
        except (SolverError, DegenerateInferenceError) as exc:
            logging.warning("Replication %d of cell %s/n=%d/N=%d/%s failed: %s", rep, design, n, N, violation, exc)
            return None
        finally:
            if progress is not None:
                progress.update(1)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(cfg.reps)))
    else:
        outcomes = [one(rep) for rep in range(cfg.reps)]
    failures = sum(1 for o in outcomes if o is None)
    done = cfg.reps - failures
    rejections = sum(1 for o in outcomes if o)
    if done:
        rate = rejections / done
        stderr = math.sqrt(rate * (1.0 - rate) / done)
    else:
        rate = stderr = float("nan")
    return SimulationRow(design, n, N, violation, done, rate, stderr), failures


def run_experiment(cfg: SimulationConfig, threads: int = 1, progress: bool = False) -> SimulationResult:
    """Run every (design, n, N, violation) cell of the configuration.

    Args:
        cfg: experiment configuration
        threads: worker threads for the replications of a cell; results do not depend on it
        progress: show a tqdm progress bar

    Returns:
        SimulationResult, one row per cell in configuration order
    """
    cells = [(design, n, N, violation) for design in cfg.designs for n in cfg.n_list for N in cfg.N_list for violation in cfg.violations]
    bar = None
    if progress:
        from tqdm import tqdm  # type: ignore

        bar = tqdm(total=len(cells) * cfg.reps, desc="replications")
    rows = []
    failures = {}
    covariances = {}
    try:
        for design, n, N, violation in cells:
            if (design, n) not in covariances:
                covariances[(design, n)] = make_covariance(design, n, cfg, cfg.seed)
            logging.info("Simulating cell design=%s n=%d N=%d violation=%s (%d replications)", design, n, N, violation, cfg.reps)
            row, failed = run_cell(cfg, design, n, N, violation, covariances[(design, n)], threads, bar)
            if failed:
                logging.warning("%d of %d replications failed in cell %s/n=%d/N=%d/%s", failed, cfg.reps, design, n, N, violation)
                failures[f"{design}/{n}/{N}/{violation}"] = failed
            logging.info("Cell design=%s n=%d N=%d violation=%s: rejection rate %.4f", design, n, N, violation, row.rejection_rate)
            rows.append(row)
    finally:
        if bar is not None:
            bar.close()
    return SimulationResult(rows=rows, config=cfg, failures=failures)
