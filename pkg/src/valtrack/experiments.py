"""Reproduction harnesses: threshold bisection, ternary sweeps over the
trader simplex, commitment grids and multi-valuation runs.

Every run is seeded by folding its task indices into the master seed
(seeding.mix_seed), so results are reproducible bit-for-bit and independent
of worker count or scheduling. Aggregation is keyed by task index.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from . import analysis, metrics
from .engine import RunResult, run
from .errors import ConfigError
from .metrics import CrashPredicate, Histogram
from .params import CommitmentParams, MarketParams
from .seeding import mix_seed, rng_for
from .traders import (KIND_VAL, VALUATION_FIXED, VALUATION_GAMMA,
                      PopulationSpec, init_population)

DESK_PRESET = {"resolution": 20, "replicates": 20}
FULL_PRESET = {"resolution": 99, "replicates": 100}


@dataclass(frozen=True, slots=True)
class ExperimentConfig:
    """Everything a seeded experiment needs."""

    market: MarketParams = field(default_factory=MarketParams)
    commitments: CommitmentParams = field(default_factory=CommitmentParams)
    population: PopulationSpec = field(default_factory=PopulationSpec)
    crash: CrashPredicate = field(default_factory=CrashPredicate.deciblack_drop)
    m0: float = -0.001
    seed: int = 0
    replicates: int = 20

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")


def run_once(config: ExperimentConfig, seed: int | None = None,
             stop_at_crash: bool = False) -> RunResult:
    """One seeded run of the configured population."""
    task_seed = config.seed if seed is None else seed
    state = init_population(config.population, m0=config.m0,
                            rng=rng_for(task_seed, 0))
    return run(state, config.market, config.commitments, seed=mix_seed(task_seed, 1),
               crash=config.crash, stop_at_crash=stop_at_crash)


# --- threshold bisection -----------------------------------------------------

def _crash_outcome(config: ExperimentConfig, theta: float) -> bool:
    """Does the crash predicate fire at momentum-trader wealth share theta?

    The valuation side receives the remaining wealth after the configured
    random-trader share. Deterministic populations use a single run;
    with a random trader the majority outcome over config.replicates wins.
    """
    rand_frac = config.population.rand_frac
    val_frac = 1.0 - theta - rand_frac
    if val_frac < -1e-12:
        raise ConfigError(f"theta {theta} plus rand fraction {rand_frac} exceeds 1")
    population = config.population.with_mix(max(val_frac, 0.0), theta, rand_frac)
    cfg = replace(config, population=population)
    stochastic = rand_frac > 0.0 or population.valuation != VALUATION_FIXED
    reps = config.replicates if stochastic else 1
    crashes = 0
    for rep in range(reps):
        seed = mix_seed(config.seed, int(round(theta * 1e8)), rep)
        result = run_once(cfg, seed=seed, stop_at_crash=True)
        if result.crash_step is not None:
            crashes += 1
    return 2 * crashes > reps


def threshold_search(config: ExperimentConfig, lo: float = 0.0, hi: float = 1.0,
                     tol: float = 5e-4) -> float:
    """Smallest momentum-trader wealth share whose crash predicate fires,
    found by bisection; returns the crashing end of the final bracket.

    If the outcome is constant over [lo, hi] the threshold is reported at
    the corresponding boundary (lo when even lo crashes, hi when even hi
    does not). A configured random-trader share bounds hi by the wealth it
    leaves available.
    """
    if not (0.0 <= lo < hi <= 1.0):
        raise ConfigError(f"need 0 <= lo < hi <= 1, got {lo}, {hi}")
    hi = min(hi, 1.0 - config.population.rand_frac)
    if hi <= lo:
        raise ConfigError(f"random-trader share {config.population.rand_frac} "
                          f"leaves no room above lo={lo}")
    if _crash_outcome(config, lo):
        return lo
    if not _crash_outcome(config, hi):
        return hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _crash_outcome(config, mid):
            hi = mid
        else:
            lo = mid
    return hi


# --- ternary sweep -----------------------------------------------------------

@dataclass(frozen=True, slots=True)
class TernaryPoint:
    val_frac: float
    mo_frac: float
    rand_frac: float
    mean_drop: float
    crash_freq: float
    boom_freq: float


@dataclass(frozen=True, slots=True)
class TernaryGrid:
    resolution: int
    replicates: int
    points: tuple

    def __post_init__(self):
        expected = (self.resolution + 1) * (self.resolution + 2) // 2
        if len(self.points) != expected:
            raise ConfigError(f"expected {expected} simplex points, got {len(self.points)}")


def simplex_points(resolution: int):
    """All (val, mo, rand) fractions with denominators `resolution`."""
    pts = []
    for i in range(resolution + 1):          # val
        for j in range(resolution + 1 - i):  # mo
            k = resolution - i - j           # rand
            pts.append((i / resolution, j / resolution, k / resolution))
    return pts


def _ternary_point_task(args):
    config, index, point, replicates = args
    val, mo, rand = point
    population = config.population.with_mix(val, mo, rand)
    cfg = replace(config, population=population)
    drops = []
    crashes = 0
    booms = 0
    for rep in range(replicates):
        seed = mix_seed(config.seed, index, rep)
        result = run_once(cfg, seed=seed)
        drops.append(metrics.max_relative_drop(result.prices))
        if result.crash_step is not None:
            crashes += 1
        if result.boom_step is not None:
            booms += 1
    return TernaryPoint(val, mo, rand, math.fsum(drops) / replicates,
                        crashes / replicates, booms / replicates)


def ternary_sweep(config: ExperimentConfig, resolution: int,
                  replicates: int | None = None,
                  workers: int | None = None) -> TernaryGrid:
    """Simulate every simplex point and aggregate drop/crash/boom statistics.

    Per-replicate seeds derive from (master seed, point index, replicate),
    so the grid is identical for any worker count.
    """
    if resolution < 1:
        raise ConfigError("resolution must be >= 1")
    reps = config.replicates if replicates is None else replicates
    points = simplex_points(resolution)
    tasks = [(config, i, pt, reps) for i, pt in enumerate(points)]
    results = _run_tasks(_ternary_point_task, tasks, workers)
    return TernaryGrid(resolution, reps, tuple(results))


def _run_tasks(fn, tasks, workers: int | None):
    """Execute tasks preserving submission order; workers > 1 forks a pool."""
    if workers is None or workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


# --- commitment grid ---------------------------------------------------------

@dataclass(frozen=True, slots=True)
class GridCell:
    k_buy: float
    k_sell: float
    theta_analytic: float
    theta_sim: float
    settlement: str


@dataclass(frozen=True, slots=True)
class CommitmentGrid:
    cells: tuple
    settlement: str


def _grid_cell_task(args):
    config, k_buy, k_sell, tol = args
    commitments = CommitmentParams(kv_buy=k_buy, kv_sell=k_sell,
                                   km_buy=k_buy, km_sell=k_sell,
                                   kr_buy=config.commitments.kr_buy,
                                   kr_sell=config.commitments.kr_sell)
    cfg = replace(config, commitments=commitments,
                  crash=CrashPredicate.drop_below(0.01),
                  population=config.population.with_mix(1.0, 0.0, 0.0))
    constants = analysis.AnalysisConstants.from_params(cfg.market, commitments)
    theta_analytic = analysis.mo_crash_threshold_analytic(constants, cfg.market.rho)
    theta_sim = threshold_search(cfg, tol=tol)
    return GridCell(k_buy, k_sell, theta_analytic, theta_sim,
                    cfg.market.settlement)


def commitment_grid(config: ExperimentConfig, k_plus_range=(0.02, 0.30),
                    k_minus_range=(0.02, 0.30), cells: int = 10,
                    tol: float = 5e-4, workers: int | None = None) -> CommitmentGrid:
    """Analytic versus simulated crash thresholds over a commitment grid.

    Buy and sell commitments are kept equal across the two traders, the
    population is Val/Mo only, the crash is a fall below 0.01 and the
    initial momentum comes from the config (the reference setup uses
    -0.001). Settlement follows config.market.settlement.
    """
    if cells < 1:
        raise ConfigError("cells must be >= 1")
    for lo, hi in (k_plus_range, k_minus_range):
        if not (0.0 < lo <= hi <= 1.0):
            raise ConfigError("commitment ranges must lie within (0, 1]")
    k_plus = _linspace(k_plus_range[0], k_plus_range[1], cells)
    k_minus = _linspace(k_minus_range[0], k_minus_range[1], cells)
    tasks = [(config, kp, km, tol) for kp in k_plus for km in k_minus]
    results = _run_tasks(_grid_cell_task, tasks, workers)
    return CommitmentGrid(tuple(results), config.market.settlement)


def _linspace(lo: float, hi: float, n: int):
    if n == 1:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


# --- impact-function comparison ----------------------------------------------

@dataclass(frozen=True, slots=True)
class ImpactReport:
    ratio_threshold: float
    powerlaw_linear_threshold: float    # zeta = 1
    powerlaw_concave_threshold: float   # zeta = 0.8


def impact_comparison(config: ExperimentConfig, tol: float = 5e-4) -> ImpactReport:
    """Crash thresholds under the ratio-power impact and the power-law
    impact with zeta = 1 and zeta = 0.8 (liquidity 1)."""
    def with_impact(**kw):
        return replace(config, market=replace(config.market, **kw))
    return ImpactReport(
        ratio_threshold=threshold_search(with_impact(impact="ratio"), tol=tol),
        powerlaw_linear_threshold=threshold_search(
            with_impact(impact="powerlaw", zeta=1.0, liquidity=1.0), tol=tol),
        powerlaw_concave_threshold=threshold_search(
            with_impact(impact="powerlaw", zeta=0.8, liquidity=1.0), tol=tol),
    )


# --- multi-valuation runs ----------------------------------------------------

@dataclass(slots=True)
class MultivalReport:
    result: RunResult
    valuations: tuple
    histogram: Histogram
    max_tau_vs_mean: float
    val_wealth_var_start: float
    val_wealth_var_end: float


def multival_run(config: ExperimentConfig, n_vals: int = 10,
                 horizon: int = 1000) -> MultivalReport:
    """One gamma-valuation run tracking each valuation trader's wealth.

    The price-level histogram and the tracking error against the sample
    mean of the valuations come along for the plotting-oriented summaries.
    """
    if n_vals < 1:
        raise ConfigError("need at least one valuation trader")
    population = replace(config.population, valuation=VALUATION_GAMMA)
    total_val = math.fsum(population.val_fracs)
    population = population.with_mix(total_val, population.mo_frac,
                                     population.rand_frac, n_vals=n_vals)
    market = replace(config.market, horizon=horizon)
    cfg = replace(config, population=population, market=market)
    result = run_once(cfg)

    state = result.final_state
    valuations = tuple(t.valuation for t in state.traders if t.kind == KIND_VAL)
    hist = metrics.price_level_histogram(result.prices, valuations)
    mean_val = math.fsum(valuations) / len(valuations)
    max_tau = max(metrics.tau(p, mean_val) for p in result.prices)

    val_idx = [i for i, t in enumerate(state.traders) if t.kind == KIND_VAL]
    w0 = [result.wealth[0][i] for i in val_idx]
    w1 = [result.wealth[-1][i] for i in val_idx]
    return MultivalReport(result=result, valuations=valuations, histogram=hist,
                          max_tau_vs_mean=max_tau,
                          val_wealth_var_start=_variance(w0),
                          val_wealth_var_end=_variance(w1))


def _variance(xs):
    n = len(xs)
    mean = math.fsum(xs) / n
    return math.fsum((x - mean) ** 2 for x in xs) / n


# --- CSV schemas ---------------------------------------------------------------

def ternary_csv_rows(grid: TernaryGrid):
    yield ["val_frac", "mo_frac", "rand_frac", "mean_drop", "crash_freq", "boom_freq"]
    for p in grid.points:
        yield [repr(p.val_frac), repr(p.mo_frac), repr(p.rand_frac),
               repr(p.mean_drop), repr(p.crash_freq), repr(p.boom_freq)]


def grid_csv_rows(grid: CommitmentGrid):
    yield ["k_buy", "k_sell", "theta_analytic", "theta_sim", "settlement"]
    for c in grid.cells:
        yield [repr(c.k_buy), repr(c.k_sell), repr(c.theta_analytic),
               repr(c.theta_sim), c.settlement]


def run_csv_rows(result: RunResult):
    n_traders = len(result.wealth[0])
    yield (["time", "price", "momentum", "q_p", "q_s", "executed", "cap_hit"]
           + [f"wealth_{i}" for i in range(n_traders)])
    yield ([repr(0), repr(result.prices[0]), repr(result.momenta[0]),
            repr(0.0), repr(0.0), repr(0.0), "0"]
           + [repr(w) for w in result.wealth[0]])
    for t, rec in enumerate(result.records, start=1):
        yield ([repr(t), repr(result.prices[t]), repr(result.momenta[t]),
                repr(rec.q_p), repr(rec.q_s), repr(rec.executed),
                "1" if rec.cap_hit else "0"]
               + [repr(w) for w in result.wealth[t]])


def fixed_point_csv_rows(reports):
    """Rows of (kv_buy, km_sell, alpha_minus, exists, theta) tuples."""
    yield ["kv_buy", "km_sell", "alpha_minus", "exists", "theta"]
    for kv_buy, km_sell, report, theta in reports:
        yield [repr(kv_buy), repr(km_sell), repr(report.selected),
               "1" if report.exists else "0", repr(theta)]


def histogram_csv_rows(hist: Histogram):
    yield ["bin_center_sd", "relative_frequency"]
    for c, f in zip(hist.bin_centers, hist.frequencies):
        yield [repr(c), repr(f)]
