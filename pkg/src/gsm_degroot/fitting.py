"""Calibration of the model against an observed event-fraction series.

A candidate point (mu, gamma, r[, p]) is scored by simulating a two-block
surrogate population, comparing the simulated event-fraction series to the
data under a scale-invariant distance, and averaging over stochastic
replicates. A coarse grid pass seeds a handful of simulated-annealing
chains; the best point over all chains wins.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import ModelParams, PopulationSpec, simulate
from .graph import GenerationError, GraphGenSpec, generate
from .seeds import derive_seed, rng_from

DEFAULT_BOUNDS = {"mu": (-500.0, 500.0), "gamma": (0.0, 50.0), "r": (0.0, 0.5)}

AXIS_ORDER = ("mu", "gamma", "r", "p")


class FitError(RuntimeError):
    """The calibration pipeline could not produce a result."""


def scale_invariant_distance(data: np.ndarray, model: np.ndarray) -> tuple[float, float]:
    """Distance between series up to a non-negative scale factor.

    Returns (d, s) where s minimizes ||data - s * model||_2 over s >= 0,
    s = <data, model> / <model, model> clamped at zero (and zero for an
    all-zero model), and d is the residual norm divided by ||data||_2.
    """
    data = np.asarray(data, dtype=np.float64)
    model = np.asarray(model, dtype=np.float64)
    if data.shape != model.shape or data.ndim != 1:
        raise ValueError(f"series shapes differ: {data.shape} vs {model.shape}")
    data_norm = float(np.linalg.norm(data))
    if data_norm == 0.0:
        raise ValueError("data series has zero norm; the relative distance is undefined")
    denom = float(model @ model)
    s = max(float(data @ model) / denom, 0.0) if denom > 0.0 else 0.0
    d = float(np.linalg.norm(data - s * model)) / data_norm
    return d, s


@dataclass
class ParamSpace:
    """Box bounds and grid resolutions for the free parameters.

    Axes follow AXIS_ORDER; p (stubborn fraction) is present only when its
    bound is given. pinned maps parameter names to fixed values that are fed
    to every evaluation but never searched.
    """

    bounds: dict[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    resolution: dict[str, int] = field(default_factory=dict)
    pinned: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in self.bounds:
            if name not in AXIS_ORDER:
                raise ValueError(f"unknown parameter {name!r}; choose from {AXIS_ORDER}")
        for name in ("mu", "gamma", "r"):
            if name not in self.bounds and name not in self.pinned:
                raise ValueError(f"parameter {name!r} needs bounds or a pinned value")
        for name, (lo, hi) in self.bounds.items():
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
                raise ValueError(f"bounds for {name!r} must satisfy lo < hi, got ({lo}, {hi})")
        if "p" in self.bounds:
            lo, hi = self.bounds["p"]
            if lo < 0.0 or hi > 0.5:
                raise ValueError(f"stubborn-fraction bounds must stay within [0, 0.5], got ({lo}, {hi})")
        if "r" in self.bounds:
            lo, hi = self.bounds["r"]
            if lo < 0.0 or hi > 0.5:
                raise ValueError(f"r bounds must stay within [0, 0.5], got ({lo}, {hi})")
        overlap = set(self.bounds) & set(self.pinned)
        if overlap:
            raise ValueError(f"parameters both searched and pinned: {sorted(overlap)}")
        for name, res in self.resolution.items():
            if name not in self.bounds:
                raise ValueError(f"resolution given for unsearched parameter {name!r}")
            if res < 2:
                raise ValueError(f"resolution for {name!r} must be at least 2, got {res}")

    @property
    def axes(self) -> list[str]:
        return [name for name in AXIS_ORDER if name in self.bounds]

    def resolution_of(self, name: str) -> int:
        return self.resolution.get(name, 6)

    def centers(self, name: str) -> np.ndarray:
        lo, hi = self.bounds[name]
        k = self.resolution_of(name)
        edges = np.linspace(lo, hi, k + 1)
        return (edges[:-1] + edges[1:]) / 2.0

    def cell_widths(self) -> np.ndarray:
        return np.asarray([
            (self.bounds[name][1] - self.bounds[name][0]) / self.resolution_of(name)
            for name in self.axes
        ])

    def full_point(self, values: dict[str, float]) -> dict[str, float]:
        point = dict(self.pinned)
        point.update(values)
        return point


def default_space(with_stubbornness: bool = False, p_max: float = 0.5) -> ParamSpace:
    """Default search box; the stubbornness variant uses a coarser grid."""
    bounds = dict(DEFAULT_BOUNDS)
    resolution = {"mu": 6, "gamma": 6, "r": 6}
    if with_stubbornness:
        if not 0.0 < p_max <= 0.5:
            raise ValueError(f"p_max must lie in (0, 0.5], got {p_max!r}")
        bounds["p"] = (0.0, p_max)
        resolution = {"mu": 5, "gamma": 5, "r": 5, "p": 4}
    return ParamSpace(bounds=bounds, resolution=resolution)


@dataclass
class FitConfig:
    """Surrogate construction and search budget.

    The surrogate is a two-block sbm population whose blocks react with
    fixed positive fractions; its inter-block probability comes from the
    candidate point. score = mean_error + noise_weight * error_std over
    `replicates` runs. mode="expected" swaps event draws for their
    probabilities, removing sampling noise from the score surface; the
    surrogate graph and population are still resampled per replicate.
    """

    n: int = 100
    cluster_ratios: tuple[float, float] = (0.7, 0.3)
    cluster_positive_fractions: tuple[float, float] = (0.3, 0.7)
    intra_prob: float = 0.5
    lam: float = 0.01
    sigma: float = 1.0
    replicates: int = 5
    mode: str = "stochastic"
    noise_weight: float = 1.0
    restarts: int = 5
    anneal_iters: int = 2000
    initial_temp: float = 10.0
    cooling: float = 0.95
    neighborhood_volume: float = 0.001
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("stochastic", "expected"):
            raise ValueError(f"mode must be 'stochastic' or 'expected', got {self.mode!r}")
        if self.replicates < 1:
            raise ValueError(f"replicates must be at least 1, got {self.replicates}")
        if self.restarts < 1:
            raise ValueError(f"restarts must be at least 1, got {self.restarts}")
        if not 0.0 < self.neighborhood_volume < 1.0:
            raise ValueError(f"neighborhood_volume must lie in (0, 1), got {self.neighborhood_volume!r}")
        if not 0.0 < self.cooling < 1.0:
            raise ValueError(f"cooling must lie in (0, 1), got {self.cooling!r}")
        if self.initial_temp <= 0.0:
            raise ValueError(f"initial_temp must be positive, got {self.initial_temp!r}")
        if self.anneal_iters < 0:
            raise ValueError(f"anneal_iters must be non-negative, got {self.anneal_iters}")
        if self.noise_weight < 0.0:
            raise ValueError(f"noise_weight must be non-negative, got {self.noise_weight!r}")


@dataclass
class PointScore:
    score: float
    mean_error: float
    error_std: float
    mean_scale: float


def _point_seed_parts(point: dict[str, float]) -> list:
    # p = 0 hashes like an absent p, so the stubbornness search at p = 0
    # reproduces the plain three-parameter scores seed for seed
    parts: list = [float(point["mu"]), float(point["gamma"]), float(point["r"])]
    p = float(point.get("p", 0.0))
    if p > 0.0:
        parts.append(p)
    return parts


def evaluate_point(point: dict[str, float], data: np.ndarray, config: FitConfig) -> PointScore:
    """Score one candidate point against the data series.

    Each replicate samples a fresh surrogate graph and population with
    seeds derived from (config.seed, point, replicate), simulates one run
    of len(data) ticks, and measures the scale-invariant distance of its
    event-fraction series to the data.
    """
    data = np.asarray(data, dtype=np.float64)
    point_key = _point_seed_parts(point)
    r = float(point["r"])
    p = float(point.get("p", 0.0))
    params = ModelParams(lam=config.lam, gamma=float(point["gamma"]), mu=float(point["mu"]), sigma=config.sigma)
    pop_spec = PopulationSpec(
        positive_fraction=None,
        cluster_positive_fractions=config.cluster_positive_fractions,
        stubborn_fraction=p,
    )
    errors = np.empty(config.replicates)
    scales = np.empty(config.replicates)
    for rep in range(config.replicates):
        rep_seed = derive_seed(config.seed, "evaluate", *point_key, rep)
        try:
            graph = generate(GraphGenSpec(
                family="sbm",
                n=config.n,
                seed=derive_seed(rep_seed, "graph"),
                cluster_ratios=config.cluster_ratios,
                intra_prob=config.intra_prob,
                inter_prob=r,
            ))
        except GenerationError as exc:
            raise FitError(f"surrogate generation failed at {point}: {exc}") from exc
        population = pop_spec.build(
            graph.n, rng_from(rep_seed, "population"), params.mu, params.sigma, clusters=graph.clusters
        )
        trajectory = simulate(
            graph, population, params, data.size,
            seed=derive_seed(rep_seed, "simulate"), mode=config.mode,
        )
        errors[rep], scales[rep] = scale_invariant_distance(data, trajectory.event_fraction)
    mean_error = float(errors.mean())
    error_std = float(errors.std())
    return PointScore(
        score=mean_error + config.noise_weight * error_std,
        mean_error=mean_error,
        error_std=error_std,
        mean_scale=float(scales.mean()),
    )


@dataclass
class GridResult:
    axes: list[str]
    points: np.ndarray
    scores: np.ndarray
    mean_errors: np.ndarray
    error_stds: np.ndarray
    mean_scales: np.ndarray
    errors: list[tuple[int, str]]

    def best_index(self) -> int:
        if np.all(np.isnan(self.scores)):
            raise FitError("every grid cell failed")
        return int(np.nanargmin(self.scores))

    def point(self, index: int) -> dict[str, float]:
        return {name: float(v) for name, v in zip(self.axes, self.points[index])}


def _evaluate_task(args):
    point, data, config = args
    try:
        score = evaluate_point(point, data, config)
        return score, None
    except Exception as exc:  # noqa: BLE001 - recorded per cell
        return None, f"{type(exc).__name__}: {exc}"


def grid_explore(data: np.ndarray, space: ParamSpace, config: FitConfig, jobs: int = 1) -> GridResult:
    """Score the center of every grid cell; failures are recorded per cell."""
    axes = space.axes
    meshes = np.meshgrid(*[space.centers(name) for name in axes], indexing="ij")
    points = np.column_stack([m.ravel() for m in meshes])
    tasks = [
        (space.full_point({name: float(v) for name, v in zip(axes, row)}), data, config)
        for row in points
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_evaluate_task, tasks, chunksize=max(1, len(tasks) // (jobs * 4))))
    else:
        outcomes = [_evaluate_task(task) for task in tasks]
    n_cells = len(tasks)
    scores = np.full(n_cells, np.nan)
    mean_errors = np.full(n_cells, np.nan)
    error_stds = np.full(n_cells, np.nan)
    mean_scales = np.full(n_cells, np.nan)
    errors = []
    for i, (ps, err) in enumerate(outcomes):
        if err is not None:
            errors.append((i, err))
        else:
            scores[i] = ps.score
            mean_errors[i] = ps.mean_error
            error_stds[i] = ps.error_std
            mean_scales[i] = ps.mean_scale
    return GridResult(
        axes=list(axes), points=points, scores=scores,
        mean_errors=mean_errors, error_stds=error_stds, mean_scales=mean_scales,
        errors=errors,
    )


def _accept(delta: float, temp: float, rng: np.random.Generator) -> bool:
    """Metropolis rule: always downhill, uphill with probability exp(-delta/temp)."""
    if delta < 0.0:
        return True
    if temp <= 0.0:
        return False
    return rng.random() < math.exp(-delta / temp)


@dataclass
class AnnealTrace:
    points: list[dict[str, float]]
    scores: list[float]
    accepted: list[bool]
    temps: list[float]
    best_scores: list[float]
    failures: int = 0


def anneal(
    start: dict[str, float],
    data: np.ndarray,
    space: ParamSpace,
    config: FitConfig,
    seed: int,
    scorer=None,
) -> tuple[dict[str, float], float, AnnealTrace]:
    """Simulated annealing from one start point inside the search box.

    Proposals are uniform in an axis-aligned cuboid around the current
    point whose volume is neighborhood_volume of the box (per-axis
    half-width = range * volume**(1/dims) / 2), clipped to the bounds.
    The temperature decays geometrically each iteration. A proposal whose
    evaluation fails is rejected and counted on the trace. Returns the
    best-ever (point, score, trace).
    """
    if scorer is None:
        scorer = lambda pt: evaluate_point(space.full_point(pt), data, config).score  # noqa: E731
    rng = np.random.default_rng(seed)
    axes = space.axes
    lows = np.asarray([space.bounds[a][0] for a in axes])
    highs = np.asarray([space.bounds[a][1] for a in axes])
    half_widths = (highs - lows) * config.neighborhood_volume ** (1.0 / len(axes)) / 2.0

    current = np.asarray([float(start[a]) for a in axes])
    if np.any(current < lows) or np.any(current > highs):
        raise FitError(f"start point {start} lies outside the search box")
    current_score = scorer({a: float(v) for a, v in zip(axes, current)})
    best = current.copy()
    best_score = current_score
    temp = config.initial_temp
    trace = AnnealTrace(points=[], scores=[], accepted=[], temps=[], best_scores=[])
    for _ in range(config.anneal_iters):
        proposal = np.clip(current + rng.uniform(-half_widths, half_widths), lows, highs)
        candidate = {a: float(v) for a, v in zip(axes, proposal)}
        try:
            score = scorer(candidate)
            failed = False
        except Exception:  # noqa: BLE001 - failed proposals are rejected, not fatal
            score = math.inf
            failed = True
            trace.failures += 1
        took = (not failed) and _accept(score - current_score, temp, rng)
        if took:
            current = proposal
            current_score = score
            if score < best_score:
                best = proposal.copy()
                best_score = score
        trace.points.append(candidate)
        trace.scores.append(score)
        trace.accepted.append(took)
        trace.temps.append(temp)
        trace.best_scores.append(best_score)
        temp *= config.cooling
    return {a: float(v) for a, v in zip(axes, best)}, float(best_score), trace


def _spread_starts(grid: GridResult, space: ParamSpace, k: int) -> list[int]:
    """Indices of the k best cells, deduplicated by one cell diagonal."""
    diagonal = float(np.linalg.norm(space.cell_widths()))
    order = np.argsort(grid.scores, kind="stable")
    chosen: list[int] = []
    for idx in order:
        if math.isnan(grid.scores[idx]):
            break
        pt = grid.points[idx]
        if all(np.linalg.norm(pt - grid.points[j]) >= diagonal for j in chosen):
            chosen.append(int(idx))
        if len(chosen) == k:
            break
    return chosen


@dataclass
class FitResult:
    best: dict[str, float]
    score: float
    error: float
    error_std: float
    scale: float
    grid: GridResult
    traces: list[AnnealTrace]
    seed: int
    space: ParamSpace
    config: FitConfig

    def full_best(self) -> dict[str, float]:
        return self.space.full_point(self.best)


def fit(data: np.ndarray, space: ParamSpace | None = None, config: FitConfig | None = None, jobs: int = 1) -> FitResult:
    """Grid pass, then annealing chains from the spread-out best cells.

    The chains start from the restarts best grid cells separated by at
    least one cell diagonal; the overall best-scoring point wins. Raises
    FitError only if every grid cell fails.
    """
    space = space or default_space()
    config = config or FitConfig()
    data = np.asarray(data, dtype=np.float64)
    if data.size < 2:
        raise FitError(f"need at least 2 samples to fit, got {data.size}")
    grid = grid_explore(data, space, config, jobs=jobs)
    starts = _spread_starts(grid, space, config.restarts)
    if not starts:
        raise FitError("every grid cell failed; nothing to anneal from")
    tasks = [
        (grid.point(idx), data, space, config, derive_seed(config.seed, "anneal", chain))
        for chain, idx in enumerate(starts)
    ]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_anneal_task, tasks))
    else:
        outcomes = [_anneal_task(task) for task in tasks]
    best_point, best_score, traces = None, math.inf, []
    for point, score, trace in outcomes:
        traces.append(trace)
        if score < best_score:
            best_point, best_score = point, score
    final = evaluate_point(space.full_point(best_point), data, config)
    return FitResult(
        best=best_point,
        score=float(final.score),
        error=float(final.mean_error),
        error_std=float(final.error_std),
        scale=float(final.mean_scale),
        grid=grid,
        traces=traces,
        seed=config.seed,
        space=space,
        config=config,
    )


def _anneal_task(args):
    start, data, space, config, seed = args
    return anneal(start, data, space, config, seed)


def fit_with_stubbornness(
    data: np.ndarray,
    space: ParamSpace | None = None,
    config: FitConfig | None = None,
    jobs: int = 1,
    p_max: float = 0.5,
) -> FitResult:
    """Four-parameter fit with a searched stubborn fraction p in [0, p_max]."""
    space = space or default_space(with_stubbornness=True, p_max=p_max)
    if "p" not in space.bounds:
        raise FitError("stubbornness fit needs a bounded p axis")
    return fit(data, space, config, jobs=jobs)


@dataclass
class IdentifiabilityCurve:
    qs: np.ndarray
    chi: np.ndarray
    noise: np.ndarray  # two sample stds of the bootstrap variances per q


def identifiability(
    points: np.ndarray,
    scores: np.ndarray,
    q_range: tuple[float, float] = (1e-4, 1e-2),
    n_q: int = 9,
    bootstrap: int = 10,
    seed: int = 0,
) -> IdentifiabilityCurve:
    """Landscape sharpness curve chi(q) from a scored grid.

    For each q (log-spaced over q_range), take the floor(q * cells) best
    cells and the same number of uniformly drawn cells, bootstrap times;
    chi(q) is the mean bootstrap dispersion minus the best-set dispersion,
    where dispersion is the mean distance to the barycenter in per-axis
    min-max normalized coordinates. chi depends on the scores only through
    their ranking, so any strictly increasing rescaling leaves it unchanged.
    """
    points = np.asarray(points, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] != scores.size:
        raise ValueError(f"points {points.shape} do not match {scores.size} scores")
    n_cells = points.shape[0]
    q_lo, q_hi = q_range
    if not 0.0 < q_lo <= q_hi:
        raise ValueError(f"invalid q range ({q_lo}, {q_hi})")
    if math.floor(q_lo * n_cells) < 1:
        raise ValueError(
            f"grid too small: floor({q_lo} * {n_cells}) < 1; need at least {math.ceil(1.0 / q_lo)} cells"
        )
    valid = ~np.isnan(scores)
    if not np.all(valid):
        points = points[valid]
        scores = scores[valid]
        n_cells = points.shape[0]
    spans = points.max(axis=0) - points.min(axis=0)
    spans[spans == 0.0] = 1.0
    unit = (points - points.min(axis=0)) / spans
    order = np.argsort(scores, kind="stable")
    rng = np.random.default_rng(seed)
    qs = np.logspace(math.log10(q_lo), math.log10(q_hi), n_q)
    chi = np.empty(n_q)
    noise = np.empty(n_q)
    for i, q in enumerate(qs):
        k = math.floor(q * n_cells)
        best_disp = _dispersion(unit[order[:k]])
        boot = np.asarray([
            _dispersion(unit[rng.choice(n_cells, size=k, replace=False)])
            for _ in range(bootstrap)
        ])
        chi[i] = float(boot.mean() - best_disp)
        noise[i] = 2.0 * float(boot.std(ddof=1)) if bootstrap > 1 else 0.0
    return IdentifiabilityCurve(qs=qs, chi=chi, noise=noise)


def _dispersion(unit_points: np.ndarray) -> float:
    center = unit_points.mean(axis=0)
    return float(np.linalg.norm(unit_points - center, axis=1).mean())


def write_fit_csv(result: FitResult, path, label: str) -> None:
    """Single-row summary: label,error,mu,gamma,r,p,scale,seed."""
    best = result.full_best()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "error", "mu", "gamma", "r", "p", "scale", "seed"])
        writer.writerow([
            label,
            repr(result.error),
            repr(float(best["mu"])),
            repr(float(best["gamma"])),
            repr(float(best["r"])),
            repr(float(best.get("p", 0.0))),
            repr(result.scale),
            result.seed,
        ])


def write_grid_csv(grid: GridResult, path) -> None:
    """Grid scores: one row per cell center with score decomposition."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(grid.axes) + ["score", "mean_error", "error_std"])
        for i in range(grid.points.shape[0]):
            row = [repr(float(v)) for v in grid.points[i]]
            row += [repr(float(grid.scores[i])), repr(float(grid.mean_errors[i])), repr(float(grid.error_stds[i]))]
            writer.writerow(row)


def read_grid_csv(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Read a grid CSV back as (axes, points, scores)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or "score" not in header:
            raise ValueError(f"not a grid csv: {path}")
        split = header.index("score")
        axes = header[:split]
        pts, scs = [], []
        for row in reader:
            if not row:
                continue
            pts.append([float(v) for v in row[:split]])
            scs.append(float(row[split]))
    if not pts:
        raise ValueError(f"no grid rows in {path}")
    return axes, np.asarray(pts), np.asarray(scs)


def write_chi_csv(curve: IdentifiabilityCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["q", "chi"])
        for q, c in zip(curve.qs, curve.chi):
            writer.writerow([repr(float(q)), repr(float(c))])
