"""Command line front end.

Each subcommand reads one YAML config (--config), resolves it against the
package defaults, and writes resolved_config.yaml plus seed.txt into the
output directory before any result file, so a finished directory documents
exactly how to reproduce itself. The same config and seed give byte-equal
outputs, whatever --jobs is.

Exit codes: 0 success, 1 I/O failure, 2 bad config or malformed input data,
3 numeric overflow during simulation, 4 optimization failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import (
    SweepAxis,
    SweepSpec,
    polarization_indices,
    regime,
    run_sweep,
    write_curves_csv,
    write_failures_csv,
    write_heatmap_csv,
    write_long_csv,
)
from .config import ConfigError, dump_config, load_config
from .dynamics import ModelParams, OpinionOverflowError, PopulationSpec, simulate
from .fitting import (
    FitConfig,
    FitError,
    ParamSpace,
    fit,
    identifiability,
    read_grid_csv,
    write_chi_csv,
    write_fit_csv,
    write_grid_csv,
)
from .graph import (
    ConvergenceError,
    GenerationError,
    GraphError,
    GraphGenSpec,
    generate,
    save_edge_list,
    validate,
)
from .ingest import SeriesError, load_series, preprocess
from .seeds import derive_seed, rng_from

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_OPTIMIZATION = 4


def _graph_spec(config: dict, seed: int) -> GraphGenSpec:
    g = config["graph"]
    return GraphGenSpec(
        family=g["family"],
        n=g["n"],
        seed=seed,
        m=g["m"],
        k=g["k"],
        rewire_prob=g["rewire_prob"],
        edge_prob=g["edge_prob"],
        cluster_ratios=tuple(g["cluster_ratios"]),
        intra_prob=g["intra_prob"],
        inter_prob=g["inter_prob"],
        ensure_self_loops=g["ensure_self_loops"],
        weight_rounds=g["weight_rounds"],
    )


def _population_spec(config: dict) -> PopulationSpec:
    p = config["population"]
    fractions = p["cluster_positive_fractions"]
    return PopulationSpec(
        positive_fraction=p["positive_fraction"],
        cluster_positive_fractions=tuple(fractions) if fractions is not None else None,
        stubborn_fraction=p["stubborn_fraction"],
        susceptibility=p["susceptibility"],
    )


def _model_params(config: dict) -> ModelParams:
    p = config["params"]
    return ModelParams(lam=p["lambda"], gamma=p["gamma"], mu=p["mu"], sigma=p["sigma"])


def _prepare_outdir(args: argparse.Namespace, config: dict) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(config, out / "resolved_config.yaml")
    (out / "seed.txt").write_text(f"{config['seed']}\n")
    return out


def cmd_gen_graph(args: argparse.Namespace, config: dict) -> int:
    out = _prepare_outdir(args, config)
    spec = _graph_spec(config, derive_seed(config["seed"], "graph"))
    graph = generate(spec)
    save_edge_list(graph, out / "edges.csv")
    report = validate(graph)
    payload = {
        "n": graph.n,
        "edges": int(graph.matrix.nnz),
        "clusters": list(graph.clusters) if graph.clusters else None,
        "strongly_connected": report.strongly_connected,
        "aperiodic": report.aperiodic,
        "normalized": report.normalized,
    }
    (out / "validation.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / 'edges.csv'}: {graph.n} nodes, {payload['edges']} edges")
    if not (report.strongly_connected and report.normalized):
        print("graph failed validation; see validation.json", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, config: dict) -> int:
    out = _prepare_outdir(args, config)
    seed = config["seed"]
    params = _model_params(config)
    graph = generate(_graph_spec(config, derive_seed(seed, "graph")))
    population = _population_spec(config).build(
        graph.n, rng_from(seed, "population"), params.mu, params.sigma, clusters=graph.clusters
    )
    trajectory = simulate(
        graph, population, params, config["horizon"],
        seed=derive_seed(seed, "simulate"), mode=config["simulate"]["mode"],
    )
    trajectory.write_summary_csv(out / "trajectory.csv")
    if config["simulate"]["write_agents"]:
        trajectory.write_agent_csv(out / "opinions.csv", which="opinions")
        trajectory.write_agent_csv(out / "states.csv", which="states")
    indices = polarization_indices(trajectory)
    print(f"regime: {regime(population)}")
    print(f"D_max={indices['D_max']:.6g} D_max_inf={indices['D_max_inf']:.6g}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, config: dict) -> int:
    out = _prepare_outdir(args, config)
    section = config["sweep"]
    if not section["axes"]:
        print("error: sweep.axes is empty", file=sys.stderr)
        return EXIT_CONFIG
    spec = SweepSpec(
        graph=_graph_spec(config, 0),
        population=_population_spec(config),
        params=_model_params(config),
        horizon=config["horizon"],
        axes=[SweepAxis(a["name"], a["lo"], a["hi"], a["cells"]) for a in section["axes"]],
        replicates=section["replicates"],
        statistics=tuple(section["statistics"]),
        seed=config["seed"],
    )
    result = run_sweep(spec, jobs=args.jobs)
    write_long_csv(result, out / "sweep_long.csv")
    for stat in spec.statistics:
        if stat != "event_fraction_curve":
            write_heatmap_csv(result, stat, out / f"heatmap_{stat}.csv")
    if "event_fraction_curve" in spec.statistics:
        write_curves_csv(result, out / "curves.csv")
    failures = result.failures()
    if failures:
        write_failures_csv(result, out / "failures.csv")
        print(f"{len(failures)} of {len(result.cells)} cells failed; see failures.csv", file=sys.stderr)
        if len(failures) == len(result.cells):
            return EXIT_OPTIMIZATION
    print(f"swept {len(result.cells)} cells x {spec.replicates} replicates")
    return EXIT_OK


def _param_space(section: dict) -> ParamSpace:
    bounds: dict[str, tuple[float, float]] = {}
    resolution: dict[str, int] = {}
    for axis, (lo, hi, cells) in section["space"].items():
        if axis in section["pinned"]:
            continue  # pinning overrides the default search axis
        bounds[axis] = (float(lo), float(hi))
        resolution[axis] = int(cells)
    if section["with_stubbornness"] and "p" not in bounds and "p" not in section["pinned"]:
        bounds["p"] = (0.0, float(section["p_max"]))
        resolution["p"] = 4
    return ParamSpace(bounds=bounds, resolution=resolution, pinned=dict(section["pinned"]))


def cmd_fit(args: argparse.Namespace, config: dict) -> int:
    out = _prepare_outdir(args, config)
    section = config["fit"]
    if not section["data"]:
        print("error: fit.data is required", file=sys.stderr)
        return EXIT_CONFIG
    series = load_series(section["data"])
    prep = section["preprocess"]
    window = tuple(prep["window"]) if prep["window"] is not None else None
    series = preprocess(series, window=window, smooth=prep["smooth"], fill=prep["fill"])

    surrogate = section["surrogate"]
    fit_config = FitConfig(
        n=surrogate["n"],
        cluster_ratios=tuple(surrogate["cluster_ratios"]),
        cluster_positive_fractions=tuple(surrogate["cluster_positive_fractions"]),
        intra_prob=surrogate["intra_prob"],
        lam=surrogate["lambda"],
        sigma=surrogate["sigma"],
        replicates=section["replicates"],
        mode=section["mode"],
        noise_weight=section["noise_weight"],
        restarts=section["restarts"],
        anneal_iters=section["anneal_iters"],
        initial_temp=section["initial_temp"],
        cooling=section["cooling"],
        neighborhood_volume=section["neighborhood_volume"],
        seed=config["seed"],
    )
    result = fit(series.values, _param_space(section), fit_config, jobs=args.jobs)
    label = section["label"] or Path(section["data"]).stem
    write_fit_csv(result, out / "fit.csv", label)
    write_grid_csv(result.grid, out / "grid.csv")
    best = result.full_best()
    print("best: " + " ".join(f"{name}={best[name]:.6g}" for name in sorted(best)))
    print(f"error={result.error:.6g} scale={result.scale:.6g}")
    return EXIT_OK


def cmd_identify(args: argparse.Namespace, config: dict) -> int:
    out = _prepare_outdir(args, config)
    section = config["identify"]
    if not section["grid"]:
        print("error: identify.grid is required", file=sys.stderr)
        return EXIT_CONFIG
    axes, points, scores = read_grid_csv(section["grid"])
    curve = identifiability(
        points,
        scores,
        q_range=(section["q_min"], section["q_max"]),
        n_q=section["points"],
        bootstrap=section["bootstrap"],
        seed=config["seed"],
    )
    write_chi_csv(curve, out / "chi.csv")
    print(f"chi over {len(axes)} axes: min={curve.chi.min():.6g} max={curve.chi.max():.6g}")
    return EXIT_OK


COMMANDS = {
    "gen-graph": cmd_gen_graph,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "identify": cmd_identify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsm-degroot",
        description="Simulation and calibration for coupled opinion and event dynamics on weighted digraphs.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run configuration")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default="out", help="output directory, created if missing")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweep and fit")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-graph", parents=[common], help="generate a graph and write its edge list")
    sub.add_parser("simulate", parents=[common], help="run one trajectory and write its summary")
    sub.add_parser("sweep", parents=[common], help="replicate simulations over a parameter grid")
    sub.add_parser("fit", parents=[common], help="calibrate parameters to an event time series")
    sub.add_parser("identify", parents=[common], help="landscape sharpness curve for a scored grid")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be at least 1, got {args.jobs}")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError(f"--seed must be a 64-bit non-negative integer, got {args.seed}")
        config = load_config(args.config)
        if args.seed is not None:
            config["seed"] = args.seed
        return COMMANDS[args.command](args, config)
    except OpinionOverflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FitError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OPTIMIZATION
    except GenerationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, GraphError, SeriesError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
