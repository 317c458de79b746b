"""Command-line entry points: ``generate``, ``run`` and ``experiment``.

Settings come from built-in defaults, then an optional ``--config`` JSON file,
then command-line flags (flags win).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .applications import (
    DenoiseConfig,
    denoise_tikhonov,
    heat_operator,
    labels_from_scores,
    paraboloid_signal,
    run_denoising_experiment,
    tikhonov_operator,
    wavelet_denoise_ista,
)
from .distsim import LEDGER_MODES, ProtocolError, run_forward
from .graph import (
    DisconnectedGraphError,
    GraphError,
    WeightedGraph,
    connection_radius,
    lambda_max_bound,
    sample_connected_geometric_graph,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DISCONNECTED = 3
EXIT_INPUT = 4
EXIT_NUMERICAL = 5

EXIT_CODES_HELP = """\
exit codes:
  0  success
  2  invalid arguments or configuration
  3  graph disconnected (after the resampling limit)
  4  unreadable or malformed input file
  5  numerical or protocol failure (step-size violation, non-finite values)
"""

TASKS = ("smooth", "tikhonov", "classify", "wavelet", "experiment")


class ConfigError(ValueError):
    pass


class InputError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    task: str = "tikhonov"
    # graph
    n: int = 500
    sigma: float = 0.074
    kappa: float = 0.6
    threshold: str = "weight"
    max_tries: int = 1000
    seed: int = 0
    # operators
    order: int = 20
    t: float = 1.0
    tau: float = 1.0
    r: int = 1
    scales: int = 4
    mu: float = 0.1
    max_iters: int = 500
    tol: float = 1e-6
    # signal synthesis when no --signal is given
    noise_std: float = 0.5
    label_fraction: float = 0.1
    # experiment
    trials: int = 100
    workers: int = 1
    # io
    graph: str | None = None
    signal: str | None = None
    out: str = "out"
    ledger: str = "counts"

    def validate(self) -> None:
        checks = [
            (self.task in TASKS, f"task must be one of {TASKS}"),
            (self.n >= 2, "n must be >= 2"),
            (self.sigma > 0, "sigma must be positive"),
            (self.kappa > 0, "kappa must be positive"),
            (self.threshold in ("weight", "distance"), "threshold must be weight or distance"),
            (self.threshold == "distance" or self.kappa <= 1, "kappa must be <= 1 for weight thresholds"),
            (self.max_tries >= 1, "max_tries must be >= 1"),
            (0 <= self.seed < 2**64, "seed must be an unsigned 64-bit integer"),
            (self.order >= 1, "order must be >= 1"),
            (self.t > 0, "t must be positive"),
            (self.tau > 0, "tau must be positive"),
            (self.r >= 1, "r must be >= 1"),
            (self.scales >= 1, "scales must be >= 1"),
            (self.mu >= 0, "mu must be nonnegative"),
            (self.max_iters >= 1, "max_iters must be >= 1"),
            (self.tol >= 0, "tol must be nonnegative"),
            (self.noise_std >= 0, "noise_std must be nonnegative"),
            (0 < self.label_fraction <= 1, "label_fraction must lie in (0, 1]"),
            (self.trials >= 1, "trials must be >= 1"),
            (self.workers >= 1, "workers must be >= 1"),
            (self.ledger in LEDGER_MODES, f"ledger must be one of {LEDGER_MODES}"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def denoise_config(self) -> DenoiseConfig:
        return DenoiseConfig(
            n=self.n, sigma=self.sigma, kappa=self.kappa, noise_std=self.noise_std,
            tau=self.tau, r=self.r, order=self.order, trials=self.trials, seed=self.seed,
            max_tries=self.max_tries, threshold=self.threshold, workers=self.workers,
        )


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def load_config(path: str | None, overrides: dict) -> ExperimentConfig:
    values: dict = {}
    if path:
        try:
            values.update(json.loads(Path(path).read_text()))
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"config {path} is not valid JSON: {exc}") from exc
        unknown = set(values) - set(_FIELD_TYPES)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    values.update({k: v for k, v in overrides.items() if v is not None and k in _FIELD_TYPES})
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def load_graph(path: str) -> WeightedGraph:
    data = _read_json(path)
    try:
        return WeightedGraph.from_dict(data)
    except DisconnectedGraphError:
        raise
    except (KeyError, TypeError, GraphError) as exc:
        raise InputError(f"{path} is not a valid graph file: {exc}") from exc


def load_signal(path: str, n: int) -> np.ndarray:
    data = _read_json(path)
    values = data.get("values") if isinstance(data, dict) else data
    try:
        arr = np.asarray(values, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: signal values must be numbers") from exc
    if arr.shape != (n,):
        raise InputError(f"{path}: expected {n} values, got shape {arr.shape}")
    return arr


def synthesize_signal(cfg: ExperimentConfig, g: WeightedGraph) -> np.ndarray:
    """Paraboloid signal (plus noise), or partial labels for ``classify``."""
    if g.positions is None:
        raise InputError("graph has no positions; pass --signal")
    rng = np.random.default_rng(cfg.seed)
    f0 = paraboloid_signal(g.positions)
    if cfg.task == "classify":
        truth = np.where(f0 >= 0, 1.0, -1.0)
        known = rng.random(g.num_vertices) < cfg.label_fraction
        if not known.any():
            known[rng.integers(g.num_vertices)] = True
        return np.where(known, truth, 0.0)
    return f0 + cfg.noise_std * rng.standard_normal(g.num_vertices)


def cmd_generate(cfg: ExperimentConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    g, rejected = sample_connected_geometric_graph(
        cfg.n, cfg.sigma, cfg.kappa, rng, cfg.max_tries, cfg.threshold
    )
    out = Path(cfg.graph or Path(cfg.out) / "graph.json")
    _write(out, g.to_json() + "\n")
    radius = cfg.kappa if cfg.threshold == "distance" else connection_radius(cfg.sigma, cfg.kappa)
    print(json.dumps({
        "vertices": g.num_vertices,
        "edges": g.num_edges,
        "lambda_max_bound": lambda_max_bound(g),
        "connection_radius": radius,
        "resamples": rejected,
        "path": str(out),
    }))
    return EXIT_OK


def cmd_run(cfg: ExperimentConfig) -> int:
    if cfg.task == "experiment":
        return cmd_experiment(cfg)
    if not cfg.graph:
        raise ConfigError("run needs --graph")
    g = load_graph(cfg.graph)
    y = load_signal(cfg.signal, g.num_vertices) if cfg.signal else synthesize_signal(cfg, g)
    out_dir = Path(cfg.out)
    extra: dict = {}
    if cfg.task == "smooth":
        values, trace = run_forward(g, heat_operator(g, cfg.t, cfg.order), y, ledger=cfg.ledger)
    elif cfg.task == "tikhonov":
        values, trace = denoise_tikhonov(
            g, y, cfg.tau, cfg.r, cfg.order, ledger=cfg.ledger, return_trace=True
        )
    elif cfg.task == "classify":
        op = tikhonov_operator(g, cfg.tau, cfg.r, cfg.order)
        scores, trace = run_forward(g, op, y, ledger=cfg.ledger)
        values = labels_from_scores(scores)
    else:
        values, state = wavelet_denoise_ista(
            g, y, cfg.scales, cfg.order, cfg.mu, cfg.max_iters, cfg.tol, ledger=cfg.ledger
        )
        trace = state.trace
        extra = {"iterations": state.iterations, "converged": state.converged,
                 "objective": state.objective}
        _write(out_dir / "ista.json", json.dumps({**extra, "coeffs": state.coeffs.tolist()}) + "\n")

    _write(out_dir / "signal.json",
           json.dumps({"task": cfg.task, "values": np.asarray(values).tolist()}) + "\n")
    _write(out_dir / "trace.jsonl", trace.to_jsonl())
    summary = {
        "task": cfg.task,
        "vertices": g.num_vertices,
        "edges": g.num_edges,
        "order": cfg.order,
        "rounds": trace.num_rounds,
        "messages": trace.total_messages,
        "scalars": trace.total_scalars,
        "messages_by_payload_len": {str(k): v for k, v in trace.messages_by_payload_len().items()},
    }
    if "iterations" in extra:
        summary["iterations"] = extra["iterations"]
        summary["converged"] = extra["converged"]
    _write(out_dir / "summary.json", json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary))
    return EXIT_OK


def cmd_experiment(cfg: ExperimentConfig) -> int:
    report = run_denoising_experiment(cfg.denoise_config())
    out_dir = Path(cfg.out)
    _write(out_dir / "report.json", report.to_json())
    _write(out_dir / "trials.csv", report.to_csv())
    print(json.dumps({
        "trials": report.trials,
        "mse_noisy": report.mse_noisy,
        "mse_denoised": report.mse_denoised,
        "report": str(out_dir / "report.json"),
    }))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON file of settings")
    common.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--n", type=int, help="number of sensors")
    common.add_argument("--sigma", type=float, help="Gaussian kernel width")
    common.add_argument("--kappa", type=float, help="threshold on the weight (or distance)")
    common.add_argument("--threshold", choices=("weight", "distance"),
                        help="apply kappa to the kernel weight (default) or to the distance")
    common.add_argument("--max-tries", dest="max_tries", type=int,
                        help="graph draws before giving up on connectivity")
    common.add_argument("--order", type=int, help="Chebyshev order M")
    common.add_argument("--tau", type=float, help="Tikhonov weight")
    common.add_argument("--r", type=int, help="Laplacian power in the regularizer")
    common.add_argument("--noise-std", dest="noise_std", type=float)

    parser = argparse.ArgumentParser(
        prog="chebdist",
        description="Distributed graph Fourier multipliers via shifted Chebyshev polynomials.",
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[common], epilog=EXIT_CODES_HELP,
                         formatter_class=argparse.RawDescriptionHelpFormatter,
                         help="sample a connected random geometric graph")
    gen.add_argument("--graph", metavar="PATH", help="output graph file (default OUT/graph.json)")

    run = sub.add_parser("run", parents=[common], epilog=EXIT_CODES_HELP,
                         formatter_class=argparse.RawDescriptionHelpFormatter,
                         help="run one distributed task on a graph file")
    run.add_argument("--task", choices=TASKS)
    run.add_argument("--graph", metavar="PATH", help="graph JSON file")
    run.add_argument("--signal", metavar="PATH",
                     help="signal JSON (list or {values: [...]}); synthesized when omitted")
    run.add_argument("--t", type=float, help="heat kernel time")
    run.add_argument("--scales", type=int, help="number of wavelet scales J")
    run.add_argument("--mu", type=float, help="uniform lasso weight")
    run.add_argument("--max-iters", dest="max_iters", type=int)
    run.add_argument("--tol", type=float)
    run.add_argument("--label-fraction", dest="label_fraction", type=float)
    run.add_argument("--ledger", choices=LEDGER_MODES, help="record every message or only counts")

    exp = sub.add_parser("experiment", parents=[common], epilog=EXIT_CODES_HELP,
                         formatter_class=argparse.RawDescriptionHelpFormatter,
                         help="repeat the random-network denoising experiment")
    exp.add_argument("--trials", type=int)
    exp.add_argument("--full", action="store_true", help="run 1000 trials instead of the default 100")
    exp.add_argument("--workers", type=int, help="parallel worker processes")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "full")}
    if args.command == "experiment":
        overrides["task"] = "experiment"
        if args.full:
            overrides["trials"] = 1000
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "run":
            return cmd_run(cfg)
        return cmd_experiment(cfg)
    except DisconnectedGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DISCONNECTED
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, GraphError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, ProtocolError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
