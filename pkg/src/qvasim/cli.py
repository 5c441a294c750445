"""Batch driver: ``qvasim --config run.ini [overrides]``.

Exit status: 0 success, 2 bad configuration, 3 unreadable input or
unwritable output, 4 numerical failure, 5 optimiser ran out of evaluations.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from typing import Sequence

import numpy as np

from .algorithms import (
    exqaoa_spec,
    graph_order,
    maxcut_qualities,
    maxcut_terms,
    portfolio_qaoaz,
    portfolio_qwoa,
    qaoa_spec,
    read_graph,
    read_prices,
    returns_and_covariance,
)
from .ansatz import Ansatz, AnsatzSpec, RunLog, RunResult, benchmark
from .config import LOG_MODES, ConfigError, RunConfig, load_config, parse_depths
from .partition import NumericError, StructuralError, write_state

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4
EXIT_BUDGET = 5


class InputError(Exception):
    pass


def build_spec(config: RunConfig) -> AnsatzSpec:
    """Read the problem input and build the catalog spec at the first depth."""
    depth = config.depths[0]
    label = config.label or config.algorithm
    try:
        if config.problem == "maxcut":
            edges = read_graph(config.path(config.graph))
        else:
            _, prices = read_prices(config.path(config.prices))
    except OSError as exc:
        raise InputError(f"{exc.filename}: {exc.strerror}") from None
    except (StructuralError, ValueError) as exc:
        raise InputError(str(exc)) from None

    if config.problem == "maxcut":
        n = graph_order(edges)
        if n < 1:
            raise InputError("graph has no edges")
        if config.algorithm == "qaoa":
            return qaoa_spec(n, maxcut_qualities(edges, n), depth, config.seed, label)
        return exqaoa_spec(n, maxcut_terms(edges, n), depth, config.seed, label)

    try:
        returns, covariance = returns_and_covariance(prices)
    except StructuralError as exc:
        raise InputError(str(exc)) from None
    build = portfolio_qwoa if config.algorithm == "qwoa" else portfolio_qaoaz
    return build(returns, covariance, config.omega, config.net, depth, config.seed, label)


def print_result(result: RunResult, file=None) -> str:
    """Human-readable summary of one run; also written to ``file`` if given."""
    theta = " ".join(f"{x:.6g}" for x in result.theta_final)
    lines = [
        f"label={result.label} depth={result.depth} system_size={result.system_size}",
        f"f_initial={result.f_initial:.10g}",
        f"f_final={result.f_final:.10g}",
        f"theta_final=[{theta}]",
        f"evaluations={result.evaluations}",
        f"success={result.optimizer_success}",
        f"wall_time={result.wall_time:.3f}s",
    ]
    if result.budget_exhausted:
        lines.append("note: evaluation budget exhausted; best parameters found so far reported")
    elif not result.optimizer_success and result.message:
        lines.append(f"note: {result.message}")
    text = "\n".join(lines) + "\n"
    if file is not None:
        file.write(text)
    return text


def write_probabilities(path, qualities: np.ndarray, state: np.ndarray) -> None:
    """``basis_index,quality,probability`` rows, sorted by quality then index."""
    prob = state.real ** 2 + state.imag ** 2
    order = np.lexsort((np.arange(qualities.size), qualities))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["basis_index", "quality", "probability"])
        for i in order:
            writer.writerow([int(i), repr(float(qualities[i])), repr(float(prob[i]))])


def run(config: RunConfig, out=None) -> int:
    out = out or sys.stdout
    try:
        spec = build_spec(config)
        log = None
        if config.log:
            log = RunLog(config.path(config.log), LOG_MODES[config.log_mode])
        want_state = bool(config.state or config.probabilities)
        results = benchmark(
            spec,
            config.depth_list,
            config.repeats,
            config.param_persist,
            config.optimizer_config(),
            config.worker_count,
            log,
            keep_state=want_state,
        )
        for result in results:
            print_result(result, out)
        if want_state:
            best = min((r for r in results if r.depth == config.depths[1]), key=lambda r: r.f_final)
            if config.state:
                write_state(config.path(config.state), best.final_state)
            if config.probabilities:
                with Ansatz(spec.with_depth(best.depth), 1) as ansatz:
                    qualities = ansatz.observables().to_array()
                write_probabilities(config.path(config.probabilities), qualities, best.final_state)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    except NumericError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except StructuralError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if any(r.budget_exhausted for r in results):
        return EXIT_BUDGET
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qvasim", description="Simulate and optimise a quantum variational algorithm."
    )
    p.add_argument("--config", required=True, metavar="PATH", help="INI run configuration")
    p.add_argument("--seed", type=int, help="top-level random seed")
    p.add_argument("--workers", type=int, help="worker threads (default: config, then QVA_WORKERS)")
    depth = p.add_mutually_exclusive_group()
    depth.add_argument("--depth", type=int, help="single ansatz depth")
    depth.add_argument("--depths", metavar="A..B", help="inclusive depth range")
    p.add_argument("--repeats", type=int, help="optimisations per depth")
    p.add_argument("--log", metavar="PATH", help="CSV run log")
    p.add_argument("--save-state", metavar="PATH", help="binary dump of the best final state")
    p.add_argument("--probabilities", metavar="PATH", help="CSV of basis probabilities")
    p.add_argument("--optimizer", choices=["bfgs", "nelder-mead"])
    p.add_argument("--parallel", choices=["global", "jacobian", "jacobian_local"])
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = load_config(args.config)
        depths = None
        if args.depth is not None:
            depths = parse_depths(str(args.depth))
        elif args.depths is not None:
            depths = parse_depths(args.depths)
        cwd = os.getcwd()
        config = config.override(
            seed=args.seed,
            workers=args.workers,
            depths=depths,
            repeats=args.repeats,
            method=args.optimizer,
            parallel=args.parallel,
            log=args.log and os.path.join(cwd, args.log),
            state=args.save_state and os.path.join(cwd, args.save_state),
            probabilities=args.probabilities and os.path.join(cwd, args.probabilities),
        )
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config.worker_count
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
