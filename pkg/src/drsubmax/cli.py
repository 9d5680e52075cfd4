"""Command-line interface: run experiments, verify invariants, build graphs.

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 I/O error.  Config files are key=value text; command-line flags override
file values.  The environment variable DRSUBMAX_OUT overrides the output
directory.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .bench import (ALGORITHMS, ConfigError, ExperimentConfig, compute_hindsight,
                    config_from_mapping, parse_config_file, run_experiment, _build_stream)
from .instances import EdgeListError, gen_random_graph
from .rng import make_rng
from .verify import SUITES, run_suites

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file; flags win on conflict")
    for name, fld in ExperimentConfig.__dataclass_fields__.items():
        flag = "--" + name.replace("_", "-")
        if fld.type == "bool":
            parser.add_argument(flag, type=lambda s: s.lower() == "true", default=None,
                                metavar="true|false")
        else:
            parser.add_argument(flag, default=None)


def _config_from_args(args) -> ExperimentConfig:
    mapping: dict = {}
    if args.config:
        mapping.update(parse_config_file(args.config))
    for name in ExperimentConfig.__dataclass_fields__:
        value = getattr(args, name, None)
        if value is not None:
            if isinstance(value, str):
                from .bench import _coerce
                value = _coerce(value)
            mapping[name] = value
    return config_from_mapping(mapping)


def cmd_run(args) -> int:
    cfg = _config_from_args(args)
    result = run_experiment(cfg)
    print(f"algorithm={cfg.algorithm} T={cfg.horizon} replicas={cfg.replicas}")
    print(f"mean final ratio: {result.mean_final_ratio:.4f}")
    for path in result.csv_paths:
        print(f"wrote {path}")
    print(f"wrote {result.aggregate_path}")
    print(f"wrote {result.metadata_path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    ok, _ = run_suites(args.suite)
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_gen_graph(args) -> int:
    graph = gen_random_graph(args.n, args.edge_prob,
                             weight_range=(args.weight_min, args.weight_max),
                             seed=args.seed)
    coo = graph.weights.tocoo()
    with open(args.output, "wt") as fh:
        fh.write(f"# generated: n={args.n} edge_prob={args.edge_prob} seed={args.seed}\n")
        for i, j, w in zip(coo.row, coo.col, coo.data):
            if i < j:
                fh.write(f"{i} {j} {w!r}\n")
    print(f"wrote {args.output} ({graph.n} vertices, {graph.edge_count} edges)")
    return EXIT_OK


def cmd_hindsight(args) -> int:
    cfg = _config_from_args(args)
    body = cfg.build_body()
    rng = make_rng(np.random.SeedSequence(cfg.master_seed))
    functions, _ = _build_stream(cfg, rng.spawn(1)[0])
    hs = compute_hindsight(functions, body, grid_resolution=cfg.comparator_grid,
                           rng=rng.spawn(1)[0])
    print(f"comparator value: {hs.value!r} (method: {hs.method})")
    for method, value in sorted(hs.candidates.items()):
        print(f"  {method}: {value!r}")
    print(f"point: {np.array2string(hs.point, precision=4)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drsubmax",
        description="Online non-monotone DR-submodular maximization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment and emit CSV/JSON")
    _add_config_flags(run_p)
    run_p.set_defaults(func=cmd_run)

    verify_p = sub.add_parser("verify", help="run invariant property suites")
    verify_p.add_argument("suite", nargs="?", default="all",
                          choices=list(SUITES) + ["all"])
    verify_p.set_defaults(func=cmd_verify)

    gen_p = sub.add_parser("gen-graph", help="write a random edge list")
    gen_p.add_argument("--n", type=int, required=True)
    gen_p.add_argument("--edge-prob", type=float, default=0.3)
    gen_p.add_argument("--weight-min", type=float, default=1.0)
    gen_p.add_argument("--weight-max", type=float, default=1.0)
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.add_argument("--output", required=True)
    gen_p.set_defaults(func=cmd_gen_graph)

    hind_p = sub.add_parser("hindsight", help="compute the comparator for a config's stream")
    _add_config_flags(hind_p)
    hind_p.set_defaults(func=cmd_hindsight)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EdgeListError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
