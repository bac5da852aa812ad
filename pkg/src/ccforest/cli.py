"""Command line: ``ccforest {detect,evaluate,simulate,summarize,example}``.

Exit codes: 0 success, 2 input format error, 3 precondition violation,
4 infeasible parameters.  Failures print one JSON object on stderr.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import shutil
import sys
from pathlib import Path

from . import __version__, example_dir
from .detector import DetectionParams, detect
from .exceptions import CCForestError, InfeasibleParams
from .localization import apply_strategy, cost_table_rows, write_cost_table
from .simulator import SimParams, simulate, write_simulation
from .spectra import load_run, summarize

log = logging.getLogger("ccforest")

DETECTION_DEFAULTS = {
    "combo": 1,
    "chunk_size": 10,
    "partitions": 3,
    "trees": 100,
    "max_features": "sqrt",
    "max_depth": None,
    "class_weight": None,
    "pca_mode": "variance",
    "pca_fraction": 0.6,
    "seed": 0,
}
EVAL_DEFAULTS = {
    "formula": "ochiai",
    "tie": "worst",
    "strategy": "both",
    "variant": "both",
}
SIM_DEFAULTS = {f: getattr(SimParams(), f) for f in SimParams.__dataclass_fields__}


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _max_features(text):
    if text in ("sqrt", "log2", "none"):
        return None if text == "none" else text
    try:
        return int(text)
    except ValueError:
        return float(text)


def _add_detection_flags(p, combos_multi=False):
    if combos_multi:
        p.add_argument("--combo", type=int, choices=(1, 2, 3), action="append",
                       help="combo size; repeat to select several (default: 1, 2 and 3)")
    else:
        p.add_argument("--combo", type=int, choices=(1, 2, 3))
    p.add_argument("--chunk-size", type=int, help="passing tests labelled per round (K)")
    p.add_argument("--partitions", type=int, help="training partitions per round (p)")
    p.add_argument("--trees", type=int, help="trees per forest")
    p.add_argument("--max-features", type=_max_features, help="features per split: int, fraction, sqrt, log2 or none")
    p.add_argument("--max-depth", type=int)
    p.add_argument("--class-weight", choices=("balanced",))
    p.add_argument("--pca-mode", choices=("variance", "dims", "none"))
    p.add_argument("--pca-fraction", type=float)
    p.add_argument("--seed", type=int)


def _add_inputs(p, faults_required):
    p.add_argument("--coverage", required=True, help="coverage CSV (test_id,verdict,trace)")
    p.add_argument("--instrumentation", required=True, help="instrumentation CSV")
    p.add_argument("--faults", required=faults_required, help="faulty statement ids, one per line")
    p.add_argument("--config", help="JSON file of option defaults; flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccforest", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ccforest {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="flag coincidentally correct passing tests")
    _add_inputs(p, faults_required=False)
    _add_detection_flags(p)
    p.add_argument("-o", "--output", help="report path (default: stdout)")

    p = sub.add_parser("evaluate", help="detect, then cost of flipping/trimming for each combo")
    _add_inputs(p, faults_required=True)
    _add_detection_flags(p, combos_multi=True)
    p.add_argument("--formula", choices=("ochiai", "tarantula"))
    p.add_argument("--tie", choices=("worst", "best", "average"))
    p.add_argument("--strategy", choices=("none", "flip", "trim", "both"))
    p.add_argument("--variant", choices=("one", "all", "both"))
    p.add_argument("-o", "--output-dir", required=True,
                   help="directory for evaluation.json and cost_table.csv")

    p = sub.add_parser("simulate", help="write a synthetic run with known CC tests")
    p.add_argument("-o", "--output-dir", required=True)
    p.add_argument("--config", help="JSON file of option defaults")
    p.add_argument("--statements", dest="statement_count", type=int)
    p.add_argument("--passing", dest="n_passing", type=int)
    p.add_argument("--failing", dest="n_failing", type=int)
    p.add_argument("--cc-rate", dest="cc_rate", type=float)
    p.add_argument("--fault-count", dest="fault_count", type=int)
    p.add_argument("--min-trace", dest="min_trace_length", type=int)
    p.add_argument("--max-trace", dest="max_trace_length", type=int)
    p.add_argument("--strength", dest="signature_strength", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--program-id", dest="program_id")

    p = sub.add_parser("summarize", help="print counts for a coverage run")
    _add_inputs(p, faults_required=False)

    p = sub.add_parser("example", help="copy the bundled Math example to a directory")
    p.add_argument("output_dir")
    return parser


def _effective(args, defaults: dict) -> dict:
    """defaults < config file < explicit flags."""
    config = dict(defaults)
    if getattr(args, "config", None):
        loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        config.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    return config


def _detection_params(config: dict, combo: int) -> DetectionParams:
    return DetectionParams(
        chunk_size=config["chunk_size"],
        partitions=config["partitions"],
        combo=combo,
        pca_mode=None if config["pca_mode"] == "none" else config["pca_mode"],
        pca_fraction=config["pca_fraction"],
        n_trees=config["trees"],
        max_features=config["max_features"],
        max_depth=config["max_depth"],
        class_weight=config["class_weight"],
        seed=config["seed"],
    )


def _inputs(args, with_faults: bool) -> dict:
    paths = {"coverage": args.coverage, "instrumentation": args.instrumentation}
    if with_faults:
        paths["faults"] = args.faults
    return {name: {"path": str(p), "sha256": _sha256(p)} for name, p in paths.items()}


def _dump(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def cmd_detect(args) -> int:
    faults = args.faults
    if faults is None:
        log.warning("no faults file given; detection does not need one")
    elif not Path(faults).exists():
        log.warning("faults file %s not found; continuing without it", faults)
        faults = None
    run = load_run(args.coverage, args.instrumentation, faults)
    config = _effective(args, DETECTION_DEFAULTS)
    report = detect(run, _detection_params(config, config["combo"]))
    doc = {
        "tool": "ccforest",
        "version": __version__,
        "config": config,
        "inputs": _inputs(args, with_faults=False),
        "report": report.to_dict(),
    }
    text = _dump(doc)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_evaluate(args) -> int:
    config = _effective(args, {**DETECTION_DEFAULTS, **EVAL_DEFAULTS, "combo": [1, 2, 3]})
    combos = config["combo"]
    combos = sorted(set([combos] if isinstance(combos, int) else combos))
    config["combo"] = combos
    strategies = ["flip", "trim"] if config["strategy"] == "both" else [config["strategy"]]
    variants = ["one", "all"] if config["variant"] == "both" else [config["variant"]]

    run = load_run(args.coverage, args.instrumentation, args.faults)
    results = {}
    by_strategy = {s: {} for s in strategies}
    for k in combos:
        report = detect(run, _detection_params(config, k))
        costs = {}
        for strategy in strategies:
            rep = apply_strategy(run, report.ct, strategy, variants, config["formula"], config["tie"])
            costs[strategy] = rep.to_dict()
            by_strategy[strategy][k] = rep
        results[f"combo{k}"] = {"detection": report.to_dict(), "costs": costs}

    doc = {
        "tool": "ccforest",
        "version": __version__,
        "config": config,
        "inputs": _inputs(args, with_faults=True),
        "program_id": run.program_id,
        "results": results,
    }
    table = write_cost_table(
        cost_table_rows(run.program_id, s, by_strategy[s]) for s in strategies
    )
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "evaluation.json").write_text(_dump(doc), encoding="utf-8")
    (out / "cost_table.csv").write_text(table, encoding="utf-8")
    return 0


def cmd_simulate(args) -> int:
    config = _effective(args, SIM_DEFAULTS)
    params = SimParams(**config)
    run, truth = simulate(params)
    write_simulation(run, truth, args.output_dir)
    return 0


def cmd_summarize(args) -> int:
    run = load_run(args.coverage, args.instrumentation, args.faults)
    sys.stdout.write(_dump(summarize(run).to_dict()))
    return 0


def cmd_example(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for item in example_dir().iterdir():
        if item.is_file():
            shutil.copyfile(item, out / item.name)
    return 0


COMMANDS = {
    "detect": cmd_detect,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "summarize": cmd_summarize,
    "example": cmd_example,
}


def _fail(kind: str, code: int, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": message}) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(name)s: %(levelname)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except CCForestError as exc:
        return _fail(type(exc).__name__, exc.exit_code, str(exc))
    except (FileNotFoundError, IsADirectoryError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        return _fail(type(exc).__name__, 2, str(exc))
    except (ValueError, TypeError) as exc:
        return _fail(type(exc).__name__, InfeasibleParams.exit_code if args.command == "simulate" else 3, str(exc))


if __name__ == "__main__":
    sys.exit(main())
