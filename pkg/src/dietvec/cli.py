"""Command-line entry point.

    dietvec run --config run.conf
    dietvec resume --stage meal-clustering --config run.conf
    dietvec gen-synthetic --spec synth.conf --out data/
    dietvec report --output out/

Exit codes: 0 success, 2 validation failure, 3 stage failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .pipeline import (
    STAGES,
    ConfigError,
    PipelineError,
    ResumeRefused,
    StageError,
    load_config,
    regenerate_reports,
    resume,
    run_pipeline,
)
from .synthetic import SyntheticSpec, generate_synthetic_corpus

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_STAGE = 3


def _read_key_values(path: Path) -> dict[str, str]:
    values = {}
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def _summary(output) -> str:
    m = output.manifest
    k = m["effective_k"]
    return (f"{k['food']} food words, {k['meal']} meal words, {k['diet']} diet words "
            f"written to {output.directory}")


def cmd_run(args) -> int:
    config = load_config(args.config)
    print(_summary(run_pipeline(config)))
    return EXIT_OK


def cmd_resume(args) -> int:
    config = load_config(args.config)
    print(_summary(resume(args.stage, config)))
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    try:
        spec = SyntheticSpec.from_mapping(_read_key_values(Path(args.spec)) if args.spec else {})
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    paths = generate_synthetic_corpus(spec).write(args.out)
    print(json.dumps({k: str(v) for k, v in paths.items()}, indent=2))
    return EXIT_OK


def cmd_report(args) -> int:
    stats = regenerate_reports(args.output)
    print(json.dumps(stats, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dietvec", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run every stage")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="recompute from a stage onward")
    p.add_argument("--stage", required=True, choices=STAGES)
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("gen-synthetic", help="write a synthetic corpus with labels")
    p.add_argument("--spec", help="key = value file of SyntheticSpec fields")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("report", help="regenerate report files of a finished run")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (ConfigError, ResumeRefused) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
