"""breather-lab command line."""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .config import ConfigError, parse_config
from .experiments import RUNNERS, SCHEMAS

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

WORKERS_ENV = "BREATHER_LAB_WORKERS"


def _workers(flag: int | None) -> int | None:
    if flag is not None:
        return flag
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{WORKERS_ENV} must be at least 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="breather-lab",
        description="Run a breather verification experiment and write its artifacts and manifest.",
    )
    ap.add_argument("experiment", choices=sorted(RUNNERS))
    ap.add_argument("--config", required=True, type=Path, help="experiment configuration file")
    ap.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: ./out)")
    ap.add_argument("--workers", type=int, default=None,
                    help=f"cap on worker threads (default: ${WORKERS_ENV} or serial)")
    return ap


def run(experiment: str, config_text: str, out: Path, workers: int | None = None) -> tuple[int, dict]:
    """Parse, run and write the manifest; returns (exit code, manifest)."""
    cfg = parse_config(config_text, SCHEMAS, experiment)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    result = RUNNERS[experiment](dict(cfg.parameters), out, workers, cfg.seed)
    wall = time.perf_counter() - start
    manifest = {
        "experiment": experiment,
        "version": __version__,
        "config": cfg.echo(),
        "workers": workers,
        "wall_time_seconds": wall,
        "passed": result.passed,
        "assertions": [c.as_dict() for c in result.checks],
        "artifacts": result.artifacts,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return (EXIT_OK if result.passed else EXIT_FAILED), manifest


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers is not None and args.workers < 1:
        print("breather-lab: --workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        text = args.config.read_text(encoding="utf-8")
    except OSError as exc:
        print(f"breather-lab: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        workers = _workers(args.workers)
        code, manifest = run(args.experiment, text, args.out, workers)
    except ConfigError as exc:
        print(f"breather-lab: invalid config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for check in manifest["assertions"]:
        status = "PASS" if check["passed"] else "FAIL"
        print(f"{status} {args.experiment}:{check['name']} measured={check['measured']} threshold={check['threshold']}")
    print(f"wrote {args.out / 'manifest.json'} ({manifest['wall_time_seconds']:.1f} s)")
    return code


if __name__ == "__main__":
    sys.exit(main())
