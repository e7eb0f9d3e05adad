"""Command-line entry point.

    psm probe|solve|identify|transversal CONFIG [--out DIR] [--jobs N]

CONFIG is a JSON experiment config, or a directory of configs of the given
kind (run independently, optionally in parallel with --jobs).  The env var
PSM_SEED overrides the seed of configs that carry one.  Exit codes: 0 on
success, 2 for schema errors, 3 for numerical failures, 4 for I/O errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import PsmError, SchemaError
from .harness import KINDS, load_config, run

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _classify(exc: BaseException) -> tuple[int, str]:
    if isinstance(exc, SchemaError):
        return EXIT_SCHEMA, "schema-error"
    if isinstance(exc, PsmError):
        return EXIT_NUMERICAL, "numerical-failure"
    if isinstance(exc, OSError):
        return EXIT_IO, "io-error"
    raise exc


def _run_one(config_path: str, out_dir: str, seed_override: int | None) -> tuple[int, str]:
    """Run a single config; returns (exit_code, printable line)."""
    try:
        report = run(config_path, out_dir=out_dir, seed_override=seed_override)
    except BaseException as exc:  # classified below; unknown types re-raise
        code, label = _classify(exc)
        return code, f"psm: {label}: {config_path}: {exc}"
    return EXIT_OK, report.to_json()


def _seed_override() -> int | None:
    raw = os.environ.get("PSM_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise SchemaError(f"PSM_SEED must be an integer, got {raw!r}") from None


def _collect_configs(directory: Path, kind: str) -> list[Path]:
    paths = sorted(directory.glob("*.json"))
    matching = []
    for p in paths:
        try:
            cfg = load_config(p)
        except PsmError:
            continue
        if cfg["kind"] == kind:
            matching.append(p)
    if not matching:
        raise SchemaError(f"no valid {kind!r} configs found in {directory}")
    return matching


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="psm",
        description="constant-rank certification, prox splitting, and manifold checks",
    )
    parser.add_argument("kind", choices=KINDS, help="experiment kind to run")
    parser.add_argument("config", help="config file, or directory of configs")
    parser.add_argument("--out", default=".", help="output directory (default: .)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel configs for a directory")
    args = parser.parse_args(argv)

    try:
        seed_override = _seed_override()
        config_path = Path(args.config)
        if config_path.is_dir():
            configs = _collect_configs(config_path, args.kind)
            worst = EXIT_OK
            if args.jobs > 1:
                with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                    results = list(
                        pool.map(
                            _run_one,
                            [str(p) for p in configs],
                            [args.out] * len(configs),
                            [seed_override] * len(configs),
                        )
                    )
            else:
                results = [_run_one(str(p), args.out, seed_override) for p in configs]
            for (code, line), path in zip(results, configs):
                if code == EXIT_OK:
                    print(json.dumps({"config": str(path)}), file=sys.stdout)
                    print(line)
                else:
                    print(line, file=sys.stderr)
                worst = max(worst, code)
            return worst

        cfg = load_config(config_path)
        if cfg["kind"] != args.kind:
            raise SchemaError(
                f"config kind {cfg['kind']!r} does not match subcommand {args.kind!r}"
            )
        code, line = _run_one(str(config_path), args.out, seed_override)
        print(line, file=sys.stdout if code == EXIT_OK else sys.stderr)
        return code
    except BaseException as exc:
        code, label = _classify(exc)
        print(f"psm: {label}: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
