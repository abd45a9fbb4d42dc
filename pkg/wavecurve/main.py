"""Main application entry point for the wavecurve pipeline."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from .config import RunConfig, load_config
from .errors import InputError
from .ingest import ingest
from .pipeline import WavePipeline, compare_sources
from .utils import configure_logging

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_INVALID = 2


def command_validate(config: RunConfig) -> int:
    bundle = ingest(config)
    print(f"Configuration and inputs are valid: {len(bundle.units)} units, {len(config.waves)} wave(s)")
    if bundle.imputed_cells:
        print(f"{len(bundle.imputed_cells)} covariate cell(s) mean-imputed")
    return EXIT_OK


def command_run(config: RunConfig, waves: Optional[List[str]] = None) -> int:
    bundle = ingest(config)
    results = WavePipeline(bundle, config).run(waves)
    for wave_id, result in results.items():
        sizes = result.clustering.cluster_sizes() if result.clustering else []
        print(f"{wave_id}: {len(bundle.units)} units, k={len(sizes)} clusters {sizes}")
    print(f"Artifacts written to: {config.output_dir}")
    return EXIT_OK


def command_compare_sources(config: RunConfig) -> int:
    bundle = ingest(config)
    report = compare_sources(bundle, config)
    if report is None:
        print("No comparison inputs configured; nothing to compare")
    else:
        print(f"Source ratios written to: {config.output_dir}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    argp = argparse.ArgumentParser(description="Functional analysis of epidemic waves")
    argp.add_argument("--debug", action="store_true", help="Enable debug logging")
    sub = argp.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run the full analysis and write all artifacts")
    run.add_argument("--config", required=True, help="Path to the JSON run configuration")
    run.add_argument("--wave", action="append", dest="waves", help="Only run this wave (repeatable)")
    run.add_argument("--debug", action="store_true", default=argparse.SUPPRESS, help="Enable debug logging")

    for name, text in (("validate", "Check the configuration and input files only"),
                       ("compare-sources", "Region-level consistency ratios between data sources")):
        parser = sub.add_parser(name, help=text)
        parser.add_argument("--config", required=True, help="Path to the JSON run configuration")
        parser.add_argument("--debug", action="store_true", default=argparse.SUPPRESS, help="Enable debug logging")

    args = argp.parse_args(argv)
    configure_logging(logging.DEBUG if args.debug else logging.INFO)

    try:
        config = load_config(args.config)
        if args.command == "validate":
            return command_validate(config)
        if args.command == "compare-sources":
            return command_compare_sources(config)
        return command_run(config, args.waves)
    except InputError as exc:
        LOGGER.error("Validation failed: %s", exc)
        return EXIT_INVALID
    except Exception as exc:
        LOGGER.error("Run failed: %s", exc)
        LOGGER.debug("Traceback", exc_info=True)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
