"""Utility helpers for the wavecurve package.

This module provides:
- Logging configuration
- Deterministic seed derivation
- Deterministic CSV/JSON writing and file checksums
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import zlib
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd

FLOAT_FORMAT = "%.10g"

PathLike = Union[str, Path]


def configure_logging(level: int = logging.INFO) -> None:
    """Configure root logger for the application.

    Parameters
    ----------
    level: int
        Logging level, e.g., logging.INFO or logging.DEBUG
    """
    logging.basicConfig(
        level=level,
        format="%(asctime)s | %(levelname)s | %(name)s | %(message)s",
    )


def derive_seed(master_seed: int, label: str, counter: int = 0) -> np.random.SeedSequence:
    """Counter-based child seed for a named stage.

    The label is folded into the entropy with crc32 so that the same
    (master, label, counter) triple always yields the same stream,
    independently of which other stages ran before.
    """
    tag = zlib.crc32(label.encode("utf-8"))
    return np.random.SeedSequence([int(master_seed), tag, int(counter)])


def rng_for(master_seed: int, label: str, counter: int = 0) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, label, counter))


def file_sha256(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    """Write a frame with locale-independent, 10-significant-digit floats."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(target, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return target


def canonical_json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, default=_json_default)


def write_json_atomic(payload: Dict[str, Any], path: PathLike) -> Path:
    """Write JSON through a temp file and os.replace so readers never see a partial file."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=str(target.parent), prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(canonical_json(payload))
            fh.write("\n")
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return target


def _json_default(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(FLOAT_FORMAT % float(value))
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
