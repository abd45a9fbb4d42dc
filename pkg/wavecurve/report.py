"""Artifact writing and the run manifest."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from .config import RunConfig
from .utils import file_sha256, write_csv, write_json_atomic

LOGGER = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass
class Notice:
    stage: str
    wave: Optional[str]
    message: str

    def as_dict(self) -> Dict[str, Any]:
        return {"stage": self.stage, "wave": self.wave, "message": self.message}


@dataclass
class ArtifactWriter:
    """Writes CSV/JSON artifacts under one output root and remembers their checksums."""

    root: Path
    artifacts: Dict[str, str] = field(default_factory=dict)
    notices: List[Notice] = field(default_factory=list)

    @classmethod
    def for_config(cls, config: RunConfig) -> "ArtifactWriter":
        root = Path(config.output_dir)
        root.mkdir(parents=True, exist_ok=True)
        return cls(root=root)

    def _record(self, path: Path) -> Path:
        key = path.relative_to(self.root).as_posix()
        self.artifacts[key] = file_sha256(path)
        LOGGER.debug("Wrote %s", key)
        return path

    def csv(self, frame: pd.DataFrame, *parts: str) -> Path:
        return self._record(write_csv(frame, self.root.joinpath(*parts)))

    def json(self, payload: Dict[str, Any], *parts: str) -> Path:
        return self._record(write_json_atomic(payload, self.root.joinpath(*parts)))

    def notice(self, stage: str, message: str, wave: Optional[str] = None) -> None:
        LOGGER.warning("%s%s: %s", stage, f" [{wave}]" if wave else "", message)
        self.notices.append(Notice(stage, wave, message))

    def write_manifest(self, config: RunConfig, inputs: Optional[Dict[str, str]] = None) -> Path:
        """Last write of a run; contains no timestamps so identical runs give identical bytes."""
        payload = {
            "config_hash": config.config_hash(),
            "seed": int(config.seed),
            "waves": [w.wave_id for w in config.waves],
            "inputs": dict(sorted((inputs or {}).items())),
            "artifacts": dict(sorted(self.artifacts.items())),
            "notices": [n.as_dict() for n in self.notices],
        }
        path = write_json_atomic(payload, self.root / MANIFEST_NAME)
        LOGGER.info("Manifest with %d artifacts and %d notices written to %s",
                    len(self.artifacts), len(self.notices), path)
        return path


def curves_frame(curves: Dict[str, np.ndarray], days: np.ndarray, key: str = "feature") -> pd.DataFrame:
    """Long table (key, t, value) from per-name sampled curves."""
    frames = [pd.DataFrame({key: name, "t": days.astype(int), "value": values}) for name, values in curves.items()]
    if not frames:
        return pd.DataFrame(columns=[key, "t", "value"])
    return pd.concat(frames, ignore_index=True)


def path_frame(feature_names: List[str], lambdas: np.ndarray, coefs: np.ndarray) -> pd.DataFrame:
    """Long elastic-net path: one row per (lambda, feature)."""
    rows = []
    for i, lam in enumerate(lambdas):
        for j, name in enumerate(feature_names):
            rows.append({"step": i, "lambda1": float(lam), "feature": name, "coef": float(coefs[i, j])})
    return pd.DataFrame(rows, columns=["step", "lambda1", "feature", "coef"])
