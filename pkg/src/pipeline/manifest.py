"""
Run Manifest
Records, per stage, the artifacts a run wrote (relative path, content hash, kind)
and the stage's bookkeeping flags. Wall times live in a separate timings file so
that the manifest of a rerun with the same config and seed is byte-identical.
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from ..errors import ConfigError
from ..raster.maps import RasterMap
from ..utils.serialization import clean_for_json, to_json

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
TIMINGS_NAME = "timings.json"
CONFIG_NAME = "config.json"


def file_hash(path: Path) -> str:
    """sha256 of a file's bytes"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class StageRecord:
    """Artifacts and flags of one stage"""

    outputs: Dict[str, Dict[str, str]] = field(default_factory=dict)
    flags: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {"outputs": self.outputs, "flags": clean_for_json(self.flags)}


@dataclass
class Manifest:
    """
    Stage -> artifacts mapping of one pipeline run

    Attributes:
        root: Output directory; artifact paths are stored relative to it
        seed: Run seed
        profile: Config profile name
        config_sha256: Hash of the resolved configuration text
        stages: Stage records in execution order
        metrics: Metric report dictionary, filled by the evaluation stage
    """

    root: Path
    seed: int
    profile: str = "desk"
    config_sha256: str = ""
    stages: Dict[str, StageRecord] = field(default_factory=dict)
    metrics: Dict[str, Any] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)

    def stage(self, name: str) -> StageRecord:
        return self.stages.setdefault(name, StageRecord())

    def relative(self, path: Path) -> str:
        path = Path(path)
        try:
            return path.resolve().relative_to(self.root.resolve()).as_posix()
        except ValueError:
            return path.as_posix()

    def record_map(self, stage: str, name: str, map_: RasterMap, path: Path):
        self.stage(stage).outputs[name] = {
            "file": self.relative(path),
            "kind": map_.kind.value,
            "sha256": map_.content_hash(),
        }

    def record_file(self, stage: str, name: str, path: Path, kind: str = "file"):
        self.stage(stage).outputs[name] = {
            "file": self.relative(path),
            "kind": kind,
            "sha256": file_hash(path),
        }

    def output(self, stage: str, name: str) -> Dict[str, str]:
        """Recorded artifact entry; ConfigError when the stage never wrote it"""
        try:
            return self.stages[stage].outputs[name]
        except KeyError:
            raise ConfigError(f"Manifest has no output '{name}' for stage '{stage}'") from None

    def path_of(self, stage: str, name: str) -> Path:
        return self.root / self.output(stage, name)["file"]

    def last_output(self, order: Sequence[str]) -> Optional[str]:
        """Path of the latest artifact, stages ranked by ``order``"""
        for name in reversed(order):
            record = self.stages.get(name)
            if record is not None and record.outputs:
                return list(record.outputs.values())[-1]["file"]
        return None

    def drop(self, names: Sequence[str]):
        """Forget the records of the named stages"""
        for name in names:
            self.stages.pop(name, None)

    # ==================== Persistence ====================

    def to_dict(self) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "profile": self.profile,
            "config_sha256": self.config_sha256,
            "stages": {name: record.to_dict() for name, record in self.stages.items()},
            "metrics": self.metrics,
        }

    def save(self) -> Path:
        """Write manifest.json and timings.json into the output directory"""
        self.root.mkdir(parents=True, exist_ok=True)
        path = self.root / MANIFEST_NAME
        path.write_text(to_json(self.to_dict()) + "\n")
        (self.root / TIMINGS_NAME).write_text(to_json(self.timings) + "\n")
        logger.info(f"Manifest saved: {path}")
        return path

    @classmethod
    def load(cls, root: Path) -> "Manifest":
        """
        Read a manifest written by a previous run

        Raises:
            ConfigError: missing or malformed manifest
        """
        root = Path(root)
        path = root / MANIFEST_NAME
        if not path.exists():
            raise ConfigError(f"No manifest in {root}; run the full pipeline first")
        try:
            data = json.loads(path.read_text())
            manifest = cls(
                root=root,
                seed=data["seed"],
                profile=data.get("profile", "desk"),
                config_sha256=data.get("config_sha256", ""),
                metrics=data.get("metrics", {}),
            )
            for name, record in data["stages"].items():
                manifest.stages[name] = StageRecord(outputs=record["outputs"], flags=record.get("flags", {}))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise ConfigError(f"Malformed manifest {path}: {e}") from e
        timings = root / TIMINGS_NAME
        if timings.exists():
            manifest.timings = json.loads(timings.read_text())
        return manifest
