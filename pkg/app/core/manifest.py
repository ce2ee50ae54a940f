"""Provenance manifests written next to every artifact."""

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from app.core.errors import UsageError
from config import TOOL_VERSION

logger = logging.getLogger(__name__)

MANIFEST_SUFFIX = ".manifest.json"


def file_digest(path: Path) -> str:
    """sha256 of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_path(artifact: Path) -> Path:
    artifact = Path(artifact)
    return artifact.with_name(artifact.name + MANIFEST_SUFFIX)


def ensure_writable(path: Path, force: bool) -> Path:
    """Refuse to overwrite an existing artifact unless ``force`` is set."""
    path = Path(path)
    if path.exists() and not force:
        raise UsageError(f"output exists: {path} (use --force to overwrite)")
    return path


class RunManifest(BaseModel):
    command: str
    argv: List[str] = []
    config_path: Optional[str] = None
    config: Optional[Dict[str, Any]] = None
    seeds: Dict[str, Any] = {}
    inputs: Dict[str, str] = Field(default_factory=dict, description="path -> sha256")
    outputs: Dict[str, str] = Field(default_factory=dict, description="path -> sha256")
    tool_version: str = TOOL_VERSION
    duration_s: float = 0.0

    def add_input(self, path: Path) -> None:
        self.inputs[str(path)] = file_digest(path)

    def add_output(self, path: Path) -> None:
        self.outputs[str(path)] = file_digest(path)

    def verify(self) -> List[str]:
        """Paths whose current digest differs from the recorded one (missing files included)."""
        stale = []
        for recorded in (self.inputs, self.outputs):
            for name, digest in recorded.items():
                path = Path(name)
                if not path.exists() or file_digest(path) != digest:
                    stale.append(name)
        return stale


def write_manifest(manifest: RunManifest, artifact: Path) -> Path:
    path = manifest_path(artifact)
    path.write_text(json.dumps(manifest.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")
    logger.debug("Wrote manifest %s", path)
    return path


def read_manifest(artifact: Path) -> RunManifest:
    return RunManifest.model_validate_json(manifest_path(artifact).read_text(encoding="utf-8"))


__all__ = ["RunManifest", "ensure_writable", "file_digest", "manifest_path", "read_manifest", "write_manifest"]
