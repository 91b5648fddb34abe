"""File formats: JSON lines, environment packs and reproducibility manifests."""

from __future__ import annotations

import hashlib
import json
from collections.abc import Iterable
from pathlib import Path
from typing import Any

from . import __version__
from .env.model import FormWorld
from .errors import SchemaMismatch
from .schemas import ENVPACK_SCHEMA, MANIFEST_SCHEMA, check
from .types import Task

Suite = list[tuple[FormWorld, list[Task]]]


def dumps(obj: Any) -> str:
    """Compact JSON with insertion-ordered keys; byte-stable for equal inputs."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), allow_nan=True)


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(json.dumps(obj, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def read_json(path: str | Path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_jsonl(path: str | Path, rows: Iterable[Any]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(dumps(row) + "\n")
            n += 1
    return n


def read_jsonl(path: str | Path) -> list[Any]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_hash(config: Any) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def manifest_path(path: str | Path) -> Path:
    p = Path(path)
    return p.with_name(p.name + ".manifest.json")


def write_manifest(out: str | Path, command: str, config: Any, seeds: dict[str, Any],
                   outputs: Iterable[str | Path]) -> Path:
    """Sidecar next to ``out`` with tool version, config hash, seeds and output digests."""
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "tool": "crmarl",
        "version": __version__,
        "command": command,
        "config_hash": config_hash(config),
        "seeds": seeds,
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
    }
    target = manifest_path(out)
    write_json(target, manifest)
    return target


def envpack_json(suite: Suite, env_kind: str, difficulty: str, seed: int) -> dict[str, Any]:
    return {
        "schema": ENVPACK_SCHEMA,
        "env_kind": env_kind,
        "difficulty": difficulty,
        "seed": seed,
        "suite": [{"world": w.to_json(), "tasks": [t.to_json() for t in tasks]} for w, tasks in suite],
    }


def load_envpack(path: str | Path) -> tuple[dict[str, Any], Suite]:
    data = read_json(path)
    if not isinstance(data, dict) or data.get("schema") != ENVPACK_SCHEMA:
        raise SchemaMismatch(f"{path} is not an environment pack")
    check("envpack", data)
    suite = [(FormWorld.from_json(e["world"]), [Task.from_json(t) for t in e["tasks"]]) for e in data["suite"]]
    return data, suite
