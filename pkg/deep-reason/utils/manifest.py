"""
Run manifests
"""
import os
from typing import Any, Dict, Iterable, Optional, Sequence

import settings
from schemas.manifest import RunManifest
from storage import canonical_json, sha256_file, sha256_text, write_json

MANIFEST_FILE = "manifest.json"


def file_hashes(paths: Iterable[str]) -> Dict[str, str]:
    """basename -> sha256 of the file, sorted by name"""
    return dict(sorted((os.path.basename(p), sha256_file(p)) for p in paths))


def build_manifest(command: Sequence[str], seed: int, config: Dict[str, Any], inputs: Iterable[str] = (),
                   outputs: Iterable[str] = (), summary: Optional[Dict[str, Any]] = None,
                   split_hash: Optional[str] = None) -> RunManifest:
    return RunManifest(
        command=list(command),
        seed=seed,
        config_hash=sha256_text(canonical_json(config)),
        split_hash=split_hash,
        inputs=file_hashes(inputs),
        outputs=file_hashes(outputs),
        version=settings.VERSION,
        summary=summary or {},
    )


def write_manifest(out_dir: str, manifest: RunManifest) -> str:
    path = os.path.join(out_dir, MANIFEST_FILE)
    write_json(path, manifest.model_dump(mode="json"))
    return path


def manifest_path_for(output_file: str) -> str:
    """scores.jsonl -> scores.manifest.json, beside the file"""
    stem = os.path.splitext(output_file)[0]
    return f"{stem}.{MANIFEST_FILE}"


def write_file_manifest(output_file: str, manifest: RunManifest) -> str:
    """Manifest for a single-file output; several outputs may share a directory"""
    path = manifest_path_for(output_file)
    write_json(path, manifest.model_dump(mode="json"))
    return path
