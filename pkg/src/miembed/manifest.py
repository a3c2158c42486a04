"""Run manifests: resolved configuration plus input digests.

A manifest is written next to every output artifact so a run can be
reproduced exactly; nothing volatile (timestamps, hostnames) is
recorded, keeping repeated runs byte-identical.
"""

import hashlib
import json

from miembed import __version__


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_path_for(output_path) -> str:
    return f"{output_path}.manifest.json"


def write_manifest(path, command: str, config: dict, inputs: dict, seed) -> None:
    """Write the manifest JSON. `inputs` maps role -> input file path."""
    obj = {
        "command": command,
        "toolkit_version": __version__,
        "seed": seed,
        "config": config,
        "inputs": {
            role: {"path": str(p), "sha256": file_digest(p)} for role, p in inputs.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
