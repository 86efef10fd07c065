"""Small file helpers: atomic writes, digests, output metadata sidecars."""

from __future__ import annotations

import datetime
import hashlib
import json
import os
import tempfile
from pathlib import Path


def atomic_write_text(path: str | Path, content: str) -> None:
    """Write content to path via a temp file + rename; LF endings preserved.

    A failed write never leaves a truncated file at the target path.
    """
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(content)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_meta(
    out_path: str | Path,
    command: str,
    params: dict,
    inputs: list[str | Path],
    deterministic: bool,
) -> None:
    """Write `<out>.meta.json` next to an artifact.

    Carries the command, its parameters (seed, k, ... echoed by the caller)
    and SHA-256 digests of every input file. A wall-clock timestamp is only
    included outside deterministic mode, so deterministic reruns are
    byte-identical.
    """
    meta = {
        "command": command,
        "params": params,
        "inputs": {str(p): sha256_file(p) for p in inputs},
    }
    if not deterministic:
        meta["created_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    atomic_write_text(str(out_path) + ".meta.json", json.dumps(meta, ensure_ascii=False, indent=2) + "\n")
