"""Deterministic file output helpers: atomic writes, content hashes and
the provenance block embedded in every emitted artifact."""

import hashlib
import json
import os
import tempfile
from pathlib import Path

from . import __version__


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def sha256_file(path):
    return sha256_bytes(Path(path).read_bytes())


def provenance(command, seed=None, inputs=None, options=None):
    """Metadata block: tool version, command, seed, and sha256 of each input.

    Paths are deliberately left out so that re-running from another
    directory yields byte-identical files.
    """
    meta = {"tool": "sitaware", "version": __version__, "command": command, "seed": seed}
    meta["inputs"] = {k: sha256_file(p) for k, p in sorted((inputs or {}).items())}
    if options:
        meta["options"] = options
    return meta


def dumps_json(obj):
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write_text(path, dumps_json(obj))


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def comment_header(meta):
    """Provenance as ``# key: value`` lines for CSV outputs."""
    lines = []
    for key, value in meta.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True)
        lines.append(f"# {key}: {value}\n")
    return "".join(lines)


def strip_comments(text):
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("#"))
