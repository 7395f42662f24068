"""Optional on-disk cache for the expensive per-level artifacts.

Layout (versioned npz files under the cache directory):
  heilbronn-{nmax}.npz                 the flat Merel family
  space-{M}.npz                        relation quotient + cuspidal data
  raw-{M}-e{idx}-n{nterms}.npz         per-functional raw series matrices

Every payload carries a sha256 of its arrays; mismatches or version bumps
cause a silent rebuild.  Writers take a file lock and replace atomically.
Consumers re-verify the transport-consistency invariant after assembling a
basis from cached pieces.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

import numpy as np
from filelock import FileLock

CACHE_VERSION = 1

_cache_dir: Path | None = None
_disabled = False


def set_cache_dir(path: str | os.PathLike | None) -> None:
    global _cache_dir, _disabled
    if path is None:
        _disabled = True
        _cache_dir = None
        return
    _disabled = False
    _cache_dir = Path(path)
    _cache_dir.mkdir(parents=True, exist_ok=True)


def get_cache_dir() -> Path | None:
    global _cache_dir
    if _disabled:
        return None
    if _cache_dir is None:
        env = os.environ.get("EISENSTARK_CACHE")
        if env == "":
            return None
        base = Path(env) if env else Path.home() / ".cache" / "eisenstark"
        try:
            base.mkdir(parents=True, exist_ok=True)
        except OSError:
            return None
        _cache_dir = base
    return _cache_dir


def _digest(arrays: dict[str, np.ndarray]) -> str:
    h = hashlib.sha256()
    for key in sorted(arrays):
        h.update(key.encode())
        h.update(np.ascontiguousarray(arrays[key]).tobytes())
    return h.hexdigest()


def save(name: str, arrays: dict[str, np.ndarray]) -> None:
    base = get_cache_dir()
    if base is None:
        return
    payload = dict(arrays)
    payload["_version"] = np.array([CACHE_VERSION], dtype=np.int64)
    digest = _digest(payload)
    path = base / f"{name}.npz"
    lock = FileLock(str(path) + ".lock")
    try:
        with lock.acquire(timeout=60):
            fd, tmp = tempfile.mkstemp(dir=base, suffix=".tmp.npz")
            os.close(fd)
            np.savez_compressed(
                tmp, _sha256=np.frombuffer(digest.encode(), dtype=np.uint8), **payload
            )
            os.replace(tmp, path)
    except OSError:
        pass


def load(name: str) -> dict[str, np.ndarray] | None:
    base = get_cache_dir()
    if base is None:
        return None
    path = base / f"{name}.npz"
    if not path.exists():
        return None
    try:
        with np.load(path, allow_pickle=False) as z:
            data = {k: z[k] for k in z.files}
    except (OSError, ValueError, EOFError):
        return None
    sha = data.pop("_sha256", None)
    if sha is None:
        return None
    digest = bytes(sha.tolist()).decode()
    if _digest(data) != digest:
        return None
    version = data.pop("_version", None)
    if version is None or int(version[0]) != CACHE_VERSION:
        return None
    return data
