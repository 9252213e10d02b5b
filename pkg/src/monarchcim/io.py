"""File formats: flat key=value run configuration, the plain binary matrix
format (16-byte header `rows:u64,cols:u64` little-endian + float64 row-major),
and atomic text/CSV writes (temp file + rename, so failures never leave a
partially written artifact).
"""

from __future__ import annotations

import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import ConfigError

_HEADER = struct.Struct("<QQ")


def parse_config(text: str) -> dict[str, str]:
    """Flat `key = value` lines; optional [section] headers prefix keys with
    `section.`. Blank lines and # comments ignored."""
    out: dict[str, str] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if not section:
                raise ConfigError(f"line {lineno}: empty section name")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        full = f"{section}.{key}" if section else key
        if full in out:
            raise ConfigError(f"line {lineno}: duplicate key {full!r}")
        out[full] = value
    return out


def load_config(path) -> dict[str, str]:
    return parse_config(Path(path).read_text())


def write_matrix(path, a) -> None:
    a = np.ascontiguousarray(a, dtype="<f8")
    if a.ndim != 2:
        raise ValueError("binary matrix format stores 2-D arrays")
    payload = _HEADER.pack(a.shape[0], a.shape[1]) + a.tobytes()
    atomic_write_bytes(path, payload)


def read_matrix(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValueError(f"{path}: truncated header")
    rows, cols = _HEADER.unpack_from(data)
    expected = _HEADER.size + rows * cols * 8
    if len(data) != expected:
        raise ValueError(
            f"{path}: expected {expected} bytes for {rows}x{cols}, got {len(data)}"
        )
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    return body.reshape(rows, cols).copy()


def _atomic_write(path, data, mode):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    _atomic_write(path, text, "w")


def atomic_write_bytes(path, data: bytes) -> None:
    _atomic_write(path, data, "wb")
