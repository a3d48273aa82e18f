"""Byte-stable checkpoint archives.

A checkpoint is an uncompressed zip with fixed timestamps holding
``manifest.json`` (model kind, config, vocabulary, parameter shapes) and one
``params/<name>.f8`` entry per parameter with its raw little-endian float64
values in C order.
"""

from __future__ import annotations

import io
import json
import zipfile
from pathlib import Path
from typing import Any, Mapping

import numpy as np

_EPOCH = (1980, 1, 1, 0, 0, 0)


def _entry(name: str) -> zipfile.ZipInfo:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    return info


def dumps_checkpoint(manifest: Mapping[str, Any], params: Mapping[str, np.ndarray]) -> bytes:
    meta = dict(manifest)
    meta["params"] = [{"name": k, "shape": list(v.shape)} for k, v in params.items()]
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        zf.writestr(_entry("manifest.json"), json.dumps(meta, indent=2, sort_keys=True))
        for name, arr in params.items():
            zf.writestr(_entry(f"params/{name}.f8"), np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return buf.getvalue()


def save_checkpoint(path: str | Path, manifest: Mapping[str, Any], params: Mapping[str, np.ndarray]) -> None:
    Path(path).write_bytes(dumps_checkpoint(manifest, params))


def load_checkpoint(path: str | Path) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        params = {}
        for spec in manifest["params"]:
            raw = zf.read(f"params/{spec['name']}.f8")
            params[spec["name"]] = np.frombuffer(raw, dtype="<f8").reshape(spec["shape"]).astype(np.float64)
    return manifest, params
