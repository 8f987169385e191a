"""Binary model files with a YAML metadata sidecar.

Layout of a model file (all integers little-endian)::

    8 bytes   magic b"CRBMTWIN"
    uint32    format version
    uint64    header length L
    L bytes   UTF-8 JSON header: layout, hidden kind, array shapes, schema,
              schema hash, normalizers and free-form metadata
    ...       float64 little-endian arrays in the order W, vbias, vlogscale,
              hbias, hlogscale (W row-major, visible index first)
    32 bytes  SHA-256 of everything above
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..cohort.normalize import Normalizers
from ..cohort.schema import CohortSchema
from ..errors import ModelFormatError, UnsupportedVersionError
from .layout import BlockLayout
from .model import PARAM_NAMES, CrbmParams

MAGIC = b"CRBMTWIN"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")


@dataclass
class ModelBundle:
    params: CrbmParams
    schema: CohortSchema | None = None
    normalizers: Normalizers | None = None
    meta: dict = field(default_factory=dict)

    @property
    def schema_hash(self) -> str | None:
        return self.schema.hash() if self.schema is not None else None


def sidecar_path(path) -> Path:
    return Path(str(path) + ".meta.yaml")


def encode_model(bundle: ModelBundle) -> bytes:
    p = bundle.params
    header = {
        "layout": p.layout.to_dict(),
        "hidden": p.hidden,
        "shapes": {k: list(getattr(p, k).shape) for k in PARAM_NAMES},
        "schema": bundle.schema.to_dict() if bundle.schema is not None else None,
        "schema_hash": bundle.schema_hash,
        "normalizers": bundle.normalizers.to_dict() if bundle.normalizers is not None else None,
        "meta": bundle.meta,
    }
    hbytes = json.dumps(header, sort_keys=True).encode("utf-8")
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(hbytes)) + hbytes
    body += b"".join(np.ascontiguousarray(getattr(p, k), dtype="<f8").tobytes() for k in PARAM_NAMES)
    return body + hashlib.sha256(body).digest()


def decode_model(data: bytes) -> ModelBundle:
    if len(data) < _PREFIX.size + 32:
        raise ModelFormatError("model file is truncated")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise ModelFormatError("not a model file (bad magic bytes)")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"model format version {version} is not supported (expected {FORMAT_VERSION})")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ModelFormatError("model file checksum mismatch (corrupted or truncated)")
    start = _PREFIX.size
    try:
        header = json.loads(body[start:start + hlen].decode("utf-8"))
        layout = BlockLayout.from_dict(header["layout"])
        offset = start + hlen
        arrays = {}
        for k in PARAM_NAMES:
            shape = tuple(header["shapes"][k])
            n = int(np.prod(shape)) * 8
            arrays[k] = np.frombuffer(body[offset:offset + n], dtype="<f8").reshape(shape).astype(float)
            offset += n
        if offset != len(body):
            raise ModelFormatError("model file has trailing bytes")
        params = CrbmParams(layout, hidden=header["hidden"], **arrays)
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError(f"malformed model file: {exc}") from exc
    schema = CohortSchema.from_dict(header["schema"]) if header.get("schema") else None
    if schema is not None and header.get("schema_hash") != schema.hash():
        raise ModelFormatError("schema hash does not match the embedded schema")
    norms = Normalizers.from_dict(header["normalizers"]) if header.get("normalizers") else None
    return ModelBundle(params, schema, norms, header.get("meta") or {})


def save_model(path, bundle: ModelBundle) -> None:
    path = Path(path)
    data = encode_model(bundle)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    side = {
        "format_version": FORMAT_VERSION,
        "schema_hash": bundle.schema_hash,
        "model_sha256": hashlib.sha256(data).hexdigest(),
        "n_visible": bundle.params.n_visible,
        "n_hidden": bundle.params.n_hidden,
        "hidden": bundle.params.hidden,
        "lag": bundle.params.layout.lag,
        "meta": bundle.meta,
    }
    sidecar_path(path).write_text(yaml.safe_dump(side, sort_keys=False))


def load_model(path) -> ModelBundle:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    return decode_model(data)


def model_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
