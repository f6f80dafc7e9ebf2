"""
Model Checkpoints

Little-endian binary layout:

    b"DGDN" | u32 version | u32 p | u32 k | u32 n_stages | u32 flags
    per stage:
        f64 raw_eta
        conv_a.weight, conv_a.bias,
        conv_b[0].weight, conv_b[0].bias, ...   (1 block, or k-1 when flags & 1)
        fuse.weight, fuse.bias
        (each array: u64 element count, then float64 values, C order)
    u64 checksum   (first 8 bytes of blake2b over everything before it)
"""

from __future__ import annotations

import hashlib
import os
import struct
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from core.errors import CheckpointIntegrityError, CheckpointVersionError
from core.tensor import Tensor, default_dtype
from model.network import KERNEL_SIZE, ConvBlock, DgdnModel, StageParams, b_block_count
from utils.logging_config import get_logger

logger = get_logger("checkpoint")

MAGIC = b"DGDN"
VERSION = 1
FLAG_DISTINCT_B = 1

_HEADER = struct.Struct("<4sIIIII")
_F64 = struct.Struct("<d")
_U64 = struct.Struct("<Q")


def payload_checksum(payload: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def _array_bytes(tensor: Tensor) -> bytes:
    values = np.ascontiguousarray(tensor.data, dtype="<f8")
    return _U64.pack(values.size) + values.tobytes()


def serialize_model(model: DgdnModel) -> bytes:
    flags = FLAG_DISTINCT_B if model.distinct_b else 0
    chunks = [_HEADER.pack(MAGIC, VERSION, model.p, model.k, model.n_stages, flags)]
    for stage in model.stages:
        chunks.append(_F64.pack(stage.raw_eta.item()))
        for tensor in stage.parameters()[1:]:
            chunks.append(_array_bytes(tensor))
    payload = b"".join(chunks)
    return payload + _U64.pack(payload_checksum(payload))


def save_checkpoint(model: DgdnModel, path: Union[str, Path]) -> int:
    """Write atomically; returns the checksum."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = serialize_model(model)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)
    checksum = _U64.unpack_from(blob, len(blob) - _U64.size)[0]
    logger.info("checkpoint saved", data={"path": str(path), "checksum": f"{checksum:016x}", "bytes": len(blob)})
    return checksum


class _Reader:
    def __init__(self, payload: bytes, offset: int):
        self.payload = payload
        self.offset = offset

    def take(self, fmt: struct.Struct) -> tuple:
        if self.offset + fmt.size > len(self.payload):
            raise CheckpointIntegrityError("checkpoint payload ends early", {"offset": self.offset})
        values = fmt.unpack_from(self.payload, self.offset)
        self.offset += fmt.size
        return values

    def array(self, shape: Tuple[int, ...]) -> np.ndarray:
        (count,) = self.take(_U64)
        expected = int(np.prod(shape))
        if count != expected:
            raise CheckpointIntegrityError("array length does not match model shape", {"expected": expected, "got": count})
        end = self.offset + 8 * count
        if end > len(self.payload):
            raise CheckpointIntegrityError("checkpoint payload ends early", {"offset": self.offset})
        values = np.frombuffer(self.payload, dtype="<f8", count=count, offset=self.offset).reshape(shape)
        self.offset = end
        return values


def deserialize_model(blob: bytes) -> DgdnModel:
    if len(blob) < len(MAGIC) or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointVersionError("not a DGDN checkpoint", {"magic": blob[: len(MAGIC)].hex()})
    if len(blob) < _HEADER.size + _U64.size:
        raise CheckpointIntegrityError("checkpoint is truncated", {"bytes": len(blob)})

    payload, trailer = blob[:-_U64.size], blob[-_U64.size:]
    stored = _U64.unpack(trailer)[0]
    actual = payload_checksum(payload)
    if stored != actual:
        raise CheckpointIntegrityError("checkpoint checksum mismatch", {"stored": f"{stored:016x}", "actual": f"{actual:016x}"})

    reader = _Reader(payload, 0)
    _, version, p, k, n_stages, flags = reader.take(_HEADER)
    if version != VERSION:
        raise CheckpointVersionError("unsupported checkpoint version", {"version": version, "supported": VERSION})

    distinct_b = bool(flags & FLAG_DISTINCT_B)
    dtype = default_dtype()
    size = KERNEL_SIZE
    stages: List[StageParams] = []
    for _ in range(n_stages):
        (raw_eta,) = reader.take(_F64)
        conv_a = ConvBlock(Tensor.parameter(reader.array((p, 1, size, size)), dtype), Tensor.parameter(reader.array((p,)), dtype))
        conv_b = [
            ConvBlock(Tensor.parameter(reader.array((p, p, size, size)), dtype), Tensor.parameter(reader.array((p,)), dtype))
            for _ in range(b_block_count(k, distinct_b))
        ]
        fuse = ConvBlock(
            Tensor.parameter(reader.array((1, 1 + k * p, 1, 1)), dtype),
            Tensor.parameter(reader.array((1,)), dtype),
        )
        stages.append(StageParams(Tensor.parameter(np.asarray(raw_eta), dtype), conv_a, conv_b, fuse))

    if reader.offset != len(payload):
        raise CheckpointIntegrityError("trailing bytes after model payload", {"extra": len(payload) - reader.offset})
    return DgdnModel(stages=stages, p=p, k=k, distinct_b=distinct_b)


def load_checkpoint(path: Union[str, Path]) -> DgdnModel:
    path = Path(path)
    model = deserialize_model(path.read_bytes())
    logger.info("checkpoint loaded", data={"path": str(path), "p": model.p, "k": model.k, "n_stages": model.n_stages})
    return model
