"""Binary checkpoint container.

Layout (all integers little-endian)::

    b"HLPS" | u32 version | u32 segment count
    per segment: u32 name length | UTF-8 name | u8 kind
      kind 0 (tensor): u32 ndim | ndim × u64 dims | f64 payload
      kind 1 (bytes):  u64 length | payload

Byte segments carry what f64 cannot hold losslessly (RNG states, the JSON config).
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path
from typing import Mapping, Union

import numpy as np
import torch

from ..autodiff import DTYPE
from ..errors import CheckpointError

MAGIC = b"HLPS"
VERSION = 1
KIND_TENSOR = 0
KIND_BYTES = 1

Segment = Union[torch.Tensor, bytes]


def _tensor_bytes(value) -> tuple[tuple[int, ...], bytes]:
    array = value.detach().cpu().numpy() if isinstance(value, torch.Tensor) else np.asarray(value)
    array = np.ascontiguousarray(array, dtype="<f8")
    return array.shape, array.tobytes()


def encode_segments(segments: Mapping[str, Segment | np.ndarray]) -> bytes:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(segments))]
    for name, value in segments.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)) + encoded)
        if isinstance(value, (bytes, bytearray)):
            chunks.append(struct.pack("<BQ", KIND_BYTES, len(value)))
            chunks.append(bytes(value))
        else:
            shape, payload = _tensor_bytes(value)
            chunks.append(struct.pack(f"<BI{len(shape)}Q", KIND_TENSOR, len(shape), *shape))
            chunks.append(payload)
    return b"".join(chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        end = self.offset + n
        if end > len(self.data):
            raise CheckpointError(f"truncated checkpoint: needed {n} bytes at offset {self.offset}, {len(self.data) - self.offset} left")
        chunk = self.data[self.offset:end]
        self.offset = end
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_segments(data: bytes) -> dict[str, Segment]:
    reader = _Reader(data)
    if reader.take(4) != MAGIC:
        raise CheckpointError("not an HLPS checkpoint (bad magic bytes)")
    version, count = reader.unpack("<II")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}, expected {VERSION}")
    segments: dict[str, Segment] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<I")
        try:
            name = reader.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError(f"corrupt segment name: {exc}") from None
        (kind,) = reader.unpack("<B")
        if kind == KIND_BYTES:
            (length,) = reader.unpack("<Q")
            segments[name] = reader.take(length)
        elif kind == KIND_TENSOR:
            (ndim,) = reader.unpack("<I")
            shape = reader.unpack(f"<{ndim}Q")
            n = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            array = np.frombuffer(reader.take(8 * n), dtype="<f8").reshape(shape)
            segments[name] = torch.tensor(array, dtype=DTYPE)
        else:
            raise CheckpointError(f"segment '{name}' has unknown kind {kind}")
    if reader.offset != len(data):
        raise CheckpointError(f"{len(data) - reader.offset} trailing bytes after the last segment")
    return segments


def write_checkpoint(path: str | Path, segments: Mapping[str, Segment | np.ndarray]) -> Path:
    """Write atomically (temporary file, then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(encode_segments(segments))
    os.replace(tmp, path)
    return path


def read_checkpoint(path: str | Path) -> dict[str, Segment]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint '{path}': {exc.strerror}") from None
    return decode_segments(data)


def require(segments: Mapping[str, Segment], name: str) -> Segment:
    try:
        return segments[name]
    except KeyError:
        raise CheckpointError(f"checkpoint has no segment '{name}'") from None


def with_prefix(segments: Mapping[str, Segment], prefix: str) -> dict[str, Segment]:
    """Sub-dictionary of segments under ``prefix.``, with the prefix stripped."""
    start = prefix + "."
    return {name[len(start):]: value for name, value in segments.items() if name.startswith(start)}


def json_segment(value) -> bytes:
    return json.dumps(value, sort_keys=True).encode("utf-8")


def read_json_segment(segments: Mapping[str, Segment], name: str):
    raw = require(segments, name)
    if not isinstance(raw, bytes):
        raise CheckpointError(f"segment '{name}' should hold bytes")
    return json.loads(raw.decode("utf-8"))


def numpy_rng_state(rng: np.random.Generator) -> bytes:
    return json_segment(rng.bit_generator.state)


def restore_numpy_rng(rng: np.random.Generator, raw: bytes) -> None:
    rng.bit_generator.state = json.loads(raw.decode("utf-8"))


def torch_rng_state(generator: torch.Generator) -> bytes:
    return generator.get_state().numpy().tobytes()


def restore_torch_rng(generator: torch.Generator, raw: bytes) -> None:
    generator.set_state(torch.tensor(np.frombuffer(raw, dtype=np.uint8).copy()))


def optimizer_segments(prefix: str, optimizer) -> dict[str, torch.Tensor]:
    """Adam moments and step counts of a NamedAdam, keyed ``prefix.<param index>.<field>``."""
    segments = {}
    for index, state in optimizer.state_dict()["state"].items():
        for key, value in state.items():
            segments[f"{prefix}.{index}.{key}"] = torch.as_tensor(value, dtype=DTYPE).detach().clone()
    return segments


def load_optimizer(prefix: str, optimizer, segments: Mapping[str, Segment]) -> None:
    state: dict[int, dict[str, torch.Tensor]] = {}
    for name, value in with_prefix(segments, prefix).items():
        index, key = name.split(".", 1)
        # Adam keeps its step count as a float32 scalar when the default dtype is float32
        tensor = torch.tensor(float(value), dtype=torch.float32) if key == "step" else value.clone()
        state.setdefault(int(index), {})[key] = tensor
    current = optimizer.state_dict()
    optimizer.load_state_dict({"state": state, "param_groups": current["param_groups"]})


def module_segments(prefix: str, module: torch.nn.Module) -> dict[str, torch.Tensor]:
    return {f"{prefix}.{name}": value.detach().clone() for name, value in module.state_dict().items()}


def load_module(prefix: str, module: torch.nn.Module, segments: Mapping[str, Segment]) -> None:
    state = with_prefix(segments, prefix)
    try:
        module.load_state_dict(state, strict=True)
    except RuntimeError as exc:
        raise CheckpointError(f"cannot restore '{prefix}': {exc}") from None
