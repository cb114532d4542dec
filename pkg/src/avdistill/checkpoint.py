"""Self-describing binary checkpoints for the two-tower model.

Layout (all little-endian):

    magic "XMDL" | u16 format version | u8 precision tag (0 = f32, 1 = f64)
    | audio tower block | visual tower block | tensors in declaration order

Tower block: u32 input_dim | u32 n_hidden | n_hidden x u32 hidden dims
| u32 output_dim | f64 dropout_rate.

Tensors follow in parameters() order (audio w0, b0, ... then visual), each as
u32 rank | rank x u32 dims | values as IEEE-754 at the file's precision.
Saving always writes the 64-bit tag; loading a 32-bit file upcasts values, so
roundtrips preserve values for both tags and bytes for 64-bit files.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError
from .model import Tower, TowerSpec, TwoTowerModel
from .nn import DTYPE

XMDL_MAGIC = b"XMDL"
XMDL_VERSION = 1

_PRECISION_F32 = 0
_PRECISION_F64 = 1


def save_checkpoint(model: TwoTowerModel, path: str | Path) -> None:
    out = bytearray()
    out += XMDL_MAGIC
    out += struct.pack("<HB", XMDL_VERSION, _PRECISION_F64)
    for spec in (model.audio.spec, model.visual.spec):
        out += _pack_tower_spec(spec)
    for tensor in model.parameters():
        out += struct.pack("<I", tensor.ndim)
        out += struct.pack(f"<{tensor.ndim}I", *tensor.shape)
        out += np.ascontiguousarray(tensor, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(out))


def load_checkpoint(path: str | Path) -> TwoTowerModel:
    raw = Path(path).read_bytes()
    reader = _Reader(raw)
    magic = reader.take(4, "magic")
    if magic != XMDL_MAGIC:
        raise FormatError(
            f"bad magic {magic!r} at byte 0, expected {XMDL_MAGIC!r}"
        )
    (version,) = struct.unpack("<H", reader.take(2, "format version"))
    if version != XMDL_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}, expected {XMDL_VERSION}")
    (precision,) = struct.unpack("<B", reader.take(1, "precision tag"))
    if precision not in (_PRECISION_F32, _PRECISION_F64):
        raise FormatError(f"unknown precision tag {precision} at byte {reader.offset - 1}")
    value_dtype = "<f4" if precision == _PRECISION_F32 else "<f8"

    audio_spec = _unpack_tower_spec(reader, "audio")
    visual_spec = _unpack_tower_spec(reader, "visual")

    tensors: dict[str, list[np.ndarray]] = {"audio": [], "visual": []}
    for tower_name, spec in (("audio", audio_spec), ("visual", visual_spec)):
        for i, (d_in, d_out) in enumerate(spec.layer_dims):
            w = _read_tensor(reader, f"{tower_name}.layer{i}.weights", (d_in, d_out), value_dtype)
            b = _read_tensor(reader, f"{tower_name}.layer{i}.bias", (d_out,), value_dtype)
            tensors[tower_name] += [w, b]
    if reader.remaining():
        raise FormatError(
            f"{reader.remaining()} trailing bytes after the last tensor (byte {reader.offset})"
        )
    audio = Tower.from_parameters(audio_spec, tensors["audio"])
    visual = Tower.from_parameters(visual_spec, tensors["visual"])
    return TwoTowerModel(audio, visual)


class _Reader:
    def __init__(self, raw: bytes) -> None:
        self.raw = raw
        self.offset = 0

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.raw):
            raise FormatError(
                f"unexpected end of file at byte {len(self.raw)} while reading {what} "
                f"(needed {self.offset + n} bytes)"
            )
        chunk = self.raw[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def remaining(self) -> int:
        return len(self.raw) - self.offset


def _pack_tower_spec(spec: TowerSpec) -> bytes:
    out = struct.pack("<II", spec.input_dim, len(spec.hidden_dims))
    out += struct.pack(f"<{len(spec.hidden_dims)}I", *spec.hidden_dims)
    out += struct.pack("<I", spec.output_dim)
    out += struct.pack("<d", spec.dropout_rate)
    return out


def _unpack_tower_spec(reader: _Reader, tower_name: str) -> TowerSpec:
    what = f"{tower_name} tower spec"
    input_dim, n_hidden = struct.unpack("<II", reader.take(8, what))
    if n_hidden == 0 or n_hidden > 64:
        raise FormatError(f"implausible hidden layer count {n_hidden} in {what}")
    hidden = struct.unpack(f"<{n_hidden}I", reader.take(4 * n_hidden, what))
    (output_dim,) = struct.unpack("<I", reader.take(4, what))
    (dropout_rate,) = struct.unpack("<d", reader.take(8, what))
    try:
        return TowerSpec(
            input_dim=input_dim,
            output_dim=output_dim,
            hidden_dims=tuple(hidden),
            dropout_rate=dropout_rate,
        )
    except Exception as e:
        raise FormatError(f"invalid {what}: {e}") from None


def _read_tensor(
    reader: _Reader, name: str, expected_shape: tuple[int, ...], value_dtype: str
) -> np.ndarray:
    (rank,) = struct.unpack("<I", reader.take(4, f"rank of {name}"))
    if rank != len(expected_shape):
        raise FormatError(
            f"tensor {name} has rank {rank}, expected {len(expected_shape)} "
            f"(byte {reader.offset - 4})"
        )
    dims = struct.unpack(f"<{rank}I", reader.take(4 * rank, f"dims of {name}"))
    if dims != expected_shape:
        raise FormatError(f"tensor {name} has dims {dims}, expected {expected_shape}")
    count = int(np.prod(dims)) if dims else 1
    itemsize = np.dtype(value_dtype).itemsize
    values = reader.take(count * itemsize, f"values of {name}")
    arr = np.frombuffer(values, dtype=value_dtype, count=count).astype(DTYPE).reshape(dims)
    return arr.copy()
