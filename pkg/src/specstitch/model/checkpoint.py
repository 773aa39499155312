"""SGNT checkpoint format.

Layout (all little-endian): magic "SGNT", u16 version, u32 config-JSON
length, config JSON, u32 tensor count, then every tensor from
SegNet.named_tensors() in traversal order: u16 name length, name (UTF-8),
u8 ndim, ndim x u32 dims, float32 payload. Parameters and batch-norm
running statistics round-trip bit-exactly.
"""

import json
import struct

import numpy as np

from ..errors import ConfigMismatch, CorruptCheckpoint
from .network import SegNet, SegNetConfig

CKPT_MAGIC = b"SGNT"
CKPT_VERSION = 1


def _config_dict(cfg: SegNetConfig):
    return {
        "n_iq": cfg.n_iq,
        "C": cfg.C,
        "widths": list(cfg.widths),
        "nonlocal_dim": cfg.nonlocal_dim,
        "use_nonlocal": cfg.use_nonlocal,
        "nonlocal_residual": cfg.nonlocal_residual,
    }


def checkpoint_save(net: SegNet, path):
    tensors = list(net.named_tensors())
    cfg_blob = json.dumps(_config_dict(net.cfg)).encode()
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHI", CKPT_MAGIC, CKPT_VERSION, len(cfg_blob)))
        fh.write(cfg_blob)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr, _ in tensors:
            blob = name.encode()
            fh.write(struct.pack("<H", len(blob)))
            fh.write(blob)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


class _Reader:
    def __init__(self, blob, path):
        self.blob = blob
        self.off = 0
        self.path = path

    def take(self, n):
        if self.off + n > len(self.blob):
            raise CorruptCheckpoint(f"{self.path}: truncated at byte {self.off}")
        out = self.blob[self.off : self.off + n]
        self.off += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def checkpoint_load(path, expect: SegNetConfig = None) -> SegNet:
    """Rebuild a float32 network from a checkpoint. When ``expect`` is given,
    the stored configuration must match it exactly."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    magic, version, cfg_len = r.unpack("<4sHI")
    if magic != CKPT_MAGIC:
        raise CorruptCheckpoint(f"{path}: bad magic {magic!r}")
    if version != CKPT_VERSION:
        raise CorruptCheckpoint(f"{path}: unsupported version {version}")
    try:
        raw = json.loads(r.take(cfg_len).decode())
        cfg = SegNetConfig(
            n_iq=raw["n_iq"],
            C=raw["C"],
            widths=tuple(raw["widths"]),
            nonlocal_dim=raw["nonlocal_dim"],
            use_nonlocal=raw["use_nonlocal"],
            nonlocal_residual=raw["nonlocal_residual"],
        )
    except (ValueError, KeyError, UnicodeDecodeError) as exc:
        raise CorruptCheckpoint(f"{path}: unreadable config ({exc})") from exc
    if expect is not None and cfg != expect:
        raise ConfigMismatch(f"checkpoint built for {cfg}, expected {expect}")
    net = SegNet(cfg, seed=0, dtype=np.float32)
    (count,) = r.unpack("<I")
    tensors = list(net.named_tensors())
    if count != len(tensors):
        raise CorruptCheckpoint(f"{path}: {count} tensors, network has {len(tensors)}")
    for name, arr, _ in tensors:
        (name_len,) = r.unpack("<H")
        stored = r.take(name_len).decode()
        if stored != name:
            raise CorruptCheckpoint(f"{path}: tensor {stored!r} where {name!r} expected")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        if shape != arr.shape:
            raise CorruptCheckpoint(f"{path}: {name} shape {shape} vs {arr.shape}")
        data = np.frombuffer(r.take(4 * arr.size), dtype="<f4").reshape(shape)
        arr[...] = data
    if r.off != len(r.blob):
        raise CorruptCheckpoint(f"{path}: {len(r.blob) - r.off} trailing bytes")
    return net
