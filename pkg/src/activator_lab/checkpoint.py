"""Flat binary checkpoint container.

Layout (all integers little-endian):
  magic          5 bytes  b"ACTV1"
  arch_len       u32, then arch name bytes (ascii)
  config ints    10 x i32: ps, d_model, n_blocks, d_mlp, heads, n_classes,
                 pos_embed, stream_norm, final_norm, seed
  n_records      u32
  per record:    u32 name_len, name bytes (utf-8), u32 rank,
                 rank x u32 extents, then float32 data (little-endian,
                 row-major)

Round-trips bit-exactly for float32 parameters.
"""

import struct

import numpy as np

from .models import ModelConfig

MAGIC = b"ACTV1"

_CONFIG_INTS = ("ps", "d_model", "n_blocks", "d_mlp", "heads", "n_classes",
                "pos_embed", "stream_norm", "final_norm", "seed")


class CheckpointError(RuntimeError):
    """Corrupt or mismatched checkpoint."""


def save_checkpoint(path, model):
    cfg = model.config
    with open(path, "wb") as f:
        f.write(MAGIC)
        arch = cfg.arch.encode("ascii")
        f.write(struct.pack("<I", len(arch)))
        f.write(arch)
        f.write(struct.pack("<10i", *(int(getattr(cfg, k))
                                      for k in _CONFIG_INTS)))
        params = model.parameters()
        f.write(struct.pack("<I", len(params)))
        for p in params:
            name = p.name.encode("utf-8")
            f.write(struct.pack("<I", len(name)))
            f.write(name)
            f.write(struct.pack("<I", p.ndim))
            f.write(struct.pack(f"<{p.ndim}I", *p.shape))
            f.write(np.ascontiguousarray(
                p.data, dtype="<f4").tobytes())


def _read(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise CheckpointError(f"truncated checkpoint while reading {what}")
    return buf


def load_checkpoint(path):
    """Returns (ModelConfig, dict name -> float32 ndarray)."""
    with open(path, "rb") as f:
        if _read(f, 5, "magic") != MAGIC:
            raise CheckpointError(f"{path}: bad magic, not a checkpoint")
        (arch_len,) = struct.unpack("<I", _read(f, 4, "arch length"))
        arch = _read(f, arch_len, "arch name").decode("ascii")
        ints = struct.unpack("<10i", _read(f, 40, "config"))
        fields = dict(zip(_CONFIG_INTS, ints))
        for flag in ("pos_embed", "stream_norm", "final_norm"):
            fields[flag] = bool(fields[flag])
        config = ModelConfig(arch=arch, **fields)
        (n_records,) = struct.unpack("<I", _read(f, 4, "record count"))
        records = {}
        for i in range(n_records):
            (name_len,) = struct.unpack("<I", _read(f, 4, f"record {i} name"))
            name = _read(f, name_len, f"record {i} name").decode("utf-8")
            (rank,) = struct.unpack("<I", _read(f, 4, f"{name} rank"))
            shape = struct.unpack(f"<{rank}I",
                                  _read(f, 4 * rank, f"{name} shape"))
            count = int(np.prod(shape)) if rank else 1
            raw = _read(f, 4 * count, f"{name} data")
            records[name] = np.frombuffer(raw, dtype="<f4").reshape(shape)
        trailing = f.read(1)
        if trailing:
            raise CheckpointError(f"{path}: trailing bytes after records")
    return config, records


def restore_model(path, dtype=np.float32):
    """Rebuild a model from a checkpoint and load its parameters."""
    from .models import build

    config, records = load_checkpoint(path)
    model = build(config, dtype=dtype)
    named = model.named_parameters()
    if set(named) != set(records):
        missing = set(named) - set(records)
        extra = set(records) - set(named)
        raise CheckpointError(
            f"parameter mismatch: missing {sorted(missing)}, "
            f"unexpected {sorted(extra)}")
    for name, p in named.items():
        rec = records[name]
        if rec.shape != p.shape:
            raise CheckpointError(
                f"{name}: shape {rec.shape} in checkpoint, model has "
                f"{p.shape}")
        p.data = rec.astype(dtype)
    return model
