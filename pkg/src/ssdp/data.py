"""IDX datasets, spike encoders and synthetic synchrony tasks.

Raster cache files use a flat big-endian layout::

    int32 T | int32 B | int32 N | packbits(raster.ravel(order="C"), bitorder="big")

i.e. a 12-byte header followed by ``ceil(T*B*N / 8)`` bytes, the last byte
zero-padded.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    ContractError,
    DataError,
    IdxCountMismatchError,
    IdxLengthError,
    IdxMagicError,
)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
DATA_DIR_ENV = "SSDP_DATA_DIR"

FASHION_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass
class IdxDataset:
    images: np.ndarray  # (count, rows, cols) uint8
    labels: np.ndarray  # (count,) uint8

    def __len__(self):
        return len(self.labels)

    def subset(self, idx):
        return IdxDataset(self.images[idx], self.labels[idx])


@dataclass
class EncodedBatch:
    raster: np.ndarray  # (T, batch, neurons) uint8
    labels: np.ndarray | None = None
    anchors: np.ndarray | None = None


def read_idx(path, expected_magic=None) -> np.ndarray:
    """Parse one unsigned-byte IDX file into an array."""
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(buf) < 4:
        raise IdxLengthError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", buf[:4])
    allowed = (IMAGE_MAGIC, LABEL_MAGIC) if expected_magic is None else (expected_magic,)
    if magic not in allowed:
        raise IdxMagicError(f"{path}: bad magic 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(buf) < header:
        raise IdxLengthError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", buf[4:header])
    expected = int(np.prod(dims))
    if len(buf) - header != expected:
        raise IdxLengthError(
            f"{path}: payload has {len(buf) - header} bytes, header promises {expected}"
        )
    return np.frombuffer(buf, dtype=np.uint8, offset=header).reshape(dims)


def write_idx(path, array):
    """Write a uint8 array (1-d labels or 3-d images) as an IDX file."""
    arr = np.ascontiguousarray(array, dtype=np.uint8)
    if arr.ndim not in (1, 3):
        raise ContractError("IDX writer handles 1-d labels or 3-d images only")
    magic = 0x00000800 | arr.ndim
    with open(path, "wb") as f:
        f.write(struct.pack(f">I{arr.ndim}I", magic, *arr.shape))
        f.write(arr.tobytes())


def load_idx(images_path, labels_path) -> IdxDataset:
    images = read_idx(images_path, IMAGE_MAGIC)
    labels = read_idx(labels_path, LABEL_MAGIC)
    if len(images) != len(labels):
        raise IdxCountMismatchError(
            f"{len(images)} images but {len(labels)} labels"
        )
    return IdxDataset(images, labels)


def resolve_data_dir(path=None) -> Path:
    """Explicit path, else ``$SSDP_DATA_DIR``; raises DataError if neither exists."""
    candidate = path or os.environ.get(DATA_DIR_ENV)
    if not candidate:
        raise DataError(f"no dataset path given and ${DATA_DIR_ENV} is unset")
    candidate = Path(candidate)
    if not candidate.is_dir():
        raise DataError(f"dataset directory {candidate} does not exist")
    return candidate


def load_fashion(data_dir=None, split="train") -> IdxDataset:
    root = resolve_data_dir(data_dir)
    images, labels = FASHION_FILES[split]
    return load_idx(root / images, root / labels)


def _flat_intensity(images):
    x = np.asarray(images)
    return x.reshape(x.shape[0], -1).astype(np.float64) / 255.0


def encode_rate(images, T, max_rate=1.0, rng_seed=0, labels=None) -> EncodedBatch:
    """Bernoulli rate code: each step fires with ``p = pixel / 255 * max_rate``."""
    if T < 1:
        raise ContractError("T must be >= 1")
    if not 0 < max_rate <= 1:
        raise ContractError("max_rate must lie in (0, 1]")
    p = _flat_intensity(images) * max_rate
    rng = np.random.default_rng(rng_seed)
    raster = (rng.random((T,) + p.shape) < p).astype(np.uint8)
    return EncodedBatch(raster, labels)


def encode_latency(images, T, labels=None) -> EncodedBatch:
    """Time-to-first-spike code: one spike at ``rint((1 - pixel/255) * (T - 1))``.

    Brighter pixels fire earlier; zero pixels never fire. ``rint`` rounds half
    to even.
    """
    if T < 2:
        raise ContractError("latency coding needs T >= 2")
    x = _flat_intensity(images)
    times = np.rint((1.0 - x) * (T - 1)).astype(np.int64)
    raster = np.zeros((T,) + x.shape, dtype=np.uint8)
    b, n = np.nonzero(x > 0)
    raster[times[b, n], b, n] = 1
    return EncodedBatch(raster, labels)


def encode(images, T, encoder="latency", max_rate=1.0, rng_seed=0, labels=None):
    if encoder == "latency":
        return encode_latency(images, T, labels=labels)
    if encoder == "rate":
        return encode_rate(images, T, max_rate, rng_seed, labels=labels)
    raise ContractError(f"unknown encoder {encoder!r}")


@dataclass(frozen=True)
class SyntheticSynchronySpec:
    """Groups of input neurons locked to a per-sample anchor step.

    Neuron in group ``g`` spikes once at ``anchor + offsets[g] + U{-j_g..j_g}``
    with ``j_g = jitter_steps[g]``; ``base_rate`` adds independent background
    spikes per step (may move first-spike times earlier).
    """

    n_groups: int = 2
    neurons_per_group: int = 16
    jitter_steps: tuple = (0, 1)
    offsets: tuple = (0, 0)
    base_rate: float = 0.0
    T: int = 20
    n_samples: int = 16
    seed: int = 0

    def __post_init__(self):
        if len(self.jitter_steps) != self.n_groups or len(self.offsets) != self.n_groups:
            raise ContractError("need one jitter and one offset per group")
        if min(self.jitter_steps) < 0:
            raise ContractError("jitter_steps must be >= 0")
        if not 0 <= self.base_rate < 1:
            raise ContractError("base_rate must be in [0, 1)")


def gen_synchrony_task(spec: SyntheticSynchronySpec):
    """Returns ``(EncodedBatch, group_of_neuron)``; the batch carries anchors."""
    rng = np.random.default_rng(spec.seed)
    lo = max(j - o for j, o in zip(spec.jitter_steps, spec.offsets))
    hi = min(spec.T - 1 - o - j for j, o in zip(spec.jitter_steps, spec.offsets))
    lo = max(lo, 0)
    if hi < lo:
        raise ContractError("offsets and jitter do not fit inside T steps")
    n = spec.n_groups * spec.neurons_per_group
    groups = np.repeat(np.arange(spec.n_groups), spec.neurons_per_group)
    anchors = rng.integers(lo, hi + 1, size=spec.n_samples)
    jitter = np.asarray(spec.jitter_steps)[groups]
    offsets = np.asarray(spec.offsets)[groups]
    noise = rng.integers(-jitter, jitter + 1, size=(spec.n_samples, n))
    times = anchors[:, None] + offsets[None, :] + noise
    raster = np.zeros((spec.T, spec.n_samples, n), dtype=np.uint8)
    b, i = np.indices(times.shape)
    raster[times, b, i] = 1
    if spec.base_rate > 0:
        raster |= (rng.random(raster.shape) < spec.base_rate).astype(np.uint8)
    return EncodedBatch(raster, anchors=anchors), groups


def write_raster(path, raster):
    r = np.asarray(raster)
    if r.ndim != 3:
        raise ContractError("raster must be (T, batch, neurons)")
    with open(path, "wb") as f:
        f.write(struct.pack(">3i", *r.shape))
        f.write(np.packbits(r.reshape(-1) > 0, bitorder="big").tobytes())


def read_raster(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if len(buf) < 12:
        raise IdxLengthError(f"{path}: raster header truncated")
    T, B, N = struct.unpack(">3i", buf[:12])
    count = T * B * N
    packed = np.frombuffer(buf, dtype=np.uint8, offset=12)
    if len(packed) != (count + 7) // 8:
        raise IdxLengthError(f"{path}: raster payload length mismatch")
    bits = np.unpackbits(packed, count=count, bitorder="big")
    return bits.reshape(T, B, N)
