"""Derived matrices: mean frequencies, deviations, pair differences, bits.

From a readings tensor we derive, in order:

* ``freq``: per-RO mean frequency over the measurement samples, one column
  per device (num_ros x num_devices).
* ``dev``: ``freq`` minus each device's mean over its ROs, which removes the
  per-device global offset.
* ``diff``: difference within adjacent RO pairs, row k holds
  ``freq[2k+1] - freq[2k]`` (num_pairs x num_devices).
* ``bits``: the response bit per pair and device, 1 where the difference is
  strictly positive, 0 otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import ReadingsTensor
from .errors import ConfigurationError, StructuralError


@dataclass(frozen=True)
class PufMatrices:
    freq: np.ndarray
    dev: np.ndarray
    diff: np.ndarray
    bits: np.ndarray

    def __post_init__(self):
        for name in ("freq", "dev", "diff", "bits"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def num_ros(self) -> int:
        return self.freq.shape[0]

    @property
    def num_devices(self) -> int:
        return self.freq.shape[1]

    @property
    def num_pairs(self) -> int:
        return self.diff.shape[0]


def build_matrices(readings: ReadingsTensor) -> PufMatrices:
    """Compute all four derived matrices from raw readings."""
    values = readings.values
    num_devices, num_ros, num_samples = values.shape
    if num_ros % 2 != 0:
        raise ConfigurationError(
            f"RO count must be even for pairwise grouping, got {num_ros}"
        )
    # Accumulate sample means left to right so results are bit-reproducible
    # regardless of how the loop is scheduled.
    acc = np.zeros((num_devices, num_ros))
    for t in range(num_samples):
        acc += values[:, :, t]
    freq = (acc / num_samples).T
    dev = freq - freq.mean(axis=0, keepdims=True)
    diff = freq[1::2, :] - freq[0::2, :]
    bits = (diff > 0.0).astype(np.uint8)
    return PufMatrices(freq=freq, dev=dev, diff=diff, bits=bits)


def pack_bits(bits: np.ndarray) -> bytes:
    """Pack a bit matrix into bytes, device by device.

    Device columns are emitted in index order; within a device, pair bits are
    packed eight at a time with pair ``8m`` in the most significant position
    of byte ``m``. The pair count must be a multiple of eight: padding is not
    allowed because it would change the byte stream that downstream
    compressors see.
    """
    bits = np.asarray(bits)
    if bits.ndim != 2:
        raise StructuralError(f"bit matrix must be 2-dimensional, got {bits.shape}")
    num_pairs, num_devices = bits.shape
    if num_pairs % 8 != 0:
        raise ConfigurationError(
            f"pair count must be a multiple of 8 to pack without padding, "
            f"got {num_pairs}"
        )
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("bit matrix entries must be 0 or 1")
    return np.packbits(bits.T.astype(np.uint8), bitorder="big").tobytes()


def unpack_bits(data: bytes, num_pairs: int, num_devices: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`."""
    if num_pairs % 8 != 0:
        raise ConfigurationError(
            f"pair count must be a multiple of 8, got {num_pairs}"
        )
    expected = num_pairs * num_devices // 8
    if len(data) != expected:
        raise StructuralError(
            f"packed stream has {len(data)} bytes, expected {expected} for "
            f"{num_pairs} pairs x {num_devices} devices"
        )
    flat = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="big")
    return np.ascontiguousarray(flat.reshape(num_devices, num_pairs).T)
