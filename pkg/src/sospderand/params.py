"""Flat parameter vectors with named, shaped segments."""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Iterable, NamedTuple

import numpy as np


class Segment(NamedTuple):
    name: str
    offset: int
    shape: tuple[int, ...]

    @property
    def size(self) -> int:
        return prod(self.shape)

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.size)


@dataclass(frozen=True)
class ParamVector:
    """A real vector split into named blocks, e.g. ``W`` (k x d) and ``b`` (k).

    The optimizers only ever see ``data``; objectives use the segment table to
    get their matrices back.
    """

    data: np.ndarray
    segments: tuple[Segment, ...]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 1:
            raise ValueError("ParamVector data must be one-dimensional")
        object.__setattr__(self, "data", data)
        expected = 0
        names = set()
        for seg in self.segments:
            if seg.offset != expected:
                raise ValueError(f"segment {seg.name!r} does not start at {expected}")
            if seg.name in names:
                raise ValueError(f"duplicate segment name {seg.name!r}")
            names.add(seg.name)
            expected += seg.size
        if expected != data.size:
            raise ValueError(
                f"segments cover {expected} entries but data has {data.size}"
            )

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray] | Iterable[tuple[str, np.ndarray]]):
        items = arrays.items() if isinstance(arrays, dict) else arrays
        segments = []
        chunks = []
        offset = 0
        for name, arr in items:
            arr = np.asarray(arr, dtype=float)
            segments.append(Segment(name, offset, tuple(arr.shape)))
            chunks.append(arr.ravel())
            offset += arr.size
        data = np.concatenate(chunks) if chunks else np.zeros(0)
        return cls(data, tuple(segments))

    @classmethod
    def flat(cls, x) -> "ParamVector":
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        return cls(x, (Segment("x", 0, (x.size,)),))

    @property
    def dim(self) -> int:
        return self.data.size

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.segments)

    def _segment(self, name: str) -> Segment:
        for seg in self.segments:
            if seg.name == name:
                return seg
        raise KeyError(name)

    def slice_of(self, name: str) -> slice:
        return self._segment(name).slice

    def get(self, name: str) -> np.ndarray:
        """Copy of segment ``name`` in its own shape."""
        seg = self._segment(name)
        return self.data[seg.slice].reshape(seg.shape).copy()

    def __getitem__(self, name: str) -> np.ndarray:
        return self.get(name)

    def with_data(self, data) -> "ParamVector":
        return ParamVector(np.array(data, dtype=float), self.segments)

    def with_segment(self, name: str, value) -> "ParamVector":
        seg = self._segment(name)
        value = np.asarray(value, dtype=float)
        if value.size != seg.size:
            raise ValueError(f"segment {name!r} needs {seg.size} entries, got {value.size}")
        data = self.data.copy()
        data[seg.slice] = value.ravel()
        return ParamVector(data, self.segments)

    def unpack(self, x=None) -> dict[str, np.ndarray]:
        """Split ``x`` (default: own data) into shaped views keyed by segment name."""
        x = self.data if x is None else np.asarray(x, dtype=float)
        return {s.name: x[s.slice].reshape(s.shape) for s in self.segments}

    def copy(self) -> "ParamVector":
        return ParamVector(self.data.copy(), self.segments)


def as_array(p) -> np.ndarray:
    """Flat float array from a ParamVector or anything array-like."""
    if isinstance(p, ParamVector):
        return p.data
    return np.atleast_1d(np.asarray(p, dtype=float)).ravel()
