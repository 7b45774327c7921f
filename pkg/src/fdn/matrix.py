"""Dense 2-D float64 matrices: the single tensor type used everywhere.

Entries are stored row-major. Matrices are treated as immutable after
construction; operations return fresh instances. The public constructor
validates shape and finiteness, while internal code uses ``Matrix.wrap``
on arrays it already knows to be sound.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


class Matrix:
    __slots__ = ("data",)

    def __init__(self, values: Sequence | np.ndarray) -> None:
        arr = np.array(values, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ShapeError(f"matrix must be 2-D, got {arr.ndim}-D input")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"matrix dimensions must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("matrix entries must be finite")
        self.data = arr

    @classmethod
    def wrap(cls, arr: np.ndarray) -> "Matrix":
        # Trusted fast path for arrays produced by our own float64 ops.
        m = object.__new__(cls)
        m.data = arr
        return m

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Matrix":
        return cls.wrap(np.zeros((rows, cols)))

    @classmethod
    def full(cls, rows: int, cols: int, fill: float) -> "Matrix":
        return cls(np.full((rows, cols), fill, dtype=np.float64))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Matrix":
        return cls(rows)

    @classmethod
    def column(cls, values: Sequence[float] | np.ndarray) -> "Matrix":
        return cls(np.asarray(values, dtype=np.float64).reshape(-1, 1))

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def values(self) -> list[float]:
        """Entries as a flat row-major list."""
        return self.data.ravel(order="C").tolist()

    def copy(self) -> "Matrix":
        return Matrix.wrap(self.data.copy())

    def __repr__(self) -> str:
        return f"Matrix({self.rows}x{self.cols})"
