"""Per-dimension min-max normalization to [-1, 1] fit on the training set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass
class MinMaxNormalizer:
    lo: np.ndarray  # (D,) float64
    hi: np.ndarray  # (D,) float64

    @classmethod
    def fit(cls, data: np.ndarray) -> "MinMaxNormalizer":
        data = np.asarray(data, dtype=np.float64).reshape(-1, data.shape[-1])
        lo = data.min(axis=0)
        hi = data.max(axis=0)
        degenerate = np.nonzero(hi <= lo)[0]
        if degenerate.size:
            raise DataError(f"normalizer dims {degenerate.tolist()} have max <= min; "
                            "the training data never varies there")
        return cls(lo=lo, hi=hi)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return 2.0 * (x - self.lo) / (self.hi - self.lo) - 1.0

    def denormalize(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return (x + 1.0) * 0.5 * (self.hi - self.lo) + self.lo
