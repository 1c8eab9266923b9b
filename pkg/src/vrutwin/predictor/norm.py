"""Min-max scaling of the eight input channels and the distance target."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FEATURES = ("speed", "ax", "ay", "az", "gx", "gy", "gz", "distance")
N_FEATURES = len(FEATURES)


# spans this small relative to the bounds are treated as constant: dividing by
# them amplifies rounding noise without bound (or overflows outright)
MIN_REL_SPAN = 1e-12


def _live(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    scale = np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
    return (hi - lo) > MIN_REL_SPAN * scale


@dataclass(frozen=True)
class NormParams:
    feat_min: tuple[float, ...]
    feat_max: tuple[float, ...]
    out_min: float
    out_max: float

    def __post_init__(self) -> None:
        if len(self.feat_min) != N_FEATURES or len(self.feat_max) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} feature bounds")
        if any(hi < lo for lo, hi in zip(self.feat_min, self.feat_max)) or self.out_max < self.out_min:
            raise ValueError("max below min in normalization bounds")

    @classmethod
    def fit(cls, windows: np.ndarray, targets: np.ndarray) -> NormParams:
        """Bounds from raw windows (N, T, 8) and raw targets (N, K)."""
        flat = np.asarray(windows, dtype=float).reshape(-1, N_FEATURES)
        tg = np.asarray(targets, dtype=float)
        return cls(
            tuple(float(v) for v in flat.min(axis=0)),
            tuple(float(v) for v in flat.max(axis=0)),
            float(tg.min()),
            float(tg.max()),
        )

    @classmethod
    def identity(cls) -> NormParams:
        return cls((0.0,) * N_FEATURES, (1.0,) * N_FEATURES, 0.0, 1.0)

    def live_features(self) -> np.ndarray:
        """Mask of features whose span is wide enough to scale by."""
        lo, hi = np.asarray(self.feat_min), np.asarray(self.feat_max)
        return _live(lo, hi)

    def live_target(self) -> bool:
        return bool(_live(np.asarray(self.out_min), np.asarray(self.out_max)))

    def normalize_features(self, x: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.feat_min)
        span = np.asarray(self.feat_max) - lo
        live = self.live_features()
        safe = np.where(live, span, 1.0)
        return np.where(live, (np.asarray(x, dtype=float) - lo) / safe, 0.0)

    def denormalize_features(self, x: np.ndarray) -> np.ndarray:
        lo = np.asarray(self.feat_min)
        return np.asarray(x, dtype=float) * (np.asarray(self.feat_max) - lo) + lo

    def normalize_target(self, y: np.ndarray) -> np.ndarray:
        span = self.out_max - self.out_min
        if not self.live_target():
            return np.zeros_like(np.asarray(y, dtype=float))
        return (np.asarray(y, dtype=float) - self.out_min) / span

    def denormalize_target(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=float) * (self.out_max - self.out_min) + self.out_min

    def to_dict(self) -> dict:
        return {
            "feat_min": list(self.feat_min),
            "feat_max": list(self.feat_max),
            "out_min": self.out_min,
            "out_max": self.out_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> NormParams:
        return cls(
            tuple(float(v) for v in d["feat_min"]),
            tuple(float(v) for v in d["feat_max"]),
            float(d["out_min"]),
            float(d["out_max"]),
        )
