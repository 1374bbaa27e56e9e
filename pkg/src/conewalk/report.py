"""Result record shared by every Monte Carlo and verification routine."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass
class McReport:
    name: str
    estimate: float
    std_error: float
    n_samples: int
    n_rejected: int = 0
    seed: int = 0
    metadata: dict = field(default_factory=dict)
    passed: bool | None = None

    def __post_init__(self):
        if self.std_error < 0 or not np.isfinite(self.std_error):
            raise ValueError("standard error must be finite and non-negative")
        if self.n_samples <= 0:
            raise ValueError("report needs at least one sample")

    @property
    def rejection_fraction(self) -> float:
        return self.n_rejected / (self.n_samples + self.n_rejected)

    def to_json(self) -> dict:
        d = asdict(self)
        d["rejection_fraction"] = self.rejection_fraction
        return _plain(d)


def _plain(x):
    """Recursively convert numpy scalars and arrays to JSON-friendly Python values."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0


class RunningMoments:
    """Sum and sum of squares accumulated chunk by chunk in a fixed order."""

    def __init__(self):
        self.n = 0
        self.s = 0.0
        self.s2 = 0.0

    def add(self, x):
        x = np.asarray(x, dtype=np.float64)
        self.n += x.size
        self.s += float(np.sum(x))
        self.s2 += float(np.sum(x * x))

    @property
    def mean(self) -> float:
        return self.s / self.n

    @property
    def se(self) -> float:
        if self.n < 2:
            return 0.0
        var = max(self.s2 / self.n - self.mean**2, 0.0) * self.n / (self.n - 1)
        return float(np.sqrt(var / self.n))
