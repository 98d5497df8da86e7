"""Log-offset target transform and its inverse.

Swelling is modelled as ``ln(y + offset)``. Because the map is strictly
increasing, interval endpoints computed on the log scale keep their order
when mapped back.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TargetTransform:
    offset: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.offset) and self.offset > 0):
            raise ValueError(f"offset must be a positive finite number, got {self.offset}")

    def forward(self, y):
        return forward(y, self)

    def inverse(self, y_log):
        return inverse(y_log, self)


def forward(y, t=TargetTransform()):
    """``ln(y + offset)``; raises ValueError if any ``y + offset <= 0``."""
    y = np.asarray(y, dtype=float)
    if np.any(~(y + t.offset > 0)):
        raise ValueError(f"log transform needs y > -{t.offset}")
    # log1p keeps full relative precision for swelling values near zero
    out = np.log1p(y / t.offset) + math.log(t.offset)
    return float(out) if out.ndim == 0 else out


def inverse(y_log, t=TargetTransform()):
    """``exp(y_log) - offset``; infinite inputs map to ``-offset`` and ``inf``."""
    out = t.offset * np.expm1(np.asarray(y_log, dtype=float) - math.log(t.offset))
    return float(out) if out.ndim == 0 else out
