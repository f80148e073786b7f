"""Dimensions of the Sierpinski gasket and the regime thresholds derived from them."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class FractalConstants:
    d_h: float = math.log(3.0) / math.log(2.0)
    d_w: float = math.log(5.0) / math.log(2.0)

    @property
    def spectral_ratio(self) -> float:
        """Exponent of the eigenvalue counting function, ``d_h / d_w``."""
        return math.log(3.0) / math.log(5.0)

    @property
    def critical_s(self) -> float:
        """Parameter of the log-correlated field, ``d_h / (2 d_w)``."""
        return self.spectral_ratio / 2.0

    @property
    def holder_gap(self) -> float:
        """``d_w - d_h``: Hoelder exponent of functions in the Laplacian domain."""
        return math.log(5.0 / 3.0) / math.log(2.0)

    def holder_exponent(self, s: float) -> float:
        """Pointwise regularity power ``min(s d_w - d_h/2, d_w - d_h)``; requires s > critical."""
        if s <= self.critical_s:
            raise ValueError(f"s={s} is not above the critical value {self.critical_s}")
        return min(s * self.d_w - self.d_h / 2.0, self.holder_gap)

    def riesz_regime(self, s: float, atol: float = 1e-12) -> str:
        """Decay class of the Riesz kernel ``G_s`` near the diagonal."""
        if s < 0:
            raise ValueError("s must be nonnegative")
        if abs(s - self.spectral_ratio) <= atol:
            return "log"
        return "sub-critical" if s < self.spectral_ratio else "bounded"

    def riesz_exponent(self, s: float) -> float:
        """Power of ``d(x, y)`` bounding ``G_s`` in the sub-critical regime (negative)."""
        return -(self.d_h - s * self.d_w)


CONSTANTS = FractalConstants()
D_H = CONSTANTS.d_h
D_W = CONSTANTS.d_w
SPECTRAL_RATIO = CONSTANTS.spectral_ratio
CRITICAL_S = CONSTANTS.critical_s
HOLDER_GAP = CONSTANTS.holder_gap
