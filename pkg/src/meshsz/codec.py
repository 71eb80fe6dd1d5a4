"""Error-controlled linear-scaling quantization."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CorruptStream, InvalidValue

END_MARK = 0


@dataclass(frozen=True)
class QuantizerConfig:
    """Absolute error bound and code width.

    Valid codes are ``1 .. 2**code_bits - 1``; code ``2**(code_bits-1)``
    means "prediction was exact to within one interval" and code 0 is the
    sequence end mark.
    """

    error_bound: float
    code_bits: int = 16

    def __post_init__(self):
        if not (math.isfinite(self.error_bound) and self.error_bound > 0):
            raise InvalidValue(f"error bound must be positive and finite, got {self.error_bound}")
        if not 2 <= self.code_bits <= 31:
            raise InvalidValue(f"code_bits must be in [2, 31], got {self.code_bits}")

    @property
    def center_code(self) -> int:
        return 1 << (self.code_bits - 1)

    @property
    def max_code(self) -> int:
        return (1 << self.code_bits) - 1

    @property
    def end_mark_code(self) -> int:
        return END_MARK


@dataclass(frozen=True)
class QuantizeOutcome:
    predictable: bool
    code: int = END_MARK
    reconstructed: float = math.nan


def round_half_away(x: float) -> int:
    q = math.trunc(x)
    frac = x - q
    if frac >= 0.5:
        q += 1
    elif frac <= -0.5:
        q -= 1
    return q


def _reconstruct(predicted: float, offset: int, error_bound: float) -> float:
    return predicted + offset * (2.0 * error_bound)


def quantize(config: QuantizerConfig, predicted: float, actual: float) -> QuantizeOutcome:
    if not (math.isfinite(predicted) and math.isfinite(actual)):
        raise InvalidValue(f"non-finite input: predicted={predicted}, actual={actual}")
    xi = config.error_bound
    scaled = (actual - predicted) / (2.0 * xi)
    if not math.isfinite(scaled):
        return QuantizeOutcome(False)
    offset = round_half_away(scaled)
    code = config.center_code + offset
    if code < 1 or code > config.max_code:
        return QuantizeOutcome(False)
    rec = _reconstruct(predicted, offset, xi)
    # float re-check keeps the bound a hard guarantee
    if not abs(rec - actual) <= xi:
        return QuantizeOutcome(False)
    return QuantizeOutcome(True, code, rec)


def dequantize(config: QuantizerConfig, predicted: float, code: int) -> float:
    if code < 1 or code > config.max_code:
        raise CorruptStream(f"quantization code {code} outside [1, {config.max_code}]")
    return _reconstruct(predicted, code - config.center_code, config.error_bound)
