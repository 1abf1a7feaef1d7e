"""Log-domain arithmetic in base 10.

All probabilities in this package travel as log10 values; -inf stands for
probability zero. These helpers keep the sums stable without round-tripping
through the linear domain.
"""

from __future__ import annotations

import math
from typing import Iterable

LN10 = math.log(10.0)
NEG_INF = float("-inf")


def logaddexp10(a: float, b: float) -> float:
    """log10(10**a + 10**b) without overflow for large-magnitude inputs."""
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    # a >= b, so the ratio term is <= 1 and log1p stays accurate
    return a + math.log1p(10.0 ** (b - a)) / LN10


def logsumexp10(values: Iterable[float]) -> float:
    """log10 of the sum of 10**v over values; -inf for an empty iterable."""
    vals = list(values)
    if not vals:
        return NEG_INF
    m = max(vals)
    if m == NEG_INF:
        return NEG_INF
    total = math.fsum(10.0 ** (v - m) for v in vals)
    return m + math.log10(total)
