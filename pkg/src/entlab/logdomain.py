"""Base-2 log-domain arithmetic helpers.

Everything downstream works in bits: eigenvalues of n-fold tensor powers are
2^(-nE +- O(sqrt n)) and underflow doubles for n in the thousands, so masses,
multiplicities and overlaps are carried as log2 values. Integers larger than
2^53 (dimension counts) get an exact-as-possible log2 via bit shifting.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np

NEG_INF = -math.inf


def log2_int(x: int) -> float:
    """log2 of a nonnegative python int, exact to float precision at any size."""
    if x < 0:
        raise ValueError("log2_int needs a nonnegative integer")
    if x == 0:
        return NEG_INF
    bl = x.bit_length()
    if bl <= 53:
        return math.log2(x)
    s = bl - 53
    return math.log2(x >> s) + s


def ceil_exp2(l: float) -> int:
    """ceil(2^l) as an exact python int; l may exceed float range."""
    if l == NEG_INF:
        return 0
    if l < 900.0:
        return max(1, math.ceil(2.0 ** l - 1e-9))
    frac, ip = math.modf(l)
    # 60 guard bits keep the relative rounding below 2^-60
    return max(1, math.ceil(2.0 ** (frac + 60.0)) << (int(ip) - 60))


def log2add(a: float, b: float) -> float:
    """log2(2^a + 2^b)."""
    return float(np.logaddexp2(a, b))


def log2sub(a: float, b: float) -> float:
    """log2(2^a - 2^b); requires a >= b."""
    if b == NEG_INF:
        return a
    if b > a:
        raise ValueError("log2sub needs a >= b")
    d = b - a
    if d == 0.0:
        return NEG_INF
    # expm1 keeps precision when the two terms nearly cancel
    return a + math.log2(-math.expm1(d * math.log(2.0)))


def log2sumexp(values: Iterable[float]) -> float:
    """log2 of a sum of 2^v terms; empty input gives -inf."""
    arr = np.asarray([v for v in values if v != NEG_INF], dtype=float)
    if arr.size == 0:
        return NEG_INF
    m = float(arr.max())
    return m + math.log2(float(np.exp2(arr - m).sum()))


def log2sumexp_array(arr: np.ndarray) -> float:
    if arr.size == 0:
        return NEG_INF
    m = float(arr.max())
    if m == NEG_INF:
        return NEG_INF
    return m + math.log2(float(np.exp2(arr - m).sum()))


def cumulative_log2sumexp(arr: np.ndarray) -> np.ndarray:
    """Running log2-sum-exp along a 1-d array."""
    return np.logaddexp2.accumulate(arr)
