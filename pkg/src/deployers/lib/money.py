"""Integer money helpers.

All balances in the engine are integers in base units (e.g. cents) so that
conservation audits are exact.
"""

import math
from collections.abc import Sequence


def largest_remainder(amount: int, weights: Sequence[float]) -> list[int]:
    """Split an integer amount proportionally to weights, summing exactly to amount.

    Ties in the fractional parts go to the lower index.

    Args:
        amount: Integer amount to split (may be negative)
        weights: Nonnegative weights, not all zero

    Returns:
        Integer parts, one per weight
    """
    total = float(sum(weights))
    if total <= 0.0:
        raise ValueError("weights must have a positive sum")
    if amount < 0:
        return [-part for part in largest_remainder(-amount, weights)]

    quotas = [amount * w / total for w in weights]
    parts = [math.floor(q) for q in quotas]
    remainder = amount - sum(parts)
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - parts[i]), i))
    for i in order[:remainder]:
        parts[i] += 1
    return parts


def to_base_units(value: float) -> int:
    """Round a monetary value to integer base units (half away from zero)."""
    return int(math.floor(abs(value) + 0.5)) * (1 if value >= 0 else -1)
