"""Resource guards.

``PARTLAB_WORK_LIMIT`` caps brute-force work (lattice enumeration, partition
enumeration) and the bit budget of exact series coefficients.
"""

import os

from .errors import WorkLimitError

DEFAULT_WORK_LIMIT = 10**7
ENUMERATION_LIMIT = 40
SET_PARTITION_LIMIT = 10
STATIONARY_LIMIT = 12
SIMULATION_LIMIT = 60
# total bits held by one exact series; roughly 250 MB of integers
DEFAULT_BIT_BUDGET = 2 * 10**9


def work_limit() -> int:
    raw = os.environ.get("PARTLAB_WORK_LIMIT")
    if not raw:
        return DEFAULT_WORK_LIMIT
    try:
        value = int(raw)
    except ValueError:
        raise WorkLimitError(f"PARTLAB_WORK_LIMIT must be an integer, got {raw!r}") from None
    if value <= 0:
        raise WorkLimitError("PARTLAB_WORK_LIMIT must be positive")
    return value


def bit_budget() -> int:
    # scale the bit budget with the work limit so one knob governs both
    return max(DEFAULT_BIT_BUDGET, 200 * work_limit())


def check_work(amount: int, what: str) -> None:
    limit = work_limit()
    if amount > limit:
        raise WorkLimitError(
            f"{what} needs about {amount} steps, above the work limit {limit} "
            "(raise PARTLAB_WORK_LIMIT to allow it)"
        )


def check_enumeration(n: int, limit: int = ENUMERATION_LIMIT, what: str = "enumeration") -> None:
    if n > limit:
        raise WorkLimitError(f"{what} is capped at n <= {limit}, got n = {n}")
