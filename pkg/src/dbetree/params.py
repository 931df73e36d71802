"""Parameter derivation for the deamortized tree.

Every size bound the structure uses is a pure function of the block size
``B``, the trade-off exponent ``epsilon`` and the capacity bound ``N_cap``,
plus a handful of integer constants the analysis leaves symbolic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

# Slack added before flooring real powers so that e.g. 256**0.75 == 64.0
# survives floating error.
_FLOOR_EPS = 1e-9


class ParamError(ValueError):
    """Base class for rejected parameter combinations."""


class BlockSizeError(ParamError):
    pass


class EpsilonError(ParamError):
    pass


class CapacityError(ParamError):
    pass


def _floor_pow(base: int, exp: float) -> int:
    return int(math.floor(base ** exp + _FLOOR_EPS))


def ceil_log(n: int, base: int) -> int:
    """Smallest h >= 1 with base**h >= n, computed in exact integer arithmetic."""
    h, p = 1, base
    while p < n:
        p *= base
        h += 1
    return h


@dataclass(frozen=True)
class Params:
    B: int
    epsilon: float
    N_cap: int
    c_i: int = 4
    c_h: int = 8
    c_M: int = 4
    delta: float = field(init=False)
    logBN: int = field(init=False)
    fanout_max: int = field(init=False)
    fanout_min: int = field(init=False)
    buffer_cap: int = field(init=False)
    flush_quantum: int = field(init=False)
    tau: int = field(init=False)
    microleaf_cap: int = field(init=False)
    microroot_buffer_cap: int = field(init=False)
    update_batch: int = field(init=False)

    def __post_init__(self):
        B, eps, N = self.B, self.epsilon, self.N_cap
        if not isinstance(B, int) or B < 16:
            raise BlockSizeError(f"block size B={B!r} must be an integer >= 16")
        if not (0.0 < eps < 1.0):
            raise EpsilonError(f"epsilon={eps!r} must lie strictly between 0 and 1")
        if not isinstance(N, int) or N < B:
            raise CapacityError(f"N_cap={N!r} must be an integer >= B={B}")
        if self.c_i < 1 or self.c_h < 1 or self.c_M < 1:
            raise ParamError("constants c_i, c_h, c_M must be positive")

        delta = eps / 2
        logBN = ceil_log(N, B)
        fanout_max = max(4, _floor_pow(B, delta))
        fanout_min = max(2, fanout_max // 2)
        buffer_cap = _floor_pow(B, 1 - delta)
        flush_quantum = max(1, _floor_pow(B, 1 - 2 * delta))
        # When the fanout floor engages, B^(1-delta)/fanout drops below
        # B^(1-2delta); shrink the quantum so the pigeonhole still holds.
        flush_quantum = max(1, min(flush_quantum, buffer_cap // fanout_max))
        if fanout_max + buffer_cap > B:
            raise BlockSizeError(
                f"B={B} too small: fanout {fanout_max} + buffer {buffer_cap} "
                "does not fit one block")

        set_ = object.__setattr__
        set_(self, "delta", delta)
        set_(self, "logBN", logBN)
        set_(self, "fanout_max", fanout_max)
        set_(self, "fanout_min", fanout_min)
        set_(self, "buffer_cap", buffer_cap)
        set_(self, "flush_quantum", flush_quantum)
        set_(self, "tau", B * logBN * logBN)
        set_(self, "microleaf_cap", B * logBN)
        set_(self, "microroot_buffer_cap", buffer_cap * logBN)
        set_(self, "update_batch",
             max(1, flush_quantum // (self.c_i * logBN)))

    # -- derived scheduling quantities ---------------------------------

    @property
    def low_rate(self) -> bool:
        """True when fewer than one user update is owed per maintenance I/O."""
        return self.flush_quantum < self.c_i * self.logBN

    @property
    def ios_per_update(self) -> int:
        """Maintenance I/Os run per user update (1 unless in low-rate mode)."""
        if self.low_rate:
            return -(-self.c_i * self.logBN // self.flush_quantum)
        return 1

    @property
    def max_height(self) -> int:
        return self.c_h * self.logBN

    @property
    def drain_loop_cap(self) -> int:
        """Bound on flushes needed to empty a 2x-full buffer down to the cap."""
        return -(-2 * self.buffer_cap // self.flush_quantum)

    @property
    def max_microleaves(self) -> int:
        # micro-leaves hold at least a quarter of microleaf_cap, leaves at
        # most 5 tau, plus slack for one in-progress split
        return 4 * 5 * self.tau // self.microleaf_cap + 2

    @property
    def leaf_header_blocks(self) -> int:
        slots = 2 * self.microroot_buffer_cap + 3 * self.max_microleaves
        return -(-slots // self.B)

    @property
    def microleaf_max_blocks(self) -> int:
        # a micro-leaf just before it is split: full plus one drained buffer
        return -(-(self.microleaf_cap + 2 * self.microroot_buffer_cap
                   + self.flush_quantum) // self.B)

    @property
    def working_set_blocks(self) -> int:
        """Largest set of blocks one atomic step must hold resident at once,
        plus two pinned roots (live tree and a tree under construction)."""
        return 2 * self.leaf_header_blocks + 2 * self.microleaf_max_blocks + 6

    @property
    def default_cache_blocks(self) -> int:
        return max(self.c_M * self.logBN, self.working_set_blocks)

    def with_capacity(self, N_cap: int) -> "Params":
        return Params(self.B, self.epsilon, N_cap, self.c_i, self.c_h, self.c_M)


def derive_params(B: int, epsilon: float, N_cap: int, *, c_i: int = 4,
                  c_h: int = 8, c_M: int = 4) -> Params:
    """Validate ``(B, epsilon, N_cap)`` and compute every derived bound."""
    return Params(B, epsilon, N_cap, c_i=c_i, c_h=c_h, c_M=c_M)
