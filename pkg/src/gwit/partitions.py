"""Set partitions of the mode set: counting, enumeration and text format.

Text format (1-based): blocks separated by ``:``, modes within a block by
``,``; e.g. ``"1,2:3,5:4,6"``.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Iterator

from gwit.model import InputError, Partition

MAX_EXHAUSTIVE_MODES = 20


@lru_cache(maxsize=None)
def stirling2(n: int, k: int) -> int:
    """Stirling number of the second kind; 0 outside the valid range."""
    if n < 0 or k < 0 or k > n:
        return 0
    if n == k:
        return 1
    if k == 0:
        return 0
    return k * stirling2(n - 1, k) + stirling2(n - 1, k - 1)


def bell(n: int) -> int:
    if n < 0:
        return 0
    return sum(stirling2(n, k) for k in range(n + 1))


def _restricted_growth(n: int, k: int) -> Iterator[list[int]]:
    # a[i] <= max(a[:i]) + 1, exactly k distinct values, lexicographic order
    a = [0] * n

    def rec(i: int, used: int):
        if i == n:
            if used == k:
                yield a
            return
        remaining = n - i
        for v in range(min(used + 1, k)):
            new_used = max(used, v + 1)
            if k - new_used > remaining - 1:
                continue
            a[i] = v
            yield from rec(i + 1, new_used)

    a[0] = 0
    yield from rec(1, 1)


def _rgs_to_partition(rgs: list[int], k: int) -> Partition:
    blocks: list[list[int]] = [[] for _ in range(k)]
    for mode, b in enumerate(rgs):
        blocks[b].append(mode)
    return Partition(len(rgs), tuple(tuple(b) for b in blocks))


def enumerate_k_partitions(n: int, k: int) -> Iterator[Partition]:
    """Yield every partition of ``n`` modes into ``k`` blocks exactly once.

    Order is lexicographic in the restricted growth string, which is also the
    canonical tie-breaking order used for argmin partitions.
    """
    if int(n) != n or n < 1:
        raise InputError(f"n must be >= 1, got {n!r}")
    if int(k) != k or not 1 <= k <= n:
        raise InputError(f"k must be in 1..{n}, got {k!r}")
    for rgs in _restricted_growth(int(n), int(k)):
        yield _rgs_to_partition(rgs, int(k))


def enumerate_partitions(n: int) -> Iterator[Partition]:
    """All partitions of ``n`` modes, grouped by increasing block count."""
    for k in range(1, n + 1):
        yield from enumerate_k_partitions(n, k)


@lru_cache(maxsize=256)
def partition_masks(n: int, k: int) -> tuple[tuple[int, ...], ...]:
    """Block bitmasks of every ``k``-partition in canonical order (memoized)."""
    if n > MAX_EXHAUSTIVE_MODES:
        raise InputError(
            f"exhaustive partition scans are capped at N={MAX_EXHAUSTIVE_MODES}, got N={n}")
    return tuple(p.masks for p in enumerate_k_partitions(n, k))


def mask_to_modes(mask: int) -> tuple[int, ...]:
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


def parse_partition(text: str, n: int) -> Partition:
    """Parse ``"1,2:3"``-style text (1-based) into a canonical Partition."""
    text = text.strip()
    if not text:
        raise InputError("empty partition text")
    blocks = []
    seen = set()
    for raw_block in text.split(":"):
        raw_block = raw_block.strip()
        if not raw_block:
            raise InputError(f"empty block in partition {text!r}")
        block = []
        for tok in raw_block.split(","):
            tok = tok.strip()
            try:
                mode = int(tok)
            except ValueError:
                raise InputError(f"bad mode index {tok!r} in partition {text!r}") from None
            if not 1 <= mode <= n:
                raise InputError(f"mode {mode} out of range 1..{n} in partition {text!r}")
            if mode in seen:
                raise InputError(f"duplicate mode {mode} in partition {text!r}")
            seen.add(mode)
            block.append(mode - 1)
        blocks.append(block)
    missing = sorted(set(range(1, n + 1)) - seen)
    if missing:
        raise InputError(f"missing mode(s) {missing} in partition {text!r}")
    return Partition.from_blocks(n, blocks)


def format_partition(p: Partition) -> str:
    return str(p)
