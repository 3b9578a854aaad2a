"""Collision and preimage calculators for content addresses.

Everything returns a :class:`Probability`, which carries ``log2(p)`` so
values such as 2**-248 keep full precision and render cleanly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Real

import numpy as np

from castore.prng import Prbg

LOG10_2 = math.log10(2)

M_BUCKETS_LOG2 = 128
MPP_BUCKETS_LOG2 = 120 + 128
GM_DENOMINATOR_LOG2 = 219  # 2**20 * 2 * 2**198
GM_COUNTER_VALUES = 2**10

EXACT_PRODUCT_LIMIT = 10**7
MONTE_CARLO_THROW_BUDGET = 10**9
MONTE_CARLO_MAX_BUCKETS = 2**40

# Figures the M++ analysis takes from attack literature rather than derives.
MPP_FORGE_COLLISION_LOG2 = 67
MPP_SECOND_PREIMAGE_LOG2 = 119


def _log2(x) -> float:
    # math.log2 accepts arbitrarily large ints exactly; floats pass through.
    return math.log2(x)


@dataclass(frozen=True)
class Probability:
    log2_value: float

    def __post_init__(self) -> None:
        if self.log2_value > 0 or math.isnan(self.log2_value):
            raise ValueError(f"log2 of a probability must be <= 0, got {self.log2_value}")

    @classmethod
    def zero(cls) -> Probability:
        return cls(-math.inf)

    @classmethod
    def from_value(cls, p: float) -> Probability:
        if not 0 <= p <= 1:
            raise ValueError(f"probability out of range: {p}")
        return cls(math.log2(p) if p > 0 else -math.inf)

    @property
    def value(self) -> float:
        """Linear value; underflows to 0.0 below ~1e-308."""
        return 2.0**self.log2_value if self.log2_value > -1100 else 0.0

    @property
    def is_zero(self) -> bool:
        return self.log2_value == -math.inf

    def decimal(self, digits: int = 6) -> str:
        """Scientific notation with ``digits`` significant figures, e.g. ``1.46936e-27``."""
        if self.is_zero:
            return "0"
        log10 = self.log2_value * LOG10_2
        exp = math.floor(log10)
        mant = 10 ** (log10 - exp)
        if round(mant, digits - 1) >= 10:
            mant, exp = mant / 10, exp + 1
        return f"{mant:.{digits - 1}f}e{exp:+03d}"

    def power_of_two(self, decimals: int = 2) -> str:
        if self.is_zero:
            return "0"
        return f"2^{self.log2_value:.{decimals}f}"

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        return f"{self.decimal()} ({self.power_of_two()})"


def _clamped(log2_value: float) -> Probability:
    return Probability(min(0.0, log2_value))


def _require_count(name: str, x, minimum) -> None:
    if not isinstance(x, Real) or isinstance(x, bool) or math.isnan(x):
        raise TypeError(f"{name} must be a real number, got {x!r}")
    if x < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {x}")


# ---------------------------------------------------------------------------
# birthday problem
# ---------------------------------------------------------------------------


def collision_bound(q, N) -> Probability:
    """Union bound q(q-1)/(2N) on at least one collision, capped at 1."""
    _require_count("q", q, 2)
    if not N > q:
        raise ValueError(f"need N > q > 1, got q={q}, N={N}")
    return _clamped(_log2(q) + _log2(q - 1) - 1 - _log2(N))


def exact_birthday(q: int, N) -> Probability:
    """Exact ``1 - prod_{i<q} (1 - i/N)`` for q balls in N buckets."""
    if not isinstance(q, int) or isinstance(q, bool):
        raise TypeError("q must be an integer")
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if q > N:
        raise ValueError(f"need q <= N, got q={q}, N={N}")
    if q > EXACT_PRODUCT_LIMIT:
        raise ValueError(f"exact product limited to {EXACT_PRODUCT_LIMIT} terms, got q={q}")
    if q == 1:
        return Probability.zero()
    # log of the no-collision probability, summed with compensation
    log_none = math.fsum(np.log1p(-np.arange(1, q, dtype=np.float64) / float(N)).tolist())
    if log_none == -math.inf:
        return Probability(0.0)
    p = -math.expm1(log_none)
    return _clamped(math.log2(p)) if p > 0 else Probability.zero()


def same_birthday_as_you(q: int, N) -> Probability:
    """Chance that at least one of q others matches one fixed value: ``1 - ((N-1)/N)**q``."""
    _require_count("q", q, 1)
    _require_count("N", N, 1)
    if N == 1:
        return Probability(0.0)
    p = -math.expm1(q * math.log1p(-1 / N))
    return _clamped(math.log2(p))


# ---------------------------------------------------------------------------
# naming schemes
# ---------------------------------------------------------------------------


def m_collision(files) -> Probability:
    """Collision bound for ``files`` M addresses (128-bit buckets)."""
    if not 1 < files < 2**M_BUCKETS_LOG2:
        raise ValueError(f"file count must be in (1, 2^128), got {files}")
    return collision_bound(files, 2**M_BUCKETS_LOG2)


def mpp_collision(files) -> Probability:
    """Collision bound for ``files`` M++ addresses (2^248 buckets from the hash fields)."""
    if not 1 < files < 2**MPP_BUCKETS_LOG2:
        raise ValueError(f"file count must be in (1, 2^248), got {files}")
    return collision_bound(files, 2**MPP_BUCKETS_LOG2)


def _check_gm_workload(A, S) -> None:
    _require_count("A", A, 1)
    _require_count("S", S, 1)
    if S < A:
        raise ValueError(f"GM formulas assume S >= A, got A={A}, S={S}")


def gm_set_size(A: int, S: int) -> int:
    """Most files that can share one (timestamp, counter) pair: ``A + ceil(A*S / 2^10)``."""
    _check_gm_workload(A, S)
    return A + -(-(A * S) // GM_COUNTER_VALUES)


def gm_collision_per_ms(A, S) -> Probability:
    """``(A*S)^2 / 2^219``."""
    _check_gm_workload(A, S)
    return _clamped(2 * _log2(A * S) - GM_DENOMINATOR_LOG2)


def gm_collision_over(A, S, Z) -> Probability:
    """``(A*S)^2 / 2^219 * Z`` for a run of ``Z`` milliseconds, capped at 1."""
    _check_gm_workload(A, S)
    _require_count("Z", Z, 1)
    return _clamped(2 * _log2(A * S) - GM_DENOMINATOR_LOG2 + _log2(Z))


# ---------------------------------------------------------------------------
# attack cost
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AttackCost:
    """Work estimates in log2(operations)."""

    log2_full: float
    log2_dominant: float


def second_preimage_cost(n: int, k: int) -> AttackCost:
    """Long-message second-preimage work ``k * 2^(n/2+1) + 2^(n-k+1)``.

    ``log2_dominant`` is just the ``2^(n-k+1)`` term.
    """
    if not (isinstance(n, int) and isinstance(k, int)):
        raise TypeError("n and k must be integers")
    if not n > k >= 1:
        raise ValueError(f"need n > k >= 1, got n={n}, k={k}")
    first = math.log2(k) + n / 2 + 1
    second = n - k + 1
    hi, lo = max(first, second), min(first, second)
    return AttackCost(log2_full=hi + math.log2(1 + 2.0 ** (lo - hi)), log2_dominant=float(second))


def block_count_exponent(max_bytes: int, block_bits: int = 512) -> int:
    """Smallest k with ``max_bytes`` fitting in 2^k blocks of ``block_bits`` bits."""
    if max_bytes < 1:
        raise ValueError("max_bytes must be positive")
    blocks = -(-max_bytes * 8 // block_bits)
    return max(1, (blocks - 1).bit_length())


def meet_in_the_middle_cost(n: int, s: float) -> float:
    """log2 of ``2^(1 + (n+s)/2)``: second preimage for the chain given a 2^s one for f."""
    if not 0 <= s < n:
        raise ValueError(f"need 0 <= s < n, got n={n}, s={s}")
    return 1 + (n + s) / 2


# ---------------------------------------------------------------------------
# Monte Carlo oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MonteCarloResult:
    q: int
    N: int
    trials: int
    collisions: int

    @property
    def rate(self) -> float:
        return self.collisions / self.trials

    @property
    def stderr(self) -> float:
        p = self.rate
        return math.sqrt(p * (1 - p) / self.trials)

    def probability(self) -> Probability:
        return Probability.from_value(self.rate)


def _seed_bytes(seed) -> bytes:
    if isinstance(seed, bytes):
        return seed
    if isinstance(seed, int):
        return seed.to_bytes(max(1, (seed.bit_length() + 7) // 8), "big")
    return str(seed).encode()


def _draw_buckets(gen: Prbg, count: int, N: int) -> np.ndarray:
    raw = np.frombuffer(gen.next_bytes(8 * count), dtype=">u8")
    if N & (N - 1) == 0:
        return (raw >> np.uint64(64 - (N.bit_length() - 1))) if N > 1 else np.zeros(count, np.uint64)
    # 53-bit uniform fraction scaled to N; bias ~N/2^53, negligible for N <= 2^40.
    frac = (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return np.floor(frac * N).astype(np.uint64)


def monte_carlo_birthday(
    q: int, N: int, trials: int, seed=0, *, shard_trials: int = 4096
) -> MonteCarloResult:
    """Throw ``q`` balls into ``N`` buckets ``trials`` times; count trials with a collision.

    Trials are grouped into shards, each drawing from its own generator
    seeded with ``seed || shard index``; shards are independent, so they
    could run in any order or in parallel and sum to the same count.
    """
    for name, v in (("q", q), ("N", N), ("trials", trials)):
        if not isinstance(v, int) or v < 1:
            raise ValueError(f"{name} must be a positive integer, got {v!r}")
    if q * trials > MONTE_CARLO_THROW_BUDGET:
        raise ValueError(f"q*trials = {q * trials} exceeds budget of {MONTE_CARLO_THROW_BUDGET} throws")
    if N > MONTE_CARLO_MAX_BUCKETS:
        raise ValueError(f"N must be <= 2^40, got {N}")
    base = _seed_bytes(seed)
    collisions = 0
    if q > 1:
        # keep each shard's bucket matrix around a few million entries
        per_shard = max(1, min(shard_trials, 4_000_000 // q))
        for shard, start in enumerate(range(0, trials, per_shard)):
            n = min(per_shard, trials - start)
            gen = Prbg(base + b"/shard/" + shard.to_bytes(8, "big"))
            buckets = np.sort(_draw_buckets(gen, n * q, N).reshape(n, q), axis=1)
            collisions += int(np.any(buckets[:, 1:] == buckets[:, :-1], axis=1).sum())
    return MonteCarloResult(q=q, N=N, trials=trials, collisions=collisions)
