"""Row-wise error correction for the reduced toric code.

Each row is a ring of N bits with stabilizers Z_n Z_{n+1}. The syndrome fixes
a measured string up to a global flip, so the minimum-flip correction is a
majority vote: return to all-0 if fewer than half the bits are set, to all-1
(a logical error) if more. Exact ties are broken by a fair coin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import stats

from .model import CouplingModel
from .oracle import DenseChain, ResourceError, exact_sample

EXACT_LIMIT = 24

Seed = Union[int, np.random.Generator, None]


@dataclass(frozen=True)
class DecodeOutcome:
    correction_weight: int
    logical_error: bool
    tie: bool


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


def _rng(seed: Seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _as_bits(bits) -> np.ndarray:
    if isinstance(bits, str):
        arr = np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    else:
        arr = np.asarray(bits, dtype=np.int64)
    if arr.ndim != 1 or arr.size < 2 or np.any((arr != 0) & (arr != 1)):
        raise ValueError("expected a 0/1 string of length >= 2")
    return arr


def syndrome(bits) -> tuple[int, ...]:
    """1-based positions n with bits[n] != bits[n+1] (ring)."""
    b = _as_bits(bits)
    return tuple(int(i) + 1 for i in np.nonzero(b != np.roll(b, -1))[0])


def decode_row(bits, seed: Seed = None) -> DecodeOutcome:
    b = _as_bits(bits)
    n, w = b.size, int(b.sum())
    if 2 * w < n:
        return DecodeOutcome(w, False, False)
    if 2 * w > n:
        return DecodeOutcome(n - w, True, False)
    return DecodeOutcome(w, bool(_rng(seed).integers(2)), True)


def decode_weights(weights: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Vectorized logical-error flags for many rows given their Hamming weights."""
    weights = np.asarray(weights)
    logical = 2 * weights > n
    ties = 2 * weights == n
    if np.any(ties):
        logical = logical | (ties & (rng.integers(2, size=weights.shape) == 1))
    return logical


def exact_logical_prob(q: float, n: int) -> float:
    """P(w > N/2) + P(w = N/2)/2 for w ~ Binomial(N, q)."""
    tail = stats.binom.sf(n // 2, n, q)
    if n % 2 == 0:
        tail += 0.5 * stats.binom.pmf(n // 2, n, q)
    return float(tail)


def row_logical_prob(
    q: float,
    n: int,
    method: str = "exact",
    shots: int = 10**6,
    seed: Seed = 0,
) -> Estimate:
    """Per-row logical error probability under i.i.d. bit flips with probability q."""
    if not 0 <= q <= 1:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if n < 2:
        raise ValueError("need N >= 2")
    if method == "exact":
        if n > EXACT_LIMIT:
            raise ResourceError(f"exact method is limited to N <= {EXACT_LIMIT}")
        return Estimate(exact_logical_prob(q, n), 0.0)
    if method != "monte_carlo":
        raise ValueError(f"unknown method {method!r}")
    rng = _rng(seed)
    hits = 0
    chunk = max(1, 2**22 // n)
    done = 0
    while done < shots:
        k = min(chunk, shots - done)
        flips = rng.random((k, n)) < q
        hits += int(decode_weights(flips.sum(axis=1), n, rng).sum())
        done += k
    p = hits / shots
    return Estimate(p, math.sqrt(p * (1 - p) / shots))


def aggregate_logical(p: float, rows: int) -> float:
    """Probability of an odd number of row failures among ``rows`` independent rows."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return 0.5 * (1 - (1 - 2 * p) ** rows)


def aggregate_monte_carlo(p: float, rows: int, trials: int, seed: Seed = 0) -> Estimate:
    """Sample ``rows`` independent row outcomes per trial; the code fails on odd parity."""
    rng = _rng(seed)
    chunk = max(1, 2**22 // rows)
    odd = 0
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        fails = rng.random((k, rows)) < p
        odd += int(np.count_nonzero(fails.sum(axis=1) % 2))
        done += k
    f = odd / trials
    return Estimate(f, math.sqrt(f * (1 - f) / trials))


def memory_failure_small(model: CouplingModel, t: float, shots: int, seed: int = 0) -> Estimate:
    """Fraction of sampled rows of exp(-iHt)|0...0> that decode to a logical error."""
    seeds = np.random.SeedSequence(seed).spawn(2)
    bits = exact_sample(model, t, shots, int(seeds[0].generate_state(1)[0]))
    logical = decode_weights(bits.sum(axis=1), model.n_sites, np.random.default_rng(seeds[1]))
    f = float(logical.mean())
    return Estimate(f, math.sqrt(f * (1 - f) / shots))


def exact_failure_probability(model: CouplingModel, t: float) -> float:
    """P(w > N/2) + P(w = N/2)/2 from the exact state-vector distribution."""
    chain = DenseChain(model)
    p = chain.probabilities(t)
    w = chain.weights
    n = model.n_sites
    return float(p[2 * w > n].sum() + 0.5 * p[2 * w == n].sum())
