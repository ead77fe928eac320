"""Truncated Poisson-Binomial distributions of per-user interaction counts.

The total number of relevant items among a user's candidates is a sum of
independent Bernoulli variables with heterogeneous probabilities, which
follows a Poisson-Binomial distribution. This module computes its mass
vector exactly by convolution, optionally truncated at a bound M: mass that
would land beyond index M is dropped (recorded, never renormalized).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Above this many DP cells (n * window) the pairwise FFT convolution tree
# takes over; below it the plain windowed recurrence is used, which is exact
# to one rounding per cell and cheap at test scale.
_DP_CELL_LIMIT = 2_000_000


@dataclass(frozen=True)
class CountDistribution:
    """Mass vector of a (possibly truncated) Poisson-Binomial count.

    ``mass[m]`` is P(count = m) for m = 0..min(n, M); indices above
    min(n, M) carry no mass by construction. ``truncated_tail`` is the
    probability that the count exceeds M (zero whenever M >= n).
    """

    mass: np.ndarray
    M: int
    n: int
    truncated_tail: float

    def __post_init__(self):
        self.mass.setflags(write=False)

    def prob(self, m: int) -> float:
        """P(count = m), defined for any m >= 0 within the truncation bound."""
        if m > self.M:
            raise IndexError(f"m={m} beyond truncation bound M={self.M}")
        if m >= len(self.mass):
            return 0.0
        return float(self.mass[m])


def _dp_window(probs: np.ndarray, cap: int) -> np.ndarray:
    """Windowed convolution recurrence, exact for indices 0..cap."""
    d = np.zeros(cap + 1)
    d[0] = 1.0
    hi = 0  # highest index that can hold mass so far
    for p in probs:
        nxt = (1.0 - p) * d
        lim = min(hi, cap - 1)
        nxt[1 : lim + 2] += p * d[: lim + 1]
        d = nxt
        hi = min(hi + 1, cap)
    return d


_CHUNK = 32


def _conv_tree(probs: np.ndarray, cap: int) -> np.ndarray:
    """Chunked recurrence plus a pairwise FFT-convolution merge tree.

    Items are grouped into fixed-size chunks whose count distributions are
    computed by the windowed recurrence vectorized across chunks; chunk
    polynomials are then merged pairwise with batched FFTs. Exact in real
    arithmetic; in floats the absolute error stays near machine precision
    per coefficient, and tiny negative round-off is clamped. Truncating
    every intermediate to cap+1 coefficients is lossless for the retained
    indices because convolution never moves mass downward.
    """
    n = len(probs)
    n_chunks = (n + _CHUNK - 1) // _CHUNK
    padded = np.zeros(n_chunks * _CHUNK)
    padded[:n] = probs  # zero-probability items are exact identities
    chunk_probs = padded.reshape(n_chunks, _CHUNK)

    width = min(_CHUNK, cap) + 1
    polys = np.zeros((n_chunks, width))
    polys[:, 0] = 1.0
    hi = 0
    for t in range(_CHUNK):
        col = chunk_probs[:, t : t + 1]
        nxt = (1.0 - col) * polys
        lim = min(hi, width - 2)
        nxt[:, 1 : lim + 2] += col * polys[:, : lim + 1]
        polys = nxt
        hi = min(hi + 1, width - 1)

    while polys.shape[0] > 1:
        if polys.shape[0] % 2:
            ident = np.zeros((1, polys.shape[1]))
            ident[0, 0] = 1.0
            polys = np.concatenate([polys, ident], axis=0)
        a = polys[0::2]
        b = polys[1::2]
        full = 2 * polys.shape[1] - 1
        nfft = 1 << (full - 1).bit_length()
        fa = np.fft.rfft(a, nfft, axis=1)
        fb = np.fft.rfft(b, nfft, axis=1)
        prod = np.fft.irfft(fa * fb, nfft, axis=1)[:, : min(full, cap + 1)]
        np.maximum(prod, 0.0, out=prod)
        polys = prod
    out = polys[0]
    if len(out) < cap + 1:
        out = np.concatenate([out, np.zeros(cap + 1 - len(out))])
    return out


def distribution(probs, M: int) -> CountDistribution:
    """Poisson-Binomial mass of sum(Bernoulli(p_i)) truncated at M.

    Args:
        probs: success probabilities, each in [0, 1].
        M: truncation bound, >= 0. Mass beyond index M is dropped into
           ``truncated_tail`` (no renormalization).
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        probs = probs.ravel()
    if probs.size and (np.min(probs) < 0.0 or np.max(probs) > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    if not np.all(np.isfinite(probs)):
        raise ValueError("probabilities must be finite")
    if M < 0:
        raise ValueError(f"truncation bound must be >= 0, got {M}")

    n = probs.size
    cap = min(n, M)
    if n == 0:
        return CountDistribution(mass=np.ones(1), M=M, n=0, truncated_tail=0.0)

    if n * (cap + 1) <= _DP_CELL_LIMIT:
        d = _dp_window(probs, cap)
    else:
        d = _conv_tree(probs, cap)
    tail = 0.0 if M >= n else max(0.0, 1.0 - float(d.sum()))
    return CountDistribution(mass=d, M=M, n=n, truncated_tail=tail)


def distribution_batch(probs: np.ndarray, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Count distributions for many users at once.

    ``probs`` is (users, n) with one row per user; rows may be padded with
    zeros (zero-probability items contribute nothing). Returns
    (mass, tail) where mass is (users, min(n, M) + 1). One call runs the
    same chunked recurrence and FFT merge tree as the single-user path but
    vectorized across users, so per-user Python overhead disappears; this
    is the intended shape for thread pools mapping over user blocks.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ValueError("expected a (users, n) probability matrix")
    if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    if M < 0:
        raise ValueError(f"truncation bound must be >= 0, got {M}")
    n_users, n = probs.shape
    cap = min(n, M)

    n_chunks = (n + _CHUNK - 1) // _CHUNK
    padded = np.zeros((n_users, n_chunks * _CHUNK))
    padded[:, :n] = probs
    chunk_probs = padded.reshape(n_users, n_chunks, _CHUNK)

    width = min(_CHUNK, cap) + 1
    polys = np.zeros((n_users, n_chunks, width))
    polys[:, :, 0] = 1.0
    hi = 0
    for t in range(_CHUNK):
        col = chunk_probs[:, :, t : t + 1]
        nxt = (1.0 - col) * polys
        lim = min(hi, width - 2)
        nxt[:, :, 1 : lim + 2] += col * polys[:, :, : lim + 1]
        polys = nxt
        hi = min(hi + 1, width - 1)

    while polys.shape[1] > 1:
        if polys.shape[1] % 2:
            ident = np.zeros((n_users, 1, polys.shape[2]))
            ident[:, 0, 0] = 1.0
            polys = np.concatenate([polys, ident], axis=1)
        a = polys[:, 0::2]
        b = polys[:, 1::2]
        full = 2 * polys.shape[2] - 1
        nfft = 1 << (full - 1).bit_length()
        fa = np.fft.rfft(a, nfft, axis=2)
        fb = np.fft.rfft(b, nfft, axis=2)
        prod = np.fft.irfft(fa * fb, nfft, axis=2)[:, :, : min(full, cap + 1)]
        np.maximum(prod, 0.0, out=prod)
        polys = prod
    mass = polys[:, 0]
    if mass.shape[1] < cap + 1:
        mass = np.concatenate(
            [mass, np.zeros((n_users, cap + 1 - mass.shape[1]))], axis=1
        )
    if M >= n:
        tail = np.zeros(n_users)
    else:
        tail = np.maximum(0.0, 1.0 - mass.sum(axis=1))
    return mass, tail


def leave_one_out(probs, r: int, M: int) -> CountDistribution:
    """Distribution of the count with the r-th Bernoulli variable removed.

    Recomputed on the reduced vector: numerically safe for any p, at the
    cost of a full pass (intended for small-n exact computations).
    """
    probs = np.asarray(probs, dtype=np.float64)
    if not 0 <= r < probs.size:
        raise IndexError(f"index {r} out of range for {probs.size} probabilities")
    return distribution(np.delete(probs, r), M)
