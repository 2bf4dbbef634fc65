"""Binary symmetric reporting channel.

Each of the q bits of a sensor's codeword is flipped independently with the
crossover probability ``pe``. Codewords are handled either as bit strings or,
in vectorized code, as their integer value ``i - 1``.
"""

from functools import lru_cache

import numpy as np
from scipy.special import comb

from .quantizer import codeword_of


def hamming(a, b) -> int:
    a, b = str(a), str(b)
    if len(a) != len(b):
        raise ValueError(f"codeword lengths differ: {len(a)} != {len(b)}")
    return sum(x != y for x, y in zip(a, b))


def transition_prob(q, pe, d):
    """Probability that a q-bit word arrives at Hamming distance ``d`` from the sent one."""
    if not 0 <= d <= q:
        raise ValueError(f"distance {d} out of range [0, {q}]")
    return pe**d * (1.0 - pe) ** (q - d)


def distance_matrix(q) -> np.ndarray:
    return _distance_matrix(int(q))


@lru_cache(maxsize=None)
def _distance_matrix(q):
    codes = np.arange(2**q)
    x = codes[:, None] ^ codes[None, :]
    d = np.zeros_like(x)
    for k in range(q):
        d += (x >> k) & 1
    d.setflags(write=False)
    return d


def transition_matrix(q, pe) -> np.ndarray:
    """``G[i, j]`` = P(received interval i | sent interval j), read-only, cached."""
    return _transition_matrix(int(q), float(pe))


@lru_cache(maxsize=256)
def _transition_matrix(q, pe):
    if not 0.0 <= pe <= 1.0:
        raise ValueError(f"crossover probability must lie in [0, 1], got {pe}")
    d = _distance_matrix(q)
    g = np.power(pe, d) * np.power(1.0 - pe, q - d)
    g.setflags(write=False)
    return g


def transition_matrix_by_words(q, pe) -> np.ndarray:
    """Reference construction through explicit codewords (slow, for cross-checking)."""
    n = 2**q
    g = np.empty((n, n))
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            d = hamming(codeword_of(i, q), codeword_of(j, q))
            g[i - 1, j - 1] = transition_prob(q, pe, d)
    return g


def distance_spectrum_total(q, pe):
    """``sum_d C(q, d) G(q, pe, d)``, which equals 1 for a valid channel."""
    return sum(comb(q, d, exact=True) * transition_prob(q, pe, d) for d in range(q + 1))


def transmit(word, pe, rng) -> str:
    """Send one codeword through the BSC. ``pe = 1`` complements deterministically."""
    word = str(word)
    flips = rng.random(len(word)) < pe
    return "".join(("1" if b == "0" else "0") if f else b for b, f in zip(word, flips))


def transmit_codes(codes, q, pe, rng):
    """Vectorized BSC on integer codewords.

    ``codes`` has shape ``(..., M)``; ``pe`` is a scalar or a length-M array of
    per-sensor crossover probabilities. The random draws for sensor ``m`` are
    taken from column ``m`` only, so one sensor's corruption never depends on
    another sensor's word.
    """
    codes = np.asarray(codes)
    u = rng.random(codes.shape + (q,))
    pe = np.asarray(pe, dtype=float)
    if pe.ndim:
        pe = pe[..., None]
    flips = (u < pe).astype(codes.dtype)
    mask = np.zeros_like(codes)
    for k in range(q):
        mask |= flips[..., k] << (q - 1 - k)
    return codes ^ mask
