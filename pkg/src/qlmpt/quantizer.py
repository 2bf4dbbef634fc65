"""Raw (RQ) and likelihood-ratio (LQ) scalar quantizers.

A q-bit quantizer has ``2**q - 1`` strictly increasing thresholds that split
the real line (RQ) or the half line of ``|y|`` (LQ) into ``2**q`` half-open
intervals ``[tau_{i-1}, tau_i)``. Interval ``i`` (1-based) is labelled with
the natural binary word of ``i - 1``, most significant bit first.
"""

from dataclasses import dataclass

import numpy as np

RQ = "rq"
LQ = "lq"
KINDS = (RQ, LQ)
MAX_BITS = 8


class QuantizerError(ValueError):
    pass


@dataclass(frozen=True)
class QuantizerSpec:
    kind: str
    q: int
    thresholds: tuple

    @property
    def levels(self) -> int:
        return 2**self.q

    def edges(self) -> np.ndarray:
        """Interval endpoints including the implicit outer ones, length ``2**q + 1``."""
        lo = -np.inf if self.kind == RQ else 0.0
        return np.concatenate([[lo], np.asarray(self.thresholds, dtype=float), [np.inf]])

    def scaled(self, factor) -> "QuantizerSpec":
        return build_quantizer(self.kind, self.q, np.asarray(self.thresholds) * factor)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "q": self.q, "thresholds": list(self.thresholds)}

    @classmethod
    def from_dict(cls, d: dict) -> "QuantizerSpec":
        return build_quantizer(d["kind"], d["q"], d["thresholds"])


def build_quantizer(kind, q, thresholds) -> QuantizerSpec:
    """Validate and freeze a quantizer description.

    Raises
    ------
    QuantizerError
        On an unknown kind, a bit depth outside [1, 8], a wrong number of
        thresholds, non-increasing thresholds or (for LQ) a nonpositive one.
        The message names the offending threshold index.
    """
    kind = str(kind).lower()
    if kind not in KINDS:
        raise QuantizerError(f"unknown quantizer kind {kind!r}")
    q = int(q)
    if not 1 <= q <= MAX_BITS:
        raise QuantizerError(f"bit depth must lie in [1, {MAX_BITS}], got {q}")
    t = np.asarray(thresholds, dtype=float).ravel()
    if t.size != 2**q - 1:
        raise QuantizerError(f"{q}-bit quantizer needs {2**q - 1} thresholds, got {t.size}")
    if not np.all(np.isfinite(t)):
        bad = int(np.flatnonzero(~np.isfinite(t))[0])
        raise QuantizerError(f"threshold {bad} is not finite")
    steps = np.diff(t)
    if np.any(steps <= 0):
        bad = int(np.flatnonzero(steps <= 0)[0]) + 1
        raise QuantizerError(f"thresholds must be strictly increasing (index {bad})")
    if kind == LQ and t[0] <= 0:
        bad = int(np.flatnonzero(t <= 0)[0])
        raise QuantizerError(f"LQ thresholds must be positive (index {bad})")
    return QuantizerSpec(kind=kind, q=q, thresholds=tuple(float(x) for x in t))


def build_lqu(q, sigma_w, range_factor=3.0) -> QuantizerSpec:
    """LQ quantizer with uniform thresholds spanning ``[0, range_factor * sigma_w]``."""
    if sigma_w <= 0 or range_factor <= 0:
        raise QuantizerError("sigma_w and range_factor must be positive")
    step = range_factor * sigma_w / 2**q
    return build_quantizer(LQ, q, step * np.arange(1, 2**q))


def quantize(spec: QuantizerSpec, y):
    """1-based interval index of ``y`` (``|y|`` for LQ); ties go to the upper interval."""
    v = np.asarray(y, dtype=float)
    if spec.kind == LQ:
        v = np.abs(v)
    idx = np.searchsorted(np.asarray(spec.thresholds), v, side="right") + 1
    return idx if np.ndim(idx) else int(idx)


def codeword_of(index, q) -> str:
    """Natural-binary codeword of a 1-based interval index, MSB first."""
    if not 1 <= index <= 2**q:
        raise QuantizerError(f"index {index} out of range for q={q}")
    return format(index - 1, f"0{q}b")


def index_of(word) -> int:
    """Inverse of :func:`codeword_of`."""
    word = "".join(str(b) for b in word)
    if not word or set(word) - {"0", "1"}:
        raise QuantizerError(f"not a binary word: {word!r}")
    return int(word, 2) + 1


def lqu_span_roots(q, pe, target_are, sigma_w=1.0, bounds=(0.5, 10.0)):
    """All LQU ``range_factor`` values in ``bounds`` whose ARE equals ``target_are``, ascending.

    The ARE of a uniform grid is not monotone in its span (too narrow and
    too wide both lose information), so a target is typically met twice.
    """
    from scipy.optimize import brentq

    from .design import are_of_spec

    def gap(rf):
        return are_of_spec(build_lqu(q, sigma_w, rf), pe, sigma_w) - target_are

    grid = np.linspace(bounds[0], bounds[1], 400)
    vals = np.array([gap(rf) for rf in grid])
    flips = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    return [float(brentq(gap, grid[k], grid[k + 1], xtol=1e-12)) for k in flips]


def calibrate_lqu_span(q, pe, target_are, sigma_w=1.0, bounds=(0.5, 10.0)):
    """Fit the LQU ``range_factor`` whose ARE equals ``target_are``.

    Returns the widest matching span (a uniform grid is meant to cover the
    bulk of ``|y|``, not crowd near zero), or ``None`` if no span within
    ``bounds`` reaches the target. The fitted span is reported, not assumed.
    """
    roots = lqu_span_roots(q, pe, target_are, sigma_w, bounds)
    return roots[-1] if roots else None
