"""Scenario configuration and sampling of the sparse-signal measurement model.

Under H0 each sensor observes ``y_m = w_m`` with ``w_m ~ N(0, sigma_w^2)``.
Under H1 it observes ``y_m = h_m^T s_m + w_m`` where the ``s_m`` share one
Bernoulli(p) support pattern and carry i.i.d. N(0, sigma_0^2) values on it.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

H0 = "H0"
H1 = "H1"

EXACT = "exact"
GAUSSIAN_APPROX = "gaussian-approx"
MODES = (EXACT, GAUSSIAN_APPROX)


@dataclass(frozen=True)
class SystemConfig:
    """Global scenario parameters.

    ``h_norm_sq`` and ``pe`` may be given as scalars, in which case they are
    broadcast to all ``num_sensors`` sensors (homogeneous network).
    """

    num_sensors: int
    signal_dim: int
    sparsity: float
    signal_var: float
    noise_var: float
    h_norm_sq: Sequence[float] = field(default=1.0)
    pe: Sequence[float] = field(default=0.0)

    def __post_init__(self):
        if int(self.num_sensors) < 1:
            raise ValueError(f"num_sensors must be >= 1, got {self.num_sensors}")
        if int(self.signal_dim) < 1:
            raise ValueError(f"signal_dim must be >= 1, got {self.signal_dim}")
        if not 0.0 <= self.sparsity <= 1.0:
            raise ValueError(f"sparsity must lie in [0, 1], got {self.sparsity}")
        if self.signal_var < 0.0:
            raise ValueError(f"signal_var must be nonnegative, got {self.signal_var}")
        if self.noise_var <= 0.0:
            raise ValueError(f"noise_var must be positive, got {self.noise_var}")
        m = int(self.num_sensors)
        hn = np.broadcast_to(np.asarray(self.h_norm_sq, dtype=float), (m,)).copy()
        pe = np.broadcast_to(np.asarray(self.pe, dtype=float), (m,)).copy()
        if np.any(hn < 0.0):
            raise ValueError("h_norm_sq entries must be nonnegative")
        if np.any((pe < 0.0) | (pe >= 1.0)):
            raise ValueError("pe entries must lie in [0, 1)")
        hn.setflags(write=False)
        pe.setflags(write=False)
        object.__setattr__(self, "num_sensors", m)
        object.__setattr__(self, "signal_dim", int(self.signal_dim))
        object.__setattr__(self, "h_norm_sq", hn)
        object.__setattr__(self, "pe", pe)

    @property
    def sigma_w(self) -> float:
        return float(np.sqrt(self.noise_var))

    def replace(self, **changes) -> "SystemConfig":
        kw = dict(
            num_sensors=self.num_sensors,
            signal_dim=self.signal_dim,
            sparsity=self.sparsity,
            signal_var=self.signal_var,
            noise_var=self.noise_var,
            h_norm_sq=self.h_norm_sq,
            pe=self.pe,
        )
        if "num_sensors" in changes:
            # per-sensor lists cannot be resized meaningfully; keep homogeneous values
            kw["h_norm_sq"] = float(self.h_norm_sq[0])
            kw["pe"] = float(self.pe[0])
        kw.update(changes)
        return SystemConfig(**kw)

    def to_dict(self) -> dict:
        return {
            "M": self.num_sensors,
            "N": self.signal_dim,
            "p": self.sparsity,
            "sigma0_sq": self.signal_var,
            "sigma_w_sq": self.noise_var,
            "h_norm_sq": self.h_norm_sq.tolist(),
            "pe": self.pe.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        return cls(
            num_sensors=d["M"],
            signal_dim=d.get("N", 1000),
            sparsity=d["p"],
            signal_var=d["sigma0_sq"],
            noise_var=d.get("sigma_w_sq", 1.0),
            h_norm_sq=d.get("h_norm_sq", 1.0),
            pe=d.get("pe", 0.0),
        )


@dataclass(frozen=True)
class SparseSignal:
    """Sparse vector of length ``dim`` stored as 0-based ``support`` indices and ``values``."""

    dim: int
    support: np.ndarray
    values: np.ndarray

    def dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.support] = self.values
        return out


def effective_sigma(p, signal_var, h_norm_sq, noise_var):
    """Standard deviation of a measurement under the Gaussian approximation of H1."""
    if np.any(np.asarray(p) < 0) or np.any(np.asarray(signal_var) < 0) or np.any(
        np.asarray(h_norm_sq) < 0
    ):
        raise ValueError("p, signal_var and h_norm_sq must be nonnegative")
    if np.any(np.asarray(noise_var) <= 0):
        raise ValueError("noise_var must be positive")
    return np.sqrt(np.asarray(p) * signal_var * np.asarray(h_norm_sq) + noise_var)


def snr_db(p, signal_var, noise_var):
    """Per-sensor SNR ``p * sigma_0^2 / sigma_w^2`` in decibels (-inf for no signal)."""
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    ratio = p * signal_var / noise_var
    if ratio <= 0:
        return -np.inf
    return 10.0 * np.log10(ratio)


def signal_var_for_snr(snr, p, noise_var):
    """Signal variance that realizes ``snr`` dB at sparsity ``p``."""
    return noise_var * 10.0 ** (snr / 10.0) / p


def sample_sparse_signal(dim, p, signal_var, rng, support=None):
    """Draw a Bernoulli-Gaussian vector.

    If ``support`` is given it is used as the (shared) sparsity pattern and
    only the Gaussian values are drawn.
    """
    if support is None:
        support = np.flatnonzero(rng.random(dim) < p)
    values = rng.normal(0.0, np.sqrt(signal_var), size=support.size)
    return SparseSignal(dim=dim, support=support, values=values)


def sample_measurement(h, s, noise_var, hypothesis, rng):
    """One compressed measurement ``h^T s + w`` (or ``w`` under H0)."""
    w = rng.normal(0.0, np.sqrt(noise_var))
    if hypothesis == H0:
        return w
    if hypothesis != H1:
        raise ValueError(f"unknown hypothesis {hypothesis!r}")
    h = np.asarray(h, dtype=float)
    return float(h[s.support] @ s.values) + w


def generate_measurement_vectors(num_sensors, dim, rng):
    """``num_sensors`` i.i.d. standard-normal vectors of length ``dim``, each normalized to unit norm."""
    if num_sensors < 1 or dim < 1:
        raise ValueError("num_sensors and dim must be >= 1")
    h = rng.standard_normal((num_sensors, dim))
    return h / np.linalg.norm(h, axis=1, keepdims=True)


def sample_measurements(cfg, hypothesis, n_trials, rng, mode=EXACT, h=None):
    """Batch of measurements, shape ``(n_trials, num_sensors)``.

    In ``exact`` mode a shared support is drawn per trial. Conditional on the
    support, ``h_m^T s_m`` is Gaussian with variance
    ``sigma_0^2 * sum_{n in support} h_{m,n}^2``, so the measurement is drawn
    from that conditional law instead of materializing every signal value.
    ``h`` (shape ``(M, N)``) is required in this mode.

    In ``gaussian-approx`` mode each ``y_m`` is drawn directly from
    ``N(0, p sigma_0^2 ||h_m||^2 + sigma_w^2)``.
    """
    m = cfg.num_sensors
    if hypothesis == H0:
        return rng.normal(0.0, np.sqrt(cfg.noise_var), size=(n_trials, m))
    if hypothesis != H1:
        raise ValueError(f"unknown hypothesis {hypothesis!r}")
    if mode == GAUSSIAN_APPROX:
        sigma = effective_sigma(cfg.sparsity, cfg.signal_var, cfg.h_norm_sq, cfg.noise_var)
        return rng.standard_normal((n_trials, m)) * sigma
    if mode != EXACT:
        raise ValueError(f"unknown generation mode {mode!r}")
    if h is None or h.shape != (m, cfg.signal_dim):
        raise ValueError("exact mode needs measurement vectors of shape (M, N)")
    active = rng.random((n_trials, cfg.signal_dim)) < cfg.sparsity
    energy = active.astype(float) @ (h * h).T
    sigma = np.sqrt(cfg.signal_var * energy + cfg.noise_var)
    return rng.standard_normal((n_trials, m)) * sigma
