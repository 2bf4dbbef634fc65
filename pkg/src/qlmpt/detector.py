"""Fusion rules: quantized LMPT detectors (RQ and LQ) and the clairvoyant detector.

All statistics are returned in fully normalized form, i.e. the score at
``p = 0`` divided by the square root of the Fisher information, so that they
are asymptotically N(0, 1) under H0 and N(p * sqrt(FI), 1) under H1.

Conventions for a sensor with thresholds ``tau`` and noise scale ``sigma``:

* ``Q_j = Phi(tau_{j-1}/sigma) - Phi(tau_j/sigma)``: the probability of
  interval j for RQ and *half* of it for LQ (``|y|`` folds both tails).
* ``F_j = tau_{j-1} psi(tau_{j-1}/sigma) - tau_j psi(tau_j/sigma)``.
* ``xi_i = sum_j G[i, j] Q_j`` with ``G`` the BSC transition matrix; the
  received-codeword probability is ``xi_i`` (RQ) or ``2 xi_i`` (LQ).
* weight ``w_i = (G F)_i / xi_i``.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import numerics
from .channel import transition_matrix
from .quantizer import LQ, RQ, QuantizerSpec
from .signal_model import SystemConfig, effective_sigma

CLAIRVOYANT = "clairvoyant"


class DegenerateDetectorError(ValueError):
    """The detector's Fisher information at p = 0 vanishes."""


class DegenerateDetectorWarning(UserWarning):
    pass


def _edges(kind, thresholds):
    lo = -np.inf if kind == RQ else 0.0
    return np.concatenate([[lo], np.asarray(thresholds, dtype=float), [np.inf]])


def interval_probs(kind, thresholds, sigma):
    """All ``Q_j`` for one sensor, shape ``(2**q,)``."""
    phi = numerics.gaussian_ccdf(_edges(kind, thresholds) / sigma)
    return phi[:-1] - phi[1:]


def f_terms(kind, thresholds, sigma):
    """All ``F_j`` for one sensor, shape ``(2**q,)``; sums to zero."""
    xp = numerics.x_pdf(_edges(kind, thresholds), scale=sigma)
    return xp[:-1] - xp[1:]


def interval_prob(kind, thresholds, j, sigma):
    """``Q_j`` for a 1-based interval index ``j``."""
    return float(interval_probs(kind, thresholds, sigma)[j - 1])


def f_term(kind, thresholds, j, sigma):
    """``F_j`` for a 1-based interval index ``j``."""
    return float(f_terms(kind, thresholds, sigma)[j - 1])


def _mass_factor(kind):
    # received-codeword pmf is xi for RQ and 2 xi for LQ
    return 1.0 if kind == RQ else 2.0


def _fi_prefactor(kind):
    return 0.25 if kind == RQ else 0.5


def _per_sensor_specs(spec, m):
    specs = [spec] * m if isinstance(spec, QuantizerSpec) else list(spec)
    if len(specs) != m:
        raise ValueError(f"expected {m} quantizer specs, got {len(specs)}")
    kinds = {s.kind for s in specs}
    depths = {s.q for s in specs}
    if len(kinds) != 1 or len(depths) != 1:
        raise ValueError("all sensors must share quantizer kind and bit depth")
    return specs


def _sensor_terms(specs, pe, sigma):
    """Stacked ``(G F, G Q)`` for every sensor at per-sensor noise scales ``sigma``."""
    q = specs[0].q
    kind = specs[0].kind
    num = np.empty((len(specs), 2**q))
    den = np.empty_like(num)
    cache = {}
    for m, (s, e, sg) in enumerate(zip(specs, pe, sigma)):
        key = (s.thresholds, float(e), float(sg))
        if key not in cache:
            g = transition_matrix(q, e)
            cache[key] = (g @ f_terms(kind, s.thresholds, sg), g @ interval_probs(kind, s.thresholds, sg))
        num[m], den[m] = cache[key]
    return num, den


def _safe_ratio(num, den):
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


@dataclass(frozen=True)
class DetectorTables:
    """Precomputed per-sensor quantities of a quantized LMPT detector.

    Attributes
    ----------
    weights : (M, 2**q) array
        Fusion weight of each received interval.
    codeword_mass : (M, 2**q) array
        ``xi`` at p = 0 (half the pmf for LQ).
    scale : (M,) array
        ``||h_m||^2 / sigma_w^3``.
    fi0 : float
        Total Fisher information at p = 0.
    """

    cfg: SystemConfig
    specs: tuple
    pe: np.ndarray
    weights: np.ndarray
    codeword_mass: np.ndarray
    scale: np.ndarray
    fi0: float
    fi0_unit: float

    @property
    def kind(self):
        return self.specs[0].kind

    @property
    def q(self):
        return self.specs[0].q

    @property
    def degenerate(self):
        return not self.fi0_unit > 0

    def received_pmf(self, p=0.0, pe=None):
        """P(d_m = z_i) at sparsity ``p`` (Gaussian approximation), shape ``(M, 2**q)``.

        ``pe`` overrides the channel the codewords actually travel through.
        """
        cfg = self.cfg
        sigma = effective_sigma(p, cfg.signal_var, cfg.h_norm_sq, cfg.noise_var)
        pe = self.pe if pe is None else np.broadcast_to(np.asarray(pe, float), self.pe.shape)
        _, den = _sensor_terms(self.specs, pe, sigma)
        return _mass_factor(self.kind) * den

    def contributions(self):
        """Per-sensor statistic contribution of every interval, shape ``(M, 2**q)``."""
        if self.degenerate:
            raise DegenerateDetectorError("Fisher information at p = 0 is zero; statistic undefined")
        return 0.5 * self.scale[:, None] * self.weights / np.sqrt(self.fi0_unit)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "q": self.q,
            "fi0": self.fi0,
            "degenerate": self.degenerate,
            "sensors": [
                {
                    "thresholds": list(s.thresholds),
                    "pe": float(e),
                    "scale": float(c),
                    "weights": w.tolist(),
                    "codeword_mass": x.tolist(),
                }
                for s, e, c, w, x in zip(self.specs, self.pe, self.scale, self.weights, self.codeword_mass)
            ],
        }


def build_tables(cfg: SystemConfig, spec, assumed_pe=None) -> DetectorTables:
    """Build fusion tables for one quantizer (or a per-sensor list of them).

    ``assumed_pe`` defaults to the configured per-sensor crossover
    probabilities. A degenerate quantizer (zero Fisher information, e.g. a
    one-bit RQ with threshold 0) produces tables with ``degenerate=True``
    and a :class:`DegenerateDetectorWarning`.
    """
    m = cfg.num_sensors
    specs = tuple(_per_sensor_specs(spec, m))
    pe = cfg.pe if assumed_pe is None else np.broadcast_to(np.asarray(assumed_pe, float), (m,)).copy()
    if np.any((pe < 0) | (pe >= 1)):
        raise ValueError("assumed crossover probabilities must lie in [0, 1)")
    sigma_w = cfg.sigma_w
    num, den = _sensor_terms(specs, pe, np.full(m, sigma_w))
    weights = _safe_ratio(num, den)
    scale = cfg.h_norm_sq / sigma_w**3
    kind = specs[0].kind
    per_sensor = _safe_ratio(num**2, den).sum(axis=1)
    fi0_unit = _fi_prefactor(kind) * float(np.sum(scale**2 * per_sensor))
    # relative floor: exact zeros can come out as ~1e-33 from rounding
    if fi0_unit <= 1e-14 * _fi_prefactor(kind) * float(np.sum(scale**2)):
        fi0_unit = 0.0
        warnings.warn("quantizer carries no Fisher information at p = 0", DegenerateDetectorWarning, stacklevel=2)
    weights.setflags(write=False)
    den.setflags(write=False)
    return DetectorTables(
        cfg=cfg,
        specs=specs,
        pe=pe,
        weights=weights,
        codeword_mass=den,
        scale=scale,
        fi0=fi0_unit * cfg.signal_var**2,
        fi0_unit=fi0_unit,
    )


def lmpt_statistic(tables: DetectorTables, received):
    """Normalized quantized LMPT statistic.

    ``received`` holds 1-based interval indices with the sensor axis last;
    leading axes (e.g. trials) are broadcast.
    """
    return statistic_from_codes(tables, np.asarray(received) - 1)


def statistic_from_codes(tables: DetectorTables, codes):
    """Same as :func:`lmpt_statistic` but on integer codewords (``index - 1``)."""
    contrib = tables.contributions()
    codes = np.asarray(codes)
    vals = np.take_along_axis(
        np.broadcast_to(contrib, codes.shape[:-1] + contrib.shape),
        codes[..., None],
        axis=-1,
    )[..., 0]
    return vals.sum(axis=-1)


def clairvoyant_statistic(cfg: SystemConfig, y):
    """Normalized LMPT statistic on unquantized measurements (sensor axis last)."""
    y = np.asarray(y, dtype=float)
    hn = cfg.h_norm_sq
    num = (hn * (y * y - cfg.noise_var)).sum(axis=-1)
    return num / (cfg.noise_var * np.sqrt(2.0 * np.sum(hn * hn)))


# -- likelihood, score and Fisher information at general p -------------------


def _quantized_log_likelihood(tables, received, p):
    pmf = tables.received_pmf(p)
    idx = np.asarray(received) - 1
    m = np.arange(tables.cfg.num_sensors)
    return float(np.sum(np.log(pmf[m, idx])))


def _quantized_score(tables, received, p):
    cfg = tables.cfg
    sigma = effective_sigma(p, cfg.signal_var, cfg.h_norm_sq, cfg.noise_var)
    num, den = _sensor_terms(tables.specs, tables.pe, sigma)
    idx = np.asarray(received) - 1
    m = np.arange(cfg.num_sensors)
    ratio = num[m, idx] / den[m, idx]
    return float(0.5 * cfg.signal_var * np.sum(cfg.h_norm_sq / sigma**3 * ratio))


def clairvoyant_log_likelihood(cfg, y, p):
    var = effective_sigma(p, cfg.signal_var, cfg.h_norm_sq, cfg.noise_var) ** 2
    y = np.asarray(y, dtype=float)
    return float(np.sum(-0.5 * np.log(2 * np.pi * var) - y * y / (2 * var)))


def clairvoyant_score(cfg, y, p):
    var = effective_sigma(p, cfg.signal_var, cfg.h_norm_sq, cfg.noise_var) ** 2
    y = np.asarray(y, dtype=float)
    return float(0.5 * cfg.signal_var * np.sum(cfg.h_norm_sq * (y * y - var) / var**2))


def log_likelihood(context, data, p):
    """Log-likelihood of the fusion-center data at sparsity ``p``.

    ``context`` is a :class:`DetectorTables` (``data`` = received 1-based
    indices) or a :class:`SystemConfig` (``data`` = raw measurements, the
    clairvoyant model).
    """
    if isinstance(context, DetectorTables):
        return _quantized_log_likelihood(context, data, p)
    return clairvoyant_log_likelihood(context, data, p)


def score(context, data, p):
    """Derivative of :func:`log_likelihood` with respect to ``p``, in closed form."""
    if isinstance(context, DetectorTables):
        return _quantized_score(context, data, p)
    return clairvoyant_score(context, data, p)


def fisher_information(kind, cfg: SystemConfig, spec=None, pe=None, p=0.0):
    """Fisher information about ``p`` carried by the fusion-center data.

    ``kind`` is ``"rq"``, ``"lq"`` or ``"clairvoyant"``. For the quantized
    kinds ``spec`` is required and ``pe`` defaults to ``cfg.pe``. A
    degenerate quantizer returns 0 with a warning.
    """
    sigma = effective_sigma(p, cfg.signal_var, cfg.h_norm_sq, cfg.noise_var)
    hn = cfg.h_norm_sq
    if kind == CLAIRVOYANT:
        return float(0.5 * cfg.signal_var**2 * np.sum(hn**2 / sigma**4))
    specs = _per_sensor_specs(spec, cfg.num_sensors)
    if specs[0].kind != kind:
        raise ValueError(f"spec kind {specs[0].kind!r} does not match {kind!r}")
    pe = cfg.pe if pe is None else np.broadcast_to(np.asarray(pe, float), (cfg.num_sensors,))
    num, den = _sensor_terms(specs, pe, sigma)
    per_sensor = _safe_ratio(num**2, den).sum(axis=1)
    fi = _fi_prefactor(kind) * cfg.signal_var**2 * float(np.sum(hn**2 / sigma**6 * per_sensor))
    if fi <= 1e-14 * cfg.signal_var**2 * float(np.sum(hn**2 / sigma**6)):
        warnings.warn("quantizer carries no Fisher information", DegenerateDetectorWarning, stacklevel=2)
        return 0.0
    return fi


# -- asymptotic operating points --------------------------------------------


@dataclass(frozen=True)
class OperatingPoint:
    eta: float
    pfa: float
    pd: float
    lam: float


def operating_point(fi0, p, pfa) -> OperatingPoint:
    """Threshold and detection probability of a normalized LMPT test at false-alarm rate ``pfa``."""
    if not fi0 > 0:
        raise DegenerateDetectorError(f"Fisher information must be positive, got {fi0}")
    eta = numerics.gaussian_ccdf_inv(pfa)
    lam = p * np.sqrt(fi0)
    return OperatingPoint(eta=eta, pfa=float(pfa), pd=numerics.noncentral_ccdf(eta, lam), lam=float(lam))


@dataclass(frozen=True)
class MismatchPrediction:
    pfa: float
    pd: float
    eta: float
    mean0: float
    var0: float
    mean1: float
    var1: float


def mismatched_asymptotics(cfg, spec, pe_true, pe_assumed, p, nominal_pfa, method="exact", calibration="assumed"):
    """Predicted (Pfa, Pd) when the fusion center assumes the wrong crossover probability.

    Weights and the threshold ``Phi^-1(nominal_pfa)`` come from ``pe_assumed``;
    codewords travel through ``pe_true``. The mean and variance of each
    sensor's contribution are enumerated over its ``2**q`` outcomes and the
    sum over sensors is approximated as Gaussian.

    ``method="exact"`` uses the H1 codeword distribution at sparsity ``p``
    (Gaussian approximation of the measurement). ``method="local"`` uses the
    first-order expansion around ``p = 0`` (mean shift from the derivative of
    the pmf, H0 variance), which reproduces :func:`operating_point` exactly
    when the channel is matched.

    ``calibration="assumed"`` places the threshold at ``Phi^-1(nominal_pfa)``,
    the value the fusion center would use if its channel model were right.
    ``calibration="true"`` instead places it where the predicted false-alarm
    rate under the true channel equals ``nominal_pfa``, so detectors built
    for different assumed channels are compared at the same actual Pfa.
    """
    tables = build_tables(cfg, spec, pe_assumed)
    t = tables.contributions()
    p0 = tables.received_pmf(0.0, pe=pe_true)
    mean0 = float(np.sum(p0 * t))
    var0 = float(np.sum(p0 * t * t) - np.sum(np.sum(p0 * t, axis=1) ** 2))
    if calibration == "assumed":
        eta = numerics.gaussian_ccdf_inv(nominal_pfa)
    elif calibration == "true":
        eta = mean0 + np.sqrt(var0) * numerics.gaussian_ccdf_inv(nominal_pfa)
    else:
        raise ValueError(f"unknown calibration {calibration!r}")
    if method == "exact":
        p1 = tables.received_pmf(p, pe=pe_true)
        mean1 = float(np.sum(p1 * t))
        var1 = float(np.sum(p1 * t * t) - np.sum(np.sum(p1 * t, axis=1) ** 2))
    elif method == "local":
        sigma_w = cfg.sigma_w
        pe_t = np.broadcast_to(np.asarray(pe_true, float), (cfg.num_sensors,))
        num, _ = _sensor_terms(tables.specs, pe_t, np.full(cfg.num_sensors, sigma_w))
        # d/dp of the received pmf at p = 0
        dp = _mass_factor(tables.kind) * 0.5 * cfg.signal_var * (cfg.h_norm_sq / sigma_w**3)[:, None] * num
        mean1 = mean0 + p * float(np.sum(dp * t))
        var1 = var0
    else:
        raise ValueError(f"unknown method {method!r}")
    pfa = numerics.gaussian_ccdf((eta - mean0) / np.sqrt(var0))
    pd = numerics.gaussian_ccdf((eta - mean1) / np.sqrt(var1))
    return MismatchPrediction(pfa=pfa, pd=pd, eta=float(eta), mean0=mean0, var0=var0, mean1=mean1, var1=var1)
