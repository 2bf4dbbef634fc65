"""Seeded Monte Carlo experiments comparing asymptotic theory with simulation.

Every experiment simulates H0 and H1 trials once per sweep point and runs
all detectors on the same measurements. Trials are processed in fixed-size
blocks; block ``b`` of hypothesis ``h`` at sweep point ``k`` draws from the
random substream ``SeedSequence(seed, spawn_key=(k, h, b, stream))``. The
block partition does not depend on the number of worker threads, so
results are reproducible bit for bit for any degree of parallelism.
"""

import csv
import hashlib
import io
import json
import logging
import platform
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy

from . import __version__
from .channel import transmit_codes
from .design import LQU, design
from .detector import (
    CLAIRVOYANT,
    DegenerateDetectorWarning,
    build_tables,
    clairvoyant_statistic,
    fisher_information,
    mismatched_asymptotics,
    operating_point,
    statistic_from_codes,
)
from .numerics import gaussian_ccdf_inv
from .quantizer import LQ, RQ, QuantizerSpec, build_lqu, build_quantizer, quantize
from .signal_model import (
    EXACT,
    GAUSSIAN_APPROX,
    H0,
    H1,
    MODES,
    SystemConfig,
    generate_measurement_vectors,
    sample_measurements,
    signal_var_for_snr,
)

log = logging.getLogger(__name__)

BLOCK = 250
CI_Z = 2.576
RQ_LMPT = "rq-lmpt"
LQ_LMPT = "lq-lmpt"
DETECTORS = (RQ_LMPT, LQ_LMPT, CLAIRVOYANT)
AXES = ("pfa", "sensors", "snr", "assumed_pe")
CSV_HEADER = ["sweep", "detector", "pfa_theory", "pd_theory", "pfa_mc", "pd_mc", "ci", "trials"]
_H_KEY = 10_000


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class QuantizerEntry:
    """A labelled quantizer: fixed thresholds, or designed for ``design_pe``.

    ``kind`` is "rq", "lq" or "lqu". Thresholds are in measurement units.
    """

    label: str
    kind: str
    q: int
    thresholds: tuple = None
    design_pe: float = None
    range_factor: float = 3.0

    @property
    def detector(self):
        return RQ_LMPT if self.kind == RQ else LQ_LMPT

    def resolve(self, sigma_w, default_pe) -> QuantizerSpec:
        if self.thresholds is not None:
            return build_quantizer(RQ if self.kind == RQ else LQ, self.q, self.thresholds)
        if self.kind == LQU:
            return build_lqu(self.q, sigma_w, self.range_factor)
        pe = default_pe if self.design_pe is None else self.design_pe
        return _cached_design(self.kind, self.q, float(pe), float(sigma_w))

    @classmethod
    def from_dict(cls, d):
        kind = str(d["kind"]).lower()
        if kind not in (RQ, LQ, LQU):
            raise ConfigError(f"unknown quantizer kind {kind!r}")
        des = d.get("design")
        return cls(
            label=d.get("label", f"{d['q']}b-{kind.upper()}"),
            kind=kind,
            q=int(d["q"]),
            thresholds=tuple(d["thresholds"]) if d.get("thresholds") is not None else None,
            design_pe=None if not des else des.get("pe"),
            range_factor=float(d.get("range_factor", 3.0)),
        )

    def to_dict(self):
        d = {"label": self.label, "kind": self.kind, "q": self.q}
        if self.thresholds is not None:
            d["thresholds"] = list(self.thresholds)
        elif self.kind == LQU:
            d["range_factor"] = self.range_factor
        else:
            d["design"] = {"pe": self.design_pe}
        return d


@lru_cache(maxsize=None)
def _cached_design(kind, q, pe, sigma_w):
    return design(kind, q, pe, sigma_w).spec


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig
    quantizers: tuple
    detectors: tuple = DETECTORS
    trials: int = 5000
    seed: int = 0
    mode: str = EXACT
    sweep_axis: str = "pfa"
    sweep_values: tuple = (0.1,)
    pfa: float = 0.1
    sensor_counts: tuple = ()
    calibration: str = "true"

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"unknown generation mode {self.mode!r}")
        if self.sweep_axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.sweep_axis!r}")
        unknown = set(self.detectors) - set(DETECTORS)
        if unknown:
            raise ConfigError(f"unknown detectors {sorted(unknown)}")
        vals = np.asarray(self.sweep_values, dtype=float)
        if vals.size == 0:
            raise ConfigError("sweep needs at least one value")
        if self.sweep_axis == "pfa" and np.any((vals <= 0) | (vals >= 1)):
            raise ConfigError("pfa sweep values must lie in (0, 1)")
        if self.sweep_axis == "sensors" and np.any((vals < 1) | (vals != np.round(vals))):
            raise ConfigError("sensor counts must be positive integers")
        if self.sweep_axis == "assumed_pe" and np.any((vals < 0) | (vals >= 1)):
            raise ConfigError("assumed crossover probabilities must lie in [0, 1)")
        if not 0 < self.pfa < 1:
            raise ConfigError("pfa must lie in (0, 1)")
        if any(int(m) < 1 for m in self.sensor_counts):
            raise ConfigError("sensor counts must be positive integers")
        if self.calibration not in ("true", "assumed"):
            raise ConfigError(f"unknown threshold calibration {self.calibration!r}")

    @classmethod
    def from_dict(cls, d):
        try:
            system = SystemConfig.from_dict(d["system"])
            sweep = d.get("sweep", {"axis": "pfa", "values": [0.1]})
            return cls(
                system=system,
                quantizers=tuple(QuantizerEntry.from_dict(x) for x in d.get("quantizers", [])),
                detectors=tuple(d.get("detectors", DETECTORS)),
                trials=int(d.get("trials", 5000)),
                seed=int(d.get("seed", 0)),
                mode=d.get("mode", EXACT),
                sweep_axis=sweep["axis"],
                sweep_values=tuple(sweep["values"]),
                pfa=float(d.get("pfa", 0.1)),
                sensor_counts=tuple(int(m) for m in d.get("sensor_counts", ())),
                calibration=d.get("calibration", "true"),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed experiment config: {exc!r}") from exc

    def to_dict(self):
        return {
            "system": self.system.to_dict(),
            "quantizers": [q.to_dict() for q in self.quantizers],
            "detectors": list(self.detectors),
            "trials": self.trials,
            "seed": self.seed,
            "mode": self.mode,
            "sweep": {"axis": self.sweep_axis, "values": list(self.sweep_values)},
            "pfa": self.pfa,
            "sensor_counts": list(self.sensor_counts),
            "calibration": self.calibration,
        }

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class Row:
    sweep: float
    detector: str
    pfa_theory: float
    pd_theory: float
    pfa_mc: float
    pd_mc: float
    ci: float
    trials: int


@dataclass
class ExperimentResult:
    rows: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)

    def select(self, detector=None, sweep=None):
        return [
            r
            for r in self.rows
            if (detector is None or r.detector == detector) and (sweep is None or np.isclose(r.sweep, sweep))
        ]

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(
                [
                    _fmt(r.sweep),
                    r.detector,
                    _fmt(r.pfa_theory),
                    _fmt(r.pd_theory),
                    _fmt(r.pfa_mc),
                    _fmt(r.pd_mc),
                    _fmt(r.ci),
                    r.trials,
                ]
            )
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _fmt(x):
    return "nan" if x is None or not np.isfinite(x) else f"{x:.10g}"


def ci_half_width(p_hat, trials):
    """99% normal-approximation binomial half width."""
    return CI_Z * np.sqrt(p_hat * (1.0 - p_hat) / trials)


def run_manifest(cfg: ExperimentConfig, command: str, extra=None) -> dict:
    man = {
        "command": command,
        "seed": cfg.seed,
        "config_sha256": cfg.digest(),
        "config": cfg.to_dict(),
        "versions": {
            "qlmpt": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    if extra:
        man.update(extra)
    return man


# -- simulation core ---------------------------------------------------------


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def _blocks(trials):
    starts = range(0, trials, BLOCK)
    return [(b, min(BLOCK, trials - s)) for b, s in enumerate(starts)]


def _simulate_block(point, hyp, block, n, cfg, mode, h, detectors, true_pe, seed):
    """Statistics of every detector for one block of trials; shape ``(len(detectors), n)``."""
    hyp_key = 0 if hyp == H0 else 1
    y = sample_measurements(cfg, hyp, n, _rng(seed, point, hyp_key, block, 0), mode=mode, h=h)
    out = np.empty((len(detectors), n))
    for k, det in enumerate(detectors):
        if det.tables is None:
            out[k] = clairvoyant_statistic(cfg, y)
            continue
        spec = det.tables.specs[0]
        codes = quantize(spec, y) - 1
        codes = transmit_codes(codes, spec.q, true_pe, _rng(seed, point, hyp_key, block, 1 + k))
        out[k] = statistic_from_codes(det.tables, codes)
    return out


def _simulate(point, cfg, mode, h, detectors, true_pe, trials, seed, workers):
    jobs = [(hyp, b, n) for hyp in (H0, H1) for b, n in _blocks(trials)]

    def job(args):
        hyp, b, n = args
        return _simulate_block(point, hyp, b, n, cfg, mode, h, detectors, true_pe, seed)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, jobs))
    else:
        parts = [job(j) for j in jobs]
    nb = len(jobs) // 2
    t0 = np.concatenate(parts[:nb], axis=1)
    t1 = np.concatenate(parts[nb:], axis=1)
    return t0, t1


@dataclass
class _Detector:
    label: str
    tables: object
    fi0: float


def _detectors(ecfg, cfg, assumed_pe=None):
    dets, degenerate = [], []
    for entry in ecfg.quantizers:
        if entry.detector not in ecfg.detectors:
            continue
        spec = entry.resolve(cfg.sigma_w, float(cfg.pe[0]))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateDetectorWarning)
            tables = build_tables(cfg, spec, assumed_pe)
        if tables.degenerate:
            log.warning("detector %s is degenerate (zero Fisher information); skipped", entry.label)
            degenerate.append(entry.label)
            continue
        dets.append(_Detector(entry.label, tables, tables.fi0))
    if CLAIRVOYANT in ecfg.detectors:
        dets.append(_Detector(CLAIRVOYANT, None, fisher_information(CLAIRVOYANT, cfg)))
    return dets, degenerate


def _measurement_vectors(ecfg, m_max):
    if ecfg.mode != EXACT:
        return None
    return generate_measurement_vectors(m_max, ecfg.system.signal_dim, _rng(ecfg.seed, _H_KEY))


def _rows_at(sweep, dets, t0, t1, p, pfas, trials, theory=None):
    rows = []
    for k, det in enumerate(dets):
        for pfa in pfas:
            if theory is None and det.fi0 <= 0:
                # no signal power: the statistic is still defined, and H1 equals H0
                eta = gaussian_ccdf_inv(pfa)
                pfa_th = pd_th = float(pfa)
            elif theory is None:
                op = operating_point(det.fi0, p, pfa)
                pfa_th, pd_th, eta = op.pfa, op.pd, op.eta
            else:
                pfa_th, pd_th, eta = theory[k]
            pfa_mc = float(np.mean(t0[k] > eta))
            pd_mc = float(np.mean(t1[k] > eta))
            rows.append(
                Row(
                    sweep=float(pfa if sweep is None else sweep),
                    detector=det.label,
                    pfa_theory=float(pfa_th),
                    pd_theory=float(pd_th),
                    pfa_mc=pfa_mc,
                    pd_mc=pd_mc,
                    ci=float(ci_half_width(pd_mc, trials)),
                    trials=trials,
                )
            )
    return rows


def _degenerate_rows(labels, sweep, trials):
    nan = float("nan")
    return [Row(float(sweep), f"{lab} (degenerate)", nan, nan, nan, nan, nan, trials) for lab in labels]


def run_roc(ecfg: ExperimentConfig, workers=1) -> ExperimentResult:
    """Theory and Monte Carlo (Pfa, Pd) over a false-alarm grid."""
    if ecfg.sweep_axis != "pfa":
        raise ConfigError("run_roc needs a pfa sweep")
    cfg = ecfg.system
    dets, degenerate = _detectors(ecfg, cfg)
    h = _measurement_vectors(ecfg, cfg.num_sensors)
    t0, t1 = _simulate(0, cfg, ecfg.mode, h, dets, cfg.pe, ecfg.trials, ecfg.seed, workers)
    res = ExperimentResult(degenerate=degenerate)
    res.rows += _rows_at(None, dets, t0, t1, cfg.sparsity, ecfg.sweep_values, ecfg.trials)
    for v in ecfg.sweep_values:
        res.rows += _degenerate_rows(degenerate, v, ecfg.trials)
    return res


def run_pd_vs_sensors(ecfg: ExperimentConfig, workers=1) -> ExperimentResult:
    """Theory and Monte Carlo detection probability at ``ecfg.pfa`` for each sensor count."""
    if ecfg.sweep_axis != "sensors":
        raise ConfigError("run_pd_vs_sensors needs a sensors sweep")
    counts = [int(m) for m in ecfg.sweep_values]
    h_all = _measurement_vectors(ecfg, max(counts))
    res = ExperimentResult()
    for k, m in enumerate(counts):
        cfg = ecfg.system.replace(num_sensors=m)
        dets, degenerate = _detectors(ecfg, cfg)
        h = None if h_all is None else h_all[:m]
        t0, t1 = _simulate(k, cfg, ecfg.mode, h, dets, cfg.pe, ecfg.trials, ecfg.seed, workers)
        res.rows += _rows_at(m, dets, t0, t1, cfg.sparsity, [ecfg.pfa], ecfg.trials)
        res.rows += _degenerate_rows(degenerate, m, ecfg.trials)
        res.degenerate += degenerate
    return res


def run_pd_vs_snr(ecfg: ExperimentConfig, workers=1) -> ExperimentResult:
    """Sweep SNR (dB) by varying the signal variance at fixed sparsity."""
    if ecfg.sweep_axis != "snr":
        raise ConfigError("run_pd_vs_snr needs an snr sweep")
    base = ecfg.system
    h = _measurement_vectors(ecfg, base.num_sensors)
    res = ExperimentResult()
    for k, snr in enumerate(ecfg.sweep_values):
        cfg = base.replace(signal_var=signal_var_for_snr(snr, base.sparsity, base.noise_var))
        dets, degenerate = _detectors(ecfg, cfg)
        t0, t1 = _simulate(k, cfg, ecfg.mode, h, dets, cfg.pe, ecfg.trials, ecfg.seed, workers)
        res.rows += _rows_at(snr, dets, t0, t1, cfg.sparsity, [ecfg.pfa], ecfg.trials)
        res.rows += _degenerate_rows(degenerate, snr, ecfg.trials)
        res.degenerate += degenerate
    return res


def run_mismatch(ecfg: ExperimentConfig, workers=1) -> ExperimentResult:
    """Detection with tables built for an assumed crossover probability.

    The configured ``system.pe`` is the true channel. For every assumed value
    in the sweep and every sensor count in ``ecfg.sensor_counts`` (default:
    the configured M), weights and the threshold use the assumed value while
    codewords are corrupted with the true one. Theory columns hold the
    :func:`~qlmpt.detector.mismatched_asymptotics` prediction. Rows carry the
    sensor count in ``sweep`` and ``"<label> pe_hat=<value>"`` as detector.

    With ``ecfg.calibration == "true"`` (default) the decision threshold is
    set where the predicted false-alarm rate under the true channel equals
    ``ecfg.pfa``, so all assumed values are compared at the same Pfa; with
    ``"assumed"`` it is ``Phi^-1(pfa)`` as the mismatched model prescribes.
    """
    if ecfg.sweep_axis != "assumed_pe":
        raise ConfigError("run_mismatch needs an assumed_pe sweep")
    counts = list(ecfg.sensor_counts) or [ecfg.system.num_sensors]
    h_all = _measurement_vectors(ecfg, max(counts))
    res = ExperimentResult()
    base = ecfg.system
    for k, m in enumerate(counts):
        cfg = base.replace(num_sensors=m) if m != base.num_sensors else base
        h = None if h_all is None else h_all[:m]
        dets = []
        theory = []
        for pe_hat in ecfg.sweep_values:
            ds, degenerate = _detectors(ecfg, cfg, assumed_pe=pe_hat)
            for d in ds:
                if d.tables is None:
                    continue
                pred = mismatched_asymptotics(
                    cfg, d.tables.specs[0], cfg.pe, pe_hat, cfg.sparsity, ecfg.pfa, calibration=ecfg.calibration
                )
                dets.append(_Detector(f"{d.label} pe_hat={pe_hat:g}", d.tables, d.fi0))
                theory.append((pred.pfa, pred.pd, pred.eta))
            res.degenerate += degenerate
        t0, t1 = _simulate(k, cfg, ecfg.mode, h, dets, cfg.pe, ecfg.trials, ecfg.seed, workers)
        res.rows += _rows_at(m, dets, t0, t1, cfg.sparsity, [ecfg.pfa], ecfg.trials, theory=theory)
    return res


def run_experiment(ecfg: ExperimentConfig, workers=1) -> ExperimentResult:
    runner = {
        "pfa": run_roc,
        "sensors": run_pd_vs_sensors,
        "snr": run_pd_vs_snr,
        "assumed_pe": run_mismatch,
    }[ecfg.sweep_axis]
    return runner(ecfg, workers=workers)


# -- design tables -----------------------------------------------------------

DESIGN_HEADER = ["kind", "q", "pe", "thresholds", "normalized_fi", "are"]


def run_design_table(qs=(1, 2, 3), pes=(0.0, 0.01, 0.1, 0.2), kinds=(RQ, LQU, LQ), sigma_w=1.0, range_factor=3.0):
    """``(kind, DesignResult)`` per (kind, q, pe), in that nesting order."""
    return [
        (kind, design(kind, q, pe, sigma_w, range_factor=range_factor))
        for kind in kinds
        for q in qs
        for pe in pes
    ]


def design_table_csv(results, path=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DESIGN_HEADER)
    for kind, r in results:
        w.writerow(
            [
                kind,
                r.spec.q,
                _fmt(r.pe),
                " ".join(_fmt(t) for t in r.spec.thresholds),
                _fmt(r.normalized_fi),
                _fmt(r.are),
            ]
        )
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def fi_sweep_rows(pes, taus):
    """``(pe, tau/sigma_w, normalized_fi)`` triples for the one-bit LQ threshold sweep."""
    from .design import fi_sweep_1d

    rows = []
    for pe in pes:
        vals = fi_sweep_1d(pe, taus)
        rows += [(float(pe), float(t), float(v)) for t, v in zip(taus, vals)]
    return rows
