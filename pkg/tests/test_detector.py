import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlmpt import numerics
from qlmpt.channel import transmit_codes
from qlmpt.design import design
from qlmpt.detector import (
    CLAIRVOYANT,
    DegenerateDetectorError,
    DegenerateDetectorWarning,
    build_tables,
    clairvoyant_statistic,
    f_term,
    f_terms,
    fisher_information,
    interval_prob,
    interval_probs,
    lmpt_statistic,
    log_likelihood,
    mismatched_asymptotics,
    operating_point,
    score,
    statistic_from_codes,
)
from qlmpt.quantizer import LQ, RQ, build_quantizer, quantize
from qlmpt.signal_model import H0, SystemConfig, sample_measurements

PSI1 = numerics.gaussian_pdf(1.0)


def _cfg(m=3, **kw):
    base = dict(num_sensors=m, signal_dim=1000, sparsity=0.03, signal_var=4.0, noise_var=1.0)
    base.update(kw)
    return SystemConfig(**base)


def _hetero_cfg():
    return _cfg(m=3, h_norm_sq=[1.0, 0.6, 1.7], pe=[0.0, 0.05, 0.2], noise_var=1.3)


SPECS = [
    build_quantizer(RQ, 1, [0.4]),
    build_quantizer(LQ, 1, [1.0]),
    build_quantizer(RQ, 2, [-1.0, 0.1, 0.9]),
    build_quantizer(LQ, 2, [0.4, 1.1, 2.0]),
    build_quantizer(LQ, 3, [0.3, 0.6, 0.9, 1.2, 1.6, 2.0, 2.6]),
]


def _all_received(m, q):
    return np.array(list(itertools.product(range(1, 2**q + 1), repeat=m)))


@st.composite
def specs(draw):
    kind = draw(st.sampled_from([RQ, LQ]))
    q = draw(st.integers(1, 3))
    lo = 0.05 if kind == LQ else -3.0
    gaps = draw(st.lists(st.floats(0.05, 1.5), min_size=2**q - 1, max_size=2**q - 1))
    return build_quantizer(kind, q, lo + np.cumsum(gaps))


class TestIntervalTerms:
    def test_examples(self):
        assert interval_prob(RQ, [0.0], 1, 1.0) == 0.5
        assert abs(interval_prob(LQ, [1.0], 2, 1.0) - 0.158655) < 1e-6
        assert f_term(RQ, [0.0], 1, 1.0) == 0.0
        assert f_term(RQ, [0.0], 2, 1.0) == 0.0
        assert abs(f_term(LQ, [1.0], 1, 1.0) + 0.241971) < 1e-6
        assert abs(f_term(LQ, [1.0], 2, 1.0) - 0.241971) < 1e-6

    @given(specs(), st.floats(0.2, 5.0))
    def test_telescoping(self, spec, sigma):
        total = 1.0 if spec.kind == RQ else 0.5
        assert abs(interval_probs(spec.kind, spec.thresholds, sigma).sum() - total) < 1e-12
        assert abs(f_terms(spec.kind, spec.thresholds, sigma).sum()) < 1e-12
        assert np.all(interval_probs(spec.kind, spec.thresholds, sigma) >= 0)


class TestBuildTables:
    def test_worked_lq_fisher_information(self):
        cfg = _cfg(m=1, signal_var=1.0)
        t = build_tables(cfg, build_quantizer(LQ, 1, [1.0]))
        q1, q2 = 0.5 - numerics.gaussian_ccdf(1.0), numerics.gaussian_ccdf(1.0)
        oracle = 0.5 * (PSI1**2 / q1 + PSI1**2 / q2)
        assert abs(t.fi0 - 0.27028) < 1e-4
        assert t.fi0 == pytest.approx(oracle, rel=1e-13)

    def test_degenerate_sign_quantizer(self):
        for pe in (0.0, 0.1):
            with pytest.warns(DegenerateDetectorWarning):
                t = build_tables(_cfg(pe=pe), build_quantizer(RQ, 1, [0.0]))
            assert t.degenerate and t.fi0 == 0.0
            with pytest.raises(DegenerateDetectorError):
                t.contributions()

    @pytest.mark.parametrize("spec", SPECS)
    def test_pmf_normalized_and_zero_mean(self, spec):
        t = build_tables(_hetero_cfg(), spec)
        pmf = t.received_pmf(0.0)
        np.testing.assert_allclose(pmf.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(t.codeword_mass > 0)
        np.testing.assert_allclose((pmf * t.weights).sum(axis=1), 0.0, atol=1e-10)

    def test_pmf_normalized_at_positive_p(self):
        t = build_tables(_hetero_cfg(), SPECS[4])
        np.testing.assert_allclose(t.received_pmf(0.2).sum(axis=1), 1.0, atol=1e-12)

    def test_assumed_pe_overrides(self):
        cfg = _cfg(pe=0.2)
        a = build_tables(cfg, SPECS[3], assumed_pe=0.0)
        b = build_tables(_cfg(pe=0.0), SPECS[3])
        np.testing.assert_array_equal(a.weights, b.weights)
        with pytest.raises(ValueError):
            build_tables(cfg, SPECS[3], assumed_pe=1.0)

    def test_per_sensor_specs(self):
        cfg = _cfg(m=2)
        specs2 = [build_quantizer(LQ, 1, [0.8]), build_quantizer(LQ, 1, [1.3])]
        both = build_tables(cfg, specs2).fi0
        one = [build_tables(_cfg(m=1), s).fi0 for s in specs2]
        assert both == pytest.approx(sum(one), rel=1e-13)
        with pytest.raises(ValueError):
            build_tables(cfg, [specs2[0], SPECS[0]])
        with pytest.raises(ValueError):
            build_tables(cfg, specs2[:1])

    def test_to_dict(self):
        d = build_tables(_hetero_cfg(), SPECS[1]).to_dict()
        assert d["kind"] == LQ and len(d["sensors"]) == 3
        assert set(d["sensors"][0]) == {"thresholds", "pe", "scale", "weights", "codeword_mass"}


class TestStatistics:
    def test_additive_over_sensors(self):
        t = build_tables(_hetero_cfg(), SPECS[3])
        r = np.array([2, 4, 1])
        c = t.contributions()
        assert lmpt_statistic(t, r) == pytest.approx(sum(c[m, r[m] - 1] for m in range(3)), rel=1e-14)
        np.testing.assert_allclose(lmpt_statistic(t, np.tile(r, (5, 1))), lmpt_statistic(t, r))
        assert statistic_from_codes(t, r - 1) == lmpt_statistic(t, r)

    def test_silent_sensor_contributes_nothing(self):
        cfg = _cfg(m=2, h_norm_sq=[1.0, 0.0])
        t = build_tables(cfg, SPECS[1])
        assert lmpt_statistic(t, [2, 1]) == lmpt_statistic(t, [2, 2])

    @pytest.mark.parametrize("factor", [1e-3, 0.37, 5.0, 1e4])
    def test_signal_variance_cancels(self, factor):
        base = _hetero_cfg()
        r = _all_received(3, 2)
        a = lmpt_statistic(build_tables(base, SPECS[3]), r)
        b = lmpt_statistic(build_tables(base.replace(signal_var=base.signal_var * factor), SPECS[3]), r)
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)

    def test_clairvoyant_examples(self):
        cfg = _cfg(m=4, noise_var=2.0, h_norm_sq=[1, 2, 3, 4])
        assert clairvoyant_statistic(cfg, np.full(4, np.sqrt(2.0))) == pytest.approx(0.0, abs=1e-15)
        one = _cfg(m=1)
        assert clairvoyant_statistic(one, [np.sqrt(3)]) == pytest.approx(np.sqrt(2), rel=1e-14)

    def test_clairvoyant_h_scale_invariance(self):
        cfg = _hetero_cfg()
        y = np.random.default_rng(0).normal(size=(10, 3))
        scaled = cfg.replace(h_norm_sq=cfg.h_norm_sq * 3.7)
        np.testing.assert_allclose(clairvoyant_statistic(cfg, y), clairvoyant_statistic(scaled, y), rtol=1e-13)

    @pytest.mark.parametrize("kind", [LQ, CLAIRVOYANT])
    def test_null_moments_m300(self, kind):
        cfg = _cfg(m=300, pe=0.1)
        y = sample_measurements(cfg, H0, 5000, np.random.default_rng(21))
        if kind == CLAIRVOYANT:
            t = clairvoyant_statistic(cfg, y)
        else:
            spec = design(LQ, 3, 0.1).spec
            codes = transmit_codes(quantize(spec, y) - 1, 3, 0.1, np.random.default_rng(22))
            t = statistic_from_codes(build_tables(cfg, spec), codes)
        assert abs(t.mean()) < 0.05
        assert abs(t.var() - 1) < 0.07

    @pytest.mark.parametrize("alpha", [0.01, 0.1])
    @pytest.mark.parametrize("kind", [RQ, LQ, CLAIRVOYANT])
    def test_null_calibration(self, alpha, kind):
        cfg = _cfg(m=300, pe=0.01)
        y = sample_measurements(cfg, H0, 5000, np.random.default_rng(0))
        if kind == CLAIRVOYANT:
            t = clairvoyant_statistic(cfg, y)
        else:
            spec = design(kind, 3, 0.01).spec
            codes = transmit_codes(quantize(spec, y) - 1, 3, 0.01, np.random.default_rng(1000))
            t = statistic_from_codes(build_tables(cfg, spec), codes)
        pfa = np.mean(t > numerics.gaussian_ccdf_inv(alpha))
        assert abs(pfa - alpha) <= 2.576 * np.sqrt(alpha * (1 - alpha) / 5000)

    @pytest.mark.parametrize("alpha", [0.01, 0.1])
    @pytest.mark.parametrize("kind", [RQ, LQ])
    def test_finite_m_false_alarm_rate(self, alpha, kind):
        # the M = 300 sum is slightly right-skewed; its exact tail rate must still sit in the 99% band
        cfg = _cfg(m=300, pe=0.01)
        t = build_tables(cfg, design(kind, 3, 0.01).spec)
        c, pmf = t.contributions()[0], t.received_pmf(0.0)[0]
        counts = np.random.default_rng(7).multinomial(300, pmf / pmf.sum(), size=2_000_000)
        rate = np.mean(counts @ c > numerics.gaussian_ccdf_inv(alpha))
        assert abs(rate - alpha) <= 2.576 * np.sqrt(alpha * (1 - alpha) / 5000)


def _fd_central(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)


def _fd_forward(f, h=1e-6):
    # second-order one-sided stencil; p cannot go below zero
    return (-3 * f(0.0) + 4 * f(h) - f(2 * h)) / (2 * h)


class TestLikelihood:
    def test_rq_null_loglik_is_log_mass(self):
        t = build_tables(_hetero_cfg(), SPECS[2])
        r = np.array([1, 3, 4])
        ref = np.sum(np.log(t.codeword_mass[np.arange(3), r - 1]))
        assert log_likelihood(t, r, 0.0) == pytest.approx(ref, rel=1e-14)

    @pytest.mark.parametrize("p", [0.0, 0.1])
    def test_lq_pmf_sums_to_one(self, p):
        t = build_tables(_cfg(m=2, pe=[0.0, 0.2]), SPECS[3])
        total = sum(np.exp(log_likelihood(t, r, p)) for r in _all_received(2, 2))
        assert total == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("spec", SPECS)
    @pytest.mark.parametrize("p", [0.0, 0.03, 0.2])
    def test_score_matches_finite_difference(self, spec, p):
        t = build_tables(_hetero_cfg(), spec)
        for r in _all_received(3, spec.q)[:: max(1, 2 ** (3 * spec.q) // 20)]:
            f = lambda x: log_likelihood(t, r, x)  # noqa: E731
            fd = _fd_forward(f) if p == 0 else _fd_central(f, p)
            s = score(t, r, p)
            assert abs(fd - s) <= 1e-5 * max(abs(s), 1e-3)

    @pytest.mark.parametrize("p", [0.0, 0.03, 0.2])
    def test_clairvoyant_score_matches_finite_difference(self, p):
        cfg = _hetero_cfg()
        for y in np.random.default_rng(1).normal(size=(20, 3)) * 1.5:
            f = lambda x: log_likelihood(cfg, y, x)  # noqa: E731
            fd = _fd_forward(f) if p == 0 else _fd_central(f, p)
            s = score(cfg, y, p)
            assert abs(fd - s) <= 1e-5 * max(abs(s), 1e-3)

    @pytest.mark.parametrize("spec", SPECS)
    def test_score_at_zero_is_scaled_statistic(self, spec):
        t = build_tables(_hetero_cfg(), spec)
        for r in _all_received(3, spec.q)[:30]:
            assert score(t, r, 0.0) == pytest.approx(np.sqrt(t.fi0) * lmpt_statistic(t, r), rel=1e-12, abs=1e-14)

    def test_clairvoyant_score_at_zero(self):
        cfg = _hetero_cfg()
        y = np.array([0.3, -1.2, 2.0])
        fi = fisher_information(CLAIRVOYANT, cfg)
        assert score(cfg, y, 0.0) == pytest.approx(np.sqrt(fi) * clairvoyant_statistic(cfg, y), rel=1e-13)


class TestInformationIdentities:
    @pytest.mark.parametrize("spec", SPECS)
    def test_enumeration_variance_equals_fi(self, spec):
        t = build_tables(_hetero_cfg(), spec)
        pmf = t.received_pmf(0.0)
        s = 0.5 * t.cfg.signal_var * t.scale[:, None] * t.weights
        mean = (pmf * s).sum(axis=1)
        var = (pmf * s * s).sum(axis=1) - mean**2
        np.testing.assert_allclose(mean, 0.0, atol=1e-10)
        assert var.sum() == pytest.approx(t.fi0, rel=1e-10)

    @pytest.mark.parametrize("spec", SPECS)
    def test_expected_curvature_is_minus_fi(self, spec):
        t = build_tables(_hetero_cfg(), spec)
        p0 = t.received_pmf(0.0)

        def cross_entropy(p):
            return float(np.sum(p0 * np.log(t.received_pmf(p))))

        def second_derivative(h):
            # one-sided five-point stencil, error O(h^3)
            f = [cross_entropy(k * h) for k in range(5)]
            return (35 * f[0] - 104 * f[1] + 114 * f[2] - 56 * f[3] + 11 * f[4]) / (12 * h * h)

        d2 = (8 * second_derivative(5e-4) - second_derivative(1e-3)) / 7
        assert d2 == pytest.approx(-t.fi0, rel=1e-6)

    def test_mc_score_variance(self):
        cfg = _cfg(m=1, pe=0.1)
        spec = SPECS[3]
        t = build_tables(cfg, spec)
        y = sample_measurements(cfg, H0, 100_000, np.random.default_rng(4))
        codes = transmit_codes(quantize(spec, y) - 1, 2, 0.1, np.random.default_rng(5))
        s = np.sqrt(t.fi0) * statistic_from_codes(t, codes)
        # three-sigma band for a sample variance: sd(var) = sqrt((mu4 - var^2) / n)
        pmf = t.received_pmf(0.0)[0]
        vals = 0.5 * cfg.signal_var * t.scale[0] * t.weights[0]
        mu4 = np.sum(pmf * vals**4)
        assert abs(s.var() - t.fi0) <= 3 * np.sqrt((mu4 - t.fi0**2) / s.size)


class TestFisherInformation:
    def test_clairvoyant_worked_value(self):
        cfg = _cfg(m=300, signal_var=8.0)
        fi = fisher_information(CLAIRVOYANT, cfg)
        assert fi == pytest.approx(9600.0, rel=1e-14)
        assert 0.03 * np.sqrt(fi) == pytest.approx(2.9394, abs=1e-4)

    def test_sign_quantizer_zero(self):
        with pytest.warns(DegenerateDetectorWarning):
            assert fisher_information(RQ, _cfg(), build_quantizer(RQ, 1, [0.0])) == 0.0

    @pytest.mark.parametrize("spec", SPECS)
    def test_matches_tables_at_zero(self, spec):
        cfg = _hetero_cfg()
        assert fisher_information(spec.kind, cfg, spec) == pytest.approx(build_tables(cfg, spec).fi0, rel=1e-13)

    def test_kind_mismatch(self):
        with pytest.raises(ValueError):
            fisher_information(RQ, _cfg(), SPECS[1])

    @settings(max_examples=200, deadline=None)
    @given(specs(), st.floats(0.0, 0.45), st.floats(0.0, 0.5), st.floats(0.1, 20), st.floats(0.2, 4))
    def test_data_processing_bound(self, spec, pe, p, s0, sw):
        cfg = _cfg(m=2, signal_var=s0, noise_var=sw, pe=pe, h_norm_sq=[1.0, 0.3])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateDetectorWarning)
            fq = fisher_information(spec.kind, cfg, spec, p=p)
        fc = fisher_information(CLAIRVOYANT, cfg, p=p)
        assert 0.0 <= fq <= fc * (1 + 1e-12)


class TestOperatingPoint:
    def test_worked_value(self):
        op = operating_point(9600.0, 0.03, 0.1)
        assert op.eta == pytest.approx(1.2816, abs=1e-4)
        assert op.lam == pytest.approx(2.9394, abs=1e-4)
        assert abs(op.pd - 0.9513) < 1e-3

    def test_null(self):
        op = operating_point(123.0, 0.0, 0.05)
        assert op.pd == pytest.approx(op.pfa, abs=1e-15)
        assert abs(op.pfa - numerics.gaussian_ccdf(op.eta)) < 1e-12

    def test_monotone_in_lambda(self):
        pds = [operating_point(fi, 0.03, 0.1).pd for fi in np.logspace(0, 6, 50)]
        assert np.all(np.diff(pds) >= 0)
        assert pds[-1] > 1 - 1e-12

    def test_degenerate(self):
        with pytest.raises(DegenerateDetectorError):
            operating_point(0.0, 0.03, 0.1)


class TestMismatch:
    def setup_method(self):
        self.cfg = _cfg(m=300, signal_var=8.0, pe=0.2)
        self.spec = design(LQ, 3, 0.2).spec

    @pytest.mark.parametrize("method", ["exact", "local"])
    @pytest.mark.parametrize("calibration", ["assumed", "true"])
    def test_matched_pfa(self, method, calibration):
        pred = mismatched_asymptotics(self.cfg, self.spec, 0.2, 0.2, 0.03, 0.1, method=method, calibration=calibration)
        assert abs(pred.pfa - 0.1) < 1e-10
        assert abs(pred.mean0) < 1e-10 and abs(pred.var0 - 1) < 1e-10

    def test_matched_local_pd_equals_operating_point(self):
        pred = mismatched_asymptotics(self.cfg, self.spec, 0.2, 0.2, 0.03, 0.1, method="local")
        op = operating_point(build_tables(self.cfg, self.spec).fi0, 0.03, 0.1)
        assert pred.pd == pytest.approx(op.pd, abs=1e-10)

    def test_matched_exact_pd_small_signal_limit(self):
        # the exact H1 pmf carries the curvature in p that the linear theory drops; they meet as p -> 0
        op_fi = build_tables(self.cfg, self.spec).fi0
        for p in (1e-3, 3e-4):
            pred = mismatched_asymptotics(self.cfg, self.spec, 0.2, 0.2, p, 0.1)
            assert abs(pred.pd - operating_point(op_fi, p, 0.1).pd) < 5 * p

    def test_pd_maximal_at_true_pe(self):
        pds = {
            pe: mismatched_asymptotics(self.cfg, self.spec, 0.2, pe, 0.03, 0.1, calibration="true").pd
            for pe in (0.0, 0.01, 0.1, 0.2)
        }
        assert max(pds, key=pds.get) == 0.2
        assert pds[0.2] >= pds[0.1] >= pds[0.01] >= pds[0.0]

    def test_assumed_calibration_inflates_false_alarms(self):
        pred = mismatched_asymptotics(self.cfg, self.spec, 0.2, 0.0, 0.03, 0.1, calibration="assumed")
        assert pred.pfa > 0.5

    def test_bad_options(self):
        with pytest.raises(ValueError):
            mismatched_asymptotics(self.cfg, self.spec, 0.2, 0.2, 0.03, 0.1, method="nope")
        with pytest.raises(ValueError):
            mismatched_asymptotics(self.cfg, self.spec, 0.2, 0.2, 0.03, 0.1, calibration="nope")
