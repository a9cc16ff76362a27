from __future__ import annotations

import math

import numpy as np
import pytest

from pydiverse.ladderwalk.corrector import build_potentials
from pydiverse.ladderwalk.errors import (
    InsufficientDataError,
    ParameterError,
    PreconditionError,
)
from pydiverse.ladderwalk.estimators import (
    EstimateCI,
    LambdaRow,
    effective_sample_size,
    einstein_report,
    gaussianity_test,
    second_order_concentration,
    sigma_path_variance,
    sigma_psi_moments,
    speed_direct,
    speed_girsanov,
    variance_scaling,
)
from pydiverse.ladderwalk.percolation import WindowConfig
from pydiverse.ladderwalk.util.rng import make_stream
from pydiverse.ladderwalk.walk import ReplicaSummary, partition_function, simulate
from tests.util.vectors import loop_window, window


def _replica(displacement, n_steps=100, bias=0.0, tilt=0.0, log_weight=0.0, A=0.0):
    return ReplicaSummary(
        n_steps=n_steps,
        bias=bias,
        tilt=tilt,
        displacement=int(displacement),
        M=0.0,
        A=A,
        log_weight=log_weight,
        remainder=0.0,
        max_sq_displacement=float(displacement) ** 2,
    )


def _estimate(value, se=0.01, method="direct"):
    return EstimateCI(value, se, 100, method)


class TestEstimateCI:
    def test_validation(self):
        with pytest.raises(ValueError):
            EstimateCI(1.0, -0.1, 10, "direct")
        with pytest.raises(ValueError):
            EstimateCI(1.0, 0.1, 0, "direct")
        with pytest.raises(ValueError):
            EstimateCI(1.0, 0.1, 10, "guess")

    def test_interval(self):
        est = EstimateCI(2.0, 0.5, 10, "direct")
        lo, hi = est.ci
        assert lo == pytest.approx(2.0 - 1.959964 * 0.5, rel=1e-6)
        assert hi - 2.0 == pytest.approx(2.0 - lo)
        assert est.contains(2.5)
        assert not est.contains(3.5)
        assert est.overlaps(EstimateCI(3.5, 0.5, 10, "regen"))
        assert not est.overlaps(EstimateCI(6.0, 0.5, 10, "regen"))

    def test_scaled(self):
        est = EstimateCI(2.0, 0.5, 10, "direct").scaled(-2.0, method="ratio")
        assert (est.value, est.se, est.method) == (-4.0, 1.0, "ratio")

    def test_to_dict(self):
        d = EstimateCI(2.0, 0.5, 10, "direct", warnings=["w"]).to_dict()
        assert set(d) == {
            "value", "se", "ci_low", "ci_high", "n_eff", "method",
            "confidence", "diagnostics", "warnings",
        }
        assert d["warnings"] == ["w"]


class TestSpeed:
    def test_direct(self):
        replicas = [_replica(d) for d in [10, 30] * 20]
        est = speed_direct(replicas)
        assert est.value == pytest.approx(0.2)
        assert est.n_eff == 40
        assert est.diagnostics["n_steps"] == 100
        with pytest.raises(InsufficientDataError):
            speed_direct(replicas[:10])

    def test_effective_sample_size(self):
        assert effective_sample_size(np.zeros(50)) == pytest.approx(50)
        assert effective_sample_size([100.0] + [0.0] * 50) == pytest.approx(1.0)

    def test_girsanov_unit_weights(self):
        replicas = [_replica(d, tilt=0.1) for d in [5, 15] * 10]
        est = speed_girsanov(replicas)
        assert est.value == pytest.approx(10 / (0.1 * 100))
        assert est.diagnostics["alpha"] == pytest.approx(1.0)
        assert est.diagnostics["ess"] == pytest.approx(20)
        assert est.diagnostics["self_normalized"] == pytest.approx(est.value)
        assert not est.warnings

    def test_girsanov_weight_degeneracy(self):
        replicas = [_replica(1, tilt=0.1, log_weight=30.0)] + [
            _replica(1, tilt=0.1) for _ in range(30)
        ]
        est = speed_girsanov(replicas)
        assert est.diagnostics["ess"] < 10
        assert any("degeneracy" in w for w in est.warnings)

    def test_girsanov_preconditions(self):
        long = [_replica(0, n_steps=1000, tilt=0.1) for _ in range(5)]
        with pytest.raises(PreconditionError):
            speed_girsanov(long)
        assert speed_girsanov(long, check_alpha_window=False).value == 0.0
        with pytest.raises(PreconditionError):
            speed_girsanov([_replica(0, bias=0.1, tilt=0.1)] * 3)
        with pytest.raises(PreconditionError):
            speed_girsanov([_replica(0, tilt=0.1), _replica(0, tilt=0.2)])
        with pytest.raises(ParameterError):
            speed_girsanov([_replica(0)] * 3)
        with pytest.raises(InsufficientDataError):
            speed_girsanov([_replica(0, tilt=0.1)])


class TestSigma:
    def test_path_variance(self):
        replicas = [_replica(d) for d in [10, -10] * 50]
        est = sigma_path_variance(replicas)
        assert est.value == pytest.approx(100 / 99)
        assert est.se == pytest.approx(0.0)
        assert est.diagnostics["mean_displacement"] == 0.0
        assert est.diagnostics["max_sq_over_n"] == pytest.approx(1.0)
        with pytest.raises(InsufficientDataError):
            sigma_path_variance(replicas[:20])

    def test_gaussianity(self):
        rng = make_stream(0, "gauss")
        normal = [_replica(round(x), n_steps=10_000) for x in rng.normal(0, 100, 2000)]
        assert gaussianity_test(normal, sigma2=1.0).passes
        two_point = [_replica(d, n_steps=10_000) for d in [100, -100] * 500]
        result = gaussianity_test(two_point)
        assert not result.passes
        assert result.level == 1e-3

    def test_variance_scaling(self):
        scaling = variance_scaling(
            {
                400: [_replica(d, n_steps=400) for d in [20, -20] * 50],
                100: [_replica(d, n_steps=100) for d in [10, -10] * 50],
            }
        )
        assert list(scaling.estimates) == [100, 400]
        assert scaling.consistent

    def test_psi_moments_on_a_line(self):
        table = build_potentials(WindowConfig.bottom_line(-6, 6), 1.0, kappa_se=0.1)
        matrix = sigma_psi_moments([table, table])
        assert matrix.s11 == pytest.approx(2 / 3)
        assert matrix.s12 == pytest.approx(2 / 3)
        assert matrix.s22 == pytest.approx(2 / 3)
        assert matrix.se11 == pytest.approx(2 * (2 / 3) * 0.1)
        assert matrix.se12 == pytest.approx((2 / 3) * 0.1)
        assert matrix.se22 == 0.0
        assert matrix.n_environments == 2
        assert matrix.cauchy_schwarz_ok()
        assert matrix.estimate("s11").method == "psi-moment"

    def test_psi_moments_scale_with_kappa(self):
        table = build_potentials(loop_window(), 0.8)
        matrix = sigma_psi_moments([table, table])
        assert matrix.s11 == pytest.approx(2 * 0.64 / 3)
        assert matrix.s12 == pytest.approx(2 * 0.8 / 3)

    def test_psi_moments_skip_environments(self):
        # the origin is the leftmost pre-regeneration point
        edge = build_potentials(
            window(-3, 6, vertical=[-2], bottom=range(-3, 6), top=[-2]), 1.0
        )
        line = build_potentials(WindowConfig.bottom_line(-6, 6), 1.0)
        matrix = sigma_psi_moments([line, edge, line])
        assert matrix.skipped == 1
        assert matrix.n_environments == 2
        with pytest.raises(InsufficientDataError):
            sigma_psi_moments([edge, line])
        with pytest.raises(InsufficientDataError):
            sigma_psi_moments([])

    def test_second_order(self):
        replicas = [_replica(0, tilt=0.1, A=a) for a in [90.0, 110.0] * 10]
        est = second_order_concentration(replicas, s22=2.0)
        assert est.value == pytest.approx(1.0)
        assert est.diagnostics["target"] == pytest.approx(1.0)
        assert est.diagnostics["relative_error"] == pytest.approx(0.0, abs=1e-12)
        assert est.method == "second-order"


class TestEinstein:
    @staticmethod
    def _rows(ratios, se=0.01, n_steps=1000):
        return [
            LambdaRow(lam, n_steps, _estimate(lam * r, se * lam))
            for lam, r in ratios.items()
        ]

    def test_positive_verdict(self):
        rows = self._rows({0.1: 1.0, 0.4: 1.0, 0.2: 1.0})
        report = einstein_report(rows, _estimate(1.0, 0.05, "path-variance"))
        assert [r.lam for r in report.rows] == [0.4, 0.2, 0.1]
        assert report.verdict.trend == "flat"
        assert report.verdict.positive
        assert report.verdict.overlap_s11 is None

        d = report.to_dict()
        assert d["schema_version"] == 1
        assert [r["lam"] for r in d["per_lambda"]] == [0.4, 0.2, 0.1]
        assert d["verdict"]["positive"]
        df = report.to_frame()
        assert set(df.estimator) == {"direct", "ratio", "sigma_path_variance"}
        assert df[df.estimator == "ratio"].value.tolist() == pytest.approx([1.0] * 3)

    def test_trends(self):
        sigma = _estimate(1.0, 0.05, "path-variance")
        decreasing = einstein_report(
            self._rows({0.4: 0.5, 0.2: 0.8, 0.1: 0.95}), sigma
        )
        assert decreasing.verdict.trend == "decreasing_in_lambda"
        assert decreasing.verdict.monotone

        increasing = einstein_report(self._rows({0.4: 1.5, 0.2: 1.2, 0.1: 1.0}), sigma)
        assert increasing.verdict.trend == "increasing_in_lambda"

        mixed = einstein_report(self._rows({0.4: 0.5, 0.2: 1.0, 0.1: 0.5}), sigma)
        assert mixed.verdict.trend == "mixed"
        assert not mixed.verdict.monotone
        assert not mixed.verdict.positive

    def test_only_decreasing_or_flat_ratios_are_positive(self):
        sigma = _estimate(1.0, 0.05, "path-variance")
        increasing = einstein_report(
            self._rows({0.4: 1.5, 0.2: 1.2, 0.1: 1.0}), sigma
        ).verdict
        assert increasing.trend == "increasing_in_lambda"
        assert increasing.monotone
        assert increasing.bounded
        assert increasing.overlap
        assert increasing.positive is False
        assert increasing.to_dict()["positive"] is False

        decreasing = einstein_report(
            self._rows({0.4: 0.5, 0.2: 0.8, 0.1: 0.95}), sigma
        ).verdict
        assert decreasing.trend == "decreasing_in_lambda"
        assert decreasing.positive is True

    def test_frame_records_step_counts(self):
        row = LambdaRow(
            0.1,
            5000,
            _estimate(0.05, 0.005),
            regen=_estimate(0.052, 0.004, "regen"),
            girsanov=_estimate(0.5, 0.03, "girsanov"),
            girsanov_steps=100,
        )
        assert row.alpha == pytest.approx(1.0)
        report = einstein_report([row], _estimate(0.5, 0.05, "path-variance"))
        df = report.to_frame().set_index("estimator")
        assert list(df.columns) == ["lam", "n_steps", "value", "se"]
        assert df.loc["direct", "n_steps"] == 5000
        assert df.loc["regen", "n_steps"] == 5000
        assert df.loc["ratio", "n_steps"] == 5000
        assert df.loc["girsanov", "n_steps"] == 100
        assert math.isnan(df.loc["sigma_path_variance", "n_steps"])
        assert report.to_dict()["per_lambda"][0]["girsanov_steps"] == 100

    def test_unbounded_and_disjoint(self):
        sigma = _estimate(1.0, 0.01, "path-variance")
        report = einstein_report(self._rows({0.2: 20.0, 0.1: 20.0}), sigma)
        assert not report.verdict.bounded
        assert not report.verdict.overlap
        assert not report.verdict.positive

    def test_with_sigma_matrix_and_sweep(self):
        table = build_potentials(WindowConfig.bottom_line(-6, 6), 1.0, kappa_se=0.5)
        matrix = sigma_psi_moments([table, table])
        sweep = [
            LambdaRow(0.1, n, _estimate(0.1, 0.01)) for n in (400, 100, 200)
        ]
        report = einstein_report(
            self._rows({0.1: 2 / 3}),
            _estimate(2 / 3, 0.05, "path-variance"),
            matrix,
            alpha_sweep=sweep,
            second_order=EstimateCI(0.33, 0.01, 20, "second-order"),
            config={"p": 0.7},
        )
        assert report.verdict.overlap_s11
        assert [s["alpha"] for s in report.alpha_sweep] == pytest.approx([1, 2, 4])
        assert report.alpha_sweep[0]["girsanov"] is None
        d = report.to_dict()
        assert d["sigma"]["psi_moments"]["n_environments"] == 2
        assert d["second_order"]["method"] == "second-order"
        assert d["config"] == {"p": 0.7}
        assert "sigma_s22" in set(report.to_frame().estimator)

    def test_lambda_row(self):
        with pytest.raises(ParameterError):
            LambdaRow(0.0, 100, _estimate(0.0))
        row = LambdaRow(
            0.1,
            100,
            _estimate(0.05, 0.005),
            regen=_estimate(0.052, 0.004, "regen"),
            girsanov=_estimate(0.5, 0.03, "girsanov"),
        )
        assert row.alpha == pytest.approx(1.0)
        assert row.ratio.value == pytest.approx(0.5)
        assert row.cross_consistent()
        assert not LambdaRow(
            0.1, 100, _estimate(0.05, 0.001), girsanov=_estimate(0.9, 0.001, "girsanov")
        ).cross_consistent()
        with pytest.raises(ParameterError):
            einstein_report([], _estimate(1.0))


class TestOnAStraightLine:
    """On the bottom row the walk is a lazy biased walk on Z with known moments."""

    ENV = WindowConfig.bottom_line(-400, 400)

    def _summaries(self, lam, n_steps, n, tilt=None, label="line"):
        return [
            simulate(
                self.ENV, lam, (0, 0), n_steps, (0, (label, i)), tilt=tilt
            ).summary()
            for i in range(n)
        ]

    def test_direct_speed(self):
        lam = 0.5
        est = speed_direct(self._summaries(lam, 400, 200))
        speed = (math.exp(lam) - math.exp(-lam)) / partition_function(lam)
        assert abs(est.value - speed) <= 5 * est.se

    def test_girsanov_speed(self):
        lam = 0.1
        est = speed_girsanov(self._summaries(0.0, 100, 1000, tilt=lam))
        expected = (math.exp(lam) - math.exp(-lam)) / partition_function(lam) / lam
        assert abs(est.value - expected) <= 5 * est.se

    def test_path_variance(self):
        est = sigma_path_variance(self._summaries(0.0, 200, 1000))
        assert abs(est.value - 2 / 3) <= 5 * est.se
