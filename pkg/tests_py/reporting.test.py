from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from checkin_linkpred.evaluation import AucReport
from checkin_linkpred.evaluation import ComparisonMode
from checkin_linkpred.predictors import PredictorConfig
from checkin_linkpred.reporting import RESULT_COLUMNS
from checkin_linkpred.reporting import HistogramBin
from checkin_linkpred.reporting import auc_curves
from checkin_linkpred.reporting import curve_filename
from checkin_linkpred.reporting import degree_histograms
from checkin_linkpred.reporting import log_binned_histogram
from checkin_linkpred.reporting import read_results_csv
from checkin_linkpred.reporting import report_to_row
from checkin_linkpred.reporting import write_curve_csv
from checkin_linkpred.reporting import write_histograms_csv
from checkin_linkpred.reporting import write_residual_curve_csv
from checkin_linkpred.reporting import write_results_csv
from checkin_linkpred.reporting import write_timings_csv

from checkin_linkpred_testutils.factories import random_graph
from checkin_linkpred_testutils.factories import toy_graph


def _report(
        method: str,
        fraction: float,
        seed: int,
        auc: float | None
        ) -> AucReport:
    return AucReport(
        auc=auc,
        n_pos=10,
        n_neg=10,
        n_comparisons=100 if auc is not None else 0,
        n_wins=0,
        n_ties=0,
        method=PredictorConfig(method=method),
        sample_meta={
            'mode': 'random-batch',
            'fraction_or_window': repr(fraction),
            'seed': seed,
            'negative_ratio': 1.0,
        },
        wall_time=0.25,
        comparison=ComparisonMode.exact(),
        error=None if auc is not None else 'ScorerError: boom')


class TestResultsCsv:

    def test_row(self):
        row = report_to_row(_report('nbi', 0.1, 3, 0.75))

        assert row['method'] == 'nbi'
        assert row['mode'] == 'random-batch'
        assert row['fraction_or_window'] == '0.1'
        assert row['auc'] == '0.75'
        assert row['comparison'] == 'exact'
        assert 'wall_time' not in row

    def test_failed_row(self):
        row = report_to_row(_report('nbi', 0.1, 3, None))

        assert row['auc'] == ''
        assert row['error'] == 'ScorerError: boom'

    def test_round_trip(self, tmp_path: Path):
        reports = [
            _report('nbi', 0.1, 3, 0.75),
            _report('cf', 0.1, 3, None)]

        write_results_csv(tmp_path / 'results.csv', reports)
        rows = read_results_csv(tmp_path / 'results.csv')

        assert [tuple(row) for row in rows] == [RESULT_COLUMNS] * 2
        assert [row['method'] for row in rows] == ['nbi', 'cf']
        assert rows[0]['auc'] == '0.75'
        assert rows[1]['error'] == 'ScorerError: boom'

    def test_empty(self, tmp_path: Path):
        """Without reports, only the header must be written."""
        write_results_csv(tmp_path / 'results.csv', [])

        assert (tmp_path / 'results.csv').read_text() == (
            ','.join(RESULT_COLUMNS) + '\n')
        assert read_results_csv(tmp_path / 'results.csv') == []

    def test_exact_bytes(self, tmp_path: Path):
        write_results_csv(
            tmp_path / 'results.csv', [_report('nbi', 0.1, 3, 0.75)])

        assert (tmp_path / 'results.csv').read_bytes().splitlines()[1] == (
            b'nbi,random-batch,0.1,3,10,10,0.75,100,0,0,0,exact,')

    def test_results_have_no_timings(self, tmp_path: Path):
        """Wall time must only go into the timings file."""
        reports = [_report('nbi', 0.1, 3, 0.75)]

        write_results_csv(tmp_path / 'results.csv', reports)
        write_timings_csv(tmp_path / 'timings.csv', reports)

        assert 'wall_time' not in (tmp_path / 'results.csv').read_text()
        timings = read_results_csv(tmp_path / 'timings.csv')
        assert timings[0]['wall_time'] == '0.250000'


class TestAucCurves:

    def test_mean_and_std(self):
        """Points must average over seeds per fraction and leave out
        failed cells.
        """
        reports = [
            _report('nbi', 0.1, 1, 0.8),
            _report('nbi', 0.1, 2, 0.6),
            _report('nbi', 0.2, 1, 0.7),
            _report('nbi', 0.2, 2, None),
            _report('cf', 0.1, 1, 0.5)]

        curves = auc_curves(reports)

        assert list(curves) == ['nbi', 'cf']
        first, second = curves['nbi']
        assert first.fraction_or_window == '0.1'
        assert first.n_seeds == 2
        assert first.auc_mean == pytest.approx(0.7)
        assert first.auc_std == pytest.approx(0.1)
        assert second.n_seeds == 1
        assert second.auc_std == 0

    def test_nothing_succeeded(self):
        assert auc_curves([]) == {}
        assert auc_curves([_report('nbi', 0.1, 1, None)]) == {}

    def test_three_seeds(self):
        """The spread must be the population standard deviation."""
        reports = [
            _report('cf', 0.2, seed, auc)
            for seed, auc in enumerate((0.6, 0.7, 0.8))]

        (point,) = auc_curves(reports)['cf']

        assert point.n_seeds == 3
        assert point.auc_mean == pytest.approx(0.7)
        assert point.auc_std == pytest.approx(np.sqrt(2 / 300))

    def test_filename(self):
        assert curve_filename('nbi_multistep-2') == (
            'curve-nbi_multistep-2.csv')
        assert curve_filename('my method/2') == 'curve-my_method_2.csv'

    def test_write(self, tmp_path: Path):
        curves = auc_curves([_report('nbi', 0.1, 1, 0.8)])

        write_curve_csv(tmp_path / 'curve.csv', curves['nbi'])

        assert (tmp_path / 'curve.csv').read_text().splitlines() == [
            'mode,fraction_or_window,n_seeds,auc_mean,auc_std',
            'random-batch,0.1,1,0.8,0.0']


class TestHistograms:

    def test_bins(self):
        """Degrees must fall into [0, 1), [1, 2), [2, 4), [4, 8)..."""
        histogram = log_binned_histogram([0, 1, 1, 2, 3, 4, 7, 8])

        assert histogram == [
            HistogramBin(0, 1, 1),
            HistogramBin(1, 2, 2),
            HistogramBin(2, 4, 2),
            HistogramBin(4, 8, 2),
            HistogramBin(8, 16, 1)]

    def test_empty(self):
        assert log_binned_histogram([]) == []

    def test_all_zero(self):
        assert log_binned_histogram([0, 0]) == [HistogramBin(0, 1, 2)]

    def test_counts_sum_to_nodes(self):
        rng = np.random.default_rng(229)
        for _ in range(20):
            degrees = rng.integers(0, 500, size=int(rng.integers(1, 50)))
            histogram = log_binned_histogram(degrees)
            assert sum(histogram_bin.count for histogram_bin in histogram) == (
                degrees.size)

    def test_degree_histograms(self, tmp_path: Path):
        """Both sides and both degree kinds must be present, each
        counting every node once.
        """
        graph = random_graph(np.random.default_rng(233), n_venues=6)

        histograms = degree_histograms(graph)

        assert set(histograms) == {
            ('users', 'binary'), ('users', 'weighted'),
            ('venues', 'binary'), ('venues', 'weighted')}
        for (side, _), bins in histograms.items():
            expected = graph.n_users if side == 'users' else graph.n_venues
            assert sum(histogram_bin.count for histogram_bin in bins) == (
                expected)

        write_histograms_csv(tmp_path / 'histograms.csv', histograms)
        lines = (tmp_path / 'histograms.csv').read_text().splitlines()
        assert lines[0] == 'side,kind,lower,upper,count'
        assert len(lines) == 1 + sum(len(bins) for bins in histograms.values())

    def test_toy(self):
        histograms = degree_histograms(toy_graph())

        assert histograms[('venues', 'binary')] == [
            HistogramBin(0, 1, 0),
            HistogramBin(1, 2, 1),
            HistogramBin(2, 4, 3)]


class TestResidualCurve:

    def test_write(self, tmp_path: Path):
        write_residual_curve_csv(
            tmp_path / 'residual.csv', [(0.05, 120), (0.1, 90)])

        assert (tmp_path / 'residual.csv').read_text().splitlines() == [
            'fraction,remaining_checkins',
            '0.05,120',
            '0.1,90']
