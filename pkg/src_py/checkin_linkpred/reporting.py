"""Plot-ready CSV output: per-cell AUC results, per-predictor curves,
degree histograms and the residual check-in curve.
"""
from __future__ import annotations

import math
from collections.abc import Iterable
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from checkin_linkpred.evaluation import AucReport
from checkin_linkpred.graph import BipartiteGraph
from checkin_linkpred.graph import DegreeKind

RESULT_COLUMNS = (
    'method', 'mode', 'fraction_or_window', 'seed', 'n_pos', 'n_neg',
    'auc', 'n_comparisons', 'n_wins', 'n_ties', 'n_isolated',
    'comparison', 'error')
TIMING_COLUMNS = (
    'method', 'mode', 'fraction_or_window', 'seed', 'wall_time')
CURVE_COLUMNS = (
    'mode', 'fraction_or_window', 'n_seeds', 'auc_mean', 'auc_std')
HISTOGRAM_COLUMNS = ('side', 'kind', 'lower', 'upper', 'count')
RESIDUAL_COLUMNS = ('fraction', 'remaining_checkins')
_CURVE_KEYS = ['method', 'mode', 'fraction_or_window']


def report_to_row(
        report: AucReport,
        *,
        include_wall_time: bool = False
        ) -> dict[str, Any]:
    row: dict[str, Any] = {
        'method': report.method.name,
        'mode': report.sample_meta['mode'],
        'fraction_or_window': report.sample_meta['fraction_or_window'],
        'seed': report.sample_meta['seed'],
        'n_pos': report.n_pos,
        'n_neg': report.n_neg,
        'auc': '' if report.auc is None else repr(report.auc),
        'n_comparisons': report.n_comparisons,
        'n_wins': report.n_wins,
        'n_ties': report.n_ties,
        'n_isolated': report.n_isolated,
        'comparison': str(report.comparison),
        'error': report.error or '',
    }
    if include_wall_time:
        row['wall_time'] = f'{report.wall_time:.6f}'
    return row


def _write_rows(
        path: str | Path,
        columns: Sequence[str],
        rows: Iterable[dict[str, Any]]
        ) -> None:
    # Keys outside ``columns`` are dropped
    frame = pd.DataFrame(list(rows), columns=list(columns))
    frame.to_csv(path, index=False, encoding='utf-8', lineterminator='\n')


def write_results_csv(path: str | Path, reports: Iterable[AucReport]) -> None:
    """One row per grid cell. Only deterministic columns are written,
    so that reruns with the same config produce identical files.
    """
    _write_rows(
        path, RESULT_COLUMNS, (report_to_row(report) for report in reports))


def write_timings_csv(path: str | Path, reports: Iterable[AucReport]) -> None:
    _write_rows(
        path,
        TIMING_COLUMNS,
        (report_to_row(report, include_wall_time=True)
         for report in reports))


def read_results_csv(path: str | Path) -> list[dict[str, str]]:
    """Rows exactly as written: every value a string, empty cells as
    ``''``.
    """
    frame = pd.read_csv(
        path, dtype=str, keep_default_na=False, encoding='utf-8')
    return frame.to_dict(orient='records')


@dataclass(slots=True, frozen=True)
class CurvePoint:
    mode: str
    fraction_or_window: str
    n_seeds: int
    auc_mean: float
    auc_std: float

    def to_row(self) -> dict[str, Any]:
        return {
            'mode': self.mode,
            'fraction_or_window': self.fraction_or_window,
            'n_seeds': self.n_seeds,
            'auc_mean': repr(self.auc_mean),
            'auc_std': repr(self.auc_std),
        }


def auc_curves(reports: Iterable[AucReport]) -> dict[str, list[CurvePoint]]:
    """Per predictor name, the mean and (population) standard deviation
    of the AUC over seeds at every fraction or window. Failed cells are
    left out. Points keep the order in which they first appear.
    """
    frame = pd.DataFrame(
        [{'method': report.method.name,
          'mode': report.sample_meta['mode'],
          'fraction_or_window': report.sample_meta['fraction_or_window'],
          'auc': report.auc}
         for report in reports if report.auc is not None],
        columns=[*_CURVE_KEYS, 'auc'])
    if frame.empty:
        return {}

    summary = frame.groupby(_CURVE_KEYS, sort=False)['auc'].agg(
        n_seeds='count',
        auc_mean='mean',
        auc_std=lambda aucs: aucs.std(ddof=0))

    curves: dict[str, list[CurvePoint]] = {}
    for row in summary.reset_index().itertuples(index=False):
        curves.setdefault(row.method, []).append(CurvePoint(
            mode=row.mode,
            fraction_or_window=row.fraction_or_window,
            n_seeds=int(row.n_seeds),
            auc_mean=float(row.auc_mean),
            auc_std=float(row.auc_std)))
    return curves


def curve_filename(name: str) -> str:
    safe = ''.join(
        char if char.isalnum() or char in '-_.' else '_' for char in name)
    return f'curve-{safe}.csv'


def write_curve_csv(path: str | Path, points: Iterable[CurvePoint]) -> None:
    _write_rows(path, CURVE_COLUMNS, (point.to_row() for point in points))


@dataclass(slots=True, frozen=True)
class HistogramBin:
    """Counts nodes with ``lower <= degree < upper``."""
    lower: int
    upper: int
    count: int


def log_binned_histogram(
        degrees: Sequence[int] | np.ndarray
        ) -> list[HistogramBin]:
    """A zero bin ``[0, 1)`` followed by power-of-two bins ``[1, 2)``,
    ``[2, 4)``, ``[4, 8)``... up to the one holding the largest
    degree. The counts always sum to the number of nodes.
    """
    values = np.asarray(degrees, dtype=np.int64)
    if not values.size:
        return []

    max_degree = int(values.max())
    n_power_bins = (
        0 if max_degree < 1 else math.floor(math.log2(max_degree)) + 1)
    edges = [0, *(2 ** power for power in range(n_power_bins + 1))]
    counts, _ = np.histogram(values, bins=edges)
    # Only the last bin is closed, and its upper edge exceeds max_degree
    return [
        HistogramBin(lower=lower, upper=upper, count=int(count))
        for lower, upper, count in zip(edges, edges[1:], counts, strict=True)]


def degree_histograms(
        g: BipartiteGraph
        ) -> dict[tuple[str, str], list[HistogramBin]]:
    """Histograms for both sides of the graph and both degree kinds,
    keyed by ``(side, kind)``.
    """
    return {
        (side, str(kind)): log_binned_histogram(view.degrees(kind))
        for side, view in (
            ('users', g.user_degrees), ('venues', g.venue_degrees))
        for kind in DegreeKind}


def write_histograms_csv(
        path: str | Path,
        histograms: dict[tuple[str, str], list[HistogramBin]]) -> None:
    _write_rows(
        path,
        HISTOGRAM_COLUMNS,
        ({'side': side,
          'kind': kind,
          'lower': histogram_bin.lower,
          'upper': histogram_bin.upper,
          'count': histogram_bin.count}
         for (side, kind), bins in histograms.items()
         for histogram_bin in bins))


def write_residual_curve_csv(
        path: str | Path,
        curve: Iterable[tuple[float, int]]) -> None:
    _write_rows(
        path,
        RESIDUAL_COLUMNS,
        ({'fraction': repr(fraction), 'remaining_checkins': remaining}
         for fraction, remaining in curve))
