from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from checkin_linkpred.cli import EXIT_FAILURE
from checkin_linkpred.cli import EXIT_INVALID_CONFIG
from checkin_linkpred.cli import EXIT_OK
from checkin_linkpred.cli import main
from checkin_linkpred.graph import read_edge_list
from checkin_linkpred.reporting import RESULT_COLUMNS
from checkin_linkpred.reporting import read_results_csv
from checkin_linkpred.sampling import read_sample

from checkin_linkpred_testutils.factories import random_checkins
from checkin_linkpred_testutils.fixtures import write_checkin_file
from checkin_linkpred_testutils.fixtures import write_lines

_UNFILTERED = '''
[filter]
enabled = false
'''


@pytest.fixture
def dataset(tmp_path: Path) -> Path:
    """250 check-ins by 20 users over 25 venues, sparse enough that
    every default fraction still finds its negatives.
    """
    checkins = random_checkins(
        np.random.default_rng(307), 250, n_users=20, n_venues=25)
    return write_checkin_file(tmp_path / 'checkins.tsv', checkins)


@pytest.fixture
def unfiltered(tmp_path: Path) -> Path:
    return write_lines(tmp_path / 'run.toml', [_UNFILTERED])


def _run(capsys, *argv: str) -> tuple[int, dict | None]:
    exit_code = main([str(arg) for arg in argv])
    out = capsys.readouterr().out
    return exit_code, (json.loads(out) if out.strip() else None)


class TestBench:

    def test_default_grid(self, capsys, tmp_path, dataset, unfiltered):
        """One seed over the default fractions and methods must give
        24 result rows, plus timings, curves and a manifest.
        """
        out_dir = tmp_path / 'out'

        exit_code, manifest = _run(
            capsys, 'bench', '--config', unfiltered, '--dataset', dataset,
            '--out', out_dir, '--seed', '5')

        assert exit_code == EXIT_OK
        assert manifest is not None
        assert manifest['n_cells'] == 24
        assert manifest['n_failed'] == 0
        assert manifest['seeds'] == [5]
        assert manifest['predictors'] == ['grm', 'assort', 'cf', 'nbi']

        rows = read_results_csv(out_dir / 'results.csv')
        assert len(rows) == 24
        assert tuple(rows[0]) == RESULT_COLUMNS
        assert {row['method'] for row in rows} == {
            'grm', 'assort', 'cf', 'nbi'}
        assert all(row['error'] == '' for row in rows)
        assert all(0 <= float(row['auc']) <= 1 for row in rows)
        assert len(read_results_csv(out_dir / 'timings.csv')) == 24
        for name in ('grm', 'assort', 'cf', 'nbi'):
            assert (out_dir / f'curve-{name}.csv').exists()

        on_disk = json.loads((out_dir / 'manifest.json').read_text())
        assert on_disk == manifest

    def test_reruns_identical(self, capsys, tmp_path, dataset, unfiltered):
        """Rerunning with the same seed must reproduce results.csv byte
        for byte, both from a cold start and from the cache.
        """
        first_dir = tmp_path / 'first'
        second_dir = tmp_path / 'second'
        argv = (
            'bench', '--config', unfiltered, '--dataset', dataset,
            '--seed', '11', '--fraction', '0.1', '--fraction', '0.2')

        _run(capsys, *argv, '--out', first_dir)
        first = (first_dir / 'results.csv').read_bytes()
        _run(capsys, *argv, '--out', first_dir)
        cached = (first_dir / 'results.csv').read_bytes()
        _run(capsys, *argv, '--out', second_dir, '--workers', '3')
        cold = (second_dir / 'results.csv').read_bytes()

        assert first == cached == cold
        assert any((first_dir / 'cache').iterdir())

    def test_generated_seed_recorded(
            self, capsys, tmp_path, dataset, unfiltered):
        """Without a seed, one must be generated and echoed into the
        manifest so the run can be repeated.
        """
        exit_code, manifest = _run(
            capsys, 'bench', '--config', unfiltered, '--dataset', dataset,
            '--out', tmp_path / 'out', '--fraction', '0.1',
            '--method', 'nbi')

        assert exit_code == EXIT_OK
        assert manifest is not None
        (seed,) = manifest['seeds']
        assert manifest['config']['sampling']['seeds'] == [seed]

    def test_failed_cell_recorded(
            self, capsys, tmp_path, dataset, unfiltered):
        """The time-aware predictor on a random-batch sample must fail
        its cell without failing the run.
        """
        out_dir = tmp_path / 'out'

        exit_code, manifest = _run(
            capsys, 'bench', '--config', unfiltered, '--dataset', dataset,
            '--out', out_dir, '--seed', '1', '--fraction', '0.1',
            '--method', 'nbi_time', '--method', 'nbi')

        assert exit_code == EXIT_OK
        assert manifest is not None
        assert manifest['n_failed'] == 1
        failed, succeeded = read_results_csv(out_dir / 'results.csv')
        assert failed['auc'] == ''
        assert failed['error'].startswith('ScorerError')
        assert succeeded['error'] == ''

    def test_time_window(self, capsys, tmp_path, dataset, unfiltered):
        out_dir = tmp_path / 'out'

        exit_code, manifest = _run(
            capsys, 'bench', '--config', unfiltered, '--dataset', dataset,
            '--out', out_dir, '--seed', '2',
            '--window', '1000000000:2000000000', '--method', 'nbi_time')

        assert exit_code == EXIT_OK
        assert manifest is not None
        (row,) = read_results_csv(out_dir / 'results.csv')
        assert row['mode'] == 'time-incremental'
        assert row['fraction_or_window'] == '1000000000:2000000000'
        assert row['error'] == ''


class TestOtherCommands:

    def test_stats(self, capsys, tmp_path, dataset):
        out_dir = tmp_path / 'out'

        exit_code, summary = _run(
            capsys, 'stats', '--dataset', dataset, '--out', out_dir)

        assert exit_code == EXIT_OK
        assert summary is not None
        assert summary['dataset']['n_checkins'] == 250
        assert summary['raw']['n_checkins'] == 250
        assert (
            summary['filtered']['n_checkins']
            <= summary['raw']['n_checkins'])
        for path in summary['histograms']:
            lines = Path(path).read_text().splitlines()
            assert lines[0] == 'side,kind,lower,upper,count'

    def test_filter(self, capsys, tmp_path, dataset, unfiltered):
        """The written edge list must read back as the graph the
        summary describes.
        """
        exit_code, summary = _run(
            capsys, 'filter', '--config', unfiltered, '--dataset', dataset,
            '--out', tmp_path / 'out')

        assert exit_code == EXIT_OK
        assert summary is not None
        graph = read_edge_list(summary['graph'])
        assert graph.checksum() == summary['checksum']
        assert graph.n_checkins == 250
        assert summary['filter'] is None

    def test_sample(self, capsys, tmp_path, dataset, unfiltered):
        exit_code, summary = _run(
            capsys, 'sample', '--config', unfiltered, '--dataset', dataset,
            '--out', tmp_path / 'out', '--seed', '3', '--seed', '4',
            '--fraction', '0.1')

        assert exit_code == EXIT_OK
        assert summary is not None
        assert summary['seeds'] == [3, 4]
        assert len(summary['samples']) == 2
        for written in summary['samples']:
            sample = read_sample(written['path'])
            assert len(sample.positives) == written['n_pos']
            assert len(sample.negatives) == written['n_neg']

    def test_residual_curve(self, capsys, tmp_path, dataset, unfiltered):
        exit_code, summary = _run(
            capsys, 'residual-curve', '--config', unfiltered,
            '--dataset', dataset, '--out', tmp_path / 'out', '--seed', '8')

        assert exit_code == EXIT_OK
        assert summary is not None
        assert summary['total_checkins'] == 250
        assert len(summary['curve']) == 6
        for point in summary['curve']:
            assert 0 < point['remaining_checkins'] < 250
        lines = Path(summary['path']).read_text().splitlines()
        assert lines[0] == 'fraction,remaining_checkins'
        assert len(lines) == 7


class TestExitCodes:

    def test_missing_dataset_option(self, capsys, tmp_path):
        exit_code, summary = _run(capsys, 'bench', '--out', tmp_path)

        assert exit_code == EXIT_INVALID_CONFIG
        assert summary is None

    def test_invalid_config_file(self, capsys, tmp_path, dataset):
        config = write_lines(tmp_path / 'run.toml', ['[filter]', 'x = 1'])

        exit_code, _ = _run(
            capsys, 'stats', '--config', config, '--dataset', dataset)

        assert exit_code == EXIT_INVALID_CONFIG

    def test_unreadable_dataset(self, capsys, tmp_path):
        exit_code, summary = _run(
            capsys, 'stats', '--dataset', tmp_path / 'nowhere.tsv',
            '--out', tmp_path / 'out')

        assert exit_code == EXIT_FAILURE
        assert summary is None

    def test_unknown_method(self, capsys):
        """Arguments argparse rejects must exit with the usage code."""
        with pytest.raises(SystemExit) as exc_info:
            main(['bench', '--method', 'pagerank'])

        assert exc_info.value.code == EXIT_INVALID_CONFIG
