from __future__ import annotations

from pathlib import Path

import pytest

from checkin_linkpred.checkins import DEFAULT_SCHEMA
from checkin_linkpred.checkins import OnError
from checkin_linkpred.config import DEFAULT_FRACTIONS
from checkin_linkpred.config import DEFAULT_METHODS
from checkin_linkpred.config import RunConfig
from checkin_linkpred.config import SamplingSection
from checkin_linkpred.config import load_config
from checkin_linkpred.evaluation import ComparisonKind
from checkin_linkpred.exceptions import InvalidConfig
from checkin_linkpred.graph import DegreeKind
from checkin_linkpred.predictors import Method

from checkin_linkpred_testutils.fixtures import write_lines

_FULL_CONFIG = '''
[dataset]
path = "data/checkins.tsv"
on_error = "abort"

[dataset.schema]
timestamp = 9

[filter]
min_degree = 5
dominance = 0.8
degree_kind = "binary"

[sampling]
fractions = [0.1, 0.2]
windows = ["0:100"]
seeds = [1, 2]
negative_ratio = 2.0

[evaluation]
comparison = "sampled"
n_draws = 5000
comparison_seed = 3
workers = 2

[output]
dir = "results"

[[predictors]]
method = "nbi"

[[predictors]]
method = "nbi_multistep"
steps = 2
'''


class TestLoadConfig:

    def test_full(self, tmp_path: Path):
        """Every table must load, with relative paths resolved against
        the config file's directory.
        """
        path = write_lines(tmp_path / 'run.toml', [_FULL_CONFIG])

        config = load_config(path)

        assert config.dataset.path == tmp_path / 'data' / 'checkins.tsv'
        assert config.dataset.on_error is OnError.ABORT
        assert config.dataset.schema.timestamp == 9
        assert config.dataset.schema.user == DEFAULT_SCHEMA.user
        assert config.filter.min_degree == 5
        assert config.filter.degree_kind is DegreeKind.BINARY
        assert config.sampling.fractions == (0.1, 0.2)
        assert config.sampling.windows == ((0.0, 100.0),)
        assert config.sampling.seeds == (1, 2)
        assert config.evaluation.comparison is ComparisonKind.SAMPLED
        assert str(config.evaluation.mode) == 'sampled(5000,3)'
        assert config.output.dir == tmp_path / 'results'
        assert [predictor.name for predictor in config.predictors] == [
            'nbi', 'nbi_multistep-2']

    def test_empty(self, tmp_path: Path):
        """An empty file must give all defaults."""
        path = write_lines(tmp_path / 'run.toml', [])

        config = load_config(path)

        assert config == RunConfig()
        assert config.output.dir == Path('out')

    def test_not_toml(self, tmp_path: Path):
        path = write_lines(tmp_path / 'run.toml', ['[dataset'])

        with pytest.raises(InvalidConfig):
            load_config(path)

    @pytest.mark.parametrize('text', [
        '[datasets]\npath = "x"',
        '[filter]\nminimum = 3',
        '[filter]\ndominance = 1.5',
        '[sampling]\nfractions = [0.0]',
        '[sampling]\nwindows = ["later:sooner"]',
        '[sampling]\nwindows = ["10:5"]',
        '[sampling]\nseeds = [-1]',
        '[evaluation]\ncomparison = "vibes"',
        '[evaluation]\nworkers = 0',
        '[dataset]\non_error = "ignore"',
        '[dataset.schema]\nrating = 2',
        '[[predictors]]\nmethod = "pagerank"',
        '[[predictors]]\nsteps = 2',
        'filter = 3',
        '[filter]\nmin_degree = true',
        '[filter]\nmin_degree = 2.5',
        '[sampling]\nn_seeds = true',
        '[sampling]\nmax_positives = false',
        '[sampling]\nseeds = [true]',
        '[evaluation]\nworkers = true',
        '[evaluation]\nn_draws = 1.5',
    ])
    def test_invalid(self, tmp_path: Path, text: str):
        """Unknown keys and out-of-range values must be rejected."""
        path = write_lines(tmp_path / 'run.toml', [text])

        with pytest.raises(InvalidConfig):
            load_config(path)


class TestRunConfig:

    def test_effective_defaults(self):
        """Without predictors or samples, the benchmark defaults to the
        basic methods on the usual fraction grid.
        """
        config = RunConfig()

        assert tuple(
            predictor.method for predictor in config.effective_predictors
        ) == DEFAULT_METHODS
        assert config.effective_fractions == DEFAULT_FRACTIONS

    def test_windows_only(self):
        """Configuring only windows must not add default fractions."""
        config = RunConfig(sampling=SamplingSection(windows=('0:10',)))

        assert config.effective_fractions == ()

    def test_overrides(self):
        config = RunConfig().with_overrides(
            dataset_path='x.tsv',
            output_dir='elsewhere',
            seeds=(7,),
            workers=3,
            methods=('cf', 'nbi_us'),
            fractions=(0.5,),
            windows=('0:5',))

        assert config.dataset.path == Path('x.tsv')
        assert config.output.dir == Path('elsewhere')
        assert config.sampling.seeds == (7,)
        assert config.evaluation.workers == 3
        assert [predictor.method for predictor in config.predictors] == [
            Method.CF, Method.NBI_US]
        assert config.sampling.fractions == (0.5,)
        assert config.sampling.windows == ((0.0, 5.0),)

    def test_override_unknown_method(self):
        with pytest.raises(InvalidConfig):
            RunConfig().with_overrides(methods=('pagerank',))

    def test_require_dataset(self):
        with pytest.raises(InvalidConfig):
            RunConfig().require_dataset()

    def test_resolved_seeds(self):
        """Missing seeds must be generated once; configured seeds must
        be kept.
        """
        generated = RunConfig(
            sampling=SamplingSection(n_seeds=3)).with_resolved_seeds()
        configured = RunConfig(
            sampling=SamplingSection(seeds=(4, 5))).with_resolved_seeds()

        assert len(generated.sampling.seeds) == 3
        assert generated.with_resolved_seeds() == generated
        assert configured.sampling.seeds == (4, 5)

    def test_hash(self):
        """Equal configs must hash equally; any change must change the
        hash.
        """
        first = RunConfig().with_overrides(seeds=(1,))
        second = RunConfig().with_overrides(seeds=(1,))
        third = RunConfig().with_overrides(seeds=(2,))

        assert first.config_hash() == second.config_hash()
        assert first.config_hash() != third.config_hash()
        assert len(first.config_hash()) == 64

    def test_round_trip(self):
        """A config rebuilt from its own dict rendering must be
        equal.
        """
        config = RunConfig.from_mapping({
            'sampling': {'fractions': [0.1], 'windows': ['0:10']},
            'predictors': [{'method': 'nbi_mod', 'alpha': 0.5}],
        })
        assert RunConfig.from_mapping(config.to_dict()) == config
