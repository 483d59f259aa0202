"""Run configuration for the benchmark pipeline, loaded from a TOML
file with one table per pipeline stage:

    [dataset]
    path = "checkins.tsv"
    on_error = "skip"

    [dataset.schema]
    timestamp = 7

    [filter]
    min_degree = 20
    dominance = 0.9

    [sampling]
    fractions = [0.05, 0.1]
    seeds = [1, 2, 3]

    [evaluation]
    comparison = "exact"

    [output]
    dir = "out"

    [[predictors]]
    method = "nbi"

Every key is optional except ``dataset.path`` (which may also come
from the command line). Unknown keys are rejected.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import secrets
import tomllib
from collections.abc import Mapping
from dataclasses import dataclass
from dataclasses import field
from dataclasses import fields as dc_fields
from dataclasses import replace as dc_replace
from pathlib import Path
from typing import Annotated
from typing import Any

from docnote import Note

from checkin_linkpred.checkins import DEFAULT_SCHEMA
from checkin_linkpred.checkins import CheckinSchema
from checkin_linkpred.checkins import OnError
from checkin_linkpred.checkins import TimeWindow
from checkin_linkpred.checkins import parse_window
from checkin_linkpred.evaluation import DEFAULT_N_DRAWS
from checkin_linkpred.evaluation import ComparisonKind
from checkin_linkpred.evaluation import ComparisonMode
from checkin_linkpred.exceptions import InvalidConfig
from checkin_linkpred.graph import DegreeKind
from checkin_linkpred.predictors import Method
from checkin_linkpred.predictors import PredictorConfig
from checkin_linkpred.sampling import format_window

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)
DEFAULT_METHODS = (Method.GRM, Method.ASSORT, Method.CF, Method.NBI)
_TOP_LEVEL_TABLES = frozenset({
    'dataset', 'filter', 'sampling', 'evaluation', 'output', 'predictors'})


def _check_keys(
        table_name: str,
        table: Mapping[str, Any],
        known: set[str]
        ) -> None:
    unknown = set(table) - known
    if unknown:
        raise InvalidConfig(
            f'Unknown key(s) in [{table_name}]', sorted(unknown))


def _check_count(name: str, value: Any, minimum: int) -> None:
    # bool is an int subclass, and TOML true would otherwise pass as 1
    if (
        isinstance(value, bool)
        or not isinstance(value, int)
        or value < minimum
    ):
        raise InvalidConfig(f'{name} must be an integer >= {minimum}', value)


def _field_names(cls: type) -> set[str]:
    return {field_obj.name for field_obj in dc_fields(cls)}


def _build_section[T](cls: type[T], table_name: str, table: Any) -> T:
    if not isinstance(table, Mapping):
        raise InvalidConfig(f'[{table_name}] must be a table', table)
    _check_keys(table_name, table, _field_names(cls))
    try:
        return cls(**table)
    except TypeError as exc:
        raise InvalidConfig(f'Bad [{table_name}] table', table) from exc


@dataclass(slots=True, frozen=True)
class DatasetSection:
    path: Path | None = None
    on_error: OnError = OnError.SKIP
    encoding: str = 'utf-8'
    schema: Annotated[
            CheckinSchema,
            Note('''Given in the file as a ``[dataset.schema]`` table of
                overrides on top of the default layout.''')
        ] = DEFAULT_SCHEMA

    def __post_init__(self):
        if self.path is not None:
            # Doing it this way to bypass the frozen-ness
            object.__setattr__(self, 'path', Path(self.path))
        try:
            object.__setattr__(self, 'on_error', OnError(self.on_error))
        except ValueError as exc:
            raise InvalidConfig('Unknown on_error', self.on_error) from exc

    def to_dict(self) -> dict[str, Any]:
        return {
            'path': None if self.path is None else str(self.path),
            'on_error': str(self.on_error),
            'encoding': self.encoding,
            'schema': {
                field_obj.name: getattr(self.schema, field_obj.name)
                for field_obj in dc_fields(self.schema)},
        }


@dataclass(slots=True, frozen=True)
class FilterSection:
    enabled: bool = True
    min_degree: int = 20
    dominance: float = 0.9
    degree_kind: DegreeKind = DegreeKind.WEIGHTED

    def __post_init__(self):
        try:
            object.__setattr__(
                self, 'degree_kind', DegreeKind(self.degree_kind))
        except ValueError as exc:
            raise InvalidConfig(
                'Unknown degree_kind', self.degree_kind) from exc
        _check_count('min_degree', self.min_degree, 0)
        if not 0 < self.dominance <= 1:
            raise InvalidConfig('dominance must be in (0, 1]', self.dominance)

    def to_dict(self) -> dict[str, Any]:
        return {
            'enabled': self.enabled,
            'min_degree': self.min_degree,
            'dominance': self.dominance,
            'degree_kind': str(self.degree_kind),
        }


@dataclass(slots=True, frozen=True)
class SamplingSection:
    fractions: Annotated[
            tuple[float, ...],
            Note('One random-batch sample per fraction and seed.')
        ] = ()
    windows: Annotated[
            tuple[TimeWindow, ...],
            Note('''One time-incremental sample per window and seed. In the
                file, each window is a ``"START:END"`` string.''')
        ] = ()
    seeds: Annotated[
            tuple[int, ...],
            Note('''If empty, ``n_seeds`` seeds are generated when the run
                starts and echoed into its manifest.''')
        ] = ()
    n_seeds: int = 1
    negative_ratio: float = 1.0
    max_positives: int | None = None
    nested: Annotated[
            bool,
            Note('Residual curve only: reuse one seed for every fraction.')
        ] = False

    def __post_init__(self):
        try:
            # Doing it this way to bypass the frozen-ness
            object.__setattr__(self, 'fractions', tuple(
                float(value) for value in self.fractions))
            object.__setattr__(self, 'windows', tuple(
                parse_window(window) if isinstance(window, str)
                else (float(window[0]), float(window[1]))
                for window in self.windows))
        except ValueError as exc:
            raise InvalidConfig(
                'Bad fractions or windows',
                self.fractions, self.windows) from exc
        object.__setattr__(self, 'seeds', tuple(self.seeds))

        for fraction in self.fractions:
            if not 0 < fraction <= 1:
                raise InvalidConfig('fractions must be in (0, 1]', fraction)
        for start, end in self.windows:
            if not start < end:
                raise InvalidConfig(
                    'Window start must precede its end', (start, end))
        for seed in self.seeds:
            _check_count('seeds', seed, 0)
        _check_count('n_seeds', self.n_seeds, 1)
        if (
            not math.isfinite(self.negative_ratio)
            or self.negative_ratio < 0
        ):
            raise InvalidConfig(
                'negative_ratio must be >= 0', self.negative_ratio)
        if self.max_positives is not None:
            _check_count('max_positives', self.max_positives, 1)

    def to_dict(self) -> dict[str, Any]:
        return {
            'fractions': list(self.fractions),
            'windows': [format_window(window) for window in self.windows],
            'seeds': list(self.seeds),
            'n_seeds': self.n_seeds,
            'negative_ratio': self.negative_ratio,
            'max_positives': self.max_positives,
            'nested': self.nested,
        }


@dataclass(slots=True, frozen=True)
class EvaluationSection:
    comparison: ComparisonKind = ComparisonKind.EXACT
    n_draws: int = DEFAULT_N_DRAWS
    comparison_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(
                self, 'comparison', ComparisonKind(self.comparison))
        except ValueError as exc:
            raise InvalidConfig(
                'Unknown comparison', self.comparison) from exc
        _check_count('workers', self.workers, 1)
        _check_count('n_draws', self.n_draws, 1)

    @property
    def mode(self) -> ComparisonMode:
        return ComparisonMode(
            self.comparison,
            n_draws=self.n_draws,
            seed=self.comparison_seed)

    def to_dict(self) -> dict[str, Any]:
        return {
            'comparison': str(self.comparison),
            'n_draws': self.n_draws,
            'comparison_seed': self.comparison_seed,
            'workers': self.workers,
        }


@dataclass(slots=True, frozen=True)
class OutputSection:
    dir: Path = Path('out')
    cache: Annotated[
            bool,
            Note('''Cache filtered graphs and samples under
                ``<dir>/cache/``.''')
        ] = True

    def __post_init__(self):
        object.__setattr__(self, 'dir', Path(self.dir))

    def to_dict(self) -> dict[str, Any]:
        return {'dir': str(self.dir), 'cache': self.cache}


@dataclass(slots=True, frozen=True)
class RunConfig:
    dataset: DatasetSection = field(default_factory=DatasetSection)
    filter: FilterSection = field(default_factory=FilterSection)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)
    output: OutputSection = field(default_factory=OutputSection)
    predictors: tuple[PredictorConfig, ...] = ()

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> RunConfig:
        _check_keys('top level', data, set(_TOP_LEVEL_TABLES))

        dataset_table = dict(data.get('dataset', {}))
        schema_overrides = dataset_table.pop('schema', {})
        dataset = _build_section(DatasetSection, 'dataset', dataset_table)
        if schema_overrides:
            dataset = dc_replace(
                dataset,
                schema=CheckinSchema.from_mapping(schema_overrides))

        predictor_tables = data.get('predictors', [])
        if not isinstance(predictor_tables, list):
            raise InvalidConfig(
                '[[predictors]] must be an array of tables', predictor_tables)

        return cls(
            dataset=dataset,
            filter=_build_section(
                FilterSection, 'filter', data.get('filter', {})),
            sampling=_build_section(
                SamplingSection, 'sampling', data.get('sampling', {})),
            evaluation=_build_section(
                EvaluationSection, 'evaluation', data.get('evaluation', {})),
            output=_build_section(
                OutputSection, 'output', data.get('output', {})),
            predictors=tuple(
                PredictorConfig.from_mapping(table)
                for table in predictor_tables))

    def with_overrides(  # noqa: PLR0913
            self,
            *,
            dataset_path: str | Path | None = None,
            output_dir: str | Path | None = None,
            seeds: Annotated[
                    tuple[int, ...] | None,
                    Note('Replaces the configured seeds.')
                ] = None,
            workers: int | None = None,
            methods: Annotated[
                    tuple[str, ...] | None,
                    Note('''Replaces the configured predictors with default
                        configs of these methods.''')
                ] = None,
            fractions: tuple[float, ...] | None = None,
            windows: tuple[str, ...] | None = None
            ) -> RunConfig:
        """Returns a new config with command-line overrides applied.
        Overrides left as None keep the configured value.
        """
        config = self
        if dataset_path is not None:
            config = dc_replace(
                config,
                dataset=dc_replace(config.dataset, path=Path(dataset_path)))
        if output_dir is not None:
            config = dc_replace(
                config,
                output=dc_replace(config.output, dir=Path(output_dir)))
        if workers is not None:
            config = dc_replace(
                config,
                evaluation=dc_replace(config.evaluation, workers=workers))
        if methods is not None:
            config = dc_replace(
                config,
                predictors=tuple(
                    _default_predictor(method) for method in methods))

        sampling_changes: dict[str, Any] = {}
        if seeds is not None:
            sampling_changes['seeds'] = seeds
        if fractions is not None:
            sampling_changes['fractions'] = fractions
        if windows is not None:
            sampling_changes['windows'] = windows
        if sampling_changes:
            config = dc_replace(
                config,
                sampling=dc_replace(config.sampling, **sampling_changes))

        return config

    @property
    def effective_predictors(self) -> tuple[PredictorConfig, ...]:
        if self.predictors:
            return self.predictors
        return tuple(PredictorConfig(method=method)
                     for method in DEFAULT_METHODS)

    @property
    def effective_fractions(self) -> tuple[float, ...]:
        """Without any fraction or window configured, the benchmark
        defaults to the usual fraction grid.
        """
        if self.sampling.fractions or self.sampling.windows:
            return self.sampling.fractions
        return DEFAULT_FRACTIONS

    def require_dataset(self) -> Path:
        if self.dataset.path is None:
            raise InvalidConfig(
                'No dataset path (set [dataset] path or pass --dataset)')
        return self.dataset.path

    def with_resolved_seeds(self) -> RunConfig:
        """Generates ``n_seeds`` seeds if none are configured. The
        generated seeds are logged, and become part of the config (and
        therefore of its hash and the run manifest).
        """
        if self.sampling.seeds:
            return self

        seeds = tuple(
            secrets.randbelow(2 ** 32) for _ in range(self.sampling.n_seeds))
        logger.info('No seeds configured; generated %s', list(seeds))
        return dc_replace(
            self, sampling=dc_replace(self.sampling, seeds=seeds))

    def to_dict(self) -> dict[str, Any]:
        return {
            'dataset': self.dataset.to_dict(),
            'filter': self.filter.to_dict(),
            'sampling': self.sampling.to_dict(),
            'evaluation': self.evaluation.to_dict(),
            'output': self.output.to_dict(),
            'predictors': [
                predictor.to_dict() for predictor in self.predictors],
        }

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON rendering of the config."""
        canonical = json.dumps(
            self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def _default_predictor(method: str) -> PredictorConfig:
    try:
        return PredictorConfig(method=Method(method))
    except ValueError as exc:
        raise InvalidConfig(
            'Unknown method', method, sorted(map(str, Method))) from exc


def load_config(path: str | Path) -> RunConfig:
    """Parses and validates a TOML run config. Relative dataset and
    output paths are resolved against the config file's directory.
    """
    config_path = Path(path)
    try:
        with config_path.open('rb') as toml_file:
            data = tomllib.load(toml_file)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidConfig('Config file is not valid TOML', path) from exc

    config = RunConfig.from_mapping(data)
    base_dir = config_path.parent
    dataset_path = config.dataset.path
    if dataset_path is not None and not dataset_path.is_absolute():
        config = dc_replace(
            config,
            dataset=dc_replace(
                config.dataset, path=base_dir / dataset_path))
    if 'output' in data and 'dir' in data['output'] and (
            not config.output.dir.is_absolute()):
        config = dc_replace(
            config,
            output=dc_replace(config.output, dir=base_dir / config.output.dir))

    logger.info('Loaded config %s (hash %s)', path, config.config_hash())
    return config
