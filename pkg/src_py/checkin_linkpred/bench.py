"""The benchmark pipeline behind the command line: ingest, filter,
sample, evaluate, report. Each ``cmd_*`` function takes a resolved
``RunConfig``, writes its files into the configured output directory
and returns a JSON-serializable summary.
"""
from __future__ import annotations

import hashlib
import json
import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from checkin_linkpred.checkins import DatasetStats
from checkin_linkpred.checkins import load_dataset
from checkin_linkpred.config import RunConfig
from checkin_linkpred.evaluation import evaluate_grid
from checkin_linkpred.graph import BipartiteGraph
from checkin_linkpred.graph import FilterReport
from checkin_linkpred.graph import build_graph
from checkin_linkpred.graph import filter_graph
from checkin_linkpred.graph import read_edge_list
from checkin_linkpred.graph import write_edge_list
from checkin_linkpred.reporting import auc_curves
from checkin_linkpred.reporting import curve_filename
from checkin_linkpred.reporting import degree_histograms
from checkin_linkpred.reporting import write_curve_csv
from checkin_linkpred.reporting import write_histograms_csv
from checkin_linkpred.reporting import write_residual_curve_csv
from checkin_linkpred.reporting import write_results_csv
from checkin_linkpred.reporting import write_timings_csv
from checkin_linkpred.sampling import EvalSample
from checkin_linkpred.sampling import format_window
from checkin_linkpred.sampling import read_sample
from checkin_linkpred.sampling import residual_checkin_curve
from checkin_linkpred.sampling import sample_random
from checkin_linkpred.sampling import sample_time
from checkin_linkpred.sampling import write_sample

logger = logging.getLogger(__name__)

_CHECKSUM_CHUNK_SIZE = 1 << 20
_CACHE_KEY_LENGTH = 16


def file_checksum(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open('rb') as raw_file:
        while chunk := raw_file.read(_CHECKSUM_CHUNK_SIZE):
            digest.update(chunk)
    return digest.hexdigest()


def _cache_key(parts: dict[str, Any]) -> str:
    canonical = json.dumps(parts, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(
        canonical.encode('utf-8')).hexdigest()[:_CACHE_KEY_LENGTH]


def _graph_summary(g: BipartiteGraph) -> dict[str, int]:
    return {
        'n_users': g.n_users,
        'n_venues': g.n_venues,
        'n_pairs': g.n_pairs,
        'n_checkins': g.n_checkins,
    }


@dataclass(slots=True, frozen=True)
class PreparedGraph:
    """The filtered graph a run scores on, plus its provenance."""
    graph: BipartiteGraph
    dataset_checksum: str
    cache_key: str
    from_cache: bool
    filter_report: FilterReport | None = None
    dataset_stats: DatasetStats | None = None


def _cache_dir(config: RunConfig) -> Path | None:
    if not config.output.cache:
        return None
    cache_dir = config.output.dir / 'cache'
    cache_dir.mkdir(parents=True, exist_ok=True)
    return cache_dir


def prepare_graph(config: RunConfig) -> PreparedGraph:
    """Loads, builds and filters the graph, or reads it back from the
    cache if an identical dataset was already filtered with identical
    settings.
    """
    dataset_path = config.require_dataset()
    dataset_checksum = file_checksum(dataset_path)
    cache_key = _cache_key({
        'dataset': dataset_checksum,
        'ingest': {
            key: value for key, value in config.dataset.to_dict().items()
            if key != 'path'},
        'filter': config.filter.to_dict(),
    })

    cache_dir = _cache_dir(config)
    cache_path = (
        None if cache_dir is None else cache_dir / f'graph-{cache_key}.tsv')
    if cache_path is not None and cache_path.exists():
        logger.info('Using cached graph %s', cache_path)
        return PreparedGraph(
            graph=read_edge_list(cache_path),
            dataset_checksum=dataset_checksum,
            cache_key=cache_key,
            from_cache=True)

    checkins, stats = load_dataset(
        dataset_path,
        config.dataset.schema,
        config.dataset.on_error,
        encoding=config.dataset.encoding)
    graph = build_graph(checkins)
    report = None
    if config.filter.enabled:
        graph, report = filter_graph(
            graph,
            min_degree=config.filter.min_degree,
            dominance=config.filter.dominance,
            degree_kind=config.filter.degree_kind)

    if cache_path is not None:
        write_edge_list(graph, cache_path)
        logger.info('Cached graph as %s', cache_path)

    return PreparedGraph(
        graph=graph,
        dataset_checksum=dataset_checksum,
        cache_key=cache_key,
        from_cache=False,
        filter_report=report,
        dataset_stats=stats)


@dataclass(slots=True, frozen=True)
class PreparedSample:
    sample: EvalSample
    cache_key: str


def prepare_samples(
        config: RunConfig,
        prepared: PreparedGraph
        ) -> list[PreparedSample]:
    """Every (fraction, seed) random-batch sample, then every (window,
    seed) time-incremental sample. Seeds must already be resolved.
    """
    sampling = config.sampling
    cache_dir = _cache_dir(config)
    sample_specs: list[dict[str, Any]] = [
        {'mode': 'random-batch', 'fraction': fraction, 'seed': seed}
        for fraction in config.effective_fractions
        for seed in sampling.seeds]
    sample_specs.extend(
        {'mode': 'time-incremental', 'window': format_window(window),
         'seed': seed, 'max_positives': sampling.max_positives,
         'window_value': window}
        for window in sampling.windows
        for seed in sampling.seeds)

    prepared_samples: list[PreparedSample] = []
    for sample_spec in sample_specs:
        window = sample_spec.pop('window_value', None)
        cache_key = _cache_key({
            'graph': prepared.cache_key,
            'negative_ratio': sampling.negative_ratio,
            **sample_spec})
        cache_path = (
            None if cache_dir is None
            else cache_dir / f'sample-{cache_key}.tsv')

        if cache_path is not None and cache_path.exists():
            logger.info('Using cached sample %s', cache_path)
            sample = read_sample(cache_path)
        else:
            if window is None:
                sample, _ = sample_random(
                    prepared.graph,
                    sample_spec['fraction'],
                    sample_spec['seed'],
                    negative_ratio=sampling.negative_ratio)
            else:
                sample = sample_time(
                    prepared.graph,
                    window,
                    sample_spec['seed'],
                    max_positives=sampling.max_positives,
                    negative_ratio=sampling.negative_ratio)
            if cache_path is not None:
                write_sample(sample, cache_path)

        prepared_samples.append(PreparedSample(sample, cache_key))

    return prepared_samples


def _write_json(path: Path, payload: Any) -> None:
    with path.open('w', encoding='utf-8') as json_file:
        json.dump(payload, json_file, indent=2, sort_keys=True)
        json_file.write('\n')


def cmd_stats(config: RunConfig) -> dict[str, Any]:
    """Raw and filtered dataset statistics, plus log-binned degree
    histograms of both graphs (``histograms-raw.csv``,
    ``histograms-filtered.csv``).
    """
    checkins, stats = load_dataset(
        config.require_dataset(),
        config.dataset.schema,
        config.dataset.on_error,
        encoding=config.dataset.encoding)
    raw_graph = build_graph(checkins)
    filtered_graph, report = filter_graph(
        raw_graph,
        min_degree=config.filter.min_degree,
        dominance=config.filter.dominance,
        degree_kind=config.filter.degree_kind)

    out_dir = config.output.dir
    out_dir.mkdir(parents=True, exist_ok=True)
    raw_histograms = out_dir / 'histograms-raw.csv'
    filtered_histograms = out_dir / 'histograms-filtered.csv'
    write_histograms_csv(raw_histograms, degree_histograms(raw_graph))
    write_histograms_csv(
        filtered_histograms, degree_histograms(filtered_graph))

    return {
        'dataset': stats.to_dict(),
        'raw': _graph_summary(raw_graph),
        'filtered': _graph_summary(filtered_graph),
        'filter': report.to_dict(),
        'histograms': [str(raw_histograms), str(filtered_histograms)],
    }


def cmd_filter(config: RunConfig) -> dict[str, Any]:
    """Writes the filtered graph as an edge list (``graph.tsv``)."""
    prepared = prepare_graph(config)
    out_dir = config.output.dir
    out_dir.mkdir(parents=True, exist_ok=True)
    graph_path = out_dir / 'graph.tsv'
    write_edge_list(prepared.graph, graph_path)

    return {
        'graph': str(graph_path),
        'checksum': prepared.graph.checksum(),
        'from_cache': prepared.from_cache,
        'filtered': _graph_summary(prepared.graph),
        'filter': (
            None if prepared.filter_report is None
            else prepared.filter_report.to_dict()),
    }


def _sample_filename(sample: EvalSample) -> str:
    label = sample.label.replace(':', '-')
    return f'{sample.mode}-{label}-seed{sample.seed}.tsv'


def cmd_sample(config: RunConfig) -> dict[str, Any]:
    """Draws (or reuses) every configured sample and writes each one
    under ``samples/``.
    """
    config = config.with_resolved_seeds()
    prepared = prepare_graph(config)
    samples_dir = config.output.dir / 'samples'
    samples_dir.mkdir(parents=True, exist_ok=True)

    written: list[dict[str, Any]] = []
    for prepared_sample in prepare_samples(config, prepared):
        sample = prepared_sample.sample
        sample_path = samples_dir / _sample_filename(sample)
        write_sample(sample, sample_path)
        written.append({
            **sample.meta,
            'path': str(sample_path),
            'n_pos': len(sample.positives),
            'n_neg': len(sample.negatives),
        })

    return {'seeds': list(config.sampling.seeds), 'samples': written}


def cmd_residual_curve(config: RunConfig) -> dict[str, Any]:
    """Remaining check-ins after random-batch holdout, per fraction
    (``residual-curve.csv``). Uses the first configured seed.
    """
    config = config.with_resolved_seeds()
    prepared = prepare_graph(config)
    seed = config.sampling.seeds[0]
    curve = residual_checkin_curve(
        prepared.graph,
        config.effective_fractions,
        seed,
        nested=config.sampling.nested)

    out_dir = config.output.dir
    out_dir.mkdir(parents=True, exist_ok=True)
    curve_path = out_dir / 'residual-curve.csv'
    write_residual_curve_csv(curve_path, curve)

    return {
        'seed': seed,
        'nested': config.sampling.nested,
        'total_checkins': prepared.graph.n_checkins,
        'curve': [
            {'fraction': fraction, 'remaining_checkins': remaining}
            for fraction, remaining in curve],
        'path': str(curve_path),
    }


def cmd_bench(config: RunConfig) -> dict[str, Any]:
    """Runs the whole grid and writes ``results.csv``, ``timings.csv``,
    one ``curve-<predictor>.csv`` per predictor and ``manifest.json``.
    Failing cells are recorded in the results rather than aborting the
    run. Returns the manifest.
    """
    config = config.with_resolved_seeds()
    predictors = config.effective_predictors
    prepared = prepare_graph(config)
    prepared_samples = prepare_samples(config, prepared)
    samples: Sequence[EvalSample] = [
        prepared_sample.sample for prepared_sample in prepared_samples]

    reports = evaluate_grid(
        prepared.graph,
        samples,
        predictors,
        config.evaluation.mode,
        workers=config.evaluation.workers)

    out_dir = config.output.dir
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = ['results.csv', 'timings.csv']
    write_results_csv(out_dir / 'results.csv', reports)
    write_timings_csv(out_dir / 'timings.csv', reports)
    for name, points in auc_curves(reports).items():
        filename = curve_filename(name)
        write_curve_csv(out_dir / filename, points)
        outputs.append(filename)

    n_failed = sum(not report.ok for report in reports)
    if n_failed:
        logger.warning('%s of %s grid cells failed', n_failed, len(reports))

    manifest = {
        'config_hash': config.config_hash(),
        'config': config.to_dict(),
        'seeds': list(config.sampling.seeds),
        'predictors': [predictor.name for predictor in predictors],
        'dataset_checksum': prepared.dataset_checksum,
        'graph_checksum': prepared.graph.checksum(),
        'graph': _graph_summary(prepared.graph),
        'cache_keys': {
            'graph': prepared.cache_key,
            'samples': [
                prepared_sample.cache_key
                for prepared_sample in prepared_samples],
        },
        'n_cells': len(reports),
        'n_failed': n_failed,
        'outputs': outputs,
    }
    _write_json(out_dir / 'manifest.json', manifest)
    return manifest
