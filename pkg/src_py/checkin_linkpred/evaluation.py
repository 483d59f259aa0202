"""AUC of a predictor over an evaluation sample: the probability that a
held-out connected pair outscores an unconnected one, with ties
counting half.
"""
from __future__ import annotations

import logging
import time
from collections.abc import Callable
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from enum import StrEnum
from typing import Annotated
from typing import Any

import numpy as np
from docnote import Note

from checkin_linkpred.checkins import TimeWindow
from checkin_linkpred.exceptions import EmptySample
from checkin_linkpred.exceptions import InvalidConfig
from checkin_linkpred.exceptions import IsolatedUser
from checkin_linkpred.exceptions import LinkpredException
from checkin_linkpred.exceptions import ScorerError
from checkin_linkpred.graph import BipartiteGraph
from checkin_linkpred.predictors import PredictorConfig
from checkin_linkpred.predictors import score_user
from checkin_linkpred.sampling import EvalPair
from checkin_linkpred.sampling import EvalSample
from checkin_linkpred.sampling import SampleMode
from checkin_linkpred.sampling import apply_sample

logger = logging.getLogger(__name__)

DEFAULT_N_DRAWS = 1_000_000


class ComparisonKind(StrEnum):
    EXACT = 'exact'
    SAMPLED = 'sampled'


@dataclass(slots=True, frozen=True)
class ComparisonMode:
    """How positive and negative scores are compared. Exact mode
    compares every (positive, negative) combination; sampled mode
    draws ``n_draws`` independent random combinations.
    """
    kind: ComparisonKind = ComparisonKind.EXACT
    n_draws: Annotated[
            int,
            Note('Sampled mode only.')
        ] = DEFAULT_N_DRAWS
    seed: Annotated[
            int,
            Note('Sampled mode only.')
        ] = 0

    def __post_init__(self):
        try:
            # Doing it this way to bypass the frozen-ness
            object.__setattr__(self, 'kind', ComparisonKind(self.kind))
        except ValueError as exc:
            raise InvalidConfig('Unknown comparison mode', self.kind) from exc
        if self.n_draws < 1:
            raise InvalidConfig('n_draws must be >= 1', self.n_draws)

    @classmethod
    def exact(cls) -> ComparisonMode:
        return cls(ComparisonKind.EXACT)

    @classmethod
    def sampled(
            cls,
            n_draws: int = DEFAULT_N_DRAWS,
            seed: int = 0
            ) -> ComparisonMode:
        return cls(ComparisonKind.SAMPLED, n_draws=n_draws, seed=seed)

    def __str__(self) -> str:
        if self.kind is ComparisonKind.EXACT:
            return str(self.kind)
        return f'{self.kind}({self.n_draws},{self.seed})'


@dataclass(slots=True, frozen=True)
class ComparisonCounts:
    n_comparisons: int
    n_wins: int
    n_ties: int

    @property
    def auc(self) -> float:
        return (self.n_wins + 0.5 * self.n_ties) / self.n_comparisons


@dataclass(slots=True, frozen=True)
class AucReport:
    """One evaluated (sample, predictor) cell. Failed cells have
    ``auc = None`` and the error message in ``error``.
    """
    auc: float | None
    n_pos: int
    n_neg: int
    n_comparisons: int
    n_wins: int
    n_ties: int
    method: PredictorConfig
    sample_meta: dict[str, Any] = field(hash=False)
    wall_time: Annotated[
            float,
            Note('Seconds spent scoring and comparing.')
        ] = 0.0
    comparison: ComparisonMode = field(default_factory=ComparisonMode)
    n_isolated: Annotated[
            int,
            Note('''Score vectors replaced by all-zero vectors because the
                querying user had no venues left to score from.''')
        ] = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @classmethod
    def failed(
            cls,
            sample: EvalSample,
            predictor: PredictorConfig,
            comparison: ComparisonMode,
            exc: BaseException,
            wall_time: float = 0.0
            ) -> AucReport:
        return cls(
            auc=None,
            n_pos=len(sample.positives),
            n_neg=len(sample.negatives),
            n_comparisons=0,
            n_wins=0,
            n_ties=0,
            method=predictor,
            sample_meta=sample.meta,
            wall_time=wall_time,
            comparison=comparison,
            error=f'{type(exc).__name__}: {exc}')


def auc_from_scores(
        positive_scores: Sequence[float] | np.ndarray,
        negative_scores: Sequence[float] | np.ndarray,
        mode: ComparisonMode | None = None
        ) -> ComparisonCounts:
    """Counts wins (positive strictly above negative) and ties. The
    resulting AUC is not clamped: an anti-correlated scorer gets a
    value below 0.5.
    """
    if mode is None:
        mode = ComparisonMode()

    positives = np.asarray(positive_scores, dtype=np.float64)
    negatives = np.asarray(negative_scores, dtype=np.float64)
    if not positives.size or not negatives.size:
        raise EmptySample(
            'Need at least one positive and one negative score',
            positives.size, negatives.size)

    if mode.kind is ComparisonKind.EXACT:
        sorted_negatives = np.sort(negatives)
        below = np.searchsorted(sorted_negatives, positives, side='left')
        not_above = np.searchsorted(sorted_negatives, positives, side='right')
        return ComparisonCounts(
            n_comparisons=positives.size * negatives.size,
            n_wins=int(below.sum()),
            n_ties=int((not_above - below).sum()))

    rng = np.random.default_rng(mode.seed)
    positive_draws = positives[rng.integers(positives.size, size=mode.n_draws)]
    negative_draws = negatives[rng.integers(negatives.size, size=mode.n_draws)]
    return ComparisonCounts(
        n_comparisons=mode.n_draws,
        n_wins=int(np.count_nonzero(positive_draws > negative_draws)),
        n_ties=int(np.count_nonzero(positive_draws == negative_draws)))


@dataclass(slots=True)
class _Scoring:
    """Scoring state for one evaluation. ``scores`` follows the order
    of ``pairs``: all positives, then all negatives.
    """
    predictor: PredictorConfig
    window: TimeWindow | None
    pairs: tuple[EvalPair, ...]
    scores: np.ndarray
    n_isolated: int = 0

    def user_vector(
            self,
            g: BipartiteGraph,
            user: str,
            offending: EvalPair
            ) -> tuple[np.ndarray, bool]:
        """Returns the score vector of the user, and whether it had to
        be replaced by zeros.
        """
        try:
            vector = score_user(g, user, self.predictor, window=self.window)
        except IsolatedUser:
            logger.warning(
                'User %s has no venues; scoring with zeros (%s)',
                user, self.predictor.name)
            return np.zeros(g.n_venues, dtype=np.float64), True
        except LinkpredException as exc:
            raise ScorerError(
                'Failed to score pair',
                offending.key,
                self.predictor.name) from exc

        if not np.all(np.isfinite(vector.values)):
            raise ScorerError(
                'Scorer produced non-finite scores',
                offending.key,
                self.predictor.name)
        return vector.values, False

    def lookup(
            self,
            g: BipartiteGraph,
            values: np.ndarray,
            pair: EvalPair
            ) -> float:
        venue_idx = g.venue_index.get(pair.venue)
        if venue_idx is None:
            raise ScorerError(
                'Sample venue is not part of the graph',
                pair.key,
                self.predictor.name)
        return float(values[venue_idx])


def _map(
        func: Callable[[Any], Any],
        items: Sequence[Any],
        workers: int
        ) -> list[Any]:
    """Ordered map; fans out over a thread pool when ``workers > 1``."""
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, items))


def _score_grouped_by_user(
        g: BipartiteGraph,
        scoring: _Scoring,
        positions: Sequence[int],
        workers: int
        ) -> None:
    """Scores the pairs at ``positions`` against ``g`` as it is,
    computing one score vector per distinct user.
    """
    by_user: dict[str, list[int]] = {}
    for position in positions:
        by_user.setdefault(scoring.pairs[position].user, []).append(position)

    def score_one_user(user: str) -> tuple[list[float], bool]:
        user_positions = by_user[user]
        if user not in g.user_index:
            raise ScorerError(
                'Sample user is not part of the graph',
                scoring.pairs[user_positions[0]].key,
                scoring.predictor.name)

        values, isolated = scoring.user_vector(
            g, user, scoring.pairs[user_positions[0]])
        return (
            [scoring.lookup(g, values, scoring.pairs[position])
             for position in user_positions],
            isolated)

    users = sorted(by_user)
    for user, (user_scores, isolated) in zip(
            users, _map(score_one_user, users, workers), strict=True):
        scoring.scores[by_user[user]] = user_scores
        scoring.n_isolated += isolated


def _score_positives_incrementally(
        g: BipartiteGraph,
        scoring: _Scoring,
        positions: Sequence[int]
        ) -> int:
    """Scores each positive against ``g`` with that one pair removed,
    restoring the graph afterwards. Returns the number of isolated
    score vectors.
    """
    n_isolated = 0
    for position in positions:
        pair = scoring.pairs[position]
        try:
            record = g.remove_pair(pair.user, pair.venue)
        except LinkpredException as exc:
            raise ScorerError(
                'Cannot hold out sample pair',
                pair.key,
                scoring.predictor.name) from exc

        try:
            values, isolated = scoring.user_vector(g, pair.user, pair)
            scoring.scores[position] = scoring.lookup(g, values, pair)
        finally:
            g.restore_pair(record)
        n_isolated += isolated
        logger.debug('Scored held-out pair %s', pair.key)
    return n_isolated


def _score_time_sample(
        g: BipartiteGraph,
        scoring: _Scoring,
        n_pos: int,
        workers: int
        ) -> None:
    # Negatives are scored against the unmodified graph.
    _score_grouped_by_user(
        g, scoring, range(n_pos, len(scoring.pairs)), workers)

    positions = list(range(n_pos))
    if workers <= 1:
        scoring.n_isolated += _score_positives_incrementally(
            g, scoring, positions)
        return

    # Every worker mutates its own private copy of the graph.
    chunks = [positions[offset::workers] for offset in range(workers)]
    chunks = [chunk for chunk in chunks if chunk]
    scoring.n_isolated += sum(_map(
        lambda chunk: _score_positives_incrementally(
            g.copy(), scoring, chunk),
        chunks,
        workers))


def evaluate_auc(
        g: Annotated[
                BipartiteGraph,
                Note('''The residual graph for random-batch samples, the
                    full graph for time-incremental ones. Time-incremental
                    evaluation temporarily mutates it and leaves it
                    structurally identical to how it was passed.''')],
        sample: EvalSample,
        predictor: PredictorConfig,
        mode: ComparisonMode | None = None,
        *,
        workers: Annotated[
                int,
                Note('''Thread count. Results never depend on it.''')
            ] = 1
        ) -> AucReport:
    """Scores every pair of the sample and compares positives against
    negatives. Score vectors are computed once per user and reused for
    all of that user's pairs, except for time-incremental positives,
    which each need their own graph state.
    """
    if mode is None:
        mode = ComparisonMode()
    if not sample.positives or not sample.negatives:
        raise EmptySample(
            'Sample needs positive and negative pairs',
            len(sample.positives), len(sample.negatives))

    started = time.perf_counter()
    pairs = (*sample.positives, *sample.negatives)
    n_pos = len(sample.positives)
    scoring = _Scoring(
        predictor=predictor,
        window=sample.window,
        pairs=pairs,
        scores=np.zeros(len(pairs), dtype=np.float64))

    if sample.mode is SampleMode.RANDOM_BATCH:
        _score_grouped_by_user(g, scoring, range(len(pairs)), workers)
    else:
        _score_time_sample(g, scoring, n_pos, workers)

    counts = auc_from_scores(
        scoring.scores[:n_pos], scoring.scores[n_pos:], mode)
    wall_time = time.perf_counter() - started

    report = AucReport(
        auc=counts.auc,
        n_pos=n_pos,
        n_neg=len(sample.negatives),
        n_comparisons=counts.n_comparisons,
        n_wins=counts.n_wins,
        n_ties=counts.n_ties,
        method=predictor,
        sample_meta=sample.meta,
        wall_time=wall_time,
        comparison=mode,
        n_isolated=scoring.n_isolated)
    logger.info(
        '%s on %s sample %s (seed %s): AUC %.4f in %.2fs',
        predictor.name, sample.mode, sample.label, sample.seed,
        report.auc, wall_time)
    return report


def evaluate_grid(
        g: Annotated[
                BipartiteGraph,
                Note('''The full graph the samples were drawn from. The
                    residual graph of each random-batch sample is rebuilt
                    from it.''')],
        samples: Sequence[EvalSample],
        predictors: Sequence[PredictorConfig],
        mode: ComparisonMode | None = None,
        *,
        workers: int = 1
        ) -> list[AucReport]:
    """Evaluates every (sample, predictor) combination, ordered by
    sample, then predictor. A failing cell is logged and reported with
    its error; the remaining cells still run.
    """
    if not samples or not predictors:
        raise InvalidConfig(
            'Grid needs at least one sample and one predictor',
            len(samples), len(predictors))
    if mode is None:
        mode = ComparisonMode()

    reports: list[AucReport] = []
    for sample in samples:
        scored_graph = g
        if sample.mode is SampleMode.RANDOM_BATCH:
            try:
                scored_graph = apply_sample(g, sample)
            except LinkpredException as exc:
                logger.exception(
                    'Cannot apply %s sample %s (seed %s); failing its %s '
                    + 'cells', sample.mode, sample.label, sample.seed,
                    len(predictors))
                reports.extend(
                    AucReport.failed(sample, predictor, mode, exc)
                    for predictor in predictors)
                continue

        for predictor in predictors:
            started = time.perf_counter()
            try:
                reports.append(evaluate_auc(
                    scored_graph, sample, predictor, mode, workers=workers))
            except LinkpredException as exc:
                logger.exception(
                    'Grid cell failed: %s on %s sample %s (seed %s)',
                    predictor.name, sample.mode, sample.label, sample.seed)
                reports.append(AucReport.failed(
                    sample, predictor, mode, exc,
                    time.perf_counter() - started))

    return reports
