"""Evaluation samples: sets of held-out connected (positive) user-venue
pairs, matched with unconnected (negative) pairs.

Random-batch samples remove every positive from the graph up front and
are scored against the resulting residual graph. Time-incremental
samples leave the graph alone; the evaluator removes and restores one
positive at a time.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from collections.abc import Sequence
from dataclasses import dataclass
from dataclasses import field
from enum import StrEnum
from pathlib import Path
from typing import Annotated
from typing import Any

import numpy as np
from docnote import Note

from checkin_linkpred.checkins import TimeWindow
from checkin_linkpred.checkins import format_timestamp
from checkin_linkpred.checkins import parse_window
from checkin_linkpred.exceptions import EmptyGraph
from checkin_linkpred.exceptions import EmptyWindow
from checkin_linkpred.exceptions import InvalidConfig
from checkin_linkpred.exceptions import InvalidWindow
from checkin_linkpred.exceptions import NotEnoughNegatives
from checkin_linkpred.exceptions import PairNotPresent
from checkin_linkpred.exceptions import SampleMismatch
from checkin_linkpred.exceptions import UnknownUser
from checkin_linkpred.exceptions import UnknownVenue
from checkin_linkpred.graph import BipartiteGraph

logger = logging.getLogger(__name__)

_SAMPLE_COLUMNS = ('label', 'user', 'venue', 'removed_count')
# Below this many unconnected pairs per requested negative, rejection
# sampling gets slow, so the unconnected pairs are enumerated instead.
_REJECTION_HEADROOM = 4


class SampleMode(StrEnum):
    RANDOM_BATCH = 'random-batch'
    TIME_INCREMENTAL = 'time-incremental'


class PairLabel(StrEnum):
    POSITIVE = 'positive'
    NEGATIVE = 'negative'


@dataclass(slots=True, frozen=True)
class EvalPair:
    user: str
    venue: str
    label: PairLabel
    removed_count: Annotated[
            int,
            Note('''Check-ins removed from the graph for this pair: its
                whole history for positives, 0 for negatives.''')
        ] = 0

    def __post_init__(self):
        # Doing it this way to bypass the frozen-ness
        object.__setattr__(self, 'label', PairLabel(self.label))
        if self.label is PairLabel.POSITIVE and self.removed_count < 1:
            raise ValueError(
                'Positive pairs must remove at least one check-in', self)
        if self.label is PairLabel.NEGATIVE and self.removed_count != 0:
            raise ValueError('Negative pairs never remove check-ins', self)

    @property
    def key(self) -> tuple[str, str]:
        return (self.user, self.venue)


@dataclass(slots=True, frozen=True)
class EvalSample:
    positives: tuple[EvalPair, ...]
    negatives: tuple[EvalPair, ...]
    mode: SampleMode
    seed: int
    fraction: Annotated[
            float | None,
            Note('''The sampled fraction of distinct connected pairs.
                Random-batch samples only.''')
        ] = None
    window: Annotated[
            TimeWindow | None,
            Note('Time-incremental samples only.')
        ] = None
    negative_ratio: Annotated[
            float,
            Note('''The requested ``|negatives| / |positives|``. The default
                of 1 gives matched sizes.''')
        ] = 1.0

    # Lookup for ``contains``; not part of the value.
    _keys: frozenset[tuple[str, str]] = field(
        init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'positives', tuple(self.positives))
        object.__setattr__(self, 'negatives', tuple(self.negatives))
        object.__setattr__(self, 'mode', SampleMode(self.mode))

        if any(pair.label is not PairLabel.POSITIVE
               for pair in self.positives):
            raise ValueError('Positive set contains a negative pair')
        if any(pair.label is not PairLabel.NEGATIVE
               for pair in self.negatives):
            raise ValueError('Negative set contains a positive pair')

        positive_keys = {pair.key for pair in self.positives}
        negative_keys = {pair.key for pair in self.negatives}
        if len(positive_keys) != len(self.positives):
            raise ValueError('Duplicate positive pairs')
        if len(negative_keys) != len(self.negatives):
            raise ValueError('Duplicate negative pairs')
        overlap = positive_keys & negative_keys
        if overlap:
            raise ValueError(
                'Positive and negative pairs must be disjoint',
                sorted(overlap))

        if self.mode is SampleMode.RANDOM_BATCH and self.fraction is None:
            raise ValueError('Random-batch samples need a fraction')
        if self.mode is SampleMode.TIME_INCREMENTAL and self.window is None:
            raise ValueError('Time-incremental samples need a window')

        object.__setattr__(
            self, '_keys', frozenset(positive_keys | negative_keys))

    @property
    def label(self) -> str:
        """``fraction_or_window`` as it appears in reports."""
        if self.mode is SampleMode.RANDOM_BATCH:
            return repr(self.fraction)
        return format_window(self.window)  # type: ignore[arg-type]

    @property
    def meta(self) -> dict[str, Any]:
        return {
            'mode': str(self.mode),
            'fraction_or_window': self.label,
            'seed': self.seed,
            'negative_ratio': self.negative_ratio,
        }

    def contains(self, user: str, venue: str) -> bool:
        return (user, venue) in self._keys


def format_window(window: TimeWindow) -> str:
    start, end = window
    return f'{format_timestamp(start)}:{format_timestamp(end)}'


def _n_negatives(n_positives: int, negative_ratio: float) -> int:
    return math.floor(negative_ratio * n_positives + 0.5)


def _check_negative_ratio(negative_ratio: float):
    if not math.isfinite(negative_ratio) or negative_ratio < 0:
        raise InvalidConfig(
            'negative_ratio must be finite and >= 0', negative_ratio)


def _draw_negatives(
        g: BipartiteGraph,
        n_negatives: int,
        rng: np.random.Generator
        ) -> list[tuple[int, int]]:
    """Draws distinct unconnected ``(user_idx, venue_idx)`` pairs,
    uniformly. The result is sorted by index.
    """
    if not n_negatives:
        return []

    n_unconnected = g.n_users * g.n_venues - g.n_pairs
    if n_unconnected < n_negatives:
        raise NotEnoughNegatives(
            'Graph has too few unconnected pairs',
            n_unconnected, n_negatives)

    if n_unconnected < _REJECTION_HEADROOM * n_negatives:
        unconnected = [
            (user_idx, venue_idx)
            for user_idx in range(g.n_users)
            for venue_idx in range(g.n_venues)
            if (user_idx, venue_idx) not in g.pair_counts]
        chosen = rng.choice(len(unconnected), n_negatives, replace=False)
        return sorted(unconnected[idx] for idx in chosen)

    drawn: set[tuple[int, int]] = set()
    while len(drawn) < n_negatives:
        batch_size = 2 * (n_negatives - len(drawn))
        user_draws = rng.integers(g.n_users, size=batch_size)
        venue_draws = rng.integers(g.n_venues, size=batch_size)
        for user_idx, venue_idx in zip(
                user_draws.tolist(), venue_draws.tolist(), strict=True):
            key = (user_idx, venue_idx)
            if key in g.pair_counts or key in drawn:
                continue
            drawn.add(key)
            if len(drawn) == n_negatives:
                break

    return sorted(drawn)


def _negative_pairs(
        g: BipartiteGraph,
        keys: Sequence[tuple[int, int]]
        ) -> tuple[EvalPair, ...]:
    return tuple(
        EvalPair(
            user=g.users[user_idx],
            venue=g.venues[venue_idx],
            label=PairLabel.NEGATIVE)
        for user_idx, venue_idx in keys)


def sample_random(
        g: BipartiteGraph,
        fraction: Annotated[
                float,
                Note('Fraction of distinct connected pairs, in (0, 1].')],
        seed: int,
        *,
        negative_ratio: float = 1.0
        ) -> tuple[EvalSample, BipartiteGraph]:
    """Holds out ``max(1, round(fraction * pairs))`` distinct connected
    pairs, chosen uniformly without replacement, and returns the sample
    along with the residual graph (a copy of ``g`` with every check-in
    of every positive removed). ``g`` itself is not modified.

    Positives are a prefix of a seeded permutation of the pairs, so for
    a fixed seed, the positives at a smaller fraction are always a
    subset of the positives at a larger one.
    """
    if not 0 < fraction <= 1:
        raise InvalidConfig('fraction must be in (0, 1]', fraction)
    _check_negative_ratio(negative_ratio)
    if not g.n_pairs:
        raise EmptyGraph('Cannot sample positives from an edgeless graph')

    positive_seq, negative_seq = np.random.SeedSequence(seed).spawn(2)
    pairs = sorted(g.pair_counts)
    n_positives = max(1, math.floor(fraction * len(pairs) + 0.5))
    permutation = np.random.default_rng(positive_seq).permutation(len(pairs))
    positive_keys = sorted(pairs[idx] for idx in permutation[:n_positives])

    negative_keys = _draw_negatives(
        g,
        _n_negatives(n_positives, negative_ratio),
        np.random.default_rng(negative_seq))

    residual = g.copy()
    positives: list[EvalPair] = []
    for user_idx, venue_idx in positive_keys:
        record = residual.remove_pair(g.users[user_idx], g.venues[venue_idx])
        positives.append(EvalPair(
            user=record.user,
            venue=record.venue,
            label=PairLabel.POSITIVE,
            removed_count=record.count))

    sample = EvalSample(
        positives=tuple(positives),
        negatives=_negative_pairs(g, negative_keys),
        mode=SampleMode.RANDOM_BATCH,
        seed=seed,
        fraction=fraction,
        negative_ratio=negative_ratio)
    logger.info(
        'Random sample (fraction=%s, seed=%s): %s positives, %s negatives, '
        + '%s of %s check-ins left',
        fraction, seed, len(sample.positives), len(sample.negatives),
        residual.n_checkins, g.n_checkins)
    return sample, residual


def sample_time(
        g: BipartiteGraph,
        window: TimeWindow,
        seed: int,
        *,
        max_positives: Annotated[
                int | None,
                Note('''If set, positives are down-sampled uniformly to at
                    most this many pairs.''')
            ] = None,
        negative_ratio: float = 1.0
        ) -> EvalSample:
    """Positives are the distinct pairs with at least one check-in in
    ``[start, end)``. Each positive will have its entire check-in
    history (not just the in-window part) removed while it is scored.
    The graph is not modified.
    """
    start, end = window
    if not start < end:
        raise InvalidWindow('Window start must precede its end', window)
    if max_positives is not None and max_positives < 1:
        raise InvalidConfig('max_positives must be >= 1', max_positives)
    _check_negative_ratio(negative_ratio)

    positive_keys = sorted(
        key for key, times in g.checkin_times.items()
        if any(start <= timestamp < end for timestamp in times))
    if not positive_keys:
        raise EmptyWindow('No check-ins inside the window', window)

    positive_seq, negative_seq = np.random.SeedSequence(seed).spawn(2)
    if max_positives is not None and len(positive_keys) > max_positives:
        chosen = np.random.default_rng(positive_seq).choice(
            len(positive_keys), max_positives, replace=False)
        positive_keys = sorted(positive_keys[idx] for idx in chosen)

    negative_keys = _draw_negatives(
        g,
        _n_negatives(len(positive_keys), negative_ratio),
        np.random.default_rng(negative_seq))

    sample = EvalSample(
        positives=tuple(
            EvalPair(
                user=g.users[user_idx],
                venue=g.venues[venue_idx],
                label=PairLabel.POSITIVE,
                removed_count=g.pair_counts[(user_idx, venue_idx)])
            for user_idx, venue_idx in positive_keys),
        negatives=_negative_pairs(g, negative_keys),
        mode=SampleMode.TIME_INCREMENTAL,
        seed=seed,
        window=(start, end),
        negative_ratio=negative_ratio)
    logger.info(
        'Time sample (window=%s, seed=%s): %s positives, %s negatives',
        sample.label, seed, len(sample.positives), len(sample.negatives))
    return sample


def derive_seeds(seed: int, count: int) -> list[int]:
    """Independent child seeds, deterministic given ``seed``."""
    return [
        int(child.generate_state(1)[0])
        for child in np.random.SeedSequence(seed).spawn(count)]


def residual_checkin_curve(
        g: BipartiteGraph,
        fractions: Sequence[float],
        seed: int,
        *,
        nested: Annotated[
                bool,
                Note('''Reuse the same seed for every fraction, so that
                    each positive set contains those of all smaller
                    fractions and the curve is monotone. Otherwise every
                    fraction gets an independent seed derived from
                    ``seed``.''')
            ] = False
        ) -> list[tuple[float, int]]:
    """For every fraction, the number of check-ins left in the residual
    graph of a random sample at that fraction.
    """
    if not fractions:
        raise InvalidConfig('Need at least one fraction')

    if nested:
        seeds = [seed] * len(fractions)
    else:
        seeds = derive_seeds(seed, len(fractions))

    curve: list[tuple[float, int]] = []
    for fraction, fraction_seed in zip(fractions, seeds, strict=True):
        _, residual = sample_random(
            g, fraction, fraction_seed, negative_ratio=0)
        curve.append((fraction, residual.n_checkins))

    return curve


def apply_sample(g: BipartiteGraph, sample: EvalSample) -> BipartiteGraph:
    """Rebuilds the residual graph of a random-batch sample from the
    graph it was drawn from. Raises ``SampleMismatch`` if ``g`` isn't
    that graph.
    """
    if sample.mode is not SampleMode.RANDOM_BATCH:
        raise SampleMismatch(
            'Only random-batch samples have a residual graph', sample.mode)

    residual = g.copy()
    for pair in sample.positives:
        try:
            record = residual.remove_pair(pair.user, pair.venue)
        except (PairNotPresent, UnknownUser, UnknownVenue) as exc:
            raise SampleMismatch(
                'Held-out pair is not in the graph', pair.key) from exc

        if record.count != pair.removed_count:
            raise SampleMismatch(
                'Sample does not match the graph', pair.key, record.count)
    return residual


def iter_sample_lines(sample: EvalSample) -> Iterator[str]:
    yield f'# mode\t{sample.mode}'
    if sample.fraction is not None:
        yield f'# fraction\t{sample.fraction!r}'
    if sample.window is not None:
        yield f'# window\t{format_window(sample.window)}'
    yield f'# seed\t{sample.seed}'
    yield f'# negative_ratio\t{sample.negative_ratio!r}'
    yield '\t'.join(_SAMPLE_COLUMNS)
    for pair in (*sample.positives, *sample.negatives):
        yield '\t'.join(
            (str(pair.label), pair.user, pair.venue, str(pair.removed_count)))


def write_sample(sample: EvalSample, path: str | Path) -> None:
    with Path(path).open('w', encoding='utf-8', newline='') as tsv_file:
        for line in iter_sample_lines(sample):
            tsv_file.write(line)
            tsv_file.write('\n')


def read_sample(path: str | Path) -> EvalSample:
    """Loads a sample written by ``write_sample``."""
    header: dict[str, str] = {}
    positives: list[EvalPair] = []
    negatives: list[EvalPair] = []

    with Path(path).open(encoding='utf-8') as tsv_file:
        for line_number, line in enumerate(tsv_file, start=1):
            line = line.rstrip('\r\n')  # noqa: PLW2901
            if not line:
                continue
            if line.startswith('# '):
                key, _, value = line[2:].partition('\t')
                header[key] = value
                continue

            columns = line.split('\t')
            if tuple(columns) == _SAMPLE_COLUMNS:
                continue
            if len(columns) != len(_SAMPLE_COLUMNS):
                raise ValueError(
                    'Sample rows need 4 columns', path, line_number)

            label, user, venue, removed_count = columns
            pair = EvalPair(
                user=user,
                venue=venue,
                label=PairLabel(label),
                removed_count=int(removed_count))
            if pair.label is PairLabel.POSITIVE:
                positives.append(pair)
            else:
                negatives.append(pair)

    if 'mode' not in header or 'seed' not in header:
        raise ValueError(
            'Sample file is missing its mode or seed header', path)

    fraction = header.get('fraction')
    window = header.get('window')
    return EvalSample(
        positives=tuple(positives),
        negatives=tuple(negatives),
        mode=SampleMode(header['mode']),
        seed=int(header['seed']),
        fraction=None if fraction is None else float(fraction),
        window=None if window is None else parse_window(window),
        negative_ratio=float(header.get('negative_ratio', '1.0')))
