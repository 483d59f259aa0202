"""Parsing of raw check-in dumps (one tab-separated record per line)
into validated ``CheckIn`` values plus dataset-level statistics.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from collections.abc import Mapping
from dataclasses import asdict as dc_asdict
from dataclasses import dataclass
from dataclasses import fields as dc_fields
from datetime import UTC
from datetime import datetime
from enum import StrEnum
from pathlib import Path
from typing import Annotated
from typing import Any

from docnote import Note

from checkin_linkpred.exceptions import BadCoordinate
from checkin_linkpred.exceptions import BadTimestamp
from checkin_linkpred.exceptions import CheckinParseError
from checkin_linkpred.exceptions import InvalidConfig
from checkin_linkpred.exceptions import MalformedLine

logger = logging.getLogger(__name__)

# This is the layout used by the public check-in dumps, ex:
# Tue Apr 03 18:00:09 +0000 2012
_DUMP_TIME_FORMAT = '%a %b %d %H:%M:%S %z %Y'
_SEMANTIC_COLUMNS = (
    'user', 'venue', 'category', 'latitude', 'longitude', 'timestamp')


class OnError(StrEnum):
    SKIP = 'skip'
    ABORT = 'abort'


@dataclass(slots=True, frozen=True)
class CheckIn:
    """A single timestamped visit of a user to a venue. The venue's
    category and coordinates travel with every check-in, because that's
    how the dumps ship them.
    """
    user_id: str
    venue_id: str
    category: str
    latitude: float
    longitude: float
    timestamp: Annotated[
        float,
        Note('Seconds since the epoch, UTC.')]

    def __post_init__(self):
        if not self.user_id or not self.venue_id:
            raise MalformedLine('Empty user or venue id!', self)
        if not -90 <= self.latitude <= 90:  # noqa: PLR2004
            raise BadCoordinate('Latitude out of range', self.latitude)
        if not -180 <= self.longitude <= 180:  # noqa: PLR2004
            raise BadCoordinate('Longitude out of range', self.longitude)
        if not math.isfinite(self.timestamp) or self.timestamp < 0:
            raise BadTimestamp(
                'Timestamp must be finite and non-negative', self.timestamp)


@dataclass(slots=True, frozen=True)
class CheckinSchema:
    """Maps the six semantic check-in fields to (zero-based) column
    indices within a tab-separated line. Columns not named here (for
    example a category id or a timezone offset) are ignored.
    """
    user: int
    venue: int
    category: int
    latitude: int
    longitude: int
    timestamp: int
    n_columns: Annotated[
            int | None,
            Note('''The exact number of columns a line must have. Defaults
                to one more than the largest mapped index.''')
        ] = None

    def __post_init__(self):
        indices = [getattr(self, name) for name in _SEMANTIC_COLUMNS]
        if any(index < 0 for index in indices):
            raise InvalidConfig('Column indices must be >= 0', self)
        if len(set(indices)) != len(indices):
            raise InvalidConfig('Column indices must be distinct', self)
        if self.n_columns is None:
            # Doing it this way to bypass the frozen-ness
            object.__setattr__(self, 'n_columns', max(indices) + 1)
        elif self.n_columns <= max(indices):
            raise InvalidConfig(
                'n_columns must exceed every mapped column index', self)

    @property
    def width(self) -> int:
        # Always set by __post_init__; this just keeps the type checker
        # happy without an assert everywhere.
        return self.n_columns or 0

    @classmethod
    def from_mapping(
            cls,
            overrides: Mapping[str, Any],
            *,
            base: CheckinSchema | None = None
            ) -> CheckinSchema:
        """Applies the passed ``{field: column}`` overrides on top of
        ``base`` (default: ``DEFAULT_SCHEMA``). Unknown field names
        raise ``InvalidConfig``.
        """
        if base is None:
            base = DEFAULT_SCHEMA

        known = {field_obj.name for field_obj in dc_fields(cls)}
        unknown = set(overrides) - known
        if unknown:
            raise InvalidConfig('Unknown schema fields', sorted(unknown))
        if not all(
            isinstance(value, int) and not isinstance(value, bool)
            for value in overrides.values()
        ):
            raise InvalidConfig('Schema columns must be integers', overrides)

        params: dict[str, Any] = {
            name: getattr(base, name) for name in _SEMANTIC_COLUMNS}
        params['n_columns'] = base.n_columns
        params.update(overrides)
        # Remapping any column without restating the width means the width
        # has to be inferred again.
        if overrides and 'n_columns' not in overrides:
            params['n_columns'] = None

        try:
            return cls(**params)
        except TypeError as exc:
            raise InvalidConfig('Bad schema override', overrides) from exc


DEFAULT_SCHEMA: Annotated[
    CheckinSchema,
    Note('''The common check-in TSV layout: user, venue, category id,
        category name, latitude, longitude, timezone offset (minutes),
        UTC time.''')
] = CheckinSchema(
    user=0,
    venue=1,
    category=3,
    latitude=4,
    longitude=5,
    timestamp=7,
    n_columns=8)
IDENTITY_SCHEMA = CheckinSchema(
    user=0,
    venue=1,
    category=2,
    latitude=3,
    longitude=4,
    timestamp=5)


@dataclass(slots=True, frozen=True)
class DatasetStats:
    n_checkins: int
    n_users: int
    n_venues: int
    time_min: float | None
    time_max: float | None
    n_skipped: Annotated[
            int,
            Note('Malformed lines dropped while loading in skip mode.')
        ] = 0

    @classmethod
    def from_checkins(
            cls,
            checkins: Iterable[CheckIn],
            *,
            n_skipped: int = 0
            ) -> DatasetStats:
        n_checkins = 0
        users: set[str] = set()
        venues: set[str] = set()
        time_min: float | None = None
        time_max: float | None = None
        for checkin in checkins:
            n_checkins += 1
            users.add(checkin.user_id)
            venues.add(checkin.venue_id)
            if time_min is None or checkin.timestamp < time_min:
                time_min = checkin.timestamp
            if time_max is None or checkin.timestamp > time_max:
                time_max = checkin.timestamp

        return cls(
            n_checkins=n_checkins,
            n_users=len(users),
            n_venues=len(venues),
            time_min=time_min,
            time_max=time_max,
            n_skipped=n_skipped)

    def to_dict(self) -> dict[str, Any]:
        return dc_asdict(self)


def parse_timestamp(raw: str) -> float:
    """Converts a textual timestamp into UTC epoch seconds. Accepts
    plain (integer or decimal) epoch seconds, the dump format
    (``Tue Apr 03 18:00:09 +0000 2012``) and ISO-8601. Naive ISO times
    are taken to be UTC.
    """
    text = raw.strip()
    if not text:
        raise BadTimestamp('Empty timestamp')

    try:
        value = float(text)
    except ValueError:
        value = None

    if value is None:
        try:
            parsed = datetime.strptime(text, _DUMP_TIME_FORMAT)
        except ValueError:
            try:
                parsed = datetime.fromisoformat(text)
            except ValueError as exc:
                raise BadTimestamp('Unparseable timestamp', raw) from exc

        if parsed.tzinfo is None:
            parsed = parsed.replace(tzinfo=UTC)
        value = parsed.timestamp()

    if not math.isfinite(value) or value < 0:
        raise BadTimestamp(
            'Timestamp must be finite and non-negative', raw)

    return value


type TimeWindow = Annotated[
    tuple[float, float],
    Note('Half-open ``[start, end)`` in UTC epoch seconds.')]


def parse_window(raw: str) -> TimeWindow:
    """Parses ``START:END``, where both ends use any format accepted by
    ``parse_timestamp``. Since ISO times contain colons themselves,
    every colon is tried as the separator and the first split where
    both halves parse wins.
    """
    for position, char in enumerate(raw):
        if char != ':':
            continue
        try:
            start = parse_timestamp(raw[:position])
            end = parse_timestamp(raw[position + 1:])
        except BadTimestamp:
            continue
        return (start, end)

    raise BadTimestamp('Unparseable time window (want START:END)', raw)


def format_timestamp(timestamp: float) -> str:
    if timestamp.is_integer():
        return str(int(timestamp))
    return repr(timestamp)


def _parse_coordinate(raw: str, name: str) -> float:
    try:
        value = float(raw)
    except ValueError as exc:
        raise BadCoordinate(f'Non-numeric {name}', raw) from exc
    if not math.isfinite(value):
        raise BadCoordinate(f'Non-finite {name}', raw)
    return value


def parse_checkin_line(
        line: str,
        schema: CheckinSchema = DEFAULT_SCHEMA
        ) -> CheckIn:
    """Parses one tab-separated record. Raises ``MalformedLine`` for a
    wrong column count, ``BadCoordinate`` for out-of-range coordinates
    and ``BadTimestamp`` for an unparseable time.
    """
    columns = line.rstrip('\r\n').split('\t')
    if len(columns) != schema.width:
        raise MalformedLine(
            f'Expected {schema.width} columns, got {len(columns)}', line)

    return CheckIn(
        user_id=columns[schema.user],
        venue_id=columns[schema.venue],
        category=columns[schema.category],
        latitude=_parse_coordinate(columns[schema.latitude], 'latitude'),
        longitude=_parse_coordinate(columns[schema.longitude], 'longitude'),
        timestamp=parse_timestamp(columns[schema.timestamp]))


def format_checkin_line(
        checkin: CheckIn,
        schema: CheckinSchema = DEFAULT_SCHEMA
        ) -> str:
    """The inverse of ``parse_checkin_line``. Unmapped columns are left
    empty. Does not include a trailing newline.
    """
    columns = [''] * schema.width
    columns[schema.user] = checkin.user_id
    columns[schema.venue] = checkin.venue_id
    columns[schema.category] = checkin.category
    columns[schema.latitude] = repr(checkin.latitude)
    columns[schema.longitude] = repr(checkin.longitude)
    columns[schema.timestamp] = format_timestamp(checkin.timestamp)
    return '\t'.join(columns)


def load_dataset(
        path: str | Path,
        schema: CheckinSchema = DEFAULT_SCHEMA,
        on_error: Annotated[
                OnError,
                Note('''In skip mode, malformed lines are logged, counted
                    in ``DatasetStats.n_skipped`` and dropped. In abort
                    mode, the first parse error propagates with its
                    ``line_number`` set.''')
            ] = OnError.SKIP,
        *,
        encoding: str = 'utf-8'
        ) -> tuple[list[CheckIn], DatasetStats]:
    """Loads every check-in of a dump in file order. Blank lines are
    ignored. Undecodable bytes are replaced rather than failing the
    whole load.
    """
    on_error = OnError(on_error)
    checkins: list[CheckIn] = []
    n_skipped = 0

    logger.info('Loading check-ins from %s', path)
    with Path(path).open(encoding=encoding, errors='replace') as tsv_file:
        for line_number, line in enumerate(tsv_file, start=1):
            if not line.strip():
                continue

            try:
                checkins.append(parse_checkin_line(line, schema))
            except CheckinParseError as exc:
                if on_error is OnError.ABORT:
                    exc.line_number = line_number
                    exc.add_note(f'While parsing {path}:{line_number}')
                    raise exc

                n_skipped += 1
                logger.debug(
                    'Skipping malformed line %s: %r', line_number, exc)

    if n_skipped:
        logger.warning(
            'Skipped %s malformed lines while loading %s', n_skipped, path)

    stats = DatasetStats.from_checkins(checkins, n_skipped=n_skipped)
    logger.info(
        'Loaded %s check-ins (%s users, %s venues)',
        stats.n_checkins, stats.n_users, stats.n_venues)
    return checkins, stats
