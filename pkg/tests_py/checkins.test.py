from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from checkin_linkpred.checkins import DEFAULT_SCHEMA
from checkin_linkpred.checkins import IDENTITY_SCHEMA
from checkin_linkpred.checkins import CheckIn
from checkin_linkpred.checkins import CheckinSchema
from checkin_linkpred.checkins import DatasetStats
from checkin_linkpred.checkins import OnError
from checkin_linkpred.checkins import format_checkin_line
from checkin_linkpred.checkins import load_dataset
from checkin_linkpred.checkins import parse_checkin_line
from checkin_linkpred.checkins import parse_timestamp
from checkin_linkpred.checkins import parse_window
from checkin_linkpred.exceptions import BadCoordinate
from checkin_linkpred.exceptions import BadTimestamp
from checkin_linkpred.exceptions import CheckinParseError
from checkin_linkpred.exceptions import InvalidConfig
from checkin_linkpred.exceptions import MalformedLine

from checkin_linkpred_testutils.factories import random_checkins
from checkin_linkpred_testutils.fixtures import write_lines

_VALID_LINE = 'u1\tv1\tBar\t40.7\t-74.0\t1333478580'


class TestParseCheckinLine:

    def test_identity_schema(self):
        """A valid line parsed with the identity schema must map each
        column directly onto the check-in fields.
        """
        checkin = parse_checkin_line(_VALID_LINE, IDENTITY_SCHEMA)

        assert checkin == CheckIn(
            user_id='u1',
            venue_id='v1',
            category='Bar',
            latitude=40.7,
            longitude=-74.0,
            timestamp=1333478580.0)

    def test_default_schema(self):
        """The default schema must read the common 8-column dump
        layout, ignoring the category id and timezone columns.
        """
        line = '\t'.join((
            'u1', 'v1', '4bf58dd8', 'Bar', '40.7', '-74.0', '-240',
            'Tue Apr 03 18:00:09 +0000 2012'))

        checkin = parse_checkin_line(line, DEFAULT_SCHEMA)

        assert checkin.user_id == 'u1'
        assert checkin.venue_id == 'v1'
        assert checkin.category == 'Bar'
        assert checkin.timestamp == 1333476009.0

    def test_trailing_newline(self):
        """A trailing newline (either style) must not count as part of
        the last column.
        """
        assert parse_checkin_line(
            _VALID_LINE + '\r\n', IDENTITY_SCHEMA
        ).timestamp == 1333478580.0

    def test_bad_latitude(self):
        """An out-of-range latitude must raise BadCoordinate."""
        line = 'u1\tv1\tBar\t95.0\t-74.0\t1333478580'

        with pytest.raises(BadCoordinate):
            parse_checkin_line(line, IDENTITY_SCHEMA)

    def test_bad_longitude(self):
        """An out-of-range longitude must raise BadCoordinate."""
        line = 'u1\tv1\tBar\t40.0\t-181\t1333478580'

        with pytest.raises(BadCoordinate):
            parse_checkin_line(line, IDENTITY_SCHEMA)

    def test_non_numeric_coordinate(self):
        """A coordinate that isn't a number must raise BadCoordinate."""
        line = 'u1\tv1\tBar\tnorth\t-74.0\t1333478580'

        with pytest.raises(BadCoordinate):
            parse_checkin_line(line, IDENTITY_SCHEMA)

    def test_wrong_column_count(self):
        """A line with too few columns must raise MalformedLine."""
        with pytest.raises(MalformedLine):
            parse_checkin_line('u1\tv1\tBar', IDENTITY_SCHEMA)

    def test_empty_user(self):
        """An empty user id must raise MalformedLine."""
        with pytest.raises(MalformedLine):
            parse_checkin_line(
                '\tv1\tBar\t40.7\t-74.0\t1333478580', IDENTITY_SCHEMA)

    def test_bad_timestamp(self):
        """An unparseable timestamp must raise BadTimestamp."""
        with pytest.raises(BadTimestamp):
            parse_checkin_line(
                'u1\tv1\tBar\t40.7\t-74.0\tyesterday', IDENTITY_SCHEMA)

    def test_errors_are_parse_errors(self):
        """Every line-level error must be catchable as a
        CheckinParseError, and as a ValueError.
        """
        for line in (
            'u1',
            'u1\tv1\tBar\t95.0\t-74.0\t1',
            'u1\tv1\tBar\t40.0\t-74.0\tnever',
        ):
            with pytest.raises(CheckinParseError):
                parse_checkin_line(line, IDENTITY_SCHEMA)
            with pytest.raises(ValueError):
                parse_checkin_line(line, IDENTITY_SCHEMA)

    def test_round_trip(self):
        """Formatting a check-in and parsing it back must give an
        identical value, for both built-in schemas.
        """
        rng = np.random.default_rng(1)
        for schema in (IDENTITY_SCHEMA, DEFAULT_SCHEMA):
            for checkin in random_checkins(rng, 50):
                line = format_checkin_line(checkin, schema)
                assert parse_checkin_line(line, schema) == checkin


class TestParseTimestamp:

    def test_epoch_seconds(self):
        """Integer and decimal epoch seconds must parse as-is."""
        assert parse_timestamp('1333478580') == 1333478580.0
        assert parse_timestamp('1333478580.5') == 1333478580.5

    def test_dump_format(self):
        """The dump's textual time format must convert to UTC."""
        assert parse_timestamp(
            'Tue Apr 03 18:00:09 +0000 2012') == 1333476009.0

    def test_iso(self):
        """Naive ISO times must be taken as UTC; aware ones must
        respect their offset.
        """
        assert parse_timestamp('2012-04-03T18:00:09') == 1333476009.0
        assert parse_timestamp('2012-04-03T20:00:09+02:00') == 1333476009.0

    def test_negative(self):
        """Negative times must raise BadTimestamp."""
        with pytest.raises(BadTimestamp):
            parse_timestamp('-5')

    def test_non_finite(self):
        """Non-finite times must raise BadTimestamp."""
        with pytest.raises(BadTimestamp):
            parse_timestamp('inf')
        with pytest.raises(BadTimestamp):
            parse_timestamp('nan')


class TestParseWindow:

    def test_epoch(self):
        """An epoch-seconds window must split on its colon."""
        assert parse_window('10:20') == (10.0, 20.0)

    def test_iso(self):
        """ISO windows contain colons themselves, but must still split
        between the two times.
        """
        start, end = parse_window('2012-04-01T00:00:00:2012-05-01T00:00:00')

        assert start == parse_timestamp('2012-04-01T00:00:00')
        assert end == parse_timestamp('2012-05-01T00:00:00')

    def test_garbage(self):
        """A window without two parseable halves must raise
        BadTimestamp.
        """
        with pytest.raises(BadTimestamp):
            parse_window('last week')


class TestCheckinSchema:

    def test_inferred_width(self):
        """Without an explicit column count, the width must be one more
        than the largest mapped index.
        """
        assert IDENTITY_SCHEMA.width == 6

    def test_duplicate_columns(self):
        """Mapping two fields onto one column must raise
        InvalidConfig.
        """
        with pytest.raises(InvalidConfig):
            CheckinSchema(
                user=0, venue=0, category=2, latitude=3, longitude=4,
                timestamp=5)

    def test_from_mapping_overrides(self):
        """Overrides must apply on top of the default layout, and the
        width must be re-inferred.
        """
        schema = CheckinSchema.from_mapping({'timestamp': 9})

        assert schema.timestamp == 9
        assert schema.user == DEFAULT_SCHEMA.user
        assert schema.width == 10

    def test_from_mapping_unknown_key(self):
        """An unknown field name must raise InvalidConfig."""
        with pytest.raises(InvalidConfig):
            CheckinSchema.from_mapping({'rating': 3})


class TestLoadDataset:

    def test_empty_file(self, tmp_path: Path):
        """An empty file must load as no check-ins with zeroed stats."""
        path = write_lines(tmp_path / 'empty.tsv', [])

        checkins, stats = load_dataset(path, IDENTITY_SCHEMA)

        assert checkins == []
        assert stats.n_checkins == 0
        assert stats.n_users == 0
        assert stats.n_venues == 0
        assert stats.time_min is None
        assert stats.time_max is None

    def test_five_lines(self, tmp_path: Path):
        """A file of five valid lines must give five check-ins, in file
        order.
        """
        lines = [
            f'u{idx % 2}\tv{idx}\tBar\t40.7\t-74.0\t{1000 + idx}'
            for idx in range(5)]
        path = write_lines(tmp_path / 'five.tsv', lines)

        checkins, stats = load_dataset(path, IDENTITY_SCHEMA)

        assert [checkin.venue_id for checkin in checkins] == [
            'v0', 'v1', 'v2', 'v3', 'v4']
        assert stats.n_checkins == 5
        assert stats.n_users == 2
        assert stats.n_venues == 5
        assert stats.time_min == 1000
        assert stats.time_max == 1004

    def test_skip_mode(self, tmp_path: Path):
        """In skip mode, a malformed line must be dropped and
        counted.
        """
        path = write_lines(tmp_path / 'mixed.tsv', [
            _VALID_LINE,
            'u2\tv2\tCafe\t40.7\t-74.0\t1333478581',
            'u3\tv3\tGym\t95.0\t-74.0\t1333478582',
            'u4\tv4\tBar\t40.7\t-74.0\t1333478583'])

        checkins, stats = load_dataset(path, IDENTITY_SCHEMA, OnError.SKIP)

        assert len(checkins) == 3
        assert stats.n_checkins == 3
        assert stats.n_skipped == 1

    def test_abort_mode(self, tmp_path: Path):
        """In abort mode, the first parse error must propagate with its
        (1-based) line number.
        """
        path = write_lines(tmp_path / 'mixed.tsv', [
            _VALID_LINE,
            'u3\tv3\tGym\t95.0\t-74.0\t1333478582'])

        with pytest.raises(BadCoordinate) as exc_info:
            load_dataset(path, IDENTITY_SCHEMA, OnError.ABORT)

        assert exc_info.value.line_number == 2

    def test_blank_lines_ignored(self, tmp_path: Path):
        """Blank lines must neither parse nor count as skipped."""
        path = write_lines(tmp_path / 'blank.tsv', ['', _VALID_LINE, ''])

        checkins, stats = load_dataset(path, IDENTITY_SCHEMA)

        assert len(checkins) == 1
        assert stats.n_skipped == 0

    def test_duplicates_kept(self, tmp_path: Path):
        """Identical lines are distinct check-ins and must all be
        kept.
        """
        path = write_lines(tmp_path / 'dupes.tsv', [_VALID_LINE] * 3)

        checkins, stats = load_dataset(path, IDENTITY_SCHEMA)

        assert len(checkins) == 3
        assert stats.n_users == 1

    def test_skip_mode_never_fails(self, tmp_path: Path):
        """In skip mode, arbitrary text (including undecodable bytes)
        must load without raising, keeping only the parseable lines.
        """
        rng = np.random.default_rng(7)
        path = tmp_path / 'noise.tsv'
        noise = rng.integers(0, 256, size=4096, dtype=np.uint8).tobytes()
        path.write_bytes(noise + b'\n' + _VALID_LINE.encode() + b'\n')

        checkins, stats = load_dataset(path, IDENTITY_SCHEMA)

        assert checkins[-1].user_id == 'u1'
        assert stats.n_checkins == len(checkins)

    def test_stats_match_brute_force(self, tmp_path: Path):
        """Stats must equal the distinct id counts of the returned
        check-ins.
        """
        rng = np.random.default_rng(3)
        originals = random_checkins(rng, 40, n_users=7, n_venues=9)
        path = write_lines(
            tmp_path / 'random.tsv',
            (format_checkin_line(checkin, IDENTITY_SCHEMA)
             for checkin in originals))

        checkins, stats = load_dataset(path, IDENTITY_SCHEMA)

        assert checkins == originals
        assert stats == DatasetStats(
            n_checkins=40,
            n_users=len({checkin.user_id for checkin in originals}),
            n_venues=len({checkin.venue_id for checkin in originals}),
            time_min=min(checkin.timestamp for checkin in originals),
            time_max=max(checkin.timestamp for checkin in originals))
