import io
from datetime import datetime, timedelta

import numpy as np
import pytest

from conftest import smooth_km, sp3_lines
from hahnfit.sp3 import (
    InsufficientCoverage,
    MalformedEpochLine,
    MalformedHeader,
    UnknownVersion,
    assemble_window,
    find_sp3_files,
    format_position_line,
    parse_sp3,
)


class TestParse:
    def test_day_fixture_counts(self, sp3_day_text):
        sp3 = parse_sp3(io.StringIO(sp3_day_text))
        assert sp3.header.version == "c"
        assert sp3.header.epoch_count == 96
        assert sp3.header.interval_s == 900.0
        assert sp3.header.satellites == ("G01", "G08")
        assert sp3.header.time_system == "GPS"
        assert len(sp3.records) == 96 * 2
        assert not sp3.issues
        # independent line count: one P line per declared satellite per epoch
        p_lines = [l for l in sp3_day_text.splitlines() if l.startswith("P")]
        assert len(sp3.records) == len(p_lines)

    def test_empty_input_malformed(self):
        with pytest.raises(MalformedHeader):
            parse_sp3(io.StringIO(""))

    def test_unknown_version(self):
        with pytest.raises(UnknownVersion):
            parse_sp3(io.StringIO("#aP2010  1  2  0  0  0.00000000      96 ORBIT\n"))

    def test_sp3d_accepted(self):
        text = "\n".join(
            sp3_lines(datetime(2010, 1, 2), 4, ["G01"], smooth_km, version="d")
        )
        sp3 = parse_sp3(io.StringIO(text))
        assert sp3.header.version == "d"
        assert len(sp3.records) == 4

    def test_bad_epoch_line_fatal(self, sp3_day_text):
        broken = sp3_day_text.replace("*  2010  1  2  0 15", "*  2010 xx  2  0 15", 1)
        with pytest.raises(MalformedEpochLine):
            parse_sp3(io.StringIO(broken))

    def test_bad_sentinel_flagged_not_dropped(self):
        lines = sp3_lines(datetime(2010, 1, 2), 4, ["G01"], smooth_km,
                          bad={(2, "G01")})
        sp3 = parse_sp3(io.StringIO("\n".join(lines)))
        assert len(sp3.records) == 4
        flagged = [r for r in sp3.records if r.bad_position]
        assert len(flagged) == 1
        assert flagged[0].epoch == datetime(2010, 1, 2, 0, 30)

    def test_garbled_position_line_collected(self, sp3_day_text):
        broken = sp3_day_text.replace("PG08", "PG8x", 1)
        sp3 = parse_sp3(io.StringIO(broken))
        assert len(sp3.issues) == 1
        assert len(sp3.records) == 96 * 2 - 1

    def test_velocity_records_skipped(self):
        lines = sp3_lines(datetime(2010, 1, 2), 2, ["G01"], smooth_km)
        with_v = []
        for line in lines:
            with_v.append(line)
            if line.startswith("PG01"):
                with_v.append("VG01  -1234.5678      0.1      0.2      0.3")
        sp3 = parse_sp3(io.StringIO("\n".join(with_v)))
        assert len(sp3.records) == 2

    def test_values_parsed_exactly_as_printed(self, sp3_day_text):
        sp3 = parse_sp3(io.StringIO(sp3_day_text))
        p_lines = [l for l in sp3_day_text.splitlines() if l.startswith("P")]
        for record, line in zip(sp3.records, p_lines):
            assert record.x == float(line[4:18])
            assert record.y == float(line[18:32])
            assert record.z == float(line[32:46])

    def test_round_trip_byte_exact(self, sp3_day_text):
        sp3 = parse_sp3(io.StringIO(sp3_day_text))
        p_lines = [l for l in sp3_day_text.splitlines() if l.startswith("P")]
        for record, line in zip(sp3.records, p_lines):
            assert format_position_line(record) == line


class TestDirectoryScan:
    def test_pattern_filtering(self, tmp_path, sp3_day_text):
        (tmp_path / "igs001.sp3").write_text(sp3_day_text)
        (tmp_path / "igs002.sp3").write_text(sp3_day_text)
        (tmp_path / "readme.txt").write_text("no")
        found = find_sp3_files(tmp_path)
        assert [p.name for p in found] == ["igs001.sp3", "igs002.sp3"]
        assert find_sp3_files(tmp_path, "igs002*") == [tmp_path / "igs002.sp3"]


def make_files(n_days, bad=(), start=datetime(2010, 1, 1)):
    files = []
    for day in range(n_days):
        day_start = start + timedelta(days=day)
        day_bad = {(i - day * 96, s) for i, s in bad if day * 96 <= i < (day + 1) * 96}
        text = "\n".join(
            sp3_lines(day_start, 96, ["G01", "G08"],
                      lambda s, c, i, d=day: smooth_km(s, c, d * 96 + i), bad=day_bad)
        )
        files.append(parse_sp3(io.StringIO(text)))
    return files


class TestAssembleWindow:
    def test_four_complete_days(self):
        files = make_files(4)
        series, lattice = assemble_window(files, "G08", "X", datetime(2010, 1, 1), 4)
        assert len(series.values) == 384
        assert lattice.kind == "equidistant"
        assert lattice.n_points == 384
        assert series.gaps == ()
        assert series.epochs[0] == datetime(2010, 1, 1)
        assert series.epochs[-1] == datetime(2010, 1, 4, 23, 45)
        assert np.allclose(np.diff(lattice.points), 900.0)

    def test_missing_epoch_perturbs_lattice(self):
        files = make_files(4, bad={(100, "G01")})
        series, lattice = assemble_window(files, "G01", "X", datetime(2010, 1, 1), 4)
        assert len(series.values) == 383
        assert series.gaps == (100,)
        assert lattice.kind == "perturbed"

    def test_zero_day_request_rejected(self):
        files = make_files(1)
        with pytest.raises(ValueError):
            assemble_window(files, "G01", "X", datetime(2010, 1, 1), 0)

    def test_mid_day_window_start(self):
        files = make_files(3)
        series, lattice = assemble_window(
            files, "G01", "X", datetime(2010, 1, 1, 12, 0), 2
        )
        assert len(series.values) == 192
        assert series.epochs[0] == datetime(2010, 1, 1, 12, 0)

    def test_insufficient_coverage(self):
        files = make_files(2)
        with pytest.raises(InsufficientCoverage):
            assemble_window(files, "G01", "X", datetime(2010, 1, 1), 4)

    def test_file_order_does_not_matter(self):
        files = make_files(4)
        fwd, _ = assemble_window(files, "G08", "Y", datetime(2010, 1, 1), 4)
        rev, _ = assemble_window(files[::-1], "G08", "Y", datetime(2010, 1, 1), 4)
        assert np.array_equal(fwd.values, rev.values)
        assert fwd.epochs == rev.epochs

    def test_duplicate_midnight_later_file_wins(self):
        start = datetime(2010, 1, 1)
        early = sp3_lines(start, 97, ["G01"], lambda s, c, i: 1000.0 + i)
        late = sp3_lines(start + timedelta(days=1), 96, ["G01"],
                         lambda s, c, i: 5000.0 + i)
        files = [parse_sp3(io.StringIO("\n".join(early))),
                 parse_sp3(io.StringIO("\n".join(late)))]
        series, _ = assemble_window(files, "G01", "X", start, 2)
        # epoch 96 is midnight of day 2, present in both files
        assert series.values[96] == 5000.0
        assert series.shadows == ((96, 1096.0),)

    def test_provenance_in_debug_mode(self):
        files = make_files(1)
        series, _ = assemble_window(
            files, "G01", "X", datetime(2010, 1, 1), 1, debug=True
        )
        assert series.provenance is not None
        assert len(series.provenance) == 96
        line_nos = {ln for _, ln in series.provenance}
        assert len(line_nos) == 96  # every value traces to a distinct input line

    def test_bad_positions_become_gaps(self):
        files = make_files(1, bad={(10, "G01")})
        series, lattice = assemble_window(files, "G01", "X", datetime(2010, 1, 1), 1)
        assert series.gaps == (10,)
        assert len(series.values) == 95
