"""Table round-trips: repr-exact floats, metadata skipping, header checks."""

from __future__ import annotations

from datetime import date

import numpy as np
import pytest

from volprof.errors import DataError
from volprof.profiles import ImportanceRow
from volprof.sessions import VolunteerTimeline
from volprof.tables import (
    format_float,
    read_assignments_csv,
    read_metrics_csv,
    read_timelines_csv,
    read_truth_csv,
    write_assignments_csv,
    write_lines,
    write_metrics_csv,
    write_profiles_csv,
    write_timelines_csv,
)

META = {"command": "test", "seed": 0}


class TestFormatFloat:
    def test_repr_round_trips_exactly(self):
        values = [0.1, 1 / 3, 2.0 / 7.0, 1e-17, 123456.789]
        for value in values:
            assert float(format_float(value)) == value


class TestMetricsCsv:
    def test_round_trip_bit_exact(self, tmp_path):
        path = tmp_path / "metrics.csv"
        ids = ["a", "b", "c"]
        matrix = np.random.default_rng(0).uniform(0, 1, size=(3, 4))
        write_metrics_csv(path, ids, matrix, META)
        back_ids, back = read_metrics_csv(path)
        assert back_ids == ids
        assert np.array_equal(back, matrix)  # exact, not approx

    def test_metadata_lines_skipped(self, tmp_path):
        path = tmp_path / "metrics.csv"
        write_metrics_csv(path, ["a", "b"], np.zeros((2, 4)), META)
        content = path.read_text()
        assert content.startswith("# command: test\n# seed: 0\n")
        ids, _ = read_metrics_csv(path)
        assert ids == ["a", "b"]

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        write_lines(path, ["volunteer_id,a,b,c,d", "v,1,2,3,4"])
        with pytest.raises(DataError, match="expected header"):
            read_metrics_csv(path)

    def test_bad_row_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        write_lines(path, ["volunteer_id,a,d,r,v", "v,1,2,3"])
        with pytest.raises(DataError, match=":2:"):
            read_metrics_csv(path)

    def test_empty_table_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_lines(path, ["volunteer_id,a,d,r,v"])
        with pytest.raises(DataError, match="no metric rows"):
            read_metrics_csv(path)


class TestTimelinesCsv:
    def test_round_trip(self, tmp_path):
        timeline = VolunteerTimeline(
            volunteer_id="v1",
            join_date=date(2011, 2, 3),
            window_days=40,
            active_days=(date(2011, 2, 3), date(2011, 2, 7)),
            daily_hours=(0.25, 1.5),
            day_gaps=(4,),
            midnight_spillover_days=1,
        )
        path = tmp_path / "timelines.csv"
        write_timelines_csv(path, {"v1": timeline}, META)
        summaries = read_timelines_csv(path)
        summary = summaries["v1"]
        assert summary.join_date == date(2011, 2, 3)
        assert summary.window_days == 40
        assert summary.n_active_days == 2
        assert summary.devoted_hours == 1.75  # repr round trip is exact
        assert summary.total_devoted_hours == 1.75
        assert summary.midnight_spillover_days == 1


class TestAssignmentsCsv:
    def test_round_trip_sorted(self, tmp_path):
        path = tmp_path / "assignments.csv"
        write_assignments_csv(path, {"z": 2, "a": 0}, META)
        assignments = read_assignments_csv(path)
        assert assignments == {"a": 0, "z": 2}
        data = [l for l in path.read_text().splitlines() if not l.startswith("#")]
        assert data[1].startswith("a,")


class TestProfilesCsv:
    def test_totals_row_and_rule_escaping(self, tmp_path):
        rows = [
            ImportanceRow("hardworking", 3, 75.0, 30.0, 30.0),
            ImportanceRow("lasting", 1, 25.0, 70.0, 70.0),
        ]
        rules = {"hardworking": "largest a, among remaining", "lasting": "rest"}
        path = tmp_path / "profiles.csv"
        write_profiles_csv(path, rows, rules, META)
        data = [l for l in path.read_text().splitlines() if not l.startswith("#")]
        assert data[0].startswith("label,")
        assert data[1].split(",")[0] == "hardworking"
        # rule text must not smuggle extra delimiters into the table
        assert "largest a; among remaining" in data[1]
        total = data[-1].split(",")
        assert total[0] == "total"
        assert int(total[1]) == 4
        assert float(total[2]) == 100.0
        assert float(total[4]) == 100.0


class TestTruthCsv:
    def test_read(self, tmp_path):
        path = tmp_path / "truth.csv"
        write_lines(path, ["# seed: 1", "volunteer_id,archetype", "v1,lasting"])
        assert read_truth_csv(path) == {"v1": "lasting"}

    def test_missing_file_is_data_error(self, tmp_path):
        with pytest.raises(DataError, match="cannot read"):
            read_truth_csv(tmp_path / "none.csv")
