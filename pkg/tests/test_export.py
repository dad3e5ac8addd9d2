import io
import json

import pytest

from wandertrack.analytics import WanderEpisode
from wandertrack.export import (
    read_trajectory_csv,
    trajectories_from_records,
    trajectory_header,
    write_episode_csv,
    write_geojson,
    write_trajectory_csv,
)
from wandertrack.tracking import TrajectoryLogRecord


def record(tag="T1", t_ms=0, x=1.2345678901234, y=-2.5, vx=0.1, vy=-0.25, trace=52.0, n=7, coast=False):
    return TrajectoryLogRecord(tag, t_ms, x, y, vx, vy, trace, n, coast)


class TestTrajectoryCsv:
    def test_single_record_is_two_lines(self):
        out = io.StringIO()
        write_trajectory_csv([record()], out)
        lines = out.getvalue().splitlines()
        assert len(lines) == 2
        assert lines[0] == "tag_id,t_ms,x_m,y_m,vx_mps,vy_mps,p_trace,n_anchors_used,coast_flag"

    def test_header_field_order(self):
        assert trajectory_header().split(",") == [
            "tag_id", "t_ms", "x_m", "y_m", "vx_mps", "vy_mps",
            "p_trace", "n_anchors_used", "coast_flag",
        ]

    def test_round_trip_identity(self):
        records = [
            record(t_ms=k * 1000, x=k * 0.770000001, y=3.0 / (k + 1), coast=(k == 2))
            for k in range(5)
        ]
        out = io.StringIO()
        write_trajectory_csv(records, out)
        back = read_trajectory_csv(io.StringIO(out.getvalue()))
        assert back == records

    def test_truncated_file_parses_complete_rows(self):
        out = io.StringIO()
        write_trajectory_csv([record(t_ms=0), record(t_ms=1000)], out)
        full = out.getvalue()
        cut = full[: full.rindex("T1")]  # chop the last row mid-record boundary
        back = read_trajectory_csv(io.StringIO(cut))
        assert len(back) == 1 and back[0].t_ms == 0


class TestGeojson:
    def test_two_tags_two_features(self):
        records = [record(tag="T1"), record(tag="T1", t_ms=1000, x=2.0), record(tag="T2", y=9.0)]
        out = io.StringIO()
        write_geojson(records, out)
        doc = json.loads(out.getvalue())
        assert doc["type"] == "FeatureCollection"
        assert len(doc["features"]) == 2

    def test_linestring_with_timestamps(self):
        records = [record(t_ms=0, x=1.0, y=2.0), record(t_ms=1000, x=3.0, y=4.0)]
        out = io.StringIO()
        write_geojson(records, out)
        feature = json.loads(out.getvalue())["features"][0]
        assert feature["geometry"]["type"] == "LineString"
        assert feature["geometry"]["coordinates"] == [[1.0, 2.0], [3.0, 4.0]]
        assert feature["properties"]["t_ms"] == [0, 1000]
        assert feature["properties"]["tag_id"] == "T1"

    def test_single_record_degrades_to_point(self):
        out = io.StringIO()
        write_geojson([record(x=5.0, y=6.0)], out)
        feature = json.loads(out.getvalue())["features"][0]
        assert feature["geometry"] == {"type": "Point", "coordinates": [5.0, 6.0]}


class TestEpisodeCsv:
    def test_iso_8601_times(self):
        episode = WanderEpisode("T1", 60.0, 660.0, 400.0, 7.1, 0.667)
        out = io.StringIO()
        write_episode_csv([episode], out)
        lines = out.getvalue().splitlines()
        assert lines[0] == "tag_id,start,end,distance_m,extent_m,mean_speed_mps"
        assert lines[1] == "T1,1970-01-01T00:01:00+00:00,1970-01-01T00:11:00+00:00,400.00,7.10,0.667"


class TestTrajectoriesFromRecords:
    def test_groups_and_sorts(self):
        records = [
            record(tag="T2", t_ms=2000, x=9.0),
            record(tag="T1", t_ms=1000, x=1.0),
            record(tag="T1", t_ms=0, x=0.0),
        ]
        trajectories = trajectories_from_records(records)
        assert set(trajectories) == {"T1", "T2"}
        assert [p[0] for p in trajectories["T1"].points] == [0.0, 1.0]
        assert trajectories["T1"].points[0][1] == 0.0
