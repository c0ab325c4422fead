import json
import math

from hyperparallel import report, trace

RECORDS = [
    {"rank": 1, "lane": "comm", "task": "b", "kind": "communication", "start": 0.002, "end": 0.004},
    {"rank": 0, "lane": "cube", "task": "a", "kind": "compute", "start": 0.0, "end": 0.003},
    {"rank": 0, "lane": "comm", "task": "c", "kind": "communication", "start": 0.0, "end": 0.001},
]


def test_ndjson_sorted_and_round_trips(tmp_path):
    text = trace.dumps_ndjson(RECORDS)
    lines = text.splitlines()
    assert [json.loads(l)["task"] for l in lines] == ["c", "a", "b"]
    assert list(json.loads(lines[0])) == list(trace.FIELDS)
    path = tmp_path / "t.ndjson"
    trace.write_ndjson(reversed(RECORDS), path)
    assert path.read_text() == text
    assert trace.read_ndjson(path) == sorted(RECORDS, key=lambda r: (r["rank"], r["start"], r["lane"]))


def test_chrome_events():
    doc = trace.to_chrome(RECORDS)
    ev = doc["traceEvents"][1]
    assert ev["ph"] == "X" and ev["pid"] == 0 and ev["tid"] == "cube"
    assert ev["ts"] == 0.0 and math.isclose(ev["dur"], 3000.0)


def test_report_envelope(tmp_path):
    f = tmp_path / "in.yaml"
    f.write_text("a: 1\n")
    rep = report.build_report("compare", {"x": math.inf, "t": (1, 2)}, {"cluster": f, "groups": None})
    assert rep["schema_version"] == report.SCHEMA_VERSION
    assert rep["tool"]["name"] == "hyperparallel"
    assert rep["inputs"] == {"cluster": report.file_digest(f)}
    assert rep["payload"] == {"x": None, "t": [1, 2]}
    assert "generated_at" in rep["metadata"]
    again = report.build_report("compare", {"x": math.inf, "t": (1, 2)}, {"cluster": f})
    again["metadata"]["generated_at"] = "later"
    assert report.comparable(rep) == report.comparable(again)
    assert "metadata" not in json.loads(report.comparable(rep))
    json.loads(report.dumps(rep))
