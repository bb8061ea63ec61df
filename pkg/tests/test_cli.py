import csv
import io
import json

import pytest

from sievebfs import cli
from sievebfs.bitmap import nbytes_for
from sievebfs.codecs import parse_codec
from sievebfs.engine import AlgorithmKind, LevelRecord, RunReport, ValidationReport
from sievebfs.fabric import CostModelParams
from sievebfs.graphgen import GraphConfig, generate_kronecker, write_edge_list


def level(k, count, n):
    return LevelRecord(k, count, nbytes_for(n), 8 * count, 16, 0, [0], 0, 0, 0, {}, {})


def fake_report(levels, n):
    return RunReport(
        AlgorithmKind.BIT, None, 1, n, 0, levels, len(levels) - 1, [0], 0, 0, 0,
        None, None, 0, 1.0, 0.0, CostModelParams(),
    )


def test_frontier_table_two_vertices_in_huge_domain():
    n = 1 << 31
    rows = cli.frontier_table(fake_report([level(0, 1, n), level(1, 2, n), level(2, 0, n)], n))
    assert rows[1]["sparse_bytes"] == 16
    assert rows[2]["sparse_bytes"] == 0
    assert {r["bitmap_bytes"] for r in rows[:-1]} == {nbytes_for(n)}
    assert rows[-1] == {
        "level": "total",
        "vertices": 3,
        "bitmap_bytes": 3 * nbytes_for(n),
        "sparse_bytes": 24,
        "wah_bytes": 48,
    }


def run_cli(tmp_path, *args, name="report.json"):
    out = tmp_path / name
    code = cli.main([*args, "--out", str(out)])
    return code, out


def test_three_algorithms_agree_and_validate(tmp_path):
    code, out = run_cli(
        tmp_path, "--scale", "11", "--edgefactor", "16", "--ranks", "8",
        "--alg", "bit,wah,dir-wah", "--codec", "wah:64", "--seed", "7", "--source", "random:2",
    )
    assert code == cli.EXIT_OK
    doc = json.loads(out.read_text())
    reps = doc["reports"]
    assert [r["config"]["algorithm"] for r in reps] == ["bit"] * 2 + ["wah"] * 2 + ["dir-wah"] * 2
    assert all(r["validation"]["ok"] for r in reps)
    by_source = {}
    for r in reps:
        levels = [lvl["frontier_count"] for lvl in r["per_level"]]
        by_source.setdefault(r["config"]["source"], set()).add(tuple(levels))
    assert all(len(v) == 1 for v in by_source.values())
    timing = json.loads(cli.timing_path(out).read_text())
    assert len(timing) == 6 and all(t["teps"] > 0 for t in timing)
    assert "teps" not in reps[0]["totals"]


def test_graph_file_single_rank(tmp_path):
    path = tmp_path / "in.kronel"
    write_edge_list(path, generate_kronecker(GraphConfig(8, 8, seed=1)))
    code, out = run_cli(tmp_path, "--graph", str(path), "--ranks", "1", "--alg", "bit", "--source", "0")
    assert code == 0
    (rep,) = json.loads(out.read_text())["reports"]
    assert rep["config"]["ranks"] == 1
    assert rep["config"]["graph"] == str(path)
    assert rep["totals"]["volume_max_rank"] == 0


def test_export_graph_round_trip(tmp_path):
    exported = tmp_path / "g.kronel"
    code, first = run_cli(tmp_path, "--scale", "7", "--source", "1", "--alg", "wah", "--export-graph", str(exported))
    assert code == 0 and exported.exists()
    code, second = run_cli(tmp_path, "--graph", str(exported), "--source", "1", "--alg", "wah", name="b.json")
    a = json.loads(first.read_text())["reports"][0]
    b = json.loads(second.read_text())["reports"][0]
    assert a["per_level"] == b["per_level"]


def test_weak_scaling_sweep(tmp_path):
    code, out = run_cli(
        tmp_path, "--ranks", "1,2,4", "--scale-per-rank", "7", "--alg", "bit,dir-wah", "--source", "random:1"
    )
    assert code == 0
    weak = json.loads(out.read_text())["weak_scaling"]
    assert [(r["ranks"], r["scale"], r["algorithm"]) for r in weak] == [
        (1, 7, "bit"), (1, 7, "dir-wah"), (2, 8, "bit"), (2, 8, "dir-wah"), (4, 9, "bit"), (4, 9, "dir-wah"),
    ]
    assert weak[0]["volume_max_rank"] == 0
    assert all(r["bytes_per_rank_mean"] > 0 for r in weak[2:])


def test_reports_are_byte_identical_across_invocations(tmp_path):
    args = ["--scale", "9", "--ranks", "4", "--source", "random:3", "--reps", "2"]
    _, a = run_cli(tmp_path, *args, name="a.json")
    _, b = run_cli(tmp_path, *args, name="b.json")
    assert a.read_bytes() == b.read_bytes()
    reps = json.loads(a.read_text())["reports"]
    first = [r for r in reps if r["config"]["rep"] == 0]
    second = [r for r in reps if r["config"]["rep"] == 1]
    assert len(first) == len(second) == 9
    for x, y in zip(first, second):
        x["config"].pop("rep"), y["config"].pop("rep")
        assert x == y


def test_csv_mirrors_per_level_rows(tmp_path):
    code, out = run_cli(tmp_path, "--scale", "8", "--ranks", "2", "--source", "5", "--format", "csv", name="r.csv")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert set(r["algorithm"] for r in rows) == {"bit", "wah", "dir-wah"}
    assert all(int(r["sparse"]) == 8 * int(r["frontier_count"]) for r in rows)
    assert list(rows[0]) == cli.CSV_FIELDS


def test_stdout_when_no_out(capsys):
    assert cli.main(["--scale", "5", "--source", "0", "--alg", "bit"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["reports"][0]["config"]["n"] == 32


@pytest.mark.parametrize(
    "args",
    [
        ["--scale", "5", "--alg", "dfs"],
        ["--scale", "5", "--ranks", "0"],
        ["--scale", "5", "--codec", "lz4"],
        ["--scale", "5", "--source", "99"],
        ["--scale", "5", "--source", "random:x"],
        ["--scale", "5", "--reps", "0"],
        ["--scale", "5", "--ranks", "64"],
        ["--ranks", "3", "--scale-per-rank", "5"],
        ["--scale", "5", "--graph", "x.kronel"],
        [],
        ["--graph", "/nonexistent/in.kronel"],
        ["--scale", "0"],
        ["--scale", "5", "--alpha", "-1"],
    ],
)
def test_usage_and_io_errors_exit_one(args, capsys):
    with pytest.raises(SystemExit) as exc:
        code = cli.main(args)
        raise SystemExit(code)
    assert exc.value.code == cli.EXIT_USAGE


def test_validation_failure_exits_two(monkeypatch, tmp_path):
    monkeypatch.setattr(cli, "validate", lambda result, csr: ValidationReport(False, {"forced": [0]}))
    code, out = run_cli(tmp_path, "--scale", "5", "--source", "0", "--alg", "bit")
    assert code == cli.EXIT_INVALID
    assert json.loads(out.read_text())["reports"][0]["validation"]["ok"] is False


def test_random_sources_have_nonzero_degree():
    from sievebfs.graphgen import build_csr

    csr = build_csr(generate_kronecker(GraphConfig(9, 4, seed=2)))
    picked = cli.choose_sources("random:64", csr, seed=1)
    assert len(picked) == len(set(picked)) == 64
    assert all(csr.degrees()[s] > 0 for s in picked)
    assert picked == cli.choose_sources("random:64", csr, seed=1)
    assert len(cli.choose_sources("random", csr, seed=1)) == cli.DEFAULT_SOURCES


def test_spec_check_accepts_registered_codecs():
    spec = cli.RunSpec(scale=5, codec="rle")
    spec.check()
    assert parse_codec(spec.codec).codec_id == 3
