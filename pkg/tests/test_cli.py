import csv
import io
import json
import subprocess
import sys

import pytest

from amtgraph.cli import BENCH_COLUMNS, main, read_bench_csv, speedup_series


def bench_rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_generate_file_size(tmp_path):
    out = tmp_path / "g.bin"
    assert main(["generate", "--scale", "10", "--degree", "16", "--seed", "1", "--out", str(out)]) == 0
    assert out.stat().st_size == 16 + 16384 * 16


def test_generate_scale_zero(tmp_path):
    out = tmp_path / "g.bin"
    assert main(["generate", "--scale", "0", "--degree", "5", "--out", str(out)]) == 0
    assert out.stat().st_size == 16 + 5 * 16


def test_generate_missing_scale():
    proc = subprocess.run([sys.executable, "-m", "amtgraph", "generate", "--out", "x.bin"], capture_output=True, text=True)
    assert proc.returncode != 0
    assert "--scale" in proc.stderr


def test_bfs_json(capsys):
    assert main(["bfs", "--graph", "urand:8,8,2", "--localities", "2", "--verify", "--json"]) == 0
    cap = capsys.readouterr()
    out = json.loads(cap.out)
    assert out["verified"] is True
    assert sum(out["levels_histogram"]) == out["reached"] <= 256
    assert "verified: true" in cap.err


def test_pagerank_csv(capsys):
    assert main(["pagerank", "--graph", "urand:8,8,2", "--localities", "2", "--top-k", "3", "--verify"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "vertex,rank" and len(lines) == 4


def test_bench_nine_rows(capsys):
    assert main(["bench", "--algorithm", "bfs", "--graph", "urand:8,8,1", "--localities", "1,2,4", "--trials", "3"]) == 0
    rows = bench_rows(capsys.readouterr().out)
    assert len(rows) == 9
    assert list(rows[0]) == BENCH_COLUMNS


@pytest.mark.parametrize("alg", ["bfs", "pagerank"])
def test_bench_verify(capsys, alg):
    rc = main(["bench", "--algorithm", alg, "--graph", "urand:10,16,1", "--localities", "1,2", "--trials", "2", "--verify"])
    rows = bench_rows(capsys.readouterr().out)
    assert rc == 0
    assert {r["verified"] for r in rows} == {"true"}


def test_bench_then_plot(tmp_path, capsys):
    csv_path, png = tmp_path / "b.csv", tmp_path / "b.png"
    main(["bench", "--algorithm", "pagerank", "--graph", "urand:6,4,1", "--localities", "1,2",
          "--trials", "1", "--out", str(csv_path), "--plot", str(png)])
    assert png.stat().st_size > 0


def write_csv(path, rows, columns=BENCH_COLUMNS):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, columns, extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


def row(alg, L, t):
    return dict(algorithm=alg, graph="g", L=L, workers=1, transport="inproc", trial=0, wall_time_s=t, verified="", extra="")


def test_plot_single_row(tmp_path):
    p = tmp_path / "one.csv"
    write_csv(p, [row("bfs", 1, 0.5)])
    assert main(["plot", str(p), "--out", str(tmp_path / "one.png")]) == 0
    assert (tmp_path / "one.png").exists()


def test_plot_two_series(tmp_path):
    p = tmp_path / "two.csv"
    write_csv(p, [row("bfs", 1, 1.0), row("bfs", 2, 0.5), row("pagerank", 1, 2.0), row("pagerank", 2, 1.0)])
    with open(p) as fh:
        series = speedup_series(read_bench_csv(fh))
    assert len(series) == 2
    assert series[("bfs", "g")][1][2] == 2.0
    assert main(["plot", str(p), "--out", str(tmp_path / "two.png")]) == 0


def test_plot_missing_column(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    write_csv(p, [row("bfs", 1, 1.0)], [c for c in BENCH_COLUMNS if c != "wall_time_s"])
    assert main(["plot", str(p), "--out", str(tmp_path / "bad.png")]) != 0
    assert "wall_time_s" in capsys.readouterr().err


def test_bad_graph_path(capsys):
    assert main(["bfs", "--graph", "/nonexistent/graph.bin"]) == 1
    assert "error" in capsys.readouterr().err
