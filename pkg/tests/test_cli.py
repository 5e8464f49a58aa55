"""Job orchestration: config parsing, end-to-end runs, exit codes."""

import json

import numpy as np
import pytest

from emorb.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    ConfigError,
    JobSpec,
    _build_jobspec,
    compare_bases,
    main,
    parse_config_file,
    serialize_jobspec,
)
from emorb.basinhop import RunConfig
from emorb.mps import MPS


def test_parse_config_file(tmp_path):
    path = tmp_path / "job.cfg"
    path.write_text(
        "# dimer job\n"
        "hubbard = 2 1 1.0 4.0\n"
        "n_elec = 2   # inline comment\n"
        "D = 16\n"
        "\n"
    )
    values = parse_config_file(path)
    assert values == {"hubbard": "2 1 1.0 4.0", "nelec": "2", "d": "16"}


def test_parse_config_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("no equals sign here\n")
    with pytest.raises(ConfigError):
        parse_config_file(bad)
    bad.write_text("unknownkey = 3\n")
    with pytest.raises(ConfigError):
        parse_config_file(bad)


def test_jobspec_round_trip():
    j = JobSpec(
        hubbard=(4, 4, 1.0, 4.0, "periodic"),
        n_elec=16,
        run=RunConfig(d=100, n_max=7, seed=3, epsilon=2.5e-9),
        d_schedule=(100, 500, 1000),
        out="runs/x",
        ipr_samples=500,
    )
    back = _build_jobspec(parse_config_values(serialize_jobspec(j)))
    assert back == j


def parse_config_values(text):
    # reuse the file parser on in-memory text
    import tempfile

    with tempfile.NamedTemporaryFile("w", suffix=".cfg", delete=False) as fh:
        fh.write(text)
        name = fh.name
    return parse_config_file(name)


def test_jobspec_validation():
    with pytest.raises(ConfigError):
        JobSpec()  # no model source
    with pytest.raises(ConfigError):
        JobSpec(fcidump="x", hubbard=(2, 1, 1.0, 0.0, "open"))
    with pytest.raises(ConfigError):
        JobSpec(hubbard=(2, 1, 1.0, 0.0, "open"), d_schedule=(100, 50))


def test_dimer_job_end_to_end(tmp_path, capsys):
    cfg = tmp_path / "job.cfg"
    cfg.write_text(
        "hubbard = 2 1 1.0 4.0\n"
        "nelec = 2\n"
        "d = 8\n"
        "nmax = 2\n"
        "dschedule = 8\n"
        "iprsamples = 64\n"
        f"out = {tmp_path / 'run'}\n"
    )
    assert main(["--config", str(cfg)]) == 0
    summary = json.loads(capsys.readouterr().out.strip().split("\n")[-1])
    assert summary["status"] == "ok"
    assert np.isclose(summary["eMin"], 2.0 - 2.0 * np.sqrt(2.0), atol=1e-8)

    out = tmp_path / "run"
    scan = (out / "scan.csv").read_text().strip().split("\n")
    header = scan[0].split(",")
    row = dict(zip(header, scan[1].split(",")))
    assert np.isclose(float(row["e"]), 2.0 - 2.0 * np.sqrt(2.0), atol=1e-8)
    # 17 significant digits: CSV re-parse is bit-exact vs the summary
    assert float(row["e"]) == summary["scan"][0]["e"]
    trace = [
        json.loads(line)
        for line in (out / "trace.jsonl").read_text().strip().split("\n")
    ]
    assert [r["iteration"] for r in trace] == [0, 1, 2]
    u = np.loadtxt(out / "u_final.txt")
    assert np.max(np.abs(u.T @ u - np.eye(2))) < 1e-12
    m = MPS.open(out / "final.mps")
    assert m.n_sites == 2


def test_nmax_zero_is_passthrough_scan(tmp_path, capsys):
    code = main([
        "--hubbard", "2", "1", "--t", "1.0", "--u", "4.0",
        "--nelec", "2", "--d", "8", "--nmax", "0",
        "--dschedule", "8", "--iprsamples", "16",
        "--out", str(tmp_path),
    ])
    assert code == 0
    summary = json.loads(capsys.readouterr().out.strip().split("\n")[-1])
    trace = (tmp_path / "trace.jsonl").read_text().strip().split("\n")
    assert len(trace) == 1
    u = np.loadtxt(tmp_path / "u_final.txt")
    assert np.array_equal(u, np.eye(2))
    assert np.isclose(
        summary["scan"][0]["e"], 2.0 - 2.0 * np.sqrt(2.0), atol=1e-8
    )


def test_fixed_seed_reruns_are_identical(tmp_path):
    args = [
        "--hubbard", "2", "1", "--t", "1.0", "--u", "4.0",
        "--nelec", "2", "--d", "8", "--nmax", "3",
        "--dschedule", "8", "--iprsamples", "32", "--seed", "9",
    ]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    for name in ("trace.jsonl", "scan.csv", "u_final.txt", "layers.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "final.mps").read_bytes() == (b / "final.mps").read_bytes()


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("frobnicate = yes\n")
    assert main(["--config", str(bad)]) == EXIT_CONFIG
    assert main([]) == EXIT_CONFIG  # no model source at all
    capsys.readouterr()


def test_missing_fcidump_is_io_error(tmp_path, capsys):
    code = main([
        "--fcidump", str(tmp_path / "nope.fcidump"),
        "--nelec", "2", "--out", str(tmp_path),
    ])
    assert code == EXIT_IO
    capsys.readouterr()


def test_compare_bases_trivial_enhancement(tmp_path, capsys):
    j = JobSpec(
        hubbard=(2, 1, 1.0, 4.0, "open"),
        n_elec=2,
        run=RunConfig(d=8, n_max=0, seed=0),
        d_schedule=(8,),
        out=str(tmp_path),
        ipr_samples=32,
    )
    assert compare_bases(j, ("site", "initial")) == 0
    capsys.readouterr()
    lines = (tmp_path / "compare.csv").read_text().strip().split("\n")
    header = lines[0].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in lines[1:]]
    assert {r["basis"] for r in rows} == {"site", "initial"}
    for r in rows:
        assert np.isclose(float(r["enhancement"]), 1.0, atol=1e-8)


def test_compare_emo_requires_completed_run(tmp_path):
    j = JobSpec(
        hubbard=(2, 1, 1.0, 4.0, "open"),
        n_elec=2,
        run=RunConfig(d=8, n_max=0),
        d_schedule=(8,),
        out=str(tmp_path / "empty"),
    )
    with pytest.raises(FileNotFoundError):
        compare_bases(j, ("site", "emo"))
