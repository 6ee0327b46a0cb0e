import numpy as np
import pytest

from hocov.cli import main
from hocov.sweep import (
    SweepConfig,
    config_from_file,
    convergence_check,
    emit_plot_data,
    load_config,
    read_csv,
    run_sweep,
    write_csv,
)

TINY = dict(k=1, l=2, alpha_p=1.0, dims=(12, 6, 11), xi_max=0.06,
            xi_step=0.03, hierarchy=(1, 2))


def tiny_config(**kw):
    merged = {**TINY, **kw}
    return SweepConfig(**merged)


def write_tiny_cfg(path, **kw):
    merged = {**TINY, **kw}
    lines = []
    for key, value in merged.items():
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def test_sweep_rows_and_zero_point():
    result = run_sweep(tiny_config())
    assert len(result.rows) == 3 * 2
    assert result.clean
    for row in result.rows:
        assert row.truncation_flag == "ok"
        if row.xi == 0.0:
            assert row.verdict == "boundary"
            assert abs(row.nu_minus) < 1e-8
        else:
            assert row.verdict == "entangled"
            assert row.nu_minus < 0
            assert row.ineq8 < 0
        assert row.nz is None
    by_n = {n: [r for r in result.rows if r.n == n] for n in (1, 2)}
    assert [r.xi for r in by_n[1]] == [r.xi for r in by_n[2]]


def test_sweep_with_nz_column():
    result = run_sweep(tiny_config(with_nz=True))
    for row in result.rows:
        if row.n == 1:
            assert row.nz is not None
        else:
            assert row.nz is None
    # the zero-variance comparator starts at zero and goes negative
    nz = [r.nz for r in result.rows if r.n == 1]
    assert abs(nz[0]) < 1e-12
    assert nz[-1] < 0


def test_workers_match_serial():
    serial = run_sweep(tiny_config())
    threaded = run_sweep(tiny_config(workers=2))
    for a, b in zip(serial.rows, threaded.rows):
        assert a == b


def test_csv_determinism_and_roundtrip(tmp_path):
    result = run_sweep(tiny_config(), keep_states=False)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(result, str(p1))
    write_csv(result, str(p2))
    assert p1.read_bytes() == p2.read_bytes()

    text = p1.read_text(encoding="utf-8")
    lines = text.splitlines()
    assert lines[0].startswith("# higher-order covariance sweep")
    assert "k=1 l=2" in lines[1]
    assert lines[2].startswith("n,k,l,xi,nu_minus")

    rows = read_csv(str(p1))
    assert len(rows) == len(result.rows)
    for got, want in zip(rows, result.rows):
        assert (got.n, got.k, got.l) == (want.n, want.k, want.l)
        assert got.xi == pytest.approx(want.xi, abs=1e-12)
        assert got.nu_minus == pytest.approx(want.nu_minus, rel=1e-10, abs=1e-15)
        assert got.verdict == want.verdict
        assert got.truncation_flag == want.truncation_flag


def test_read_csv_rejects_malformed(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2,3\n", encoding="utf-8")
    with pytest.raises(ValueError, match="malformed"):
        read_csv(str(path))


def test_load_config_reports_file_and_line(tmp_path):
    path = tmp_path / "sweep.cfg"
    path.write_text("k = 1\nbogus = 3\n", encoding="utf-8")
    with pytest.raises(ValueError) as err:
        load_config(str(path))
    assert "bogus" in str(err.value)
    assert "sweep.cfg:2" in str(err.value)

    path.write_text("k one\n", encoding="utf-8")
    with pytest.raises(ValueError, match="key=value"):
        load_config(str(path))

    path.write_text("k = x\n", encoding="utf-8")
    with pytest.raises(ValueError, match="bad value for k"):
        load_config(str(path))

    path.write_text("with_nz = maybe\n", encoding="utf-8")
    with pytest.raises(ValueError, match="bad value for with_nz"):
        load_config(str(path))


def test_load_config_parses_types(tmp_path):
    path = tmp_path / "sweep.cfg"
    path.write_text(
        "# comment line\n"
        "k = 1\n"
        "l = 3\n"
        "alpha_p = 2.5   # inline comment\n"
        "dims = 10, 6, 16\n"
        "hierarchy = 1 2\n"
        "with_nz = no\n"
        "out = run.csv\n",
        encoding="utf-8",
    )
    values = load_config(str(path))
    assert values == {
        "k": 1, "l": 3, "alpha_p": 2.5, "dims": (10, 6, 16),
        "hierarchy": (1, 2), "with_nz": False, "out": "run.csv",
    }


def test_config_from_file_overrides(tmp_path):
    path = tmp_path / "sweep.cfg"
    write_tiny_cfg(path, l=3)
    cfg = config_from_file(str(path), l=2, xi_max=None)
    assert cfg.l == 2
    assert cfg.xi_max == pytest.approx(TINY["xi_max"])
    assert cfg.dims == TINY["dims"]


def test_config_validation():
    with pytest.raises(ValueError):
        tiny_config(xi_step=0.0)
    with pytest.raises(ValueError):
        tiny_config(hierarchy=())
    with pytest.raises(ValueError):
        tiny_config(hierarchy=(0,))
    with pytest.raises(ValueError):
        tiny_config(dims=(4, 5))
    with pytest.raises(ValueError):
        tiny_config(l=3, with_nz=True)


def test_xi_grid_spacing():
    cfg = tiny_config(xi_max=0.1, xi_step=0.02)
    grid = cfg.xi_grid()
    assert grid[0] == 0.0
    assert len(grid) == 6
    assert np.allclose(np.diff(grid), 0.02)
    assert grid[-1] == pytest.approx(0.1)


def test_emit_plot_data(tmp_path):
    result = run_sweep(tiny_config(with_nz=True), keep_states=False)
    out = tmp_path / "series.tsv"
    emit_plot_data(result.rows, str(out), series=("nu1", "nu2", "ineq8_1", "nz", "nu3"))
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# xi\tnu1\tnu2\tineq8_1\tnz\tnu3"
    assert len(lines) == 1 + 3
    first = lines[1].split("\t")
    assert float(first[0]) == 0.0
    assert first[5] == "nan", "hierarchy level 3 was not computed"
    last = lines[-1].split("\t")
    assert float(last[1]) < 0
    assert float(last[4]) < 0

    with pytest.raises(ValueError, match="selector"):
        emit_plot_data(result.rows, str(out), series=("nope_1",))


def test_convergence_check_structure():
    cfg = tiny_config()
    with pytest.raises(ValueError):
        convergence_check(cfg, stride=0)
    report = convergence_check(cfg, stride=2)
    assert set(report) == {"max_drift", "threshold", "pass", "points",
                           "base_dims", "boosted_dims"}
    assert report["base_dims"] == cfg.dims
    assert report["boosted_dims"] == tuple(
        d + b for d, b in zip(cfg.dims, cfg.convergence_step))
    assert report["max_drift"] == max(p["drift"] for p in report["points"])
    assert report["pass"] == (report["max_drift"] < report["threshold"])
    xis = {p["xi"] for p in report["points"]}
    assert xis == {0.0, 0.06}


def test_convergence_check_dim_boost_override():
    cfg = tiny_config()
    report = convergence_check(cfg, stride=5, dim_boost=(1, 1, 1))
    assert report["boosted_dims"] == (13, 7, 12)
    # only xi=0 survives a stride this large, so the drift is numerical noise
    assert report["pass"]
    assert report["max_drift"] < 1e-12


def test_cli_sweep_exit_codes(tmp_path, capsys):
    cfg_path = write_tiny_cfg(tmp_path / "tiny.cfg")
    out = tmp_path / "run.csv"

    code = main(["sweep", "--config", cfg_path, "--out", str(out)])
    assert code == 0
    assert out.exists()
    assert "clean" in capsys.readouterr().out
    assert len(read_csv(str(out))) == 6

    # starved mode truncations trip the guard and flip the exit code
    code = main(["sweep", "--config", cfg_path, "--out", str(out),
                 "--dims", "8,3,5", "--alpha-p", "2.0", "--hierarchy", "1",
                 "--xi-max", "0.4", "--xi-step", "0.2"])
    assert code == 3
    assert "flagged" in capsys.readouterr().out

    code = main(["sweep", "--k", "1", "--l", "2"])
    assert code == 2
    assert "no output path" in capsys.readouterr().err


def test_catastrophic_truncation_raises():
    # beyond mild guard breaches, corrupted moments break the sign agreement
    # between the witness and the determinant inequality; the cross-check
    # refuses to emit rows instead of writing garbage
    from hocov import NumericalConsistencyError

    cfg = tiny_config(dims=(8, 3, 5), alpha_p=2.0, xi_max=0.4, xi_step=0.2,
                      hierarchy=(1, 2))
    with pytest.raises(NumericalConsistencyError):
        run_sweep(cfg)


def test_cli_usage_errors():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["sweep", "--dims", "4,5"])
    assert exc.value.code == 2


def test_cli_check_exit_codes(tmp_path, capsys):
    cfg_path = write_tiny_cfg(tmp_path / "tiny.cfg")

    code = main(["check", "--config", cfg_path, "--stride", "5"])
    assert code == 0
    assert "convergence pass" in capsys.readouterr().out

    drift_out = tmp_path / "drift.tsv"
    code = main(["check", "--config", cfg_path, "--stride", "2",
                 "--out", str(drift_out)])
    assert code == 4
    assert "convergence FAIL" in capsys.readouterr().out
    assert drift_out.read_text(encoding="utf-8").startswith("# xi\tn\tdrift")


def test_cli_plotdata(tmp_path, capsys):
    cfg_path = write_tiny_cfg(tmp_path / "tiny.cfg")
    csv_path = tmp_path / "run.csv"
    assert main(["sweep", "--config", cfg_path, "--out", str(csv_path)]) == 0
    capsys.readouterr()

    series_path = tmp_path / "series.tsv"
    code = main(["plotdata", "--in", str(csv_path), "--out", str(series_path),
                 "--series", "nu1,nu2"])
    assert code == 0
    lines = series_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "# xi\tnu1\tnu2"
    assert len(lines) == 4
