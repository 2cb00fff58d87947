import csv
import subprocess
import sys

import pytest

from hybrid_msem.cli import RunConfig, build_parser, build_config, dof_table_text, format_defaults, main, read_config_file
from hybrid_msem.errors import ConfigError
from hybrid_msem.verification import CSV_COLUMNS
from reference_data import (
    GLOBAL_NNZ_3X3_N6,
    TABLE1_LEFT,
    TABLE1_RIGHT,
    TABLE1_RATIOS_LEFT,
    TABLE2_LEFT,
    TABLE2_RATIOS_RIGHT,
    TABLE2_RIGHT,
)


def read_report(path):
    out = {}
    for line in path.read_text().splitlines():
        k, v = line.split(" = ", 1)
        out[k] = v
    return out


def run(args, tmp_path):
    return main([*args, "--out", str(tmp_path)])


def test_solve_reports_known_nnz(tmp_path, capsys):
    assert run(["solve", "--k", "3", "3", "--degree", "6", "--mesh", "orthogonal"], tmp_path) == 0
    rep = read_report(tmp_path / "report.txt")
    assert int(rep["nnz"]) == GLOBAL_NNZ_3X3_N6
    assert float(rep["err_div"]) <= 1e-10
    assert float(rep["max_path_discrepancy"]) <= 1e-8
    assert rep["source_dofs"] == "cell-integral"
    assert "nnz = 66384" in capsys.readouterr().out


def test_solve_zero_source_single_element(tmp_path):
    assert run(["solve", "--k", "1", "1", "--degree", "1", "--source", "zero"], tmp_path) == 0
    rep = read_report(tmp_path / "report.txt")
    for key in ("err_p_l2", "err_u_hdiv", "err_div"):
        assert abs(float(rep[key])) <= 1e-12


def test_solve_writes_samples(tmp_path):
    assert run(["solve", "--k", "2", "2", "-N", "3", "--samples", "3", "--path", "schur"], tmp_path) == 0
    rows = list(csv.reader((tmp_path / "fields.csv").open()))
    assert rows[0] == ["element", "x", "y", "p_h", "ux_h", "uy_h", "p_exact"]
    assert len(rows) == 1 + 4 * 9
    assert "max_path_discrepancy" not in read_report(tmp_path / "report.txt")


def test_p_sweep_csv_and_plot_script(tmp_path):
    args = ["sweep", "--sweep", "p", "--k", "3", "3", "--degrees", "2", "3", "4", "5", "6", "7", "8", "--meshes", "orthogonal", "--path", "schur"]
    assert run(args, tmp_path) == 0
    rows = list(csv.DictReader((tmp_path / "sweep_p.csv").open()))
    assert list(rows[0].keys()) == list(CSV_COLUMNS)
    assert len(rows) == 7
    for col in ("err_p_l2", "err_u_hdiv"):
        vals = [float(r[col]) for r in rows]
        assert all(b < a for a, b in zip(vals, vals[1:]))
    script = (tmp_path / "sweep_p.gp").read_text()
    assert "sweep_p.csv" in script and "set logscale y" in script and "multiplot" in script


def test_sweep_isolates_failed_row(tmp_path, monkeypatch):
    import hybrid_msem.verification as ver
    from hybrid_msem.errors import MeshDegeneracyError

    real = ver.run_case

    def flaky(spec):
        if spec.kx == 3:
            raise MeshDegeneracyError("element 4 folded", element=4)
        return real(spec)

    monkeypatch.setattr(ver, "run_case", flaky)
    args = ["sweep", "--sweep", "h", "--ks", "2", "3", "4", "-N", "2", "--meshes", "orthogonal", "--path", "schur"]
    assert run(args, tmp_path) == 0
    rows = list(csv.DictReader((tmp_path / "sweep_h.csv").open()))
    assert [r["status"] for r in rows] == ["ok", "failed:mesh-degeneracy", "ok"]
    assert float(rows[0]["err_p_l2"]) > 0 and float(rows[2]["err_p_l2"]) > 0


def test_dof_table_report_verbatim(capsys):
    assert main(["sweep", "--report", "dof-table"]) == 0
    text = capsys.readouterr().out
    assert text == dof_table_text()
    lines = text.splitlines()
    for (N, full, lam), ratio in zip(TABLE1_LEFT, TABLE1_RATIOS_LEFT):
        assert f"{N} {full} {lam} {ratio:.2f}" in lines
    for K, full, lam in TABLE1_RIGHT + TABLE2_RIGHT:
        assert any(line.startswith(f"{K} {full} {lam} ") for line in lines)
    for N, full, lam in TABLE2_LEFT:
        assert any(line.startswith(f"{N} {full} {lam} ") for line in lines)
    for (K, full, lam), ratio in zip(TABLE2_RIGHT, TABLE2_RATIOS_RIGHT):
        assert f"{K} {full} {lam} {ratio:.2f}" in lines
    assert main(["dof-table"]) == 0
    assert capsys.readouterr().out == text


@pytest.mark.parametrize(
    "k,N,nnz,en_rows,en_nnz",
    [((3, 3), 6, GLOBAL_NNZ_3X3_N6, 72, 144), ((2, 2), 2, None, 8, 16), ((1, 1), 3, None, 0, 0)],
)
def test_sparsity(tmp_path, k, N, nnz, en_rows, en_nnz):
    assert run(["sparsity", "--k", *map(str, k), "-N", str(N)], tmp_path) == 0
    rep = read_report(tmp_path / "sparsity.txt")
    if nnz is not None:
        assert int(rep["nnz"]) == nnz
    assert int(rep["n_lambda"]) == en_rows
    assert int(rep["E_N_nnz"]) == en_nnz
    lines = (tmp_path / "system.coo").read_text().splitlines()
    assert len(lines) == int(rep["nnz"])
    r, c, _ = lines[0].split()
    assert int(r) >= 0 and int(c) >= 0
    en_lines = (tmp_path / "E_N.coo").read_text().splitlines()
    assert len(en_lines) == en_nnz
    assert all(line.split()[2] in ("1", "-1") for line in en_lines)


def test_cond(tmp_path):
    assert run(["cond", "--k", "3", "3", "--mesh", "curved", "--degrees", "2", "3", "4"], tmp_path) == 0
    rows = list(csv.DictReader((tmp_path / "cond.csv").open()))
    kappa = [float(r["cond_S"]) for r in rows]
    assert len(kappa) == 3 and all(b > a for a, b in zip(kappa, kappa[1:]))


def test_defaults_round_trip(tmp_path, capsys):
    assert main(["defaults"]) == 0
    text = capsys.readouterr().out
    assert text == format_defaults()
    assert "alpha = 0.1" in text and "c = 0.15" in text and "quad = auto" in text and "path = both" in text
    cfg_file = tmp_path / "defaults.cfg"
    cfg_file.write_text(text)
    args = build_parser().parse_args(["solve", "--config", str(cfg_file)])
    assert build_config(args) == RunConfig()


def test_config_precedence(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("# comment\nk = 4 5\ndegree = 3\nmesh = curved\nc = 0.1\nthreads = 2\n")
    assert read_config_file(cfg_file)["kx"] == "4"
    args = build_parser().parse_args(["solve", "--config", str(cfg_file), "--degree", "5"])
    cfg = build_config(args)
    assert (cfg.kx, cfg.ky, cfg.degree, cfg.mesh, cfg.c, cfg.threads) == (4, 5, 5, "curved", 0.1, 2)


@pytest.mark.parametrize(
    "content",
    ["bogus = 1\n", "degree\n", "degree = three\n", "k = 3\n", "alpha = -1\n", "path = sideways\n"],
)
def test_bad_config_file(tmp_path, content):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text(content)
    with pytest.raises(ConfigError):
        build_config(build_parser().parse_args(["solve", "--config", str(cfg_file)]))


def cli(*args, cwd):
    return subprocess.run([sys.executable, "-m", "hybrid_msem", *args], capture_output=True, text=True, cwd=cwd)


@pytest.mark.parametrize(
    "args,code,prefix",
    [
        (["solve", "--degree", "0"], 2, "error[config]:"),
        (["solve", "--threads", "0"], 2, "error[config]:"),
        (["solve", "--k", "3"], 2, "error[config]:"),
        (["solve", "--config", "/nonexistent/run.cfg"], 2, "error[config]:"),
        (["frobnicate"], 2, "error[config]:"),
        (["solve", "--mesh", "curved", "--c", "0.3", "--k", "3", "3", "-N", "2"], 3, "error[mesh-degeneracy]:"),
    ],
)
def test_error_exit_codes(tmp_path, args, code, prefix):
    proc = cli(*args, "--out", str(tmp_path), cwd=tmp_path) if args[0] != "frobnicate" else cli(*args, cwd=tmp_path)
    assert proc.returncode == code
    err = proc.stderr.strip().splitlines()
    assert len(err) == 1
    assert err[0].startswith(prefix)


def test_threads_give_byte_identical_csv(tmp_path):
    outs = []
    for t in ("1", "4"):
        d = tmp_path / f"t{t}"
        args = ["sweep", "--sweep", "p", "--k", "2", "2", "--degrees", "2", "3", "4", "--threads", t, "--no-timings", "--cond", "dense-eigen"]
        assert run(args, d) == 0
        outs.append((d / "sweep_p.csv").read_bytes())
    assert outs[0] == outs[1]


def test_solver_failure_exit_code(tmp_path, monkeypatch, capsys):
    import hybrid_msem.cli as cli_mod
    from hybrid_msem.errors import IllPosedSystemError

    def broken(spec):
        raise IllPosedSystemError("interface system is singular")

    monkeypatch.setattr(cli_mod, "run_case", broken)
    assert run(["solve", "--k", "2", "2", "-N", "2"], tmp_path) == 4
    assert capsys.readouterr().err == "error[solver]: interface system is singular\n"
