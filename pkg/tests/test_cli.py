import csv

import pytest

from clkinetic import cli

THEOREM = ["--TM", "1", "--minTw", "0.9", "--rperp", "0.5", "--rpar", "0.5", "--theta", "0.125"]

def run(tmp_path, *args, out="out"):
    directory = tmp_path / out
    code = cli.main(["clkinetic", args[0], "--quiet", "--out", str(directory)] + list(args[1:]))
    return code, directory

def manifest(directory):
    pairs = [line.split(" = ", 1) for line in (directory / "manifest.txt").read_text().splitlines()]
    out = {}
    for key, value in pairs:
        out.setdefault(key, []).append(value)
    return {k: v[0] if len(v) == 1 else v for k, v in out.items()}

def read_csv(pathname):
    with open(pathname, newline="") as infile:
        return list(csv.reader(infile))

# ##############################################################################
# check-theorem
# ##############################################################################

def test_theorem_holds(tmp_path):
    code, out = run(tmp_path, "check-theorem", *THEOREM)
    assert code == 0
    rows = read_csv(out / "theorem.csv")
    row = dict(zip(rows[0], rows[1]))
    assert row["theta_ok"] == row["r_ok"] == row["temperature_ok"] == "true"
    assert float(row["eta"]) < 1.0
    info = manifest(out)
    assert info["status"] == "ok"
    assert info["exit_code"] == "0"
    assert info["artifact"] == "theorem.csv"

def test_cold_wall_exits_with_warning(tmp_path):
    args = list(THEOREM)
    args[3] = "0.3"
    code, out = run(tmp_path, "check-theorem", *args)
    assert code == 2
    assert manifest(out)["status"] == "warning"

def test_bad_config_still_writes_manifest(tmp_path, capsys):
    code, out = run(tmp_path, "check-theorem", "--set", "r_par=2.5")
    assert code == 1
    info = manifest(out)
    assert info["status"] == "error"
    assert "r_par = 2.5 violates 0 < r_par < 2" in info["error"]
    assert "config error" in capsys.readouterr().err

def test_config_file_errors_name_the_line(tmp_path, capsys):
    conf = tmp_path / "bad.conf"
    conf.write_text("seed = 1\nwidth = -1\n")
    code, _ = run(tmp_path, "check-theorem", "--config", str(conf))
    assert code == 1
    assert "line 2: width must be positive" in capsys.readouterr().err

def test_missing_config_file(tmp_path):
    code, out = run(tmp_path, "simulate", "--config", str(tmp_path / "nope.conf"))
    assert code == 1
    assert "cannot read config" in manifest(out)["error"]

def test_environment_seed_wins(tmp_path):
    app = cli.KineticApp(["clkinetic", "check-theorem", "--quiet", "--out", str(tmp_path), "--seed", "3"] + THEOREM,
                         environ={"CLK_SEED": "77"})
    try:
        assert app.run() == 0
    finally:
        app.close()
    assert manifest(tmp_path)["seed"] == "77"

# ##############################################################################
# Sampling commands
# ##############################################################################

def test_sample_wall_is_deterministic(tmp_path):
    args = ["sample-wall", "--set", "n_particles=1000", "--set", "r_perp=0.5", "--set", "r_par=0.5"]
    code_a, a = run(tmp_path, *args, out="a")
    code_b, b = run(tmp_path, *args, "--threads", "3", out="b")
    assert code_a == code_b == 0
    assert (a / "samples.csv").read_bytes() == (b / "samples.csv").read_bytes()
    rows = read_csv(a / "samples.csv")
    assert rows[0] == ["v1", "v2", "v3"]
    assert len(rows) == 1001
    assert all(float(v3) > 0.0 for _, _, v3 in rows[1:])

def test_figures_write_data_and_scripts(tmp_path):
    code, out = run(tmp_path, "figures", "--which", "2", "--set", "n_particles=5000", "--set", "hist_extent=3")
    assert code == 0
    assert (out / "fig2.gp").read_text().startswith("# Figure 2: C-L r = (1/2, 1/2)")
    assert len(read_csv(out / "fig2.csv")) == 1 + 60 * 60
    summary = read_csv(out / "figures.csv")
    assert summary[1][0] == "2"

def test_kernel_table_and_ladder(tmp_path):
    code, out = run(tmp_path, "kernel-table", "--set", "which=1", "--set", "table_n=5", "--set", "ladder_l=3")
    assert code == 0
    assert len(read_csv(out / "kernel1.csv")) == 1 + 25
    ladder = read_csv(out / "ladder.csv")
    assert [row[:2] for row in ladder[1:]] == [["1", "1"], ["2", "1"], ["2", "2"], ["3", "1"], ["3", "2"], ["3", "3"]]

def test_simulate_writes_summary(tmp_path):
    code, out = run(tmp_path, "simulate", "--set", "n_particles=2000", "--set", "block_size=500",
                    "--set", "t_end=1", "--set", "n_samples=3")
    assert code == 0
    assert len(read_csv(out / "simulate.csv")) == 4
    keys = [row[0] for row in read_csv(out / "simulate_summary.csv")[1:]]
    assert keys == ["n_particles", "flight_time", "speed_pvalue", "balance_pvalue"]

def test_cycles_writes_census(tmp_path):
    code, out = run(tmp_path, "cycles", "--set", "trials=2000", "--set", "k_max=8", "--set", "block_size=500",
                    "--set", "model=cl", "--set", "r_perp=0.5", "--set", "r_par=0.5")
    assert code == 0
    assert len(read_csv(out / "cycles.csv")) == 1 + 8
    assert (out / "cycles.gp").exists()
    assert len(read_csv(out / "cycles_census.csv")) == 2

def test_solve_slab(tmp_path):
    code, out = run(tmp_path, "solve-slab", "--set", "domain=slab", "--set", "grid_M=5", "--set", "nx=4",
                    "--set", "n_mc=16", "--set", "m_max=3", "--set", "t_end=0.1")
    assert code == 0
    assert 2 <= len(read_csv(out / "slab.csv")) <= 4
    assert len(read_csv(out / "slab_slice.csv")) == 1 + 4 * 5

def test_solve_slab_needs_slab(tmp_path):
    code, out = run(tmp_path, "solve-slab")
    assert code == 1
    assert "domain = slab" in manifest(out)["error"]

@pytest.mark.slow
def test_verify_passes(tmp_path):
    code, out = run(tmp_path, "verify", "--set", "resolution=coarse")
    assert code == 0
    assert all(row[2] == "PASS" for row in read_csv(out / "verify.csv")[1:])
