import json
import math

import numpy as np
import pytest
from scipy import stats

from lnmean.cli import main
from lnmean.rmrs import RMRS_SUMMARY_ROWS


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _run_json(capsys, *argv):
    code, out, err = _run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


# ---------------------------------------------------------------------------
# example command


def test_example_is_deterministic(capsys):
    args = ("example", "--reps", "5000", "--seed", "21")
    code_a, out_a, _ = _run(capsys, *args)
    code_b, out_b, _ = _run(capsys, *args)
    assert code_a == code_b == 0
    assert out_a == out_b
    assert "seed = 21" in out_a


def test_example_embeds_published_summaries(capsys):
    report = _run_json(capsys, "example", "--reps", "5000", "--seed", "1",
                       "--format", "json")
    published = [(g["label"], g["n"], g["mean"], g["variance_published"])
                 for g in report["groups"]]
    assert published == list(RMRS_SUMMARY_ROWS)
    for entry, (_, n, _, var) in zip(report["groups"], RMRS_SUMMARY_ROWS):
        assert entry["variance"] == pytest.approx(n / (n - 1) * var, rel=1e-15)
    assert {r["method"] for r in report["test_results"]} == \
        {"lrt", "ahmed", "gupta-li", "gv-weighted", "gv-umvue"}
    assert {r["method"] for r in report["ci_results"]} == \
        {"ahmed", "gupta-li", "baklizi", "gv-weighted", "gv-umvue"}


# ---------------------------------------------------------------------------
# test command


def test_rmrs_pvalues_match_published_table(capsys):
    report = _run_json(capsys, "test", "--example", "rmrs", "--phi0", "20000",
                       "--method", "all", "--reps", "100000", "--seed", "1",
                       "--format", "json")
    values = {r["method"]: r["p_value"] for r in report["results"]}
    assert values["lrt"] == pytest.approx(0.5245, abs=0.01)
    assert values["ahmed"] == pytest.approx(0.5582, abs=0.005)
    assert values["gupta-li"] == pytest.approx(0.5343, abs=0.01)
    assert values["gv-weighted"] == pytest.approx(0.4348, abs=0.02)
    assert values["gv-umvue"] == pytest.approx(0.4732, abs=0.02)
    assert report["mu0"] == pytest.approx(math.log(20000.0))


def test_rmrs_intervals_match_published_table(capsys):
    report = _run_json(capsys, "ci", "--example", "rmrs", "--level", "0.95",
                       "--method", "all", "--reps", "100000", "--seed", "1",
                       "--format", "json")
    table = {r["method"]: r for r in report["results"]}
    expected = {
        "ahmed": (15831.21, 27720.26, 0.003),
        "gupta-li": (16596.91, 28658.17, 0.003),
        "baklizi": (14372.59, 29178.79, 0.003),
        "gv-weighted": (17286.30, 30701.92, 0.02),
        "gv-umvue": (17090.54, 29998.23, 0.02),
    }
    for method, (lo, hi, rel) in expected.items():
        row = table[method]
        assert row["phi_lower"] == pytest.approx(lo, rel=rel)
        assert row["phi_upper"] == pytest.approx(hi, rel=rel)


def test_interval_scales_are_exponentially_linked(capsys):
    report = _run_json(capsys, "ci", "--example", "rmrs", "--reps", "5000",
                       "--seed", "5", "--format", "json")
    for row in report["results"]:
        assert row["phi_lower"] == pytest.approx(math.exp(row["mu_lower"]), rel=1e-14)
        assert row["phi_upper"] == pytest.approx(math.exp(row["mu_upper"]), rel=1e-14)


def test_single_group_summary_matches_t_test(capsys, tmp_path):
    n, mean, var = 14, 0.42, 1.37
    path = tmp_path / "one.csv"
    path.write_text(f"group,n,mean_log,var_log\na,{n},{mean!r},{var!r}\n")
    mu0 = 0.1
    report = _run_json(capsys, "test", "--summary", str(path), "--mu0", str(mu0),
                       "--alt", "two-sided", "--model-a", "1", "--model-b", "0",
                       "--method", "gv-weighted", "--reps", "50000", "--seed", "2",
                       "--format", "json")
    row = report["results"][0]
    t_stat = (mean - mu0) * math.sqrt(n) / math.sqrt(var)
    p_t = 2.0 * stats.t.sf(abs(t_stat), df=n - 1)
    assert row["p_value"] == pytest.approx(p_t, abs=3 * 2 * max(row["mc_std_error"], 1e-4))


def test_raw_and_summary_inputs_agree_exactly(capsys, tmp_path):
    rng = np.random.default_rng(6)
    groups = {"g1": rng.normal(0.2, 1.0, 9), "g2": rng.normal(0.5, 1.3, 12)}
    raw = tmp_path / "raw.csv"
    raw.write_text("group,value\n" + "".join(
        f"{label},{float(value)!r}\n" for label, values in groups.items() for value in values))
    summary = tmp_path / "summary.csv"
    summary.write_text("group,n,mean_log,var_log\n" + "".join(
        f"{label},{len(values)},{float(np.mean(values))!r},{float(np.var(values, ddof=1))!r}\n"
        for label, values in groups.items()))
    args = ("--mu0", "0.3", "--model-a", "1", "--model-b", "0",
            "--method", "gv-umvue", "--reps", "5000", "--seed", "9",
            "--format", "json")
    from_raw = _run_json(capsys, "test", "--input", str(raw), *args)
    from_summary = _run_json(capsys, "test", "--summary", str(summary), *args)
    assert from_raw["results"] == from_summary["results"]
    assert from_raw["groups"] == from_summary["groups"]


def test_json_report_round_trips(capsys):
    code, out, _ = _run(capsys, "test", "--example", "rmrs", "--phi0", "20000",
                        "--method", "lrt", "--format", "json")
    assert code == 0
    parsed = json.loads(out)
    assert json.loads(json.dumps(parsed)) == parsed


def test_env_var_seed_with_flag_override(capsys, monkeypatch):
    monkeypatch.setenv("LNMEAN_SEED", "123")
    by_env = _run_json(capsys, "ci", "--example", "rmrs", "--method", "gv-weighted",
                       "--reps", "5000", "--format", "json")
    assert by_env["seed"] == 123
    by_flag = _run_json(capsys, "ci", "--example", "rmrs", "--method", "gv-weighted",
                        "--reps", "5000", "--seed", "7", "--format", "json")
    assert by_flag["seed"] == 7


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for command in ("test", "ci", "example", "simulate"):
        assert command in out


# ---------------------------------------------------------------------------
# error handling


def test_unknown_method_is_a_usage_error(capsys):
    code, _, err = _run(capsys, "test", "--example", "rmrs", "--phi0", "1",
                        "--method", "sorcery")
    assert code == 2
    assert "unknown method" in err


def test_gupta_li_needs_two_groups(capsys, tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("group,n,mean_log,var_log\na,10,0.0,1.0\n")
    code, _, err = _run(capsys, "test", "--summary", str(path), "--phi0", "1",
                        "--method", "gupta-li")
    assert code == 2
    assert "two groups" in err


def test_nonpositive_raw_data_under_lognormal_model(capsys, tmp_path):
    path = tmp_path / "raw.csv"
    path.write_text("group,value\na,1.0\na,-2.0\na,3.0\n")
    code, _, err = _run(capsys, "test", "--input", str(path), "--phi0", "1")
    assert code == 2
    assert "positive" in err


def test_phi0_and_mu0_are_exclusive(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["test", "--example", "rmrs", "--phi0", "1", "--mu0", "0"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_classical_method_requires_lognormal_model(capsys, tmp_path):
    path = tmp_path / "two.csv"
    path.write_text("group,n,mean_log,var_log\na,10,0.0,1.0\nb,12,0.1,0.9\n")
    code, _, err = _run(capsys, "test", "--summary", str(path), "--mu0", "0",
                        "--model-a", "1", "--model-b", "0", "--method", "ahmed")
    assert code == 2
    assert "lognormal" in err


def test_one_sided_alt_excludes_two_sided_only_methods(capsys):
    report = _run_json(capsys, "test", "--example", "rmrs", "--phi0", "20000",
                       "--alt", "greater", "--method", "all", "--reps", "5000",
                       "--seed", "1", "--format", "json")
    methods = {r["method"] for r in report["results"]}
    assert methods == {"ahmed", "gv-weighted", "gv-umvue"}
    code, _, err = _run(capsys, "test", "--example", "rmrs", "--phi0", "20000",
                        "--alt", "greater", "--method", "lrt")
    assert code == 2 and "two-sided" in err


# ---------------------------------------------------------------------------
# simulate command


def test_simulate_dry_run_with_bundled_config(capsys):
    code, out, _ = _run(capsys, "simulate", "--config", "tables.toml", "--dry-run")
    assert code == 0
    assert out.startswith("48 cells, 96000 outer replicates")


def test_simulate_missing_config(capsys):
    code, _, err = _run(capsys, "simulate", "--config", "/no/such/file.toml")
    assert code == 2
    assert "not found" in err


def test_simulate_bad_config_is_exit_2(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"mu": [0.0]}))
    code, _, err = _run(capsys, "simulate", "--config", str(path))
    assert code == 2
    assert "missing" in err


def test_simulate_workers_flag_does_not_change_output(capsys, tmp_path):
    config = {
        "mu": [0.0], "sigma2_1": 1.0, "sigma2_2": [1.5], "n_pairs": [[5, 6]],
        "alpha": 0.05, "outer_reps": 100, "inner_reps": 1000, "seed": 13,
        "methods": ["gv-umvue"],
    }
    path = tmp_path / "grid.json"
    path.write_text(json.dumps(config))
    code_serial, out_serial, _ = _run(capsys, "simulate", "--config", str(path))
    code_parallel, out_parallel, _ = _run(capsys, "simulate", "--config", str(path),
                                          "--workers", "2")
    assert code_serial == code_parallel == 0
    assert out_serial == out_parallel


def test_simulate_writes_deterministic_csv(capsys, tmp_path):
    config = {
        "mu": [0.0], "sigma2_1": 1.0, "sigma2_2": [0.5], "n_pairs": [[5, 8]],
        "alpha": 0.05, "outer_reps": 100, "inner_reps": 1000, "seed": 4,
        "methods": ["ahmed", "gv-weighted"],
    }
    path = tmp_path / "grid.json"
    path.write_text(json.dumps(config))
    code_a, out_a, _ = _run(capsys, "simulate", "--config", str(path))
    code_b, out_b, _ = _run(capsys, "simulate", "--config", str(path))
    assert code_a == code_b == 0
    assert out_a == out_b
    assert out_a.splitlines()[0] == ("mu,sigma2_1,sigma2_2,n1,n2,method,metric,"
                                     "estimate,std_error,failures")
    target = tmp_path / "out.csv"
    code, _, _ = _run(capsys, "simulate", "--config", str(path),
                      "--output", str(target))
    assert code == 0
    assert target.read_text() == out_a
