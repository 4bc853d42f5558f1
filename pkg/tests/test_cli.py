import csv
import json
from importlib.resources import files

import jsonschema
import numpy as np
import pytest

from bursty.cli import main
from bursty.two_state_model import TwoStateParams, simulate


def schema(name):
    return json.loads(files("bursty").joinpath("schemas", name).read_text())


def write_events(path, times, network="B"):
    with open(path, "w") as fh:
        fh.write("network_id,timestamp\n")
        for t in times:
            fh.write(f"{network},{float(t)!r}\n")
    return path


def analyze(tmp_path, times, *extra, name="report"):
    src = write_events(tmp_path / f"{name}.csv", times)
    out = tmp_path / f"{name}.json"
    code = main(["analyze", "--input", str(src), "--network", "B", "--out", str(out), *extra])
    return code, out


class TestAnalyze:
    def test_report_and_side_files(self, tmp_path, rng):
        code, out = analyze(tmp_path, np.sort(rng.uniform(0, 1e6, 200)))
        assert code == 0
        report = json.loads(out.read_text())
        jsonschema.validate(report, schema("analysis_report.v1.json"))
        assert report["event_count"] == 200 and report["network_id"] == "B"
        for suffix in (".ripley.csv", ".binned.csv", ".delta_mu.csv"):
            assert (tmp_path / f"report{suffix}").exists()

    def test_three_events(self, tmp_path):
        code, out = analyze(tmp_path, [0.0, 10.0, 25.0])
        assert code == 0
        report = json.loads(out.read_text())
        jsonschema.validate(report, schema("analysis_report.v1.json"))
        assert report["kolmogorov"]["arrival"]["n"] == 3
        assert report["kolmogorov"]["interevent"]["n"] == 2
        assert report["burstiness"]["available"] is False
        assert report["verdict_row"]["burstiness"] == "unavailable"

    def test_poisson_verdicts_quiet(self, tmp_path):
        rng = np.random.default_rng(31)
        quiet = 0
        runs = 200
        for k in range(runs):
            code, out = analyze(tmp_path, np.sort(rng.uniform(0, 1e5, 300)), "--window", "0,100000", name=f"p{k}")
            assert code == 0
            row = json.loads(out.read_text())["verdict_row"]
            quiet += all(v == "-" for v in row.values())
        assert quiet / runs >= 0.9

    def test_two_state_verdicts(self, tmp_path):
        all_plus = 0
        for seed in range(10):
            traj = simulate(TwoStateParams(0.007, 0.07, 0.1, 0.95), 900, seed=seed)
            code, out = analyze(tmp_path, traj.event_times, name=f"b{seed}")
            assert code == 0
            row = json.loads(out.read_text())["verdict_row"]
            assert all(v != "-" for v in row.values())
            all_plus += all(v == "+" for v in row.values())
        assert all_plus >= 8

    def test_csv_format(self, tmp_path, rng):
        src = write_events(tmp_path / "ev.csv", np.sort(rng.uniform(0, 100, 50)))
        out = tmp_path / "row.csv"
        assert main(["analyze", "--input", str(src), "--network", "B", "--out", str(out), "--format", "csv"]) == 0
        rows = list(csv.DictReader(out.open()))
        assert rows[0]["network_id"] == "B" and rows[0]["observations"] == "50"
        assert (tmp_path / "row.report.json").exists()

    def test_grid_and_jitter(self, tmp_path):
        code, out = analyze(tmp_path, [0, 0, 1, 2, 2, 5, 9, 9, 12], "--grid", "1,2,100", "--tie-policy", "jitter")
        assert code == 0
        report = json.loads(out.read_text())
        assert [e["t"] for e in report["ripley"]["entries"]] == [1.0, 2.0, 100.0]
        assert report["ripley"]["entries"][2]["available"] is False
        assert report["config"]["tie_policy"].startswith("jitter")

    def test_ingestion_error(self, tmp_path, capsys):
        src = tmp_path / "bad.csv"
        src.write_text("B,0\nB,10\nB,banana\n")
        assert main(["analyze", "--input", str(src), "--network", "B", "--out", str(tmp_path / "o.json")]) == 1
        assert "row 3" in capsys.readouterr().err

    def test_too_few_events(self, tmp_path):
        assert analyze(tmp_path, [5.0], "--window", "0,10")[0] == 2

    def test_usage_errors(self, tmp_path):
        assert main(["analyze", "--bogus"]) == 1
        assert main([]) == 1
        assert main(["analyze", "--input", "missing.csv", "--network", "B", "--out", str(tmp_path / "x")]) == 1

    def test_config_file(self, tmp_path, rng):
        src = write_events(tmp_path / "ev.csv", np.sort(rng.uniform(0, 100, 40)))
        cfg = tmp_path / "run.cfg"
        cfg.write_text(f"# analysis\ninput = {src}\nnetwork = B\nmc-trials = 500\nseed = 3\nout = {tmp_path / 'c.json'}\n")
        assert main(["analyze", "--config", str(cfg)]) == 0
        report = json.loads((tmp_path / "c.json").read_text())
        assert report["config"]["mc_trials"] == 500 and report["config"]["seed"] == 3
        assert main(["analyze", "--config", str(cfg), "--mc-trials", "600"]) == 0
        assert json.loads((tmp_path / "c.json").read_text())["config"]["mc_trials"] == 600

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("colour = blue\n")
        assert main(["analyze", "--config", str(cfg)]) == 1


class TestSimulate:
    def run(self, tmp_path, *extra, name="traj.csv"):
        out = tmp_path / name
        argv = ["simulate", "--lambda0", "0.007", "--lambda1", "0.05", "--p0", "0.1", "--p1", "0.95"]
        return main([*argv, "--events", "300", "--out", str(out), *extra]), out

    def test_single_state(self, tmp_path):
        out = tmp_path / "one.csv"
        argv = ["simulate", "--lambda0", "1", "--lambda1", "5", "--p0", "0", "--p1", "0.5"]
        assert main([*argv, "--events", "100", "--initial", "0", "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.open()))
        assert len(rows) == 100 and {r["hidden_state"] for r in rows} == {"0"}

    def test_seed_reproducible(self, tmp_path):
        _, a = self.run(tmp_path, "--seed", "9", name="a.csv")
        _, b = self.run(tmp_path, "--seed", "9", name="b.csv")
        _, c = self.run(tmp_path, "--seed", "10", name="c.csv")
        assert a.read_bytes() == b.read_bytes() != c.read_bytes()

    def test_json_format(self, tmp_path):
        code, out = self.run(tmp_path, "--format", "json", name="t.json")
        assert code == 0
        doc = json.loads(out.read_text())
        assert len(doc["event_times"]) == 300 and doc["params"]["p1"] == 0.95

    def test_invalid_params(self, tmp_path):
        out = tmp_path / "x.csv"
        argv = ["simulate", "--lambda0", "-1", "--lambda1", "5", "--p0", "0", "--p1", "0.5"]
        assert main([*argv, "--events", "10", "--out", str(out)]) == 1


@pytest.mark.filterwarnings("ignore::bursty.errors.ConvergenceWarning")
class TestFit:
    def trajectory(self, tmp_path, n=300, seed=1):
        out = tmp_path / "traj.csv"
        argv = ["simulate", "--lambda0", "0.007", "--lambda1", "0.05", "--p0", "0.1", "--p1", "0.95"]
        assert main([*argv, "--events", str(n), "--seed", str(seed), "--out", str(out)]) == 0
        return out

    def test_defaults_pool_35000(self, tmp_path):
        src = self.trajectory(tmp_path)
        out = tmp_path / "post.json"
        assert main(["fit", "--input", str(src), "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        jsonschema.validate(doc, schema("posterior.v1.json"))
        assert doc["pooled_count"] == 35_000 and doc["converged"] is True
        with open(tmp_path / "post.draws.csv") as fh:
            assert sum(1 for _ in fh) - 1 == 35_000

    def test_roundtrip_recovers_rates(self, tmp_path):
        src = self.trajectory(tmp_path, n=2000, seed=5)
        out = tmp_path / "post.json"
        assert main(["fit", "--input", str(src), "--out", str(out), "--chains", "4", "--iters", "1500", "--burnin", "500"]) == 0
        s = json.loads(out.read_text())["summary"]
        assert abs(s["lambda0"]["mean"] / 0.007 - 1) < 0.25
        assert abs(s["lambda1"]["mean"] / 0.05 - 1) < 0.25

    def test_single_chain(self, tmp_path):
        src = self.trajectory(tmp_path, n=100)
        out = tmp_path / "post.json"
        assert main(["fit", "--input", str(src), "--out", str(out), "--chains", "1", "--iters", "50", "--burnin", "10"]) == 0
        doc = json.loads(out.read_text())
        jsonschema.validate(doc, schema("posterior.v1.json"))
        assert doc["rhat"] is None and doc["converged"] is None

    def test_nonconvergence_exit_code(self, tmp_path):
        src = self.trajectory(tmp_path, n=500)
        out = tmp_path / "post.json"
        argv = ["fit", "--input", str(src), "--out", str(out), "--chains", "4", "--iters", "6", "--burnin", "1"]
        assert main([*argv, "--init", "prior"]) == 3
        assert out.exists() and (tmp_path / "post.draws.csv").exists()
        assert json.loads(out.read_text())["converged"] is False

    def test_events_input_and_thin(self, tmp_path, rng):
        src = write_events(tmp_path / "ev.csv", np.sort(rng.uniform(0, 1000, 60)))
        out = tmp_path / "draws.csv"
        argv = ["fit", "--input", str(src), "--network", "B", "--out", str(out), "--format", "csv"]
        assert main([*argv, "--chains", "2", "--iters", "40", "--burnin", "20", "--thin", "5"]) in (0, 3)
        assert sum(1 for _ in out.open()) - 1 == 2 * 4
        assert json.loads((tmp_path / "draws.summary.json").read_text())["config"]["input_kind"] == "events"

    def test_fit_precondition(self, tmp_path):
        src = write_events(tmp_path / "ev.csv", [0.0, 1.0])
        assert main(["fit", "--input", str(src), "--network", "B", "--out", str(tmp_path / "p.json")]) == 2

    def test_bad_schedule(self, tmp_path):
        src = self.trajectory(tmp_path, n=20)
        assert main(["fit", "--input", str(src), "--out", str(tmp_path / "p.json"), "--iters", "10", "--burnin", "10"]) == 1
