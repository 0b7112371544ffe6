import json

import numpy as np
import pytest

from srsweep.cli import UsageError, main, parse_scan
from srsweep.output import read_series_csv
from srsweep.state import MediumState


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_evolve_kraus_pulse(tmp_path, capsys):
    prefix = tmp_path / "pulse"
    code, _, err = run(capsys, "evolve", "--mode=kraus", "--atoms=6", "--coupling=0.4", "--photons=60",
                       f"--out={prefix}", "--plot")
    assert code == 0
    data = read_series_csv((tmp_path / "pulse.csv").read_text())
    assert data["params"]["m"] == 6 and len(data["n"]) == 60
    assert np.all(np.isnan(data["stderr_if_mc"]))
    summary = json.loads((tmp_path / "pulse.json").read_text())
    assert summary["pulse"]["interior_peak"]
    assert summary["final_mean_excitation"] == pytest.approx(data["mean_excitation"][-1])
    assert (tmp_path / "pulse.svg").read_text().startswith("<svg")
    assert "peak at photon" in err


def test_evolve_tree_two_photons(capsys):
    code, out, _ = run(capsys, "evolve", "--mode=tree", "--atoms=5", "--coupling=0.2", "--photons=LL")
    assert code == 0
    data = read_series_csv(out)
    assert data["P_elastic"][1] == pytest.approx(0.7997895392701122, abs=1e-15)


def test_csv_round_trips_exactly(capsys):
    _, out, _ = run(capsys, "evolve", "--atoms=4", "--coupling=0.3", "--photons=5")
    data = read_series_csv(out)
    line = out.splitlines()[3].split(",")
    assert float(line[1]) == data["P_elastic"][0]
    assert "%.17g" % data["P_elastic"][0] == line[1]


def test_mc_output_is_thread_independent(tmp_path, capsys):
    outs = []
    for threads in (1, 2, 8):
        prefix = tmp_path / f"mc{threads}"
        code, _, _ = run(capsys, "evolve", "--mode=mc", "--atoms=5", "--coupling=0.3", "--photons=20",
                         "--trials=600", "--seed=12345", f"--threads={threads}", f"--out={prefix}")
        assert code == 0
        outs.append((prefix.with_suffix(".csv").read_bytes(), prefix.with_suffix(".json").read_bytes()))
    assert outs[0] == outs[1] == outs[2]


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"atoms": 3, "coupling": 0.5, "photons": 4, "mode": "kraus"}))
    _, out, _ = run(capsys, "evolve", f"--config={cfg}", "--coupling=0.2")
    params = read_series_csv(out)["params"]
    assert params == {**params, "m": 3, "j": 0.2, "mode": "kraus", "photons": 4}
    cfg.write_text(json.dumps({"atomz": 3}))
    code, _, err = run(capsys, "evolve", f"--config={cfg}")
    assert code == 2 and "atomz" in err


def test_initial_state_file(tmp_path, capsys):
    f = tmp_path / "state.json"
    f.write_text(MediumState(3, 3, {7: 1.0}).to_json())
    _, out, _ = run(capsys, "evolve", "--atoms=3", "--coupling=0.4", "--photons=3", "--pattern=S*",
                    f"--initial={f}")
    data = read_series_csv(out)
    # only the all-Stokes path keeps the spin on a fully inverted medium
    assert data["P_stokes"][0] == pytest.approx(np.cos(0.4) ** 6, abs=1e-15)
    assert data["mean_excitation"][0] < 3


def test_gamma_flux_parameters(capsys):
    _, out, _ = run(capsys, "evolve", "--atoms=1", "--gamma=1", "--flux=100", "--photons=2", "--initial=excited",
                    "--pattern=S*")
    assert read_series_csv(out)["params"]["j"] == pytest.approx(0.1)
    code, _, err = run(capsys, "evolve", "--atoms=1", "--coupling=0.3", "--gamma=1", "--flux=100", "--photons=2")
    assert code == 2


@pytest.mark.parametrize("argv", [
    ["evolve", "--coupling=0.1", "--photons=2"],
    ["evolve", "--atoms=2", "--photons=2"],
    ["evolve", "--atoms=2", "--coupling=2.0", "--photons=2"],
    ["evolve", "--atoms=70", "--coupling=0.1", "--photons=2"],
    ["evolve", "--atoms=2", "--coupling=0.1", "--photons=LX"],
    ["evolve", "--atoms=2", "--coupling=0.1", "--photons=2", "--initial=/nonexistent.json"],
    ["verify", "--suite=bogus"],
    ["scan", "--scan=m=", "--coupling=0.1"],
    ["scan", "--scan=q=1,2"],
    ["scan", "--scan=j=0.1,0.2", "--fit=cooperative", "--coupling=0.1"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "error" in err


def test_resource_failures_exit_1(capsys):
    code, _, err = run(capsys, "evolve", "--mode=kraus", "--atoms=20", "--coupling=0.1", "--photons=3")
    assert code == 1 and "mc mode" in err
    code, _, _ = run(capsys, "scan", "--scan=m=1,2", "--coupling=0.3", "--fit=cooperative")
    assert code == 1


def test_argparse_usage_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["evolve", "--mode=quantum"])
    assert exc.value.code == 2


def test_verify_modes_small_system(capsys):
    code, out, _ = run(capsys, "verify", "--suite=modes", "--atoms=4", "--photons=10", "--coupling=0.3",
                       "--trials=2000")
    assert code == 0
    assert "[PASS] mode-agreement" in out and "tree vs kraus" in out


def test_verify_failing_suite_exits_1(capsys):
    code, out, _ = run(capsys, "verify", "--suite=cooperative")
    assert code == 1
    assert "[FAIL] cooperative-M2" in out and "[PASS] pulse-shape" in out


def test_scan_cooperative(tmp_path, capsys):
    prefix = tmp_path / "coop"
    code, _, err = run(capsys, "scan", "--scan=m=8,16,32,64", "--coupling=0.02", "--fit=cooperative",
                       f"--out={prefix}")
    assert code == 0
    fit = json.loads(prefix.with_suffix(".json").read_text())["fit"]
    assert fit["slope"] == pytest.approx(2.103, abs=1e-3)
    assert "slope=" in err


def test_scan_sf_limit(capsys):
    code, out, err = run(capsys, "scan", "--scan=j=0.1,0.05,0.025", "--gamma=1", "--time=2", "--fit=sf-limit")
    assert code == 0
    assert "slope=2.00" in err
    assert out.splitlines()[2] == "j,photons,closed_form,limit,difference"


def test_scan_plain_and_range(capsys):
    code, out, _ = run(capsys, "scan", "--scan=m=2:4", "--coupling=0.3", "--photons=3")
    assert code == 0
    rows = [r for r in out.splitlines() if r and not r.startswith("#")]
    assert len(rows) == 4 and rows[1].startswith("2,2,")


def test_parse_scan():
    assert parse_scan("j=0.1,0.2") == ("j", [0.1, 0.2])
    assert parse_scan("photons=1:3") == ("photons", [1, 2, 3])
    with pytest.raises(UsageError):
        parse_scan("m=")


def test_sweep_command(capsys):
    code, out, _ = run(capsys, "sweep", "--atoms=3", "--coupling=0.4", "--max-conversions=1")
    assert code == 0
    data = json.loads(out)
    assert data["p_elastic"] + data["p_inelastic"] == pytest.approx(1.0)
    assert [a["config"] for a in data["inelastic"]["amplitudes"]] == ["100", "010", "001"]
    assert set(data["subchannels"]) == {"0", "1"}
