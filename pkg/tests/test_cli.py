import json
import math

import numpy as np
import pytest

from gwxlab import TimeSeries, load_strain, save_strain, stock_template
from gwxlab.cli import main

FS = 1024.0


def run(*argv):
    return main(list(argv))


@pytest.fixture()
def noise_file(tmp_path):
    path = tmp_path / "noise.gwx"
    rng = np.random.default_rng(1)
    save_strain(TimeSeries(FS, 0.0, rng.standard_normal(int(8 * FS))), path)
    return path


@pytest.fixture()
def template_file(tmp_path):
    tpl = stock_template("gw150914", FS)
    path = tmp_path / "tpl.gwx"
    save_strain(tpl.base, path)
    return path


class TestBasicCommands:
    def test_noise_roundtrip(self, tmp_path):
        code = run("noise", "--duration", "2.0", "--fs", "1024", "--seed", "7",
                   "--out", str(tmp_path), "--name", "n.gwx")
        assert code == 0
        ts = load_strain(tmp_path / "n.gwx")
        assert ts.n == 2048
        code = run("noise", "--duration", "2.0", "--fs", "1024", "--seed", "7",
                   "--out", str(tmp_path / "again"), "--name", "n.gwx")
        assert code == 0
        again = load_strain(tmp_path / "again" / "n.gwx")
        np.testing.assert_array_equal(ts.samples, again.samples)

    def test_template_and_bogus(self, tmp_path):
        assert run("template", "--kind", "gw151226", "--fs", "1024",
                   "--out", str(tmp_path)) == 0
        assert (tmp_path / "gw151226.gwx").exists()
        assert (tmp_path / "gw151226.json").exists()
        assert run("bogus", "--template", str(tmp_path / "gw151226"),
                   "--sigma-phase", "0.5", "--seed", "3",
                   "--out", str(tmp_path), "--name", "b.gwx") == 0
        bogus = load_strain(tmp_path / "b.gwx")
        ideal = load_strain(tmp_path / "gw151226.gwx")
        assert bogus.n == ideal.n

    def test_inject_and_psd_and_filters(self, tmp_path, noise_file, template_file):
        assert run("inject", "--host", str(noise_file), "--signal", str(template_file),
                   "--at", "4.0", "--out", str(tmp_path), "--name", "inj.gwx") == 0
        assert run("psd", "--strain", str(noise_file), "--segment", "2.0",
                   "--out", str(tmp_path)) == 0
        psd_lines = (tmp_path / "psd.csv").read_text().splitlines()
        assert psd_lines[0] == "f_hz,psd"
        assert run("bandpass", "--strain", str(noise_file), "--band", "43:300",
                   "--order", "4", "--out", str(tmp_path)) == 0
        assert run("whiten", "--strain", str(noise_file),
                   "--psd", str(tmp_path / "psd.csv"),
                   "--whiten", "localized", "--line-threshold", "10",
                   "--line-window-hz", "8", "--out", str(tmp_path)) == 0
        assert (tmp_path / "whitened.gwx").exists()

    def test_mf_outputs(self, tmp_path, noise_file, template_file, capsys):
        code = run("mf", "--strain", str(noise_file), "--template", str(template_file),
                   "--psd", "model", "--mode", "cyclic_prefix", "--no-reweight",
                   "--out", str(tmp_path))
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert "peak_rho" in payload and "peak_time_s" in payload
        header = (tmp_path / "snr.csv").read_text().splitlines()[0]
        assert header == "t_s,rho,rho_reweighted"

    def test_ccf_outputs(self, tmp_path, template_file, capsys):
        code = run("ccf", "--a", str(template_file), "--b", str(template_file),
                   "--max-lag", "0.15", "--out", str(tmp_path))
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["peak_ccf"] == pytest.approx(1.0, abs=1e-9)
        assert payload["peaky"] is True
        header = (tmp_path / "ccf.csv").read_text().splitlines()[0]
        assert header == "lag_s,ccf"

    def test_running_ccf(self, tmp_path, noise_file, template_file, capsys):
        code = run("running-ccf", "--strain", str(noise_file),
                   "--template", str(template_file), "--hop", "1.0",
                   "--exclude", "0:1", "--out", str(tmp_path))
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["n_windows"] > 0
        header = (tmp_path / "running.csv").read_text().splitlines()[0]
        assert header == "t_start_s,peak_abs_ccf,r3"

    def test_far(self, capsys):
        assert run("far", "--nb", "0", "--t", "1", "--tb", "1") == 0
        value = float(capsys.readouterr().out.strip())
        assert value == pytest.approx(1 - math.exp(-1))


class TestScenarioCommand:
    def test_list(self, capsys):
        assert run("scenario", "list") == 0
        out = capsys.readouterr().out
        assert "mf-sine-misfire" in out
        assert out.count(":") >= 10

    def test_list_scenarios_flag(self, capsys):
        assert run("--list-scenarios") == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 10

    def test_run_writes_reports(self, tmp_path, capsys):
        code = run("scenario", "run", "h1l1-ccf", "--trials", "3", "--seed", "21",
                   "--out", str(tmp_path))
        assert code == 0
        out_dir = tmp_path / "h1l1-ccf"
        assert (out_dir / "summary.json").exists()
        assert (out_dir / "trials.csv").exists()
        summary = json.loads((out_dir / "summary.json").read_text())
        assert summary["scenario"] == "h1l1-ccf"
        assert summary["trials"] == 3

    def test_run_without_name_fails(self, capsys):
        assert run("scenario", "run") == 2


class TestExitCodes:
    def test_missing_file_is_validation(self, tmp_path):
        assert run("psd", "--strain", str(tmp_path / "missing.gwx"),
                   "--out", str(tmp_path)) == 2

    def test_bad_band_is_validation(self, tmp_path, noise_file):
        assert run("bandpass", "--strain", str(noise_file), "--band", "300:43",
                   "--out", str(tmp_path)) == 2

    def test_degenerate_input_is_exit_3(self, tmp_path):
        zero = tmp_path / "zero.gwx"
        save_strain(TimeSeries(FS, 0.0, np.zeros(512)), zero)
        assert run("ccf", "--a", str(zero), "--b", str(zero),
                   "--max-lag", "0.1", "--out", str(tmp_path)) == 3

    def test_far_rejects_bad_params(self, capsys):
        assert run("far", "--nb", "-1", "--t", "1", "--tb", "1") == 2

    def test_binary_strain_file_is_validation(self, tmp_path):
        junk = tmp_path / "junk.gwx"
        junk.write_bytes(bytes(range(256)))
        assert run("psd", "--strain", str(junk), "--out", str(tmp_path)) == 2

    def test_unwritable_output_dir(self, tmp_path, noise_file):
        assert run("bandpass", "--strain", str(noise_file), "--band", "43:300",
                   "--out", "/proc/nope") == 2
