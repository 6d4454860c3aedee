import json
import os
import subprocess

import numpy as np
import pytest

import habench


def make_values(rng, n_per_site, v, shifts):
    blocks = []
    sites = []
    for label, shift in shifts.items():
        blocks.append(shift + 0.1 * rng.standard_normal((n_per_site, v)))
        sites += [label] * n_per_site
    return np.vstack(blocks), sites


def test_combat_equalizes_site_means():
    rng = np.random.default_rng(1)
    values, sites = make_values(rng, 12, 40, {"A": 0.0, "B": 0.5, "C": -0.3})
    adjusted = habench.combat(values, sites, eb=False)
    for k in range(values.shape[1]):
        means = [adjusted[np.array(sites) == s, k].mean() for s in "ABC"]
        assert max(means) - min(means) < 1e-8


def test_report_keys_and_null():
    rng = np.random.default_rng(2)
    values, sites = make_values(rng, 10, 30, {"A": 0.0, "B": 0.0})
    rep = habench.site_effect_report(values, sites, alpha=0.05)
    assert rep["f"].shape == (30,)
    assert rep["n_F"] == 0
    assert rep["n_t"] is None


def test_pipeline_detects_and_removes_site_effect():
    rng = np.random.default_rng(3)
    values, sites = make_values(rng, 20, 25, {"A": 0.0, "B": 1.0})
    raw = habench.site_effect_report(values, sites)
    assert raw["f_F"] == 1.0
    harmonized = habench.site_effect_report(habench.combat(values, sites), sites)
    assert harmonized["n_F"] == 0


def test_special_functions():
    assert habench.f_sf(1.0, 2, 2) == pytest.approx(0.5, abs=1e-12)
    assert habench.t_sf(0.0, 5) == pytest.approx(0.5, abs=1e-12)
    assert habench.bonferroni_threshold(0.05, 10) == pytest.approx(0.005)


def test_volume_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    data = rng.standard_normal((4, 3, 2))
    path = str(tmp_path / "vol.nii.gz")
    habench.write_volume(path, data)
    back, affine = habench.read_volume(path)
    assert np.array_equal(back, data)
    assert affine.shape == (4, 4)


def test_generate_bundle(tmp_path):
    spec = {
        "seed": 11,
        "dims": [4, 4, 3],
        "sites": [{"label": "A", "n_images": 3}, {"label": "B", "n_images": 3}],
        "noise_sd": 0.05,
    }
    out = tmp_path / "bundle"
    habench.generate_bundle(json.dumps(spec), str(out))
    assert (out / "samples.csv").exists()
    assert (out / "mask.nii.gz").exists()


def test_errors_are_typed():
    with pytest.raises(Exception, match="sites length"):
        habench.combat(np.zeros((4, 5)), ["A", "B"])


def test_cli_runs_if_available():
    cli = os.environ.get("HABENCH_CLI")
    if not cli:
        pytest.skip("HABENCH_CLI not set")
    result = subprocess.run([cli, "--help"], capture_output=True, text=True)
    assert result.returncode == 0
    assert "harmonize" in result.stdout
