import json
from dataclasses import asdict

import numpy as np

from logoforge.stability import StabilityConfig, _entropy, _one_run, run_stability_study


def tiny_cfg(**kw):
    base = dict(
        modes=4, corpus_size=128, seeds=(0,), iters=6, batch_size=16,
        latent_dim=8, widths=(8, 16), eval_samples=64, probe_every=3,
        warmup_fraction=0.0, workers=1,
    )
    base.update(kw)
    return StabilityConfig(**base)


def test_entropy_helper():
    assert _entropy(np.array([1.0, 1.0, 1.0, 1.0])) == np.log(4)
    assert _entropy(np.array([8.0, 0.0])) == 0.0


def test_single_run_record_shape():
    rec = _one_run((asdict(tiny_cfg()), "lc", 0))
    assert rec["conditioning"] == "lc"
    assert rec["seed"] == 0
    assert len(rec["trajectory"]) == 2
    assert 0.0 <= rec["final"] <= 1.0 + 1e-9
    assert rec["min_post_warmup"] <= max(rec["trajectory"]) + 1e-9
    assert not rec["aborted"]


def test_warmup_excludes_early_probes():
    rec_all = _one_run((asdict(tiny_cfg(warmup_fraction=0.0)), "none", 1))
    rec_late = _one_run((asdict(tiny_cfg(warmup_fraction=0.5)), "none", 1))
    # same trajectory, different scoring window
    assert rec_all["trajectory"] == rec_late["trajectory"]
    assert rec_late["min_post_warmup"] >= rec_all["min_post_warmup"] - 1e-12


def test_report_structure_and_thresholds(tmp_path):
    scfg = tiny_cfg(seeds=(0, 1), min_collapsed_unconditional=0, min_retained_conditional=0)
    path = tmp_path / "report.json"
    rep = run_stability_study(scfg, report_path=path)
    assert len(rep["runs"]) == 4
    assert rep["unconditional_pass"] and rep["conditional_pass"] and rep["pass"]
    on_disk = json.loads(path.read_text())
    assert on_disk["config"]["modes"] == 4
    assert {r["conditioning"] for r in on_disk["runs"]} == {"none", "lc"}
    for r in on_disk["runs"]:
        assert "trajectory" in r and "min_post_warmup" in r and "final" in r
