import json

import numpy as np
import pytest

from qmclab.campaign import CampaignConfig, run_campaign, trial_seed
from qmclab.cli import main
from qmclab.errors import ConfigError
from qmclab.io import content_digest, load_state


def _lines(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_config_validation():
    with pytest.raises(ConfigError) as e:
        CampaignConfig("verify-bounds", trials=0).validate()
    assert e.value.field == "trials"
    with pytest.raises(ConfigError):
        CampaignConfig("launch").validate()
    with pytest.raises(ConfigError):
        CampaignConfig("verify-bounds", bounds=("triangle",)).validate()
    with pytest.raises(ConfigError):
        CampaignConfig("tomo-sim").validate()
    with pytest.raises(ConfigError):
        CampaignConfig("qmc-test-sim", eps=0.3, dims=(2, 2)).validate()
    with pytest.raises(ConfigError):
        CampaignConfig("budget", formula="thm9", delta=0.1).validate()
    unit = CampaignConfig("budget", formula="thm1_fidelity", delta=1.0)
    assert run_campaign(unit).result["n"] == 3200
    with pytest.raises(ConfigError):
        CampaignConfig("tomo-sim", delta=1.0).validate()
    chain = CampaignConfig("tomo-chain-sim", dims=(2, 2, 2, 2), delta=0.1)
    assert chain.validate().tolerance == 1e-8


def test_trial_seeds():
    assert trial_seed(5, 0) == trial_seed(5, 0, 0)
    seeds = {trial_seed(5, t, i) for t in range(3) for i in range(3)}
    assert len(seeds) == 9
    assert all(0 <= s < 2**64 for s in seeds)
    assert trial_seed(6, 0) != trial_seed(5, 0)


def test_verify_bounds_stream(tmp_path):
    out = tmp_path / "bounds.jsonl"
    cfg = CampaignConfig(
        "verify-bounds", trials=3, seed=1, bounds=("core_l2", "infidelity_sqrt"), out=str(out)
    )
    summary = run_campaign(cfg)
    assert summary.exit_code == 0
    records = _lines(out)
    assert [r["bound_name"] for r in records] == ["core_l2"] * 3 + ["infidelity_sqrt"] * 3
    assert [r["trial"] for r in records] == [0, 1, 2] * 2
    assert all(r["passed"] for r in records)
    saved = json.loads((tmp_path / "bounds.jsonl.summary.json").read_text())
    assert saved["groups"]["core_l2"]["passes"] == 3
    assert saved["groups"]["core_l2"]["failures"] == 0


def test_streams_are_reproducible(tmp_path):
    streams = []
    for i, workers in enumerate((1, 1, 2)):
        out = tmp_path / f"run{i}.jsonl"
        cfg = CampaignConfig(
            "verify-bounds",
            trials=2,
            seed=9,
            bounds=("petz_trace",),
            out=str(out),
            workers=workers,
        )
        run_campaign(cfg)
        streams.append(out.read_bytes())
    assert streams[0] == streams[1] == streams[2]


def test_adding_bounds_keeps_instances(tmp_path):
    alone, together = tmp_path / "alone.jsonl", tmp_path / "together.jsonl"
    run_campaign(CampaignConfig("verify-bounds", trials=2, bounds=("petz_trace",), out=str(alone)))
    run_campaign(
        CampaignConfig(
            "verify-bounds", trials=2, bounds=("core_l2", "petz_trace"), out=str(together)
        )
    )
    kept = [r for r in _lines(together) if r["bound_name"] == "petz_trace"]
    assert kept == _lines(alone)


def test_stress_verification():
    cfg = CampaignConfig("verify-bounds", trials=1, bounds=("norm_relations",), stress=True)
    summary = run_campaign(cfg)
    assert summary.exit_code == 0
    assert summary.groups["norm_relations"].min_slack >= -1e-8


@pytest.mark.parametrize(
    "cfg",
    [
        CampaignConfig("tomo-sim", trials=2, delta=0.1, stress=True),
        CampaignConfig("tomo-sim", trials=1, eps=0.3),
        CampaignConfig("tomo-chain-sim", dims=(2, 2, 2, 2), trials=2, delta=0.2),
        CampaignConfig("certify-sim", trials=2, delta=0.05, failure_prob=0.0),
        CampaignConfig("qmc-test-sim", trials=2, eps=0.3, failure_prob=0.0),
    ],
)
def test_protocol_campaigns(cfg):
    summary = run_campaign(cfg)
    assert summary.exit_code == 0
    (group,) = summary.groups.values()
    assert group.trials == cfg.trials
    assert summary.budgets


def test_gen_state_feeds_protocols(tmp_path):
    path = tmp_path / "chain.json"
    summary = run_campaign(CampaignConfig("gen-state", seed=4, state=str(path)))
    assert summary.result["dims"] == [2, 2, 2]
    rho = load_state(path)
    out = tmp_path / "tomo.jsonl"
    run_campaign(CampaignConfig("tomo-sim", delta=0.1, state=str(path), out=str(out)))
    (record,) = _lines(out)
    assert record["inputs_digest"] == content_digest(rho.matrix)
    with pytest.raises(ConfigError):
        run_campaign(CampaignConfig("tomo-sim", dims=(2, 3, 2), delta=0.1, state=str(path)))


def test_cli_budget(capsys):
    code = main(
        ["--command", "budget", "--formula", "thm2_trace", "--dims", "2,2,2",
         "--eps", "0.1", "--constants", "C=1"]
    )
    assert code == 0
    assert capsys.readouterr().out.strip() == "800"


def test_cli_errors(capsys):
    assert main(["--command", "verify-bounds", "--trials", "0"]) == 1
    assert "trials" in capsys.readouterr().err
    assert main(["--command", "launch"]) == 1
    assert main(["--command", "budget", "--constants", "C"]) == 1
    assert main(["--help"]) == 0


def test_cli_campaign(tmp_path, capsys):
    out = tmp_path / "cli.jsonl"
    code = main(
        ["--command", "verify-bounds", "--bounds", "gram_fidelity", "--trials", "2",
         "--seed", "3", "--out", str(out)]
    )
    assert code == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["groups"]["gram_fidelity"]["trials"] == 2
    assert printed["config"]["seed"] == 3
    assert len(_lines(out)) == 2
    assert np.isfinite(printed["wall_clock"])
