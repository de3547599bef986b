import json
import math

import pytest

from impatientq.cli import main, replication_seed
from impatientq.config import load_config, parse_config
from impatientq.errors import ConfigurationError
from impatientq.sequences import Deterministic, Exponential, LatticeDiscrete, Uniform

MM2D_INI = """
[experiment]
servers = 2
seed = 2024

[model]
kind = iid

[tau]
dist = exponential
rate = 1.0

[sigma]
dist = exponential
rate = 0.6

[patience]
dist = deterministic
value = 1.0

[run]
n_arrivals = 5000
n_samples = 5000
warmup = 500
renovation_start = 0
renovation_end = 199
"""

LATTICE_INI = """
[experiment]
servers = 2
seed = 7

[model]
kind = lattice
alpha = 1.0

[tau]
dist = lattice
alpha = 1.0
multipliers = 2 3
probs = 0.5 0.5

[sigma]
dist = lattice
alpha = 1.0
multipliers = 1 2
probs = 0.6 0.4

[patience]
dist = uniform
low = 0.0
high = 1.5

[run]
n_arrivals = 2000
hset_depth = 8
"""

MM_INI = """
[experiment]
servers = 2
seed = 11

[model]
kind = markov_modulated
burn_in = 2000

[modulation]
transition = 0.9 0.1 / 0.2 0.8

[state0.tau]
dist = exponential
rate = 1.0

[state0.sigma]
dist = exponential
rate = 1.0

[state0.patience]
dist = deterministic
value = 1.0

[state1.tau]
dist = exponential
rate = 3.0

[state1.sigma]
dist = exponential
rate = 0.5

[state1.patience]
dist = uniform
low = 0.0
high = 2.0

[run]
n_arrivals = 3000
"""


def test_parse_config_iid():
    cfg = parse_config(MM2D_INI)
    assert cfg.servers == 2
    assert cfg.spec.seed == 2024
    assert cfg.spec.tau == Exponential(1.0)
    assert cfg.spec.sigma == Exponential(0.6)
    assert cfg.spec.patience == Deterministic(1.0)
    assert cfg.run.n_arrivals == 5000
    assert cfg.run.batches == 30  # default
    assert len(cfg.sha256) == 64


def test_parse_config_lattice_and_mm():
    lat = parse_config(LATTICE_INI)
    assert lat.spec.is_lattice and lat.spec.alpha == 1.0
    assert lat.spec.tau == LatticeDiscrete(1.0, (2, 3), (0.5, 0.5))
    assert lat.spec.patience == Uniform(0.0, 1.5)
    mm = parse_config(MM_INI)
    assert mm.spec.model == "markov_modulated"
    assert mm.spec.modulation.n_states() == 2
    assert mm.spec.burn_in == 2000


def test_parse_config_seed_override():
    cfg = parse_config(MM2D_INI, seed_override=99)
    assert cfg.spec.seed == 99


def test_parse_config_inf_patience():
    text = MM2D_INI.replace("dist = deterministic\nvalue = 1.0", "dist = deterministic\nvalue = inf")
    cfg = parse_config(text)
    assert cfg.spec.patience.value == math.inf


@pytest.mark.parametrize("mutate", [
    lambda t: t.replace("servers = 2", "servers = 0"),
    lambda t: t.replace("dist = exponential\nrate = 1.0", "dist = exponential\nrate = -1.0", 1),
    lambda t: t.replace("dist = exponential", "dist = mystery", 1),
    lambda t: t.replace("n_arrivals = 5000", "n_arrivals = 0"),
    lambda t: t.replace("n_arrivals = 5000", "frobnicate = 3"),
    lambda t: t.replace("[tau]", "[tau-gone]"),
    lambda t: "not ini at all {{{",
])
def test_parse_config_errors(mutate):
    with pytest.raises(ConfigurationError):
        parse_config(mutate(MM2D_INI))


def test_replication_seed_distinct():
    seeds = {replication_seed(2024, r) for r in range(10)}
    assert len(seeds) == 10
    assert replication_seed(2024, 0) == 2024


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_validate_and_outputs(tmp_path):
    cfg = _write(tmp_path, "cfg.ini", MM2D_INI)
    out = tmp_path / "out"
    assert main(["validate", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads((out / "validate.json").read_text())
    assert payload["passed"] is True
    assert payload["max_discrepancy"] <= 1e-9
    assert payload["config_sha256"] == load_config(cfg).sha256
    assert payload["seed"] == 2024


def test_cli_bad_config_exit_2(tmp_path):
    cfg = _write(tmp_path, "bad.ini", MM2D_INI.replace("servers = 2", "servers = 0"))
    assert main(["validate", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert main(["validate", "--config", str(tmp_path / "missing.ini"),
                 "--out", str(tmp_path)]) == 2


def test_cli_simulate_trace(tmp_path):
    cfg = _write(tmp_path, "cfg.ini", MM2D_INI)
    out = tmp_path / "out"
    assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
    trace = (out / "trace.csv").read_text().strip().split("\n")
    assert trace[0].startswith("# config_sha256=") and "seed=2024" in trace[0]
    assert trace[1] == "index,W1,W2,served,loss"
    assert len(trace) == 5002
    payload = json.loads((out / "simulate.json").read_text())
    assert payload["losses"] == sum(int(line.split(",")[-1]) for line in trace[2:])


def test_cli_bounds_and_reproducibility(tmp_path):
    cfg = _write(tmp_path, "cfg.ini", MM2D_INI)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["bounds", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["bounds", "--config", cfg, "--out", str(out2)]) == 0
    assert (out1 / "bounds.json").read_bytes() == (out2 / "bounds.json").read_bytes()
    assert (out1 / "bounds_samples.csv").read_bytes() == (out2 / "bounds_samples.csv").read_bytes()
    payload = json.loads((out1 / "bounds.json").read_text())
    assert payload["all_orderings_ok"] is True
    assert len(payload["replications"]) == 1


def test_cli_bounds_replications(tmp_path):
    text = MM2D_INI.replace("renovation_end = 199", "renovation_end = 199\nreplications = 3")
    cfg = _write(tmp_path, "cfg.ini", text)
    out = tmp_path / "out"
    assert main(["bounds", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads((out / "bounds.json").read_text())
    assert len(payload["replications"]) == 3
    seeds = {r["seed"] for r in payload["replications"]}
    assert len(seeds) == 3


def test_cli_bounds_worker_pool_matches_serial(tmp_path):
    text = MM2D_INI.replace("renovation_end = 199", "renovation_end = 199\nreplications = 2")
    cfg = _write(tmp_path, "cfg.ini", text)
    serial, pooled = tmp_path / "serial", tmp_path / "pooled"
    assert main(["bounds", "--config", cfg, "--out", str(serial)]) == 0
    assert main(["bounds", "--config", cfg, "--out", str(pooled), "--threads", "2"]) == 0
    assert (serial / "bounds.json").read_bytes() == (pooled / "bounds.json").read_bytes()


def test_cli_seed_override_changes_output(tmp_path):
    cfg = _write(tmp_path, "cfg.ini", MM2D_INI)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["simulate", "--config", cfg, "--seed", "31337", "--out", str(out2)]) == 0
    a = json.loads((out1 / "simulate.json").read_text())
    b = json.loads((out2 / "simulate.json").read_text())
    assert a["seed"] == 2024 and b["seed"] == 31337
    assert a["loss_probability"] != b["loss_probability"]


def test_cli_cftp_renovate(tmp_path):
    cfg = _write(tmp_path, "cfg.ini", MM2D_INI)
    out = tmp_path / "out"
    assert main(["cftp", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads((out / "cftp.json").read_text())
    assert payload["coalesced"] is True and len(payload["value"]) == 2
    assert main(["renovate", "--config", cfg, "--out", str(out)]) == 0
    scan = json.loads((out / "renovate.json").read_text())
    assert scan["n_events"] >= 1
    lines = (out / "renovate.csv").read_text().strip().split("\n")
    assert lines[0].startswith("# config_sha256=")
    assert lines[1] == "index,checked_length,Y1,Y2,tau_sum_2"
    assert len(lines) == scan["n_events"] + 2


def test_cli_cftp_not_coalesced_exit_1(tmp_path):
    text = """
[experiment]
servers = 1
seed = 5

[model]
kind = deterministic

[tau]
dist = deterministic
value = 1.0

[sigma]
dist = deterministic
value = 1.2

[patience]
dist = deterministic
value = 1.0

[run]
cftp_initial_horizon = 8
cftp_max_horizon = 64
"""
    cfg = _write(tmp_path, "cfg.ini", text)
    out = tmp_path / "out"
    assert main(["cftp", "--config", cfg, "--out", str(out)]) == 1
    payload = json.loads((out / "cftp.json").read_text())
    assert payload["coalesced"] is False and payload["value"] is None


def test_cli_hset(tmp_path):
    cfg = _write(tmp_path, "cfg.ini", LATTICE_INI)
    out = tmp_path / "out"
    assert main(["hset", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads((out / "hset.json").read_text())
    assert payload["all_nested"] is True
    sizes = payload["sizes"]
    assert len(sizes) == 9
    assert all(a >= b for a, b in zip(sizes, sizes[1:]))
    lines = (out / "hset.csv").read_text().strip().split("\n")
    assert lines[0].startswith("# config_sha256=")
    assert lines[1] == "depth,size,nested_in_previous,box_size"
    assert len(lines) == 11


def test_cli_hset_on_non_lattice_exit_2(tmp_path):
    cfg = _write(tmp_path, "cfg.ini", MM2D_INI)
    assert main(["hset", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_cli_lattice_validate_exact(tmp_path):
    cfg = _write(tmp_path, "cfg.ini", LATTICE_INI)
    out = tmp_path / "out"
    assert main(["validate", "--config", cfg, "--out", str(out)]) == 0
    payload = json.loads((out / "validate.json").read_text())
    assert payload["max_discrepancy"] == 0.0
    assert payload["passed"] is True


def test_cli_markov_modulated_validate(tmp_path):
    cfg = _write(tmp_path, "cfg.ini", MM_INI)
    out = tmp_path / "out"
    assert main(["validate", "--config", cfg, "--out", str(out)]) == 0
