from pathlib import Path

import pytest

from qadvlab.attacks import AttackConfig, AttackSpace
from qadvlab.config import ExperimentConfig, Theorem, load_config, parse_config, quantum_attack
from qadvlab.embeddings import EmbeddingFamily
from qadvlab.errors import ConfigError, UnsupportedOrder
from qadvlab.qmath import INF

CONFIG_DIR = Path(__file__).resolve().parents[2] / "config"


def test_empty_config_is_complete():
    cfg = parse_config({})
    assert cfg == ExperimentConfig()
    assert cfg.embedding.family is EmbeddingFamily.ANGLE
    assert cfg.attack.p == INF
    assert cfg.bounds.theorem is Theorem.ALL


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.name)
def test_shipped_configs_load(path):
    cfg = load_config(path)
    assert cfg.embedding.input_dim == cfg.task.d


def test_rc_bound_config():
    cfg = load_config(CONFIG_DIR / "rc_bound.json")
    assert cfg.bounds.theorem is Theorem.RC
    assert cfg.bounds.r == 2.0 and cfg.bounds.b == 1.0


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigError):
        parse_config({"task": {"dims": 3}})
    with pytest.raises(ConfigError):
        parse_config({"extra_block": {}})


def test_dimension_mismatch_is_rejected():
    with pytest.raises(ConfigError):
        parse_config({"task": {"d": 3}})


def test_order_strings():
    cfg = parse_config({"attack": {"p": "∞"}, "bounds": {"r": 1}})
    assert cfg.attack.p == INF
    assert cfg.model_dump(mode="json")["attack"]["p"] == "inf"
    with pytest.raises(UnsupportedOrder):
        parse_config({"attack": {"p": 0.5}})


def test_load_config_errors(tmp_path):
    assert load_config(None) == ExperimentConfig()
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("{oops")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_training_inherits_attack_block():
    cfg = parse_config({"attack": {"epsilon": 0.1}})
    assert cfg.training.attack == cfg.attack
    own = AttackConfig(epsilon=0.05)
    cfg = cfg.model_copy(update={"train": cfg.train.model_copy(update={"attack": own})})
    assert cfg.training.attack == own


def test_with_seed_and_dimension():
    cfg = ExperimentConfig().with_seed(7)
    assert (cfg.task.seed, cfg.train.seed, cfg.attack.seed) == (7, 7, 7)
    moved = cfg.with_dimension(EmbeddingFamily.AMPLITUDE, 6, noise=0.01)
    assert moved.task.d == 6 and moved.embedding.input_dim == 6
    assert moved.embedding.hilbert_dim == 8
    assert moved.embedding.depolarize_lambda == 0.01


def test_quantum_attack_override():
    attack = quantum_attack(ExperimentConfig(), 0.005)
    assert attack.space is AttackSpace.QUANTUM
    assert attack.epsilon == 0.005
