import numpy as np
import pytest
from numpy.testing import assert_allclose

from qadvlab.attacks import AttackConfig, AttackSpace, attack_batch
from qadvlab.datasets import GaussianTaskSpec, gen_dataset
from qadvlab.embeddings import EmbeddingFamily, EmbeddingSpec
from qadvlab.model import ModelConfig, build_model, input_losses
from qadvlab.training import Optimizer, RiskTable, TrainConfig, estimate_risks, train_adversarial


def test_zero_epochs_leave_model_unchanged(small_model, tiny_data):
    train, _ = tiny_data
    result = train_adversarial(small_model, train, TrainConfig(epochs=0))
    assert np.array_equal(result.model.angles, small_model.angles)
    assert result.trace == []
    assert result.trace_rows() == []


def test_plain_descent_lowers_clean_risk(small_model, tiny_data):
    train, _ = tiny_data
    result = train_adversarial(small_model, train, TrainConfig(epochs=10, learning_rate=0.001))
    assert len(result.trace) == 10
    assert np.all(np.diff(result.trace) <= 1e-15)
    assert result.trace[-1] < result.trace[0]
    assert result.trace[0] == pytest.approx(input_losses(small_model, train.X, train.y).mean())


def test_trace_records_risk_before_each_update(small_model, tiny_data):
    train, _ = tiny_data
    attack = AttackConfig(epsilon=0.1)
    result = train_adversarial(small_model, train, TrainConfig(epochs=2, attack=attack))
    first = attack_batch(small_model, train.X, train.y, attack).losses.mean()
    assert result.trace[0] == pytest.approx(first)
    rows = result.trace_rows()
    assert [r["epoch"] for r in rows] == [0, 1]


def test_epoch_callback(small_model, tiny_data):
    train, _ = tiny_data
    seen = []
    result = train_adversarial(
        small_model,
        train,
        TrainConfig(epochs=3, attack=AttackConfig(space=AttackSpace.QUANTUM, p=2.0, epsilon=0.05)),
        on_epoch=lambda epoch, model, risk: seen.append((epoch, model, risk)),
    )
    assert [e for e, _, _ in seen] == [0, 1, 2]
    assert [r for _, _, r in seen] == result.trace
    assert np.array_equal(seen[-1][1].angles, result.model.angles)


def test_adam_moves_every_angle_by_about_lr(small_model, tiny_data):
    train, _ = tiny_data
    result = train_adversarial(small_model, train, TrainConfig(epochs=1, learning_rate=0.01, optimizer=Optimizer.ADAM))
    step = np.abs(result.model.angles - small_model.angles)
    assert np.all(step <= 0.01 + 1e-9)
    assert np.max(step) == pytest.approx(0.01, rel=1e-3)


def test_training_is_deterministic(small_model, tiny_data):
    train, _ = tiny_data
    cfg = TrainConfig(epochs=2, attack=AttackConfig(epsilon=0.1))
    a = train_adversarial(small_model, train, cfg)
    b = train_adversarial(small_model, train, cfg)
    assert np.array_equal(a.model.angles, b.model.angles)
    assert a.trace == b.trace


@pytest.mark.parametrize("space", [AttackSpace.CLASSICAL, AttackSpace.QUANTUM])
def test_adversarial_risk_dominates_clean(small_model, tiny_data, space):
    train, test = tiny_data
    risks = estimate_risks(small_model, train, test, AttackConfig(space=space, p=2.0, epsilon=0.2))
    assert risks.adv_train >= risks.clean_train
    assert risks.adv_test >= risks.clean_test
    assert risks.clean_train_stderr > 0


def test_risks_without_attack_coincide(small_model, tiny_data):
    train, test = tiny_data
    risks = estimate_risks(small_model, train, test, None)
    assert risks.adv_train == risks.clean_train
    assert risks.adv_gap == pytest.approx(risks.clean_gap)


def test_risk_table_gaps():
    table = RiskTable(clean_train=0.1, clean_test=0.3, adv_train=0.2, adv_test=0.6)
    row = table.as_row()
    assert_allclose([row["clean_gap"], row["adv_gap"]], [0.2, 0.4])
    assert row["adv_test_stderr"] == 0.0


def test_clean_training_lowers_risk_across_seeds():
    spec = EmbeddingSpec(family=EmbeddingFamily.ANGLE, input_dim=2)
    cfg = TrainConfig(attack=AttackConfig(epsilon=0.0))
    lowered = 0
    for seed in range(10):
        train, _ = gen_dataset(GaussianTaskSpec(d=2, train_m=20, test_m=1, seed=seed))
        model = build_model(spec, ModelConfig(), seed=seed)
        trained = train_adversarial(model, train, cfg).model
        before = input_losses(model, train.X, train.y).mean()
        after = input_losses(trained, train.X, train.y).mean()
        lowered += int(after < before)
    assert lowered >= 9
