import numpy as np
import orjson
import pytest

from qadvlab.checkpoint import load_model, model_from_dict, model_to_dict, save_model
from qadvlab.embeddings import EmbeddingFamily, EmbeddingSpec
from qadvlab.errors import ConfigError
from qadvlab.model import ModelConfig, build_model, input_scores


def test_checkpoint_reloads_bit_exact(tmp_path, rng):
    spec = EmbeddingSpec(family=EmbeddingFamily.LLAYER_DENSE, input_dim=4, layers=2, depolarize_lambda=0.01)
    model = build_model(spec, ModelConfig(layers=3, alpha=4.0), seed=9)
    path = save_model(model, tmp_path / "nested" / "model.json")
    loaded = load_model(path)
    assert np.array_equal(loaded.angles, model.angles)
    assert loaded.embedding == model.embedding
    assert loaded.alpha == 4.0
    X = rng.normal(size=(3, 4))
    assert np.array_equal(input_scores(loaded, X), input_scores(model, X))


def test_checkpoint_is_json_with_format_tag(tmp_path, small_model):
    data = orjson.loads(save_model(small_model, tmp_path / "m.json").read_bytes())
    assert data["format"] == 1
    assert data["embedding"]["family"] == "angle"
    assert len(data["angles"]) == small_model.angles.size


def test_missing_checkpoint(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "absent.json")


def test_malformed_checkpoints(tmp_path, small_model):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_model(bad)
    data = model_to_dict(small_model)
    with pytest.raises(ConfigError):
        model_from_dict({**data, "format": 99})
    with pytest.raises(ConfigError):
        model_from_dict({k: v for k, v in data.items() if k != "angles"})
    with pytest.raises(ConfigError):
        model_from_dict({**data, "n_qubits": 5})
