import numpy as np
import pytest

from hisres.checkpoint import load_checkpoint, save_checkpoint
from hisres.config import RunConfig
from hisres.errors import CheckpointError, ConfigError
from hisres.model import HisRES
from hisres.synthetic import GeneratorSpec, generate
from hisres.training import evaluate, evaluate_baseline, model_from_checkpoint, train


@pytest.fixture(scope="module")
def bundle():
    return generate(GeneratorSpec(num_entities=8, num_relations=3, num_timestamps=14, period=3,
                                  facts_per_step=3, noise=0.3, seed=2, split=(0.6, 0.2, 0.2))).bundle


def small(**kw):
    base = dict(dim=8, history_len=3, omega=2, layers=1, epochs=2, channels=4, seed=7)
    base.update(kw)
    return RunConfig(**base)


def test_same_seed_same_loss(bundle):
    a = train(small(epochs=1), bundle).losses[0]
    b = train(small(epochs=1), bundle).losses[0]
    assert abs(a - b) <= 1e-12


def test_different_seed_differs(bundle):
    assert train(small(epochs=1), bundle).losses[0] != train(small(epochs=1, seed=8), bundle).losses[0]


def test_omega_above_history_rejected(bundle):
    with pytest.raises(ConfigError):
        train(small(omega=4, history_len=3), bundle)


def test_checkpoint_round_trip(bundle, tmp_path):
    result = train(small(), bundle)
    before = evaluate(result.model, bundle, "test")
    path = save_checkpoint(result.checkpoint(), tmp_path / "m.ckpt")
    ckpt = load_checkpoint(path)
    for name, p in result.model.parameters().items():
        assert ckpt.params[name].tobytes() == p.data.tobytes()
    after = evaluate(model_from_checkpoint(ckpt), bundle, "test")
    assert abs(after.mrr - before.mrr) <= 1e-12
    assert after.to_dict() == before.to_dict()


def test_resume_matches_uninterrupted(bundle, tmp_path):
    full = train(small(epochs=3), bundle)
    part = train(small(epochs=1), bundle)
    path = save_checkpoint(part.checkpoint(), tmp_path / "part.ckpt")
    resumed = train(small(epochs=3), bundle, resume=load_checkpoint(path))
    assert resumed.epoch == 3
    np.testing.assert_allclose(resumed.losses, full.losses, rtol=0, atol=1e-9)


def test_corrupt_checkpoint(tmp_path):
    (tmp_path / "bad.ckpt").write_bytes(b"NOTACKPT" + b"\0" * 20)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "bad.ckpt")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.ckpt")


def test_truncated_checkpoint(bundle, tmp_path):
    path = save_checkpoint(train(small(epochs=1), bundle).checkpoint(), tmp_path / "m.ckpt")
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_noise_zero_bitwise(bundle):
    model = train(small(epochs=1), bundle).model
    plain = evaluate(model, bundle, "test")
    noisy = evaluate(model, bundle, "test", noise_std=0.0, noise_seed=5)
    assert plain.to_dict() == noisy.to_dict()


def test_noise_changes_metrics_reproducibly(bundle):
    model = train(small(epochs=1), bundle).model
    a = evaluate(model, bundle, "test", noise_std=1.0, noise_seed=5)
    b = evaluate(model, bundle, "test", noise_std=1.0, noise_seed=5)
    assert a.to_dict() == b.to_dict()


def test_eval_query_count(bundle):
    report = evaluate(train(small(epochs=1), bundle).model, bundle, "valid")
    assert report.num_queries == 2 * sum(len(s) for s in bundle.valid)
    assert evaluate_baseline(bundle, "valid").num_queries == report.num_queries


@pytest.mark.parametrize("flags", [dict(use_inter=False), dict(use_global=False), dict(use_time=False),
                                   dict(degree_norm=True), dict(layers=2)])
def test_variants_train(bundle, flags):
    result = train(small(epochs=1, **flags), bundle)
    assert np.isfinite(result.losses[0])


def test_variant_parameter_sets(bundle):
    full = set(HisRES(8, 3, small()).parameters())
    assert any(k.startswith("convgat") for k in full)
    assert any(k.startswith("gate_recent") for k in full)
