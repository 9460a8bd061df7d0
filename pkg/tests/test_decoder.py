import numpy as np
import pytest

from hisres.context import ForwardContext
from hisres.decoder import ConvTransE, joint_loss, score_entities, score_relations
from hisres.errors import ConfigError
from hisres.numerics import Tensor, grad_check, ops

EVAL = ForwardContext(training=False)


def zero_decoder(dim, channels=3, kernel=3):
    z = lambda *s: Tensor(np.zeros(s), requires_grad=True)
    return ConvTransE(z(channels, 2, kernel), z(channels), z(dim, channels * dim), z(dim))


def test_zero_params_uniform(rng):
    logits = score_entities(Tensor(rng.normal(size=(2, 4))), Tensor(rng.normal(size=(2, 4))),
                            Tensor(rng.normal(size=(7, 4))), zero_decoder(4), EVAL)
    np.testing.assert_allclose(ops.softmax(logits).data, 1 / 7)
    rel = score_relations(Tensor(rng.normal(size=(2, 4))), Tensor(rng.normal(size=(2, 4))),
                          Tensor(rng.normal(size=(6, 4))), zero_decoder(4), EVAL)
    np.testing.assert_allclose(ops.softmax(rel).data, 1 / 6)


def test_batch_independence(rng):
    dec = ConvTransE.init(4, 3, 3, rng)
    cand = Tensor(rng.normal(size=(6, 4)))
    s, r = rng.normal(size=(1, 4)), rng.normal(size=(1, 4))
    one = score_entities(Tensor(s), Tensor(r), cand, dec, EVAL).data
    two = score_entities(Tensor(np.vstack([s, s])), Tensor(np.vstack([r, r])), cand, dec, EVAL).data
    # BLAS may block a 2-row product differently; equal up to rounding
    np.testing.assert_allclose(two[0], one[0], rtol=0, atol=1e-12)
    np.testing.assert_array_equal(two[0], two[1])


def test_deterministic():
    a = ConvTransE.init(4, 3, 3, np.random.default_rng(9))
    b = ConvTransE.init(4, 3, 3, np.random.default_rng(9))
    for (_, x), (_, y) in zip(a.named_parameters(), b.named_parameters()):
        np.testing.assert_array_equal(x.data, y.data)


def test_even_kernel_rejected(rng):
    with pytest.raises(ConfigError):
        ConvTransE.init(4, 3, 2, rng)


@pytest.mark.parametrize("which", ["entity", "relation"])
def test_gradient(rng, which):
    dec = ConvTransE.init(4, 3, 3, rng)
    dec.conv_bias.data[:] = rng.normal(size=3)
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    cand = Tensor(rng.normal(size=(5, 4)), requires_grad=True)
    score = score_entities if which == "entity" else score_relations
    f = lambda: ops.cross_entropy(score(a, b, cand, dec, EVAL), np.array([0, 2, 4]))
    params = [p for _, p in dec.named_parameters()]
    assert grad_check(f, [a, b, cand] + params, max_coords=20) < 1e-3


class TestJointLoss:
    def test_alpha_one_is_entity_loss(self, rng):
        el, rl = Tensor(rng.normal(size=(3, 5))), Tensor(rng.normal(size=(3, 4)))
        t = np.array([0, 1, 2])
        assert joint_loss(el, t, rl, t, 1.0).item() == ops.cross_entropy(el, t).item()

    def test_arithmetic(self):
        # logits chosen so that CE_e = 1.0 and CE_r = 2.0 exactly
        el = Tensor(np.array([[0.0, np.log(np.e - 1)]]))
        rl = Tensor(np.array([[0.0, np.log(np.e ** 2 - 1)]]))
        ce_e = ops.cross_entropy(el, [0]).item()
        ce_r = ops.cross_entropy(rl, [0]).item()
        assert ce_e == pytest.approx(1.0, abs=1e-12) and ce_r == pytest.approx(2.0, abs=1e-12)
        assert joint_loss(el, [0], rl, [0], 0.7).item() == pytest.approx(1.3, abs=1e-12)

    def test_perfect(self):
        el = Tensor(np.array([[1e3, 0, 0]]))
        rl = Tensor(np.array([[0, 1e3]]))
        assert joint_loss(el, [0], rl, [1], 0.7).item() < 1e-6

    def test_alpha_range(self):
        with pytest.raises(ConfigError):
            joint_loss(Tensor(np.zeros((1, 2))), [0], Tensor(np.zeros((1, 2))), [0], 1.5)
