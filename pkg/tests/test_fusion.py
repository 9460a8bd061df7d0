import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hisres.errors import DimensionError
from hisres.fusion import SelfGate, export_gate_weights, self_gate, write_gate_csv
from hisres.numerics import Tensor, grad_check, ops


def zero_gate(dim, bias=0.0):
    return SelfGate(Tensor(np.zeros((dim, dim)), requires_grad=True), Tensor(np.full(dim, bias), requires_grad=True))


def test_zero_gate_is_average(rng):
    a, b = Tensor(rng.normal(size=(4, 3))), Tensor(rng.normal(size=(4, 3)))
    np.testing.assert_allclose(self_gate(a, b, zero_gate(3)).data, (a.data + b.data) / 2)


def test_equal_inputs(rng):
    a = Tensor(rng.normal(size=(4, 3)))
    gate = SelfGate.init(3, rng)
    np.testing.assert_allclose(self_gate(a, a, gate).data, a.data)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 8), st.integers(1, 6))
def test_envelope(seed, n, d):
    rng = np.random.default_rng(seed)
    a, b = Tensor(rng.normal(0, 3, size=(n, d))), Tensor(rng.normal(0, 3, size=(n, d)))
    gate = SelfGate(Tensor(rng.normal(0, 3, size=(d, d))), Tensor(rng.normal(size=d)))
    out = self_gate(a, b, gate).data
    assert np.all(out >= np.minimum(a.data, b.data) - 1e-12)
    assert np.all(out <= np.maximum(a.data, b.data) + 1e-12)


def test_gate_reads_first_argument(rng):
    a, b = Tensor(rng.normal(size=(4, 3))), Tensor(rng.normal(size=(4, 3)))
    gate = SelfGate.init(3, rng)
    theta = gate.gate(a).data
    np.testing.assert_allclose(self_gate(a, b, gate).data, theta * a.data + (1 - theta) * b.data)


def test_shape_mismatch():
    with pytest.raises(DimensionError):
        self_gate(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 3))), zero_gate(3))


def test_gradient(rng):
    a = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    b = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    gate = SelfGate.init(3, rng)
    f = lambda: ops.tsum(self_gate(a, b, gate) * self_gate(a, b, gate))
    assert grad_check(f, [a, b, gate.weight, gate.bias]) < 1e-4


class TestExport:
    def test_zero_gate_half(self, rng):
        np.testing.assert_array_equal(export_gate_weights(zero_gate(3), Tensor(rng.normal(size=(5, 3)))), 0.5)

    def test_saturation(self, rng):
        means = export_gate_weights(zero_gate(3, bias=20.0), Tensor(rng.normal(size=(5, 3))))
        np.testing.assert_allclose(means, 1.0, atol=1e-8)

    def test_csv(self, rng, tmp_path):
        means = export_gate_weights(SelfGate.init(3, rng), Tensor(rng.normal(size=(7, 3))))
        path = write_gate_csv(tmp_path / "g.csv", means)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["entity_id", "mean_gate"]
        assert len(rows) - 1 == 7
        np.testing.assert_array_equal([float(r[1]) for r in rows[1:]], means)
