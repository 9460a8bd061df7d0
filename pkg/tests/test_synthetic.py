import numpy as np
import pytest

from hisres.data import snapshots_to_quadruples
from hisres.errors import ConfigError
from hisres.synthetic import GeneratorSpec, generate


def all_facts(ds):
    return np.concatenate([snapshots_to_quadruples(ds.bundle.split(n)) for n in ("train", "valid", "test")])


def test_periodic_explicit_fact():
    ds = generate(GeneratorSpec(num_timestamps=10, period=2, facts=[(0, 0, 1)]))
    times = sorted(t for s, r, o, t in all_facts(ds).tolist() if (s, r, o) == (0, 0, 1))
    assert times == [0, 2, 4, 6, 8]


def test_periodic_unambiguous():
    ds = generate(GeneratorSpec(num_entities=10, num_relations=4, num_timestamps=20, period=2, seed=3))
    facts = all_facts(ds)
    for t in range(20):
        snap = facts[facts[:, 3] == t]
        assert len({(s, r) for s, r, *_ in snap.tolist()}) == len(snap)


def test_chain_rule():
    ds = generate(GeneratorSpec(num_entities=12, num_relations=2, num_timestamps=15, pattern="chain", seed=1))
    facts = set(map(tuple, ds.pattern_facts.tolist()))
    candidates = {}
    for a, r, b, t in facts:
        if r == 0 and t + 1 < 15:
            tails = {c for (x, rr, c, tt) in facts if (x, rr, tt) == (b, 1, t + 1)}
            assert tails
            candidates[a] = candidates.get(a, tails) & tails
    # the tail is a fixed function of the head
    assert all(candidates.values())


def test_chain_closure():
    ds = generate(GeneratorSpec(num_entities=12, num_relations=3, num_timestamps=15, pattern="chain",
                                closure=True, seed=1))
    facts = set(map(tuple, ds.pattern_facts.tolist()))
    for a, r, c, t in facts:
        if r == 2:
            assert any((a, 0, b, t - 2) in facts and (b, 1, c, t - 1) in facts for b in range(12))


def test_recurrent_period():
    spec = GeneratorSpec(num_entities=20, num_relations=3, num_timestamps=60, pattern="recurrent",
                         facts_per_step=5, period=6, regime=1000, seed=4)
    facts = generate(spec).pattern_facts
    for (s, r) in {(s, r) for s, r, _, _ in facts.tolist()}:
        rows = facts[(facts[:, 0] == s) & (facts[:, 1] == r)]
        assert np.all(np.diff(rows[:, 3]) == 6)
        assert len(set(rows[:, 2].tolist())) == 1


def test_no_noise_only_pattern():
    ds = generate(GeneratorSpec(seed=9))
    assert len(ds.noise_facts) == 0
    assert sorted(map(tuple, all_facts(ds).tolist())) == sorted(set(map(tuple, ds.pattern_facts.tolist())))


def test_noise_added():
    ds = generate(GeneratorSpec(noise=0.5, seed=9))
    assert len(ds.noise_facts) > 0


def test_byte_identical(tmp_path):
    spec = GeneratorSpec(noise=0.3, seed=11, pattern="chain", num_relations=3, closure=True, num_timestamps=30)
    a = generate(spec).write(tmp_path / "a")
    b = generate(spec).write(tmp_path / "b")
    for name in ("train.txt", "valid.txt", "test.txt", "stat.txt", "queries.txt"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_perfect_predictor_mrr_one():
    from hisres.evaluation import compute_metrics, filtered_ranks
    ds = generate(GeneratorSpec(seed=2))
    ranks = []
    for snap in ds.bundle.test:
        logits = np.zeros((len(snap), ds.bundle.num_entities))
        logits[np.arange(len(snap)), snap.triples[:, 2]] = 1.0
        ranks.extend(filtered_ranks(logits, snap.triples).tolist())
    assert compute_metrics(ranks).mrr == 1.0


@pytest.mark.parametrize("bad", [dict(period=20), dict(pattern="spiral"), dict(noise=-0.1),
                                 dict(pattern="chain", num_relations=1), dict(facts=[(0, 9, 1)]),
                                 dict(split=(0.5, 0.5, 0.5))])
def test_invalid_spec(bad):
    with pytest.raises(ConfigError):
        generate(GeneratorSpec(**bad))
