import numpy as np
import pytest

from rdpptd import population as pop
from rdpptd.errors import DomainError


def test_category_counts():
    assert pop.category_counts(200) == {"MW": 60, "AW": 100, "TW": 40}
    assert pop.category_counts(10) == {"MW": 3, "AW": 5, "TW": 2}
    for n in range(1, 500):
        c = pop.category_counts(n)
        assert sum(c.values()) == n
        for cat, p in zip(pop.CATEGORIES, pop.PROPORTIONS):
            assert abs(c[cat] - n * p) < 1


def test_pool_ranges_and_proportions():
    rng = np.random.default_rng(0)
    pool = pop.generate_pool(200, rng)
    counts = {c: sum(w.category == c for w in pool) for c in pop.CATEGORIES}
    assert counts == {"MW": 60, "AW": 100, "TW": 40}
    for w in pool:
        lo, hi = pop.DEFAULT_RANGES[w.category]
        assert lo <= w.true_reputation < hi
        if w.category == "MW":
            assert w.true_reputation > 0
    with pytest.raises(DomainError):
        pop.generate_pool(0, rng)


def test_collusion_regime_caps_mw_and_keeps_coupling():
    a = pop.generate_pool(300, np.random.default_rng(4), "collusion", 0.5)
    b = pop.generate_pool(300, np.random.default_rng(4), "default")
    assert [w.category for w in a] == [w.category for w in b]
    for wa, wb in zip(a, b):
        if wa.category == "MW":
            assert 0 < wa.true_reputation < 0.5
            assert wa.true_reputation == pytest.approx(wb.true_reputation * 2.5)
        else:
            assert wa.true_reputation == wb.true_reputation
    with pytest.raises(DomainError):
        pop.category_ranges("collusion", None)


def test_attack_config_bounds():
    with pytest.raises(DomainError):
        pop.AttackConfig(theta=1.5)
    with pytest.raises(DomainError):
        pop.AttackConfig(xi=0.0)


def test_certain_worker_always_small_noise():
    w = pop.WorkerProfile(0, "a", "TW", 1.0)
    vals = pop.sense_many([w] * 10_000, 20.0, np.random.default_rng(1))
    assert np.all(np.abs(vals - 20.0) <= 4 * pop.NoiseParams().small_sigma(20.0) * 1.5)


def test_mw_readings_independent_of_truth():
    rng = np.random.default_rng(2)
    w = pop.WorkerProfile(0, "m", "MW", 0.0)
    g = rng.uniform(-5, 35, 10_000)
    x = np.array([pop.sense(w, gi, rng) for gi in g])
    assert abs(np.corrcoef(g, x)[0, 1]) < 0.05


def test_small_noise_tail():
    rng = np.random.default_rng(3)
    noise = pop.NoiseParams()
    w = pop.WorkerProfile(0, "t", "TW", 1.0)
    g = 25.0
    x = pop.sense_many([w] * 10_000, g, rng, noise)
    inside = np.mean(np.abs(x - g) <= 4 * noise.small_sigma(g))
    assert inside >= 0.9999


@pytest.mark.parametrize("c,cat", [(0.25, "AW"), (0.5, "AW"), (0.75, "TW"), (0.95, "TW")])
def test_small_branch_frequency(c, cat):
    # a huge large-noise scale makes the branches separable by distance alone
    noise = pop.NoiseParams(large_frac=0.0, large_floor=1e6)
    g = 20.0
    x = pop.sense_many([pop.WorkerProfile(0, "x", cat, c)] * 10_000, g, np.random.default_rng(5), noise)
    small = np.mean(np.abs(x - g) <= 5 * noise.small_sigma(g))
    assert abs(small - c) <= 0.02


def test_collusion_examples():
    rng = np.random.default_rng(6)
    mws = [pop.WorkerProfile(i, f"m{i}", "MW", 0.1) for i in range(5)]
    attack = pop.AttackConfig(theta=0.8, colluded=True)
    col = pop.collude(mws, 20.0, rng, attack)
    vals = np.array(list(col.values.values()))
    assert len(vals) == 5
    assert np.all(np.abs(vals - (20.0 + col.offset)) < 5 * attack.jitter)
    assert np.std(vals, ddof=1) <= 3 * attack.jitter
    assert 10 <= abs(col.offset) <= 25
    # |offset| >= 5 large sigmas at the default truth scale (sigma_large = 2 for |g| <= 10)
    assert abs(col.offset) >= 5 * pop.NoiseParams().large_sigma(10.0)
    other = pop.collude(mws, 20.0, rng, attack)
    assert other.offset != col.offset
    with pytest.raises(DomainError):
        pop.collude([], 20.0, rng, attack)


def test_collusion_spread_over_many_tasks():
    rng = np.random.default_rng(7)
    mws = [pop.WorkerProfile(i, f"m{i}", "MW", 0.1) for i in range(8)]
    attack = pop.AttackConfig(colluded=True, jitter=0.1)
    sds = [np.std(list(pop.collude(mws, 15.0, rng, attack).values.values()), ddof=1) for _ in range(2000)]
    # sample sd of 8 normals stays below twice the jitter in essentially every task
    assert np.mean(np.array(sds) <= 2 * attack.jitter) > 0.999


def test_draw_attributes_in_and_out():
    rng = np.random.default_rng(8)
    w = pop.WorkerProfile(0, "a", "AW", 0.5)
    windows = [(0.0, 3600.0), (116.0, 116.1), (39.9, 40.0)]
    for _ in range(2000):
        attrs, inside = w.draw_attributes(windows, rng, 0.7)
        assert inside == all(lo <= a <= hi for a, (lo, hi) in zip(attrs, windows))
