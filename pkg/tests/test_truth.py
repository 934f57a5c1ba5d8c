import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rdpptd import truth
from rdpptd.errors import DomainError
from rdpptd.truth import IterationConfig, Observation


def np_rtd(x, c, init, delta=1e-6, max_iters=100, floor=1e-9):
    """Vectorized reference loop used as an independent oracle."""
    x, c = np.asarray(x, float), np.asarray(c, float)
    est, hist = init, [init]
    for _ in range(max_iters):
        d = np.maximum(np.abs(x - est), floor)
        w = np.log(d.sum() / d) * c
        nxt = float((x * w).sum() / w.sum())
        hist.append(nxt)
        if abs(nxt - est) < delta:
            return nxt, hist
        est = nxt
    return est, hist


def obs(values, reps):
    return [Observation(f"w{i}", v, r) for i, (v, r) in enumerate(zip(values, reps))]


def test_mean_median_examples():
    assert truth.mean([5]) == 5
    assert truth.mean([10, 10, 20]) == pytest.approx(40 / 3, abs=1e-12)
    assert truth.mean([-1, 1]) == 0
    assert truth.median([1, 2, 100]) == 2
    assert truth.median([1, 3]) == 2
    assert truth.median([7, 7, 7, 7]) == 7
    for f in (truth.mean, truth.median):
        with pytest.raises(DomainError):
            f([])


def test_weighted_mean_examples():
    assert truth.weighted_mean(obs([10, 20], [0.25, 0.75])) == 17.5
    assert truth.weighted_mean(obs([1, 5, 9], [0.3] * 3)) == pytest.approx(5.0, abs=1e-12)
    assert truth.weighted_mean(obs([1, 100], [1.0, 0.0])) == 1.0
    with pytest.raises(DomainError):
        truth.weighted_mean(obs([1, 2], [0, 0]))


def test_observation_bounds():
    with pytest.raises(DomainError):
        Observation("a", 1.0, 1.5)
    with pytest.raises(DomainError):
        IterationConfig(delta=0)


def test_crh_first_iterate_is_twelve():
    res = truth.crh([10, 10, 20], IterationConfig(max_iters=1))
    assert res.history[0] == pytest.approx(40 / 3, abs=1e-12)
    assert res.history[1] == pytest.approx(12.0, abs=1e-12)
    assert res.weights == pytest.approx([math.log(4), math.log(4), math.log(2)], abs=1e-12)


def test_crh_constant_inputs():
    res = truth.crh([3.5] * 5)
    assert res.estimate == 3.5 and res.converged and res.iterations == 1
    assert truth.crh([0.0, 0.0]).estimate == pytest.approx(0.0, abs=1e-8)


def test_rtd_first_iterate_is_eleven():
    res = truth.rtd(obs([10, 20], [0.9, 0.1]), IterationConfig(max_iters=1), init=15.0)
    assert res.history[1] == pytest.approx(11.0, abs=1e-12)


def test_rtd_zero_reputation_follows_trusted_worker():
    res = truth.rtd(obs([10, 20, 30], [1.0, 0.0, 0.0]))
    assert res.estimate == pytest.approx(10.0, abs=1e-6)


def test_rtd_fallback_flagged():
    res = truth.rtd(obs([1.0, 2.0], [0.0, 0.0]))
    assert res.fallback and res.estimate == 1.5
    with pytest.raises(DomainError):
        truth.crh([1.0])


def test_matches_numpy_oracle():
    rng = random.Random(8)
    for _ in range(200):
        k = rng.randint(2, 30)
        x = [rng.gauss(20, 5) for _ in range(k)]
        c = [rng.uniform(0.05, 1) for _ in range(k)]
        res = truth.rtd(obs(x, c))
        est, hist = np_rtd(x, c, truth.mean(x))
        assert res.estimate == pytest.approx(est, rel=1e-9)
        assert len(res.history) == len(hist)


def test_uniform_reputation_reproduces_crh_iterates():
    rng = random.Random(9)
    for _ in range(200):
        k = rng.randint(2, 30)
        x = [rng.uniform(-50, 50) for _ in range(k)]
        kappa = rng.uniform(0.01, 1)
        a = truth.crh(x).history
        b = truth.rtd(obs(x, [kappa] * k)).history
        assert len(a) == len(b)
        assert all(abs(p - q) <= 1e-12 * max(1.0, abs(p)) for p, q in zip(a, b))


reals = st.floats(-1e4, 1e4, allow_nan=False)


@settings(max_examples=300)
@given(st.lists(st.tuples(reals, st.floats(0.01, 1.0)), min_size=2, max_size=30))
def test_iterates_bounded_and_weights_nonnegative(pairs):
    x = [p[0] for p in pairs]
    res = truth.rtd(obs(x, [p[1] for p in pairs]))
    lo, hi = min(x), max(x)
    tol = 1e-9 * max(1.0, abs(lo), abs(hi))
    assert all(lo - tol <= h <= hi + tol for h in res.history[1:])
    assert all(w >= 0 for w in res.weights)
    assert res.iterations <= 100


@settings(max_examples=200)
@given(st.lists(st.tuples(reals, st.floats(0.01, 1.0)), min_size=2, max_size=30), st.randoms())
def test_permutation_invariance(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    a = truth.rtd(obs([p[0] for p in pairs], [p[1] for p in pairs])).estimate
    b = truth.rtd(obs([p[0] for p in shuffled], [p[1] for p in shuffled])).estimate
    assert a == pytest.approx(b, rel=1e-9, abs=1e-9)


def test_convergence_on_random_instances():
    # A few instances (about 3 in 10^4) contract linearly with a ratio near 1
    # and need more than 100 steps to reach delta; they must still be settling.
    rng = random.Random(10)
    slow = 0
    for _ in range(1000):
        k = rng.randint(2, 30)
        x = [rng.gauss(20, 8) for _ in range(k)]
        c = [rng.uniform(0.01, 1) for _ in range(k)]
        res = truth.rtd(obs(x, c))
        assert res.iterations <= 100
        if not res.converged:
            slow += 1
            steps = [abs(b - a) for a, b in zip(res.history, res.history[1:])]
            assert all(b < a for a, b in zip(steps[-20:], steps[-19:]))
            assert steps[-1] < 1e-5
    assert slow <= 2
