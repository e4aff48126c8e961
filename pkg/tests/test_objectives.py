import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import central_difference, rel_err
from mfswb.measures import DiscreteMeasure
from mfswb.objectives import (
    Method,
    es_mfswb_grad,
    estimate,
    mfswb_dual_grad,
    s_mfswb_grad,
    swb_grad,
    us_mfswb_grad,
)
from mfswb.slicing import ProjectionSet, energy_weights, sample_uniform_sphere

TAGS = ("uswb", "mfswb", "s", "us", "es")


def instance(rng, K=3, n=8, d=3, L=16):
    bary = DiscreteMeasure.uniform(rng.standard_normal((n, d)))
    marginals = [DiscreteMeasure.uniform(rng.standard_normal((n, d)) * rng.uniform(0.5, 2) + rng.standard_normal(d))
                 for _ in range(K)]
    return bary, marginals, sample_uniform_sphere(L, d, rng)


def per_projection_costs(bary, marginals, proj, p=2.0):
    """(K, L) matrix of 1D costs recomputed from sorted projections."""
    out = np.empty((len(marginals), proj.L))
    for k, m in enumerate(marginals):
        for l, th in enumerate(proj.directions):
            out[k, l] = np.mean(np.abs(np.sort(bary.supports @ th) - np.sort(m.supports @ th)) ** p)
    return out


def frozen(tag, marginals, proj, p, lam, ref):
    """Objective of ``tag`` with selections and importance weights fixed at ``ref``."""
    W0 = per_projection_costs(ref, marginals, proj, p)
    K, L = W0.shape
    ks = np.argmax(W0, axis=0)
    kh = int(np.argmax(W0.mean(axis=1)))
    w0 = energy_weights(W0[ks, np.arange(L)])

    def value(x):
        W = per_projection_costs(ref.with_supports(x), marginals, proj, p)
        sw = W.mean(axis=1)
        if tag == "uswb":
            return sw.mean()
        if tag == "mfswb":
            gaps = [abs(sw[i] - sw[j]) for i in range(K) for j in range(i + 1, K)]
            return sw.mean() + lam * 2 / (K * (K - 1)) * sum(gaps)
        if tag == "s":
            return sw[kh]
        a = W[ks, np.arange(L)]
        return a.mean() if tag == "us" else w0 @ a

    return value


def grad_of(tag, bary, marginals, proj, p=2.0, lam=1.0, support="free"):
    return estimate(Method(tag, lam if tag == "mfswb" else 0.0), bary, marginals, proj, p, support=support)


class TestSWB:
    def test_bary_equals_marginal(self, rng):
        x = rng.standard_normal((5, 2))
        est = swb_grad(DiscreteMeasure.uniform(x), [DiscreteMeasure.uniform(x)], sample_uniform_sphere(4, 2, 0))
        assert est.objective_value == 0 and np.all(est.free_grad == 0)

    def test_hand_example(self):
        bary = DiscreteMeasure.uniform([[2.0, 0.0]])
        marg = DiscreteMeasure.uniform([[0.0, 0.0]])
        proj = ProjectionSet.from_directions([[1.0, 0.0]])
        est = swb_grad(bary, [marg], proj, 2)
        assert est.objective_value == pytest.approx(4.0)
        assert np.allclose(est.free_grad, [[4.0, 0.0]])
        fd = central_difference(lambda x: swb_grad(bary.with_supports(x), [marg], proj).objective_value,
                                bary.supports)
        assert np.allclose(fd, [[4.0, 0.0]], atol=1e-6)

    def test_finite_differences(self, rng):
        bary, marginals, proj = instance(rng)
        est = swb_grad(bary, marginals, proj)
        fd = central_difference(frozen("uswb", marginals, proj, 2, 0, bary), bary.supports)
        assert rel_err(est.free_grad, fd) < 1e-5

    def test_custom_omega(self, rng):
        bary, marginals, proj = instance(rng, K=2)
        om = np.array([0.25, 0.75])
        est = swb_grad(bary, marginals, proj, omega=om)
        parts = [swb_grad(bary, [m], proj) for m in marginals]
        assert est.objective_value == pytest.approx(om @ [q.objective_value for q in parts], rel=1e-12)
        assert np.allclose(est.free_grad, om[0] * parts[0].free_grad + om[1] * parts[1].free_grad, atol=1e-12)

    def test_input_errors(self, rng):
        bary, marginals, proj = instance(rng)
        with pytest.raises(ValueError):
            swb_grad(bary, [], proj)
        with pytest.raises(ValueError):
            swb_grad(bary, [DiscreteMeasure.uniform(np.zeros((8, 2)))], proj)


class TestDual:
    def test_lambda_zero_is_uswb_bitwise(self, rng):
        bary, marginals, proj = instance(rng, K=4)
        a, b = mfswb_dual_grad(bary, marginals, proj, lam=0.0), swb_grad(bary, marginals, proj)
        assert a.objective_value == b.objective_value
        assert np.array_equal(a.free_grad, b.free_grad)

    def test_identical_marginals_no_penalty(self, rng):
        bary, marginals, proj = instance(rng, K=1)
        two = [marginals[0], DiscreteMeasure.uniform(marginals[0].supports[::-1].copy())]
        a = mfswb_dual_grad(bary, two, proj, lam=5.0)
        b = swb_grad(bary, two, proj)
        assert np.allclose(a.free_grad, b.free_grad, atol=1e-12)
        assert a.objective_value == pytest.approx(b.objective_value, abs=1e-12)

    def test_finite_differences(self, rng):
        bary, marginals, proj = instance(rng, K=3)
        est = mfswb_dual_grad(bary, marginals, proj, lam=2.0)
        sw = est.per_marginal
        assert min(abs(sw[i] - sw[j]) for i in range(3) for j in range(i + 1, 3)) > 1e-6
        fd = central_difference(frozen("mfswb", marginals, proj, 2, 2.0, bary), bary.supports)
        assert rel_err(est.free_grad, fd) < 1e-5

    def test_needs_two_marginals(self, rng):
        bary, marginals, proj = instance(rng, K=1)
        with pytest.raises(ValueError):
            mfswb_dual_grad(bary, marginals, proj)


class TestSMFSWB:
    def test_selects_far_marginal(self, rng):
        bary, marginals, proj = instance(rng, K=1)
        est = s_mfswb_grad(bary, [DiscreteMeasure.uniform(bary.supports), marginals[0]], proj)
        assert est.selected == 1
        assert np.allclose(est.free_grad, swb_grad(bary, [marginals[0]], proj).free_grad)

    def test_tie_rule(self, rng):
        bary, marginals, proj = instance(rng, K=1)
        est = s_mfswb_grad(bary, [marginals[0]] * 4, proj)
        assert est.selected == 0

    def test_selection_matches_recomputation(self, rng):
        for _ in range(10):
            bary, marginals, proj = instance(rng, K=4)
            est = s_mfswb_grad(bary, marginals, proj)
            assert est.selected == int(np.argmax(per_projection_costs(bary, marginals, proj).mean(axis=1)))


class TestUSMFSWB:
    def test_single_marginal_is_uswb(self, rng):
        bary, marginals, proj = instance(rng, K=1)
        a, b = us_mfswb_grad(bary, marginals, proj), swb_grad(bary, marginals, proj, omega=[1.0])
        assert a.objective_value == pytest.approx(b.objective_value, rel=1e-14)
        assert np.allclose(a.free_grad, b.free_grad, rtol=1e-14, atol=0)

    def test_straddling_point_masses(self):
        bary = DiscreteMeasure.uniform([[0.0]])
        marginals = [DiscreteMeasure.uniform([[-1.0]]), DiscreteMeasure.uniform([[4.0]])]
        proj = ProjectionSet.from_directions([[1.0], [-1.0]])
        est = us_mfswb_grad(bary, marginals, proj)
        assert np.array_equal(est.selected, [1, 1])
        assert est.objective_value == pytest.approx(16.0)

    def test_dominates_s(self, rng):
        for _ in range(20):
            bary, marginals, proj = instance(rng, K=3)
            assert us_mfswb_grad(bary, marginals, proj).objective_value >= \
                s_mfswb_grad(bary, marginals, proj).objective_value - 1e-12


class TestESMFSWB:
    def test_equal_energies_match_us(self, rng):
        # in 1D the costs under +1 and -1 coincide, so every a_l is equal
        bary = DiscreteMeasure.uniform(rng.standard_normal((6, 1)))
        marginals = [DiscreteMeasure.uniform(rng.standard_normal((6, 1)) + c) for c in (0.0, 3.0)]
        proj = ProjectionSet.from_directions([[1.0], [-1.0], [1.0], [-1.0]])
        a, b = es_mfswb_grad(bary, marginals, proj), us_mfswb_grad(bary, marginals, proj)
        assert np.allclose(a.free_grad, b.free_grad, rtol=1e-14, atol=1e-15)

    def test_single_projection_matches_us(self, rng):
        bary, marginals, proj = instance(rng, L=1)
        a, b = es_mfswb_grad(bary, marginals, proj), us_mfswb_grad(bary, marginals, proj)
        assert a.objective_value == b.objective_value
        assert np.array_equal(a.free_grad, b.free_grad)

    def test_dominates_us(self, rng):
        for _ in range(20):
            bary, marginals, proj = instance(rng, K=3)
            assert es_mfswb_grad(bary, marginals, proj).objective_value >= \
                us_mfswb_grad(bary, marginals, proj).objective_value - 1e-12

    def test_through_weights_matches_unfrozen_estimator(self, rng):
        bary, marginals, proj = instance(rng, K=3, n=5, d=2, L=6)
        marginals = [m.with_supports(m.supports * 0.3) for m in marginals]
        bary = bary.with_supports(bary.supports * 0.3)
        est = es_mfswb_grad(bary, marginals, proj, through_weights=True)
        fd = central_difference(lambda x: es_mfswb_grad(bary.with_supports(x), marginals, proj).objective_value,
                                bary.supports)
        assert rel_err(est.free_grad, fd) < 1e-5


@pytest.mark.parametrize("tag", TAGS)
def test_free_finite_differences(tag, rng):
    bary, marginals, proj = instance(rng, K=3, n=6, d=3, L=8)
    est = grad_of(tag, bary, marginals, proj, lam=1.5)
    fd = central_difference(frozen(tag, marginals, proj, 2, 1.5, bary), bary.supports)
    assert rel_err(est.free_grad, fd) < 1e-4


@pytest.mark.parametrize("tag", TAGS)
def test_fixed_support_directional_derivatives(tag, rng):
    grid = rng.standard_normal((6, 2))
    bary = DiscreteMeasure(grid, rng.dirichlet(np.ones(6) * 3))
    marginals = [DiscreteMeasure(rng.standard_normal((4, 2)) + c, rng.dirichlet(np.ones(4) * 3))
                 for c in ((0, 0), (2, 1), (-1, 2))]
    proj = sample_uniform_sphere(5, 2, rng)
    est = grad_of(tag, bary, marginals, proj, lam=1.0, support="fixed")
    ref = grad_of(tag, bary, marginals, proj, lam=1.0)
    h = 1e-6
    for _ in range(10):
        delta = rng.standard_normal(6)
        delta -= delta.mean()
        delta /= np.abs(delta).max()

        def val(w):
            return _frozen_weights_objective(tag, bary.with_weights(w), marginals, proj, ref, bary)

        fd = (val(bary.weights + h * delta) - val(bary.weights - h * delta)) / (2 * h)
        assert abs(fd - est.fixed_grad @ delta) < 1e-5


def _frozen_weights_objective(tag, m, marginals, proj, ref_est, ref):
    from mfswb.objectives import sliced_terms

    W0, _ = sliced_terms(ref, marginals, proj)
    W, _ = sliced_terms(m, marginals, proj)
    K, L = W.shape
    sw = W.mean(axis=1)
    ks = np.argmax(W0, axis=0)
    if tag == "uswb":
        return sw.mean()
    if tag == "mfswb":
        sgn = np.sign(W0.mean(axis=1)[:, None] - W0.mean(axis=1)[None, :])
        return sw.mean() + 2 / (K * (K - 1)) * 0.5 * np.sum(sgn * (sw[:, None] - sw[None, :]))
    if tag == "s":
        return sw[int(np.argmax(W0.mean(axis=1)))]
    a = W[ks, np.arange(L)]
    return a.mean() if tag == "us" else energy_weights(W0[ks, np.arange(L)]) @ a


@pytest.mark.parametrize("tag", TAGS)
@pytest.mark.parametrize("support", ["free", "fixed"])
def test_zero_property(tag, support, rng):
    x = rng.standard_normal((7, 3))
    bary = DiscreteMeasure.uniform(x)
    marginals = [DiscreteMeasure.uniform(x[rng.permutation(7)]) for _ in range(3)]
    est = grad_of(tag, bary, marginals, sample_uniform_sphere(10, 3, 1), support=support)
    assert est.objective_value == pytest.approx(0.0, abs=1e-12)
    g = est.free_grad if support == "free" else est.fixed_grad
    assert np.max(np.abs(g)) < 1e-12


@given(st.integers(0, 10_000), st.sampled_from(TAGS), st.randoms(use_true_random=False))
@settings(max_examples=40, deadline=None)
def test_marginal_permutation_equivariance(seed, tag, r):
    rng = np.random.default_rng(seed)
    bary, marginals, proj = instance(rng, K=4, n=5, d=2, L=6)
    perm = r.sample(range(4), 4)
    a = grad_of(tag, bary, marginals, proj)
    b = grad_of(tag, bary, [marginals[i] for i in perm], proj)
    assert a.objective_value == pytest.approx(b.objective_value, rel=1e-12, abs=1e-12)
    assert np.allclose(a.free_grad, b.free_grad, rtol=1e-12, atol=1e-12)
    if tag == "s":
        assert perm[b.selected] == a.selected


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_sandwich(seed):
    rng = np.random.default_rng(seed)
    K = int(rng.integers(2, 6))
    bary, marginals, proj = instance(rng, K=K, n=int(rng.integers(3, 12)), d=3, L=int(rng.choice([1, 8])))
    s = s_mfswb_grad(bary, marginals, proj).objective_value
    us = us_mfswb_grad(bary, marginals, proj).objective_value
    es = es_mfswb_grad(bary, marginals, proj).objective_value
    assert s <= us + 1e-9 and us <= es + 1e-9


def test_method_validation():
    with pytest.raises(ValueError):
        Method("nope")
    with pytest.raises(ValueError):
        Method("mfswb", lam=-1.0)
    with pytest.raises(ValueError):
        Method("uswb", omega=(0.5, 0.6))
