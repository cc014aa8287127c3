import numpy as np
import pytest

from expertbo.errors import FitError, HypothesisUnavailable, ModelNotFitted
from expertbo.preference import (
    Hypothesis,
    KernelConfig,
    PreferenceDataset,
    augment_skew,
    bernoulli_likelihood,
    build_pref_dataset,
    fit_preference_model,
    load_pref_jsonl,
    make_hypothesis,
    preference_posterior,
    save_pref_jsonl,
    training_consistency,
)
from expertbo.tasks import BlackBoxTask, Optimum, evaluate_batch, sample_space, unit_space

from conftest import two_bump_task


def normal_cdf(x):
    from math import erf, sqrt

    return 0.5 * (1 + erf(x / sqrt(2)))


def monotone_task(dims=1):
    space = unit_space(dims)
    return BlackBoxTask(
        "mono",
        space,
        lambda X: X[:, 0],
        known_optimum=Optimum(np.concatenate([[1.0], np.full(dims - 1, 0.5)]), 1.0),
    )


def perfect_oracle(task):
    return lambda x1, x2: int(task.fn(x1[None])[0] >= task.fn(x2[None])[0])


class TestMakeHypothesis:
    def test_expert_slab(self):
        task = BlackBoxTask(
            "t", unit_space(2), lambda X: X[:, 0],
            known_optimum=Optimum(np.array([0.95, 0.5]), 0.95),
        )
        h = make_hypothesis("expert", task, K=10)
        lo, hi = h.boxes[0]
        assert lo[0] == pytest.approx(0.9) and hi[0] == pytest.approx(1.0)
        assert lo[1] == 0.0 and hi[1] == 1.0

    def test_adversarial_monotone(self):
        # exhaustive slab-sum oracle on f(x) = x1: lowest slab wins
        task = monotone_task(dims=2)
        h = make_hypothesis("adversarial", task, K=10, M=100, seed=1)
        lo, hi = h.boxes[0]
        assert lo[0] == pytest.approx(0.0) and hi[0] == pytest.approx(0.1)
        # independent oracle: mean value per slab over a dense grid
        grid = sample_space(task.space, 4000, "latin_hypercube", seed=2)
        vals = evaluate_batch(task, grid)
        slabs = np.floor(grid[:, 0] * 10).clip(0, 9).astype(int)
        sums = np.array([vals[slabs == k].mean() for k in range(10)])
        assert sums.argmin() == 0

    def test_random_is_full_space(self):
        task = monotone_task()
        h = make_hypothesis("random", task, K=10)
        lo, hi = h.boxes[0]
        assert np.array_equal(lo, task.space.lower) and np.array_equal(hi, task.space.upper)

    def test_expert_requires_optimum(self):
        task = BlackBoxTask("t", unit_space(1), lambda X: X[:, 0])
        with pytest.raises(HypothesisUnavailable):
            make_hypothesis("expert", task, K=4)


class TestBuildDataset:
    def test_points_inside_hypothesis(self):
        task = monotone_task(dims=2)
        h = make_hypothesis("expert", task, K=5)
        ds = build_pref_dataset(perfect_oracle(task), task.space, h, M=10, seed=1)
        assert len(ds) == 10
        for i in range(10):
            assert h.contains(ds.x1[i]) and h.contains(ds.x2[i])

    def test_noiseless_labels_follow_ordering(self):
        task = monotone_task()
        ds = build_pref_dataset(perfect_oracle(task), task.space, None, M=25, seed=2)
        for i in range(25):
            assert ds.labels[i] == int(ds.x1[i, 0] >= ds.x2[i, 0])

    def test_noisy_label_agreement_matches_cdf(self):
        # agreement with the true ordering averages Phi(|df| / (sqrt(2) sigma))
        task = monotone_task()
        sigma = 0.1
        rng_expert = np.random.default_rng(3)

        def noisy(x1, x2):
            f1 = task.fn(x1[None])[0] + rng_expert.normal(0, sigma)
            f2 = task.fn(x2[None])[0] + rng_expert.normal(0, sigma)
            return int(f1 >= f2)

        ds = build_pref_dataset(noisy, task.space, None, M=1000, seed=4)
        df = task.fn(ds.x1) - task.fn(ds.x2)
        agree = (ds.labels == (df >= 0)).mean()
        want = np.mean([normal_cdf(abs(d) / (np.sqrt(2) * sigma)) for d in df])
        assert abs(agree - want) < 0.05


class TestElicitationAbort:
    def test_partial_dataset_flagged(self):
        from expertbo.errors import ElicitationAborted

        task = monotone_task()
        calls = {"n": 0}

        def flaky(x1, x2):
            calls["n"] += 1
            if calls["n"] > 4:
                raise ElicitationAborted("expert walked away")
            return 1

        ds = build_pref_dataset(flaky, task.space, None, M=10, seed=13)
        assert len(ds) == 4
        assert ds.complete is False


class TestAugmentSkew:
    def test_single_pair(self):
        a, b = np.array([[0.1]]), np.array([[0.9]])
        ds = augment_skew(PreferenceDataset(a, b, np.array([1])))
        assert len(ds) == 2
        assert np.array_equal(ds.x1[1], b[0]) and np.array_equal(ds.x2[1], a[0])
        assert list(ds.labels) == [1, 0]

    def test_size_doubles(self):
        task = monotone_task()
        ds = build_pref_dataset(perfect_oracle(task), task.space, None, M=7, seed=5)
        assert len(augment_skew(ds)) == 14

    def test_double_augmentation_shape(self):
        task = monotone_task()
        ds = build_pref_dataset(perfect_oracle(task), task.space, None, M=4, seed=6)
        twice = augment_skew(augment_skew(ds))
        assert len(twice) == 16
        # each original ordered pair appears twice in each orientation
        for i in range(4):
            key = np.concatenate([ds.x1[i], ds.x2[i]])
            stacked = np.concatenate([twice.x1, twice.x2], axis=1)
            assert (np.abs(stacked - key).max(axis=1) == 0).sum() == 2


class TestBernoulli:
    def test_identity(self):
        assert bernoulli_likelihood(1, 0.7) == pytest.approx(0.7)
        assert bernoulli_likelihood(0, 0.7) == pytest.approx(0.3)


@pytest.fixture(scope="module")
def separable_model():
    task = monotone_task()
    ds = build_pref_dataset(perfect_oracle(task), task.space, None, M=30, seed=7)
    return task, ds, fit_preference_model(augment_skew(ds))


class TestFit:
    def test_training_consistency_separable(self, separable_model):
        _, ds, model = separable_model
        assert training_consistency(model, ds) >= 0.95

    def test_antisymmetry_on_random_pairs(self, separable_model):
        task, _, model = separable_model
        rng = np.random.default_rng(8)
        for _ in range(100):
            a, b = rng.uniform(size=1), rng.uniform(size=1)
            pa = preference_posterior(model, a[None], b, mc_seed=1).mean[0]
            pb = preference_posterior(model, b[None], a, mc_seed=1).mean[0]
            assert 0.95 <= pa + pb <= 1.05

    def test_single_pair_plus_mirror(self):
        ds = augment_skew(
            PreferenceDataset(np.array([[0.2]]), np.array([[0.8]]), np.array([0]))
        )
        model = fit_preference_model(ds)
        p = preference_posterior(model, np.array([[0.8]]), np.array([0.2]), mc_seed=2)
        assert p.mean[0] >= 0.5  # labeled winner keeps the majority

    def test_odd_sized_dataset_rejected(self):
        ds = PreferenceDataset(
            np.array([[0.1], [0.4], [0.6]]),
            np.array([[0.9], [0.2], [0.3]]),
            np.array([1, 0, 1]),
        )
        with pytest.raises(FitError):
            fit_preference_model(ds)

    def test_unfitted_posterior_raises(self):
        from expertbo.preference import PreferenceModel

        with pytest.raises(ModelNotFitted):
            preference_posterior(PreferenceModel(), np.array([[0.1]]), np.array([0.2]))


class TestPosterior:
    def test_self_query_is_half(self, separable_model):
        _, _, model = separable_model
        x = np.array([0.37])
        p = preference_posterior(model, x[None], x, mc_seed=3)
        assert p.mean[0] == pytest.approx(0.5, abs=0.05)

    def test_far_query_more_uncertain(self):
        # train only near the low corner; far queries must not be more confident
        task = monotone_task(dims=2)
        h = Hypothesis(((np.array([0.0, 0.0]), np.array([0.2, 0.2])),))
        ds = build_pref_dataset(perfect_oracle(task), task.space, h, M=25, seed=9)
        model = fit_preference_model(augment_skew(ds))
        x_ref = np.array([0.1, 0.1])
        near = preference_posterior(model, ds.x1[:20], x_ref, mc_seed=4)
        far = preference_posterior(model, np.full((20, 2), 0.95), x_ref, mc_seed=4)
        assert far.variance.mean() >= near.variance.min()

    def test_mc_determinism_and_seed_stability(self, separable_model):
        _, _, model = separable_model
        rng = np.random.default_rng(10)
        q = rng.uniform(size=(30, 1))
        x_ref = np.array([0.5])
        a = preference_posterior(model, q, x_ref, mc_seed=11)
        b = preference_posterior(model, q, x_ref, mc_seed=11)
        assert np.array_equal(a.mean, b.mean) and np.array_equal(a.variance, b.variance)
        old = model.mc_samples
        model.mc_samples = 1024
        try:
            s1 = preference_posterior(model, q, x_ref, mc_seed=12).mean
            s2 = preference_posterior(model, q, x_ref, mc_seed=13).mean
            assert np.abs(s1 - s2).max() <= 0.02
        finally:
            model.mc_samples = old

    def test_variance_positive(self, separable_model):
        _, _, model = separable_model
        p = preference_posterior(model, np.linspace(0, 1, 32)[:, None], np.array([0.4]), 5)
        assert (p.variance > 0).all()


class TestJsonl:
    def test_roundtrip(self, tmp_path):
        task = two_bump_task()
        ds = build_pref_dataset(perfect_oracle(task), task.space, None, M=6, seed=14)
        path = tmp_path / "prefs.jsonl"
        save_pref_jsonl(ds, path)
        back = load_pref_jsonl(path)
        assert np.array_equal(back.x1, ds.x1)
        assert np.array_equal(back.x2, ds.x2)
        assert np.array_equal(back.labels, ds.labels)
        assert back.sources == ds.sources
