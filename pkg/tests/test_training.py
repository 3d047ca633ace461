import numpy as np
import pytest

from conftest import central_difference, random_sample
from pbda import estimators as est
from pbda.data_io import LabeledSample, ToySpec, UnlabeledSample, gaussian_da_holdout, gen_toy
from pbda.exceptions import OptimizationError, ValidationError
from pbda.kernels import Kernel, gram, joint_gram
from pbda.training import (OptimizerSettings, TrainedModel, dual_init, load_model, minimize,
                           objective_dalc, objective_pbda, objective_pbgd3_dual,
                           objective_pbgd3_primal, predict, save_model, train)

PHI_PRIME_0 = -0.398942280401432678
RBF = Kernel("rbf", 0.5)


def _rel_err(g, fd):
    return np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-8)


def _problem(rng, m=12, d=3):
    return random_sample(rng, m, d), random_sample(rng, m, d, labeled=False)


def _objectives(rng):
    """(name, f(x) -> (value, grad), dimension) triples for all six objectives."""
    s, t = _problem(rng)
    Ks = gram(s.features, RBF)
    Kj = joint_gram(s, t, RBF)
    n = len(s) + len(t)
    return [
        ("pbgd3_primal", lambda w: objective_pbgd3_primal(w, s, 2.0), s.dim),
        ("pbgd3_dual", lambda a: objective_pbgd3_dual(a, Ks, s.labels, 2.0), len(s)),
        ("pbda_primal", lambda w: objective_pbda(w, s, t, 2.0, 3.0), s.dim),
        ("pbda_dual", lambda a: objective_pbda(a, s, t, 2.0, 3.0, "dual", Kj), n),
        ("dalc_primal", lambda w: objective_dalc(w, s, t, 2.0, 1.5), s.dim),
        ("dalc_dual", lambda a: objective_dalc(a, s, t, 2.0, 1.5, "dual", Kj), n),
    ]


class TestGradients:
    def test_finite_differences(self, rng):
        for name, f, dim in _objectives(rng):
            checked = 0
            while checked < 20:
                x = rng.normal(scale=0.7, size=dim)
                _, g = f(x)
                fd = central_difference(lambda z: f(z)[0], x)
                if name.startswith("pbda") and not np.allclose(
                        fd, central_difference(lambda z: f(z)[0], x, h=1e-5), rtol=1e-4):
                    continue  # step straddles the |.| kink
                assert _rel_err(g, fd) <= 1e-5, name
                checked += 1

    def test_nonconvex_source_terms(self, rng):
        s, t = _problem(rng)
        for convex in (True, False):
            for _ in range(5):
                w = rng.normal(size=s.dim)
                _, g = objective_pbgd3_primal(w, s, 1.5, convex)
                fd = central_difference(lambda z: objective_pbgd3_primal(z, s, 1.5, convex)[0], w)
                assert _rel_err(g, fd) <= 1e-5


class TestObjectiveExamples:
    def test_pbgd3_origin(self, rng):
        s = random_sample(rng, 9, 2)
        v, g = objective_pbgd3_primal(np.zeros(2), s, 3.0)
        np.testing.assert_allclose(v, 3.0 * 9 * 0.5, rtol=1e-15)
        expect = 3.0 * PHI_PRIME_0 * (s.labels[:, None] * s.normalized).sum(axis=0)
        np.testing.assert_allclose(g, expect, rtol=1e-13)

    def test_ridge_only(self, rng):
        s = random_sample(rng, 9, 2)
        v, g = objective_pbgd3_primal([3.0, 4.0], s, 0.0)
        assert v == 12.5
        np.testing.assert_array_equal(g, [3.0, 4.0])

    def test_pbgd3_dual_origin(self, rng):
        s = random_sample(rng, 7, 2)
        v, _ = objective_pbgd3_dual(np.zeros(7), gram(s.features, RBF), s.labels, 2.0)
        np.testing.assert_allclose(v, 7.0, rtol=1e-15)

    def test_pbda_identical_domains(self, rng):
        s = random_sample(rng, 10, 2)
        w = rng.normal(size=2)
        v, g = objective_pbda(w, s, s.unlabeled(), 1.0, 5.0)
        v0, g0 = objective_pbda(w, s, s.unlabeled(), 1.0, 0.0)
        assert v == v0
        np.testing.assert_array_equal(g, g0)

    def test_pbda_a_zero_is_convex_pbgd3(self, rng):
        s, t = _problem(rng)
        w = rng.normal(size=s.dim)
        v, g = objective_pbda(w, s, t, 1.7, 0.0)
        v3, g3 = objective_pbgd3_primal(w, s, 1.7, convex=True)
        assert v == v3
        np.testing.assert_allclose(g, g3, rtol=1e-14, atol=1e-15)

    def test_dalc_origin(self, rng):
        s = random_sample(rng, 8, 2)
        t = random_sample(rng, 5, 2, labeled=False)
        v, _ = objective_dalc(np.zeros(2), s, t, 2.0, 3.0)
        np.testing.assert_allclose(v, 3.0 * 5 * 0.5 + 2.0 * 8 * 0.25, rtol=1e-15)

    def test_errors(self, rng):
        s, t = _problem(rng)
        with pytest.raises(ValueError):
            objective_pbgd3_primal(np.zeros(s.dim), s, -1.0)
        with pytest.raises(ValueError):
            objective_pbgd3_primal(np.zeros(s.dim + 1), s, 1.0)
        with pytest.raises(ValueError):
            objective_pbda(np.zeros(s.dim), s, random_sample(rng, 5, 3, False), 1.0, 1.0)
        with pytest.raises(ValueError):
            objective_dalc(np.zeros(s.dim), s, t, 1.0, float("nan"))


class TestRepresenter:
    def test_primal_dual_values(self, rng):
        s, t = _problem(rng)
        lin = Kernel()
        Ks, Kj = gram(s.features, lin), joint_gram(s, t, lin)
        X = np.vstack([s.features, t.features])
        for _ in range(20):
            a = rng.normal(size=len(s))
            w = s.features.T @ a
            assert abs(objective_pbgd3_dual(a, Ks, s.labels, 2.0)[0]
                       - objective_pbgd3_primal(w, s, 2.0)[0]) <= 1e-8
            b = rng.normal(size=len(X))
            w = X.T @ b
            assert abs(objective_pbda(b, s, t, 2.0, 3.0, "dual", Kj)[0]
                       - objective_pbda(w, s, t, 2.0, 3.0)[0]) <= 1e-8
            assert abs(objective_dalc(b, s, t, 2.0, 1.5, "dual", Kj)[0]
                       - objective_dalc(w, s, t, 2.0, 1.5)[0]) <= 1e-8

    def test_predictions(self, rng):
        s, t = _problem(rng)
        model = train("dalc", s, t, {"B": 1.0, "C": 1.0}, kernel=Kernel())
        primal = est.DualPosterior(model.coefficients, model.support, Kernel()).to_primal()
        pts = rng.normal(size=(1000, s.dim))
        np.testing.assert_array_equal(predict(model, pts),
                                      np.where(pts @ primal.w >= 0, 1, -1))


def _quadratic(center):
    center = np.asarray(center, dtype=float)

    def f(w):
        r = w - center
        return 0.5 * float(r @ r), r
    return f


class TestMinimize:
    def test_quadratic(self, rng):
        target = rng.normal(size=5)
        res = minimize(_quadratic(target), rng.normal(scale=10, size=5))
        np.testing.assert_allclose(res.x, target, atol=1e-8)
        assert res.converged

    def test_rosenbrock(self):
        def rosen(x):
            a, b = x
            return ((1 - a) ** 2 + 100 * (b - a * a) ** 2,
                    np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)]))
        res = minimize(rosen, [-1.2, 1.0])
        np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-6)

    def test_convex_pbgd3_tolerance(self, rng):
        s = random_sample(rng, 40, 3)
        res = minimize(lambda w: objective_pbgd3_primal(w, s, 1.0, convex=True), np.zeros(3))
        assert res.grad_sup_norm <= 1e-6
        assert res.message == "gradient sup-norm below tolerance"

    def test_deterministic(self, rng):
        s, t = _problem(rng)
        f = lambda w: objective_dalc(w, s, t, 1.0, 1.0)  # noqa: E731
        a, b = minimize(f, np.ones(3) / 3), minimize(f, np.ones(3) / 3)
        assert a.iterations == b.iterations
        np.testing.assert_array_equal(a.x, b.x)

    def test_history_nonincreasing(self, rng):
        s, t = _problem(rng)
        res = minimize(lambda w: objective_pbda(w, s, t, 1.0, 1.0), np.zeros(3))
        assert all(b <= a for a, b in zip(res.history, res.history[1:]))

    def test_max_iterations(self):
        def rosen(x):
            a, b = x
            return ((1 - a) ** 2 + 100 * (b - a * a) ** 2,
                    np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)]))
        res = minimize(rosen, [-1.2, 1.0], OptimizerSettings(max_iterations=3))
        assert res.iterations == 3 and not res.converged
        assert res.message == "maximum iterations reached"

    def test_non_finite(self):
        def bad(w):
            return (float("inf") if w[0] > 0.5 else float((w - 1) @ (w - 1))), 2 * (w - 1)
        with pytest.raises(OptimizationError) as exc:
            minimize(bad, [0.0])
        assert exc.value.x is not None
        with pytest.raises(OptimizationError):
            minimize(lambda w: (float("nan"), w), [0.0])

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            OptimizerSettings(grad_sup_norm_tol=0.0)


class TestTrain:
    def test_separable(self, rng):
        y = rng.choice([-1, 1], size=100)
        X = np.column_stack([y * rng.uniform(0.5, 2.0, 100), rng.normal(size=100)])
        src = LabeledSample(X, y)
        model = train("pbgd3", src, None, {"Omega": 10.0})
        assert est.bayes_risk(model, src) == 0.0
        assert model.converged

    def test_pbda_a_zero_matches_pbgd3(self, rng):
        s, t = _problem(rng, m=30, d=2)
        a = train("pbda", s, t, {"Omega": 1.0, "A": 0.0})
        b = train("pbgd3", s, None, {"Omega": 1.0}, convex=True)
        assert abs(a.objective_value - b.objective_value) <= 1e-6

    def test_dalc_beats_baseline(self):
        src, tgt = gen_toy(ToySpec("gaussian_da", 100, seed=3))
        model = train("dalc", src, tgt.unlabeled(), {"B": 1.0, "C": 1.0})
        assert est.bayes_risk(model, gaussian_da_holdout(2000, 4)) < 0.5

    def test_dual_init(self, rng):
        s, t = _problem(rng, m=3, d=2)
        a = dual_init(s, t)
        np.testing.assert_allclose(a, np.concatenate([s.labels, np.ones(3)]) / 6)

    def test_dual_training(self, rng):
        s, t = _problem(rng, m=15, d=2)
        for algo, hp in (("pbgd3", {"Omega": 1.0}), ("pbda", {"Omega": 1.0, "A": 1.0}),
                         ("dalc", {"B": 1.0, "C": 1.0})):
            model = train(algo, s, t, hp, kernel=RBF)
            assert model.representation == "dual"
            assert np.isfinite(model.objective_value)

    def test_errors(self, rng):
        s, t = _problem(rng)
        with pytest.raises(ValueError):
            train("dalc", s, None, {"B": 1.0, "C": 1.0})
        with pytest.raises(ValueError):
            train("pbgd3", s, None, {"A": 1.0})
        with pytest.raises(ValueError):
            train("svm", s, None, {})


class TestPredict:
    def _model(self, w):
        return TrainedModel("pbgd3", "primal", {"Omega": 1.0}, w)

    def test_examples(self):
        m = self._model([1.0, 0.0])
        assert predict(m, [2.0, 0.0]) == 1
        assert predict(m, [0.0, 5.0]) == 1
        assert predict(m, [-1.0, 0.0]) == -1
        np.testing.assert_array_equal(predict(m, UnlabeledSample([[-1.0, 1.0], [1.0, 1.0]])),
                                      [-1, 1])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            predict(self._model([1.0, 0.0]), [1.0, 2.0, 3.0])


class TestModelFile:
    def test_primal_round_trip(self, tmp_path, rng):
        s, t = _problem(rng)
        model = train("pbda", s, t, {"Omega": 1.0, "A": 2.0})
        save_model(tmp_path / "m.txt", model)
        text = (tmp_path / "m.txt").read_text()
        assert text.splitlines()[0] == "PBDA-MODEL v1 pbda primal linear"
        back = load_model(tmp_path / "m.txt")
        np.testing.assert_array_equal(back.coefficients, model.coefficients)
        assert back.hyperparameters == model.hyperparameters

    def test_dual_round_trip(self, tmp_path, rng):
        s, t = _problem(rng, m=6, d=2)
        model = train("dalc", s, t, {"B": 1.0, "C": 1.0}, kernel=Kernel("rbf", 1.0))
        save_model(tmp_path / "m.txt", model)
        assert (tmp_path / "m.txt").read_text().startswith("PBDA-MODEL v1 dalc dual rbf")
        back = load_model(tmp_path / "m.txt")
        pts = rng.normal(size=(50, 2))
        np.testing.assert_array_equal(back.scores(pts), model.scores(pts))

    @pytest.mark.parametrize("text", ["", "PBDA-MODEL v2 pbgd3 primal linear\n",
                                      "PBDA-MODEL v1 pbgd3 primal linear\ncoefficients 2\n1\n"])
    def test_invalid(self, tmp_path, text):
        (tmp_path / "m.txt").write_text(text)
        with pytest.raises(ValidationError):
            load_model(tmp_path / "m.txt")
