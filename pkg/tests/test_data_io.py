import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbda.data_io import (LabeledSample, ToySpec, UnlabeledSample, gaussian_da_holdout, gen_toy,
                          kfold_split, load_csv, load_svmlight, rotation_matrix, write_csv)
from pbda.exceptions import ParseError, ValidationError


def _write(tmp_path, name, text, newline="\n"):
    p = tmp_path / name
    p.write_bytes(text.replace("\n", newline).encode("utf-8"))
    return p


class TestSamples:
    def test_rejects_zero_norm(self):
        with pytest.raises(ValidationError):
            UnlabeledSample([[1.0, 0.0], [0.0, 0.0]])

    def test_rejects_bad_labels(self):
        with pytest.raises(ValidationError):
            LabeledSample([[1.0], [2.0]], [1, 0])

    def test_labels_required(self):
        with pytest.raises(ValidationError):
            LabeledSample([[1.0]])

    def test_immutable(self):
        s = LabeledSample([[1.0, 2.0]], [1])
        with pytest.raises(ValueError):
            s.features[0, 0] = 5.0

    def test_normalized_rows(self, rng):
        s = UnlabeledSample(rng.normal(size=(20, 3)))
        np.testing.assert_allclose(np.linalg.norm(s.normalized, axis=1), 1.0, rtol=1e-15)

    def test_unlabeled_view(self):
        s = LabeledSample([[1.0, 2.0], [3.0, 1.0]], [1, -1])
        u = s.unlabeled()
        assert not isinstance(u, LabeledSample)
        np.testing.assert_array_equal(u.features, s.features)


class TestSvmlight:
    def test_basic_lines(self, tmp_path):
        p = _write(tmp_path, "a.svm", "+1 1:1.0\n-1 2:3.0 5:0.5\n")
        s = load_svmlight(p)
        np.testing.assert_array_equal(s.features, [[1, 0, 0, 0, 0], [0, 3, 0, 0, 0.5]])
        np.testing.assert_array_equal(s.labels, [1, -1])

    def test_label_mapping_and_comments(self, tmp_path):
        p = _write(tmp_path, "a.svm", "# header\n0 1:1\n\n2.5 2:1 # trailing\n-3 1:2\n")
        np.testing.assert_array_equal(load_svmlight(p).labels, [-1, 1, -1])

    def test_zero_norm(self, tmp_path):
        p = _write(tmp_path, "a.svm", "+1 1:1\n1 1:0 2:0\n")
        with pytest.raises(ValidationError, match="line 2"):
            load_svmlight(p)

    @pytest.mark.parametrize("line", ["+1 1-2", "+1 0:1", "+1 2:1 1:1", "abc 1:1", "+1 1:x"])
    def test_malformed(self, tmp_path, line):
        p = _write(tmp_path, "a.svm", "+1 1:1\n" + line + "\n")
        with pytest.raises(ParseError) as exc:
            load_svmlight(p)
        assert exc.value.lineno == 2

    def test_crlf(self, tmp_path):
        p = _write(tmp_path, "a.svm", "+1 1:1.0\n-1 2:3.0\n", newline="\r\n")
        assert load_svmlight(p).size == 2


class TestCsv:
    def test_unlabeled(self, tmp_path):
        p = _write(tmp_path, "a.csv", "x1,x2\n1,2\n3,4\n")
        s = load_csv(p)
        assert isinstance(s, UnlabeledSample) and not isinstance(s, LabeledSample)
        assert s.size == 2

    def test_labeled(self, tmp_path):
        p = _write(tmp_path, "a.csv", "x1,label,x2\n1,-1,2\n3,1,4\n", newline="\r\n")
        s = load_csv(p, "label")
        np.testing.assert_array_equal(s.features, [[1, 2], [3, 4]])
        np.testing.assert_array_equal(s.labels, [-1, 1])

    @pytest.mark.parametrize("body", ["1,0\n", "1,2\n3\n", "1,a\n", "0,1\n"])
    def test_invalid(self, tmp_path, body):
        # label 0, extra cell, non-numeric label, zero-norm features
        p = _write(tmp_path, "a.csv", "x1,label\n2,1\n" + body)
        with pytest.raises(ValidationError):
            load_csv(p, "label")

    def test_round_trip(self, tmp_path, rng):
        s = LabeledSample(rng.normal(size=(7, 3)), rng.choice([-1, 1], size=7))
        write_csv(tmp_path / "o.csv", s)
        back = load_csv(tmp_path / "o.csv", "label")
        np.testing.assert_array_equal(back.features, s.features)
        np.testing.assert_array_equal(back.labels, s.labels)


class TestToys:
    def test_gaussian_supervised(self):
        src, tgt = gen_toy(ToySpec("gaussian_supervised", 100, seed=3))
        assert src.size == 200
        np.testing.assert_array_equal(src.features, tgt.features)
        pos = src.features[src.labels == 1].mean(axis=0)
        neg = src.features[src.labels == -1].mean(axis=0)
        # sigma / sqrt(n) = 0.1, so 0.3 is a 3-sigma band
        np.testing.assert_allclose(pos, [-1, -1], atol=0.3)
        np.testing.assert_allclose(neg, [-1, 1], atol=0.3)

    def test_gaussian_da_target(self):
        _, tgt = gen_toy(ToySpec("gaussian_da", 500, seed=1))
        np.testing.assert_allclose(tgt.features[tgt.labels == -1].mean(axis=0), [1, 1], atol=0.15)
        hold = gaussian_da_holdout(500, 2)
        np.testing.assert_allclose(hold.features[hold.labels == 1].mean(axis=0), [-1, -1],
                                   atol=0.15)

    def test_moons_on_arcs(self):
        src, _ = gen_toy(ToySpec("two_moons", 50, noise_sigma=0.0, seed=4))
        up = src.features[src.labels == 1]
        low = src.features[src.labels == -1]
        np.testing.assert_allclose(np.linalg.norm(up, axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(low - [1.0, 0.5], axis=1), 1.0, atol=1e-12)
        assert np.all(up[:, 1] >= -1e-12) and np.all(low[:, 1] <= 0.5 + 1e-12)

    def test_rotation_full_turn(self):
        a = gen_toy(ToySpec("two_moons", 30, rotation_deg=0.0, seed=5))[1]
        b = gen_toy(ToySpec("two_moons", 30, rotation_deg=360.0, seed=5))[1]
        np.testing.assert_allclose(a.features, b.features, atol=1e-12)

    def test_rotation_is_rigid(self):
        src, tgt = gen_toy(ToySpec("two_moons", 30, noise_sigma=0.0, rotation_deg=30.0, seed=6))
        back = tgt.features @ rotation_matrix(-30.0).T
        np.testing.assert_allclose(np.linalg.norm(back[tgt.labels == 1], axis=1), 1.0, atol=1e-12)

    def test_determinism(self):
        a = gen_toy(ToySpec("gaussian_da", 10, seed=9))[0]
        b = gen_toy(ToySpec("gaussian_da", 10, seed=9))[0]
        c = gen_toy(ToySpec("gaussian_da", 10, seed=10))[0]
        np.testing.assert_array_equal(a.features, b.features)
        assert not np.array_equal(a.features, c.features)

    @pytest.mark.parametrize("kw", [{"kind": "spiral"}, {"kind": "two_moons", "n_per_class": 0},
                                    {"kind": "two_moons", "noise_sigma": -1.0}])
    def test_spec_validation(self, kw):
        with pytest.raises(ValidationError):
            ToySpec(**kw)


class TestKFold:
    def test_partition(self):
        folds = kfold_split(10, 5, seed=0)
        tests = np.concatenate([t for _, t in folds])
        assert sorted(tests.tolist()) == list(range(10))
        assert all(len(t) == 2 for _, t in folds)
        for tr, te in folds:
            assert set(tr).isdisjoint(te) and len(tr) + len(te) == 10

    def test_leave_one_out(self):
        assert all(len(t) == 1 for _, t in kfold_split(10, 10, seed=1))

    def test_deterministic(self):
        a, b = kfold_split(10, 3, 7), kfold_split(10, 3, 7)
        for (x, y), (u, v) in zip(a, b):
            np.testing.assert_array_equal(x, u)
            np.testing.assert_array_equal(y, v)

    @pytest.mark.parametrize("k", [1, 11])
    def test_bad_k(self, k):
        with pytest.raises(ValueError):
            kfold_split(10, k, 0)

    @given(st.integers(2, 60), st.integers(2, 60), st.integers(0, 10))
    @settings(max_examples=50, deadline=None)
    def test_partition_property(self, m, k, seed):
        if k > m:
            return
        tests = np.concatenate([t for _, t in kfold_split(m, k, seed)])
        np.testing.assert_array_equal(np.sort(tests), np.arange(m))
