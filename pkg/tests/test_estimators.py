import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dpsubstr.estimators import PrivateQGramCounter, PrivateSubstringCounter, PrivateTreeCounter

DOCS = ["abab", "ba", "abba"]


class TestSubstringCounter:
    def test_params_roundtrip(self):
        est = PrivateSubstringCounter(epsilon=2.0, task="document")
        assert clone(est).get_params()["task"] == "document"

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            PrivateSubstringCounter().predict(["a"])

    def test_zero_noise_counts(self):
        est = PrivateSubstringCounter(zero_noise=True, tau_candidates=1, prune_threshold=1)
        got = est.fit(DOCS).predict(["ab", "b", "abab", "aa"])
        assert list(got) == [3.0, 5.0, 1.0, 0.0]

    def test_document_task(self):
        est = PrivateSubstringCounter(task="document", zero_noise=True, tau_candidates=1,
                                      prune_threshold=1)
        assert list(est.fit(DOCS).predict(["ab", "b"])) == [2.0, 3.0]

    def test_mine_decodes(self):
        est = PrivateSubstringCounter(zero_noise=True, tau_candidates=1, prune_threshold=1)
        top = est.fit(DOCS).mine(4)
        assert {p for p, _ in top} == {"a", "b"}


class TestQGramCounter:
    def test_zero_noise(self):
        est = PrivateQGramCounter(q=2, epsilon=1e4, zero_noise=True).fit(["abab"] * 40)
        got = est.predict(["ab", "ba", "bb"])
        assert got[0] == 80.0 and got[1] == 40.0 and got[2] == 0.0


class TestTreeCounter:
    def test_zero_noise(self):
        est = PrivateTreeCounter(zero_noise=True).fit([-1, 0, 0], [2, 1, 1])
        assert list(est.predict()) == [2.0, 1.0, 1.0]
        assert list(est.predict([1])) == [1.0]

    def test_approx_needs_cap(self):
        with pytest.raises(Exception):
            PrivateTreeCounter(delta=1e-6).fit([-1, 0, 0], [2, 1, 1])

    def test_noisy_bound(self):
        est = PrivateTreeCounter(seed=3).fit([-1, 0, 0], [2, 1, 1])
        assert np.abs(est.predict() - [2, 1, 1]).max() <= est.bound_ * 10
