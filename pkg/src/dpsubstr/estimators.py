"""scikit-learn style wrappers: ``fit`` builds a private structure, ``predict`` queries it."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .countingtrie import build_private_trie
from .qgrams import build_qgrams_approx, build_qgrams_pure
from .treecount import RootedTree, dp_tree_counts_approx, dp_tree_counts_pure
from .validation import (as_database, check_privacy_params, decode_pattern, default_seed,
                         encode_pattern, resolve_cap)


class _PatternCounterMixin:

    def predict(self, X):
        """Noisy counts for a list of patterns (text or symbol codes)."""
        check_is_fitted(self, "structure_")
        return np.array([self.structure_.query(self._encode(p)) for p in X], dtype=float)

    def mine(self, tau=0.0):
        """Retained patterns with noisy count at least ``tau``, decoded when fitted on text."""
        check_is_fitted(self, "structure_")
        return [(self._decode(p), c) for p, c in self.structure_.mine(tau)]

    def _encode(self, p):
        return encode_pattern(p, self.structure_.meta.get("symbols"))

    def _decode(self, p):
        symbols = self.structure_.meta.get("symbols")
        return decode_pattern(p, symbols) if symbols else p

    @property
    def failed_(self) -> bool:
        check_is_fitted(self, "structure_")
        return self.structure_.failed


class PrivateSubstringCounter(_PatternCounterMixin, BaseEstimator):
    """Differentially private substring or document counts for all patterns.

    Parameters
    ----------
    epsilon, delta, beta : privacy budget and failure probability.
        ``delta=0`` gives pure DP, ``delta>0`` the Gaussian variant.
    task : "substring" (cap defaults to ell) or "document" (cap = 1).
    cap : per-document contribution cap.
    ell, alphabet_size : public bounds; inferred from the data when None.
    seed : noise seed, defaults to ``$DPSUBSTR_SEED`` or 0.
    zero_noise : testing switch that turns every mechanism into the identity.
    """

    def __init__(self, epsilon=1.0, delta=0.0, beta=0.05, task="substring", cap=None,
                 ell=None, alphabet_size=None, seed=None, zero_noise=False,
                 tau_candidates=None, prune_threshold=None):
        self.epsilon = epsilon
        self.delta = delta
        self.beta = beta
        self.task = task
        self.cap = cap
        self.ell = ell
        self.alphabet_size = alphabet_size
        self.seed = seed
        self.zero_noise = zero_noise
        self.tau_candidates = tau_candidates
        self.prune_threshold = prune_threshold

    def fit(self, X, y=None):
        check_privacy_params(self.epsilon, self.delta, self.beta)
        db = as_database(X, ell=self.ell, alphabet=self.alphabet_size)
        cap = resolve_cap(self.task, self.cap, db.ell)
        seed = default_seed() if self.seed is None else self.seed
        self.structure_ = build_private_trie(
            db, self.epsilon, self.delta, self.beta, cap=cap, seed=seed,
            zero_noise=self.zero_noise, tau_candidates=self.tau_candidates,
            prune_threshold=self.prune_threshold)
        self.alpha_ = self.structure_.meta["alpha_total"]
        self.n_docs_ = db.n
        return self


class PrivateQGramCounter(_PatternCounterMixin, BaseEstimator):
    """Private counts for all patterns of one fixed length ``q``."""

    def __init__(self, q=2, epsilon=1.0, delta=0.0, beta=0.05, cap=None, ell=None,
                 alphabet_size=None, seed=None, zero_noise=False):
        self.q = q
        self.epsilon = epsilon
        self.delta = delta
        self.beta = beta
        self.cap = cap
        self.ell = ell
        self.alphabet_size = alphabet_size
        self.seed = seed
        self.zero_noise = zero_noise

    def fit(self, X, y=None):
        mode = check_privacy_params(self.epsilon, self.delta, self.beta)
        db = as_database(X, ell=self.ell, alphabet=self.alphabet_size)
        cap = resolve_cap("substring", self.cap, db.ell)
        seed = default_seed() if self.seed is None else self.seed
        if mode == "pure":
            self.structure_ = build_qgrams_pure(db, self.q, self.epsilon, self.beta, cap=cap,
                                                seed=seed, zero_noise=self.zero_noise)
        else:
            self.structure_ = build_qgrams_approx(db, self.q, self.epsilon, self.delta,
                                                  self.beta, cap=cap, seed=seed,
                                                  zero_noise=self.zero_noise)
        self.alpha_ = self.structure_.meta.get("alpha")
        return self


class PrivateTreeCounter(BaseEstimator):
    """Private estimates of a monotone counting function on a tree.

    ``fit(parent, counts)`` takes a parent array (root ``-1``) and the exact
    per-node counts; ``predict(nodes)`` returns the estimates.
    """

    def __init__(self, epsilon=1.0, delta=0.0, beta=0.05, d=2, cap=None, seed=None,
                 zero_noise=False, validate=False):
        self.epsilon = epsilon
        self.delta = delta
        self.beta = beta
        self.d = d
        self.cap = cap
        self.seed = seed
        self.zero_noise = zero_noise
        self.validate = validate

    def fit(self, X, y):
        mode = check_privacy_params(self.epsilon, self.delta, self.beta)
        tree = X if isinstance(X, RootedTree) else RootedTree(X)
        seed = default_seed() if self.seed is None else self.seed
        if mode == "pure":
            res = dp_tree_counts_pure(tree, y, self.d, self.epsilon, self.beta, seed=seed,
                                      zero_noise=self.zero_noise, validate=self.validate)
        else:
            res = dp_tree_counts_approx(tree, y, self.d, self.cap, self.epsilon, self.delta,
                                        self.beta, seed=seed, zero_noise=self.zero_noise,
                                        validate=self.validate)
        self.estimates_ = res.estimates
        self.bound_ = res.bound
        self.meta_ = res.meta
        return self

    def predict(self, X=None):
        check_is_fitted(self, "estimates_")
        if X is None:
            return self.estimates_.copy()
        return self.estimates_[np.asarray(X, dtype=int)]
