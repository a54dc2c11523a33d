"""Fixed-length (q-gram) pipelines.

Pure mode spends half the budget on doubling up to ``2**floor(log2 q)`` and
the other half on one noisy count per length-``q`` candidate.

Approximate mode runs ``floor(log2 q) + 2`` Gaussian stages. The production
variant (:func:`build_qgrams_approx`) only ever noises strings that occur in
the data; :func:`build_qgrams_approx_reference` also noises the zero-count
strings and reports their largest noise per stage. Both draw the noise of a
string from a stream keyed by ``(stage, string)``, so on runs where every
zero-count noise stays below ``alpha`` they return the same output.
"""

from __future__ import annotations

import math

import numpy as np

from . import __version__
from .candidates import build_candidates, candidates_of_length, universe_size
from .corpus import Database, InvalidInputError, SuffixIndex, build_index, check_symbols
from .countingtrie import PrivateCountTrie
from .mechanisms import (InvalidParameterError, NoiseSource, PrivacyBudget, keyed_gaussian,
                         keyed_laplace)


class QGramStructure(PrivateCountTrie):
    """Retained q-grams in a trie; only depth-``q`` nodes carry counts (inner nodes are NaN)."""

    @classmethod
    def from_table(cls, table: dict, meta: dict) -> "QGramStructure":
        parent, symbol, count = [-1], [0], [math.nan]
        children: list[dict] = [{}]
        for s in sorted(table):
            v = 0
            for c in s:
                nxt = children[v].get(c)
                if nxt is None:
                    nxt = len(parent)
                    children[v][c] = nxt
                    children.append({})
                    parent.append(v)
                    symbol.append(c)
                    count.append(math.nan)
                v = nxt
            count[v] = float(table[s])
        return cls(parent, symbol, count, meta)

    @property
    def q(self) -> int:
        return int(self.meta["q"])

    def query(self, pattern) -> float:
        p = check_symbols(pattern, self.meta.get("sigma", 256))
        if len(p) != self.q:
            raise InvalidInputError(f"pattern has length {len(p)}, structure holds {self.q}-grams")
        v = self.node_of(p)
        return 0.0 if v is None else float(self.count[v])

    def items(self):
        s = self.strings()
        return [(s[v], float(self.count[v])) for v in range(1, len(self))
                if not math.isnan(self.count[v])]

    def table(self) -> dict:
        return dict(self.items())


def query_qgram(qs: QGramStructure, pattern) -> float:
    return qs.query(pattern)


def _check_q(q: int, ell: int):
    if not 1 <= q <= ell:
        raise InvalidParameterError(f"q must be in [1, {ell}], got {q}")


def _base_meta(db, q, mode, epsilon, delta, beta, cap, seed, zero_noise):
    return {
        "kind": "qgram", "format_version": 1, "package_version": __version__,
        "mode": mode, "q": q, "n": db.n, "ell": db.ell, "sigma": db.sigma, "cap": cap,
        "epsilon": epsilon, "delta": delta, "beta": beta, "seed": int(seed),
        "zero_noise": bool(zero_noise),
        "symbols": list(db.alphabet.symbols) if db.alphabet.symbols else None,
    }


def build_qgrams_pure(db: Database, q: int, epsilon: float, beta: float = 0.05,
                      cap: int | None = None, seed: int = 0, zero_noise: bool = False,
                      tau_candidates: float | None = None, threshold: float | None = None,
                      index: SuffixIndex | None = None) -> QGramStructure:
    ell = db.ell
    _check_q(q, ell)
    cap = ell if cap is None else int(cap)
    idx = build_index(db) if index is None else index
    budget = PrivacyBudget(epsilon, 0.0, beta, cap)
    b_dbl, b_fin = budget.split([0.5, 0.5], ["doubling", "final"])
    rng = NoiseSource(seed, zero_noise=zero_noise)
    meta = _base_meta(db, q, "pure", epsilon, 0.0, beta, cap, seed, zero_noise)
    cands = build_candidates(db, idx, b_dbl, rng.child("doubling"), "pure", cap=cap,
                             tau=tau_candidates, levels=q.bit_length())
    meta.update(alpha_candidates=cands.alpha, tau_candidates=cands.tau, failed=cands.failed,
                fail_level=cands.fail_level, candidate_sizes=[len(s) for s in cands.pow_sets])
    if cands.failed:
        meta["budget"] = budget.summary()
        return QGramStructure.from_table({}, meta)
    universe = sorted(cands.per_length(q))
    b_fin.spend(b_fin.epsilon, 0.0, "final")
    scale = 2.0 * ell / b_fin.epsilon
    alpha = scale * math.log(universe_size(db.n, ell, db.sigma) / b_fin.beta)
    thr = 2.0 * alpha if threshold is None else float(threshold)
    exact = idx.substrings_of_length(q, cap)
    counts = np.array([exact.get(s, 0) for s in universe], dtype=float)
    noisy = counts + keyed_laplace(scale, rng.child("final"), universe) if universe else counts
    table = {s: float(c) for s, c in zip(universe, noisy) if c >= thr}
    meta.update(alpha=alpha, threshold=thr, final_universe=len(universe),
                laplace_scale=scale, budget=budget.summary())
    return QGramStructure.from_table(table, meta)


def approx_parameters(q: int, ell: int, n: int, sigma: int, cap: int, epsilon: float,
                      delta: float, beta: float) -> dict:
    """Stage budget, noise level and threshold of the approximate q-gram pipeline."""
    stages = (q.bit_length() - 1) + 2
    eps1 = epsilon / stages
    if not 0 < eps1 < 1:
        raise InvalidParameterError(
            f"per-stage epsilon {eps1:g} must lie in (0, 1) for the Gaussian mechanism")
    if not 0 < delta < 1:
        raise InvalidParameterError("approx mode requires 0 < delta < 1")
    beta1 = min(beta / stages, delta / (3.0 * math.e ** epsilon * stages))
    delta1 = beta1
    sigma_g = 2.0 / eps1 * math.sqrt(2.0 * ell * cap * math.log(2.0 / delta1))
    alpha = sigma_g * math.sqrt(math.log(2.0 * universe_size(n, ell, sigma) / beta1))
    return {"stages": stages, "eps_stage": eps1, "beta_stage": beta1, "delta_stage": delta1,
            "gaussian_sigma": sigma_g, "alpha": alpha,
            "predicted_event_failure": stages * beta1}


def _approx_qgrams(db, q, epsilon, delta, beta, cap, seed, zero_noise, alpha, index,
                   reference: bool):
    ell = db.ell
    _check_q(q, ell)
    cap = ell if cap is None else int(cap)
    if not 1 <= cap <= ell:
        raise InvalidParameterError(f"cap must be in [1, {ell}], got {cap}")
    idx = build_index(db) if index is None else index
    params = approx_parameters(q, ell, db.n, db.sigma, cap, epsilon, delta, beta)
    if alpha is not None:
        params["alpha"] = float(alpha)
        params["alpha_override"] = True
    alpha = params["alpha"]
    thr = 2.0 * alpha
    sigma_g = params["gaussian_sigma"]
    budget = PrivacyBudget(epsilon, delta, beta, cap)
    rng = NoiseSource(seed, zero_noise=zero_noise)
    J = q.bit_length() - 1
    limit = db.n * ell
    pow_sets: list[list[bytes]] = []
    zero_max: list[float] = []
    failed, fail_level = False, None
    table: dict = {}

    def noisy_keep(stage, universe, exact):
        budget.spend(params["eps_stage"], params["delta_stage"], f"stage{stage}")
        if not universe:
            zero_max.append(0.0)
            return []
        counts = np.array([exact.get(s, 0) for s in universe], dtype=float)
        noise = keyed_gaussian(sigma_g, rng.child("stage", stage), universe)
        zero = counts == 0
        zero_max.append(float(np.abs(noise[zero]).max()) if zero.any() else 0.0)
        noisy = counts + noise
        return [(s, float(v)) for s, v in zip(universe, noisy) if v >= thr]

    for k in range(J + 1):
        m = 1 << k
        exact = idx.substrings_of_length(m, cap)
        if k == 0:
            universe = [bytes([c]) for c in range(db.sigma)] if reference else sorted(exact)
        else:
            prev = set(pow_sets[-1])
            h = m >> 1
            if reference:
                ordered = sorted(prev)
                universe = [a + b for a in ordered for b in ordered]
            else:
                universe = sorted(s for s in exact if s[:h] in prev and s[h:] in prev)
        kept = [s for s, _ in noisy_keep(k, universe, exact)]
        pow_sets.append(kept)
        if len(kept) > limit:
            failed, fail_level = True, k
            break

    if not failed:
        exact = idx.substrings_of_length(q, cap)
        top = set(pow_sets[J])
        if reference:
            if q == 1 << J:
                universe = sorted(top)
            else:
                universe = sorted(candidates_of_length(q, top))
        else:
            # occurrence filter first, then prefix/suffix membership
            h = 1 << J
            universe = sorted(s for s in exact if s[:h] in top and s[q - h:] in top)
        table = dict(noisy_keep(J + 1, universe, exact))

    meta = _base_meta(db, q, "approx", epsilon, delta, beta, cap, seed, zero_noise)
    meta.update(params)
    meta.update(threshold=thr, failed=failed, fail_level=fail_level,
                candidate_sizes=[len(s) for s in pow_sets], budget=budget.summary(),
                algorithm="reference" if reference else "occurring-only")
    diagnostics = {"zero_count_max_noise": zero_max,
                   "event_holds": all(z < alpha for z in zero_max)}
    return QGramStructure.from_table(table, meta), diagnostics


def build_qgrams_approx(db: Database, q: int, epsilon: float, delta: float,
                        beta: float = 0.05, cap: int | None = None, seed: int = 0,
                        zero_noise: bool = False, alpha: float | None = None,
                        index: SuffixIndex | None = None) -> QGramStructure:
    """Approximate-DP q-grams that noise only strings occurring in ``db``.

    ``alpha`` overrides the computed error bound (threshold ``2 * alpha``);
    intended for tests.
    """
    qs, _ = _approx_qgrams(db, q, epsilon, delta, beta, cap, seed, zero_noise, alpha, index,
                           reference=False)
    return qs


def build_qgrams_approx_reference(db: Database, q: int, epsilon: float, delta: float,
                                  beta: float = 0.05, cap: int | None = None, seed: int = 0,
                                  zero_noise: bool = False, alpha: float | None = None,
                                  index: SuffixIndex | None = None):
    """Variant that also noises zero-count strings; returns ``(structure, diagnostics)``.

    ``diagnostics["event_holds"]`` is true when every zero-count noise has
    magnitude below ``alpha``.
    """
    return _approx_qgrams(db, q, epsilon, delta, beta, cap, seed, zero_noise, alpha, index,
                          reference=True)
