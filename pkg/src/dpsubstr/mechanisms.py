"""Noise sources, Laplace/Gaussian mechanisms, tail bounds and budget accounting.

Noise is drawn with numpy's floating-point samplers. Floating-point side
channels of such samplers are a known limitation and out of scope here.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri


class BudgetExceededError(RuntimeError):
    """A spend or split would exceed the remaining privacy budget."""


class InvalidParameterError(ValueError):
    pass


# Strict margin on the Gaussian constant: c^2 > 2 ln(1.25/delta) must hold.
GAUSSIAN_MARGIN = 1e-6
_TOL = 1e-12


def _key_to_int(part) -> int:
    if isinstance(part, (int, np.integer)) and part >= 0:
        return int(part)
    if isinstance(part, str):
        data = b"s" + part.encode()
    elif isinstance(part, (bytes, bytearray)):
        data = b"b" + bytes(part)
    else:
        data = b"r" + repr(part).encode()
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


class NoiseSource:
    """Seeded, replayable stream of random numbers.

    ``child(*key)`` derives an independent stream; the same ``(seed, key path)``
    always reproduces the same draws. Not safe to share across threads: give
    each worker its own child.
    """

    def __init__(self, seed: int = 0, stream: tuple = (), zero_noise: bool = False):
        self.seed = int(seed) & ((1 << 64) - 1)
        self.stream = tuple(stream)
        self.zero_noise = bool(zero_noise)
        self._gen = None

    def child(self, *key) -> "NoiseSource":
        return NoiseSource(self.seed, self.stream + tuple(_key_to_int(k) for k in key),
                           self.zero_noise)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(self.seed, spawn_key=self.stream)
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def uniform(self, size=None):
        return self.generator.random(size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def keyed_uniform(self, labels) -> np.ndarray:
        """One uniform in (0, 1) per label, a pure function of (seed, stream, label).

        Used where two code paths must draw identical noise for the same
        string regardless of which other strings they visit.
        """
        prefix = self.seed.to_bytes(8, "little") + b"".join(
            int(k).to_bytes(16, "little") for k in self.stream)
        out = np.empty(len(labels))
        for i, lab in enumerate(labels):
            h = hashlib.blake2b(prefix + bytes(lab), digest_size=8).digest()
            out[i] = ((int.from_bytes(h, "little") >> 11) + 0.5) / float(1 << 53)
        return out

    def __repr__(self):
        return f"NoiseSource(seed={self.seed}, stream={self.stream}, zero_noise={self.zero_noise})"


def laplace_sample(b: float, rng: NoiseSource, size=None):
    """Draw Lap(b) by inverse CDF, so draws at scale ``b`` are ``b`` times scale-1 draws."""
    if not b > 0:
        raise InvalidParameterError(f"Laplace scale must be > 0, got {b}")
    u = rng.uniform(size) - 0.5
    x = -b * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    if rng.zero_noise:
        x = x * 0.0
    return float(x) if size is None else x


def gaussian_sample(sigma: float, rng: NoiseSource, size=None):
    if not sigma > 0:
        raise InvalidParameterError(f"Gaussian sigma must be > 0, got {sigma}")
    x = sigma * rng.standard_normal(size)
    if rng.zero_noise:
        x = x * 0.0
    return float(x) if size is None else x


def keyed_laplace(b: float, rng: NoiseSource, labels) -> np.ndarray:
    if not b > 0:
        raise InvalidParameterError(f"Laplace scale must be > 0, got {b}")
    u = rng.keyed_uniform(labels) - 0.5
    x = -b * np.sign(u) * np.log1p(-2.0 * np.abs(u))
    return x * 0.0 if rng.zero_noise else x


def keyed_gaussian(sigma: float, rng: NoiseSource, labels) -> np.ndarray:
    if not sigma > 0:
        raise InvalidParameterError(f"Gaussian sigma must be > 0, got {sigma}")
    x = sigma * ndtri(rng.keyed_uniform(labels))
    return x * 0.0 if rng.zero_noise else x


def laplace_mechanism(values, l1_sens: float, eps: float, rng: NoiseSource) -> np.ndarray:
    if not l1_sens > 0 or not eps > 0:
        raise InvalidParameterError("sensitivity and epsilon must be positive")
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values.copy()
    return values + laplace_sample(l1_sens / eps, rng, size=values.shape)


def gaussian_constant(delta: float) -> float:
    if not 0 < delta < 1:
        raise InvalidParameterError(f"delta must be in (0, 1), got {delta}")
    return math.sqrt(2.0 * math.log(1.25 / delta)) + GAUSSIAN_MARGIN


def gaussian_sigma(l2_sens: float, eps: float, delta: float) -> float:
    """Noise level of the classical Gaussian mechanism; requires ``0 < eps < 1``."""
    if not l2_sens > 0:
        raise InvalidParameterError("L2 sensitivity must be positive")
    if not 0 < eps < 1:
        raise InvalidParameterError(
            f"the Gaussian mechanism is only calibrated for 0 < eps < 1 (got {eps}); "
            "split the budget across more stages or use pure mode")
    return gaussian_constant(delta) * l2_sens / eps


def gaussian_mechanism(values, l2_sens: float, eps: float, delta: float,
                       rng: NoiseSource) -> np.ndarray:
    sigma = gaussian_sigma(l2_sens, eps, delta)
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return values.copy()
    return values + gaussian_sample(sigma, rng, size=values.shape)


# ---------------------------------------------------------------------------
# explicit-constant error bounds

def laplace_max_error(k: int, scale: float, beta: float) -> float:
    """Max error over ``k`` Lap(scale) coordinates, exceeded w.p. at most ``beta``."""
    _check_beta(beta)
    if k <= 0:
        return 0.0
    return scale * math.log(k / beta)


def gaussian_max_error(k: int, l2_sens: float, eps: float, delta: float, beta: float) -> float:
    """``2 eps^-1 l2 sqrt(ln(2/delta) ln(2k/beta))`` for the calibrated Gaussian mechanism."""
    _check_beta(beta)
    if k <= 0:
        return 0.0
    return 2.0 / eps * l2_sens * math.sqrt(math.log(2.0 / delta) * math.log(2.0 * k / beta))


def gaussian_tail(sigma: float, beta: float, k: int = 1) -> float:
    """``t`` with ``Pr[max_k |N(0, sigma^2)| >= t] <= beta`` via ``2 exp(-t^2 / 2 sigma^2)``."""
    _check_beta(beta)
    if k <= 0:
        return 0.0
    return sigma * math.sqrt(2.0 * math.log(2.0 * k / beta))


def sum_laplace_tail(k: int, b: float, beta: float) -> float:
    """Tail of a sum of ``k`` i.i.d. Lap(b): ``2b sqrt(2 ln(2/beta)) max(sqrt k, sqrt ln(2/beta))``."""
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    if not b > 0:
        raise InvalidParameterError(f"b must be > 0, got {b}")
    _check_beta(beta)
    lg = math.log(2.0 / beta)
    return 2.0 * b * math.sqrt(2.0 * lg) * max(math.sqrt(k), math.sqrt(lg))


def _check_beta(beta):
    if not 0 < beta < 1:
        raise InvalidParameterError(f"beta must be in (0, 1), got {beta}")


# ---------------------------------------------------------------------------
# budget accounting (simple composition)

@dataclass
class PrivacyBudget:
    """(epsilon, delta) budget plus the failure probability and cap it is used with.

    Children handed out by :meth:`split` are recorded in ``ledger``; the sum
    of what was handed out never exceeds the parent.
    """

    epsilon: float
    delta: float = 0.0
    beta: float = 0.05
    cap: int | None = None
    label: str = "root"
    ledger: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 <= self.delta < 1:
            raise InvalidParameterError(f"delta must be in [0, 1), got {self.delta}")
        _check_beta(self.beta)
        if self.cap is not None and self.cap < 1:
            raise InvalidParameterError(f"cap must be >= 1, got {self.cap}")

    @property
    def pure(self) -> bool:
        return self.delta == 0

    @property
    def spent_epsilon(self) -> float:
        return sum(e for _, e, _ in self.ledger)

    @property
    def spent_delta(self) -> float:
        return sum(d for _, _, d in self.ledger)

    def spend(self, epsilon: float, delta: float = 0.0, label: str = "") -> None:
        if epsilon < 0 or delta < 0:
            raise InvalidParameterError("spends must be non-negative")
        if (self.spent_epsilon + epsilon > self.epsilon * (1 + _TOL)
                or self.spent_delta + delta > self.delta * (1 + _TOL) + _TOL * (self.delta == 0)):
            raise BudgetExceededError(
                f"{self.label}: spending ({epsilon:g}, {delta:g}) exceeds remaining "
                f"({self.epsilon - self.spent_epsilon:g}, {self.delta - self.spent_delta:g})")
        self.ledger.append((label, epsilon, delta))

    def split(self, shares, labels=None) -> list["PrivacyBudget"]:
        """Hand out children with ``eps_i = share_i * eps``, ``delta_i``, ``beta_i`` likewise."""
        shares = [float(s) for s in shares]
        if any(not s > 0 for s in shares):
            raise InvalidParameterError("shares must be positive")
        if sum(shares) > 1 + _TOL:
            raise InvalidParameterError(f"shares sum to {sum(shares)} > 1")
        labels = labels or [f"{self.label}/{i}" for i in range(len(shares))]
        eps_total = sum(s * self.epsilon for s in shares)
        delta_total = sum(s * self.delta for s in shares)
        if (self.spent_epsilon + eps_total > self.epsilon * (1 + _TOL)
                or self.spent_delta + delta_total > self.delta * (1 + _TOL)):
            raise BudgetExceededError(f"{self.label}: split exceeds remaining budget")
        children = []
        for s, lab in zip(shares, labels):
            self.ledger.append((lab, s * self.epsilon, s * self.delta))
            children.append(PrivacyBudget(s * self.epsilon, s * self.delta, s * self.beta,
                                          self.cap, lab))
        return children

    def summary(self) -> dict:
        return {
            "label": self.label, "epsilon": self.epsilon, "delta": self.delta,
            "beta": self.beta,
            "spent": [{"label": lab, "epsilon": e, "delta": d} for lab, e, d in self.ledger],
        }


def budget_split(parent: PrivacyBudget, shares, labels=None) -> list[PrivacyBudget]:
    return parent.split(shares, labels)
