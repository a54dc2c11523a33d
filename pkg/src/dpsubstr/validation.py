"""Input checks shared by the estimators and the command line."""

from __future__ import annotations

import os

from .corpus import Alphabet, Database, InvalidInputError, encode_texts
from .mechanisms import InvalidParameterError

SEED_ENV = "DPSUBSTR_SEED"


def default_seed() -> int:
    """Seed from ``$DPSUBSTR_SEED``, else 0."""
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise InvalidParameterError(f"{SEED_ENV}={raw!r} is not an integer") from None


def check_privacy_params(epsilon, delta, beta, mode: str | None = None) -> str:
    """Validate ``(epsilon, delta, beta)`` and return the mode they imply."""
    if not epsilon > 0:
        raise InvalidParameterError(f"epsilon must be > 0, got {epsilon}")
    if not 0 <= delta < 1:
        raise InvalidParameterError(f"delta must be in [0, 1), got {delta}")
    if not 0 < beta < 1:
        raise InvalidParameterError(f"beta must be in (0, 1), got {beta}")
    implied = "pure" if delta == 0 else "approx"
    if mode is not None and mode != implied:
        if mode == "approx":
            raise InvalidParameterError("approx mode requires delta > 0")
        raise InvalidParameterError("pure mode requires delta = 0")
    return implied


def resolve_cap(task: str, cap, ell: int) -> int:
    """Document counting forces cap 1; substring counting defaults to ``ell``."""
    if task == "document":
        if cap not in (None, 1):
            raise InvalidParameterError("the document task counts containment (cap = 1)")
        return 1
    cap = ell if cap is None else int(cap)
    if not 1 <= cap <= ell:
        raise InvalidParameterError(f"cap must be in [1, {ell}], got {cap}")
    return cap


def as_database(X, ell=None, alphabet=None) -> Database:
    """Accept a :class:`Database`, a list of ``str`` or a list of symbol sequences."""
    if isinstance(X, Database):
        return X
    docs = list(X)
    if not docs:
        raise InvalidInputError("need at least one document")
    if all(isinstance(d, str) for d in docs):
        size = alphabet.size if isinstance(alphabet, Alphabet) else alphabet
        return encode_texts(docs, alphabet_size=size, ell=ell)
    if any(isinstance(d, str) for d in docs):
        raise InvalidInputError("mix of text and symbol-code documents")
    return Database(docs, ell=ell, alphabet=alphabet)


def encode_pattern(pattern, symbols) -> bytes:
    """Text patterns go through the symbol dictionary; byte patterns pass through."""
    if isinstance(pattern, str):
        if symbols is None:
            raise InvalidInputError("structure has no symbol dictionary; pass symbol codes")
        lookup = {c: i for i, c in enumerate(symbols)}
        try:
            return bytes(lookup[c] for c in pattern)
        except KeyError as exc:
            raise InvalidInputError(f"character {exc.args[0]!r} is not in the alphabet") from None
    return bytes(pattern)


def decode_pattern(codes: bytes, symbols) -> str:
    if symbols is None:
        return " ".join(str(c) for c in codes)
    return "".join(symbols[c] for c in codes)
