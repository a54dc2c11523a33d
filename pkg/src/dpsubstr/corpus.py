"""Documents, databases, exact counting and an exact suffix index.

Symbols are small integers ``0 .. sigma-1`` stored in ``bytes`` objects, so a
document or pattern is just a ``bytes`` value. Text input is mapped to dense
codes through a recorded symbol dictionary (see :func:`encode_texts`).
"""

from __future__ import annotations

import bisect
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class InvalidInputError(ValueError):
    """Raised for malformed documents, patterns or corpus files."""


def _as_bytes(symbols) -> bytes:
    if isinstance(symbols, bytes):
        return symbols
    if isinstance(symbols, (bytearray, memoryview)):
        return bytes(symbols)
    if isinstance(symbols, str):
        raise InvalidInputError(
            "text must be encoded to symbol codes first (see encode_texts)")
    try:
        return bytes(symbols)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"cannot interpret {symbols!r} as symbols") from exc


def check_symbols(pattern, sigma: int) -> bytes:
    """Return ``pattern`` as bytes, rejecting symbols outside ``0..sigma-1``."""
    p = _as_bytes(pattern)
    if p and max(p) >= sigma:
        raise InvalidInputError(
            f"symbol {max(p)} outside alphabet of size {sigma}")
    return p


# ---------------------------------------------------------------------------
# naive counting semantics (also the test oracle)

def count(pattern, doc) -> int:
    """Number of (overlapping) occurrences of ``pattern`` in ``doc``.

    The empty pattern occurs ``len(doc)`` times by convention.
    """
    p, s = _as_bytes(pattern), _as_bytes(doc)
    if not p:
        return len(s)
    if len(p) > len(s):
        return 0
    n = 0
    i = s.find(p)
    while i != -1:
        n += 1
        i = s.find(p, i + 1)
    return n


def count_capped(pattern, doc, cap: int) -> int:
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    return min(cap, count(pattern, doc))


def count_db(pattern, db: "Database", cap: int | None = None) -> int:
    """Sum of per-document capped counts. ``cap=None`` means ``cap = ell``."""
    cap = db.ell if cap is None else cap
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    p = check_symbols(pattern, db.sigma)
    return sum(min(cap, count(p, s)) for s in db.docs)


def naive_substring_counts(db: "Database", m: int, cap: int | None = None) -> dict[bytes, int]:
    """All distinct length-``m`` substrings of ``db`` with capped counts, by scanning."""
    cap = db.ell if cap is None else cap
    total: Counter = Counter()
    for s in db.docs:
        per_doc = Counter(s[i:i + m] for i in range(len(s) - m + 1))
        for p, c in per_doc.items():
            total[p] += min(cap, c)
    return dict(total)


# ---------------------------------------------------------------------------
# documents and databases

@dataclass(frozen=True)
class Alphabet:
    size: int
    symbols: tuple[str, ...] | None = None

    def __post_init__(self):
        if not 2 <= self.size <= 256:
            raise InvalidInputError(f"alphabet size must be in [2, 256], got {self.size}")
        if self.symbols is not None and len(self.symbols) > self.size:
            raise InvalidInputError("symbol dictionary larger than alphabet")

    def encode(self, text: str) -> bytes:
        if self.symbols is None:
            raise InvalidInputError("alphabet has no symbol dictionary")
        lookup = {c: i for i, c in enumerate(self.symbols)}
        try:
            return bytes(lookup[c] for c in text)
        except KeyError as exc:
            raise InvalidInputError(f"character {exc.args[0]!r} not in alphabet") from None

    def decode(self, codes: bytes) -> str:
        if self.symbols is None:
            return " ".join(str(c) for c in codes)
        return "".join(self.symbols[c] for c in codes)


class Database:
    """Multiset of documents over an alphabet, with a length bound ``ell``.

    ``ell`` defaults to the longest document and ``alphabet`` to
    ``max symbol + 1`` (at least 2). Both are public parameters of the
    privacy analysis, so pin them when they must not depend on the data.
    """

    __slots__ = ("docs", "ell", "alphabet")

    def __init__(self, docs: Iterable, ell: int | None = None,
                 alphabet: Alphabet | int | None = None):
        docs = tuple(_as_bytes(d) for d in docs)
        if not docs:
            raise InvalidInputError("database must contain at least one document")
        if any(len(d) == 0 for d in docs):
            raise InvalidInputError("documents must be non-empty")
        longest = max(len(d) for d in docs)
        if ell is None:
            ell = longest
        elif longest > ell:
            raise InvalidInputError(f"document of length {longest} exceeds ell={ell}")
        top = max(max(d) for d in docs)
        if alphabet is None:
            alphabet = Alphabet(max(2, top + 1))
        elif isinstance(alphabet, int):
            alphabet = Alphabet(alphabet)
        if top >= alphabet.size:
            raise InvalidInputError(
                f"symbol {top} outside alphabet of size {alphabet.size}")
        object.__setattr__(self, "docs", docs)
        object.__setattr__(self, "ell", int(ell))
        object.__setattr__(self, "alphabet", alphabet)

    @property
    def n(self) -> int:
        return len(self.docs)

    @property
    def sigma(self) -> int:
        return self.alphabet.size

    def __len__(self):
        return len(self.docs)

    def __repr__(self):
        return f"Database(n={self.n}, ell={self.ell}, sigma={self.sigma})"

    def __setattr__(self, name, value):
        raise AttributeError("Database is immutable")

    def __iter__(self):
        return iter(self.docs)

    def __eq__(self, other):
        if not isinstance(other, Database):
            return NotImplemented
        return (Counter(self.docs) == Counter(other.docs) and self.ell == other.ell
                and self.sigma == other.sigma)

    def __hash__(self):
        return hash((tuple(sorted(self.docs)), self.ell, self.sigma))

    def replace(self, position: int, replacement) -> "Database":
        """Neighbouring database with document ``position`` replaced."""
        return enumerate_neighbors(self, replacement, position)


def enumerate_neighbors(db: Database, replacement, position: int) -> Database:
    if not 0 <= position < db.n:
        raise InvalidInputError(f"position {position} out of range for n={db.n}")
    r = check_symbols(replacement, db.sigma)
    if not 1 <= len(r) <= db.ell:
        raise InvalidInputError(f"replacement length must be in [1, {db.ell}]")
    docs = list(db.docs)
    docs[position] = r
    return Database(docs, ell=db.ell, alphabet=db.alphabet)


def encode_texts(texts: Sequence[str], alphabet_size: int | None = None,
                 ell: int | None = None) -> Database:
    """Map characters to dense codes, in sorted character order."""
    symbols = sorted(set().union(*map(set, texts))) if texts else []
    size = max(2, len(symbols)) if alphabet_size is None else alphabet_size
    if len(symbols) > size:
        raise InvalidInputError(
            f"corpus uses {len(symbols)} symbols but alphabet is pinned to {size}")
    alpha = Alphabet(size, tuple(symbols))
    return Database([alpha.encode(t) for t in texts], ell=ell, alphabet=alpha)


def read_corpus(path, alphabet_size: int | None = None, ell: int | None = None) -> Database:
    """Read a corpus file: one document per line, optional ``#alphabet=<int>`` header.

    Lines longer than ``ell`` are rejected, never truncated.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if lines and lines[0].startswith("#alphabet="):
        header = lines.pop(0)
        try:
            pinned = int(header.split("=", 1)[1])
        except ValueError:
            raise InvalidInputError(f"bad alphabet header {header!r}") from None
        if alphabet_size is None:
            alphabet_size = pinned
    docs = [ln for ln in lines if ln != ""]
    if ell is not None:
        for i, d in enumerate(docs):
            if len(d) > ell:
                raise InvalidInputError(f"line {i + 1}: length {len(d)} exceeds ell={ell}")
    return encode_texts(docs, alphabet_size=alphabet_size, ell=ell)


# ---------------------------------------------------------------------------
# suffix index

def _suffix_array(text: np.ndarray) -> np.ndarray:
    """Prefix-doubling suffix array; all suffixes must be distinct (unique sentinels)."""
    n = len(text)
    rank = text.astype(np.int64)
    k = 1
    sa = np.argsort(rank, kind="stable")
    while True:
        second = np.full(n, -1, dtype=np.int64)
        second[:n - k] = rank[k:]
        sa = np.lexsort((second, rank))
        r, s = rank[sa], second[sa]
        new = np.empty(n, dtype=np.int64)
        new[sa] = np.concatenate(([0], np.cumsum((r[1:] != r[:-1]) | (s[1:] != s[:-1]))))
        rank = new
        if rank.max() == n - 1:
            return sa
        k *= 2


def _lcp_kasai(text: Sequence[int], sa: np.ndarray) -> np.ndarray:
    n = len(text)
    rank = np.empty(n, dtype=np.int64)
    rank[sa] = np.arange(n)
    lcp = np.zeros(n, dtype=np.int64)  # lcp[i] = LCP(sa[i-1], sa[i])
    sa_l = sa.tolist()
    rank_l = rank.tolist()
    h = 0
    for i in range(n):
        r = rank_l[i]
        if r > 0:
            j = sa_l[r - 1]
            while i + h < n and j + h < n and text[i + h] == text[j + h]:
                h += 1
            lcp[r] = h
            if h:
                h -= 1
        else:
            h = 0
    return lcp


class SuffixIndex:
    """Exact index over ``S_1 #_1 S_2 #_2 ... S_n #_n``.

    Separators ``#_i`` get code ``sigma + i`` so they are unique, lie outside
    the alphabet and stop every common extension at document borders.
    """

    def __init__(self, db: Database):
        self.db = db
        codes: list[int] = []
        doc_of: list[int] = []
        rem: list[int] = []
        starts: list[int] = []
        for i, s in enumerate(db.docs):
            starts.append(len(codes))
            codes.extend(s)
            codes.append(db.sigma + i)
            doc_of.extend([i] * (len(s) + 1))
            rem.extend(range(len(s), -1, -1))
        self.doc_starts = tuple(starts)
        self._codes = codes
        # sentinel codes can exceed 255; chr() keeps slices comparable
        self._text = "".join(map(chr, codes))
        arr = np.asarray(codes, dtype=np.int64)
        self.sa = _suffix_array(arr)
        self.lcp = _lcp_kasai(codes, self.sa)
        self.rank = np.empty(len(codes), dtype=np.int64)
        self.rank[self.sa] = np.arange(len(codes))
        self.doc_of = np.asarray(doc_of, dtype=np.int64)
        self.rem = np.asarray(rem, dtype=np.int64)
        self._sa_list = self.sa.tolist()
        self._sparse = self._build_sparse(self.lcp)
        self._by_length: dict[tuple[int, int], dict[bytes, tuple[int, int]]] = {}

    @staticmethod
    def _build_sparse(a: np.ndarray) -> list[np.ndarray]:
        table = [a]
        j = 1
        while (1 << j) <= len(a):
            prev = table[-1]
            half = 1 << (j - 1)
            table.append(np.minimum(prev[:-half], prev[half:]))
            j += 1
        return table

    def _range_min(self, lo: int, hi: int) -> int:
        """min(lcp[lo..hi]) inclusive."""
        j = (hi - lo + 1).bit_length() - 1
        t = self._sparse[j]
        return int(min(t[lo], t[hi - (1 << j) + 1]))

    def __len__(self):
        return len(self._codes)

    # -- exact counting ----------------------------------------------------

    def sa_range(self, pattern) -> tuple[int, int]:
        """Half-open SA interval of suffixes starting with ``pattern``."""
        p = check_symbols(pattern, self.db.sigma).decode("latin-1")
        m = len(p)
        text, sa = self._text, self._sa_list
        key = lambda i: text[i:i + m]  # noqa: E731
        lo = bisect.bisect_left(sa, p, key=key)
        hi = bisect.bisect_right(sa, p, lo=lo, key=key)
        return lo, hi

    def count(self, pattern, cap: int | None = None) -> int:
        """``count_cap(pattern, D)``; empty pattern counts every symbol."""
        cap = self.db.ell if cap is None else cap
        if cap < 1:
            raise ValueError(f"cap must be >= 1, got {cap}")
        p = check_symbols(pattern, self.db.sigma)
        if not p:
            return sum(min(cap, len(s)) for s in self.db.docs)
        if len(p) > self.db.ell:
            return 0
        lo, hi = self.sa_range(p)
        if hi - lo <= cap:
            return hi - lo
        per_doc = np.bincount(self.doc_of[self.sa[lo:hi]], minlength=self.db.n)
        return int(np.minimum(per_doc, cap).sum())

    def locate(self, pattern) -> int | None:
        """Leftmost text position of an occurrence, or ``None``."""
        lo, hi = self.sa_range(pattern)
        if lo == hi:
            return None
        return int(self.sa[lo:hi].min())

    def position(self, pos: int) -> tuple[int, int]:
        """Map a text position to ``(document index, offset)``."""
        d = int(self.doc_of[pos])
        return d, pos - self.doc_starts[d]

    def substring(self, pos: int, length: int) -> bytes:
        if length > self.rem[pos]:
            raise InvalidInputError("substring crosses a document boundary")
        return bytes(self._codes[pos:pos + length])

    # -- queries used by candidate construction ---------------------------

    def concat(self, left: tuple[int, int], right: tuple[int, int]) -> int | None:
        """Substring concatenation query.

        ``left`` and ``right`` are ``(position, length)`` pairs naming indexed
        substrings. Returns a witness position of their concatenation or
        ``None`` when it does not occur.
        """
        a = self.substring(*left)
        b = self.substring(*right)
        return self.locate(a + b)

    def lce(self, i: int, j: int) -> int:
        """Longest common extension of the suffixes at text positions ``i, j``."""
        if i == j:
            return int(self.rem[i])
        ri, rj = sorted((int(self.rank[i]), int(self.rank[j])))
        return self._range_min(ri + 1, rj)

    def substrings_of_length(self, m: int, cap: int | None = None,
                             with_witness: bool = False) -> dict:
        """Every distinct length-``m`` substring with its capped count.

        Suffixes sharing an ``m``-prefix are contiguous in the suffix array,
        so groups are split wherever the running LCP drops below ``m``. With
        ``with_witness`` the values are ``(count, leftmost position)``.
        """
        cap = self.db.ell if cap is None else cap
        key = (m, cap)
        groups = self._by_length.get(key)
        if groups is None:
            groups = self._groups(m, cap)
            self._by_length[key] = groups
        if with_witness:
            return dict(groups)
        return {p: c for p, (c, _) in groups.items()}

    def _groups(self, m: int, cap: int) -> dict[bytes, tuple[int, int]]:
        out: dict[bytes, tuple[int, int]] = {}
        if m < 1 or m > self.db.ell:
            return out
        sa, lcp, rem, doc_of = self._sa_list, self.lcp.tolist(), self.rem.tolist(), self.doc_of.tolist()
        run_min = 0
        members: list[int] = []

        def flush():
            if not members:
                return
            per_doc = Counter(doc_of[p] for p in members)
            c = sum(min(cap, v) for v in per_doc.values())
            first = min(members)
            out[bytes(self._codes[first:first + m])] = (c, first)

        for r, pos in enumerate(sa):
            if r > 0:
                run_min = min(run_min, lcp[r])
            if rem[pos] < m:
                continue
            if members and run_min < m:
                flush()
                members = []
            members.append(pos)
            run_min = 1 << 62
        flush()
        return out


def build_index(db: Database) -> SuffixIndex:
    return SuffixIndex(db)
