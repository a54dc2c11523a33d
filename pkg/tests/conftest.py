import random

import pytest
from hypothesis import strategies as st

from dpsubstr.corpus import Database

# criterion number -> (passed, detail), filled in by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def random_db(rng: random.Random, n_max=8, ell_max=12, sigma=2, n_min=1, ell=None):
    ell = ell or rng.randint(1, ell_max)
    n = rng.randint(n_min, n_max)
    docs = [bytes(rng.randrange(sigma) for _ in range(rng.randint(1, ell))) for _ in range(n)]
    return Database(docs, ell=ell, alphabet=sigma)


@st.composite
def databases(draw, n_max=5, ell_max=8, sigma_choices=(2, 3)):
    sigma = draw(st.sampled_from(sigma_choices))
    ell = draw(st.integers(1, ell_max))
    doc = st.binary(min_size=1, max_size=ell).map(lambda b: bytes(x % sigma for x in b))
    docs = draw(st.lists(doc, min_size=1, max_size=n_max))
    return Database(docs, ell=ell, alphabet=sigma)


@pytest.fixture
def toy_db():
    return Database([b"\x00\x01\x00\x01", b"\x01\x00", b"\x00\x00\x01"], ell=4, alphabet=2)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
