import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from alphapc.instance import Instance, random_instance

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"


def matrix_instance(entries, n, p, alpha, name):
    """Symmetric instance from {(i, j): d} with 1-based indices; missing pairs
    default to the value under key None."""
    D = np.full((n, n), float(entries.get(None, 0.0)))
    np.fill_diagonal(D, 0.0)
    for key, d in entries.items():
        if key is None:
            continue
        i, j = key
        D[i - 1, j - 1] = D[j - 1, i - 1] = d
    return Instance(D, p, alpha, name)


@pytest.fixture
def ex1():
    return matrix_instance({(1, 2): 2, (1, 3): 4, (1, 4): 4, None: 42}, 4, 3, 2, "ex1")


@pytest.fixture
def ex2():
    return matrix_instance({(1, 2): 0, (1, 3): 1, (2, 3): 1}, 3, 2, 2, "ex2")


@pytest.fixture
def ex3():
    return matrix_instance({(1, 2): 1, (1, 3): 2, (2, 3): 3}, 3, 2, 2, "ex3")


def seeded_instance(seed, n_lo, n_hi):
    """Random instance with (n, p, alpha) drawn from the seed; every other seed
    sits on a small grid so distance ties occur."""
    rng = np.random.default_rng(10_000 + seed)
    n = int(rng.integers(n_lo, n_hi + 1))
    p = int(rng.integers(1, n))
    alpha = int(rng.integers(1, p + 1))
    grid = 6 if seed % 2 else None
    return random_instance(n, p, alpha, seed, grid=grid)


@st.composite
def instances(draw, n_min=3, n_max=8):
    n = draw(st.integers(n_min, n_max))
    p = draw(st.integers(1, n - 1))
    alpha = draw(st.integers(1, p))
    seed = draw(st.integers(0, 2**31 - 1))
    grid = draw(st.sampled_from([None, 4, 50]))
    return random_instance(n, p, alpha, seed, grid=grid)


def pmed_path(k):
    """Location of pmed<k>.txt: $ALPHAPC_PMED_DIR, then data/pmed."""
    for d in (os.environ.get("ALPHAPC_PMED_DIR"), DATA / "pmed"):
        if d and (Path(d) / f"pmed{k}.txt").is_file():
            return Path(d) / f"pmed{k}.txt"
    return None


ACCEPTANCE = {}  # criterion number -> (passed, text)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {text}")
