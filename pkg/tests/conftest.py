import itertools

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def brute_apply(amps: np.ndarray, n: int, op: np.ndarray, sites) -> np.ndarray:
    """Independent index-loop application of a local operator (no reshapes or tensordot)."""
    k = len(sites)
    out = np.zeros_like(amps, dtype=complex)
    for idx in itertools.product(range(3), repeat=n):
        src = int("".join(map(str, idx)), 3)
        if amps[src] == 0:
            continue
        local_in = sum(idx[s] * 3 ** (k - 1 - i) for i, s in enumerate(sites))
        for local_out in range(3 ** k):
            coeff = op[local_out, local_in]
            if coeff == 0:
                continue
            new = list(idx)
            for i, s in enumerate(sites):
                new[s] = (local_out // 3 ** (k - 1 - i)) % 3
            out[int("".join(map(str, new)), 3)] += coeff * amps[src]
    return out


def brute_leak(amps: np.ndarray, n: int) -> float:
    total = 0.0
    for idx in itertools.product(range(3), repeat=n):
        if 2 in idx:
            total += abs(amps[int("".join(map(str, idx)), 3)]) ** 2
    return total


def random_density(n: int, rng, rank: int = 3, logical: bool = False) -> np.ndarray:
    """Random density matrix on 3**n levels, optionally supported on {0,1}^n only."""
    d = 3 ** n
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    if logical:
        keep = np.array([all(c in "01" for c in np.base_repr(i, 3).zfill(n)) for i in range(d)])
        g[~keep] = 0
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
