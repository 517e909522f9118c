"""Independent oracles shared by the test modules.

The word-dictionary algebra below represents tensors as ``{word: coeff}``
and multiplies by explicit word concatenation. It shares no code with the
dense level arrays in the package.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict

import numpy as np
import pytest

from carnotsig.tensor import TruncatedTensor


def word_dict(x: TruncatedTensor) -> dict:
    out = {}
    for k in range(x.N + 1):
        for i, word in enumerate(itertools.product(range(1, x.d + 1), repeat=k)):
            c = float(x.levels[k][i])
            if c != 0.0:
                out[word] = c
    return out


def dict_to_tensor(coeffs: dict, d: int, N: int) -> TruncatedTensor:
    return TruncatedTensor.from_words({w: c for w, c in coeffs.items() if len(w) <= N}, d, N)


def dict_mul(a: dict, b: dict, N: int) -> dict:
    out = defaultdict(float)
    for wa, ca in a.items():
        for wb, cb in b.items():
            if len(wa) + len(wb) <= N:
                out[wa + wb] += ca * cb
    return dict(out)


def dict_exp(z: dict, N: int) -> dict:
    """Term-by-term series ``sum z^k / k!``."""
    out = {(): 1.0}
    power = {(): 1.0}
    for k in range(1, N + 1):
        power = dict_mul(power, z, N)
        for w, c in power.items():
            out[w] = out.get(w, 0.0) + c / math.factorial(k)
    return out


def dict_log(x: dict, N: int) -> dict:
    """Mercator series ``sum (-1)^(k+1) (x - 1)^k / k``."""
    y = {w: c for w, c in x.items() if w != ()}
    out = {}
    power = {(): 1.0}
    for k in range(1, N + 1):
        power = dict_mul(power, y, N)
        for w, c in power.items():
            out[w] = out.get(w, 0.0) + (-1) ** (k + 1) * c / k
    return out


def necklace_count(d: int, k: int) -> int:
    """Aperiodic necklaces of length ``k`` over ``d`` letters, by enumeration."""
    seen = set()
    count = 0
    for word in itertools.product(range(d), repeat=k):
        rotations = [word[i:] + word[:i] for i in range(k)]
        canon = min(rotations)
        if canon in seen:
            continue
        seen.add(canon)
        if len(set(rotations)) == k:
            count += 1
    return count


def random_tensor(rng, d: int, N: int, scalar: float | None = None) -> TruncatedTensor:
    levels = [rng.uniform(-1, 1, d**k) for k in range(N + 1)]
    if scalar is not None:
        levels[0] = np.array([scalar])
    return TruncatedTensor(d, N, tuple(levels))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def covariance_z_scores(samples: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """|empirical - exact| / stderr for every entry of a covariance matrix.

    ``samples`` has shape ``(count, m)`` and mean zero by construction, so
    the entry estimate is the mean of ``X_i X_j`` and its standard error is
    the sample deviation of that product over ``sqrt(count)``.
    """
    prods = samples[:, :, None] * samples[:, None, :]
    emp = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    return np.abs(emp - cov) / se
