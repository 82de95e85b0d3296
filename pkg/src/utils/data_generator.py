"""
Utility functions for generating sample covers and property-test inputs.
"""
from typing import List, Optional

import numpy as np

from config.config import config
from src.models.arrangements import Arrangement, DoubleCoverSpec
from src.utils.errors import DataError


def make_rng(seed: Optional[int] = None) -> np.random.Generator:
    return np.random.default_rng(config.SEED if seed is None else seed)


def random_forms(rng: np.random.Generator, dim: int, n_forms: int, bound: int = 3) -> List[List[int]]:
    """n_forms pairwise non-proportional integer forms in dim + 1 variables, entries in [-bound, bound]."""
    forms, seen = [], set()
    while len(forms) < n_forms:
        f = rng.integers(-bound, bound + 1, size=dim + 1).tolist()
        if not any(f):
            continue
        try:
            key = tuple(Arrangement([f], dim).forms[0])
        except DataError:
            continue
        if key in seen:
            continue
        seen.add(key)
        forms.append(f)
    return forms


def random_affine_cover(rng: np.random.Generator, dim: int = 2, n_forms: int = 4,
                        bound: int = 3, name: str = 'random') -> DoubleCoverSpec:
    """A small cover t^2 = twist * prod(forms) for affine and projective census tests."""
    forms = random_forms(rng, dim, n_forms, bound)
    twist = int(rng.integers(1, 6))
    return DoubleCoverSpec(Arrangement(forms, dim), twist, name=name)


def perturbed_arrangement(spec: DoubleCoverSpec, rng: np.random.Generator,
                          changes: int = 2, bound: int = 2) -> DoubleCoverSpec:
    """Add small integers to `changes` random coefficients, retrying until the forms stay distinct."""
    while True:
        forms = [list(f) for f in spec.forms]
        for _ in range(changes):
            i = int(rng.integers(len(forms)))
            j = int(rng.integers(spec.dim + 1))
            forms[i][j] += int(rng.integers(-bound, bound + 1))
        if any(not any(f) for f in forms):
            continue
        try:
            arrangement = Arrangement(forms, spec.dim)
        except DataError:
            continue
        return DoubleCoverSpec(arrangement, spec.branch_constant, spec.weights, f"{spec.name}~")


def random_square_twist(rng: np.random.Generator, bound: int = 50) -> int:
    """s^2 for a random s in [1, bound]."""
    s = int(rng.integers(1, bound + 1))
    return s * s


def random_unimodular(rng: np.random.Generator, size: int, steps: int = 12) -> np.ndarray:
    """Integer matrix with determinant +-1, built from random elementary row operations."""
    m = np.eye(size, dtype=np.int64)
    for _ in range(steps):
        i, j = rng.choice(size, size=2, replace=False)
        m[i] += int(rng.choice([-1, 1])) * m[j]
    if rng.integers(2):
        m[0] *= -1
    return m


def change_coordinates(spec: DoubleCoverSpec, matrix: np.ndarray) -> DoubleCoverSpec:
    """The cover pulled back along x -> U x: forms f become f U."""
    forms = (np.asarray(spec.forms, dtype=np.int64) @ np.asarray(matrix, dtype=np.int64)).tolist()
    return DoubleCoverSpec(Arrangement(forms, spec.dim), spec.twist * spec.arrangement.unit,
                           spec.weights, f"{spec.name}@U")


def generate_sample_covers(n: int = 10, seed: Optional[int] = None) -> List[DoubleCoverSpec]:
    """Generate sample covers of P^2 with six branch lines."""
    rng = make_rng(seed)
    covers = [random_affine_cover(rng, 2, 6, name=f"sample{i + 1}") for i in range(n)]
    print(f"Generated {n} sample covers")
    return covers
