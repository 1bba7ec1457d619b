"""
Synthetic regression benchmarks: Correlated, Friedman, Max, Sparse and Steps.

All draws come from ``numpy.random.default_rng(seed)`` (PCG64 bit generator,
ziggurat normals), so a spec reproduces the same table on every platform.
"""
import re
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.linalg import cholesky

from src.data.dataset import Column, Dataset

CORRELATED_COVARIANCE = np.array(
    [
        [1.0, -0.3, 0.5, 0.2],
        [-0.3, 1.0, 0.6, 0.5],
        [0.5, 0.6, 1.0, 0.8],
        [0.2, 0.5, 0.8, 1.0],
    ]
)
SPARSE_COEFFICIENTS = np.concatenate([[10.0, 20.0, 30.0, 40.0, 50.0], np.zeros(45)])


class Family(str, Enum):
    CORRELATED = "Correlated"
    FRIEDMAN = "Friedman"
    MAX = "Max"
    SPARSE = "Sparse"
    STEPS = "Steps"


# (signal columns, noise columns)
FAMILY_WIDTHS = {
    Family.CORRELATED: (4, 4),
    Family.FRIEDMAN: (5, 5),
    Family.MAX: (2, 2),
    Family.SPARSE: (50, 0),
    Family.STEPS: (2, 2),
}


class SyntheticSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: Family
    n: int = Field(ge=1)
    noise_sd: float = Field(gt=0)
    seed: int = 123
    missing_rate: float = Field(default=0.0, ge=0.0, lt=1.0)

    @field_validator("family", mode="before")
    @classmethod
    def _normalize_family(cls, value):
        if isinstance(value, str):
            for family in Family:
                if family.value.lower() == value.strip().lower():
                    return family
        return value


def family_response(family: Family, X: np.ndarray) -> np.ndarray:
    """Noise-free response of a family at covariate matrix X (columns x1..xp)."""
    family = Family(family)
    x = [X[:, j] for j in range(min(X.shape[1], 5))]
    if family is Family.CORRELATED:
        return x[0] * x[1] ** 2 + x[1] * np.exp(x[2]) - x[2] * x[3] ** 3 + np.floor(x[0]) * np.cos(x[3])
    if family is Family.FRIEDMAN:
        return 10 * np.sin(np.pi * x[0] * x[1]) + 20 * (x[2] - 0.5) ** 2 + 10 * x[3] + 5 * x[4]
    if family is Family.MAX:
        return 5 * np.maximum(1 + x[0] + x[1], 0)
    if family is Family.SPARSE:
        return X[:, : len(SPARSE_COEFFICIENTS)] @ SPARSE_COEFFICIENTS
    return 10 * np.ceil((x[0] + x[1]) / 2)


def _covariates(family: Family, n: int, rng: np.random.Generator) -> np.ndarray:
    signal, noise = FAMILY_WIDTHS[family]
    if family is Family.CORRELATED:
        factor = cholesky(CORRELATED_COVARIANCE, lower=True)
        correlated = rng.standard_normal((n, signal)) @ factor.T
        return np.hstack([correlated, rng.standard_normal((n, noise))])
    if family is Family.FRIEDMAN:
        return rng.uniform(0.0, 1.0, size=(n, signal + noise))
    return rng.standard_normal((n, signal + noise))


def generate_synthetic(spec: SyntheticSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    X = _covariates(spec.family, spec.n, rng)
    y = family_response(spec.family, X) + rng.normal(0.0, spec.noise_sd, size=spec.n)
    missing = np.zeros(X.shape, dtype=bool)
    if spec.missing_rate > 0:
        missing = rng.random(X.shape) < spec.missing_rate
    names = tuple(f"x{j + 1}" for j in range(X.shape[1]))
    columns = tuple(Column.numeric(X[:, j], missing[:, j]) for j in range(X.shape[1]))
    return Dataset(names, columns, y, "y")


_VARIANT = re.compile(r"^(correlated|friedman|max|sparse|steps)(2)?(n)?(2)?$", re.IGNORECASE)


def synthetic_variant(name: str, seed: int = 123) -> SyntheticSpec:
    """
    Spec for a named benchmark variant, e.g. ``Max``, ``Max2``, ``MaxN``, ``Max2N`` or ``MaxN2``.

    Suffix ``2`` selects the larger sample, ``N`` the larger noise level.
    """
    match = _VARIANT.match(name.strip())
    if match is None or (match.group(2) and match.group(4)):
        raise ValueError(f"Unknown synthetic variant: {name}")
    family = SyntheticSpec.model_validate({"family": match.group(1), "n": 1, "noise_sd": 1}).family
    large, noisy = bool(match.group(2) or match.group(4)), bool(match.group(3))
    if family is Family.SPARSE:
        n, noise_sd = (2000 if large else 200), (50.0 if noisy else 5.0)
    else:
        n, noise_sd = (5000 if large else 500), (5.0 if noisy else 1.0)
    return SyntheticSpec(family=family, n=n, noise_sd=noise_sd, seed=seed)
