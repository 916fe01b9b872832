"""Split observation model: a block of measurements with trusted
correspondences stacked on a block whose rows were shuffled by a sparse
permutation, plus i.i.d. Gaussian noise.

Conventions
-----------
A permutation with mapping pi acts on a vector as (P a)[i] = a[pi[i]], so
the shuffled block satisfies y2 = (A2 x0)[pi] + eps2 and the permutation
error vector is z0 = (A2 x0)[pi] - A2 x0, which is zero off the displaced
index set and bounded entrywise by 2*max|A x0|.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid, DimensionMismatch, InvalidSparsity
from .linalg import as_matrix, as_vector, gaussian_matrix


@dataclass(frozen=True)
class SparsePermutation:
    """Permutation of {0..size-1} displacing a small set of indices."""

    size: int
    mapping: np.ndarray
    support: np.ndarray = field(init=False)

    def __post_init__(self):
        mapping = np.asarray(self.mapping, dtype=np.int64)
        if mapping.shape != (self.size,):
            raise DimensionMismatch(
                f"mapping has shape {mapping.shape}, expected ({self.size},)"
            )
        if not np.array_equal(np.sort(mapping), np.arange(self.size)):
            raise ValueError("mapping is not a bijection on {0..size-1}")
        support = np.flatnonzero(mapping != np.arange(self.size))
        mapping = mapping.copy()
        mapping.setflags(write=False)
        support.setflags(write=False)
        object.__setattr__(self, "mapping", mapping)
        object.__setattr__(self, "support", support)

    @property
    def n_displaced(self) -> int:
        return int(self.support.size)

    def apply(self, v) -> np.ndarray:
        """Permuted copy of v: out[i] = v[mapping[i]]."""
        v = np.asarray(v)
        if v.shape[0] != self.size:
            raise DimensionMismatch(f"vector length {v.shape[0]} != size {self.size}")
        return v[self.mapping]

    def inverse(self) -> "SparsePermutation":
        inv = np.empty(self.size, dtype=np.int64)
        inv[self.mapping] = np.arange(self.size)
        return SparsePermutation(self.size, inv)

    @staticmethod
    def identity(size: int) -> "SparsePermutation":
        return SparsePermutation(size, np.arange(size))


def _check_sparsity(p: int, k: int):
    if k < 0 or k > p:
        raise InvalidSparsity(f"sparsity k={k} outside [0, {p}]")
    if k == 1:
        raise InvalidSparsity("k=1 is impossible: a permutation cannot displace exactly one index")


def sample_sparse_permutation(
    p: int, k: int, rng: np.random.Generator, exact: bool = True
) -> SparsePermutation:
    """Random permutation of {0..p-1} displacing k indices.

    The displaced set is a uniform k-subset, shuffled by a uniform
    derangement (rejection sampled, expected < e attempts).  With
    exact=False the displacement count is drawn uniformly from
    {0, 2, 3, ..., k} first, matching an "at most k" reading.
    """
    _check_sparsity(p, k)
    if not exact and k >= 2:
        k = int(rng.choice([0] + list(range(2, k + 1))))
    if k == 0:
        return SparsePermutation.identity(p)
    subset = np.sort(rng.choice(p, size=k, replace=False))
    while True:
        shuffled = rng.permutation(k)
        if not np.any(shuffled == np.arange(k)):
            break
    mapping = np.arange(p)
    mapping[subset] = subset[shuffled]
    return SparsePermutation(p, mapping)


def permutation_error_vector(perm: SparsePermutation, a2, x0) -> np.ndarray:
    """Difference between the shuffled and unshuffled noiseless block."""
    a2 = as_matrix(a2, "a2")
    x0 = as_vector(x0, "x0")
    if a2.shape[0] != perm.size:
        raise DimensionMismatch(f"a2 has {a2.shape[0]} rows, permutation size {perm.size}")
    if a2.shape[1] != x0.shape[0]:
        raise DimensionMismatch(f"a2 has {a2.shape[1]} cols, x0 length {x0.shape[0]}")
    ax = a2 @ x0
    return perm.apply(ax) - ax


def noise_sigma_from_percent(noise_percent: float, a, x0) -> float:
    """Noise standard deviation as a percentage of the mean absolute
    noiseless measurement, averaged over all rows of `a`."""
    if noise_percent < 0:
        raise ValueError(f"noise percentage must be nonnegative, got {noise_percent}")
    a = as_matrix(a, "a")
    x0 = as_vector(x0, "x0")
    return float(noise_percent / 100.0 * np.mean(np.abs(a @ x0)))


@dataclass(frozen=True)
class ProblemConfig:
    """Shape, sparsity, and noise parameters of one problem family.

    Exactly one of noise_percent / sigma must be given.  The trusted block
    must be strictly smaller than the ambient dimension (m < d) and the
    shuffled block strictly larger (p > d).
    """

    d: int
    m: int
    p: int
    k: int
    seed: int = 0
    noise_percent: float | None = None
    sigma: float | None = None

    def __post_init__(self):
        if self.d < 1:
            raise ConfigInvalid(f"d must be positive, got {self.d}")
        if self.m < 0:
            raise ConfigInvalid(f"m must be nonnegative, got {self.m}")
        if self.m >= self.d:
            raise ConfigInvalid(f"need m < d (trusted rows alone must not suffice), got m={self.m}, d={self.d}")
        if self.p <= self.d:
            raise ConfigInvalid(f"need p > d, got p={self.p}, d={self.d}")
        _check_sparsity(self.p, self.k)
        if (self.noise_percent is None) == (self.sigma is None):
            raise ConfigInvalid("exactly one of noise_percent / sigma must be set")
        if self.noise_percent is not None and self.noise_percent < 0:
            raise ConfigInvalid(f"noise_percent must be nonnegative, got {self.noise_percent}")
        if self.sigma is not None and self.sigma < 0:
            raise ConfigInvalid(f"sigma must be nonnegative, got {self.sigma}")

    @property
    def n(self) -> int:
        return self.m + self.p


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ProblemInstance:
    """One realization of the split observation model.

    Invariants maintained by construction:
      y1 = a1 @ x0 + eps1
      y2 = perm(a2 @ x0) + eps2 = a2 @ x0 + z0 + eps2
    """

    a1: np.ndarray
    a2: np.ndarray
    x0: np.ndarray
    perm: SparsePermutation
    sigma: float
    y1: np.ndarray
    y2: np.ndarray
    z0: np.ndarray
    eps1: np.ndarray
    eps2: np.ndarray
    seed: int | None = None

    @property
    def d(self) -> int:
        return self.a2.shape[1]

    @property
    def m(self) -> int:
        return self.a1.shape[0]

    @property
    def p(self) -> int:
        return self.a2.shape[0]

    @property
    def k(self) -> int:
        return self.perm.n_displaced

    @property
    def a(self) -> np.ndarray:
        return np.vstack([self.a1, self.a2])

    @property
    def y(self) -> np.ndarray:
        return np.concatenate([self.y1, self.y2])

    def to_json(self) -> str:
        doc = {
            "d": self.d,
            "m": self.m,
            "p": self.p,
            "k": self.k,
            "sigma": self.sigma,
            "seed": self.seed,
            "a1": self.a1.tolist(),
            "a2": self.a2.tolist(),
            "x0": self.x0.tolist(),
            "mapping": self.perm.mapping.tolist(),
            "y1": self.y1.tolist(),
            "y2": self.y2.tolist(),
        }
        return json.dumps(doc)

    @staticmethod
    def from_json(text: str) -> "ProblemInstance":
        doc = json.loads(text)
        a1 = np.asarray(doc["a1"], dtype=np.float64).reshape(doc["m"], doc["d"])
        a2 = np.asarray(doc["a2"], dtype=np.float64).reshape(doc["p"], doc["d"])
        x0 = np.asarray(doc["x0"], dtype=np.float64)
        perm = SparsePermutation(doc["p"], np.asarray(doc["mapping"], dtype=np.int64))
        y1 = np.asarray(doc["y1"], dtype=np.float64)
        y2 = np.asarray(doc["y2"], dtype=np.float64)
        ax2 = a2 @ x0
        z0 = perm.apply(ax2) - ax2
        return ProblemInstance(
            a1=_frozen(a1), a2=_frozen(a2), x0=_frozen(x0), perm=perm,
            sigma=float(doc["sigma"]), y1=_frozen(y1), y2=_frozen(y2),
            z0=_frozen(z0), eps1=_frozen(y1 - a1 @ x0), eps2=_frozen(y2 - perm.apply(ax2)),
            seed=doc.get("seed"),
        )


def assemble_instance(
    a1, a2, x0, perm: SparsePermutation, sigma: float,
    rng: np.random.Generator, seed: int | None = None,
) -> ProblemInstance:
    """Build an instance from fixed (a1, a2, x0, perm) and fresh noise."""
    a1 = as_matrix(a1, "a1") if np.size(a1) else np.zeros((0, as_matrix(a2).shape[1]))
    a2 = as_matrix(a2, "a2")
    x0 = as_vector(x0, "x0")
    m, p = a1.shape[0], a2.shape[0]
    if perm.size != p:
        raise DimensionMismatch(f"permutation size {perm.size} != p={p}")
    ax2 = a2 @ x0
    z0 = perm.apply(ax2) - ax2
    eps = rng.standard_normal(m + p) * sigma
    eps1, eps2 = eps[:m], eps[m:]
    y1 = a1 @ x0 + eps1
    y2 = perm.apply(ax2) + eps2
    return ProblemInstance(
        a1=_frozen(a1), a2=_frozen(a2), x0=_frozen(x0), perm=perm,
        sigma=float(sigma), y1=_frozen(y1), y2=_frozen(y2), z0=_frozen(z0),
        eps1=_frozen(eps1), eps2=_frozen(eps2), seed=seed,
    )


def generate_instance(
    config: ProblemConfig, rng: np.random.Generator | None = None, x0=None
) -> ProblemInstance:
    """Sample a full instance from a config.

    Draw order (fixed for reproducibility): sensing matrix, then x0 when
    not supplied, then the permutation, then the noise vector.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    a = gaussian_matrix(config.n, config.d, rng)
    if x0 is None:
        x0 = rng.standard_normal(config.d)
    else:
        x0 = as_vector(x0, "x0")
        if x0.shape[0] != config.d:
            raise DimensionMismatch(f"x0 length {x0.shape[0]} != d={config.d}")
    perm = sample_sparse_permutation(config.p, config.k, rng)
    if config.sigma is not None:
        sigma = config.sigma
    else:
        sigma = noise_sigma_from_percent(config.noise_percent, a, x0)
    return assemble_instance(
        a[: config.m], a[config.m :], x0, perm, sigma, rng, seed=config.seed
    )
