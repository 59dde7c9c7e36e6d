"""Random symmetric matrix ensembles and adversarial corruptions."""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError, DegenerateCorruptionWarning, UnsupportedEnsembleError

FAMILIES = ("gaussian", "rademacher")
ADVERSARIES = ("none", "rank_one_spike", "random_replace", "zero_rowsum")


@dataclass(frozen=True)
class EnsembleSpec:
    """Symmetric matrix ensemble: iid entries on and above the diagonal.

    Entries have variance exactly 1/n (gaussian) or are +-1/sqrt(n)
    (rademacher). ``subgaussian_K`` is the dimensionless subgaussian
    constant of sqrt(n) * X_ij.
    """

    n: int
    family: str = "gaussian"
    subgaussian_K: float = 1.0

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError(f"ensemble dimension must be >= 1, got {self.n}")
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        if self.subgaussian_K <= 0:
            raise ConfigurationError("subgaussian_K must be positive")


class SymmetricMatrix:
    """Dense real symmetric matrix; the upper triangle is authoritative.

    Construction mirrors the upper triangle so symmetry holds bit-for-bit.
    """

    __slots__ = ("n", "values")

    def __init__(self, values, _trusted=False):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ConfigurationError("SymmetricMatrix needs a square array")
        self.n = values.shape[0]
        if _trusted:
            self.values = values
        else:
            out = values.copy()
            iu = np.triu_indices(self.n, k=1)
            out.T[iu] = out[iu]
            self.values = out
        self.values.flags.writeable = False

    @classmethod
    def from_upper(cls, n, upper):
        upper = np.asarray(upper, dtype=np.float64)
        if upper.shape != (n * (n + 1) // 2,):
            raise ConfigurationError("upper triangle length mismatch")
        out = np.zeros((n, n))
        iu = np.triu_indices(n)
        out[iu] = upper
        out.T[iu] = upper
        return cls(out, _trusted=True)

    def upper(self):
        return self.values[np.triu_indices(self.n)]

    def entry(self, i, j):
        return self.values[i, j]

    def is_symmetric(self):
        return bool(np.array_equal(self.values, self.values.T))

    def operator_norm(self):
        return float(np.abs(np.linalg.eigvalsh(self.values)).max())

    def __matmul__(self, other):
        return self.values @ other

    def dump(self, fh):
        """Write the ``symmat`` text format: header then upper triangle."""
        fh.write(f"symmat {self.n}\n")
        vals = self.upper()
        for start in range(0, len(vals), 8):
            fh.write(" ".join(f"{v:.17g}" for v in vals[start : start + 8]) + "\n")

    @classmethod
    def load(cls, fh):
        header = fh.readline().split()
        if len(header) != 2 or header[0] != "symmat":
            raise ConfigurationError("not a symmat stream")
        n = int(header[1])
        vals = np.array(fh.read().split(), dtype=np.float64)
        if vals.size != n * (n + 1) // 2:
            raise ConfigurationError("symmat payload length mismatch")
        return cls.from_upper(n, vals)


@dataclass(frozen=True)
class CorruptionSpec:
    epsilon: float = 0.0
    adversary: str = "none"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ConfigurationError("epsilon must lie in [0, 1]")
        if self.adversary not in ADVERSARIES:
            raise ConfigurationError(f"unknown adversary {self.adversary!r}")


@dataclass
class CorruptionRecord:
    support: np.ndarray
    corrupted: SymmetricMatrix
    entries_changed: int
    strong_contamination: bool = False
    adversary: str = "none"
    epsilon: float = 0.0


def _generator(seed, stream=0):
    """Counter-based generator keyed by (seed, stream); order-independent fill."""
    if isinstance(seed, (tuple, list)):
        parts = [int(x) & 0xFFFFFFFFFFFFFFFF for x in seed]
    else:
        parts = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    ss = np.random.SeedSequence(entropy=parts + [stream])
    return np.random.Generator(np.random.Philox(ss))


def sample_symmetric(spec, seed):
    """Draw a symmetric matrix with iid upper-triangle entries.

    Deterministic in (spec, seed); gaussian entries are N(0, 1/n) and
    rademacher entries +-1/sqrt(n), on the diagonal included.
    """
    n = spec.n
    rng = _generator(seed)
    m = n * (n + 1) // 2
    scale = 1.0 / math.sqrt(n)
    if spec.family == "gaussian":
        vals = rng.standard_normal(m) * scale
    else:
        vals = (2.0 * rng.integers(0, 2, size=m) - 1.0) * scale
    return SymmetricMatrix.from_upper(n, vals)


def corrupt_minor(X, spec):
    """Apply an adversary supported on a ceil(eps*n) x ceil(eps*n) minor."""
    if spec.adversary not in ("none", "rank_one_spike", "random_replace"):
        raise ConfigurationError(
            f"corrupt_minor does not implement adversary {spec.adversary!r}"
        )
    n = X.n
    if spec.adversary == "none" or spec.epsilon == 0.0:
        return CorruptionRecord(
            support=np.array([], dtype=np.int64),
            corrupted=X,
            entries_changed=0,
            adversary=spec.adversary,
            epsilon=spec.epsilon,
        )
    m = math.ceil(spec.epsilon * n)
    if spec.epsilon * n < 1.0:
        warnings.warn(
            "epsilon*n < 1: corruption support is empty",
            DegenerateCorruptionWarning,
        )
        return CorruptionRecord(
            support=np.array([], dtype=np.int64),
            corrupted=X,
            entries_changed=0,
            adversary=spec.adversary,
            epsilon=spec.epsilon,
        )
    rng = _generator(spec.seed, stream=1)
    S = np.sort(rng.choice(n, size=m, replace=False))
    Y = X.values.copy()
    block = np.ix_(S, S)
    if spec.adversary == "rank_one_spike":
        Y[block] += 1.0 / math.sqrt(n)
    else:  # random_replace: resample the minor from the ensemble
        rng2 = _generator(spec.seed, stream=2)
        k = m * (m + 1) // 2
        scale = 1.0 / math.sqrt(n)
        fresh = rng2.standard_normal(k) * scale
        sub = np.zeros((m, m))
        iu = np.triu_indices(m)
        sub[iu] = fresh
        sub.T[iu] = fresh
        Y[block] = sub
    changed = int(np.count_nonzero(Y[block] != X.values[block]))
    return CorruptionRecord(
        support=S,
        corrupted=SymmetricMatrix(Y, _trusted=True),
        entries_changed=changed,
        adversary=spec.adversary,
        epsilon=spec.epsilon,
    )


def zero_rowsum_contamination(X, seed=0):
    """Zero out entries so every row sum vanishes exactly (strong contamination).

    Requires a rademacher-valued matrix (entries +-1/sqrt(n)). Rows are fixed
    sequentially; mirrored zeroing can disturb earlier rows, so the pass
    repeats until every signed row sum is exactly zero (entries only ever get
    removed, so this terminates).
    """
    n = X.n
    scale = 1.0 / math.sqrt(n)
    signs = np.rint(X.values / scale).astype(np.int64)
    if not np.all(np.abs(signs) == 1) or not np.allclose(
        signs * scale, X.values, rtol=0, atol=1e-15
    ):
        raise UnsupportedEnsembleError(
            "zero_rowsum_contamination needs +-1/sqrt(n) entries"
        )
    rng = _generator(seed, stream=3)
    s = signs.copy()
    changed = 0
    for _ in range(n * n):
        if not s.sum(axis=1).any():
            break
        priority = rng.random((n, n))
        changed += int(_kernels.zero_rowsum_pass(s, priority))
    Y = SymmetricMatrix(s * scale, _trusted=True)
    return CorruptionRecord(
        support=np.arange(n, dtype=np.int64),
        corrupted=Y,
        entries_changed=changed,
        strong_contamination=True,
        adversary="zero_rowsum",
        epsilon=1.0,
    )
