"""Random Hermitian generators with zero mean and prescribed second moment.

Each family fixes an entry-level distribution with E|H_ij|^2 = m2 / N for
every (i, j), so that E[(1/N) tr H^2] = m2 exactly and E[(1/N) tr H] = 0.
Off-diagonal entries are (x + i y) / sqrt(2) * sqrt(m2 / N) with x, y i.i.d.
of unit variance; diagonal entries are real with variance m2 / N.

=============== ===================================================
family          x, y (and the scaled diagonal) drawn from
=============== ===================================================
gaussian        standard normal (the GUE)
sign            uniform on {-1, +1}
uniform         uniform on [-sqrt(3), sqrt(3)]
=============== ===================================================
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Family",
    "EnsembleSpec",
    "stream",
    "sample_hermitian",
    "estimate_moments_of_H",
]


class Family(str, Enum):
    GAUSSIAN = "gaussian"
    SIGN = "sign"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class EnsembleSpec:
    family: Family
    n: int
    m2: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n}")
        if not self.m2 > 0 or not np.isfinite(self.m2):
            raise ValueError(f"m2 must be positive and finite, got {self.m2}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m2", float(self.m2))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def ident(self) -> str:
        return f"{self.family.value}-n{self.n}-m2_{self.m2:g}-seed{self.seed}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["family"] = self.family.value
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "EnsembleSpec":
        return cls(family=d["family"], n=d["n"], m2=d["m2"], seed=d.get("seed", 0))

    @classmethod
    def from_json(cls, s: str) -> "EnsembleSpec":
        return cls.from_dict(json.loads(s))


def stream(spec: EnsembleSpec, index: int) -> np.random.Generator:
    """Independent random stream for sample ``index`` of ``spec``.

    Streams are keyed by (seed, index) through ``SeedSequence`` spawn keys, so
    any subset of samples can be regenerated in any order or in parallel.
    """
    ss = np.random.SeedSequence(entropy=spec.seed, spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


def _unit_variance(family: Family, rng: np.random.Generator, size) -> np.ndarray:
    if family is Family.GAUSSIAN:
        return rng.standard_normal(size)
    if family is Family.SIGN:
        return 2.0 * rng.integers(0, 2, size=size) - 1.0
    if family is Family.UNIFORM:
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=size)
    raise ValueError(family)


def sample_hermitian(spec: EnsembleSpec, rng: np.random.Generator) -> np.ndarray:
    """One N x N Hermitian matrix; exactly Hermitian by construction."""
    n = spec.n
    scale = np.sqrt(spec.m2 / n)
    x = _unit_variance(spec.family, rng, (n, n))
    y = _unit_variance(spec.family, rng, (n, n))
    d = _unit_variance(spec.family, rng, n)
    upper = np.triu((x + 1j * y) * (scale / np.sqrt(2.0)), k=1)
    h = upper + upper.conj().T
    h[np.diag_indices(n)] = scale * d
    return h


def estimate_moments_of_H(spec: EnsembleSpec, n_samples: int, start_index: int = 0):
    """Sample means of (1/N) tr H and (1/N) tr H^2 with standard errors.

    Returns ``(m1_hat, m2_hat, (stderr_m1, stderr_m2))``.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    tr1 = np.empty(n_samples)
    tr2 = np.empty(n_samples)
    for s in range(n_samples):
        h = sample_hermitian(spec, stream(spec, start_index + s))
        tr1[s] = np.trace(h).real / spec.n
        tr2[s] = np.sum(np.abs(h) ** 2) / spec.n
    se = np.sqrt(n_samples)
    return (
        float(tr1.mean()),
        float(tr2.mean()),
        (float(tr1.std(ddof=1) / se), float(tr2.std(ddof=1) / se)),
    )
