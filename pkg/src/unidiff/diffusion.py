"""Products of random unitaries U = prod_k exp(i eps H_k) with eps^2 = t / M."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .ensembles import EnsembleSpec, sample_hermitian, stream

__all__ = [
    "UnitarityError",
    "EigensolveError",
    "DiffusionRun",
    "EigenphaseSample",
    "SampleBatch",
    "unitary_factor",
    "unitarity_defect",
    "reunitarize",
    "eigenphases",
    "step",
    "run_to_checkpoints",
    "simulate",
    "default_threads",
]

log = logging.getLogger(__name__)

UNITARY_TOL = 1e-8
EIG_MODULUS_TOL = 1e-6
CORRUPTION_TOL = 1e-3


class UnitarityError(RuntimeError):
    """Accumulated matrix drifted too far from the unitary group to repair."""


class EigensolveError(RuntimeError):
    pass


def default_threads() -> int:
    return int(os.environ.get("UNIDIFF_THREADS", "1"))


def unitarity_defect(u: np.ndarray) -> float:
    """max_ij |(U^dagger U - I)_ij|"""
    g = u.conj().T @ u
    g[np.diag_indices_from(g)] -= 1.0
    return float(np.max(np.abs(g)))


def reunitarize(u: np.ndarray) -> np.ndarray:
    """Nearest unitary matrix (polar factor) to a slightly drifted ``u``."""
    defect = unitarity_defect(u)
    if not defect < CORRUPTION_TOL:
        raise UnitarityError(f"|U^+U - I|_max = {defect:.3e} exceeds {CORRUPTION_TOL}")
    try:
        w, _, vh = linalg.svd(u, check_finite=False)
    except linalg.LinAlgError:
        # divide and conquer occasionally fails to converge; QR iteration is slower but robust
        try:
            w, _, vh = linalg.svd(u, check_finite=False, lapack_driver="gesvd")
        except linalg.LinAlgError as exc:
            raise UnitarityError("polar factor: SVD did not converge") from exc
    return w @ vh


def unitary_factor(h: np.ndarray, eps: float) -> np.ndarray:
    """exp(i eps h) for Hermitian h, via h = V diag(lam) V^dagger."""
    lam, v = _eigh(h)
    return (v * np.exp(1j * eps * lam)) @ v.conj().T


def _eigh(h):
    try:
        return linalg.eigh(h, driver="evr", check_finite=False)
    except linalg.LinAlgError as exc:
        raise EigensolveError("Hermitian eigendecomposition failed; is h Hermitian?") from exc


def eigenphases(u: np.ndarray) -> np.ndarray:
    """Sorted eigenphases in (-pi, pi] from a general complex eigensolve."""
    try:
        lam = linalg.eigvals(u, check_finite=False)
    except linalg.LinAlgError as exc:
        raise EigensolveError("eigensolver did not converge") from exc
    dev = np.max(np.abs(np.abs(lam) - 1.0))
    if not dev < EIG_MODULUS_TOL:
        raise EigensolveError(f"eigenvalue off the unit circle by {dev:.3e}")
    theta = np.angle(lam)
    theta[theta <= -np.pi] = np.pi
    return np.sort(theta)


def _steps_to(t: float, eps2: float) -> int:
    if t == 0:
        return 0
    q = t / eps2
    r = round(q)
    return int(r) if abs(q - r) < 1e-9 * max(1.0, q) else math.ceil(q)


@dataclass
class DiffusionRun:
    """One trajectory of the product together with its step schedule.

    The number of steps for the last checkpoint is
    M = max(100, ceil(m_per_unit * t_max * m2)), and eps^2 = t_max / M is
    used throughout, so eps^2 m2 <= 1 / m_per_unit.
    """

    spec: EnsembleSpec
    t_checkpoints: Sequence[float]
    m_per_unit: int = 100
    reunitarize_every: int = 100
    u_current: Optional[np.ndarray] = None
    t_elapsed: float = 0.0
    n_steps: int = 0
    eps2: float = field(init=False)

    def __post_init__(self):
        ts = [float(t) for t in self.t_checkpoints]
        if not ts:
            raise ValueError("need at least one checkpoint")
        if any(t < 0 for t in ts) or any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("checkpoints must be nonnegative and ascending")
        if self.m_per_unit < 1:
            raise ValueError("m_per_unit must be positive")
        self.t_checkpoints = tuple(ts)
        t_max = ts[-1]
        if t_max > 0:
            m_total = max(100, math.ceil(self.m_per_unit * t_max * self.spec.m2))
            self.eps2 = t_max / m_total
        else:
            self.eps2 = 0.0
        if self.u_current is None:
            self.u_current = np.eye(self.spec.n, dtype=complex)

    @property
    def eps(self) -> float:
        return math.sqrt(self.eps2)

    @property
    def step_schedule(self) -> list:
        return [_steps_to(t, self.eps2) for t in self.t_checkpoints]


@dataclass
class EigenphaseSample:
    thetas: np.ndarray
    t: float
    spec_ref: str
    sample_index: int
    n_steps: int = 0
    m2: float = math.nan

    @property
    def tau(self) -> float:
        return self.m2 * self.t

    @property
    def n(self) -> int:
        return len(self.thetas)


def step(run: DiffusionRun, h: np.ndarray) -> DiffusionRun:
    """Right-multiply the state by exp(i eps h) and advance the clock by eps^2."""
    if h.shape != run.u_current.shape:
        raise ValueError(f"h has shape {h.shape}, state is {run.u_current.shape}")
    lam, v = _eigh(h)
    uv = run.u_current @ v
    uv *= np.exp(1j * run.eps * lam)
    run.u_current = uv @ v.conj().T
    run.n_steps += 1
    run.t_elapsed = run.n_steps * run.eps2
    if run.n_steps % run.reunitarize_every == 0:
        run.u_current = reunitarize(run.u_current)
    return run


def run_to_checkpoints(run: DiffusionRun, sample_index: int = 0) -> list:
    """Advance one trajectory through every checkpoint, recording eigenphases.

    The generators are drawn from the stream keyed by (spec.seed, sample_index).
    """
    rng = stream(run.spec, sample_index)
    out = []
    for t, n_target in zip(run.t_checkpoints, run.step_schedule):
        while run.n_steps < n_target:
            step(run, sample_hermitian(run.spec, rng))
        out.append(
            EigenphaseSample(
                thetas=eigenphases(run.u_current),
                t=t,
                spec_ref=run.spec.ident,
                sample_index=sample_index,
                n_steps=run.n_steps,
                m2=run.spec.m2,
            )
        )
    return out


@dataclass
class SampleBatch:
    """Eigenphases of many independent trajectories at common checkpoints.

    ``thetas[s, c]`` holds the sorted phases of sample ``indices[s]`` at
    checkpoint ``t_checkpoints[c]``.
    """

    spec: EnsembleSpec
    t_checkpoints: tuple
    m_per_unit: int
    indices: np.ndarray
    thetas: np.ndarray
    failed: list = field(default_factory=list)

    def at(self, t: float) -> list:
        c = self.checkpoint_index(t)
        return [
            EigenphaseSample(
                self.thetas[s, c], self.t_checkpoints[c], self.spec.ident, int(i), m2=self.spec.m2
            )
            for s, i in enumerate(self.indices)
        ]

    def checkpoint_index(self, t: float) -> int:
        for c, tc in enumerate(self.t_checkpoints):
            if abs(tc - t) <= 1e-12 * max(1.0, abs(t)):
                return c
        raise KeyError(f"t = {t} is not a checkpoint of this batch")

    def phases(self, t: float) -> np.ndarray:
        return self.thetas[:, self.checkpoint_index(t), :]


def _one_trajectory(spec, checkpoints, m_per_unit, index):
    run = DiffusionRun(spec, checkpoints, m_per_unit=m_per_unit)
    try:
        samples = run_to_checkpoints(run, index)
    except (EigensolveError, UnitarityError) as exc:
        log.warning("sample %d failed: %s", index, exc)
        return index, None
    return index, np.stack([s.thetas for s in samples])


def simulate(
    spec: EnsembleSpec,
    t_checkpoints: Sequence[float],
    n_samples: int,
    m_per_unit: int = 100,
    start_index: int = 0,
    threads: Optional[int] = None,
    max_failure_fraction: float = 0.01,
) -> SampleBatch:
    """Run ``n_samples`` independent trajectories and collect their eigenphases.

    Trajectories are independent, so they are spread over ``threads`` worker
    processes; results do not depend on the worker count.
    """
    checkpoints = tuple(float(t) for t in t_checkpoints)
    threads = default_threads() if threads is None else threads
    idx = range(start_index, start_index + n_samples)
    if threads > 1:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=threads)(
            delayed(_one_trajectory)(spec, checkpoints, m_per_unit, i) for i in idx
        )
    else:
        results = [_one_trajectory(spec, checkpoints, m_per_unit, i) for i in idx]
    failed = [i for i, r in results if r is None]
    if len(failed) > max_failure_fraction * n_samples:
        raise EigensolveError(f"{len(failed)} of {n_samples} samples failed")
    good = [(i, r) for i, r in results if r is not None]
    return SampleBatch(
        spec=spec,
        t_checkpoints=checkpoints,
        m_per_unit=m_per_unit,
        indices=np.array([i for i, _ in good], dtype=np.int64),
        thetas=np.stack([r for _, r in good]),
        failed=failed,
    )
