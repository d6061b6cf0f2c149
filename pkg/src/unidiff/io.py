"""CSV / JSON output with provenance headers, and an on-disk batch cache."""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import os
import platform
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .diffusion import SampleBatch, simulate
from .ensembles import EnsembleSpec

__all__ = [
    "provenance",
    "write_csv",
    "read_csv",
    "write_json",
    "write_eigenphases_csv",
    "write_manifest",
    "batch_key",
    "cached_simulate",
    "save_batch",
    "load_batch",
]

# Bump when anything changes the realized trajectories for a given seed.
SIMULATION_VERSION = 1


def provenance(**config) -> dict:
    return {
        "generator": "unidiff",
        "version": __version__,
        "simulation_version": SIMULATION_VERSION,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "config": config,
    }


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, EnsembleSpec):
        return x.to_dict()
    if hasattr(x, "value"):
        return x.value
    raise TypeError(f"not JSON serializable: {type(x)}")


def write_csv(
    path,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    header: Optional[dict] = None,
    timestamp: bool = True,
) -> Path:
    """Comma-separated, LF line endings, '#'-prefixed JSON provenance lines.

    The timestamp sits on its own first line so payload comparisons can skip it.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if timestamp:
            fh.write(f"# created {_dt.datetime.now(_dt.timezone.utc).isoformat()}\n")
        if header is not None:
            fh.write("# " + json.dumps(header, sort_keys=True, default=_jsonable) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def read_csv(path):
    """Returns ``(header_dict_or_None, columns, float array)``."""
    header = None
    lines = Path(path).read_text().splitlines()
    body = []
    for line in lines:
        if line.startswith("# {"):
            header = json.loads(line[2:])
        elif not line.startswith("#"):
            body.append(line)
    columns = body[0].split(",")
    data = np.array([[float(x) for x in ln.split(",")] for ln in body[1:]])
    return header, columns, data.reshape(-1, len(columns))


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def write_eigenphases_csv(path, batch: SampleBatch, t: float, header: Optional[dict] = None):
    """One row per eigenphase: sample_index, t, theta."""
    phases = batch.phases(t)
    rows = (
        (int(i), float(t), float(th))
        for i, row in zip(batch.indices, phases)
        for th in row
    )
    return write_csv(path, ["sample_index", "t", "theta"], rows, header)


def write_manifest(path, batch: SampleBatch, **extra) -> Path:
    payload = provenance(
        spec=batch.spec.to_dict(),
        m_per_unit=batch.m_per_unit,
        checkpoints=list(batch.t_checkpoints),
        n_samples=len(batch.indices),
        failed=batch.failed,
        **extra,
    )
    return write_json(path, payload)


def batch_key(spec: EnsembleSpec, t_checkpoints, n_samples, m_per_unit, start_index=0) -> str:
    cfg = {
        "spec": spec.to_dict(),
        "checkpoints": [float(t) for t in t_checkpoints],
        "n_samples": int(n_samples),
        "m_per_unit": int(m_per_unit),
        "start_index": int(start_index),
        "simulation_version": SIMULATION_VERSION,
    }
    digest = hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]
    return f"{spec.ident}-S{n_samples}-{digest}"


def save_batch(path, batch: SampleBatch) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez_compressed(
        tmp,
        spec=np.array(batch.spec.to_json()),
        t_checkpoints=np.array(batch.t_checkpoints),
        m_per_unit=np.array(batch.m_per_unit),
        indices=batch.indices,
        thetas=batch.thetas,
        failed=np.array(batch.failed, dtype=np.int64),
    )
    os.replace(tmp, path)


def load_batch(path) -> SampleBatch:
    with np.load(path) as z:
        return SampleBatch(
            spec=EnsembleSpec.from_json(str(z["spec"])),
            t_checkpoints=tuple(float(t) for t in z["t_checkpoints"]),
            m_per_unit=int(z["m_per_unit"]),
            indices=z["indices"],
            thetas=z["thetas"],
            failed=[int(i) for i in z["failed"]],
        )


def cached_simulate(
    cache_dir,
    spec: EnsembleSpec,
    t_checkpoints,
    n_samples: int,
    m_per_unit: int = 100,
    threads: Optional[int] = None,
) -> SampleBatch:
    """:func:`~unidiff.diffusion.simulate`, memoized on disk by full configuration.

    Batches are deterministic in their configuration, so a cache hit is
    identical to a fresh run. ``cache_dir=None`` disables caching.
    """
    if cache_dir is None:
        return simulate(spec, t_checkpoints, n_samples, m_per_unit, threads=threads)
    path = Path(cache_dir) / (batch_key(spec, t_checkpoints, n_samples, m_per_unit) + ".npz")
    if path.exists():
        return load_batch(path)
    batch = simulate(spec, t_checkpoints, n_samples, m_per_unit, threads=threads)
    save_batch(path, batch)
    return batch
