"""On-disk caches for eigenvalue tables, kernel tabulations and per-d L-values."""

from __future__ import annotations

import logging
import os
import re
from pathlib import Path

import numpy as np

from .arithmetic import DEFAULT_MEMORY_CAP
from .eigenform import EigenformTable, generate_eigenform, read_table, write_table
from .errors import CacheFormatError
from .kernel import AfeKernel, build_kernel, read_kernel, write_kernel

log = logging.getLogger(__name__)

ENV_VAR = "QTWIST_CACHE_DIR"


def default_cache_dir() -> Path:
    return Path(os.environ.get(ENV_VAR, Path.cwd() / ".cache"))


def _dir(cache_dir) -> Path:
    path = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path.mkdir(parents=True, exist_ok=True)
    return path


def load_table(weight: int, n_max: int, cache_dir=None,
               memory_cap: int = DEFAULT_MEMORY_CAP) -> EigenformTable:
    """Smallest cached table of this weight reaching n_max, else generate and store one.

    Unreadable cache files are reported, removed and regenerated.
    """
    root = _dir(cache_dir)
    pat = re.compile(rf"eigen_{weight}_(\d+)\.qtmf$")
    found = sorted((int(m.group(1)), p) for p in root.iterdir() if (m := pat.match(p.name)))
    for size, path in found:
        if size < n_max:
            continue
        try:
            return read_table(path)
        except CacheFormatError as exc:
            log.warning("discarding corrupt cache file %s (%s)", path, exc)
            path.unlink()
    table = generate_eigenform(weight, n_max, memory_cap)
    write_table(table, root / f"eigen_{weight}_{n_max}.qtmf")
    return table


def load_kernel(weight: int, m: int, test_function: str = "one", cache_dir=None) -> AfeKernel:
    root = _dir(cache_dir)
    path = root / f"kernel_{weight}_{m}_{test_function}.qtvk"
    if path.exists():
        try:
            return read_kernel(path)
        except CacheFormatError as exc:
            log.warning("discarding corrupt cache file %s (%s)", path, exc)
            path.unlink()
    kernel = build_kernel(weight, m, test_function)
    write_kernel(kernel, path)
    return kernel


class LValueStore:
    """Per-d AFE sums for one (weight, kernel) pair; they do not depend on X."""

    def __init__(self, kernel: AfeKernel, cache_dir=None, persist: bool = True):
        self.kernel = kernel
        self.persist = persist
        self.path = (_dir(cache_dir) / f"afe_{kernel.weight}_{kernel.m}_{kernel.digest[:16]}.npz"
                     if persist else None)
        self.values: dict[int, float] = {}
        if self.path is not None and self.path.exists():
            try:
                with np.load(self.path) as z:
                    self.values = dict(zip(z["d"].tolist(), z["v"].tolist()))
            except Exception as exc:  # any unreadable archive is simply rebuilt
                log.warning("discarding corrupt cache file %s (%s)", self.path, exc)
                self.path.unlink()

    def get(self, table: EigenformTable, ds, workers: int = 1) -> np.ndarray:
        from .lcentral import afe_sums

        ds = np.asarray(ds, dtype=np.int64)
        missing = np.array([d for d in ds.tolist() if d not in self.values], dtype=np.int64)
        if len(missing):
            vals = afe_sums(table, self.kernel, missing, workers)
            self.values.update(zip(missing.tolist(), vals.tolist()))
            if self.path is not None:
                keys = np.array(sorted(self.values), dtype=np.int64)
                tmp = self.path.with_name(self.path.name + ".tmp.npz")
                np.savez(tmp, d=keys, v=np.array([self.values[k] for k in keys.tolist()]))
                tmp.replace(self.path)
        return np.array([self.values[d] for d in ds.tolist()])
