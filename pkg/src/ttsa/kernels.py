"""Backend selection and the batched affine simulator.

The compiled extension ``ttsa._kernel`` is used when it imports; otherwise
the numpy implementation in ``ttsa._fallback`` takes over.  Setting
``TTSA_BACKEND=python`` forces the fallback and ``TTSA_BACKEND=compiled``
makes a missing extension an import error.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _fallback
from .exceptions import EnsembleError, NumericBlowupError

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

__all__ = ["BACKEND", "available_backends", "get_impl", "thread_count", "NoiseStreams", "simulate_affine"]


def _select():
    want = os.environ.get("TTSA_BACKEND", "auto").strip().lower()
    if want == "python":
        return "python"
    if want == "compiled":
        if _compiled is None:
            raise ImportError("TTSA_BACKEND=compiled but the ttsa._kernel extension is not built")
        return "compiled"
    return "compiled" if _compiled is not None else "python"


BACKEND = _select()

# noise coefficients buffered per block, in doubles
_NOISE_BUDGET = 1 << 22
_DEFAULT_CHUNK = 2048


def available_backends() -> list:
    return ["python"] + (["compiled"] if _compiled is not None else [])


def get_impl(name=None):
    """Kernel module for ``name`` (``None``/``"auto"`` means the selected backend)."""
    name = BACKEND if name in (None, "auto") else name
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise ImportError("the compiled kernel is not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def thread_count(threads=None) -> int:
    """Worker count: explicit value, else ``TTSA_THREADS``, else the CPU count."""
    if threads is None:
        env = os.environ.get("TTSA_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


class NoiseStreams:
    """Independent counter-based generators for the fast and slow noise of one trajectory."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.fast = np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, 0])))
        self.slow = np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, 1])))


def simulate_affine(maps, schedule, x0, y0, horizon, rec_k, seeds, noise_fast, noise_slow,
                    backend=None, threads=None, chunk=None):
    """Run one trajectory per seed of the affine iteration for ``horizon`` steps.

    ``rec_k`` lists the iterate indices (``1 <= k <= horizon``, strictly
    increasing) to record.  Returns ``(X, Y, U, Z)`` with shapes
    ``(trials, len(rec_k), d)``; ``Z`` follows its own recursion, so
    ``Y - Z - U`` measures accumulated rounding.
    """
    impl = get_impl(backend)
    d1, d2 = maps.dims
    seeds = [int(s) for s in seeds]
    T = len(seeds)
    rec_k = np.asarray(rec_k, dtype=np.intp)
    if rec_k.size and (rec_k[0] < 1 or rec_k[-1] > horizon or np.any(np.diff(rec_k) <= 0)):
        raise ValueError("recorded indices must be strictly increasing within [1, horizon]")
    R = rec_k.size
    pf = noise_fast.features(d1, d2)
    ps = noise_slow.features(d1, d2)
    width = d1 * pf + d2 * ps

    chunk = _DEFAULT_CHUNK if chunk is None else max(1, int(chunk))
    chunk = min(chunk, max(1, horizon))
    nthreads = min(thread_count(threads), T) if T else 1
    per_block = max(1, _NOISE_BUDGET // max(1, chunk * width))
    block = max(1, min(per_block, math.ceil(T / nthreads)))

    X = np.empty((T, R, d1))
    Y = np.empty((T, R, d2))
    U = np.empty((T, R, d2))
    Z = np.empty((T, R, d2))
    A, B, c = (np.ascontiguousarray(m) for m in (maps.A, maps.B, maps.c))
    C, D, e = (np.ascontiguousarray(m) for m in (maps.C, maps.D, maps.e))
    x0 = np.asarray(x0, dtype=float).reshape(d1)
    y0 = np.asarray(y0, dtype=float).reshape(d2)

    def run_block(t0):
        t1 = min(T, t0 + block)
        nb = t1 - t0
        streams = [NoiseStreams(s) for s in seeds[t0:t1]]
        x = np.tile(x0, (nb, 1))
        y = np.tile(y0, (nb, 1))
        u = np.zeros((nb, d2))
        z = y.copy()
        for k0 in range(0, horizon, chunk):
            n = min(chunk, horizon - k0)
            alphas = np.ascontiguousarray(schedule.alphas(k0, n))
            betas = np.ascontiguousarray(schedule.betas(k0, n))
            Wf = np.stack([noise_fast.coefficients(st.fast, n, d1, d1, d2) for st in streams])
            Ws = np.stack([noise_slow.coefficients(st.slow, n, d2, d1, d2) for st in streams])
            lo = int(np.searchsorted(rec_k, k0 + 1))
            hi = int(np.searchsorted(rec_k, k0 + n, side="right"))
            local = np.ascontiguousarray(rec_k[lo:hi] - 1 - k0, dtype=np.intp)
            bad = impl.advance_affine(A, B, c, C, D, e, x, y, u, z, Wf, Ws, alphas, betas,
                                      local, lo, X[t0:t1], Y[t0:t1], U[t0:t1], Z[t0:t1])
            if bad is not None:
                t, s, norm = bad
                cls = EnsembleError if T > 1 else NumericBlowupError
                raise cls(k0 + int(s) + 1, float(norm), trial_seed=seeds[t0 + int(t)])

    starts = list(range(0, T, block))
    if nthreads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=nthreads) as pool:
            for fut in [pool.submit(run_block, t0) for t0 in starts]:
                fut.result()
    else:
        for t0 in starts:
            run_block(t0)
    return X, Y, U, Z
