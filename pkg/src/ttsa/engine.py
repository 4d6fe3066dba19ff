"""The coupled iteration, its diagnostic sequences and trajectory recording.

One step maps ``(x, y, U, z)`` to

    x' = x + alpha_k (f(x, y) - x + M)
    y' = y + beta_k  (g(x, y) - y + M')
    U' = (1 - beta_k) U + beta_k M'
    z' = y' - U'

where ``M`` and ``M'`` come from the problem's noise models.  ``z`` then
obeys ``z' = (1 - beta_k) z + beta_k g(x, y)``; :func:`z_update_check`
measures how far rounding moves it from that recursion.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .core import Problem
from .exceptions import NumericBlowupError
from .kernels import NoiseStreams
from .schedules import Schedule

__all__ = [
    "State",
    "NoiseStreams",
    "NoiseLog",
    "step",
    "z_update_check",
    "record_indices",
    "run_trajectory",
    "Trajectory",
    "error_series",
    "unrolled_noise_average",
    "IDENTITY_TOL",
]

# y = z + U must hold to IDENTITY_TOL * (1 + |y|)
IDENTITY_TOL = 1e-8
DEFAULT_LOG_POINTS = 200
TRAJECTORY_COLUMNS = ("k", "err_xy", "err_x", "err_z", "normU2")


@dataclass(frozen=True)
class State:
    k: int
    x: np.ndarray
    y: np.ndarray
    U: np.ndarray
    z: np.ndarray

    @classmethod
    def initial(cls, x0, y0) -> "State":
        x0 = np.array(x0, dtype=float).reshape(-1)
        y0 = np.array(y0, dtype=float).reshape(-1)
        return cls(0, x0, y0, np.zeros_like(y0), y0.copy())


class NoiseLog:
    """Ring buffer of slow-noise draws ``M'_{k+1}`` with their ``beta_k``."""

    def __init__(self, capacity: int):
        self.capacity = int(capacity)
        self.entries = deque(maxlen=self.capacity)

    def append(self, k: int, beta_k: float, m_slow: np.ndarray):
        self.entries.append((k, beta_k, m_slow.copy()))

    def arrays(self):
        ks = np.array([e[0] for e in self.entries], dtype=int)
        betas = np.array([e[1] for e in self.entries])
        noise = np.array([e[2] for e in self.entries])
        return ks, betas, noise


def _finite_or_raise(k, *vectors):
    for v in vectors:
        if not np.all(np.isfinite(v)):
            raise NumericBlowupError(k, float(np.linalg.norm(v)))


def step(p: Problem, s: Schedule, st: State, rng: NoiseStreams, log: Optional[NoiseLog] = None) -> State:
    """Advance one step; noise is drawn once per sequence from ``rng``."""
    k = st.k
    a, b = s.alpha_at(k), s.beta_at(k)
    fx = np.asarray(p.f(st.x, st.y), dtype=float)
    gy = np.asarray(p.g(st.x, st.y), dtype=float)
    m = p.noise_fast.sample(rng.fast, st.x, st.y, p.dim_fast)
    ms = p.noise_slow.sample(rng.slow, st.x, st.y, p.dim_slow)
    _finite_or_raise(k, fx, gy, m, ms)
    with np.errstate(over="ignore", invalid="ignore"):
        x = st.x + a * (fx - st.x + m)
        y = st.y + b * (gy - st.y + ms)
        U = (1.0 - b) * st.U + b * ms
    _finite_or_raise(k + 1, x, y)
    if log is not None:
        log.append(k, b, ms)
    return State(k + 1, x, y, U, y - U)


def z_update_check(p: Problem, before: State, after: State, beta_k: float) -> float:
    """``|z_{k+1} - ((1 - beta_k) z_k + beta_k g(x_k, y_k))|``."""
    expected = (1.0 - beta_k) * before.z + beta_k * np.asarray(p.g(before.x, before.y), dtype=float)
    return float(np.linalg.norm(after.z - expected))


def record_indices(horizon: int, stride: Optional[int] = None, log_points: Optional[int] = None) -> np.ndarray:
    """Iterate indices to record, always including 0 and ``horizon``.

    With ``stride`` the indices are evenly spaced; otherwise ``log_points``
    (default 200) geometrically spaced indices in ``[1, horizon]``.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if stride is not None:
        if stride < 1:
            raise ValueError("stride must be >= 1")
        idx = np.arange(0, horizon + 1, int(stride))
    else:
        n = DEFAULT_LOG_POINTS if log_points is None else int(log_points)
        if n < 2:
            raise ValueError("log_points must be >= 2")
        idx = np.round(np.geomspace(1, horizon, n)).astype(np.int64)
    return np.unique(np.concatenate(([0], idx, [horizon]))).astype(np.int64)


def _xstar_batch(p: Problem, Y: np.ndarray, warm: Optional[np.ndarray] = None) -> np.ndarray:
    """``x*(y)`` row by row for ``Y`` of shape ``(n, d2)``."""
    if p.affine is not None:
        return Y @ p.affine.xs_mat.T + p.affine.xs_off
    out = np.empty((Y.shape[0], p.dim_fast))
    prev = warm
    for i, y in enumerate(Y):
        prev = p.xstar(y, x0=prev)
        out[i] = prev
    return out


def _sq(v: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", v, v)


def error_series(p: Problem, X, Y, U, Z) -> dict:
    """Error functionals for arrays of shape ``(..., n, d)``.

    Returns ``err_xy``, ``err_x``, ``err_z``, ``normU2``, the second
    moment ``1 + |x|^2 + |y|^2`` and the relative residual of ``y = z + U``.
    """
    X, Y, U, Z = (np.asarray(a, dtype=float) for a in (X, Y, U, Z))
    lead = Y.shape[:-1]
    flatY = Y.reshape(-1, p.dim_slow)
    flatZ = Z.reshape(-1, p.dim_slow)
    xs_y = _xstar_batch(p, flatY).reshape(lead + (p.dim_fast,))
    xs_z = _xstar_batch(p, flatZ).reshape(lead + (p.dim_fast,))
    ny2 = _sq(Y)
    return {
        "err_xy": _sq(X - xs_y) + _sq(Y - p.y_star),
        "err_x": _sq(X - p.x_star),
        "err_z": _sq(X - xs_z) + _sq(Z - p.y_star),
        "normU2": _sq(U),
        "moment": 1.0 + _sq(X) + ny2,
        "identity": np.sqrt(_sq(Y - Z - U)) / (1.0 + np.sqrt(ny2)),
    }


@dataclass
class Trajectory:
    """Recorded states and error series of one run."""

    indices: np.ndarray
    x: np.ndarray
    y: np.ndarray
    U: np.ndarray
    z: np.ndarray
    err_xy: np.ndarray
    err_x: np.ndarray
    err_z: np.ndarray
    normU2: np.ndarray
    moment: np.ndarray
    identity_residual: np.ndarray
    seed: int
    noise_log: Optional[NoiseLog] = field(default=None, repr=False)
    z_residual: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def record_stride(self) -> Optional[int]:
        d = np.diff(self.indices)
        return int(d[0]) if d.size and np.all(d == d[0]) else None

    def to_csv(self, path) -> None:
        cols = (self.indices, self.err_xy, self.err_x, self.err_z, self.normU2)
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
            for row in zip(*cols):
                fh.write(f"{int(row[0])}," + ",".join(repr(float(v)) for v in row[1:]) + "\n")


def _trajectory(p, idx, X, Y, U, Z, seed, log=None, zres=None) -> Trajectory:
    errs = error_series(p, X, Y, U, Z)
    return Trajectory(idx, X, Y, U, Z, errs["err_xy"], errs["err_x"], errs["err_z"], errs["normU2"],
                      errs["moment"], errs["identity"], seed, log, zres)


def run_trajectory(p: Problem, s: Schedule, x0, y0, horizon: int, stride: Optional[int] = None,
                   seed: int = 0, log_points: Optional[int] = None, backend: str = "auto",
                   noise_log: int = 0, check_z: bool = False) -> Trajectory:
    """Simulate one trajectory and evaluate its error series.

    Affine problems run through the batch kernel unless ``backend`` is
    ``"generic"``, a noise log is requested or per-step z checks are on;
    everything else steps in Python.  Output is a deterministic function of
    ``seed``.
    """
    idx = record_indices(horizon, stride, log_points)
    st = State.initial(x0, y0)
    if st.x.size != p.dim_fast or st.y.size != p.dim_slow:
        raise ValueError(f"x0/y0 have sizes {st.x.size}/{st.y.size}, expected {p.dim_fast}/{p.dim_slow}")
    use_kernel = p.affine is not None and backend != "generic" and noise_log == 0 and not check_z
    if use_kernel:
        X, Y, U, Z = kernels.simulate_affine(p.affine, s, st.x, st.y, int(horizon), idx[1:], [seed],
                                             p.noise_fast, p.noise_slow, backend=backend, threads=1)
        X = np.concatenate((st.x[None], X[0]))
        Y = np.concatenate((st.y[None], Y[0]))
        U = np.concatenate((st.U[None], U[0]))
        Z = np.concatenate((st.z[None], Z[0]))
        return _trajectory(p, idx, X, Y, U, Z, seed)

    rng = NoiseStreams(seed)
    log = NoiseLog(noise_log) if noise_log else None
    rows = {0: st}
    want = set(int(i) for i in idx)
    zres = np.empty(int(horizon)) if check_z else None
    for k in range(int(horizon)):
        nxt = step(p, s, st, rng, log)
        if check_z:
            zres[k] = z_update_check(p, st, nxt, s.beta_at(k))
        st = nxt
        if st.k in want:
            rows[st.k] = st
    ordered = [rows[int(i)] for i in idx]
    X = np.array([r.x for r in ordered])
    Y = np.array([r.y for r in ordered])
    U = np.array([r.U for r in ordered])
    Z = np.array([r.z for r in ordered])
    return _trajectory(p, idx, X, Y, U, Z, seed, log, zres)


def unrolled_noise_average(betas, noise, m: int) -> np.ndarray:
    """``sum_{i<m} beta_i prod_{i<j<m} (1 - beta_j) M'_{i+1}`` from logged draws.

    ``betas[i]`` is ``beta_i`` and ``noise[i]`` is ``M'_{i+1}``.
    """
    betas = np.asarray(betas, dtype=float)
    noise = np.asarray(noise, dtype=float)
    if m > betas.size:
        raise ValueError("not enough logged draws")
    total = np.zeros(noise.shape[1]) if noise.ndim == 2 else 0.0
    for i in range(m):
        weight = betas[i] * math.prod(1.0 - betas[j] for j in range(i + 1, m))
        total = total + weight * noise[i]
    return total
