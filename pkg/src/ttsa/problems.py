"""Built-in problems with exact constants and fixed points.

All four constructions are affine in ``(x, y)``, so ``lam``, ``mu`` and
``L`` come from spectral norms of the blocks and ``(x*, y*)`` from a
linear solve.  Monotone problems are turned into contractions with a step
factor ``zeta``; when it is omitted, half the computed threshold is used.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from .core import AffineMaps, NoiseModel, Problem
from .exceptions import AdmissibilityError, StructuralError

__all__ = [
    "PolyakSpec",
    "SaddleQuadraticSpec",
    "LagrangianSpec",
    "LinearTTSASpec",
    "make_affine_problem",
    "make_polyak",
    "make_saddle",
    "make_lagrangian",
    "make_linear_ttsa",
    "generate_random_hurwitz",
    "random_linear_ttsa_spec",
    "saddle_zeta_threshold",
    "lagrangian_zeta_threshold",
    "linear_ttsa_zeta_threshold",
    "euclidean_step_limit",
]


def _mat(M, name, rows=None, cols=None) -> np.ndarray:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise StructuralError(f"{name} must be a matrix")
    if (rows is not None and M.shape[0] != rows) or (cols is not None and M.shape[1] != cols):
        raise StructuralError(f"{name} has shape {M.shape}, expected ({rows}, {cols})")
    return M


def _vec(v, n, name) -> np.ndarray:
    v = np.zeros(n) if v is None else np.asarray(v, dtype=float).reshape(-1)
    if v.size != n:
        raise StructuralError(f"{name} has length {v.size}, expected {n}")
    return v


def _spd(M, name) -> np.ndarray:
    if not np.allclose(M, M.T, rtol=0, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise AdmissibilityError(f"{name} must be symmetric")
    w = np.linalg.eigvalsh(M)
    if w[0] <= 0:
        raise AdmissibilityError(f"{name} must be positive definite; smallest eigenvalue {w[0]!r}")
    return w


def make_affine_problem(A, B, c, C, D, e, noise_fast: Optional[NoiseModel] = None,
                        noise_slow: Optional[NoiseModel] = None, name: str = "affine") -> Problem:
    """Problem for ``f = A x + B y + c``, ``g = C x + D y + e`` with computed constants."""
    maps = AffineMaps(A, B, c, C, D, e)
    d1, d2 = maps.dims
    lam, mu, L = maps.contraction_constants()
    if lam >= 1.0:
        raise AdmissibilityError(f"f(., y) is not a contraction: |A| = {lam!r} >= 1")
    if mu >= 1.0:
        raise AdmissibilityError(f"y -> g(x*(y), y) is not a contraction: norm {mu!r} >= 1")
    xs, ys = maps.solve()
    return Problem(d1, d2, maps.f, maps.g, lam, mu, L, xs, ys,
                   noise_fast=noise_fast or NoiseModel.zero(), noise_slow=noise_slow or NoiseModel.zero(),
                   xstar_of_y=maps.xstar, affine=maps, name=name)


@dataclass
class PolyakSpec:
    """Averaging of a contraction ``F(x) = F_matrix x + F_offset``."""

    F_matrix: np.ndarray
    F_offset: np.ndarray
    noise_fast: NoiseModel = field(default_factory=NoiseModel.zero)
    noise_slow: NoiseModel = field(default_factory=NoiseModel.zero)


def make_polyak(spec: PolyakSpec) -> Problem:
    """``f(x, y) = F(x)``, ``g(x, y) = x``; ``mu = 0`` and ``L = 1 + lam``."""
    F = _mat(spec.F_matrix, "F_matrix")
    d = F.shape[0]
    _mat(F, "F_matrix", d, d)
    off = _vec(spec.F_offset, d, "F_offset")
    return make_affine_problem(F, np.zeros((d, d)), off, np.eye(d), np.zeros((d, d)), np.zeros(d),
                               spec.noise_fast, spec.noise_slow, name="polyak")


@dataclass
class SaddleQuadraticSpec:
    """``F(x, y) = -x'Px/2 + x'Cy + y'Ry/2 + p'x + r'y``, ascent in x, descent in y."""

    P: np.ndarray
    R: np.ndarray
    C: np.ndarray
    p: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None
    zeta: Optional[float] = None
    noise_fast: NoiseModel = field(default_factory=NoiseModel.zero)
    noise_slow: NoiseModel = field(default_factory=NoiseModel.zero)


def saddle_zeta_threshold(P, R, C) -> float:
    """``2m/(m^2 + Lg^2)`` for the strongly monotone gradient field of the saddle."""
    m = min(np.linalg.eigvalsh(P)[0], np.linalg.eigvalsh(R)[0])
    G = np.block([[P, -C], [C.T, R]])
    Lg = np.linalg.norm(G, 2)
    return float(2 * m / (m ** 2 + Lg ** 2))


def make_saddle(spec: SaddleQuadraticSpec) -> Problem:
    P = _mat(spec.P, "P")
    d1 = P.shape[0]
    R = _mat(spec.R, "R")
    d2 = R.shape[0]
    _mat(P, "P", d1, d1)
    _mat(R, "R", d2, d2)
    C = _mat(spec.C, "C", d1, d2)
    pv, rv = _vec(spec.p, d1, "p"), _vec(spec.r, d2, "r")
    _spd(P, "P")
    _spd(R, "R")
    limit = saddle_zeta_threshold(P, R, C)
    zeta = limit / 2 if spec.zeta is None else float(spec.zeta)
    if not 0 < zeta < limit:
        raise AdmissibilityError(f"zeta must lie in (0, {limit!r}) for this saddle; got {zeta!r}")
    return make_affine_problem(np.eye(d1) - zeta * P, zeta * C, zeta * pv,
                               -zeta * C.T, np.eye(d2) - zeta * R, -zeta * rv,
                               spec.noise_fast, spec.noise_slow, name="saddle")


@dataclass
class LagrangianSpec:
    """Maximise ``-x'Qx/2 + q'x`` subject to ``A x = b``; noise on the primal step only."""

    Q: np.ndarray
    q: np.ndarray
    A: np.ndarray
    b: np.ndarray
    zeta: Optional[float] = None
    noise_fast: NoiseModel = field(default_factory=NoiseModel.zero)


def lagrangian_zeta_threshold(Q, A) -> float:
    """``min(2/lmax(Q), 2/lmax(A Q^-1 A'))``."""
    S = A @ np.linalg.solve(Q, A.T)
    return float(min(2 / np.linalg.eigvalsh(Q)[-1], 2 / np.linalg.eigvalsh((S + S.T) / 2)[-1]))


def make_lagrangian(spec: LagrangianSpec) -> Problem:
    """Primal ascent ``x + zeta(q - Qx - A'y)``, dual step ``y + zeta(Ax - b)``."""
    Q = _mat(spec.Q, "Q")
    n = Q.shape[0]
    _mat(Q, "Q", n, n)
    A = _mat(spec.A, "A", None, n)
    m = A.shape[0]
    q, b = _vec(spec.q, n, "q"), _vec(spec.b, m, "b")
    _spd(Q, "Q")
    rank = np.linalg.matrix_rank(A)
    if rank < m:
        raise AdmissibilityError(f"constraint matrix A must have full row rank {m}; rank is {rank}")
    limit = lagrangian_zeta_threshold(Q, A)
    zeta = limit / 2 if spec.zeta is None else float(spec.zeta)
    if not 0 < zeta < limit:
        raise AdmissibilityError(f"zeta must lie in (0, {limit!r}) for this Lagrangian; got {zeta!r}")
    return make_affine_problem(np.eye(n) - zeta * Q, -zeta * A.T, zeta * q,
                               zeta * A, np.eye(m), -zeta * b,
                               spec.noise_fast, NoiseModel.zero(), name="lagrangian")


@dataclass
class LinearTTSASpec:
    """``A11 x + A12 y = b1``, ``A21 x + A22 y = b2`` with noisy-matrix observations.

    ``noise_scale`` is the standard deviation of every entry of the
    perturbations added to ``[b1 | A11 | A12]`` and ``[b2 | A21 | A22]``.
    """

    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    b1: Optional[np.ndarray] = None
    b2: Optional[np.ndarray] = None
    zeta: Optional[float] = None
    noise_scale: float = 0.0


def euclidean_step_limit(M) -> float:
    """Supremum of ``zeta`` with ``|I - zeta M|_2 < 1``.

    ``|(I - zeta M) v|^2 < |v|^2`` for all ``v`` iff
    ``zeta < 2 v'Mv / |Mv|^2``, so the limit is twice the smallest
    generalised eigenvalue of ``(sym(M), M'M)``.  It is zero unless
    ``sym(M)`` is positive definite.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    S = (M + M.T) / 2
    if np.linalg.eigvalsh(S)[0] <= 0:
        return 0.0
    return float(2 * linalg.eigh(S, M.T @ M, eigvals_only=True)[0])


def _hurwitz_violations(M):
    ev = np.linalg.eigvals(-M)
    return ev[ev.real >= 0]


def linear_ttsa_zeta_threshold(A11, A22_eff) -> float:
    return min(euclidean_step_limit(A11), euclidean_step_limit(A22_eff))


def make_linear_ttsa(spec: LinearTTSASpec) -> Problem:
    A11 = _mat(spec.A11, "A11")
    d1 = A11.shape[0]
    A22 = _mat(spec.A22, "A22")
    d2 = A22.shape[0]
    _mat(A11, "A11", d1, d1)
    _mat(A22, "A22", d2, d2)
    A12 = _mat(spec.A12, "A12", d1, d2)
    A21 = _mat(spec.A21, "A21", d2, d1)
    b1, b2 = _vec(spec.b1, d1, "b1"), _vec(spec.b2, d2, "b2")
    bad = _hurwitz_violations(A11)
    if bad.size:
        raise AdmissibilityError(f"-A11 is not Hurwitz; eigenvalues with nonnegative real part: {bad}")
    Delta = A22 - A21 @ np.linalg.solve(A11, A12)
    bad = _hurwitz_violations(Delta)
    if bad.size:
        raise AdmissibilityError(f"-Delta is not Hurwitz; eigenvalues with nonnegative real part: {bad}")
    limit = linear_ttsa_zeta_threshold(A11, Delta)
    if limit <= 0:
        raise AdmissibilityError(
            "no zeta makes both fixed-point maps Euclidean contractions: "
            "the symmetric parts of A11 and Delta must be positive definite")
    zeta = limit / 2 if spec.zeta is None else float(spec.zeta)
    if not 0 < zeta < limit:
        raise AdmissibilityError(f"zeta must lie in (0, {limit!r}) for this linear system; got {zeta!r}")
    sigma = float(spec.noise_scale)
    if sigma < 0:
        raise AdmissibilityError("noise_scale must be nonnegative")
    nf = NoiseModel.multiplicative(zeta ** 2 * sigma ** 2 * d1) if sigma > 0 else NoiseModel.zero()
    ns = NoiseModel.multiplicative(zeta ** 2 * sigma ** 2 * d2) if sigma > 0 else NoiseModel.zero()
    return make_affine_problem(np.eye(d1) - zeta * A11, -zeta * A12, zeta * b1,
                               -zeta * A21, np.eye(d2) - zeta * A22, zeta * b2,
                               nf, ns, name="linear_ttsa")


def generate_random_hurwitz(dim: int, seed: int, margin: float = 0.5, skew: bool = True) -> np.ndarray:
    """``M = margin I + S + G'G/dim`` with ``S`` skew-symmetric (zero if ``skew`` is false).

    The symmetric part is at least ``margin I``, so every eigenvalue of
    ``-M`` has real part at most ``-margin``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if not margin > 0:
        raise ValueError("margin must be positive")
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((dim, dim))
    H = rng.standard_normal((dim, dim))
    S = (H - H.T) / 2 if skew else np.zeros((dim, dim))
    return margin * np.eye(dim) + S + G.T @ G / dim


def random_linear_ttsa_spec(dim_fast: int, dim_slow: int, seed: int, margin: float = 0.5,
                            coupling: float = 0.3, noise_scale: float = 0.0,
                            zeta: Optional[float] = None) -> LinearTTSASpec:
    """Random instance with ``A21 = -A12'`` so that ``Delta`` keeps a positive definite symmetric part."""
    rng = np.random.default_rng([seed, 1])
    A11 = generate_random_hurwitz(dim_fast, seed, margin)
    A22 = generate_random_hurwitz(dim_slow, seed + 1, margin)
    A12 = coupling * rng.standard_normal((dim_fast, dim_slow)) / np.sqrt(dim_fast)
    return LinearTTSASpec(A11=A11, A12=A12, A21=-A12.T, A22=A22,
                          b1=rng.standard_normal(dim_fast), b2=rng.standard_normal(dim_slow),
                          zeta=zeta, noise_scale=noise_scale)
