"""Problem abstraction, noise models and the fixed-point solver.

A problem is a pair of operators ``f(x, y)`` (fast) and ``g(x, y)`` (slow)
together with the declared constants

* ``lam`` - contraction factor of ``f(., y)`` for every ``y``,
* ``mu``  - contraction factor of ``y -> g(x*(y), y)``,
* ``lipschitz`` - joint constant with
  ``|f(x1,y1)-f(x2,y2)| + |g(x1,y1)-g(x2,y2)| <= L (|x1-x2| + |y1-y2|)``,

and a known solution ``(x_star, y_star)``.  The constants are inputs; the
validation below can only falsify them by sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import AdmissibilityError, ConvergenceError, StructuralError

__all__ = [
    "NoiseModel",
    "AffineMaps",
    "Problem",
    "DerivedConstants",
    "ValidationReport",
    "validate_problem",
    "banach",
    "fixed_point_of_f",
    "spectral_norm",
    "PROBE_RADII",
]

NOISE_KINDS = ("zero", "additive_gaussian", "multiplicative_affine")
PROBE_RADII = (0.1, 1.0, 10.0)
RATIO_TOL = 1e-9


def spectral_norm(M) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def _frozen(a, shape=None) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NoiseModel:
    """Martingale-difference noise generator.

    ``kind`` is one of ``zero``, ``additive_gaussian`` (i.i.d.
    ``N(0, scale * I)``) or ``multiplicative_affine`` (noisy-matrix noise
    ``M = sigma * E @ [1, x, y]`` with i.i.d. standard normal ``E`` and
    ``sigma**2 = c1 / dim``, so that ``E|M|^2 = c1 (1 + |x|^2 + |y|^2)``
    holds with equality).

    Every realisation is expressed as a coefficient tensor ``W`` of shape
    ``(steps, dim, p)`` applied to the feature vector ``w = [1, x, y]``
    truncated to its first ``p`` entries; ``p`` is 0, 1 or ``1+d1+d2``.
    """

    kind: str = "zero"
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise AdmissibilityError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if not (self.scale >= 0.0 and math.isfinite(self.scale)):
            raise AdmissibilityError(f"noise scale must be a finite nonnegative real, got {self.scale!r}")

    @classmethod
    def zero(cls) -> "NoiseModel":
        return cls("zero", 0.0)

    @classmethod
    def additive(cls, covariance_scale: float) -> "NoiseModel":
        return cls("additive_gaussian", float(covariance_scale))

    @classmethod
    def multiplicative(cls, c1: float) -> "NoiseModel":
        return cls("multiplicative_affine", float(c1))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.scale == 0.0

    def c1_bound(self, dim: int) -> float:
        """Constant ``c`` with ``E[|M|^2 | past] <= c (1 + |x|^2 + |y|^2)``."""
        if self.kind == "additive_gaussian":
            return self.scale * dim
        if self.kind == "multiplicative_affine":
            return self.scale
        return 0.0

    def features(self, dim_fast: int, dim_slow: int) -> int:
        if self.is_zero:
            return 0
        if self.kind == "additive_gaussian":
            return 1
        return 1 + dim_fast + dim_slow

    def coefficients(self, gen: np.random.Generator, steps: int, dim: int,
                     dim_fast: int, dim_slow: int) -> np.ndarray:
        p = self.features(dim_fast, dim_slow)
        if p == 0:
            return np.zeros((steps, dim, 0))
        W = gen.standard_normal((steps, dim, p))
        if self.kind == "additive_gaussian":
            W *= math.sqrt(self.scale)
        else:
            W *= math.sqrt(self.scale / dim)
        return W

    def sample(self, gen: np.random.Generator, x: np.ndarray, y: np.ndarray, dim: int) -> np.ndarray:
        """Draw one noise vector at state ``(x, y)``; consumes the same draws as ``coefficients(gen, 1, ...)``."""
        W = self.coefficients(gen, 1, dim, x.size, y.size)[0]
        p = W.shape[1]
        if p == 0:
            return np.zeros(dim)
        w = np.concatenate(([1.0], x, y))[:p]
        return W @ w


@dataclass(frozen=True, eq=False)
class AffineMaps:
    """``f(x, y) = A x + B y + c`` and ``g(x, y) = C x + D y + e``.

    The affine form unlocks the compiled batch kernel and gives the analytic
    ``x*(y) = (I - A)^{-1} (B y + c)``.
    """

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    C: np.ndarray
    D: np.ndarray
    e: np.ndarray
    xs_mat: np.ndarray = field(init=False, repr=False)
    xs_off: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        d1 = A.shape[0]
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        d2 = D.shape[0]
        shapes = {"A": (d1, d1), "B": (d1, d2), "c": (d1,), "C": (d2, d1), "D": (d2, d2), "e": (d2,)}
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.size != int(np.prod(shape)):
                raise StructuralError(f"affine block {name} has {arr.size} entries, expected shape {shape}")
            object.__setattr__(self, name, _frozen(arr, shape))
        I = np.eye(d1)
        object.__setattr__(self, "xs_mat", _frozen(np.linalg.solve(I - self.A, self.B)))
        object.__setattr__(self, "xs_off", _frozen(np.linalg.solve(I - self.A, self.c)))

    @property
    def dims(self):
        return self.A.shape[0], self.D.shape[0]

    def f(self, x, y):
        return self.A @ x + self.B @ y + self.c

    def g(self, x, y):
        return self.C @ x + self.D @ y + self.e

    def xstar(self, y):
        return self.xs_mat @ y + self.xs_off

    def slow_map(self):
        """Linear part and offset of ``y -> g(x*(y), y)``."""
        H = self.C @ self.xs_mat + self.D
        h = self.C @ self.xs_off + self.e
        return H, h

    def contraction_constants(self):
        """``(lam, mu, L)`` as spectral norms of the affine blocks.

        ``L`` is ``max(|A|+|C|, |B|+|D|)``: the exact operator norm of the
        joint map is attained on the extreme points of the sum-norm ball, and
        splitting each output norm gives this bound (tight whenever one of
        the two columns is a scalar multiple, e.g. all 1-D problems).
        """
        lam = spectral_norm(self.A)
        H, _ = self.slow_map()
        mu = spectral_norm(H)
        L = max(spectral_norm(self.A) + spectral_norm(self.C),
                spectral_norm(self.B) + spectral_norm(self.D))
        return lam, mu, L

    def solve(self):
        """Joint fixed point ``(x*, y*)`` by a direct linear solve."""
        H, h = self.slow_map()
        d2 = H.shape[0]
        y = np.linalg.solve(np.eye(d2) - H, h)
        return self.xstar(y), y


@dataclass(frozen=True)
class DerivedConstants:
    lambda_prime: float
    mu_prime: float
    L0: float

    @classmethod
    def from_constants(cls, lam: float, mu: float, lipschitz: float) -> "DerivedConstants":
        lp = 1.0 - lam
        return cls(lambda_prime=lp, mu_prime=1.0 - mu, L0=lipschitz / lp)


@dataclass(frozen=True, eq=False)
class Problem:
    """Two-time-scale fixed-point problem.

    ``f`` and ``g`` must be pure functions of ``(x, y)`` returning 1-D
    arrays of length ``dim_fast`` and ``dim_slow``.  ``xstar_of_y`` is an
    optional analytic ``y -> x*(y)``; without it the Banach solver is used.
    """

    dim_fast: int
    dim_slow: int
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lam: float
    mu: float
    lipschitz: float
    x_star: np.ndarray
    y_star: np.ndarray
    noise_fast: NoiseModel = field(default_factory=NoiseModel.zero)
    noise_slow: NoiseModel = field(default_factory=NoiseModel.zero)
    xstar_of_y: Optional[Callable[[np.ndarray], np.ndarray]] = None
    affine: Optional[AffineMaps] = None
    name: str = "custom"

    def __post_init__(self):
        if int(self.dim_fast) < 1 or int(self.dim_slow) < 1:
            raise StructuralError("dimensions must be positive integers")
        if not 0.0 <= self.lam < 1.0:
            raise AdmissibilityError(f"lam must lie in [0, 1), got {self.lam!r}")
        if not 0.0 <= self.mu < 1.0:
            raise AdmissibilityError(f"mu must lie in [0, 1), got {self.mu!r}")
        if not (self.lipschitz > 0.0 and math.isfinite(self.lipschitz)):
            raise AdmissibilityError(f"lipschitz must be a positive real, got {self.lipschitz!r}")
        xs = np.asarray(self.x_star, dtype=float).reshape(-1)
        ys = np.asarray(self.y_star, dtype=float).reshape(-1)
        if xs.size != self.dim_fast or ys.size != self.dim_slow:
            raise StructuralError(
                f"x_star/y_star have sizes {xs.size}/{ys.size}, expected {self.dim_fast}/{self.dim_slow}")
        object.__setattr__(self, "x_star", _frozen(xs))
        object.__setattr__(self, "y_star", _frozen(ys))
        if self.affine is not None and self.affine.dims != (self.dim_fast, self.dim_slow):
            raise StructuralError("affine maps do not match the declared dimensions")

    @property
    def derived(self) -> DerivedConstants:
        return DerivedConstants.from_constants(self.lam, self.mu, self.lipschitz)

    @property
    def c1(self) -> float:
        """Joint noise constant: fast plus slow second-moment bounds."""
        return self.noise_fast.c1_bound(self.dim_fast) + self.noise_slow.c1_bound(self.dim_slow)

    @property
    def noiseless(self) -> bool:
        return self.noise_fast.is_zero and self.noise_slow.is_zero

    def xstar(self, y, tol: float = 1e-12, x0=None) -> np.ndarray:
        """``x*(y)``: analytic when available, else Banach iteration."""
        y = np.asarray(y, dtype=float)
        if self.xstar_of_y is not None:
            return np.asarray(self.xstar_of_y(y), dtype=float)
        return fixed_point_of_f(self, y, tol=tol, x0=x0)


@dataclass
class ValidationReport:
    max_contraction_ratio: float
    max_lipschitz_ratio: float
    max_mu_ratio: float
    residual_fast: float
    residual_slow: float
    probes: int
    seed: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _call(fn, x, y, dim, label):
    out = np.asarray(fn(x, y), dtype=float)
    if out.shape != (dim,):
        raise StructuralError(f"{label} returned shape {out.shape}, expected ({dim},)")
    return out


def validate_problem(p: Problem, probes: int = 100, seed: int = 0) -> ValidationReport:
    """Falsification probes for the declared constants.

    For each radius in ``PROBE_RADII`` draw ``probes`` standard Gaussian
    pairs scaled by the radius and record the worst contraction,
    Lipschitz and slow-map ratios, plus the fixed-point residuals at
    ``(x_star, y_star)``.  A ratio above its declared constant by more
    than ``1e-9`` is a violation.
    """
    if probes < 1:
        raise ValueError("probes must be >= 1")
    rng = np.random.default_rng(seed)
    d1, d2 = p.dim_fast, p.dim_slow
    rc = rl = rm = 0.0
    for r in PROBE_RADII:
        for _ in range(probes):
            x1, x2 = r * rng.standard_normal(d1), r * rng.standard_normal(d1)
            y1, y2 = r * rng.standard_normal(d2), r * rng.standard_normal(d2)
            f1 = _call(p.f, x1, y1, d1, "f")
            dx = np.linalg.norm(x1 - x2)
            if dx > 0:
                rc = max(rc, np.linalg.norm(f1 - _call(p.f, x2, y1, d1, "f")) / dx)
            num = (np.linalg.norm(f1 - _call(p.f, x2, y2, d1, "f"))
                   + np.linalg.norm(_call(p.g, x1, y1, d2, "g") - _call(p.g, x2, y2, d2, "g")))
            den = dx + np.linalg.norm(y1 - y2)
            if den > 0:
                rl = max(rl, num / den)
            dy = np.linalg.norm(y1 - y2)
            if dy > 0:
                h1 = _call(p.g, p.xstar(y1), y1, d2, "g")
                h2 = _call(p.g, p.xstar(y2), y2, d2, "g")
                rm = max(rm, np.linalg.norm(h1 - h2) / dy)
    res_f = float(np.linalg.norm(_call(p.f, p.x_star, p.y_star, d1, "f") - p.x_star))
    res_g = float(np.linalg.norm(_call(p.g, p.x_star, p.y_star, d2, "g") - p.y_star))
    report = ValidationReport(float(rc), float(rl), float(rm), res_f, res_g, probes, seed)
    if rc > p.lam + RATIO_TOL:
        report.violations.append(f"contraction ratio of f is {rc:.12g} > lam={p.lam!r}")
    if rl > p.lipschitz + RATIO_TOL:
        report.violations.append(f"Lipschitz ratio of (f, g) is {rl:.12g} > L={p.lipschitz!r}")
    if rm > p.mu + RATIO_TOL:
        report.violations.append(f"slow-map contraction ratio is {rm:.12g} > mu={p.mu!r}")
    scale = 1.0 + float(np.linalg.norm(p.x_star)) + float(np.linalg.norm(p.y_star))
    if max(res_f, res_g) > RATIO_TOL * scale:
        report.violations.append(f"fixed-point residuals {res_f:.3e}, {res_g:.3e} exceed tolerance")
    return report


def default_max_iter(lam: float, tol: float) -> int:
    if lam <= 0.0:
        return 10
    return 10 * max(1, math.ceil(math.log(tol) / math.log(lam)))


def banach(fn: Callable[[np.ndarray], np.ndarray], x0, tol: float, max_iter: int):
    """Iterate ``x <- fn(x)`` until ``|fn(x) - x| <= tol``.

    Returns ``(x, iterations, residual)`` where ``x`` is the point whose
    residual passed the test.
    """
    x = np.asarray(x0, dtype=float)
    for n in range(max_iter + 1):
        fx = np.asarray(fn(x), dtype=float)
        r = float(np.linalg.norm(fx - x))
        if r <= tol:
            return x, n, r
        if not math.isfinite(r):
            break
        x = fx
    raise ConvergenceError(f"Banach iteration stopped after {max_iter} sweeps, residual {r:.3e} > tol {tol:.1e}", r)


def fixed_point_of_f(p: Problem, y, tol: float = 1e-10, max_iter: Optional[int] = None, x0=None) -> np.ndarray:
    """Unique fixed point of ``f(., y)``; each sweep contracts the error by ``lam``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    y = np.asarray(y, dtype=float)
    if max_iter is None:
        max_iter = default_max_iter(p.lam, tol)
    start = np.zeros(p.dim_fast) if x0 is None else x0
    x, _, _ = banach(lambda x: p.f(x, y), start, tol, max_iter)
    return x
