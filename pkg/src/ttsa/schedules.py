"""Step-size schedules and the explicit bound constants.

Two regimes are supported:

``both_one_over_k``
    ``alpha_k = alpha / (k + K1)``, ``beta_k = beta / (k + K1)`` with
    ``beta >= 2/(1-mu)``, ``beta/alpha <= C1`` and, in strict mode,
    ``K1 >= C2``.  The combined error is bounded by ``C3 / (k + K1)``.

``fast_one_over_k_a``
    ``alpha_k = alpha / (k + K2)**a``, ``beta_k = beta / (k + K2)`` with
    ``a`` in (0.5, 1), ``beta >= 2/(1-mu)`` and, in strict mode,
    ``K2 >= D1``.  The combined error is bounded by ``D2 / (k + K2)**a``.

Relaxed mode accepts any positive offset; the bound curves then only
apply from ``valid_from`` onwards.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .core import Problem
from .exceptions import AdmissibilityError, SideConditionWarning, StructuralError

__all__ = [
    "Regime",
    "Schedule",
    "BoundConstants",
    "alpha_at",
    "beta_at",
    "compute_constants_regime1",
    "compute_constants_regime2",
    "bound_curve",
    "initial_error",
    "relaxed_floor",
    "side_conditions",
    "build_schedule",
]

# relative slack for beta/alpha <= C1 when alpha was computed as beta / C1
_RATIO_SLACK = 1e-12


class Regime(str, Enum):
    BOTH_ONE_OVER_K = "both_one_over_k"
    FAST_ONE_OVER_K_A = "fast_one_over_k_a"


@dataclass(frozen=True)
class BoundConstants:
    """Evaluated constants for one problem/schedule pair.

    Regime 1 fills ``C1..C4`` and ``Gamma2``; regime 2 fills ``D1..D3`` and
    ``Gamma3``.  The inputs used are kept alongside so a manifest is
    self-describing.
    """

    regime: Regime
    lam: float
    mu: float
    lipschitz: float
    L0: float
    c1: float
    alpha: float
    beta: float
    offset: float
    S0: float
    x_star_sq: float
    y_star_sq: float
    a: Optional[float] = None
    C1: Optional[float] = None
    C2: Optional[float] = None
    C3: Optional[float] = None
    C4: Optional[float] = None
    Gamma2: Optional[float] = None
    D1: Optional[float] = None
    D2: Optional[float] = None
    D3: Optional[float] = None
    Gamma3: Optional[float] = None

    @property
    def gamma_bound(self) -> float:
        """Iterate second-moment bound (Gamma2 or Gamma3)."""
        return self.Gamma2 if self.regime is Regime.BOTH_ONE_OVER_K else self.Gamma3

    @property
    def offset_floor(self) -> float:
        """Strict lower bound on the offset (C2 or D1)."""
        return self.C2 if self.regime is Regime.BOTH_ONE_OVER_K else self.D1

    def as_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if v is None:
                continue
            out[k] = v.value if isinstance(v, Regime) else v
        return out

    def to_text(self) -> str:
        """Flat ``key = value`` block with round-trip float formatting."""
        lines = []
        for k, v in self.as_dict().items():
            lines.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Schedule:
    regime: Regime
    alpha: float
    beta: float
    offset: float
    exponent_a: Optional[float] = None
    strict: bool = False
    constants: Optional[BoundConstants] = field(default=None, compare=False)
    valid_from: Optional[int] = 0  # None: the bound never applies within reach
    side_violations: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        for name in ("alpha", "beta", "offset"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise AdmissibilityError(f"{name} must be a positive real, got {v!r}")
        if self.regime is Regime.FAST_ONE_OVER_K_A:
            a = self.exponent_a
            if a is None or not 0.5 < a < 1.0:
                raise AdmissibilityError(f"exponent a must lie in (0.5, 1), got {a!r}")
        elif self.exponent_a is not None:
            raise StructuralError("exponent_a is only meaningful in the fast_one_over_k_a regime")

    @property
    def gamma(self) -> float:
        return self.beta / self.alpha

    def alpha_at(self, k):
        if self.regime is Regime.BOTH_ONE_OVER_K:
            return self.alpha / (k + self.offset)
        return self.alpha / (k + self.offset) ** self.exponent_a

    def beta_at(self, k):
        return self.beta / (k + self.offset)

    def alphas(self, k0: int, n: int) -> np.ndarray:
        ks = np.arange(k0, k0 + n, dtype=float)
        return self.alpha_at(ks)

    def betas(self, k0: int, n: int) -> np.ndarray:
        ks = np.arange(k0, k0 + n, dtype=float)
        return self.beta_at(ks)


def alpha_at(s: Schedule, k) -> float:
    return s.alpha_at(k)


def beta_at(s: Schedule, k) -> float:
    return s.beta_at(k)


def _check_beta(mu: float, beta: float, regime: Regime):
    need = 2.0 / (1.0 - mu)
    if beta < need:
        kind = "1/k" if regime is Regime.BOTH_ONE_OVER_K else "1/k^a"
        raise AdmissibilityError(
            f"the {kind} schedule requires beta >= 2/(1-mu) = {need!r}; got beta = {beta!r}")


def _norms(p: Problem):
    return float(p.x_star @ p.x_star), float(p.y_star @ p.y_star)


def compute_constants_regime1(p: Problem, alpha: float, beta: float, S0: float,
                              offset: Optional[float] = None) -> BoundConstants:
    """Constants for ``alpha_k = alpha/(k+K1)``, ``beta_k = beta/(k+K1)``.

    ``offset`` is ``K1``; it defaults to ``C2`` (the smallest strict value)
    and only enters ``C3``.
    """
    _check_beta(p.mu, beta, Regime.BOTH_ONE_OVER_K)
    L, c1 = p.lipschitz, p.c1
    dc = p.derived
    lp, mp, L0 = dc.lambda_prime, dc.mu_prime, dc.L0
    xs2, ys2 = _norms(p)
    gamma = beta / alpha
    C1 = lp * mp / (8 * L * L0 + 64 * L0 ** 2 + 4 + 14 * L ** 2)
    C2 = (4 * alpha
          + 36 * L0 ** 2 * beta * (L ** 2 / lp + 4 / mp + 1)
          + 16 * c1 * beta * (2 * L0 ** 2 + 1) * (4 / (mp * gamma ** 2) + 1 + L0 ** 2))
    K1 = C2 if offset is None else float(offset)
    Gamma2 = 2 + 4 * (4 * L0 ** 2 + 2) * S0 + 8 * xs2 + 4 * ys2
    C3 = (2 * S0 * K1
          + 16 * c1 * Gamma2 * beta / (mp * gamma ** 2)
          + 4 * c1 * Gamma2 * beta * (1 + L0 ** 2))
    C4 = 2 * (L0 ** 2 + 1) * C3
    return BoundConstants(
        regime=Regime.BOTH_ONE_OVER_K, lam=p.lam, mu=p.mu, lipschitz=L, L0=L0, c1=c1,
        alpha=float(alpha), beta=float(beta), offset=K1, S0=float(S0), x_star_sq=xs2, y_star_sq=ys2,
        C1=C1, C2=C2, C3=C3, C4=C4, Gamma2=Gamma2)


def _pow(base: float, exponent: float) -> float:
    try:
        return base ** exponent
    except OverflowError:
        return math.inf


def compute_constants_regime2(p: Problem, alpha: float, beta: float, a: float, S0: float,
                              offset: Optional[float] = None) -> BoundConstants:
    """Constants for ``alpha_k = alpha/(k+K2)**a``, ``beta_k = beta/(k+K2)``.

    ``D1`` is the stated sum raised to ``1/(1-a)``; it is loose on purpose
    and may overflow to ``inf`` for ``a`` close to 1.  ``offset`` (``K2``)
    defaults to ``D1``.
    """
    if not 0.5 < a < 1.0:
        raise AdmissibilityError(f"exponent a must lie in (0.5, 1), got {a!r}")
    _check_beta(p.mu, beta, Regime.FAST_ONE_OVER_K_A)
    L, c1 = p.lipschitz, p.c1
    dc = p.derived
    lp, mp, L0 = dc.lambda_prime, dc.mu_prime, dc.L0
    xs2, ys2 = _norms(p)
    root = (16 * c1 * (2 * L0 ** 2 + 1) * (70 * L ** 2 / (lp * mp ** 2) + 4 / lp + 1 + L0 ** 2)
            + 4 * alpha / lp
            + (8 * L * L0 + 64 * L0 ** 2 + 5 + 82 * L ** 2) / (lp * mp) * beta / alpha
            + beta / alpha ** 2
            + 36 * L0 ** 2 * beta * (L ** 2 / lp + 4 / mp + 1))
    D1 = _pow(root, 1.0 / (1.0 - a))
    K2 = D1 if offset is None else float(offset)
    Gamma3 = 2 + 12 * (4 * L0 ** 2 + 2) * S0 + 8 * xs2 + 4 * ys2
    D2 = (4 * S0 * (K2 + 4 * alpha / lp)
          + (280 * L ** 2 / (lp * mp ** 2) + 16 / lp + 4 * (1 + L0 ** 2)) * c1 * Gamma3 * alpha)
    D3 = 2 * (L0 ** 2 + 1) * D2
    return BoundConstants(
        regime=Regime.FAST_ONE_OVER_K_A, lam=p.lam, mu=p.mu, lipschitz=L, L0=L0, c1=c1,
        alpha=float(alpha), beta=float(beta), offset=K2, S0=float(S0), x_star_sq=xs2, y_star_sq=ys2,
        a=float(a), D1=D1, D2=D2, D3=D3, Gamma3=Gamma3)


def bound_curve(c: BoundConstants, s: Schedule, k, which: str = "xy"):
    """Right-hand side of the mean-square bound at step ``k``.

    ``which="xy"`` bounds ``E|x_k - x*(y_k)|^2 + E|y_k - y*|^2``;
    ``which="x"`` bounds ``E|x_k - x*|^2``.  Accepts scalars or arrays.
    """
    if c.regime is not s.regime:
        raise StructuralError(f"constants are for {c.regime.value}, schedule is {s.regime.value}")
    if which not in ("xy", "x"):
        raise ValueError("which must be 'xy' or 'x'")
    k = np.asarray(k, dtype=float)
    if c.regime is Regime.BOTH_ONE_OVER_K:
        num = c.C3 if which == "xy" else c.C4
        out = num / (k + s.offset)
    else:
        num = c.D2 if which == "xy" else c.D3
        out = num / (k + s.offset) ** s.exponent_a
    return float(out) if out.ndim == 0 else out


def initial_error(p: Problem, x0, y0) -> float:
    """``S0 = |x0 - x*(y0)|^2 + |y0 - y*|^2``."""
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    dx = x0 - p.xstar(y0)
    dy = y0 - p.y_star
    return float(dx @ dx + dy @ dy)


def relaxed_floor(regime: Regime, alpha: float, beta: float, a: Optional[float] = None) -> float:
    """Smallest offset with ``alpha_0 <= 1`` and ``beta_0 <= 1``."""
    if Regime(regime) is Regime.BOTH_ONE_OVER_K:
        return max(alpha, beta)
    return max(alpha ** (1.0 / a), beta)


def side_conditions(p: Problem, s: Schedule) -> list:
    """Step-size inequalities assumed inside the drift bounds, checked at k=0.

    Returns a list of human-readable descriptions of the ones that fail.
    """
    L = p.lipschitz
    dc = p.derived
    lp, mp, L0 = dc.lambda_prime, dc.mu_prime, dc.L0
    a0, b0 = s.alpha_at(0), s.beta_at(0)
    checks = [
        ("lam'*alpha_0 <= 1/4", lp * a0 <= 0.25),
        ("mu'*beta_0 <= 1/4", mp * b0 <= 0.25),
        ("(2 L L0 + 16 L0^2/mu' + 1) beta_0 <= lam' alpha_0 / 4",
         (2 * L * L0 + 16 * L0 ** 2 / mp + 1) * b0 <= lp * a0 / 4),
        ("9 L0^2 L^2 beta_0 <= lam'/4", 9 * L0 ** 2 * L ** 2 * b0 <= lp / 4),
        ("36 L0^2 beta_0 <= mu'/4", 36 * L0 ** 2 * b0 <= mp / 4),
        ("3 alpha_0 <= 1/lam'", 3 * a0 <= 1 / lp),
        ("2 L0^2 beta_0 <= alpha_0/lam'", 2 * L0 ** 2 * b0 <= a0 / lp),
        ("2 beta_0 <= 1/mu'", 2 * b0 <= 1 / mp),
    ]
    if s.regime is Regime.BOTH_ONE_OVER_K:
        checks += [
            ("9 beta_0/mu' <= alpha_0/lam'", 9 * b0 / mp <= a0 / lp),
            ("lam' alpha_0 - 9 L^2 beta_0/mu' >= mu' beta_0", lp * a0 - 9 * L ** 2 * b0 / mp >= mp * b0),
            ("14 L^2 beta_0/lam' <= alpha_0", 14 * L ** 2 * b0 / lp <= a0),
        ]
    else:
        a, K2, alpha, beta = s.exponent_a, s.offset, s.alpha, s.beta
        checks += [
            ("18 L^2/(lam' mu') beta_0/alpha_0 <= 1", 18 * L ** 2 / (lp * mp) * b0 / a0 <= 1),
            ("lam' alpha_0/2 >= mu' beta_0", lp * a0 / 2 >= mp * b0),
            ("18 beta_0 <= 4 alpha_0/lam'", 18 * b0 <= 4 * a0 / lp),
            ("(12 L^2/lam' + 70 L^2/(lam' mu')) beta_0 <= alpha_0",
             (12 * L ** 2 / lp + 70 * L ** 2 / (lp * mp)) * b0 <= a0),
            ("K2^(1-a) >= mu' beta/(2 alpha^2)", K2 ** (1 - a) >= mp * beta / (2 * alpha ** 2)),
            ("K2 >= (2a/(lam' alpha))^(1/(1-a))", K2 >= _pow(2 * a / (lp * alpha), 1 / (1 - a))),
            ("2 alpha_0/lam' <= 1", 2 * a0 / lp <= 1),
            ("beta_0 <= alpha_0", b0 <= a0),
        ]
    return [name for name, ok in checks if not ok]


def build_schedule(p: Problem, regime, beta: float, alpha: Optional[float] = None,
                   a: Optional[float] = None, offset: Optional[float] = None,
                   strict: bool = False, x0=None, y0=None, min_offset: float = 0.0) -> Schedule:
    """Admissibility-checked schedule with its bound constants attached.

    ``alpha`` defaults to ``beta / C1`` in the 1/k regime (the largest
    admissible separation) and to 1 in the 1/k^a regime.  In strict mode the
    offset defaults to, and must not be below, ``C2``/``D1``.  In relaxed
    mode it defaults to ``max(min_offset, relaxed_floor)``.
    ``x0, y0`` (default zeros) determine ``S0``.
    """
    regime = Regime(regime)
    beta = float(beta)
    _check_beta(p.mu, beta, regime)
    x0 = np.zeros(p.dim_fast) if x0 is None else np.asarray(x0, dtype=float)
    y0 = np.zeros(p.dim_slow) if y0 is None else np.asarray(y0, dtype=float)
    S0 = initial_error(p, x0, y0)

    if regime is Regime.BOTH_ONE_OVER_K:
        if a is not None:
            raise StructuralError("exponent a given for the both_one_over_k regime")
        probe = compute_constants_regime1(p, 1.0, beta, S0, offset=1.0)
        if alpha is None:
            alpha = beta / probe.C1
        alpha = float(alpha)
        if beta / alpha > probe.C1 * (1 + _RATIO_SLACK):
            raise AdmissibilityError(
                f"the 1/k schedule requires beta/alpha <= C1 = {probe.C1!r}; got {beta / alpha!r}")
        floor = compute_constants_regime1(p, alpha, beta, S0).C2
    else:
        if a is None:
            raise StructuralError("the fast_one_over_k_a regime needs an exponent a")
        alpha = 1.0 if alpha is None else float(alpha)
        floor = compute_constants_regime2(p, alpha, beta, a, S0).D1

    if offset is None:
        offset = floor if strict else max(float(min_offset), relaxed_floor(regime, alpha, beta, a))
    offset = float(offset)
    if strict and offset < floor:
        name = "C2" if regime is Regime.BOTH_ONE_OVER_K else "D1"
        raise AdmissibilityError(f"strict mode requires offset >= {name} = {floor!r}; got {offset!r}")
    if not math.isfinite(offset):
        raise AdmissibilityError("strict offset is not finite; use relaxed mode")

    if regime is Regime.BOTH_ONE_OVER_K:
        consts = compute_constants_regime1(p, alpha, beta, S0, offset=offset)
    else:
        consts = compute_constants_regime2(p, alpha, beta, a, S0, offset=offset)
    valid_from = 0 if offset >= floor else (math.ceil(floor - offset) if math.isfinite(floor) else None)

    s = Schedule(regime, alpha, beta, offset, exponent_a=a, strict=strict,
                 constants=consts, valid_from=valid_from)
    bad = tuple(side_conditions(p, s))
    object.__setattr__(s, "side_violations", bad)
    if strict and bad:
        warnings.warn("step-size side conditions fail at k=0: " + "; ".join(bad), SideConditionWarning,
                      stacklevel=2)
    return s
