"""Monte Carlo ensembles, rate fits, bound comparisons and brute-force oracles."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps

from . import kernels
from .core import Problem
from .engine import State, error_series, record_indices, run_trajectory
from .exceptions import AdmissibilityError, DomainError, EnsembleError, NumericBlowupError
from .schedules import BoundConstants, Schedule, bound_curve

__all__ = [
    "Z95",
    "trial_seed",
    "EnsembleStats",
    "run_ensemble",
    "RateFit",
    "fit_rate",
    "default_window",
    "BoundReport",
    "check_bound_domination",
    "AuxLemmaResult",
    "oracle_aux_lemma",
    "aux_lemma_grid",
    "default_aux_cells",
    "NoiseVarianceReport",
    "oracle_noise_variance",
    "oracle_xstar_lipschitz",
    "fit_summary",
]

Z95 = float(sps.norm.ppf(0.975))
SERIES = ("err_xy", "err_x", "err_z", "normU2", "moment")


def trial_seed(base_seed: int, t: int) -> int:
    """Seed of trial ``t``; a pure function of ``(base_seed, t)``."""
    if base_seed < 0 or t < 0:
        raise ValueError("seeds and trial numbers must be nonnegative")
    return int(np.random.SeedSequence([int(base_seed), int(t)]).generate_state(1, np.uint64)[0])


def _mean_hw(values: np.ndarray):
    """Per-column mean and 95% normal half-width of a ``(trials, n)`` array."""
    v = np.ascontiguousarray(values.T)  # reduce along the contiguous axis: pairwise summation
    n = v.shape[1]
    mean = np.sum(v, axis=1) / n
    dev = v - mean[:, None]
    var = np.sum(dev * dev, axis=1) / (n - 1)
    # the rounded mean of equal values can differ from them; their spread is exactly zero
    var[np.all(v == v[:, :1], axis=1)] = 0.0
    return mean, Z95 * np.sqrt(var / n)


@dataclass
class EnsembleStats:
    """Per-index means and 95% half-widths over independent trials."""

    indices: np.ndarray
    trials: int
    mean: dict
    halfwidths: dict
    max_identity_residual: float
    seeds: tuple = field(default=(), repr=False)

    @property
    def mean_err_xy(self):
        return self.mean["err_xy"]

    @property
    def mean_err_x(self):
        return self.mean["err_x"]

    @property
    def mean_err_z(self):
        return self.mean["err_z"]

    @property
    def mean_normU2(self):
        return self.mean["normU2"]

    @property
    def halfwidth(self):
        """Half-width of the ``err_xy`` mean."""
        return self.halfwidths["err_xy"]

    def to_csv(self, path) -> None:
        """Columns ``k,err_xy,err_x,err_z,normU2`` (means) followed by their half-widths."""
        names = SERIES[:4]
        header = ["k", *names, *(f"hw_{n}" for n in names)]
        cols = [self.mean[n] for n in names] + [self.halfwidths[n] for n in names]
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for i, k in enumerate(self.indices):
                fh.write(f"{int(k)}," + ",".join(repr(float(c[i])) for c in cols) + "\n")


def run_ensemble(p: Problem, s: Schedule, x0, y0, horizon: int, stride: Optional[int] = None,
                 trials: int = 100, base_seed: int = 0, log_points: Optional[int] = None,
                 seeds: Optional[Sequence[int]] = None, backend: str = "auto",
                 threads: Optional[int] = None) -> EnsembleStats:
    """Independent trajectories with seeds ``trial_seed(base_seed, t)``.

    ``seeds`` overrides the derived seeds.  Each trial's results land in
    its own slot, so the statistics do not depend on execution order.
    """
    if seeds is None:
        if trials < 2:
            raise AdmissibilityError(f"an ensemble needs at least 2 trials; got {trials}")
        seeds = [trial_seed(base_seed, t) for t in range(trials)]
    seeds = [int(sd) for sd in seeds]
    if len(seeds) < 2:
        raise AdmissibilityError("an ensemble needs at least 2 trials")
    idx = record_indices(horizon, stride, log_points)
    st = State.initial(x0, y0)
    T = len(seeds)

    if p.affine is not None and backend != "generic":
        X, Y, U, Z = kernels.simulate_affine(p.affine, s, st.x, st.y, int(horizon), idx[1:], seeds,
                                             p.noise_fast, p.noise_slow, backend=backend, threads=threads)
        first = lambda v: np.broadcast_to(v, (T, 1, v.size))  # noqa: E731
        X = np.concatenate((first(st.x), X), axis=1)
        Y = np.concatenate((first(st.y), Y), axis=1)
        U = np.concatenate((first(st.U), U), axis=1)
        Z = np.concatenate((first(st.z), Z), axis=1)
        errs = error_series(p, X, Y, U, Z)
    else:
        def one(sd):
            try:
                tr = run_trajectory(p, s, x0, y0, horizon, stride, sd, log_points, backend="generic")
            except NumericBlowupError as exc:
                raise EnsembleError(exc.k, exc.norm, trial_seed=sd) from exc
            return tr
        nthreads = min(kernels.thread_count(threads), T)
        if nthreads > 1:
            with ThreadPoolExecutor(max_workers=nthreads) as pool:
                trs = list(pool.map(one, seeds))
        else:
            trs = [one(sd) for sd in seeds]
        errs = {n: np.stack([getattr(tr, n) for tr in trs]) for n in SERIES}
        errs["identity"] = np.stack([tr.identity_residual for tr in trs])

    mean, hws = {}, {}
    for n in SERIES:
        mean[n], hws[n] = _mean_hw(errs[n])
    return EnsembleStats(idx, T, mean, hws, float(np.max(errs["identity"])), tuple(seeds))


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    window: tuple
    points: int
    offset: float = 0.0


def default_window(horizon: int) -> tuple:
    return (max(1, horizon // 100), horizon)


def fit_rate(indices, values, k_lo: float, k_hi: float, offset: float = 0.0) -> RateFit:
    """Least squares of ``log(value)`` on ``log(k + offset)`` over ``k_lo <= k <= k_hi``."""
    k = np.asarray(indices, dtype=float)
    v = np.asarray(values, dtype=float)
    sel = (k >= k_lo) & (k <= k_hi)
    if sel.sum() < 5:
        raise DomainError(f"rate fit needs at least 5 points in [{k_lo}, {k_hi}]; found {int(sel.sum())}")
    kk, vv = k[sel], v[sel]
    if np.any(vv <= 0) or np.any(kk + offset <= 0):
        raise DomainError("rate fit needs positive values and positive k + offset in the window")
    res = sps.linregress(np.log(kk + offset), np.log(vv))
    r2 = min(1.0, max(0.0, float(res.rvalue) ** 2))
    return RateFit(float(res.slope), float(res.intercept), r2, (k_lo, k_hi), int(sel.sum()), float(offset))


@dataclass
class BoundReport:
    """Mean + half-width against the bound curve at every recorded index."""

    which: str
    indices: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    valid_from: Optional[int]
    violations: list
    informational: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        vf = "never" if self.valid_from is None else str(self.valid_from)
        return (f"bound domination ({self.which}): {len(self.violations)} violations, "
                f"{len(self.informational)} informational (bound valid from k={vf}), "
                f"{len(self.indices)} indices checked")


def check_bound_domination(stats: EnsembleStats, c: BoundConstants, s: Schedule, which: str = "xy") -> BoundReport:
    """Compare ``mean + halfwidth`` with ``bound_curve``.

    Exceedances at ``k >= s.valid_from`` are violations; earlier ones (only
    possible with relaxed offsets) are informational.
    """
    key = "err_xy" if which == "xy" else "err_x"
    k = stats.indices
    lhs = stats.mean[key] + stats.halfwidths[key]
    rhs = np.asarray(bound_curve(c, s, k, which=which))
    over = lhs > rhs
    vf = s.valid_from
    viol, info = [], []
    for i in np.flatnonzero(over):
        entry = (int(k[i]), float(lhs[i]), float(rhs[i]))
        (viol if vf is not None and k[i] >= vf else info).append(entry)
    return BoundReport(which, k, lhs, rhs, vf, viol, info)


@dataclass(frozen=True)
class AuxLemmaResult:
    holds: bool
    max_ratio: float
    epsilon: float
    q: float
    p: float
    beta: float
    K: float
    k_max: int
    first_failure: Optional[int] = None


def _aux_admissible(epsilon, q, p, beta, K):
    if not 1 < q <= 2:
        raise AdmissibilityError(f"q must lie in (1, 2]; got {q!r}")
    if not p > 0:
        raise AdmissibilityError(f"p must be positive; got {p!r}")
    if not K > 0:
        raise AdmissibilityError(f"K must be positive; got {K!r}")
    if epsilon < 0:
        raise AdmissibilityError(f"epsilon must be nonnegative; got {epsilon!r}")
    if beta < 2 * (q - 1) / p:
        raise AdmissibilityError(f"beta >= 2(q-1)/p = {2 * (q - 1) / p!r} fails; beta = {beta!r}")
    if p * beta / K > 1:
        raise AdmissibilityError(f"p*beta/K <= 1 fails; p*beta/K = {p * beta / K!r}")


def oracle_aux_lemma(epsilon: float, q: float, p: float, beta: float, K: float, k_max: int,
                     backend: str = "auto") -> AuxLemmaResult:
    """Run ``s_{k+1} = (1 - p beta_k) s_k + eps_k`` from ``s_0 = 0`` and test
    ``s_k <= (2/p) eps_k / beta_k`` for ``0 <= k <= k_max``.

    ``beta_k = beta/(k+K)``, ``eps_k = epsilon/(k+K)**q``.  The ratio
    reported is ``s_k p beta_k / (2 eps_k)``.
    """
    _aux_admissible(epsilon, q, p, beta, K)
    kk = np.arange(k_max + 1, dtype=float) + K
    betas = beta / kk
    eps = epsilon / kk ** q
    s = kernels.get_impl(backend).aux_recursion(np.ascontiguousarray(1.0 - p * betas[:-1]),
                                                np.ascontiguousarray(eps[:-1]))
    bound = (2.0 / p) * eps / betas
    fails = np.flatnonzero(s > bound)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(eps > 0, s * p * betas / (2.0 * eps), 0.0)
    return AuxLemmaResult(fails.size == 0, float(np.max(ratio)), float(epsilon), float(q), float(p),
                          float(beta), float(K), int(k_max), int(fails[0]) if fails.size else None)


def default_aux_cells(mu_prime: float = 1.0, alpha: float = 1.0, a: float = 0.75,
                      beta_slow: float = 4.0, K_slow: float = 100.0) -> list:
    """Grid ``q x p x {minimal beta, minimal beta + 1}`` plus the two parameterisations used for the noise and drift bounds."""
    cells = []
    for q in (1.25, 1.5, 1.75, 2.0):
        for p in (0.25, 0.5, 1.0):
            for extra in (0.0, 1.0):
                beta = 2 * (q - 1) / p + extra
                cells.append(dict(epsilon=1.0, q=q, p=p, beta=beta, K=max(1.0, p * beta)))
    cells.append(dict(epsilon=4.0, q=2.0, p=1.0, beta=2.0, K=8.0))
    cells.append(dict(epsilon=alpha * beta_slow, q=1.0 + a, p=mu_prime, beta=beta_slow, K=K_slow))
    return cells


def aux_lemma_grid(cells: Optional[list] = None, k_max: int = 100_000, backend: str = "auto") -> list:
    """Evaluate every cell; inadmissible ones come back as ``("skipped", cell, reason)``."""
    out = []
    for cell in (default_aux_cells() if cells is None else cells):
        try:
            res = oracle_aux_lemma(k_max=k_max, backend=backend, **cell)
        except AdmissibilityError as exc:
            out.append(("skipped", cell, str(exc)))
        else:
            out.append(("PASS" if res.holds and res.max_ratio <= 1.0 else "FAIL", cell, res))
    return out


@dataclass
class NoiseVarianceReport:
    indices: np.ndarray
    mean: np.ndarray
    halfwidth: np.ndarray
    bound: np.ndarray
    gamma: float
    gamma_source: str
    violations: list
    slope: Optional[RateFit]

    @property
    def ok(self) -> bool:
        return not self.violations


def oracle_noise_variance(p: Problem, s: Schedule, x0=None, y0=None, trials: int = 200, horizon: int = 10_000,
                          base_seed: int = 0, gamma="constants", stats: Optional[EnsembleStats] = None,
                          log_points: Optional[int] = None, window: Optional[tuple] = None) -> NoiseVarianceReport:
    """Compare the Monte Carlo ``E|U_m|^2`` with ``2 c1 Gamma beta_m``.

    ``gamma`` is ``"constants"`` (the schedule's iterate bound),
    ``"measured"`` (largest upper confidence value of
    ``E[1 + |x|^2 + |y|^2]`` seen in the run) or a number.  ``stats``
    reuses an existing ensemble.
    """
    if stats is None:
        x0 = np.zeros(p.dim_fast) if x0 is None else x0
        y0 = np.zeros(p.dim_slow) if y0 is None else y0
        stats = run_ensemble(p, s, x0, y0, horizon, trials=trials, base_seed=base_seed, log_points=log_points)
    if gamma == "constants":
        if s.constants is None:
            raise AdmissibilityError("schedule carries no constants; pass gamma='measured' or a number")
        G, src = float(s.constants.gamma_bound), "constants"
    elif gamma == "measured":
        G, src = float(np.max(stats.mean["moment"] + stats.halfwidths["moment"])), "measured"
    else:
        G, src = float(gamma), "given"
    k = stats.indices
    mean, hw = stats.mean["normU2"], stats.halfwidths["normU2"]
    bound = 2.0 * p.c1 * G * s.beta_at(k.astype(float))
    viol = [(int(k[i]), float(mean[i]), float(bound[i])) for i in np.flatnonzero(mean > bound + hw)]
    fit = None
    if not p.noise_slow.is_zero:
        lo, hi = window if window is not None else default_window(int(k[-1]))
        try:
            fit = fit_rate(k, mean, lo, hi, offset=s.offset)
        except DomainError:
            fit = None
    return NoiseVarianceReport(k, mean, hw, bound, G, src, viol, fit)


def oracle_xstar_lipschitz(p: Problem, pairs: int = 1000, seed: int = 0):
    """``(max_ratio, L0)`` with ratio ``|x*(y1) - x*(y2)| / |y1 - y2|`` over random pairs.

    Pairs are standard Gaussian scaled by 0.1, 1 and 10 in turn.
    """
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    rng = np.random.default_rng(seed)
    radii = (0.1, 1.0, 10.0)
    worst = 0.0
    for i in range(pairs):
        r = radii[i % 3]
        y1, y2 = r * rng.standard_normal(p.dim_slow), r * rng.standard_normal(p.dim_slow)
        dy = float(np.linalg.norm(y1 - y2))
        if dy == 0:
            continue
        dx = float(np.linalg.norm(p.xstar(y1, tol=1e-12) - p.xstar(y2, tol=1e-12)))
        worst = max(worst, dx / dy)
    return worst, p.derived.L0


def fit_summary(fit: Optional[RateFit]) -> str:
    if fit is None:
        return "n/a"
    return f"slope={fit.slope:.6f} intercept={fit.intercept:.6f} r2={fit.r2:.6f} window={fit.window} points={fit.points}"
