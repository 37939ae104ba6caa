"""Statistical checks tying simulated paths to the limit theory.

All simulation goes through :func:`cmbp.engine.monte_carlo`, so every report
is a deterministic function of the model, the parameters and the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .engine import floor_nt, monte_carlo
from .limit import gamma_marginal
from .model import (
    Criticality,
    ModelSpec,
    NotCriticalError,
    classify,
    limit_coefficients,
    model_hash,
)

__all__ = [
    "KsResult",
    "MarginalResult",
    "GrowthReport",
    "FrequencyReport",
    "CheckReport",
    "kolmogorov_sf",
    "ks_test",
    "marginal_convergence",
    "projected_samples",
    "moment_growth_check",
    "relative_frequency_check",
    "lindeberg_diagnostic",
    "run_suite",
]


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n_samples: int

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "p_value": self.p_value, "n_samples": self.n_samples}


def kolmogorov_sf(lam: float, rtol: float = 1e-10) -> float:
    """``P(K > lam)`` for the Kolmogorov distribution.

    Uses ``2 sum (-1)^(k-1) exp(-2 k^2 lam^2)`` for ``lam >= 1`` and the
    Jacobi theta form ``1 - sqrt(2 pi)/lam sum exp(-(2k-1)^2 pi^2 / (8 lam^2))``
    below, each summed until a term drops under ``rtol`` times the total.
    """
    if lam <= 0:
        return 1.0
    if lam < 1.0:
        s = 0.0
        k = 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi**2 / (8 * lam * lam))
            s += term
            if term <= rtol * s or k > 1000:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2 * math.pi) / lam * s))
    s = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        s += term if k % 2 else -term
        if term <= rtol * abs(s) or k > 1000:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * s))


def ks_test(samples: Sequence[float], cdf: Callable) -> KsResult:
    """Exact sup distance between the empirical CDF and ``cdf``, asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("ks_test needs at least one sample")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    d = min(max(d, 0.0), 1.0)
    return KsResult(d, kolmogorov_sf(math.sqrt(n) * d), n)


@dataclass(frozen=True)
class MarginalResult:
    """Outcome of comparing ``v^T Z_[nt] / n`` with the limit marginal.

    ``kind`` is ``"ks"`` (Gamma limit) or ``"line"`` (noiseless limit, where
    ``statistic`` is the largest distance to ``b s`` over ``s <= t``).
    """

    kind: str
    statistic: float
    p_value: float | None
    n_samples: int
    failures: int
    samples: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "statistic": self.statistic, "p_value": self.p_value,
                "n_samples": self.n_samples, "failures": self.failures}


def _critical_coefficients(model: ModelSpec):
    rep = classify(model)
    if rep.cls is not Criticality.CRITICAL:
        raise NotCriticalError(f"check needs a critical model, got {rep.cls.value}"
                               + (f" ({rep.reason})" if rep.reason else ""))
    return limit_coefficients(model)


def projected_samples(model: ModelSpec, n: int, t, trajectories: int, master_seed: int,
                      threads: int | None = None) -> tuple[np.ndarray, int]:
    """``v^T Z_[nt] / n`` per trajectory, plus the number of failed trajectories."""
    lc = _critical_coefficients(model)
    k = floor_nt(n, t)
    res = monte_carlo(model, n, t, trajectories, master_seed, threads=threads, record_at=[k], K=k,
                      reducer=lambda tr: float(lc.left @ tr.steps[-1]) / n)
    return np.asarray(res.values, dtype=float), res.n_failed


def marginal_convergence(model: ModelSpec, n: int, t, trajectories: int, master_seed: int,
                         threads: int | None = None) -> MarginalResult:
    """KS test of ``v^T Z_[nt] / n`` against the Gamma marginal of the limit."""
    lc = _critical_coefficients(model)
    tf = float(t)
    gm = gamma_marginal(max(lc.drift, 0.0), lc.diffusion, tf)
    if gm.kind == "gamma":
        x, failed = projected_samples(model, n, t, trajectories, master_seed, threads)
        ks = ks_test(x, gm.cdf)
        return MarginalResult("ks", ks.statistic, ks.p_value, ks.n_samples, failed, x)
    # noiseless limit: sup over the step path of the distance to the line b*s
    k = floor_nt(n, t)
    b = lc.drift

    def sup_dist(tr):
        proj = (tr.steps.astype(float) @ lc.left) / n
        ks_ = np.arange(k + 1)
        left_end = np.abs(proj - b * ks_ / n)
        right_end = np.abs(proj - b * np.minimum((ks_ + 1) / n, tf))
        return float(max(left_end.max(), right_end.max()))

    res = monte_carlo(model, n, t, trajectories, master_seed, threads=threads, K=k, reducer=sup_dist)
    vals = np.asarray(res.values, dtype=float)
    stat = float(vals.max()) if vals.size else math.nan
    return MarginalResult("line", stat, None, vals.size, res.n_failed, vals)


def _geometric_grid(k_max: int, per_decade: int) -> np.ndarray:
    pts = np.unique(np.rint(np.logspace(0, math.log10(k_max), int(per_decade * math.log10(k_max)) + 2)))
    return pts[(pts >= 1) & (pts <= k_max)].astype(np.int64)


@dataclass(frozen=True)
class GrowthReport:
    target: str
    ks: np.ndarray
    values: np.ndarray
    fitted_exponent: float
    target_exponent: float
    status: str  # "ok" or "degenerate"

    def to_dict(self) -> dict:
        return {"target": self.target, "ks": self.ks.tolist(), "values": self.values.tolist(),
                "fitted_exponent": self.fitted_exponent, "target_exponent": self.target_exponent,
                "status": self.status}


def _top_decade_slope(ks: np.ndarray, vals: np.ndarray) -> tuple[float, str]:
    top = ks >= ks[-1] / 10.0
    kk, vv = ks[top], vals[top]
    if np.all(vv == 0):
        return math.nan, "degenerate"
    keep = vv > 0
    if keep.sum() < 2:
        return math.nan, "degenerate"
    return float(np.polyfit(np.log(kk[keep]), np.log(vv[keep]), 1)[0]), "ok"


@dataclass(frozen=True)
class GrowthResult:
    reports: dict
    trajectories: int
    failures: int

    def to_dict(self) -> dict:
        return {"reports": {k: r.to_dict() for k, r in self.reports.items()},
                "trajectories": self.trajectories, "failures": self.failures}


def moment_growth_check(model: ModelSpec, k_max: int, trajectories: int, master_seed: int,
                        per_decade: int = 10, threads: int | None = None) -> GrowthResult:
    """Monte Carlo growth exponents of ``E|Z_k|``, ``E|Z_k|^2``, ``E|M_k|^2`` and ``E|M_k|^4``.

    Moments are estimated on a geometric grid of generations up to
    ``k_max``; the exponent is the least-squares log-log slope over the top
    decade ``[k_max / 10, k_max]``. Norms are Euclidean.
    """
    _critical_coefficients(model)
    if k_max < 10:
        raise ValueError("k_max must be at least 10")
    grid = _geometric_grid(k_max, per_decade)
    rec = np.unique(np.concatenate([grid, grid - 1]))
    pos = {int(k): i for i, k in enumerate(rec)}
    i_now = np.array([pos[int(k)] for k in grid])
    i_prev = np.array([pos[int(k) - 1] for k in grid])
    m = model.m

    def reduce(tr):
        Z = tr.steps
        prev = Z[i_prev]
        eps = model.control.mean_batch(prev)
        M = Z[i_now] - eps @ m.T
        zn = np.linalg.norm(Z[i_now].astype(float), axis=1)
        mn2 = np.sum(M * M, axis=1)
        return np.stack([zn, zn**2, mn2, mn2**2])

    res = monte_carlo(model, 1, k_max, trajectories, master_seed, threads=threads, record_at=rec, K=k_max,
                      reducer=reduce)
    if not res.values:
        raise RuntimeError("every trajectory failed")
    mean = np.mean(np.stack(res.values), axis=0)
    reports = {}
    for row, (name, target) in enumerate((("E|Z|", 1.0), ("E|Z|^2", 2.0), ("E|M|^2", 1.0), ("E|M|^4", 2.0))):
        slope, status = _top_decade_slope(grid.astype(float), mean[row])
        reports[name] = GrowthReport(name, grid, mean[row], slope, target, status)
    return GrowthResult(reports, res.n_ok, res.n_failed)


@dataclass(frozen=True)
class FrequencyReport:
    mean_ratio: float
    target: float
    share_target: float
    mean_share: float
    fraction_within: float
    delta: float
    nonextinct: int
    n_samples: int
    ratios: np.ndarray = field(repr=False)
    shares: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"mean_ratio": self.mean_ratio, "target": self.target, "share_target": self.share_target,
                "mean_share": self.mean_share, "fraction_within": self.fraction_within, "delta": self.delta,
                "nonextinct": self.nonextinct, "n_samples": self.n_samples}


def relative_frequency_check(model: ModelSpec, n: int, t, trajectories: int, master_seed: int, i: int, j: int,
                             delta: float = 0.05, threads: int | None = None) -> FrequencyReport:
    """Concentration of type ratios and shares at generation ``[nt]``.

    Type indices are 0-based. Per trajectory the ratio is
    ``1{Z_j != 0} Z_i / Z_j`` and the share ``1{Z != 0} Z_i / sum(Z)``, so an
    empty generation contributes 0, never NaN. ``fraction_within`` is the
    share of nonextinct trajectories whose type-``i`` share lies within
    ``delta`` of ``u_i``.
    """
    lc = _critical_coefficients(model)
    p = model.p
    if not (0 <= i < p and 0 <= j < p):
        raise ValueError("type indices out of range")
    k = floor_nt(n, t)
    res = monte_carlo(model, n, t, trajectories, master_seed, threads=threads, record_at=[k], K=k,
                      reducer=lambda tr: tr.steps[-1].copy())
    Z = np.array(res.values, dtype=float).reshape(-1, p)
    zj = Z[:, j]
    tot = Z.sum(axis=1)
    ratios = np.divide(Z[:, i], zj, out=np.zeros_like(zj), where=zj != 0)
    shares = np.divide(Z[:, i], tot, out=np.zeros_like(tot), where=tot != 0)
    alive = tot != 0
    u = lc.direction
    target = float(u[i] / u[j]) if u[j] > 0 else math.inf
    within = float(np.mean(np.abs(shares[alive] - u[i]) <= delta)) if alive.any() else 0.0
    return FrequencyReport(float(ratios.mean()) if ratios.size else math.nan, target, float(u[i]),
                           float(shares[alive].mean()) if alive.any() else math.nan, within, float(delta),
                           int(alive.sum()), int(Z.shape[0]), ratios, shares)


def lindeberg_diagnostic(model: ModelSpec, n: int, T, theta: float, trajectories: int, master_seed: int,
                         threads: int | None = None) -> float:
    """Monte Carlo ``n^-2 sum_{k <= nT} E[|M_k|^2 1{|M_k| > n theta}]``.

    This is the unconditional version of the Lindeberg sum; it should shrink
    as ``n`` grows.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    K = floor_nt(n, T)
    if K < 1:
        return 0.0
    m = model.m
    thr = n * theta

    def reduce(tr):
        Z = tr.steps
        M = Z[1:] - model.control.mean_batch(Z[:-1]) @ m.T
        sq = np.sum(M * M, axis=1)
        return float(np.sum(sq[np.sqrt(sq) > thr]))

    res = monte_carlo(model, n, T, trajectories, master_seed, threads=threads, K=K, reducer=reduce)
    if not res.values:
        raise RuntimeError("every trajectory failed")
    return float(np.mean(res.values)) / (n * n)


@dataclass(frozen=True)
class CheckReport:
    check: str
    model_hash: str
    parameters: dict
    statistic: float | None
    p_value_or_exponent: float | None
    passed: bool
    status: str = "ok"

    def to_dict(self) -> dict:
        def clean(x):
            return None if x is None or (isinstance(x, float) and not math.isfinite(x)) else x

        return {"check": self.check, "model_hash": self.model_hash, "parameters": self.parameters,
                "statistic": clean(self.statistic), "p_value_or_exponent": clean(self.p_value_or_exponent),
                "pass": bool(self.passed), "status": self.status}


def run_suite(model: ModelSpec, n: int = 200, t: float = 1.0, trajectories: int = 1000, master_seed: int = 0,
              k_max: int = 500, growth_trajectories: int = 200, level: float = 0.01,
              threads: int | None = None) -> list[CheckReport]:
    """The standard battery: marginal law, mean identity, growth of the mean, relative frequencies.

    Raises :class:`NotCriticalError` for non-critical models. With fewer
    than two trajectories every statistical check reports
    ``"insufficient samples"`` and fails.
    """
    lc = _critical_coefficients(model)
    h = model_hash(model)
    base = {"n": n, "t": t, "trajectories": trajectories, "master_seed": master_seed}
    names = ["marginal_convergence", "mean_identity", "moment_growth", "relative_frequency"]
    if trajectories < 2 or growth_trajectories < 2:
        return [CheckReport(c, h, base, None, None, False, "insufficient samples") for c in names]
    out = []
    mr = marginal_convergence(model, n, t, trajectories, master_seed, threads)
    if mr.kind == "ks":
        out.append(CheckReport("marginal_convergence", h, {**base, "level": level}, mr.statistic, mr.p_value,
                               mr.p_value > level and mr.failures == 0))
    else:
        out.append(CheckReport("marginal_convergence", h, {**base, "tolerance": 2.0 / n}, mr.statistic, None,
                               mr.statistic <= 2.0 / n and mr.failures == 0, "line"))
    x, failed = projected_samples(model, n, t, trajectories, master_seed, threads)
    se = float(x.std(ddof=1) / math.sqrt(x.size))
    # 2|b|/n absorbs the O(1/n) lattice offset, which dominates when se is 0
    tol = 6 * se + 2 * max(1.0, abs(lc.drift)) / n
    diff = abs(float(x.mean()) - lc.drift * float(t))
    out.append(CheckReport("mean_identity", h, {**base, "tolerance": tol}, diff, None, diff <= tol and failed == 0))
    if lc.drift > 0:
        g = moment_growth_check(model, k_max, growth_trajectories, master_seed, threads=threads)
        r = g.reports["E|Z|"]
        out.append(CheckReport("moment_growth", h, {"k_max": k_max, "trajectories": growth_trajectories,
                                                     "master_seed": master_seed, "target": "E|Z|"},
                               None, r.fitted_exponent, 0.8 <= r.fitted_exponent <= 1.2 and g.failures == 0))
        i = int(np.argmax(lc.direction))
        fr = relative_frequency_check(model, n, t, trajectories, master_seed, i, i, threads=threads)
        out.append(CheckReport("relative_frequency", h, {**base, "type": i, "delta": fr.delta},
                               fr.fraction_within, None, fr.fraction_within >= 0.95))
    else:
        for c in names[2:]:
            out.append(CheckReport(c, h, base, None, None, True, "skipped: zero drift"))
    return out
