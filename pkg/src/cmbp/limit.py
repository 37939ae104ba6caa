"""The one-dimensional limit diffusion ``dX = b dt + sqrt(s2 X^+) dW``, ``X_0 = 0``.

The population-level limit is the ray ``X_t * u``; integrate the scalar
equation and map it with :func:`limit_ray_path`.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _backend
from .engine import stream_rng

__all__ = [
    "SdePath",
    "GammaMarginal",
    "euler_maruyama",
    "euler_maruyama_terminal",
    "gamma_marginal",
    "limit_ray_path",
    "write_sde_csv",
]

SDE_DOMAIN = 1


@dataclass(frozen=True)
class SdePath:
    dt: float
    values: np.ndarray
    seed: int
    path_id: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dt


@dataclass(frozen=True)
class GammaMarginal:
    """Law of ``X_t``: Gamma(shape, rate) or, with no noise, the point ``b t``."""

    kind: str
    shape: float
    rate: float
    t: float
    drift: float = 0.0

    @property
    def mean(self) -> float:
        return self.drift * self.t if self.kind == "degenerate_line" else self.shape / self.rate

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "degenerate_line":
            return (x >= self.drift * self.t).astype(float)
        return stats.gamma.cdf(x, a=self.shape, scale=1.0 / self.rate)

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "degenerate_line":
            return np.full(size, self.drift * self.t)
        return rng.gamma(self.shape, 1.0 / self.rate, size=size)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "shape": self.shape, "rate": self.rate, "t": self.t, "mean": self.mean}


def _n_steps(T: float, dt: float) -> int:
    if dt <= 0 or T < dt:
        raise ValueError("need dt > 0 and T >= dt")
    j = round(T / dt)
    if abs(j * dt - T) > 1e-9 * T:
        raise ValueError(f"T={T} is not a whole number of steps of dt={dt}")
    return int(j)


def _check(b: float, sigma2: float) -> None:
    if not (math.isfinite(b) and math.isfinite(sigma2)) or sigma2 < 0:
        raise ValueError("need finite drift and a nonnegative diffusion coefficient")


def euler_maruyama(b: float, sigma2: float, T: float, dt: float, seed: int, path_id: int = 0,
                   backend: str | None = None) -> SdePath:
    """One full-truncation Euler-Maruyama path on ``0, dt, ..., T``.

    ``X_{j+1} = X_j + b dt + sqrt(sigma2 max(X_j, 0)) sqrt(dt) N_j``; the
    normals come from the stream ``(seed, path_id)``.
    """
    _check(b, sigma2)
    J = _n_steps(T, dt)
    rngs = [stream_rng(seed, path_id, SDE_DOMAIN)]
    full = np.zeros((1, J + 1))
    if (backend or _backend.NAME) == "compiled" and _backend.compiled is not None:
        _backend.compiled.euler_maruyama_paths(float(b), float(sigma2), float(dt), J, rngs, full, None)
    else:
        _backend.python.euler_maruyama_paths(float(b), float(sigma2), float(dt), J, rngs, full, True)
    return SdePath(float(dt), full[0], int(seed), int(path_id))


def euler_maruyama_terminal(b: float, sigma2: float, T: float, dt: float, seed: int, n_paths: int,
                            backend: str | None = None) -> np.ndarray:
    """Terminal values ``X_T`` of paths ``0..n_paths-1``; path ``i`` matches ``euler_maruyama(..., path_id=i)``."""
    _check(b, sigma2)
    J = _n_steps(T, dt)
    if n_paths < 1:
        raise ValueError("need at least one path")
    rngs = [stream_rng(seed, i, SDE_DOMAIN) for i in range(n_paths)]
    out = np.zeros(n_paths)
    if (backend or _backend.NAME) == "compiled" and _backend.compiled is not None:
        _backend.compiled.euler_maruyama_paths(float(b), float(sigma2), float(dt), J, rngs, None, out)
    else:
        _backend.python.euler_maruyama_paths(float(b), float(sigma2), float(dt), J, rngs, out, False)
    return out


def gamma_marginal(b: float, sigma2: float, t: float) -> GammaMarginal:
    """Shape ``2 b / sigma2`` and rate ``2 / (sigma2 t)``; a point mass at ``b t`` when ``sigma2 == 0``."""
    if t <= 0:
        raise ValueError("t must be positive")
    if b < 0 or sigma2 < 0:
        raise ValueError("need b >= 0 and sigma2 >= 0")
    if sigma2 == 0:
        return GammaMarginal("degenerate_line", math.nan, math.nan, float(t), float(b))
    if b == 0:
        # shape 0: the solution started at 0 stays there
        return GammaMarginal("degenerate_line", math.nan, math.nan, float(t), 0.0)
    return GammaMarginal("gamma", 2.0 * b / sigma2, 2.0 / (sigma2 * t), float(t), float(b))


def limit_ray_path(sde: SdePath | np.ndarray, direction) -> np.ndarray:
    """Population-level limit ``X_t * u``, shape ``(len(values), p)``."""
    vals = sde.values if isinstance(sde, SdePath) else np.asarray(sde, dtype=float)
    return np.outer(vals, np.asarray(direction, dtype=float))


def write_sde_csv(paths, path=None) -> str:
    """CSV with header ``path_id,j,t,X``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path_id", "j", "t", "X"])
    for sp in paths:
        for j, (t, x) in enumerate(zip(sp.times.tolist(), sp.values.tolist())):
            w.writerow([sp.path_id, j, repr(t), repr(x)])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
