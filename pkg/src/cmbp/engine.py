"""Trajectory simulation, scaled step paths and the decomposition functionals.

Every trajectory owns one random stream derived from ``(master_seed,
stream_id)``, so results do not depend on how trajectories are scheduled
across threads.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from . import _backend
from ._encode import ERR_NEGATIVE_CONTROL, ERR_OK, ERR_OVERFLOW
from .model import ModelSpec, implied_g_batch

__all__ = [
    "PopulationOverflowError",
    "NegativeControlError",
    "Trajectory",
    "StepPath",
    "MonteCarloResult",
    "stream_rng",
    "floor_nt",
    "simulate_trajectory",
    "one_step_many",
    "martingale_differences",
    "martingale_step_path",
    "scaled_path",
    "psi_n",
    "psi_limit",
    "v_n",
    "monte_carlo",
    "write_trajectories_csv",
]

# first spawn-key word separates simulation streams from SDE streams
ENGINE_DOMAIN = 0


class PopulationOverflowError(OverflowError):
    """A population count would leave the signed 64-bit range."""


class NegativeControlError(ValueError):
    """The control produced a negative progenitor count."""


def stream_rng(master_seed: int, stream_id: int, domain: int = ENGINE_DOMAIN) -> np.random.Generator:
    """Independent generator for one unit of work (PCG64, SeedSequence spawn key)."""
    if master_seed < 0 or stream_id < 0:
        raise ValueError("seeds and stream ids must be nonnegative")
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(domain), int(stream_id)))
    return np.random.Generator(np.random.PCG64(ss))


def floor_nt(n: int, t) -> int:
    """``floor(n * t)`` computed exactly; floats are read through their decimal repr."""
    if isinstance(t, float):
        t = Fraction(repr(t))
    return math.floor(Fraction(n) * Fraction(t))


@dataclass(frozen=True)
class Trajectory:
    """States ``Z_k`` for ``k`` in ``ks`` (all of ``0..K`` unless thinned)."""

    p: int
    steps: np.ndarray
    ks: np.ndarray
    stream_id: int
    master_seed: int

    @property
    def seed_path(self) -> str:
        return f"{self.master_seed}/{self.stream_id}"

    @property
    def K(self) -> int:
        return int(self.ks[-1])

    @property
    def complete(self) -> bool:
        return self.ks.size == self.K + 1


@dataclass(frozen=True)
class StepPath:
    """Piecewise-constant path on the grid ``k / n``; ``values[k]`` holds on ``[k/n, (k+1)/n)``."""

    n: int
    values: np.ndarray

    def at(self, t) -> np.ndarray:
        k = floor_nt(self.n, t)
        if not 0 <= k < len(self.values):
            raise IndexError(f"t={t} is outside the path (index {k})")
        return self.values[k]

    def sup_distance(self, other: "StepPath") -> float:
        return float(np.max(np.abs(self.values - other.values)))


def _error(code: int, k: int, stream_id: int) -> Exception:
    if code == ERR_OVERFLOW:
        return PopulationOverflowError(f"population overflow at generation {k} (stream {stream_id})")
    if code == ERR_NEGATIVE_CONTROL:
        return NegativeControlError(f"negative control output at generation {k} (stream {stream_id})")
    return RuntimeError(f"kernel error {code} at generation {k}")


def _kernels(model: ModelSpec, backend: str | None):
    choice = backend or _backend.NAME
    if choice == "compiled" and _backend.compiled is not None and model.control.compiled_ok:
        return "compiled"
    if choice not in ("compiled", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    return "python"


_prepared: dict[int, tuple[Any, Any]] = {}


def _prepare(model: ModelSpec):
    em = model.encoded
    hit = _prepared.get(id(em))
    if hit is not None and hit[0] is em:
        return hit[1]
    prep = _backend.compiled.prepare(em)
    if len(_prepared) > 64:
        _prepared.clear()
    _prepared[id(em)] = (em, prep)
    return prep


def _control_fn(model: ModelSpec):
    return model.control.sample if not model.control.compiled_ok else None


def simulate_trajectory(model: ModelSpec, K: int, stream_id: int = 0, master_seed: int = 0,
                        record_at: Sequence[int] | None = None, naive: bool = False,
                        backend: str | None = None) -> Trajectory:
    """Simulate ``Z_0..Z_K``.

    Parameters
    ----------
    record_at : sequence of int, optional
        Generations to keep (default: all). Thinning does not change the
        random draws, only what is stored.
    naive : bool
        Draw every offspring vector separately instead of aggregating per
        type. Same distribution, different random stream.
    backend : {"compiled", "python"}, optional
        Override the import-time kernel choice.

    Raises
    ------
    PopulationOverflowError
        When a count would exceed ``2**63 - 1``.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    if record_at is None:
        ks = np.arange(K + 1, dtype=np.int64)
    else:
        ks = np.unique(np.asarray(record_at, dtype=np.int64))
        if ks.size == 0 or ks[0] < 0 or ks[-1] > K:
            raise ValueError("record_at must be a nonempty subset of 0..K")
    rng = stream_rng(master_seed, stream_id)
    out = np.zeros((ks.size, model.p), dtype=np.int64)
    if _kernels(model, backend) == "compiled":
        code, k = _backend.compiled.run_trajectory(_prepare(model), int(K), rng, ks, out, bool(naive))
    else:
        code, k = _backend.python.run_trajectory(model.encoded, int(K), rng, ks, out, bool(naive),
                                                 _control_fn(model))
    if code != ERR_OK:
        raise _error(code, k, stream_id)
    return Trajectory(model.p, out, ks, int(stream_id), int(master_seed))


def one_step_many(model: ModelSpec, z, replications: int, rng: np.random.Generator,
                  naive: bool = False, backend: str | None = None) -> np.ndarray:
    """``replications`` independent draws of ``Z_{k+1}`` given ``Z_k = z``."""
    z = np.ascontiguousarray(np.asarray(z, dtype=np.int64))
    out = np.zeros((int(replications), model.p), dtype=np.int64)
    if _kernels(model, backend) == "compiled":
        code = _backend.compiled.one_step_many(_prepare(model), z, rng, out, bool(naive))
    else:
        code = _backend.python.one_step_many(model.encoded, z, rng, out, bool(naive), _control_fn(model))
    if code != ERR_OK:
        raise _error(code, 1, -1)
    return out


def _require_complete(traj: Trajectory) -> np.ndarray:
    if not traj.complete:
        raise ValueError("this operation needs every generation recorded")
    return traj.steps.astype(float)


def martingale_differences(traj: Trajectory, model: ModelSpec) -> np.ndarray:
    """``M_k = Z_k - m eps(Z_{k-1})`` for ``k = 1..K``, shape ``(K, p)``."""
    Z = traj.steps
    if Z.shape[0] < 2:
        raise ValueError("need at least two generations")
    if not traj.complete:
        raise ValueError("this operation needs every generation recorded")
    eps = model.control.mean_batch(Z[:-1])
    return Z[1:] - eps @ model.m.T


def martingale_step_path(traj: Trajectory, model: ModelSpec, n: int) -> StepPath:
    """``n^{-1} (Z_0 + sum_{k <= floor(nt)} M_k)`` on the grid."""
    Z = _require_complete(traj)
    M = martingale_differences(traj, model)
    cum = np.vstack([Z[:1], Z[:1] + np.cumsum(M, axis=0)])
    return StepPath(n, cum / n)


def scaled_path(traj: Trajectory, n: int) -> StepPath:
    """``n^{-1} Z_{floor(nt)}``."""
    if n < 1:
        raise ValueError("n must be positive")
    return StepPath(n, _require_complete(traj) / n)


def psi_n(f: StepPath, n: int, model: ModelSpec) -> StepPath:
    """Discrete mapping applied to a lattice step path ``f``.

    ``Psi_n(f)(k/n) = mt^k f(0) + sum_{j=1}^k mt^{k-j} (f(j/n) - f((j-1)/n) + m alpha / n)``
    with ``mt = m Lambda``, evaluated by the recursion
    ``Psi_k = mt Psi_{k-1} + (f_k - f_{k-1} + m alpha / n)``.
    """
    if f.n != n:
        raise ValueError("psi_n only accepts step paths on the same 1/n lattice")
    mt = model.m_tilde
    drift = model.m @ model.alpha / n
    F = np.asarray(f.values, dtype=float)
    out = np.empty_like(F)
    out[0] = F[0]
    for k in range(1, len(F)):
        out[k] = mt @ out[k - 1] + (F[k] - F[k - 1] + drift)
    return StepPath(n, out)


def psi_limit(f, model: ModelSpec, pi: np.ndarray | None = None, t=None) -> np.ndarray:
    """``Pi (f(t) + t m alpha)`` pointwise.

    ``f`` is either a :class:`StepPath` (evaluated at its grid times, or at
    ``t`` if given) or a callable of ``t`` (``t`` required).
    """
    if pi is None:
        from .model import classify

        rep = classify(model)
        if rep.spectral is None:
            raise ValueError(f"no spectral projector: {rep.reason}")
        pi = rep.spectral.pi
    ma = model.m @ model.alpha
    if isinstance(f, StepPath):
        if t is None:
            times = np.arange(len(f.values)) / f.n
            return (f.values + times[:, None] * ma) @ pi.T
        return pi @ (f.at(t) + float(t) * ma)
    if t is None:
        raise ValueError("t is required for callable paths")
    return pi @ (np.asarray(f(t), dtype=float) + float(t) * ma)


def v_n(traj: Trajectory, n: int, model: ModelSpec) -> StepPath:
    """``V_k = n^{-1} sum_{j=1}^k mt^{k-j} m g(Z_{j-1})`` via ``V_k = mt V_{k-1} + m g(Z_{k-1}) / n``."""
    Z = _require_complete(traj)
    mg = implied_g_batch(model, traj.steps[:-1]) @ model.m.T / n
    mt = model.m_tilde
    out = np.zeros_like(Z)
    for k in range(1, len(Z)):
        out[k] = mt @ out[k - 1] + mg[k - 1]
    return StepPath(n, out)


@dataclass
class MonteCarloResult:
    """Per-trajectory reduced values in ascending ``stream_id`` order."""

    values: list
    stream_ids: list
    failures: list = field(default_factory=list)

    @property
    def n_ok(self) -> int:
        return len(self.values)

    @property
    def n_failed(self) -> int:
        return len(self.failures)


def default_threads() -> int:
    return os.cpu_count() or 1


def monte_carlo(model: ModelSpec, n: int, T, trajectories: int, master_seed: int,
                reducer: Callable[[Trajectory], Any] | None = None, threads: int | None = None,
                record_at: Sequence[int] | None = None, K: int | None = None,
                naive: bool = False, backend: str | None = None) -> MonteCarloResult:
    """Run ``trajectories`` independent paths of ``ceil(n T)`` steps.

    Stream ids are ``0..trajectories-1``. Overflowing trajectories are
    listed in ``failures`` and never silently dropped. The result does not
    depend on ``threads``.
    """
    if trajectories < 1:
        raise ValueError("need at least one trajectory")
    if K is None:
        K = math.ceil(Fraction(n) * (Fraction(repr(T)) if isinstance(T, float) else Fraction(T)))
    reducer = reducer or (lambda tr: tr)
    threads = max(1, int(threads or default_threads()))

    def work(sid: int):
        try:
            tr = simulate_trajectory(model, K, sid, master_seed, record_at, naive, backend)
        except (PopulationOverflowError, NegativeControlError) as exc:
            return sid, None, str(exc)
        return sid, reducer(tr), None

    if threads == 1:
        results = [work(s) for s in range(trajectories)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, range(trajectories)))
    res = MonteCarloResult([], [])
    for sid, val, err in sorted(results, key=lambda r: r[0]):
        if err is None:
            res.values.append(val)
            res.stream_ids.append(sid)
        else:
            res.failures.append((sid, err))
    return res


def write_trajectories_csv(trajs: Sequence[Trajectory], path=None) -> str:
    """CSV with header ``trajectory_id,k,Z_1..Z_p``; returns the text, writes it if ``path`` is given."""
    if not trajs:
        raise ValueError("no trajectories to write")
    p = trajs[0].p
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trajectory_id", "k"] + [f"Z_{i + 1}" for i in range(p)])
    for tr in trajs:
        for k, row in zip(tr.ks.tolist(), tr.steps.tolist()):
            w.writerow([tr.stream_id, k] + row)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
