"""Discrete multivariate laws on integer lattices.

Every law is a tree of independent pieces (points, finite tables, Poisson
coordinates, Bernoulli-scaled vectors, products and integer shifts), which is
what allows exact analytic moments and aggregate sampling of i.i.d. sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from numbers import Real
from typing import Sequence

import numpy as np

__all__ = [
    "DiscreteLaw",
    "MomentSummary",
    "deterministic",
    "table",
    "poisson",
    "bernoulli_vector",
    "product",
    "shifted",
    "moments",
    "sample",
    "sample_sum",
    "sample_many",
    "fourth_moment_random_sum",
    "law_from_dict",
    "pad",
]

KINDS = ("deterministic", "table", "poisson", "bernoulli_vector", "product", "shifted")


@dataclass(frozen=True)
class MomentSummary:
    mean: np.ndarray
    cov: np.ndarray
    fourth_central: np.ndarray


@dataclass(frozen=True, eq=False)
class DiscreteLaw:
    """Immutable description of a law on Z^dim.

    Use the module-level constructors rather than instantiating directly.
    """

    kind: str
    dim: int
    point: np.ndarray | None = None
    support: np.ndarray | None = None
    probs: np.ndarray | None = None
    rates: np.ndarray | None = None
    vec: np.ndarray | None = None
    q: float | None = None
    parts: tuple["DiscreteLaw", ...] = field(default=())
    base: "DiscreteLaw | None" = None
    offset: np.ndarray | None = None

    def __repr__(self) -> str:
        return f"DiscreteLaw({self.to_dict()!r})"

    @cached_property
    def summary(self) -> MomentSummary:
        return _moments(self)

    @cached_property
    def encoded(self):
        from ._encode import encode_law

        return encode_law(self)

    @property
    def mean(self) -> np.ndarray:
        return self.summary.mean

    def min_support(self) -> np.ndarray:
        """Coordinatewise infimum of the support (``-inf`` never occurs)."""
        k = self.kind
        if k == "deterministic":
            return self.point.astype(float)
        if k == "table":
            return self.support.min(axis=0).astype(float)
        if k == "poisson":
            return np.zeros(self.dim)
        if k == "bernoulli_vector":
            lo = np.minimum(self.vec, 0) if self.q > 0 else np.zeros(self.dim)
            return (lo if self.q < 1 else self.vec).astype(float)
        if k == "product":
            return np.concatenate([part.min_support() for part in self.parts])
        return self.base.min_support() + self.offset

    def to_dict(self) -> dict:
        k = self.kind
        if k == "deterministic":
            params = {"point": self.point.tolist()}
        elif k == "table":
            params = {"support": self.support.tolist(), "probs": self.probs.tolist()}
        elif k == "poisson":
            params = {"rates": self.rates.tolist()}
        elif k == "bernoulli_vector":
            params = {"vec": self.vec.tolist(), "q": float(self.q)}
        elif k == "product":
            params = {"parts": [part.to_dict() for part in self.parts]}
        else:
            params = {"base": self.base.to_dict(), "offset": self.offset.tolist()}
        return {"kind": k, "params": params}


def _int_vector(x, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty vector")
    if not np.all(np.equal(np.mod(arr.astype(float), 1), 0)):
        raise ValueError(f"{name} must have integer entries")
    return arr.astype(np.int64)


def deterministic(point) -> DiscreteLaw:
    pt = _int_vector(point, "point")
    return DiscreteLaw("deterministic", pt.size, point=pt)


def table(support, probs) -> DiscreteLaw:
    """Finite law; ``support`` is a list of points (or of scalars for dim 1)."""
    sup = np.asarray(support)
    if sup.ndim == 1:
        sup = sup[:, None]
    if sup.ndim != 2 or sup.shape[0] == 0:
        raise ValueError("support must be a nonempty list of points")
    if not np.all(np.equal(np.mod(sup.astype(float), 1), 0)):
        raise ValueError("support points must be integer vectors")
    pr = np.asarray(probs, dtype=float)
    if pr.shape != (sup.shape[0],):
        raise ValueError("probs must have one entry per support point")
    if np.any(pr < 0) or not np.all(np.isfinite(pr)):
        raise ValueError("probs must be nonnegative")
    if abs(pr.sum() - 1.0) > 1e-12:
        raise ValueError(f"probs sum to {pr.sum()!r}, not 1")
    pr = pr / pr.sum()
    return DiscreteLaw("table", sup.shape[1], support=sup.astype(np.int64), probs=pr)


def poisson(rates) -> DiscreteLaw:
    r = np.atleast_1d(np.asarray(rates, dtype=float))
    if r.ndim != 1 or r.size == 0 or np.any(r < 0) or not np.all(np.isfinite(r)):
        raise ValueError("rates must be a nonempty vector of finite nonnegative reals")
    return DiscreteLaw("poisson", r.size, rates=r)


def bernoulli_vector(vec, q: float) -> DiscreteLaw:
    """``vec`` with probability ``q``, the zero vector otherwise."""
    v = _int_vector(vec, "vec")
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ValueError("q must lie in [0, 1]")
    return DiscreteLaw("bernoulli_vector", v.size, vec=v, q=q)


def product(parts: Sequence[DiscreteLaw]) -> DiscreteLaw:
    parts = tuple(parts)
    if not parts:
        raise ValueError("product needs at least one component")
    for part in parts:
        if part.dim != 1:
            raise ValueError("product components must be scalar (dim 1) laws")
    return DiscreteLaw("product", len(parts), parts=parts)


def shifted(base: DiscreteLaw, offset) -> DiscreteLaw:
    off = _int_vector(offset, "offset")
    if off.size != base.dim:
        raise ValueError("offset dimension does not match base law")
    return DiscreteLaw("shifted", base.dim, base=base, offset=off)


def _moments(law: DiscreteLaw) -> MomentSummary:
    d = law.dim
    k = law.kind
    if k == "deterministic":
        return MomentSummary(law.point.astype(float), np.zeros((d, d)), np.zeros(d))
    if k == "table":
        s = law.support.astype(float)
        mu = law.probs @ s
        c = s - mu
        cov = (c * law.probs[:, None]).T @ c
        return MomentSummary(mu, (cov + cov.T) / 2, law.probs @ c**4)
    if k == "poisson":
        r = law.rates
        # central moments of Poisson(r): var r, fourth r(1 + 3r)
        return MomentSummary(r.copy(), np.diag(r), r * (1 + 3 * r))
    if k == "bernoulli_vector":
        q, v = law.q, law.vec.astype(float)
        # B - q for B ~ Bernoulli(q): E(B-q)^2 = q(1-q), E(B-q)^4 = q(1-q)(1-3q+3q^2)
        var_b = q * (1 - q)
        return MomentSummary(q * v, var_b * np.outer(v, v), var_b * (1 - 3 * q + 3 * q * q) * v**4)
    if k == "product":
        ms = [part.summary for part in law.parts]
        return MomentSummary(
            np.concatenate([m.mean for m in ms]),
            np.diag([float(m.cov[0, 0]) for m in ms]),
            np.concatenate([m.fourth_central for m in ms]),
        )
    # integer shift moves the mean only
    b = law.base.summary
    return MomentSummary(b.mean + law.offset, b.cov.copy(), b.fourth_central.copy())


def pad(law: DiscreteLaw, dim: int) -> DiscreteLaw:
    """Same law with zero coordinates appended up to ``dim``."""
    extra = dim - law.dim
    if extra < 0:
        raise ValueError("cannot pad to a smaller dimension")
    if extra == 0:
        return law
    k = law.kind
    if k == "deterministic":
        return deterministic(np.concatenate([law.point, np.zeros(extra, dtype=np.int64)]))
    if k == "table":
        return table(np.hstack([law.support, np.zeros((law.support.shape[0], extra), dtype=np.int64)]), law.probs)
    if k == "poisson":
        return poisson(np.concatenate([law.rates, np.zeros(extra)]))
    if k == "bernoulli_vector":
        return bernoulli_vector(np.concatenate([law.vec, np.zeros(extra, dtype=np.int64)]), law.q)
    if k == "product":
        return product(list(law.parts) + [deterministic([0])] * extra)
    return shifted(pad(law.base, dim), np.concatenate([law.offset, np.zeros(extra, dtype=np.int64)]))


def moments(law: DiscreteLaw) -> MomentSummary:
    return law.summary


def sample(law: DiscreteLaw, rng: np.random.Generator) -> np.ndarray:
    """One draw, consuming ``rng`` exactly as the simulation kernels do."""
    return sample_sum(law, 1, rng)


def sample_sum(law: DiscreteLaw, count: int, rng: np.random.Generator, aggregate: bool = True) -> np.ndarray:
    """Sum of ``count`` i.i.d. copies of ``law``.

    With ``aggregate`` the sum is drawn in one go (Poisson additivity,
    multinomial counts over table support, binomial thinning); otherwise each
    copy is drawn separately. Both give the same distribution.
    """
    from . import _pykernels

    out = np.zeros(law.dim, dtype=np.int64)
    _pykernels.add_law_sum(law.encoded, 0, int(count), rng, out, not aggregate)
    return out


def sample_many(law: DiscreteLaw, size: int, rng: np.random.Generator) -> np.ndarray:
    """``size`` independent draws as a ``(size, dim)`` array (vectorized)."""
    k = law.kind
    if k == "deterministic":
        return np.tile(law.point, (size, 1))
    if k == "table":
        idx = rng.choice(law.probs.size, size=size, p=law.probs)
        return law.support[idx]
    if k == "poisson":
        return rng.poisson(law.rates, size=(size, law.dim)).astype(np.int64)
    if k == "bernoulli_vector":
        b = (rng.random(size) < law.q).astype(np.int64)
        return b[:, None] * law.vec[None, :]
    if k == "product":
        return np.hstack([sample_many(part, size, rng) for part in law.parts])
    return sample_many(law.base, size, rng) + law.offset


def fourth_moment_random_sum(sigma2_A, zeta_A, mu_B, gamma_B):
    """Fourth moment of a random sum of i.i.d. zero-mean summands.

    For ``S = A_1 + ... + A_B`` with ``A_i`` i.i.d., ``E A = 0``,
    ``Var A = sigma2_A``, ``E A^4 = zeta_A`` and ``B`` an independent count
    with mean ``mu_B`` and variance ``gamma_B``::

        E S^4 = 3 sigma2_A^2 (gamma_B + mu_B^2) + (zeta_A - 3 sigma2_A^2) mu_B

    Works with ``Fraction`` inputs for exact arithmetic.
    """
    for name, val in (("sigma2_A", sigma2_A), ("mu_B", mu_B), ("gamma_B", gamma_B)):
        if not isinstance(val, (Real, Fraction)) or val < 0:
            raise ValueError(f"{name} must be a nonnegative real, got {val!r}")
    if not isinstance(zeta_A, (Real, Fraction)) or zeta_A < sigma2_A * sigma2_A:
        raise ValueError("zeta_A must be at least sigma2_A**2")
    s2 = sigma2_A * sigma2_A
    return 3 * s2 * (gamma_B + mu_B * mu_B) + (zeta_A - 3 * s2) * mu_B


def law_from_dict(d: dict) -> DiscreteLaw:
    if not isinstance(d, dict) or set(d) != {"kind", "params"}:
        raise ValueError(f"a law needs exactly the keys 'kind' and 'params', got {d!r}")
    kind, params = d["kind"], d["params"]
    expected = {
        "deterministic": {"point"},
        "table": {"support", "probs"},
        "poisson": {"rates"},
        "bernoulli_vector": {"vec", "q"},
        "product": {"parts"},
        "shifted": {"base", "offset"},
    }
    if kind not in expected:
        raise ValueError(f"unknown law kind {kind!r}")
    if not isinstance(params, dict) or set(params) != expected[kind]:
        raise ValueError(f"law kind {kind!r} takes params {sorted(expected[kind])}, got {params!r}")
    if kind == "deterministic":
        return deterministic(params["point"])
    if kind == "table":
        return table(params["support"], params["probs"])
    if kind == "poisson":
        return poisson(params["rates"])
    if kind == "bernoulli_vector":
        return bernoulli_vector(params["vec"], params["q"])
    if kind == "product":
        return product([law_from_dict(x) for x in params["parts"]])
    return shifted(law_from_dict(params["base"]), params["offset"])
