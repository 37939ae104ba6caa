"""Controlled multi-type branching process models.

A model pairs ``p`` offspring laws with a control law ``phi(z)`` giving the
number of progenitors of each type, plus a user-declared linear part
``(Lambda, alpha)`` of the control mean::

    E phi(z) = Lambda z + alpha + g(z)

``g`` is never fitted; it is whatever residual the declaration leaves.
"""

from __future__ import annotations

import enum
import hashlib
import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from . import linalg
from ._encode import (
    CTRL_AFFINE,
    CTRL_MIGRATION_FREE,
    CTRL_MIGRATION_GATED,
    CTRL_PROMISCUOUS,
    CTRL_TABLE,
    EncodedModel,
    encode_laws,
)
from .laws import DiscreteLaw, MomentSummary, law_from_dict

__all__ = [
    "ControlLaw",
    "ModelSpec",
    "Criticality",
    "CriticalityReport",
    "LimitCoefficients",
    "DiagnosticsReport",
    "NotCriticalError",
    "identity_control",
    "affine_control",
    "append_unit_control",
    "migration_control",
    "promiscuous_control",
    "selffert_control",
    "table_control",
    "odot",
    "control_moments",
    "conditional_mean",
    "conditional_cov",
    "implied_g",
    "classify",
    "classify_matrix",
    "limit_coefficients",
    "hypothesis_diagnostics",
    "model_to_dict",
    "model_from_dict",
    "model_hash",
]

DEFAULT_BAND = 1e-9


class NotCriticalError(ValueError):
    pass


# --------------------------------------------------------------------------
# control laws


@dataclass(frozen=True, eq=False)
class ControlLaw:
    """Law of the progenitor vector ``phi(z)`` given the state ``z``.

    Deterministic kinds carry an integer matrix and shift (``phi = A z + b``,
    optionally forced to zero at the origin). ``migration`` adds one draw of a
    signed law, coordinate ``i`` only when ``z_i > 0`` if ``gated``. ``table``
    maps listed states to laws and defers to ``fallback`` elsewhere.
    """

    kind: str
    p: int
    matrix: np.ndarray | None = None
    shift: np.ndarray | None = None
    zero_at_origin: bool = False
    law: DiscreteLaw | None = None
    gated: bool = True
    entries: Mapping[tuple, DiscreteLaw] = field(default_factory=dict)
    fallback: "ControlLaw | None" = None

    @property
    def is_affine(self) -> bool:
        return self.matrix is not None

    @property
    def compiled_ok(self) -> bool:
        return self.kind != "table"

    def moments(self, z) -> MomentSummary:
        z = _state(z, self.p)
        p = self.p
        zero_cov, zero4 = np.zeros((p, p)), np.zeros(p)
        if self.is_affine:
            if self.zero_at_origin and not z.any():
                return MomentSummary(np.zeros(p), zero_cov, zero4)
            return MomentSummary((self.matrix @ z + self.shift).astype(float), zero_cov, zero4)
        if self.kind == "mating_promiscuous":
            return MomentSummary(np.array([z[0] * min(1, z[1]), 1.0]), zero_cov, zero4)
        if self.kind == "migration":
            s = self.law.summary
            gate = (z > 0).astype(float) if self.gated else np.ones(p)
            return MomentSummary(z + gate * s.mean, np.outer(gate, gate) * s.cov, gate * s.fourth_central)
        key = tuple(int(x) for x in z)
        if key in self.entries:
            return self.entries[key].summary
        if self.fallback is not None:
            return self.fallback.moments(z)
        raise ValueError(f"state {key} is outside the control table and no fallback is set")

    def mean_batch(self, Z: np.ndarray) -> np.ndarray:
        """``E phi(z)`` for each row of ``Z``."""
        Z = np.asarray(Z)
        if self.is_affine:
            out = Z @ self.matrix.T.astype(float) + self.shift
            if self.zero_at_origin:
                out[~Z.any(axis=1)] = 0.0
            return out
        if self.kind == "mating_promiscuous":
            return np.column_stack([Z[:, 0] * np.minimum(1, Z[:, 1]), np.ones(len(Z))]).astype(float)
        if self.kind == "migration":
            mu = self.law.summary.mean
            gate = (Z > 0) if self.gated else np.ones_like(Z, dtype=bool)
            return Z + gate * mu
        return np.array([self.moments(z).mean for z in Z]).reshape(len(Z), self.p)

    def sample(self, z, rng: np.random.Generator) -> np.ndarray:
        """One draw of ``phi(z)``; used by the pure-Python path for tables and their fallbacks."""
        from .laws import sample

        z = np.asarray(z, dtype=np.int64)
        key = tuple(int(x) for x in z)
        if self.kind == "table":
            if key in self.entries:
                return sample(self.entries[key], rng)
            if self.fallback is None:
                raise ValueError(f"state {key} is outside the control table and no fallback is set")
            return self.fallback.sample(z, rng)
        if self.kind == "migration":
            gate = (z > 0) if self.gated else np.ones(self.p, dtype=bool)
            # always one draw, as in the kernels, so streams stay aligned
            return z + gate * sample(self.law, rng)
        return self.moments(z).mean.astype(np.int64)

    def to_dict(self) -> dict:
        k = self.kind
        if k in ("identity", "append_unit"):
            params = {"p": self.p}
        elif k == "affine_deterministic":
            params = {
                "matrix": self.matrix.tolist(),
                "shift": self.shift.tolist(),
                "zero_at_origin": bool(self.zero_at_origin),
            }
        elif k == "migration":
            params = {"law": self.law.to_dict(), "gated": bool(self.gated)}
        elif k in ("mating_promiscuous", "mating_selffert"):
            params = {}
        else:
            params = {
                "p": self.p,
                "entries": [{"z": list(key), "law": law.to_dict()} for key, law in sorted(self.entries.items())],
                "fallback": None if self.fallback is None else self.fallback.to_dict(),
            }
        return {"kind": k, "params": params}


def _state(z, p: int) -> np.ndarray:
    z = np.asarray(z)
    if z.shape != (p,):
        raise ValueError(f"state must have shape ({p},), got {z.shape}")
    if np.any(z < 0) or not np.all(np.equal(np.mod(z, 1), 0)):
        raise ValueError("state must be a nonnegative integer vector")
    return z.astype(np.int64)


def _grid(p: int) -> np.ndarray:
    # small exhaustive grid, coarser for larger p
    side = 6 if p <= 2 else 4 if p <= 4 else 2
    return np.array(list(itertools.product(range(side), repeat=p)), dtype=np.int64)


def affine_control(matrix, shift, zero_at_origin: bool = False, _kind: str = "affine_deterministic") -> ControlLaw:
    """``phi(z) = matrix @ z + shift`` (zero at the origin if requested).

    Entries must be integers; nonnegativity of the output is checked on a
    state grid at construction and again at every simulated step.
    """
    A = np.asarray(matrix, dtype=float)
    b = np.asarray(shift, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or b.shape != (A.shape[0],):
        raise ValueError("affine control needs a square matrix and a matching shift")
    if not (np.all(np.mod(A, 1) == 0) and np.all(np.mod(b, 1) == 0)):
        raise ValueError("affine control entries must be integers so outputs stay integer")
    A = A.astype(np.int64)
    b = b.astype(np.int64)
    grid = _grid(A.shape[0])
    out = grid @ A.T + b
    if zero_at_origin:
        out = out[grid.any(axis=1)]
    if np.any(out < 0):
        raise ValueError("affine control produces negative progenitor counts on the validation grid")
    return ControlLaw(_kind, A.shape[0], matrix=A, shift=b, zero_at_origin=bool(zero_at_origin))


def identity_control(p: int) -> ControlLaw:
    return affine_control(np.eye(p, dtype=np.int64), np.zeros(p, dtype=np.int64), _kind="identity")


def append_unit_control(p: int) -> ControlLaw:
    """``phi(z) = (z_1, ..., z_{p-1}, 1)``: the last type is a single immigration unit."""
    if p < 2:
        raise ValueError("append_unit needs at least two types")
    A = np.eye(p, dtype=np.int64)
    A[-1, -1] = 0
    b = np.zeros(p, dtype=np.int64)
    b[-1] = 1
    return affine_control(A, b, _kind="append_unit")


def selffert_control() -> ControlLaw:
    """Two-sex mating with ``L(f, m) = f + m`` plus one immigration unit."""
    return affine_control([[1, 1], [0, 0]], [0, 1], _kind="mating_selffert")


def promiscuous_control() -> ControlLaw:
    """Two-sex mating with ``L(f, m) = f * min(1, m)`` plus one immigration unit."""
    return ControlLaw("mating_promiscuous", 2)


def migration_control(law: DiscreteLaw, gated: bool = True) -> ControlLaw:
    """``phi(z) = z + M`` with ``M`` drawn from ``law``.

    Gated migration acts on coordinate ``i`` only when ``z_i > 0`` and may
    remove at most one individual; ungated migration must be nonnegative.
    """
    lo = law.min_support()
    if gated and np.any(lo < -1):
        raise ValueError("gated migration may remove at most one individual per type")
    if not gated and np.any(lo < 0):
        raise ValueError("ungated migration must be nonnegative (it also acts on empty types)")
    return ControlLaw("migration", law.dim, law=law, gated=bool(gated))


def table_control(p: int, entries: Mapping[Sequence[int], DiscreteLaw], fallback: ControlLaw | None = None) -> ControlLaw:
    """Explicit per-state control laws; runs on the pure-Python kernels only."""
    table: dict[tuple, DiscreteLaw] = {}
    for key, law in entries.items():
        key = tuple(int(x) for x in key)
        if len(key) != p or min(key) < 0:
            raise ValueError(f"table state {key} is not in Z_+^{p}")
        if law.dim != p or np.any(law.min_support() < 0):
            raise ValueError(f"control law at {key} must be a nonnegative law of dimension {p}")
        table[key] = law
    if fallback is not None and fallback.p != p:
        raise ValueError("fallback control dimension mismatch")
    return ControlLaw("table", p, entries=table, fallback=fallback)


def control_from_dict(d: dict) -> ControlLaw:
    if not isinstance(d, dict) or set(d) != {"kind", "params"}:
        raise ValueError(f"a control needs exactly the keys 'kind' and 'params', got {d!r}")
    kind, params = d["kind"], d["params"]
    expected = {
        "identity": {"p"},
        "append_unit": {"p"},
        "affine_deterministic": {"matrix", "shift", "zero_at_origin"},
        "migration": {"law", "gated"},
        "mating_promiscuous": set(),
        "mating_selffert": set(),
        "table": {"p", "entries", "fallback"},
    }
    if kind not in expected:
        raise ValueError(f"unknown control kind {kind!r}")
    if not isinstance(params, dict) or set(params) != expected[kind]:
        raise ValueError(f"control kind {kind!r} takes params {sorted(expected[kind])}, got {params!r}")
    if kind == "identity":
        return identity_control(int(params["p"]))
    if kind == "append_unit":
        return append_unit_control(int(params["p"]))
    if kind == "affine_deterministic":
        return affine_control(params["matrix"], params["shift"], bool(params["zero_at_origin"]))
    if kind == "migration":
        return migration_control(law_from_dict(params["law"]), bool(params["gated"]))
    if kind == "mating_promiscuous":
        return promiscuous_control()
    if kind == "mating_selffert":
        return selffert_control()
    fb = params["fallback"]
    entries = {}
    for item in params["entries"]:
        if set(item) != {"z", "law"}:
            raise ValueError(f"table entries take keys 'z' and 'law', got {sorted(item)}")
        entries[tuple(item["z"])] = law_from_dict(item["law"])
    return table_control(int(params["p"]), entries, None if fb is None else control_from_dict(fb))


# --------------------------------------------------------------------------
# model


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Complete description of a controlled branching process.

    Parameters
    ----------
    p : int
        Number of types.
    offspring : tuple of DiscreteLaw
        Law of the offspring vector of one type-``i`` progenitor.
    control : ControlLaw
    Lambda, alpha : array_like
        Declared linear part of the control mean.
    z0 : DiscreteLaw
        Law of the initial population.
    non_explosion_assumed : bool
        The diffusion limit needs ``P(|Z_k| <= B) -> 0`` for every bound ``B``
        whenever the residual ``g`` is not identically zero. This is a tail
        property of the law and is taken on trust, never tested.
    """

    p: int
    offspring: tuple[DiscreteLaw, ...]
    control: ControlLaw
    Lambda: np.ndarray
    alpha: np.ndarray
    z0: DiscreteLaw
    name: str = "custom"
    non_explosion_assumed: bool = True

    def __post_init__(self) -> None:
        p = self.p
        if not 1 <= p <= linalg.MAX_DIM:
            raise ValueError(f"number of types must be in 1..{linalg.MAX_DIM}")
        object.__setattr__(self, "offspring", tuple(self.offspring))
        object.__setattr__(self, "Lambda", np.array(self.Lambda, dtype=float).reshape(p, p))
        object.__setattr__(self, "alpha", np.array(self.alpha, dtype=float).reshape(p))
        if len(self.offspring) != p:
            raise ValueError(f"need {p} offspring laws, got {len(self.offspring)}")
        for i, law in enumerate(self.offspring):
            if law.dim != p:
                raise ValueError(f"offspring law {i} has dimension {law.dim}, expected {p}")
            if np.any(law.min_support() < 0):
                raise ValueError(f"offspring law {i} puts mass on negative counts")
        if self.control.p != p:
            raise ValueError("control dimension does not match the number of types")
        if self.z0.dim != p or np.any(self.z0.min_support() < 0):
            raise ValueError("initial law must be a nonnegative law of dimension p")
        if not (np.all(np.isfinite(self.Lambda)) and np.all(np.isfinite(self.alpha))):
            raise ValueError("Lambda and alpha must be finite")

    @cached_property
    def m(self) -> np.ndarray:
        """Offspring mean matrix; column ``i`` is the mean offspring of type ``i``."""
        return np.column_stack([law.summary.mean for law in self.offspring])

    @cached_property
    def Sigma(self) -> np.ndarray:
        """Stack of offspring covariance matrices, shape ``(p, p, p)``."""
        return np.stack([law.summary.cov for law in self.offspring])

    @cached_property
    def zeta(self) -> np.ndarray:
        """``zeta[i, l]``: fourth central moment of coordinate ``l`` of type ``i`` offspring."""
        return np.stack([law.summary.fourth_central for law in self.offspring])

    @cached_property
    def m_tilde(self) -> np.ndarray:
        return self.m @ self.Lambda

    @cached_property
    def encoded(self) -> EncodedModel:
        c = self.control
        laws = list(self.offspring) + [self.z0]
        if c.kind == "migration":
            laws.append(c.law)
            kind = CTRL_MIGRATION_GATED if c.gated else CTRL_MIGRATION_FREE
        elif c.kind == "mating_promiscuous":
            kind = CTRL_PROMISCUOUS
        elif c.is_affine:
            kind = CTRL_AFFINE
        else:
            kind = CTRL_TABLE
        p = self.p
        A = c.matrix if c.is_affine else np.zeros((p, p), dtype=np.int64)
        b = c.shift if c.is_affine else np.zeros(p, dtype=np.int64)
        return EncodedModel(p, encode_laws(laws), kind, np.ascontiguousarray(A), np.ascontiguousarray(b), c.zero_at_origin)


def odot(z, sigmas) -> np.ndarray:
    """``sum_i z_i * sigmas[i]``."""
    z = np.asarray(z, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    if sigmas.ndim != 3 or sigmas.shape[0] != z.shape[0] or z.ndim != 1:
        raise ValueError(f"odot needs z of length k and k matrices, got {z.shape} and {sigmas.shape}")
    return np.tensordot(z, sigmas, axes=1)


def control_moments(model: ModelSpec, z) -> MomentSummary:
    """Mean ``eps(z)``, covariance ``Gamma(z)`` and fourth central moments ``kappa(z)`` of ``phi(z)``."""
    return model.control.moments(z)


def conditional_mean(model: ModelSpec, z) -> np.ndarray:
    """``E[Z_{k+1} | Z_k = z] = m eps(z)``."""
    return model.m @ control_moments(model, z).mean


def conditional_cov(model: ModelSpec, z) -> np.ndarray:
    """``Var[Z_{k+1} | Z_k = z] = eps(z) odot Sigma + m Gamma(z) m^T``."""
    cm = control_moments(model, z)
    out = odot(cm.mean, model.Sigma) + model.m @ cm.cov @ model.m.T
    return (out + out.T) / 2


def implied_g(model: ModelSpec, z) -> np.ndarray:
    z = np.asarray(z)
    return control_moments(model, z).mean - model.Lambda @ z - model.alpha


def implied_g_batch(model: ModelSpec, Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z)
    return model.control.mean_batch(Z) - Z @ model.Lambda.T - model.alpha


# --------------------------------------------------------------------------
# classification and limit coefficients


class Criticality(str, enum.Enum):
    SUBCRITICAL = "Subcritical"
    CRITICAL = "Critical"
    SUPERCRITICAL = "Supercritical"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class CriticalityReport:
    rho: float
    cls: Criticality
    spectral: linalg.SpectralData | None
    tolerance_band: float
    primitive: bool
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "class": self.cls.value,
            "primitive": self.primitive,
            "tolerance_band": self.tolerance_band,
            "spectral": None if self.spectral is None else self.spectral.to_dict(),
            "reason": self.reason,
        }


def classify_matrix(mt, tolerance_band: float = DEFAULT_BAND) -> CriticalityReport:
    """Classify by the spectral radius of a nonnegative matrix.

    The class is only reported when the dominant eigenvalue is real, simple
    and strictly dominant in modulus, with nonnegative eigenvectors;
    otherwise the report is ``Indeterminate`` with a reason.
    """
    mt = np.asarray(mt, dtype=float)
    if np.any(mt < 0):
        rho = linalg.spectral_radius(mt)
        return CriticalityReport(rho, Criticality.INDETERMINATE, None, tolerance_band, False,
                                 "matrix has negative entries")
    eig = np.linalg.eigvals(mt)
    rho = float(np.max(np.abs(eig)))
    primitive = linalg.is_primitive(mt)
    if rho <= tolerance_band:
        return CriticalityReport(rho, Criticality.INDETERMINATE, None, tolerance_band, primitive,
                                 "spectral radius is zero")
    near = np.abs(np.abs(eig) - rho) <= max(tolerance_band, 1e-9) * max(1.0, rho)
    if int(near.sum()) != 1:
        return CriticalityReport(rho, Criticality.INDETERMINATE, None, tolerance_band, primitive,
                                 f"{int(near.sum())} eigenvalues share the maximal modulus {rho:.12g}")
    try:
        sd = linalg.perron_frobenius(mt) if primitive else linalg.dominant_eigenpair(mt, rho)
    except (ValueError, linalg.ConvergenceError) as exc:
        return CriticalityReport(rho, Criticality.INDETERMINATE, None, tolerance_band, primitive, str(exc))
    if abs(rho - 1.0) <= tolerance_band:
        cls = Criticality.CRITICAL
    elif rho < 1.0:
        cls = Criticality.SUBCRITICAL
    else:
        cls = Criticality.SUPERCRITICAL
    return CriticalityReport(sd.rho, cls, sd, tolerance_band, primitive)


def classify(model: ModelSpec, tolerance_band: float = DEFAULT_BAND) -> CriticalityReport:
    """Classify ``model`` via ``m_tilde = m @ Lambda``."""
    return classify_matrix(model.m_tilde, tolerance_band)


@dataclass(frozen=True)
class LimitCoefficients:
    """Coefficients of ``dX = drift dt + sqrt(diffusion * X^+) dW``.

    The scaled population concentrates on ``X_t * direction``; ``left`` is the
    projection turning a population vector back into ``X``.
    """

    drift: float
    diffusion: float
    direction: np.ndarray
    lambda_u: np.ndarray
    left: np.ndarray

    def to_dict(self) -> dict:
        return {
            "drift": self.drift,
            "diffusion": self.diffusion,
            "direction": self.direction.tolist(),
            "lambda_u": self.lambda_u.tolist(),
            "left": self.left.tolist(),
        }


def limit_coefficients(model: ModelSpec, u=None, v=None, tolerance_band: float = DEFAULT_BAND) -> LimitCoefficients:
    """Drift ``v^T m alpha`` and diffusion ``v^T ((Lambda u) odot Sigma) v``.

    ``u`` and ``v`` default to the normalized eigenvectors from
    :func:`classify`; supplied vectors are checked against the same
    normalization.
    """
    report = classify(model, tolerance_band)
    if report.cls is not Criticality.CRITICAL:
        raise NotCriticalError(f"limit coefficients need a critical model, got {report.cls.value}"
                               + (f" ({report.reason})" if report.reason else ""))
    mt = model.m_tilde
    if u is None and v is None:
        u, v = report.spectral.u, report.spectral.v
    elif u is None or v is None:
        raise ValueError("supply both eigenvectors or neither")
    else:
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        ok = (
            np.all(u >= 0) and np.all(v >= 0)
            and abs(u.sum() - 1) <= 1e-12 and abs(v @ u - 1) <= 1e-12
            and np.linalg.norm(mt @ u - u) <= 1e-10 * np.linalg.norm(u)
            and np.linalg.norm(v @ mt - v) <= 1e-10 * np.linalg.norm(v)
        )
        if not ok:
            raise ValueError("supplied eigenvectors do not satisfy the normalization")
    lam_u = model.Lambda @ u
    if np.any(lam_u < -1e-12):
        raise ValueError(f"Lambda @ u has a negative coordinate: {lam_u}")
    lam_u = np.clip(lam_u, 0.0, None)
    drift = float(v @ model.m @ model.alpha)
    diffusion = float(v @ odot(lam_u, model.Sigma) @ v)
    return LimitCoefficients(drift, max(diffusion, 0.0), u.copy(), lam_u, v.copy())


# --------------------------------------------------------------------------
# growth diagnostics


@dataclass(frozen=True)
class DiagnosticsReport:
    radii: np.ndarray
    g_max: np.ndarray
    gamma_ratio_max: np.ndarray
    kappa_ratio_max: np.ndarray
    slopes: dict
    flags: dict
    warnings: list

    def to_dict(self) -> dict:
        return {
            "radii": self.radii.tolist(),
            "g_max": self.g_max.tolist(),
            "gamma_ratio_max": self.gamma_ratio_max.tolist(),
            "kappa_ratio_max": self.kappa_ratio_max.tolist(),
            "slopes": self.slopes,
            "flags": self.flags,
            "warnings": self.warnings,
        }


def _loglog_slope(radii: np.ndarray, vals: np.ndarray) -> float | None:
    keep = vals > 0
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(radii[keep]), np.log(vals[keep]), 1)[0])


def hypothesis_diagnostics(model: ModelSpec, radii: Sequence[float], samples_per_radius: int,
                           rng: np.random.Generator) -> DiagnosticsReport:
    """Heuristic growth checks of the control law on random shells.

    For states ``z`` with ``|z|`` close to each radius, records the largest
    ``|g(z)|``, ``|Gamma(z)| / |z|`` and ``max_i kappa_i(z) / |z|^2``.
    A log-log slope is fitted across radii. ``|g|`` and ``|Gamma|/|z|``
    should vanish, so they are flagged when the slope exceeds -0.25;
    ``kappa/|z|^2`` should stay bounded, so it is flagged when the slope
    exceeds 0.25. Identically zero columns are never flagged. Finite radii
    cannot prove an asymptotic statement; a flag is a warning, not a verdict.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or np.any(np.diff(radii) <= 0) or radii[0] < 1:
        raise ValueError("radii must be increasing and at least 1")
    if samples_per_radius < 1:
        raise ValueError("samples_per_radius must be positive")
    p = model.p
    g_max = np.zeros(radii.size)
    gam = np.zeros(radii.size)
    kap = np.zeros(radii.size)
    for r_idx, r in enumerate(radii):
        for _ in range(samples_per_radius):
            d = np.abs(rng.standard_normal(p))
            z = np.rint(r * d / np.linalg.norm(d)).astype(np.int64)
            if not z.any():
                z[int(np.argmax(d))] = 1
            nz = float(np.linalg.norm(z))
            cm = control_moments(model, z)
            g = cm.mean - model.Lambda @ z - model.alpha
            g_max[r_idx] = max(g_max[r_idx], float(np.linalg.norm(g)))
            gam[r_idx] = max(gam[r_idx], float(np.linalg.norm(cm.cov, 2)) / nz)
            kap[r_idx] = max(kap[r_idx], float(np.max(cm.fourth_central)) / nz**2)
    slopes = {
        "g": _loglog_slope(radii, g_max),
        "gamma_ratio": _loglog_slope(radii, gam),
        "kappa_ratio": _loglog_slope(radii, kap),
    }
    flags = {
        "g": slopes["g"] is not None and slopes["g"] > -0.25,
        "gamma_ratio": slopes["gamma_ratio"] is not None and slopes["gamma_ratio"] > -0.25,
        "kappa_ratio": slopes["kappa_ratio"] is not None and slopes["kappa_ratio"] > 0.25,
    }
    # a single positive value at the largest radius cannot give a slope
    for key, vals in (("g", g_max), ("gamma_ratio", gam)):
        if slopes[key] is None and vals[-1] > 0:
            flags[key] = True
    messages = {
        "g": "residual g(z) does not appear to vanish as |z| grows",
        "gamma_ratio": "|Gamma(z)|/|z| does not appear to vanish as |z| grows",
        "kappa_ratio": "kappa(z)/|z|^2 appears to grow with |z|",
    }
    warnings = [messages[k] for k, v in flags.items() if v]
    return DiagnosticsReport(radii, g_max, gam, kap, slopes, flags, warnings)


# --------------------------------------------------------------------------
# serialization


def model_to_dict(model: ModelSpec) -> dict:
    return {
        "name": model.name,
        "p": model.p,
        "offspring": [law.to_dict() for law in model.offspring],
        "control": model.control.to_dict(),
        "Lambda": model.Lambda.tolist(),
        "alpha": model.alpha.tolist(),
        "z0": model.z0.to_dict(),
        "non_explosion_assumed": bool(model.non_explosion_assumed),
    }


_MODEL_KEYS = {"name", "p", "offspring", "control", "Lambda", "alpha", "z0", "non_explosion_assumed"}


def model_from_dict(d: dict) -> ModelSpec:
    if not isinstance(d, dict):
        raise ValueError("model must be a JSON object")
    unknown = set(d) - _MODEL_KEYS
    if unknown:
        raise ValueError(f"unknown model fields: {sorted(unknown)}")
    missing = {"p", "offspring", "control", "Lambda", "alpha", "z0"} - set(d)
    if missing:
        raise ValueError(f"missing model fields: {sorted(missing)}")
    return ModelSpec(
        p=int(d["p"]),
        offspring=tuple(law_from_dict(x) for x in d["offspring"]),
        control=control_from_dict(d["control"]),
        Lambda=d["Lambda"],
        alpha=d["alpha"],
        z0=law_from_dict(d["z0"]),
        name=str(d.get("name", "custom")),
        non_explosion_assumed=bool(d.get("non_explosion_assumed", True)),
    )


def model_hash(model: ModelSpec) -> str:
    blob = json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
