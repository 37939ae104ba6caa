"""Ready-made models.

Each constructor declares the ``(Lambda, alpha)`` pair under which its
residual ``g`` is known in closed form. Law arguments default to parameter
choices that make the model critical.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import laws
from .laws import DiscreteLaw, law_from_dict
from .model import (
    ModelSpec,
    affine_control,
    append_unit_control,
    migration_control,
    promiscuous_control,
    selffert_control,
)

__all__ = [
    "PRESETS",
    "build_preset",
    "mbpi_embedding",
    "mbpi_migration_repr",
    "two_sex_promiscuous",
    "two_sex_selffert",
    "uniform_migration",
    "deterministic_ray",
]


def _unit(p: int, i: int) -> np.ndarray:
    e = np.zeros(p, dtype=np.int64)
    e[i] = 1
    return e


def mbpi_embedding(offspring: Sequence[DiscreteLaw] | None = None, immigration: DiscreteLaw | None = None,
                   y0: DiscreteLaw | None = None) -> ModelSpec:
    """Branching with immigration written as a ``(p+1)``-type controlled process.

    The extra last type is one immigration unit per generation; its
    offspring is ``(I, 1)``. The control keeps the first ``p`` counts and
    resets the last to 1, so ``g`` vanishes identically.
    """
    if offspring is None:
        offspring = [laws.poisson((0.5, 0.5)), laws.poisson((0.5, 0.5))]
    p = len(offspring)
    if immigration is None:
        immigration = laws.poisson(np.ones(p))
    if y0 is None:
        y0 = laws.deterministic(np.ones(p, dtype=np.int64))
    q = p + 1
    off = [laws.pad(law, q) for law in offspring]
    off.append(laws.shifted(laws.pad(immigration, q), _unit(q, p)))
    Lam = np.eye(q)
    Lam[p, p] = 0.0
    return ModelSpec(q, tuple(off), append_unit_control(q), Lam, _unit(q, p).astype(float),
                     laws.shifted(laws.pad(y0, q), _unit(q, p)), name="mbpi_embedding")


def mbpi_migration_repr(offspring: Sequence[DiscreteLaw] | None = None, immigration: DiscreteLaw | None = None,
                        z0: DiscreteLaw | None = None) -> ModelSpec:
    """Immigrants join before reproducing: ``phi(z) = z + I``, ``Lambda = I``, ``alpha = E I``."""
    if offspring is None:
        offspring = [laws.poisson((0.5, 0.5)), laws.poisson((0.5, 0.5))]
    p = len(offspring)
    if immigration is None:
        immigration = laws.poisson(np.ones(p))
    if z0 is None:
        z0 = laws.deterministic(np.ones(p, dtype=np.int64))
    return ModelSpec(p, tuple(offspring), migration_control(immigration, gated=False), np.eye(p),
                     immigration.summary.mean, z0, name="mbpi_migration_repr")


def two_sex_promiscuous(offspring: DiscreteLaw | None = None, immigration: DiscreteLaw | None = None,
                        z0: DiscreteLaw | None = None) -> ModelSpec:
    """Two-sex process with mating units ``females * min(1, males)``.

    Types are (females, males). Immigration must always bring at least one
    male and the initial population needs both sexes, so the mating function
    never sees zero males and ``g`` stays zero along every path.
    """
    offspring = offspring if offspring is not None else laws.poisson((1.0, 1.0))
    immigration = immigration if immigration is not None else laws.shifted(laws.poisson((2.0, 1.0)), (0, 1))
    z0 = z0 if z0 is not None else laws.deterministic((1, 1))
    if immigration.dim != 2 or immigration.min_support()[1] < 1:
        raise ValueError("immigration must bring at least one male with probability one")
    if z0.dim != 2 or np.any(z0.min_support() < 1):
        raise ValueError("initial population must contain both sexes")
    return ModelSpec(2, (offspring, immigration), promiscuous_control(), [[1.0, 0.0], [0.0, 0.0]], [0.0, 1.0],
                     z0, name="two_sex_promiscuous")


def two_sex_selffert(offspring: DiscreteLaw | None = None, immigration: DiscreteLaw | None = None,
                     z0: DiscreteLaw | None = None) -> ModelSpec:
    """Two-type process where every individual forms its own mating unit (``L = f + m``).

    Critical exactly when the mean offspring counts sum to one.
    """
    offspring = offspring if offspring is not None else laws.poisson((0.3, 0.7))
    immigration = immigration if immigration is not None else laws.poisson((1.5, 3.5))
    z0 = z0 if z0 is not None else laws.deterministic((1, 1))
    return ModelSpec(2, (offspring, immigration), selffert_control(), [[1.0, 1.0], [0.0, 0.0]], [0.0, 1.0],
                     z0, name="two_sex_selffert")


def uniform_migration(offspring: Sequence[DiscreteLaw] | None = None, z0: DiscreteLaw | None = None) -> ModelSpec:
    """Each nonempty type gains or loses one individual, or neither, uniformly.

    ``Gamma(z) = (2/3) diag(1{z_i > 0})``, ``Lambda = I``, ``alpha = 0``.
    """
    if offspring is None:
        offspring = [laws.bernoulli_vector((1, 1), 0.5), laws.bernoulli_vector((1, 1), 0.5)]
    p = len(offspring)
    z0 = z0 if z0 is not None else laws.deterministic(np.ones(p, dtype=np.int64))
    step = laws.table([-1, 0, 1], [1 / 3, 1 / 3, 1 / 3])
    return ModelSpec(p, tuple(offspring), migration_control(laws.product([step] * p), gated=True), np.eye(p),
                     np.zeros(p), z0, name="uniform_migration")


def deterministic_ray() -> ModelSpec:
    """Almost surely deterministic two-type process with ``Z_k = (k + 1, 0)``.

    ``phi(z) = (z_1 + 1, z_1 + z_2 - 1)`` off the origin and 0 at it; only
    type 1 has offspring, exactly one type-1 child each.
    """
    return ModelSpec(
        2,
        (laws.deterministic((1, 0)), laws.deterministic((0, 0))),
        affine_control([[1, 0], [1, 1]], [1, -1], zero_at_origin=True),
        [[1.0, 0.0], [1.0, 1.0]],
        [1.0, -1.0],
        laws.deterministic((1, 0)),
        name="deterministic_ray",
    )


PRESETS: dict[str, tuple[Callable[..., ModelSpec], str]] = {
    "mbpi_embedding": (mbpi_embedding, "branching with immigration as a (p+1)-type controlled process"),
    "mbpi_migration_repr": (mbpi_migration_repr, "immigration folded into the control: phi(z) = z + I"),
    "two_sex_promiscuous": (two_sex_promiscuous, "two-sex process, mating units F*min(1,M)"),
    "two_sex_selffert": (two_sex_selffert, "two-sex process, mating units F+M"),
    "uniform_migration": (uniform_migration, "gated uniform {-1,0,1} migration per type"),
    "deterministic_ray": (deterministic_ray, "deterministic path Z_k = (k+1, 0)"),
}


def _decode(value):
    if isinstance(value, dict) and set(value) == {"kind", "params"}:
        return law_from_dict(value)
    if isinstance(value, list) and value and all(isinstance(v, dict) for v in value):
        return [law_from_dict(v) for v in value]
    return value


def build_preset(name: str, params: dict | None = None) -> ModelSpec:
    """Construct a preset by name; law-valued params may be given as dicts."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    factory = PRESETS[name][0]
    params = params or {}
    try:
        return factory(**{k: _decode(v) for k, v in params.items()})
    except TypeError as exc:
        raise ValueError(f"bad parameters for preset {name!r}: {exc}") from None
