"""Flatten law trees and controls into plain arrays shared by both kernels.

A law becomes a list of independent terms. The sum of ``c`` i.i.d. copies of
the law equals the sum over terms of each term's own ``c``-fold aggregate:

* ``DET``   adds ``c * vec``
* ``POIS``  adds ``Poisson(c * rate)`` to one coordinate
* ``TABLE`` draws multinomial counts over the support and adds ``counts @ support``
* ``BERN``  adds ``Binomial(c, q) * vec``

Term rows are ``(kind, out_offset, dim, n_support, int_index, float_index)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TERM_DET = 0
TERM_POIS = 1
TERM_TABLE = 2
TERM_BERN = 3

CTRL_AFFINE = 0
CTRL_PROMISCUOUS = 1
CTRL_MIGRATION_GATED = 2
CTRL_MIGRATION_FREE = 3
CTRL_TABLE = 4  # no compiled path

# Poisson rate above which the aggregate count is treated as overflow
POISSON_RATE_CAP = 1e18

ERR_OK = 0
ERR_OVERFLOW = 1
ERR_NEGATIVE_CONTROL = 2


@dataclass(frozen=True)
class EncodedLaws:
    terms: np.ndarray  # (T, 6) int64
    ints: np.ndarray  # int64
    floats: np.ndarray  # float64
    starts: np.ndarray  # (L + 1,) int64, term range of each law


class _Builder:
    def __init__(self) -> None:
        self.terms: list[tuple[int, ...]] = []
        self.ints: list[int] = []
        self.floats: list[float] = []
        self.starts: list[int] = [0]

    def add_law(self, law) -> None:
        self._emit(law, 0)
        self.starts.append(len(self.terms))

    def _emit(self, law, off: int) -> None:
        k = law.kind
        if k == "deterministic":
            if np.any(law.point != 0):
                self.terms.append((TERM_DET, off, law.dim, 0, len(self.ints), 0))
                self.ints.extend(int(x) for x in law.point)
        elif k == "poisson":
            for j, r in enumerate(law.rates):
                if r > 0:
                    self.terms.append((TERM_POIS, off + j, 1, 0, 0, len(self.floats)))
                    self.floats.append(float(r))
        elif k == "table":
            nsup = law.probs.size
            self.terms.append((TERM_TABLE, off, law.dim, nsup, len(self.ints), len(self.floats)))
            self.ints.extend(int(x) for x in law.support.ravel())
            self.floats.extend(float(x) for x in law.probs)
        elif k == "bernoulli_vector":
            if law.q > 0 and np.any(law.vec != 0):
                self.terms.append((TERM_BERN, off, law.dim, 0, len(self.ints), len(self.floats)))
                self.ints.extend(int(x) for x in law.vec)
                self.floats.append(float(law.q))
        elif k == "product":
            for j, part in enumerate(law.parts):
                self._emit(part, off + j)
        elif k == "shifted":
            self._emit(law.base, off)
            if np.any(law.offset != 0):
                self.terms.append((TERM_DET, off, law.dim, 0, len(self.ints), 0))
                self.ints.extend(int(x) for x in law.offset)
        else:
            raise ValueError(f"cannot encode law kind {k!r}")

    def build(self) -> EncodedLaws:
        terms = np.array(self.terms, dtype=np.int64).reshape(-1, 6)
        return EncodedLaws(
            terms=np.ascontiguousarray(terms),
            ints=np.array(self.ints, dtype=np.int64),
            floats=np.array(self.floats, dtype=np.float64),
            starts=np.array(self.starts, dtype=np.int64),
        )


def encode_laws(laws) -> EncodedLaws:
    b = _Builder()
    for law in laws:
        b.add_law(law)
    return b.build()


def encode_law(law) -> EncodedLaws:
    return encode_laws([law])


@dataclass(frozen=True)
class EncodedModel:
    """Arrays for one model.

    Law slots: ``0..p-1`` offspring, ``p`` initial law, ``p+1`` migration law
    (present only for migration controls).
    """

    p: int
    laws: EncodedLaws
    ctrl_kind: int
    ctrl_matrix: np.ndarray  # (p, p) int64, affine kinds only
    ctrl_shift: np.ndarray  # (p,) int64
    zero_at_origin: bool
