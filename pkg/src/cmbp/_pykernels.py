"""Pure-Python simulation kernels.

Random draws are made in exactly the order used by the compiled kernels and
through the same numpy sampling routines, so both backends produce identical
trajectories for identical generators.
"""

from __future__ import annotations

import math

import numpy as np

from ._encode import (
    CTRL_AFFINE,
    CTRL_MIGRATION_FREE,
    CTRL_MIGRATION_GATED,
    CTRL_PROMISCUOUS,
    ERR_NEGATIVE_CONTROL,
    ERR_OK,
    ERR_OVERFLOW,
    POISSON_RATE_CAP,
    TERM_BERN,
    TERM_DET,
    TERM_POIS,
    TERM_TABLE,
    EncodedLaws,
    EncodedModel,
)

INT64_MAX = 2**63 - 1

_cache: dict[int, tuple[EncodedLaws, list]] = {}


def _unpack(enc: EncodedLaws) -> list:
    # per-law lists of native-Python term tuples, cached by identity
    hit = _cache.get(id(enc))
    if hit is not None and hit[0] is enc:
        return hit[1]
    ints = enc.ints.tolist()
    laws = []
    for a, b in zip(enc.starts[:-1].tolist(), enc.starts[1:].tolist()):
        terms = []
        for kind, off, dim, nsup, ii, fi in enc.terms[a:b].tolist():
            if kind == TERM_DET:
                terms.append((kind, off, dim, ints[ii : ii + dim]))
            elif kind == TERM_POIS:
                terms.append((kind, off, 1, float(enc.floats[fi])))
            elif kind == TERM_TABLE:
                probs = enc.floats[fi : fi + nsup].copy()
                sup = [ints[ii + s * dim : ii + (s + 1) * dim] for s in range(nsup)]
                terms.append((kind, off, dim, (probs, sup)))
            else:
                terms.append((kind, off, dim, (float(enc.floats[fi]), ints[ii : ii + dim])))
        laws.append(terms)
    if len(_cache) > 256:
        _cache.clear()
    _cache[id(enc)] = (enc, laws)
    return laws


def _add_terms(terms: list, c: int, rng: np.random.Generator, acc: list) -> int:
    for kind, off, dim, data in terms:
        if kind == TERM_DET:
            for d in range(dim):
                acc[off + d] += c * data[d]
        elif kind == TERM_POIS:
            lam = c * data
            if lam > POISSON_RATE_CAP:
                return ERR_OVERFLOW
            acc[off] += int(rng.poisson(lam))
        elif kind == TERM_TABLE:
            probs, sup = data
            counts = rng.multinomial(c, probs).tolist()
            for s, cnt in enumerate(counts):
                if cnt:
                    row = sup[s]
                    for d in range(dim):
                        acc[off + d] += cnt * row[d]
        else:
            q, vec = data
            nb = int(rng.binomial(c, q))
            if nb:
                for d in range(dim):
                    acc[off + d] += nb * vec[d]
    return ERR_OK


def add_law_sum(enc: EncodedLaws, law_idx: int, count: int, rng, out: np.ndarray, naive: bool = False) -> int:
    """Add the sum of ``count`` i.i.d. draws of law ``law_idx`` into ``out``."""
    terms = _unpack(enc)[law_idx]
    acc = [0] * out.shape[0]
    code = _sum_into(terms, count, rng, acc, naive)
    if code == ERR_OK:
        total = [int(x) + a for x, a in zip(out.tolist(), acc)]
        if any(abs(x) > INT64_MAX for x in total):
            return ERR_OVERFLOW
        out[:] = total
    return code


def _sum_into(terms, count: int, rng, acc: list, naive: bool) -> int:
    if count <= 0:
        return ERR_OK
    if not naive:
        return _add_terms(terms, count, rng, acc)
    for _ in range(count):
        code = _add_terms(terms, 1, rng, acc)
        if code:
            return code
    return ERR_OK


def _control(em: EncodedModel, z: list, rng, laws, control_fn) -> tuple[int, list]:
    p = em.p
    kind = em.ctrl_kind
    if control_fn is not None:
        phi = [int(x) for x in control_fn(z, rng)]
    elif kind == CTRL_AFFINE:
        if em.zero_at_origin and not any(z):
            return ERR_OK, [0] * p
        A = em.ctrl_matrix.tolist()
        beta = em.ctrl_shift.tolist()
        phi = [sum(A[i][j] * z[j] for j in range(p)) + beta[i] for i in range(p)]
    elif kind == CTRL_PROMISCUOUS:
        phi = [z[0] * min(1, z[1]), 1]
    elif kind in (CTRL_MIGRATION_GATED, CTRL_MIGRATION_FREE):
        mig = [0] * p
        code = _add_terms(laws[p + 1], 1, rng, mig)
        if code:
            return code, z
        gated = kind == CTRL_MIGRATION_GATED
        phi = [z[i] + (mig[i] if (not gated or z[i] > 0) else 0) for i in range(p)]
    else:
        raise ValueError(f"control kind {kind} needs a control callback")
    if any(x < 0 for x in phi):
        return ERR_NEGATIVE_CONTROL, phi
    if any(x > INT64_MAX for x in phi):
        return ERR_OVERFLOW, phi
    return ERR_OK, phi


def _step(em: EncodedModel, z: list, rng, laws, naive: bool, control_fn) -> tuple[int, list]:
    code, phi = _control(em, z, rng, laws, control_fn)
    if code:
        return code, z
    acc = [0] * em.p
    for i in range(em.p):
        code = _sum_into(laws[i], phi[i], rng, acc, naive)
        if code:
            return code, z
    if any(x > INT64_MAX for x in acc):
        return ERR_OVERFLOW, z
    return ERR_OK, acc


def run_trajectory(em: EncodedModel, K: int, rng, record: np.ndarray, out: np.ndarray,
                   naive: bool = False, control_fn=None) -> tuple[int, int]:
    """Simulate ``K`` steps, storing the states whose index is in ``record``.

    Returns ``(error_code, generation_reached)``.
    """
    laws = _unpack(em.laws)
    z = [0] * em.p
    code = _sum_into(laws[em.p], 1, rng, z, False)
    if code:
        return code, 0
    if any(x > INT64_MAX or x < 0 for x in z):
        return ERR_OVERFLOW, 0
    rec = record.tolist()
    r = 0
    if rec and rec[0] == 0:
        out[0, :] = z
        r = 1
    for k in range(1, K + 1):
        code, z = _step(em, z, rng, laws, naive, control_fn)
        if code:
            return code, k
        if r < len(rec) and rec[r] == k:
            out[r, :] = z
            r += 1
    return ERR_OK, K


def one_step_many(em: EncodedModel, z: np.ndarray, rng, out: np.ndarray,
                  naive: bool = False, control_fn=None) -> int:
    """Fill ``out[r]`` with independent one-step successors of state ``z``."""
    laws = _unpack(em.laws)
    z0 = [int(x) for x in z]
    for r in range(out.shape[0]):
        code, nz = _step(em, z0, rng, laws, naive, control_fn)
        if code:
            return code
        out[r, :] = nz
    return ERR_OK


def euler_maruyama_paths(b: float, s2: float, dt: float, n_steps: int, rngs: list,
                         out: np.ndarray, keep_full: bool) -> None:
    """Full-truncation Euler-Maruyama from 0, one generator per path.

    ``out`` is ``(paths, n_steps + 1)`` when ``keep_full`` else ``(paths,)``.
    """
    bdt = b * dt
    sqdt = math.sqrt(dt)
    chunk = max(1, 2_000_000 // max(n_steps, 1))
    for lo in range(0, len(rngs), chunk):
        hi = min(lo + chunk, len(rngs))
        normals = np.empty((hi - lo, n_steps))
        for r in range(lo, hi):
            normals[r - lo] = rngs[r].standard_normal(n_steps)
        x = np.zeros(hi - lo)
        if keep_full:
            out[lo:hi, 0] = 0.0
        for j in range(n_steps):
            x = x + bdt + np.sqrt(s2 * np.maximum(x, 0.0)) * sqdt * normals[:, j]
            if keep_full:
                out[lo:hi, j + 1] = x
        if not keep_full:
            out[lo:hi] = x
