# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels.

Mirrors ``_pykernels`` draw for draw; the GIL is released while a trajectory
runs, so a thread pool can overlap trajectories.
"""

from libc.stdint cimport int64_t
from libc.math cimport sqrt, fmax
from libc.string cimport memset
from libc.stdlib cimport malloc, free
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    binomial_t,
    random_binomial,
    random_multinomial,
    random_poisson,
    random_standard_normal,
)

import numpy as np

from ._encode import POISSON_RATE_CAP

cdef enum:
    TERM_DET = 0
    TERM_POIS = 1
    TERM_TABLE = 2
    TERM_BERN = 3
    CTRL_AFFINE = 0
    CTRL_PROMISCUOUS = 1
    CTRL_MIGRATION_GATED = 2
    CTRL_MIGRATION_FREE = 3
    ERR_OK = 0
    ERR_OVERFLOW = 1
    ERR_NEGATIVE_CONTROL = 2
    MAX_P = 32


cdef extern from *:
    """
    static inline int cm_add(long long a, long long b, long long *r) {
        return __builtin_add_overflow(a, b, r);
    }
    static inline int cm_mul(long long a, long long b, long long *r) {
        return __builtin_mul_overflow(a, b, r);
    }
    """
    int cm_add(long long a, long long b, long long *r) nogil
    int cm_mul(long long a, long long b, long long *r) nogil


cdef struct Laws:
    const int64_t *terms
    const int64_t *ints
    const double *floats
    const int64_t *starts
    int64_t *scratch  # multinomial counts, sized to the widest table


cdef struct Model:
    int p
    int ctrl_kind
    int zero_at_origin
    const int64_t *A
    const int64_t *beta
    Laws laws


cdef double RATE_CAP = POISSON_RATE_CAP


cdef inline int _acc(int64_t *acc, int64_t cnt, int64_t v) noexcept nogil:
    cdef long long prod, tot
    if cm_mul(cnt, v, &prod):
        return ERR_OVERFLOW
    if cm_add(acc[0], prod, &tot):
        return ERR_OVERFLOW
    acc[0] = tot
    return ERR_OK


cdef int _add_terms(Laws *L, int law, int64_t c, bitgen_t *bg, binomial_t *bn,
                    int64_t *acc) noexcept nogil:
    cdef int64_t t, kind, off, dim, nsup, ii, fi, d, s, nb
    cdef double lam
    cdef const int64_t *row
    for t in range(L.starts[law], L.starts[law + 1]):
        row = L.terms + 6 * t
        kind = row[0]
        off = row[1]
        dim = row[2]
        nsup = row[3]
        ii = row[4]
        fi = row[5]
        if kind == TERM_DET:
            for d in range(dim):
                if _acc(acc + off + d, c, L.ints[ii + d]):
                    return ERR_OVERFLOW
        elif kind == TERM_POIS:
            lam = <double>c * L.floats[fi]
            if lam > RATE_CAP:
                return ERR_OVERFLOW
            if _acc(acc + off, 1, random_poisson(bg, lam)):
                return ERR_OVERFLOW
        elif kind == TERM_TABLE:
            memset(L.scratch, 0, nsup * sizeof(int64_t))
            random_multinomial(bg, c, L.scratch, <double *>(L.floats + fi), nsup, bn)
            for s in range(nsup):
                if L.scratch[s]:
                    for d in range(dim):
                        if _acc(acc + off + d, L.scratch[s], L.ints[ii + s * dim + d]):
                            return ERR_OVERFLOW
        else:
            nb = random_binomial(bg, L.floats[fi], c, bn)
            if nb:
                for d in range(dim):
                    if _acc(acc + off + d, nb, L.ints[ii + d]):
                        return ERR_OVERFLOW
    return ERR_OK


cdef int _sum_into(Laws *L, int law, int64_t c, bitgen_t *bg, binomial_t *bn,
                   int64_t *acc, bint naive) noexcept nogil:
    cdef int64_t r
    cdef int code
    if c <= 0:
        return ERR_OK
    if not naive:
        return _add_terms(L, law, c, bg, bn, acc)
    for r in range(c):
        code = _add_terms(L, law, 1, bg, bn, acc)
        if code:
            return code
    return ERR_OK


cdef int _step(Model *M, const int64_t *z, int64_t *znew, bitgen_t *bg, binomial_t *bn,
               bint naive) noexcept nogil:
    cdef int p = M.p
    cdef int i, j, code, allzero
    cdef int64_t phi[MAX_P]
    cdef int64_t mig[MAX_P]
    cdef long long prod, tot
    if M.ctrl_kind == CTRL_AFFINE:
        allzero = 1
        for i in range(p):
            if z[i] != 0:
                allzero = 0
        if M.zero_at_origin and allzero:
            for i in range(p):
                phi[i] = 0
        else:
            for i in range(p):
                tot = M.beta[i]
                for j in range(p):
                    if cm_mul(M.A[i * p + j], z[j], &prod) or cm_add(tot, prod, &tot):
                        return ERR_OVERFLOW
                phi[i] = tot
    elif M.ctrl_kind == CTRL_PROMISCUOUS:
        phi[0] = z[0] if z[1] > 0 else 0
        phi[1] = 1
    else:
        for i in range(p):
            mig[i] = 0
        code = _add_terms(&M.laws, p + 1, 1, bg, bn, mig)
        if code:
            return code
        for i in range(p):
            if M.ctrl_kind == CTRL_MIGRATION_FREE or z[i] > 0:
                if cm_add(z[i], mig[i], &tot):
                    return ERR_OVERFLOW
                phi[i] = tot
            else:
                phi[i] = z[i]
    for i in range(p):
        if phi[i] < 0:
            return ERR_NEGATIVE_CONTROL
    for i in range(p):
        znew[i] = 0
    for i in range(p):
        code = _sum_into(&M.laws, i, phi[i], bg, bn, znew, naive)
        if code:
            return code
    return ERR_OK


cdef bitgen_t *_bitgen(object rng) except NULL:
    capsule = rng.bit_generator.capsule
    return <bitgen_t *>PyCapsule_GetPointer(capsule, "BitGenerator")


cdef class _Prepared:
    # keeps the arrays alive while raw pointers into them are in use
    cdef object terms, ints, floats, starts, A, beta
    cdef Model model
    cdef Py_ssize_t width

    def __init__(self, em):
        cdef const int64_t[:, ::1] terms
        cdef const int64_t[::1] ints, starts, A, beta
        cdef const double[::1] floats
        if em.p > MAX_P:
            raise ValueError("too many types for the compiled kernel")
        laws = em.laws
        self.terms = np.ascontiguousarray(laws.terms, dtype=np.int64).reshape(-1, 6)
        self.ints = np.ascontiguousarray(laws.ints, dtype=np.int64)
        self.floats = np.ascontiguousarray(laws.floats, dtype=np.float64)
        self.starts = np.ascontiguousarray(laws.starts, dtype=np.int64)
        self.A = np.ascontiguousarray(em.ctrl_matrix, dtype=np.int64).ravel()
        self.beta = np.ascontiguousarray(em.ctrl_shift, dtype=np.int64)
        width = int(self.terms[:, 3].max()) if self.terms.shape[0] else 0
        self.width = max(width, 1)
        # dummies keep pointers valid for empty arrays
        if self.ints.size == 0:
            self.ints = np.zeros(1, dtype=np.int64)
        if self.floats.size == 0:
            self.floats = np.zeros(1, dtype=np.float64)
        if self.terms.shape[0] == 0:
            self.terms = np.zeros((1, 6), dtype=np.int64)
        terms = self.terms
        ints = self.ints
        floats = self.floats
        starts = self.starts
        A = self.A
        beta = self.beta
        self.model.p = em.p
        self.model.ctrl_kind = em.ctrl_kind
        self.model.zero_at_origin = 1 if em.zero_at_origin else 0
        self.model.A = &A[0]
        self.model.beta = &beta[0]
        self.model.laws.terms = &terms[0, 0]
        self.model.laws.ints = &ints[0]
        self.model.laws.floats = &floats[0]
        self.model.laws.starts = &starts[0]
        self.model.laws.scratch = NULL


def prepare(em):
    return _Prepared(em)


def add_law_sum(enc, int law_idx, int64_t count, rng, int64_t[::1] out, bint naive=False):
    """Compiled twin of ``_pykernels.add_law_sum`` for a bare law set."""
    cdef const int64_t[:, ::1] terms = np.ascontiguousarray(enc.terms, dtype=np.int64).reshape(-1, 6) if enc.terms.shape[0] else np.zeros((1, 6), dtype=np.int64)
    cdef const int64_t[::1] ints = enc.ints if enc.ints.size else np.zeros(1, dtype=np.int64)
    cdef const double[::1] floats = enc.floats if enc.floats.size else np.zeros(1)
    cdef const int64_t[::1] starts = enc.starts
    cdef int64_t[::1] scratch = np.zeros(max(int(enc.terms[:, 3].max()) if enc.terms.shape[0] else 1, 1), dtype=np.int64)
    cdef Laws L
    cdef binomial_t bn
    cdef bitgen_t *bg = _bitgen(rng)
    cdef int64_t[MAX_P] acc
    cdef int i, code
    cdef int d = out.shape[0]
    if d > MAX_P:
        raise ValueError("dimension too large for the compiled kernel")
    L.terms = &terms[0, 0]
    L.ints = &ints[0]
    L.floats = &floats[0]
    L.starts = &starts[0]
    L.scratch = &scratch[0]
    memset(&bn, 0, sizeof(binomial_t))
    for i in range(d):
        acc[i] = out[i]
    with nogil:
        code = _sum_into(&L, law_idx, count, bg, &bn, acc, naive)
    if code == ERR_OK:
        for i in range(d):
            out[i] = acc[i]
    return code


def run_trajectory(_Prepared prep, int64_t K, rng, const int64_t[::1] record,
                   int64_t[:, ::1] out, bint naive=False):
    """Simulate ``K`` steps; returns ``(error_code, generation_reached)``."""
    cdef Model Mloc = prep.model
    cdef Model *M = &Mloc
    cdef bitgen_t *bg = _bitgen(rng)
    cdef binomial_t bn
    cdef int64_t za[MAX_P]
    cdef int64_t zb[MAX_P]
    cdef int64_t *z = za
    cdef int64_t *zn = zb
    cdef int64_t *tmp
    cdef int64_t k, r = 0
    cdef Py_ssize_t nrec = record.shape[0]
    cdef int i, code = ERR_OK
    cdef int p = M.p
    # scratch is per call so concurrent trajectories never share it
    M.laws.scratch = <int64_t *>malloc(prep.width * sizeof(int64_t))
    if M.laws.scratch == NULL:
        raise MemoryError()
    memset(&bn, 0, sizeof(binomial_t))
    with nogil:
        for i in range(p):
            z[i] = 0
        code = _sum_into(&M.laws, p, 1, bg, &bn, z, False)
        if code == ERR_OK:
            for i in range(p):
                if z[i] < 0:
                    code = ERR_OVERFLOW
        k = 0
        if code == ERR_OK:
            if nrec > 0 and record[0] == 0:
                for i in range(p):
                    out[0, i] = z[i]
                r = 1
            for k in range(1, K + 1):
                code = _step(M, z, zn, bg, &bn, naive)
                if code:
                    break
                tmp = z
                z = zn
                zn = tmp
                if r < nrec and record[r] == k:
                    for i in range(p):
                        out[r, i] = z[i]
                    r += 1
            if code == ERR_OK:
                k = K
    free(M.laws.scratch)
    return code, k


def one_step_many(_Prepared prep, const int64_t[::1] z, rng, int64_t[:, ::1] out, bint naive=False):
    """Independent one-step successors of ``z``, one per row of ``out``."""
    cdef Model Mloc = prep.model
    cdef Model *M = &Mloc
    cdef bitgen_t *bg = _bitgen(rng)
    cdef binomial_t bn
    cdef int64_t zn[MAX_P]
    cdef Py_ssize_t r, n = out.shape[0]
    cdef int i, code = ERR_OK
    M.laws.scratch = <int64_t *>malloc(prep.width * sizeof(int64_t))
    if M.laws.scratch == NULL:
        raise MemoryError()
    memset(&bn, 0, sizeof(binomial_t))
    with nogil:
        for r in range(n):
            code = _step(M, &z[0], zn, bg, &bn, naive)
            if code:
                break
            for i in range(M.p):
                out[r, i] = zn[i]
    free(M.laws.scratch)
    return code


def euler_maruyama_paths(double b, double s2, double dt, int64_t n_steps, list rngs,
                         double[:, ::1] full=None, double[::1] terminal=None):
    """Full-truncation Euler-Maruyama from 0, one generator per path."""
    cdef double bdt = b * dt
    cdef double sqdt = sqrt(dt)
    cdef double x, nrm
    cdef int64_t j
    cdef Py_ssize_t r
    cdef bitgen_t *bg
    cdef bint keep = full is not None
    for r in range(len(rngs)):
        bg = _bitgen(rngs[r])
        with nogil:
            x = 0.0
            if keep:
                full[r, 0] = 0.0
            for j in range(n_steps):
                nrm = random_standard_normal(bg)
                x = x + bdt + sqrt(s2 * fmax(x, 0.0)) * sqdt * nrm
                if keep:
                    full[r, j + 1] = x
        if not keep:
            terminal[r] = x
