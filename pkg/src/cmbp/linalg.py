"""Small dense nonnegative-matrix kernel.

Primitivity testing, Perron-Frobenius eigenpairs normalized so the right
eigenvector sums to one and the left one satisfies ``v @ u == 1``, and the
decay of ``A**k`` towards its spectral projector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpectralData",
    "NotPrimitiveError",
    "ConvergenceError",
    "is_primitive",
    "perron_frobenius",
    "spectral_radius",
    "power_decay",
    "dominant_eigenpair",
]

MAX_DIM = 32
POWER_ITER_CAP = 100_000


class NotPrimitiveError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralData:
    rho: float
    u: np.ndarray
    v: np.ndarray
    pi: np.ndarray
    second_modulus: float

    def to_dict(self) -> dict:
        return {
            "rho": float(self.rho),
            "u": self.u.tolist(),
            "v": self.v.tolist(),
            "pi": self.pi.tolist(),
            "second_modulus": float(self.second_modulus),
        }


def _as_matrix(A) -> np.ndarray:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] > MAX_DIM:
        raise ValueError(f"dimension {A.shape[0]} exceeds supported maximum {MAX_DIM}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def is_primitive(A) -> bool:
    """True iff some power of ``A`` is entrywise positive.

    Uses the Wielandt exponent ``(p-1)**2 + 1`` on the zero pattern, so no
    floating point powers are formed.
    """
    A = _as_matrix(A)
    if np.any(A < 0):
        raise ValueError("is_primitive requires a nonnegative matrix")
    p = A.shape[0]
    pattern = (A > 0).astype(np.int64)
    k = (p - 1) ** 2 + 1
    result = np.eye(p, dtype=np.int64)
    base = pattern
    while k:
        if k & 1:
            result = (result @ base > 0).astype(np.int64)
        base = (base @ base > 0).astype(np.int64)
        k >>= 1
    return bool(np.all(result > 0))


def spectral_radius(A) -> float:
    A = _as_matrix(A)
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def _null_vector(B: np.ndarray) -> np.ndarray:
    # right singular vector of the smallest singular value
    _, _, vh = np.linalg.svd(B)
    return vh[-1].copy()


def _orient(x: np.ndarray) -> np.ndarray:
    # first nonzero coordinate positive, then clean round-off signs
    nz = np.flatnonzero(np.abs(x) > 1e-14 * np.max(np.abs(x)))
    if nz.size and x[nz[0]] < 0:
        x = -x
    x[np.abs(x) <= 1e-15 * np.max(np.abs(x))] = 0.0
    return x


def _refine(A: np.ndarray, rho: float, x: np.ndarray, steps: int = 2) -> np.ndarray:
    # inverse iteration with a tiny shift sharpens the SVD null vector
    p = A.shape[0]
    shift = rho * (1.0 + 1e-10) + 1e-14
    try:
        for _ in range(steps):
            y = np.linalg.solve(A - shift * np.eye(p), x)
            if not np.all(np.isfinite(y)):
                break
            x = y / np.linalg.norm(y)
    except np.linalg.LinAlgError:
        pass
    return x


def _power_iteration(A: np.ndarray, tol: float = 1e-12) -> tuple[float, np.ndarray]:
    p = A.shape[0]
    x = np.full(p, 1.0 / p)
    rho = 0.0
    for _ in range(POWER_ITER_CAP):
        y = A @ x
        s = y.sum()
        if s <= 0:
            raise ConvergenceError("power iteration collapsed to zero")
        y = y / s
        rq = float(y @ (A @ y)) / float(y @ y)
        if np.max(np.abs(y - x)) < tol and abs(rq - rho) < tol * max(1.0, abs(rq)):
            return rq, y
        x, rho = y, rq
    raise ConvergenceError(f"power iteration did not converge in {POWER_ITER_CAP} steps")


def dominant_eigenpair(A, rho: float | None = None) -> SpectralData:
    """Right/left eigenvectors for a simple real eigenvalue ``rho`` of ``A``.

    Does not require primitivity; the caller is responsible for checking that
    ``rho`` is simple and dominant. Raises ``ValueError`` when the vectors
    cannot be chosen nonnegative with ``v @ u > 0``.
    """
    A = _as_matrix(A)
    p = A.shape[0]
    eig = np.linalg.eigvals(A)
    mods = np.sort(np.abs(eig))[::-1]
    if rho is None:
        rho = float(np.real(eig[np.argmax(np.abs(eig))]))
    second = float(mods[1]) if p > 1 else 0.0

    I = np.eye(p)
    u = _orient(_refine(A, rho, _null_vector(A - rho * I)))
    v = _orient(_refine(A.T, rho, _null_vector(A.T - rho * I)))
    if np.any(u < -1e-12) or np.any(v < -1e-12):
        raise ValueError("dominant eigenvectors are not nonnegative")
    u = np.clip(u, 0.0, None)
    v = np.clip(v, 0.0, None)
    if u.sum() <= 0:
        raise ValueError("right eigenvector sums to zero")
    u = u / u.sum()
    vu = float(v @ u)
    if vu <= 1e-14:
        raise ValueError("left and right eigenvectors are orthogonal")
    v = v / vu
    return SpectralData(rho=float(rho), u=u, v=v, pi=np.outer(u, v), second_modulus=second)


def _residual_ok(A: np.ndarray, sd: SpectralData) -> bool:
    ru = np.linalg.norm(A @ sd.u - sd.rho * sd.u) <= 1e-10 * np.linalg.norm(sd.u)
    rv = np.linalg.norm(sd.v @ A - sd.rho * sd.v) <= 1e-10 * np.linalg.norm(sd.v)
    return bool(ru and rv)


def perron_frobenius(A) -> SpectralData:
    """Perron-Frobenius eigenvalue and eigenvectors of a primitive matrix.

    ``u`` sums to one, ``v @ u == 1`` and ``pi = outer(u, v)``. Falls back to
    power iteration on ``A`` and ``A.T`` if the direct solve leaves a residual
    above ``1e-10``.
    """
    A = _as_matrix(A)
    if not is_primitive(A):
        raise NotPrimitiveError("matrix is not primitive")
    eig = np.linalg.eigvals(A)
    rho = float(np.max(np.abs(eig)))
    sd = dominant_eigenpair(A, rho)
    if _residual_ok(A, sd):
        return sd
    rho_r, u = _power_iteration(A)
    _, v = _power_iteration(A.T)
    u = u / u.sum()
    v = v / float(v @ u)
    sd = SpectralData(rho=rho_r, u=u, v=v, pi=np.outer(u, v), second_modulus=sd.second_modulus)
    if not _residual_ok(A, sd):
        raise ConvergenceError("Perron-Frobenius eigenpair residual above 1e-10")
    return sd


def power_decay(A, pi, k_max: int) -> np.ndarray:
    """Operator 2-norms ``||A**k - pi||`` for ``k = 1..k_max``."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    A = _as_matrix(A)
    pi = np.asarray(pi, dtype=float)
    out = np.empty(k_max)
    Ak = np.eye(A.shape[0])
    for k in range(k_max):
        Ak = Ak @ A
        out[k] = np.linalg.norm(Ak - pi, 2)
    return out
