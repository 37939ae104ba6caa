"""Independent reference computations shared by the unit and acceptance tests."""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np

from cmbp import laws
from cmbp.model import (
    ModelSpec,
    affine_control,
    append_unit_control,
    identity_control,
    migration_control,
    promiscuous_control,
    selffert_control,
)

F = Fraction


def _zero_mean_a_laws() -> list[dict[int, Fraction]]:
    """Zero-mean laws on {-2..2} with rational weights, A = 0 included."""
    out = [{0: F(1)}]
    for neg, pos in itertools.product((1, 2), repeat=2):
        for w in (F(1), F(1, 2), F(1, 3)):
            # P(-neg) * neg = P(pos) * pos keeps the mean at zero
            law = {-neg: w * pos / (neg + pos), pos: w * neg / (neg + pos)}
            if w < 1:
                law[0] = 1 - w
            out.append(law)
    out.append({-2: F(1, 8), -1: F(1, 4), 0: F(1, 4), 1: F(1, 4), 2: F(1, 8)})
    out.append({-2: F(1, 10), -1: F(3, 10), 0: F(3, 10), 1: F(1, 10), 2: F(1, 5)})
    return out


def _b_laws() -> list[dict[int, Fraction]]:
    """Laws on {0..4} with rational weights: points, two-point and a few spreads."""
    out = [{b: F(1)} for b in range(5)]
    for lo, hi in itertools.combinations(range(5), 2):
        out.append({lo: F(1, 2), hi: F(1, 2)})
    out.append({b: F(1, 5) for b in range(5)})
    out.append({0: F(1, 16), 1: F(4, 16), 2: F(6, 16), 3: F(4, 16), 4: F(1, 16)})
    out.append({0: F(1, 2), 4: F(1, 4), 2: F(1, 4)})
    out.append({1: F(1, 3), 3: F(2, 3)})
    out.append({0: F(2, 3), 1: F(1, 6), 4: F(1, 6)})
    return out


def small_table_pairs(count: int = 200):
    a_laws = _zero_mean_a_laws()
    b_laws = _b_laws()
    for a in a_laws:
        assert sum(a.values()) == 1 and sum(k * w for k, w in a.items()) == 0
    for b in b_laws:
        assert sum(b.values()) == 1
    pairs = list(itertools.product(a_laws, b_laws))
    assert len(pairs) >= count
    return pairs[:count]


def law_moments(law: dict[int, Fraction]):
    mean = sum(k * w for k, w in law.items())
    var = sum((k - mean) ** 2 * w for k, w in law.items())
    fourth = sum((k - mean) ** 4 * w for k, w in law.items())
    return mean, var, fourth


def convolve(x: dict[int, Fraction], y: dict[int, Fraction]) -> dict[int, Fraction]:
    out: dict[int, Fraction] = {}
    for (a, wa), (b, wb) in itertools.product(x.items(), y.items()):
        out[a + b] = out.get(a + b, F(0)) + wa * wb
    return out


def random_sum_fourth_by_enumeration(a_law, b_law) -> Fraction:
    """E (A_1 + ... + A_B)^4 by building the law of the sum for each B value."""
    total = F(0)
    for b, wb in b_law.items():
        s = {0: F(1)}
        for _ in range(b):
            s = convolve(s, a_law)
        total += wb * sum(k**4 * w for k, w in s.items())
    return total


# --------------------------------------------------------------------------
# random models


def random_law(rng: np.random.Generator, dim: int, depth: int = 0) -> laws.DiscreteLaw:
    kinds = ["deterministic", "table", "poisson", "bernoulli_vector", "product", "shifted"]
    if depth > 0:
        kinds = kinds[:4]
    kind = kinds[rng.integers(len(kinds))]
    scale = 1.0 / dim
    if kind == "deterministic":
        return laws.deterministic(rng.integers(0, 2, size=dim))
    if kind == "table":
        k = int(rng.integers(1, 4))
        support = rng.integers(0, 3, size=(k, dim))
        probs = rng.dirichlet(np.ones(k))
        probs[-1] = 1.0 - probs[:-1].sum()
        return laws.table(support, probs)
    if kind == "poisson":
        return laws.poisson(rng.uniform(0, scale, size=dim))
    if kind == "bernoulli_vector":
        return laws.bernoulli_vector(rng.integers(0, 3, size=dim), rng.uniform(0, 0.6))
    if kind == "product":
        return laws.product([random_law(rng, 1, depth + 1) for _ in range(dim)])
    return laws.shifted(random_law(rng, dim, depth + 1), rng.integers(0, 2, size=dim))


def random_control(rng: np.random.Generator, p: int):
    options = ["identity", "migration", "affine"]
    if p >= 2:
        options.append("append_unit")
    if p == 2:
        options += ["promiscuous", "selffert"]
    kind = options[rng.integers(len(options))]
    if kind == "identity":
        return identity_control(p)
    if kind == "migration":
        k = 3
        support = rng.integers(-1, 2, size=(k, p))
        probs = rng.dirichlet(np.ones(k))
        probs[-1] = 1.0 - probs[:-1].sum()
        return migration_control(laws.table(support, probs), gated=True)
    if kind == "affine":
        return affine_control(rng.integers(0, 2, size=(p, p)), rng.integers(0, 2, size=p),
                              zero_at_origin=bool(rng.integers(2)))
    if kind == "append_unit":
        return append_unit_control(p)
    if kind == "promiscuous":
        return promiscuous_control()
    return selffert_control()


def _linear_part(control, p: int) -> np.ndarray:
    if control.is_affine:
        return control.matrix.astype(float)
    if control.kind == "mating_promiscuous":
        return np.array([[1.0, 0.0], [0.0, 0.0]])
    return np.eye(p)


def random_model(seed: int) -> ModelSpec:
    """Random model whose population grows at most like ``1.1**k``.

    The declared ``Lambda`` is either the control's linear part or an
    arbitrary 0/1 matrix rescaled so that ``m Lambda`` has spectral radius at
    most 1; the residual ``g`` absorbs the difference. Larger radii amplify
    rounding by ``rho**k`` and would swamp any fixed absolute tolerance.
    """
    rng = np.random.default_rng(seed)
    while True:
        p = int(rng.integers(1, 4))
        offspring = [random_law(rng, p) for _ in range(p)]
        control = random_control(rng, p)
        m = np.column_stack([law.summary.mean for law in offspring])
        if max(abs(np.linalg.eigvals(m @ _linear_part(control, p)))) <= 1.1:
            break
    if rng.random() < 0.5:
        Lambda = _linear_part(control, p)
    else:
        Lambda = rng.integers(0, 2, size=(p, p)).astype(float)
    rho = max(abs(np.linalg.eigvals(m @ Lambda)))
    if rho > 1:
        Lambda = Lambda / rho
    alpha = rng.uniform(-1, 1, size=p)
    z0 = laws.table(rng.integers(0, 4, size=(2, p)), [0.5, 0.5])
    return ModelSpec(p, offspring, control, Lambda, alpha, z0, name=f"random-{seed}")


# --------------------------------------------------------------------------
# psi_n and v_n by direct summation of matrix powers


def psi_n_direct(f_values: np.ndarray, n: int, m_tilde: np.ndarray, m_alpha: np.ndarray) -> np.ndarray:
    """Each index evaluated from scratch with explicit matrix powers."""
    K = len(f_values)
    out = np.zeros_like(f_values, dtype=float)
    for k in range(K):
        acc = np.linalg.matrix_power(m_tilde, k) @ f_values[0]
        for j in range(1, k + 1):
            acc = acc + np.linalg.matrix_power(m_tilde, k - j) @ (f_values[j] - f_values[j - 1] + m_alpha / n)
        out[k] = acc
    return out


def v_n_direct(g_values: np.ndarray, n: int, m_tilde: np.ndarray, m: np.ndarray) -> np.ndarray:
    """``g_values[j]`` holds ``g(Z_j)``; index ``k`` sums ``j = 1..k``."""
    K = len(g_values)
    out = np.zeros((K, m.shape[0]))
    for k in range(K):
        acc = np.zeros(m.shape[0])
        for j in range(1, k + 1):
            acc = acc + np.linalg.matrix_power(m_tilde, k - j) @ (m @ g_values[j - 1])
        out[k] = acc / n
    return out


# --------------------------------------------------------------------------
# Monte Carlo moment comparison


def moment_deviations(draws: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Errors of the sample mean and covariance in units of their standard errors.

    Zero-variance entries must match exactly; they are reported as 0 or inf.
    """
    x = np.asarray(draws, dtype=float)
    n, p = x.shape
    c = x - mean
    dev_mean = np.zeros(p)
    for i in range(p):
        err = c[:, i].mean()
        se = c[:, i].std() / np.sqrt(n)
        dev_mean[i] = abs(err) / se if se > 0 else (0.0 if err == 0 else np.inf)
    dev_cov = np.zeros((p, p))
    for i in range(p):
        for j in range(p):
            prod = c[:, i] * c[:, j]
            err = prod.mean() - cov[i, j]
            se = prod.std() / np.sqrt(n)
            dev_cov[i, j] = abs(err) / se if se > 0 else (0.0 if abs(err) <= 1e-12 else np.inf)
    return dev_mean, dev_cov
