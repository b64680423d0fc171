"""Gaussian moments by Wick pairing, and the A-term decomposition of J-terms.

``J_t^n(U)`` is the reference-measure expectation of ``U`` times the n-fold
iterated integral of ``g(X_{t_1}) ... g(X_{t_n})`` against
``(dY - c X ds)``.  Under the reference measure the path of X is Gaussian with
smoothed means ``mu_{s;t}`` and covariances ``gamma(s, u; t)``, so splitting
``X_s = mu_{s;t} + Z_s`` and ``dY - c X ds = (dY - c mu ds) - c Z ds`` turns
every integrand into a polynomial in centred Gaussians.  Pairing them reduces
``J_t^n(U)`` to a finite linear combination of A-terms whose coefficients are
polynomials in the local scalars ``mu_{t;t}``, ``gamma(t)`` and ``c``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .aterms import UNIT, ATermSpec
from .poly import C, G, MU, Poly


@lru_cache(maxsize=None)
def wick_pairings(exponents: tuple) -> dict:
    """Centred Gaussian moment E[prod Z_v^k_v] as pairing counts.

    Returns ``{pair_exponents: count}`` where ``pair_exponents`` is a tuple
    over the pairs (i, j), i <= j, in lexicographic order, and ``count`` is
    the number of perfect matchings that use each pair that many times.
    """
    exponents = tuple(int(k) for k in exponents)
    if any(k < 0 for k in exponents):
        raise ValueError("exponents must be non-negative")
    m = len(exponents)
    pairs = [(i, j) for i in range(m) for j in range(i, m)]
    slot = {pr: k for k, pr in enumerate(pairs)}
    if sum(exponents) % 2:
        return {}
    if sum(exponents) == 0:
        return {(0,) * len(pairs): 1}
    u = next(i for i, k in enumerate(exponents) if k)
    rest = list(exponents)
    rest[u] -= 1
    out: dict = {}
    for v in range(m):
        mult = rest[v]
        if not mult:
            continue
        reduced = list(rest)
        reduced[v] -= 1
        for key, count in wick_pairings(tuple(reduced)).items():
            key = list(key)
            key[slot[(min(u, v), max(u, v))]] += 1
            key = tuple(key)
            out[key] = out.get(key, 0) + mult * count
    return out


def pair_index(m: int) -> list:
    """Pairs (i, j), i <= j, over m variables in the order used by the pairing keys."""
    return [(i, j) for i in range(m) for j in range(i, m)]


@dataclass
class WickPolynomial:
    """Polynomial in symbolic means and covariances.

    ``terms`` maps ``(mean_exponents, cov_exponents)`` to a rational
    coefficient; covariance exponents follow :func:`pair_index` order.
    """

    mean_symbols: tuple
    cov_symbols: tuple
    terms: dict = field(default_factory=dict)

    def evaluate(self, means, cov) -> float:
        means = np.asarray(means, dtype=float)
        cov = np.asarray(cov, dtype=float)
        pairs = pair_index(len(means))
        cv = np.array([cov[i, j] for i, j in pairs])
        total = 0.0
        for (me, ce), coef in self.terms.items():
            total += float(coef) * np.prod(means ** np.array(me)) * np.prod(cv ** np.array(ce))
        return total

    def is_zero(self) -> bool:
        return not self.terms

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for (me, ce), coef in sorted(self.terms.items(), reverse=True):
            fac = [f"{s}^{e}" if e > 1 else s for s, e in zip(self.mean_symbols, me) if e]
            fac += [f"{s}^{e}" if e > 1 else s for s, e in zip(self.cov_symbols, ce) if e]
            body = "*".join(fac) or "1"
            parts.append(body if coef == 1 else f"{coef}*{body}")
        return " + ".join(parts)


def isserlis_moment(exponents, mean_symbols=None, cov_symbols=None) -> WickPolynomial:
    """E[prod X_i^k_i] for jointly Gaussian X with symbolic means and covariances.

    ``cov_symbols`` may be a symmetric matrix of names or ``None`` for the
    default ``G<i><j>`` labels; only the upper triangle is used, so symmetric
    entries never produce duplicate terms.
    """
    exponents = tuple(int(k) for k in exponents)
    if any(k < 0 for k in exponents):
        raise ValueError("exponents must be non-negative")
    m = len(exponents)
    if mean_symbols is None:
        mean_symbols = tuple(f"mu{i}" for i in range(m))
    if len(mean_symbols) != m:
        raise ValueError("one mean symbol per variable")
    pairs = pair_index(m)
    if cov_symbols is None:
        cov_names = tuple(f"G{i}{j}" for i, j in pairs)
    else:
        for i in range(m):
            for j in range(m):
                if cov_symbols[i][j] != cov_symbols[j][i]:
                    raise ValueError("covariance symbols must be symmetric")
        cov_names = tuple(cov_symbols[i][j] for i, j in pairs)

    terms: dict = {}
    for split in itertools.product(*(range(k + 1) for k in exponents)):
        # split[i] = power of the centred part taken from (mu_i + Z_i)^k_i
        binom = 1
        for k, e in zip(exponents, split):
            binom *= comb(k, e)
        mean_exp = tuple(k - e for k, e in zip(exponents, split))
        for cov_exp, count in wick_pairings(tuple(split)).items():
            key = (mean_exp, cov_exp)
            terms[key] = terms.get(key, 0) + Fraction(binom * count)
    terms = {k: v for k, v in terms.items() if v}
    return WickPolynomial(tuple(mean_symbols), cov_names, terms)


class ATermCombo:
    """Finite linear combination of A-terms with local-scalar coefficients."""

    def __init__(self, terms=None):
        self.terms = {s: c for s, c in (terms or {}).items() if c}

    def __add__(self, other: "ATermCombo") -> "ATermCombo":
        out = dict(self.terms)
        for s, c in other.terms.items():
            out[s] = out.get(s, Poly()) + c
        return ATermCombo(out)

    def __sub__(self, other: "ATermCombo") -> "ATermCombo":
        return self + other.scale(Poly.const(-1))

    def scale(self, factor: Poly) -> "ATermCombo":
        return ATermCombo({s: c * factor for s, c in self.terms.items()})

    def items(self):
        """Terms in canonical (sorted) order."""
        return sorted(self.terms.items())

    def specs(self) -> list:
        return [s for s, _ in self.items()]

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        return isinstance(other, ATermCombo) and self.terms == other.terms

    def evaluate(self, values, mu, gamma, a: float, c: float, sigma: float):
        """Numeric trajectory given A-term trajectories ``values[spec]``."""
        total = 0.0
        for spec, coef in self.items():
            total = total + coef.evaluate(a=a, c=c, s2=sigma * sigma, mu=mu, g=gamma) * values[spec]
        return total

    def __str__(self):
        parts = []
        for spec, coef in self.items():
            parts.append(f"[{coef}]" + ("" if spec.is_unit else f"*{spec.label()}"))
        return " + ".join(parts) or "0"


@lru_cache(maxsize=None)
def centered_j_term(m: int, j: int, n: int) -> ATermCombo:
    """A-term decomposition of J_t^n(Z_t^m), Z_t = X_t - mu_{t;t}, g(x) = x^j."""
    if m < 0 or j < 0 or n < 0:
        raise ValueError("indices must be non-negative")
    acc: dict = {}
    pairs = pair_index(n + 1)
    for drivers in itertools.product((1, 0), repeat=n):
        for powers in itertools.product(range(j + 1), repeat=n):
            # variable 0 is X_t, variable k is X_{t_k}
            z_exp = (m,) + tuple(e + (1 - d) for e, d in zip(powers, drivers))
            base = Poly.const(1)
            for e in powers:
                base = base * comb(j, e)
            base = base * (-C) ** drivers.count(0)
            p = tuple(j - e for e in powers)
            for key, count in wick_pairings(z_exp).items():
                cov = dict(zip(pairs, key))
                q = tuple(cov[(0, k)] for k in range(1, n + 1))
                r = tuple(
                    tuple(cov[(i, k)] if k >= i else 0 for k in range(1, n + 1))
                    for i in range(1, n + 1)
                )
                spec = ATermSpec(n, p, q, r, tuple(drivers)) if n else UNIT
                coef = base * count * G ** cov[(0, 0)]
                acc[spec] = acc.get(spec, Poly()) + coef
    return ATermCombo(acc)


def functional_j_term(u_coeffs: dict, j: int, n: int) -> ATermCombo:
    """J_t^n(U) for U = sum_m u_coeffs[m] * Z_t^m with local-scalar coefficients."""
    out = ATermCombo()
    for m, coef in sorted(u_coeffs.items()):
        if coef:
            out = out + centered_j_term(m, j, n).scale(coef)
    return out


@lru_cache(maxsize=None)
def decompose_j_term(i: int, j: int, n: int) -> ATermCombo:
    """A-term decomposition of J_t^n(X_t^i) with g(x) = x^j.

    No sigma factors are included; the expansion weight of order n carries
    ``sigma**(-2n)`` (see :mod:`asymfilter.filtering`).
    """
    if i < 0 or j < 0 or n < 0:
        raise ValueError("indices must be non-negative")
    u = {m: comb(i, m) * MU ** (i - m) for m in range(i + 1)}
    return functional_j_term(u, j, n)
