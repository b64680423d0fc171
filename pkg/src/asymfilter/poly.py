"""Sparse polynomials over the local scalars of the expansion.

Coefficients of A-term combinations and of generated right-hand sides are
polynomials in five symbols:

    a      signal drift coefficient
    c      linear observation gain
    s2     observation variance sigma**2 (negative powers allowed)
    mu     current filter mean mu_{t;t}
    g      current filter variance gamma(t)

A monomial is a tuple of five integer exponents in that order.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterator

import numpy as np

SYMBOLS = ("a", "c", "s2", "mu", "g")
_ZERO = (0, 0, 0, 0, 0)


def _mono(**powers: int) -> tuple:
    return tuple(powers.get(s, 0) for s in SYMBOLS)


class Poly:
    """Immutable polynomial with rational coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms=None):
        clean = {}
        if terms:
            for mono, coef in terms.items():
                coef = Fraction(coef)
                if coef != 0:
                    clean[tuple(mono)] = clean.get(tuple(mono), 0) + coef
            clean = {m: v for m, v in clean.items() if v != 0}
        self._terms = clean
        self._hash = None

    @classmethod
    def const(cls, value) -> "Poly":
        return cls({_ZERO: value})

    @classmethod
    def symbol(cls, name: str, power: int = 1) -> "Poly":
        return cls({_mono(**{name: power}): 1})

    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self) -> Iterator:
        return iter(sorted(self._terms.items()))

    def is_zero(self) -> bool:
        return not self._terms

    def __bool__(self):
        return bool(self._terms)

    def __add__(self, other):
        other = _as_poly(other)
        out = dict(self._terms)
        for m, v in other._terms.items():
            out[m] = out.get(m, 0) + v
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly({m: -v for m, v in self._terms.items()})

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        other = _as_poly(other)
        out: dict = {}
        for m1, v1 in self._terms.items():
            for m2, v2 in other._terms.items():
                m = tuple(x + y for x, y in zip(m1, m2))
                out[m] = out.get(m, 0) + v1 * v2
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        try:
            other = _as_poly(other)
        except TypeError:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def degree_in(self, name: str) -> int:
        k = SYMBOLS.index(name)
        return max((m[k] for m in self._terms), default=0)

    def evaluate(self, a=0.0, c=0.0, s2=1.0, mu=0.0, g=0.0):
        """Numeric value; ``mu`` and ``g`` may be numpy arrays."""
        vals = (a, c, s2, mu, g)
        total = 0.0
        for m, v in self._terms.items():
            term = float(v)
            for x, e in zip(vals, m):
                if e:
                    term = term * np.power(x, e) if isinstance(x, np.ndarray) else term * float(x) ** e
            total = total + term
        return total

    def mu_g_table(self, a: float, c: float, s2: float) -> np.ndarray:
        """Dense table T[i, k] with value = sum_ik T[i, k] mu**i g**k."""
        dm = self.degree_in("mu")
        dg = self.degree_in("g")
        table = np.zeros((dm + 1, dg + 1))
        for m, v in self._terms.items():
            table[m[3], m[4]] += float(v) * a ** m[0] * c ** m[1] * s2 ** m[2]
        return table

    def __repr__(self):
        return f"Poly({self})"

    def __str__(self):
        if not self._terms:
            return "0"
        parts = []
        for m, v in sorted(self._terms.items(), key=lambda kv: (-sum(abs(e) for e in kv[0]), kv[0])):
            factors = []
            for name, e in zip(SYMBOLS, m):
                label = {"g": "gamma(t)", "mu": "mu(t)"}.get(name, name)
                if name == "s2" and e:
                    label, e = "sigma", 2 * e
                if e == 1:
                    factors.append(label)
                elif e:
                    factors.append(f"{label}^{e}")
            body = "*".join(factors)
            if not body:
                parts.append(str(v))
            elif v == 1:
                parts.append(body)
            elif v == -1:
                parts.append("-" + body)
            else:
                parts.append(f"{v}*{body}")
        return " + ".join(parts).replace("+ -", "- ")


def _as_poly(x) -> Poly:
    if isinstance(x, Poly):
        return x
    if isinstance(x, (int, Fraction)):
        return Poly.const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to Poly")


A = Poly.symbol("a")
C = Poly.symbol("c")
S2_INV = Poly.symbol("s2", -1)
S2 = Poly.symbol("s2")
MU = Poly.symbol("mu")
G = Poly.symbol("g")
# a - c^2 gamma(t) / sigma^2: the decay rate of gamma(s, t; t) in t
BETA = A - C * C * G * S2_INV
