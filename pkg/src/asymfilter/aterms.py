"""A-terms: representation, symbolic differentiation, closure and integration.

An A-term of order ``n`` is the iterated integral over 0 < t_1 < ... < t_n < t

    prod_i mu_{t_i;t}^p_i * prod_i gamma(t_i, t; t)^q_i
        * prod_{i<=j} gamma(t_i, t_j; t)^r_ij  dlam_1 ... dlam_n

with ``dlam_i = ds`` when ``alpha_i == 0`` and ``dY - c mu_{s;t} ds`` when
``alpha_i == 1``.  Each A-term satisfies a forward SDE in ``t`` whose
right-hand side involves other A-terms of the same or lower order; repeated
differentiation closes after finitely many steps.

Differentiation uses three first-order facts about the smoothed moments of the
linear-Gaussian reference model (``I`` is the innovation ``dY - c mu_{t;t} dt``):

    d_t mu_{s;t}         = (c / sigma^2) gamma(s, t; t) dI
    d_t gamma(s, t; t)   = (a - c^2 gamma(t) / sigma^2) gamma(s, t; t) dt
    d_t gamma(s, u; t)   = -(c^2 / sigma^2) gamma(s, t; t) gamma(u, t; t) dt

together with ``d_t(dY_s - c mu_{s;t} ds) = -(c^2/sigma^2) gamma(s, t; t) ds dI``.
Since every innovation coefficient above is deterministic, Ito's formula for
the integrand F reads ``dF = (D_t F + sigma^2/2 D_I^2 F) dt + D_I F dI`` with
``D_t``, ``D_I`` derivations.  The outer boundary ``t_n = t`` contributes the
order-(n-1) term times the outer driver, plus ``sigma^2 (D_I Phi)|_{t_n=t} dt``
when that driver is the innovation (``Phi`` is the integrand without the outer
driver).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .poly import BETA, C, G, MU, S2, S2_INV, Poly

log = logging.getLogger(__name__)

_HALF = Poly.const(Fraction(1, 2))

DT = "dt"
INNOVATION = "innovation"


@dataclass(frozen=True, order=True)
class ATermSpec:
    """Multi-index (p, q, r, alpha; n) of one A-term.

    ``r`` is stored as an n-by-n tuple of tuples; only entries with
    ``i <= j`` may be nonzero.  ``n == 0`` is the unit constant.
    """

    n: int
    p: tuple = ()
    q: tuple = ()
    r: tuple = ()
    alpha: tuple = ()

    def __post_init__(self):
        n = self.n
        if n < 0:
            raise ValueError("order must be non-negative")
        if not (len(self.p) == len(self.q) == len(self.alpha) == len(self.r) == n):
            raise ValueError(f"inconsistent dimensions for order {n}")
        for row in self.r:
            if len(row) != n:
                raise ValueError("r must be n-by-n")
        for i in range(n):
            for j in range(i):
                if self.r[i][j]:
                    raise ValueError("r must be upper triangular")
        if any(v < 0 for v in self.p + self.q) or any(v < 0 for row in self.r for v in row):
            raise ValueError("exponents must be non-negative")
        if any(al not in (0, 1) for al in self.alpha):
            raise ValueError("alpha entries must be 0 or 1")

    @classmethod
    def make(cls, p, q, r, alpha) -> "ATermSpec":
        """Build from plain sequences; ``r`` may be a scalar when n == 1."""
        p, q, alpha = tuple(p), tuple(q), tuple(alpha)
        n = len(p)
        if np.isscalar(r):
            r = ((int(r),),)
        else:
            r = tuple(tuple(int(v) for v in row) for row in r)
        return cls(n, tuple(int(v) for v in p), tuple(int(v) for v in q), r, tuple(int(v) for v in alpha))

    @property
    def is_unit(self) -> bool:
        return self.n == 0

    def non_covariance_degree(self) -> int:
        """sum(p) + sum(r) + sum(alpha); strictly decreases on non-trivial edges."""
        return sum(self.p) + sum(sum(row) for row in self.r) + sum(self.alpha)

    def total_degree(self) -> int:
        return sum(self.p) + sum(self.q) + sum(sum(row) for row in self.r)

    def label(self) -> str:
        if self.n == 0:
            return "1"
        if self.n == 1:
            return f"A({self.p[0]},{self.q[0]},{self.r[0][0]},{self.alpha[0]};1)"

        def vec(v):
            return "(" + ",".join(str(x) for x in v) + ")"

        rr = "(" + ",".join(vec(row) for row in self.r) + ")"
        return f"A({vec(self.p)},{vec(self.q)},{rr},{vec(self.alpha)};{self.n})"

    def __str__(self):
        return self.label()


UNIT = ATermSpec(0)


def _replace(spec: ATermSpec, p=None, q=None, r=None, alpha=None) -> ATermSpec:
    return ATermSpec(
        spec.n,
        spec.p if p is None else tuple(p),
        spec.q if q is None else tuple(q),
        spec.r if r is None else tuple(tuple(row) for row in r),
        spec.alpha if alpha is None else tuple(alpha),
    )


def _add_terms(acc: dict, terms: Iterable):
    for spec, coef in terms:
        acc[spec] = acc.get(spec, Poly()) + coef


def _derive_innovation(spec: ATermSpec, include_outer_driver: bool = True) -> list:
    """D_I: innovation coefficient of the t-differential of the integrand."""
    out = []
    n = spec.n
    for i in range(n):
        if spec.p[i]:
            p, q = list(spec.p), list(spec.q)
            p[i] -= 1
            q[i] += 1
            out.append((_replace(spec, p=p, q=q), spec.p[i] * C * S2_INV))
        if spec.alpha[i] and (include_outer_driver or i < n - 1):
            al, q = list(spec.alpha), list(spec.q)
            al[i] = 0
            q[i] += 1
            out.append((_replace(spec, q=q, alpha=al), -(C * C * S2_INV)))
    return out


def _derive_time(spec: ATermSpec) -> list:
    """D_t: drift coefficient of the integrand's covariance factors."""
    out = []
    n = spec.n
    for i in range(n):
        if spec.q[i]:
            out.append((spec, spec.q[i] * BETA))
    for i in range(n):
        for j in range(i, n):
            rij = spec.r[i][j]
            if not rij:
                continue
            r = [list(row) for row in spec.r]
            q = list(spec.q)
            r[i][j] -= 1
            q[i] += 1
            q[j] += 1
            out.append((_replace(spec, q=q, r=r), -rij * C * C * S2_INV))
    return out


def _collect(terms: Iterable) -> dict:
    acc: dict = {}
    _add_terms(acc, terms)
    return {k: v for k, v in acc.items() if v}


def _apply(deriv, combo: dict) -> dict:
    acc: dict = {}
    for spec, coef in combo.items():
        _add_terms(acc, ((s, coef * k) for s, k in deriv(spec)))
    return {k: v for k, v in acc.items() if v}


def reduce_boundary(spec: ATermSpec) -> tuple:
    """Set the outermost time variable equal to t.

    Returns ``(lower_spec, local_coefficient)``; the outer driver is dropped.
    """
    n = spec.n
    if n == 0:
        raise ValueError("the unit term has no boundary")
    k = n - 1
    coef = MU ** spec.p[k] * G ** (spec.q[k] + spec.r[k][k])
    q = [spec.q[i] + spec.r[i][k] for i in range(k)]
    r = [list(spec.r[i][:k]) for i in range(k)]
    lower = ATermSpec(k, spec.p[:k], tuple(q), tuple(tuple(row) for row in r), spec.alpha[:k])
    return lower, coef


@dataclass(frozen=True)
class RHSTerm:
    """One summand ``coeff * target * driver`` of a generated right-hand side."""

    coeff: Poly
    target: ATermSpec
    driver: str

    def __post_init__(self):
        if self.coeff.is_zero():
            raise ValueError("RHSTerm coefficient must be nonzero")
        if self.driver not in (DT, INNOVATION):
            raise ValueError(f"unknown driver {self.driver!r}")

    def __str__(self):
        d = "dt" if self.driver == DT else "dI"
        tgt = "" if self.target.is_unit else f" {self.target.label()}"
        return f"[{self.coeff}]{tgt} {d}"


def differentiate(term: ATermSpec) -> list:
    """Complete t-differential of one A-term as a list of :class:`RHSTerm`.

    Terms are collected per (target, driver) and returned in canonical order.
    """
    if term.is_unit:
        return []
    dt_part: dict = {}
    dI_part: dict = {}

    # interior: Ito formula applied to the integrand including all drivers
    first = _collect(_derive_innovation(term))
    _add_terms(dI_part, first.items())
    _add_terms(dt_part, _derive_time(term))
    second = _apply(_derive_innovation, first)
    _add_terms(dt_part, ((s, k * S2 * _HALF) for s, k in second.items()))

    # boundary t_n = t
    lower, local = reduce_boundary(term)
    outer_is_innovation = term.alpha[-1] == 1
    _add_terms(dI_part if outer_is_innovation else dt_part, [(lower, local)])
    if outer_is_innovation:
        # sigma^2 * D_I(Phi) at t_n = t; Phi excludes the outer driver
        for s, k in _collect(_derive_innovation(term, include_outer_driver=False)).items():
            low, loc = reduce_boundary(s)
            _add_terms(dt_part, [(low, k * loc * S2)])

    out = []
    for driver, part in ((DT, dt_part), (INNOVATION, dI_part)):
        for spec in sorted(part):
            coef = part[spec]
            if coef:
                out.append(RHSTerm(coef, spec, driver))
    return out


class ClosureBudgetExceeded(RuntimeError):
    """Closure grew past the configured spec budget."""


@dataclass
class ATermSystem:
    """Closed set of A-terms with the generated right-hand side of each."""

    specs: list
    rhs: dict

    def __post_init__(self):
        self.index = {s: k for k, s in enumerate(self.specs)}

    def __len__(self):
        return len(self.specs)

    def __contains__(self, spec):
        return spec in self.index

    def is_closed(self) -> bool:
        return all(t.target.is_unit or t.target in self.index for terms in self.rhs.values() for t in terms)

    def edges(self):
        """Yield ``(source, target, driver)`` for every generated RHS term."""
        for s in self.specs:
            for t in self.rhs[s]:
                yield s, t.target, t.driver

    def listing(self) -> list:
        """Structured export: one ``(lhs, target, driver, coeff)`` row per term."""
        return [
            (s.label(), t.target.label(), t.driver, t.coeff)
            for s in self.specs
            for t in self.rhs[s]
        ]

    def format(self) -> str:
        """Human-readable equation listing, one equation per line."""
        lines = []
        for s in self.specs:
            body = " + ".join(str(t) for t in self.rhs[s]) or "0"
            lines.append(f"d{s.label()} = {body}")
        return "\n".join(lines)


def derive_closure(seeds: Iterable, budget: int = 10_000) -> ATermSystem:
    """Fixpoint of :func:`differentiate` over everything reachable from ``seeds``.

    Ordering is seeds first (deduplicated, unit dropped), then discovery order.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("derive_closure needs at least one seed")
    specs: list = []
    seen: set = set()
    for s in seeds:
        if not s.is_unit and s not in seen:
            seen.add(s)
            specs.append(s)
    rhs: dict = {}
    k = 0
    while k < len(specs):
        s = specs[k]
        terms = differentiate(s)
        rhs[s] = terms
        for t in terms:
            if not t.target.is_unit and t.target not in seen:
                seen.add(t.target)
                specs.append(t.target)
                if len(specs) > budget:
                    raise ClosureBudgetExceeded(
                        f"closure exceeded {budget} specs while expanding {s.label()}"
                    )
        k += 1
    log.debug("closure of %d seeds has %d specs", len(seeds), len(specs))
    return ATermSystem(specs, rhs)


# ---------------------------------------------------------------------------
# numerical integration


@dataclass
class CompiledSystem:
    """Flat arrays describing an :class:`ATermSystem` for fixed (a, c, sigma)."""

    n_specs: int
    rows: np.ndarray
    targets: np.ndarray
    drivers: np.ndarray
    mono_ptr: np.ndarray
    mono_mu: np.ndarray
    mono_g: np.ndarray
    mono_val: np.ndarray
    max_mu: int
    max_g: int
    c: float = 0.0
    sigma: float = 1.0


def compile_system(system: ATermSystem, a: float, c: float, sigma: float) -> CompiledSystem:
    rows, targets, drivers = [], [], []
    ptr, mmu, mg, mval = [0], [], [], []
    s2 = sigma * sigma
    for s in system.specs:
        for t in system.rhs[s]:
            table = t.coeff.mu_g_table(a, c, s2)
            nz = np.argwhere(table != 0.0)
            if len(nz) == 0:
                continue
            rows.append(system.index[s])
            targets.append(-1 if t.target.is_unit else system.index[t.target])
            drivers.append(0 if t.driver == DT else 1)
            for i, k in nz:
                mmu.append(i)
                mg.append(k)
                mval.append(table[i, k])
            ptr.append(len(mval))
    return CompiledSystem(
        len(system),
        np.asarray(rows, dtype=np.int64),
        np.asarray(targets, dtype=np.int64),
        np.asarray(drivers, dtype=np.int64),
        np.asarray(ptr, dtype=np.int64),
        np.asarray(mmu, dtype=np.int64),
        np.asarray(mg, dtype=np.int64),
        np.asarray(mval, dtype=np.float64),
        max(mmu, default=0),
        max(mg, default=0),
        float(c),
        float(sigma),
    )


def _euler_kernel(rows, targets, drivers, ptr, mmu, mg, mval, max_mu, max_g,
                  n_specs, mu, gamma, dI, dt, record, out, milstein, sigma2, c):
    """Euler-Maruyama (optionally Milstein) over the whole grid for one path.

    ``out[j, k]`` receives spec ``record[j]`` at step k.  Returns the first
    step index holding a non-finite value, or -1.

    The Milstein correction treats (A-terms, mu) as one state driven by the
    scalar innovation, whose quadratic variation is sigma^2 dt; mu has
    diffusion c gamma / sigma^2.
    """
    n_steps = dI.shape[0]
    n_terms = rows.shape[0]
    state = np.zeros(n_specs)
    new = np.zeros(n_specs)
    diff = np.zeros(n_specs)
    corr = np.zeros(n_specs)
    coefv = np.zeros(n_terms)
    dcoef = np.zeros(n_terms)
    mup = np.ones(max_mu + 1)
    gp = np.ones(max_g + 1)
    bad = -1
    for j in range(record.shape[0]):
        out[j, 0] = 0.0
    for k in range(n_steps):
        for d in range(1, max_mu + 1):
            mup[d] = mup[d - 1] * mu[k]
        for d in range(1, max_g + 1):
            gp[d] = gp[d - 1] * gamma[k]
        for i in range(n_specs):
            new[i] = state[i]
            diff[i] = 0.0
            corr[i] = 0.0
        for t in range(n_terms):
            coef = 0.0
            dc = 0.0
            for m in range(ptr[t], ptr[t + 1]):
                coef += mval[m] * mup[mmu[m]] * gp[mg[m]]
                if milstein and mmu[m] > 0:
                    dc += mval[m] * mmu[m] * mup[mmu[m] - 1] * gp[mg[m]]
            coefv[t] = coef
            dcoef[t] = dc
            x = 1.0 if targets[t] < 0 else state[targets[t]]
            if drivers[t] == 0:
                new[rows[t]] += coef * x * dt
            else:
                new[rows[t]] += coef * x * dI[k]
                diff[rows[t]] += coef * x
        if milstein:
            b_mu = c * gamma[k] / sigma2
            for t in range(n_terms):
                if drivers[t] == 1:
                    if targets[t] < 0:
                        corr[rows[t]] += dcoef[t] * b_mu
                    else:
                        corr[rows[t]] += coefv[t] * diff[targets[t]] + dcoef[t] * b_mu * state[targets[t]]
            w = 0.5 * (dI[k] * dI[k] - sigma2 * dt)
            for i in range(n_specs):
                new[i] += corr[i] * w
        for i in range(n_specs):
            state[i] = new[i]
            if bad < 0 and not np.isfinite(new[i]):
                bad = k + 1
        for j in range(record.shape[0]):
            out[j, k + 1] = state[record[j]]
    return bad


try:
    import numba

    _euler_kernel = numba.njit(cache=True, nogil=True)(_euler_kernel)
except ImportError:  # pragma: no cover - numba is a declared dependency
    pass


@dataclass
class ATermTrajectories:
    """Integrated A-term values on the time grid of one path."""

    specs: list
    values: np.ndarray
    first_nonfinite: int | None

    def __post_init__(self):
        self._index = {s: k for k, s in enumerate(self.specs)}

    def __getitem__(self, spec: ATermSpec) -> np.ndarray:
        if spec.is_unit:
            return np.ones(self.values.shape[1])
        return self.values[self._index[spec]]

    def __contains__(self, spec):
        return spec.is_unit or spec in self._index

    @property
    def ok(self) -> bool:
        return self.first_nonfinite is None


def innovation_increments(dy: np.ndarray, mu: np.ndarray, c: float, dt: float) -> np.ndarray:
    """Left-point innovation increments ``dY_k - c mu_k dt``."""
    return dy - c * mu[:-1] * dt


SCHEMES = ("euler", "milstein")


def integrate_compiled(compiled: CompiledSystem, mu, gamma, dI, dt, record_idx,
                       scheme: str = "euler") -> tuple:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    record_idx = np.asarray(record_idx, dtype=np.int64)
    out = np.empty((len(record_idx), len(mu)))
    bad = _euler_kernel(
        compiled.rows, compiled.targets, compiled.drivers, compiled.mono_ptr,
        compiled.mono_mu, compiled.mono_g, compiled.mono_val, compiled.max_mu,
        compiled.max_g, compiled.n_specs, np.ascontiguousarray(mu, dtype=np.float64),
        np.ascontiguousarray(gamma, dtype=np.float64),
        np.ascontiguousarray(dI, dtype=np.float64), float(dt), record_idx, out,
        scheme == "milstein", compiled.sigma ** 2, compiled.c,
    )
    return out, (None if bad < 0 else int(bad))


def integrate_system(system: ATermSystem, path, mu, gamma, params, record=None,
                     scheme: str = "euler") -> ATermTrajectories:
    """Integrate the closed system along one observation path.

    ``mu`` and ``gamma`` are the Kalman-Bucy trajectories (gain ``c``) on the
    path's grid.  All A-terms start at zero.  ``record`` restricts the returned
    trajectories to a subset of specs (default: every spec in the system).
    """
    n = len(path.y)
    if len(mu) != n or len(gamma) != n:
        raise ValueError(
            f"grid mismatch: path has {n} points, mu {len(mu)}, gamma {len(gamma)}"
        )
    if not system.is_closed():
        raise ValueError("system is not closed")
    record = list(system.specs) if record is None else [s for s in record if not s.is_unit]
    idx = [system.index[s] for s in record]
    compiled = compile_system(system, params.a, params.c, params.sigma)
    dt = path.grid.dt
    dI = innovation_increments(np.diff(path.y), np.asarray(mu), params.c, dt)
    values, bad = integrate_compiled(compiled, mu, gamma, dI, dt, idx, scheme)
    if bad is not None:
        log.warning("non-finite A-term value first at step %d", bad)
    return ATermTrajectories(record, values, bad)
