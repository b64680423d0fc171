import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from asymfilter.aterms import (
    DT,
    INNOVATION,
    UNIT,
    ATermSpec,
    ATermSystem,
    ClosureBudgetExceeded,
    RHSTerm,
    derive_closure,
    differentiate,
    integrate_system,
    reduce_boundary,
)
from asymfilter.filtering import kalman_bucy
from asymfilter.poly import BETA, C, G, MU, S2_INV, Poly
from asymfilter.sde import ModelParams, SamplePath, TimeGrid, simulate_path
from asymfilter.wick import decompose_j_term

A1001 = ATermSpec.make([1], [0], 0, [1])
A0101 = ATermSpec.make([0], [1], 0, [1])
A1100 = ATermSpec.make([1], [1], 0, [0])
A0200 = ATermSpec.make([0], [2], 0, [0])
A0000 = ATermSpec.make([0], [0], 0, [0])


def rhs_map(terms):
    return {(t.target, t.driver): t.coeff for t in terms}


def test_spec_validation():
    with pytest.raises(ValueError):
        ATermSpec(1, (1,), (0,), ((0,),), (2,))
    with pytest.raises(ValueError):
        ATermSpec(2, (0, 0), (0, 0), ((0, 0), (1, 0)), (0, 0))
    with pytest.raises(ValueError):
        ATermSpec(1, (1, 0), (0,), ((0,),), (0,))
    with pytest.raises(ValueError):
        ATermSpec(1, (-1,), (0,), ((0,),), (0,))
    assert A1001.label() == "A(1,0,0,1;1)"
    assert UNIT.is_unit and UNIT.label() == "1"


def test_differentiate_first_seed():
    got = rhs_map(differentiate(A1001))
    assert got == {
        (UNIT, DT): C * G,
        (A0200, DT): -(C ** 3) * S2_INV,
        (UNIT, INNOVATION): MU,
        (A0101, INNOVATION): C * S2_INV,
        (A1100, INNOVATION): -(C ** 2) * S2_INV,
    }


def test_differentiate_square_covariance_term():
    got = rhs_map(differentiate(A0200))
    assert got == {(A0200, DT): 2 * BETA, (UNIT, DT): G * G}


def test_differentiate_time_integral():
    assert rhs_map(differentiate(A0000)) == {(UNIT, DT): Poly.const(1)}
    assert differentiate(UNIT) == []


def test_reduce_boundary_merges_cross_covariances():
    spec = ATermSpec(2, (1, 2), (0, 1), ((1, 3), (0, 1)), (1, 0))
    lower, coef = reduce_boundary(spec)
    assert lower == ATermSpec.make([1], [3], 1, [1])
    assert coef == MU ** 2 * G ** 2


def test_rhs_term_validation():
    with pytest.raises(ValueError):
        RHSTerm(Poly(), A0200, DT)
    with pytest.raises(ValueError):
        RHSTerm(G, A0200, "ds")


def test_closure_of_first_seed_listing():
    system = derive_closure([A1001])
    assert system.specs == [A1001, A0200, A0101, A1100]
    assert system.is_closed()
    text = system.format()
    assert text.splitlines()[0].startswith("dA(1,0,0,1;1) = [c*gamma(t)] dt")
    assert len(system.listing()) == sum(len(v) for v in system.rhs.values()) == 13


def test_closure_of_time_integral():
    system = derive_closure([A0000])
    assert system.specs == [A0000]
    assert [(t.target, t.driver, t.coeff) for t in system.rhs[A0000]] == [(UNIT, DT, Poly.const(1))]


def expansion_seeds(order, j):
    seeds = set()
    for n in range(1, order + 1):
        for i in (0, 1):
            seeds.update(s for s in decompose_j_term(i, j, n).specs() if not s.is_unit)
    return sorted(seeds)


@pytest.mark.parametrize("order,j,size", [(1, 3, 14), (2, 3, 356)])
def test_closure_sizes_are_pinned(order, j, size):
    assert len(derive_closure(expansion_seeds(order, j))) == size


def check_degree_monotone(system: ATermSystem):
    for src, dst, _ in system.edges():
        if dst.is_unit or dst == src:
            continue
        if dst.n == src.n:
            assert dst.non_covariance_degree() < src.non_covariance_degree(), (src, dst)
        else:
            assert dst.n < src.n, (src, dst)


@pytest.mark.parametrize("order", [1, 2])
@pytest.mark.parametrize("j", [1, 2, 3])
def test_degree_monotone_on_expansion_closures(order, j):
    system = derive_closure(expansion_seeds(order, j))
    assert system.is_closed()
    check_degree_monotone(system)
    # self-loops only come from the gamma(s, t; t) decay rate
    for s in system.specs:
        for t in system.rhs[s]:
            if t.target == s:
                assert t.driver == DT and t.coeff == sum(s.q) * BETA


def random_spec(draw):
    n = draw(st.integers(1, 2))
    budget = 6
    p = [draw(st.integers(0, 2)) for _ in range(n)]
    q = [draw(st.integers(0, 2)) for _ in range(n)]
    r = [[draw(st.integers(0, 1)) if j >= i else 0 for j in range(n)] for i in range(n)]
    if sum(p) + sum(q) + sum(map(sum, r)) > budget:
        p = [0] * n
    alpha = [draw(st.integers(0, 1)) for _ in range(n)]
    return ATermSpec.make(p, q, r, alpha)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_closure_terminates_for_random_seeds(data):
    seed = random_spec(data.draw)
    system = derive_closure([seed], budget=2_000)
    assert system.specs[0] == seed
    assert system.is_closed()
    check_degree_monotone(system)


def test_closure_is_minimal():
    seeds = expansion_seeds(1, 3)
    system = derive_closure(seeds)
    referenced = {t.target for terms in system.rhs.values() for t in terms}
    for s in system.specs:
        if s not in seeds:
            others = {t.target for src in system.specs if src != s for t in system.rhs[src]}
            assert s in others and s in referenced


def test_closure_budget_and_empty_seed():
    with pytest.raises(ClosureBudgetExceeded):
        derive_closure(expansion_seeds(2, 3), budget=50)
    with pytest.raises(ValueError):
        derive_closure([])


def test_closure_is_deterministic():
    a = derive_closure(expansion_seeds(2, 3))
    b = derive_closure(expansion_seeds(2, 3))
    assert a.specs == b.specs
    assert a.format() == b.format()


# --- integration against definition-based oracles ---------------------------

P = ModelParams(a=-0.4, b=0.5, c=1.0, sigma=0.3, epsilon=0.0)


def decay_kernel(params, gamma, dt):
    """B(t) = int_0^t beta(u) du, so gamma(s, t; t) = gamma(s) exp(B(t) - B(s))."""
    beta = params.a - params.c ** 2 * gamma / params.sigma ** 2
    return np.concatenate(([0.0], np.cumsum(beta[:-1] * dt)))


def test_squared_covariance_against_quadrature():
    grid = TimeGrid(5.0, 0.001)
    path = simulate_path(P, grid, 1)
    st_ = kalman_bucy(P, path)
    B = decay_kernel(P, st_.gamma, grid.dt)
    traj = integrate_system(derive_closure([A0200]), path, st_.mu, st_.gamma, P)
    for k in (1000, 2500, 5000):
        s = slice(0, k)
        exact = np.sum((st_.gamma[s] * np.exp(B[k] - B[s])) ** 2) * grid.dt
        assert traj[A0200][k] == pytest.approx(exact, rel=1e-2)


def smoothed_terms(params, path, state, k):
    """Definition-based A(1,1,0,0;1), A(1,0,0,1;1), A(0,1,0,1;1) at grid index k."""
    dt = path.grid.dt
    mu, g = state.mu, state.gamma
    B = decay_kernel(params, g, dt)
    dI = path.dy - params.c * mu[:-1] * dt
    # K[s] = sum_{u >= s, u < k} exp(B_u) dI_u (smoothing uses the increment at s)
    w = np.exp(B[:k]) * dI[:k]
    tail = np.cumsum(w[::-1])[::-1]
    s = slice(0, k)
    msm = mu[s] + params.c / params.sigma ** 2 * g[s] * np.exp(-B[s]) * tail
    gst = g[s] * np.exp(B[k] - B[s])
    dlam = path.dy[:k] - params.c * msm * dt
    return {
        A1100: np.sum(msm * gst) * dt,
        A1001: np.sum(msm * dlam),
        A0101: np.sum(gst * dlam),
    }


@pytest.mark.parametrize("scheme", ["euler", "milstein"])
def test_first_seed_against_smoothed_definition(scheme):
    grid = TimeGrid(5.0, 0.0005)
    path = simulate_path(P, grid, 4)
    st_ = kalman_bucy(P, path)
    traj = integrate_system(derive_closure([A1001]), path, st_.mu, st_.gamma, P, scheme=scheme)
    for k in (4000, 10_000):
        ref = smoothed_terms(P, path, st_, k)
        for spec, val in ref.items():
            assert traj[spec][k] == pytest.approx(val, rel=0.03, abs=2e-3), (spec, k)


def test_milstein_has_smaller_strong_error():
    fine = TimeGrid(5.0, 0.0002)
    path = simulate_path(P, fine, 11)
    errs = {}
    for scheme in ("euler", "milstein"):
        e = []
        for f in (10, 25, 50):
            g = TimeGrid(5.0, fine.dt * f)
            sp = SamplePath(g, path.x[::f], path.y[::f])
            st_ = kalman_bucy(P, sp)
            ref = smoothed_terms(P, sp, st_, g.n_steps)[A1001]
            tr = integrate_system(derive_closure([A1001]), sp, st_.mu, st_.gamma, P, scheme=scheme)
            e.append(abs(tr[A1001][-1] - ref))
        errs[scheme] = np.mean(e)
    assert errs["milstein"] < errs["euler"]


def test_zero_observations_without_gain():
    p = ModelParams(a=-0.4, b=0.5, c=0.0, sigma=0.3, epsilon=0.0)
    grid = TimeGrid(2.0, 0.01)
    path = SamplePath(grid, np.zeros(201), np.zeros(201))
    st_ = kalman_bucy(p, path)
    system = derive_closure(expansion_seeds(2, 3))
    traj = integrate_system(system, path, st_.mu, st_.gamma, p)
    for spec in system.specs:
        if any(spec.alpha):
            assert np.all(traj[spec] == 0.0), spec


def test_innovation_free_terms_do_not_depend_on_the_path():
    grid = TimeGrid(3.0, 0.01)
    system = derive_closure([A0200, ATermSpec.make([0], [3], 0, [0])])
    vals = []
    for seed in (1, 2):
        path = simulate_path(P, grid, seed)
        st_ = kalman_bucy(P, path)
        vals.append(integrate_system(system, path, st_.mu, st_.gamma, P).values)
    assert np.array_equal(vals[0], vals[1])


def test_integration_input_checks():
    grid = TimeGrid(1.0, 0.01)
    path = simulate_path(P, grid, 0)
    st_ = kalman_bucy(P, path)
    system = derive_closure([A1001])
    with pytest.raises(ValueError):
        integrate_system(system, path, st_.mu[:-1], st_.gamma, P)
    with pytest.raises(ValueError):
        integrate_system(ATermSystem([A1001], {A1001: differentiate(A1001)}), path, st_.mu, st_.gamma, P)
    with pytest.raises(ValueError):
        integrate_system(system, path, st_.mu, st_.gamma, P, scheme="rk4")


def test_nonfinite_values_are_flagged():
    grid = TimeGrid(1.0, 0.01)
    path = simulate_path(P, grid, 0)
    st_ = kalman_bucy(P, path)
    mu = st_.mu.copy()
    mu[50] = np.inf
    traj = integrate_system(derive_closure([A1001]), path, mu, st_.gamma, P)
    assert not traj.ok and traj.first_nonfinite == 51
    assert np.all(traj[UNIT] == 1)


def test_all_terms_start_at_zero():
    grid = TimeGrid(1.0, 0.01)
    path = simulate_path(P, grid, 0)
    st_ = kalman_bucy(P, path)
    traj = integrate_system(derive_closure(expansion_seeds(1, 3)), path, st_.mu, st_.gamma, P)
    assert np.all(traj.values[:, 0] == 0)
