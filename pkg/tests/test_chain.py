import math
import random
from fractions import Fraction

import numpy as np
import pytest

from pfaffchain.chain import (
    ChainState,
    chain_matrix_row,
    chain_rhs_t2,
    chain_rhs_t2_corrected,
    chain_t2_correction_terms,
    chain_t2_order0_terms,
    continuum_residual,
    continuum_t1_rhs,
    default_profile,
    evolve_chain,
    expand_lattice_terms,
    GradientCatastropheError,
    max_row_sum,
    _dx2,
)
from pfaffchain.lax import t2_even_w_terms


def _random_state(rng, depth=3, grid=64, with_z=False, epsilon=0.0):
    h = 1.0 / grid
    x = h * np.arange(1, grid + 1)

    def trig():
        a, b, p = rng.uniform(-0.5, 0.5, 3)
        return a + b * np.sin(2 * math.pi * x + p)

    u = {k: trig() for k in range(-depth - 1, depth + 2)}
    z = {k: trig() for k in range(-depth - 1, depth + 2)} if with_z else None
    return ChainState(h=h, depth=depth, u=u, z=z, epsilon=epsilon)


# ---------------------------------------------------------------------------
# the sparse coefficient rows
# ---------------------------------------------------------------------------

def test_row_zero_matches_printed_component_equation():
    # u^0_t = u^0 u^1 u^0_x + (u^0)^2 u^1_x + u^0 u^-1_x
    u = {0: 2.0, 1: 0.7, -1: -0.4}
    row = chain_matrix_row(u, 0)
    assert row == {0: pytest.approx(2.0 * 0.7), 1: pytest.approx(4.0),
                   -1: pytest.approx(2.0)}


def test_row_one_matches_printed_component_equation():
    # u^1_t = (2u^2 - (u^1)^2) u^0_x - u^0 u^1 u^1_x + u^0 u^2_x
    u = {0: 1.5, 1: 1.0, 2: 3.0}
    row = chain_matrix_row(u, 1)
    assert row == {0: pytest.approx(2 * 3.0 - 1.0), 1: pytest.approx(-1.5),
                   2: pytest.approx(1.5)}


def test_colliding_columns_merge_by_summation():
    rng = np.random.default_rng(0)
    u = {k: float(v) for k, v in zip(range(-3, 4), rng.uniform(0.2, 1.0, 7))}
    # row -1: column 0 absorbs the structural a^k_{k+1} = u^0 entry
    row = chain_matrix_row(u, -1)
    assert row[0] == pytest.approx(2 * u[0] + u[-2] + u[1] * u[-1])
    # row 2: column 1 absorbs the structural a^k_{k-1} = u^0 entry
    row = chain_matrix_row(u, 2)
    assert row[1] == pytest.approx(u[0] - u[0] * u[2])


def test_rows_have_at_most_four_columns():
    u = {k: 0.3 * k + 1.0 for k in range(-9, 10)}
    for k in range(-8, 9):
        assert len(chain_matrix_row(u, k)) <= 4


def test_rhs_equals_row_assembly():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(500):
        s = _random_state(rng, depth=3, grid=8)
        rhs = chain_rhs_t2(s)
        from pfaffchain.chain import _dx1
        ux = {k: _dx1(s.uband(k), s.h) for k in range(-4, 5)}
        m = rng.integers(0, 8)
        for k in range(-2, 3):
            window = {p: float(s.uband(p)[m]) for p in range(-4, 5)}
            assembled = sum(coeff * ux[j][m]
                            for j, coeff in chain_matrix_row(window, k).items())
            worst = max(worst, abs(assembled - rhs[k][m])
                        / max(1.0, abs(assembled)))
    assert worst < 1e-12


# ---------------------------------------------------------------------------
# corrected right-hand sides vs the mechanical lattice expansion
# ---------------------------------------------------------------------------

def _canon(terms):
    out = {}
    for c, factors in terms:
        key = tuple(sorted(("w", band, d) for band, d in factors))
        out[key] = out.get(key, Fraction(0)) + Fraction(c)
    return {k: v for k, v in out.items() if v}


@pytest.mark.parametrize("k", range(-7, 8))
def test_correction_tables_match_lattice_expansion_exactly(k):
    mech = expand_lattice_terms(t2_even_w_terms(k), 2, rescale=True)
    assert _canon(chain_t2_order0_terms(k)) == mech[0]
    assert _canon(chain_t2_correction_terms(k, 1)) == mech[1]
    assert _canon(chain_t2_correction_terms(k, 2)) == mech[2]


def test_order0_correction_equals_plain_rhs():
    rng = np.random.default_rng(2)
    s = _random_state(rng, epsilon=1 / 64)
    plain = chain_rhs_t2(s)
    corr = chain_rhs_t2_corrected(s, 0)
    for k in plain:
        assert np.abs(plain[k] - corr[k]).max() < 1e-12


def test_zero_epsilon_reduces_corrections():
    rng = np.random.default_rng(3)
    s = _random_state(rng, epsilon=0.0)
    base = chain_rhs_t2_corrected(s, 0)
    for order in (1, 2):
        full = chain_rhs_t2_corrected(s, order)
        for k in base:
            assert np.abs(full[k] - base[k]).max() == 0.0


def test_constant_state_has_zero_rhs_at_every_order():
    grid = 32
    u = {k: np.full(grid, 0.2 * k + 1.0) for k in range(-3, 4)}
    s = ChainState(h=1 / grid, depth=3, u=u, epsilon=1 / 64)
    for order in (0, 1, 2):
        rhs = chain_rhs_t2_corrected(s, order)
        for arr in rhs.values():
            assert np.abs(arr).max() < 1e-13


def test_first_correction_of_u0_branch():
    # the O(eps) term of the u^0 equation is u^0 u^-1_xx / 2
    assert chain_t2_correction_terms(0, 1) == [(Fraction(1, 2), ((-1, 2), (0, 0)))]


def test_grid_too_coarse_for_third_derivative():
    u = {0: np.ones(5)}
    s = ChainState(h=0.2, depth=1, u=u, epsilon=0.1)
    with pytest.raises(ValueError, match="coarse"):
        chain_rhs_t2_corrected(s, 2)


# ---------------------------------------------------------------------------
# first-flow continuum limit
# ---------------------------------------------------------------------------

def test_t1_z0_is_exact_at_every_order():
    rng = np.random.default_rng(4)
    s = _random_state(rng, with_z=True, epsilon=1 / 64)
    for order in (0, 1, 2):
        _du, dz = continuum_t1_rhs(s, order)
        assert np.abs(dz[0] - s.uband(0) * s.uband(1)).max() == 0.0


def test_t1_leading_order_z_antisymmetry():
    rng = np.random.default_rng(5)
    s = _random_state(rng, with_z=True, epsilon=0.0)
    _du, dz = continuum_t1_rhs(s, 0)
    for k in range(1, s.depth + 1):
        assert np.abs(dz[k] + dz[-k]).max() < 1e-13


def test_t1_u0_corrections_start_at_second_order():
    rng = np.random.default_rng(6)
    s = _random_state(rng, with_z=True, epsilon=1 / 32)
    du0, _ = continuum_t1_rhs(s, 0)
    du1, _ = continuum_t1_rhs(s, 1)
    du2, _ = continuum_t1_rhs(s, 2)
    assert np.abs(du0[0]).max() == 0.0
    assert np.abs(du1[0]).max() == 0.0
    expected = 0.5 * s.epsilon ** 2 * _dx2(s.zband(0), s.h) * s.uband(0)
    assert np.abs(du2[0] - expected).max() < 1e-14


def test_t1_u_minus1_leading_order():
    rng = np.random.default_rng(7)
    s = _random_state(rng, with_z=True, epsilon=0.0)
    du, _ = continuum_t1_rhs(s, 0)
    expected = s.uband(0) * (s.zband(-1) - s.zband(1))
    assert np.abs(du[-1] - expected).max() < 1e-14


def test_t1_requires_z_fields():
    rng = np.random.default_rng(8)
    s = _random_state(rng, with_z=False)
    with pytest.raises(ValueError, match="z fields"):
        continuum_t1_rhs(s, 0)


# ---------------------------------------------------------------------------
# evolution
# ---------------------------------------------------------------------------

def test_constant_state_stays_constant():
    grid = 64
    u = {k: np.full(grid, 0.1 * k + 1.0) for k in range(-2, 3)}
    s = ChainState(h=1 / grid, depth=2, u=u)
    traj = evolve_chain(s, dt=1e-3, steps=20)
    for k in u:
        assert np.abs(traj[-1].uband(k) - u[k]).max() < 1e-12


def test_smooth_small_amplitude_run_is_stable():
    grid = 256
    x = np.arange(1, grid + 1) / grid
    profile = default_profile(2)
    u = {k: 0.3 * profile[k](x) if k in profile else np.zeros(grid)
         for k in range(-3, 4)}
    u[0] = 1.0 + 0.1 * np.sin(2 * math.pi * x)
    s = ChainState(h=1 / grid, depth=3, u=u)
    traj = evolve_chain(s, dt=1e-3, steps=1000)  # T = 1
    assert all(np.all(np.isfinite(state.uband(0))) for state in traj[-2:])


def test_self_convergence_under_refinement():
    def run(grid, steps, dt):
        x = np.arange(1, grid + 1) / grid
        u = {0: 1.0 + 0.1 * np.sin(2 * math.pi * x),
             1: 0.1 * np.cos(2 * math.pi * x),
             -1: 0.05 * np.sin(2 * math.pi * x)}
        u.update({k: np.zeros(grid) for k in (-3, -2, 2, 3)})
        s = ChainState(h=1 / grid, depth=3, u=u)
        return evolve_chain(s, dt=dt, steps=steps)[-1]

    t_final, dt = 0.1, 1e-3
    coarse = run(64, int(t_final / dt), dt)
    mid = run(128, int(t_final / dt), dt)
    fine = run(256, int(t_final / dt), dt)
    err_coarse = np.abs(coarse.uband(0) - mid.uband(0)[1::2]).max()
    err_mid = np.abs(mid.uband(0) - fine.uband(0)[1::2]).max()
    assert err_coarse / err_mid >= 3.0


def test_lax_friedrichs_cfl_guard():
    grid = 64
    u = {k: np.full(grid, 1.0) for k in range(-1, 2)}
    s = ChainState(h=1 / grid, depth=1, u=u)
    bound = s.h / (4 * max_row_sum(s))
    with pytest.raises(ValueError, match="CFL"):
        evolve_chain(s, dt=2 * bound, steps=1, scheme="lax-friedrichs")
    evolve_chain(s, dt=0.5 * bound, steps=2, scheme="lax-friedrichs")


def test_unknown_scheme_rejected():
    s = ChainState(h=0.1, depth=1, u={0: np.ones(8)})
    with pytest.raises(ValueError, match="scheme"):
        evolve_chain(s, dt=1e-3, steps=1, scheme="upwind")


def test_blowup_detector_reports_location():
    grid = 32
    x = np.arange(1, grid + 1) / grid
    u = {k: 40.0 * np.sin(2 * math.pi * x) for k in range(-1, 2)}
    s = ChainState(h=1 / grid, depth=1, u=u)
    with pytest.raises((GradientCatastropheError, OverflowError)):
        for _ in range(10):
            s = evolve_chain(s, dt=0.05, steps=20)[-1]


# ---------------------------------------------------------------------------
# lattice vs continuum order measurement
# ---------------------------------------------------------------------------

def test_continuum_residual_orders():
    eps = [2 ** -6, 2 ** -7, 2 ** -8]
    reports = continuum_residual(default_profile(2), eps, orders=(0, 1, 2), depth=4)
    slopes = {rep["order"]: rep["slope"] for rep in reports}
    assert slopes[0] == pytest.approx(1.0, abs=0.1)
    assert slopes[1] == pytest.approx(2.0, abs=0.2)
    assert slopes[2] == pytest.approx(3.0, abs=0.3)


def test_continuum_residual_constant_profile_exact():
    const = {k: (lambda x, c=c: np.full_like(x, c))
             for k, c in [(0, 1.2), (1, 0.3), (-1, 0.2)]}
    reports = continuum_residual(const, [2 ** -6, 2 ** -7, 2 ** -8], depth=3)
    assert all(rep["slope"] == "exact" for rep in reports)


def test_continuum_residual_needs_three_epsilons():
    with pytest.raises(ValueError, match="3 epsilon"):
        continuum_residual(default_profile(1), [1 / 64], depth=3)
