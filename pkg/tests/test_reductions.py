import random
from fractions import Fraction

import pytest

from pfaffchain.reductions import (
    DegenerateSpeedsError,
    JetNum,
    ReductionJet,
    eigen_residual,
    gt_involutivity,
    gt_rhs,
    involutivity_report,
    random_jet,
    tangent_recursion,
)

F = Fraction


# ---------------------------------------------------------------------------
# tangent recursion against the four printed closed forms
# ---------------------------------------------------------------------------

def test_recursion_reproduces_printed_equations():
    rng = random.Random(1)
    for _ in range(100):
        jet = random_jet(rng, 3)
        u = jet.u_window.at
        u0, u1 = jet.u0, jet.u1
        for i in (1, 2, 3):
            lam = jet.lam[i]
            d0, d1 = jet.du0[i], jet.du1[i]
            du = tangent_recursion(jet, i, 3)
            assert du[-1] == (lam / u0 - u1) * d0 - u0 * d1
            assert du[-2] == (lam ** 2 - u0 * u1 * lam
                              - u0 * (2 * u0 + u(-2) + u(-1) * u(1))) \
                / u0 ** 2 * d0 - (lam + u(-1)) * d1
            assert du[2] == (u1 * u1 - 2 * u(2)) / u0 * d0 \
                + (lam + u0 * u1) / u0 * d1
            assert du[3] == ((u1 * u1 - 2 * u(2)) * lam
                             + u0 * (u1 * (1 + u(2)) - 3 * u(3))) / u0 ** 2 * d0 \
                + (lam ** 2 + u0 * u1 * lam + u0 ** 2 * (u(2) - 1)) / u0 ** 2 * d1


def test_zero_seeds_give_zero_tangent():
    rng = random.Random(2)
    jet = random_jet(rng, 3)
    jet = ReductionJet(n_components=3, lam=jet.lam, u0=jet.u0, u1=jet.u1,
                       du0={i: F(0) for i in (1, 2, 3)},
                       du1={i: F(0) for i in (1, 2, 3)},
                       u_window=jet.u_window)
    du = tangent_recursion(jet, 1, 5)
    assert all(v == 0 for v in du.values())


def test_eigen_residual_is_exactly_zero():
    rng = random.Random(3)
    for _ in range(100):
        jet = random_jet(rng, 3)
        for i in (1, 2, 3):
            assert eigen_residual(jet, i, 8) == 0


def test_minimal_depth_residual():
    rng = random.Random(4)
    jet = random_jet(rng, 3)
    assert eigen_residual(jet, 1, 2) == 0


def test_perturbed_tangent_leaves_residual():
    rng = random.Random(5)
    jet = random_jet(rng, 3)
    du = tangent_recursion(jet, 1, 4)
    du[2] += 1  # corrupt one component
    lam = jet.lam[1]
    from pfaffchain.integrability import TensorPoint, paper_chain_spec
    rows = TensorPoint(paper_chain_spec(), jet.u_window)
    residuals = {}
    for k in range(-3, 4):
        acc = F(0)
        for j, coeff in rows.row(k).items():
            acc += coeff * du.get(j, F(0))
        residuals[k] = abs(lam * du[k] - acc)
    # the corrupted component feeds neighbouring rows through a^k_{k+-1}=u^0
    assert max(residuals[1], residuals[3]) >= abs(jet.u0)


def test_recursion_window_requirement():
    rng = random.Random(6)
    jet = random_jet(rng, 3, window=4)
    with pytest.raises(ValueError, match="u_window"):
        tangent_recursion(jet, 1, 6)


def test_degenerate_speeds_rejected():
    rng = random.Random(7)
    jet = random_jet(rng, 3)
    with pytest.raises(DegenerateSpeedsError):
        ReductionJet(n_components=3,
                     lam={1: F(1), 2: F(1), 3: F(2)},
                     u0=jet.u0, u1=jet.u1, du0=jet.du0, du1=jet.du1,
                     u_window=jet.u_window)


# ---------------------------------------------------------------------------
# the closure formulas
# ---------------------------------------------------------------------------

def test_gt_rhs_proportional_to_du0():
    rng = random.Random(8)
    jet = random_jet(rng, 3)
    jet = ReductionJet(n_components=3, lam=jet.lam, u0=jet.u0, u1=jet.u1,
                       du0={1: jet.du0[1], 2: F(0), 3: jet.du0[3]},
                       du1=jet.du1, u_window=jet.u_window)
    gt = gt_rhs(jet, 1, 2)
    assert gt.dlam_ij == 0  # d_2 u^0 = 0 forces d_2 lambda^1 = 0


def test_gt_second_derivative_symmetric():
    rng = random.Random(9)
    for _ in range(20):
        jet = random_jet(rng, 3)
        a = gt_rhs(jet, 1, 3)
        b = gt_rhs(jet, 3, 1)
        assert a.d2u0_ij == b.d2u0_ij
        assert a.d2u1_ij == b.d2u1_ij


def test_gt_speed_2u0_simplification():
    # lambda^i = 2u^0 gives d_j lambda^i = 2 d_j u^0 identically
    rng = random.Random(10)
    for _ in range(10):
        jet = random_jet(rng, 3)
        lam = dict(jet.lam)
        lam[1] = 2 * jet.u0
        if lam[1] in (lam[2], lam[3]):
            continue
        jet2 = ReductionJet(n_components=3, lam=lam, u0=jet.u0, u1=jet.u1,
                            du0=jet.du0, du1=jet.du1, u_window=jet.u_window)
        gt = gt_rhs(jet2, 1, 2)
        assert gt.dlam_ij == 2 * jet.du0[2]


def test_gt_rejects_equal_indices():
    rng = random.Random(11)
    jet = random_jet(rng, 3)
    with pytest.raises(ValueError):
        gt_rhs(jet, 2, 2)


# ---------------------------------------------------------------------------
# involutivity
# ---------------------------------------------------------------------------

def test_involutivity_exact_zero_on_random_jets():
    rng = random.Random(12)
    for _ in range(100):
        jet = random_jet(rng, 3)
        residuals = gt_involutivity(jet)
        assert all(v == 0 for v in residuals.values()), residuals


def test_involutivity_trivial_for_flat_jets():
    rng = random.Random(13)
    jet = random_jet(rng, 3)
    jet = ReductionJet(n_components=3, lam=jet.lam, u0=jet.u0, u1=jet.u1,
                       du0={i: F(0) for i in (1, 2, 3)}, du1=jet.du1,
                       u_window=jet.u_window)
    assert all(v == 0 for v in gt_involutivity(jet).values())


def test_mutated_coefficient_breaks_involutivity():
    rng = random.Random(14)
    hits = 0
    for _ in range(10):
        jet = random_jet(rng, 3)
        residuals = gt_involutivity(jet, mutate_dlam=F(3))
        hits += any(v != 0 for v in residuals.values())
    assert hits == 10


def test_involutivity_needs_three_components():
    rng = random.Random(15)
    jet = random_jet(rng, 4)
    with pytest.raises(ValueError, match="three"):
        gt_involutivity(jet)


def test_involutivity_report_serialises_rationals_as_strings():
    report = involutivity_report(jets=5, seed=16)
    assert report["max_involutivity_residual"] == "0"
    assert report["eigen_residual"] == "0"
    assert isinstance(report["max_involutivity_residual"], str)


# ---------------------------------------------------------------------------
# the forward-mode jet numbers
# ---------------------------------------------------------------------------

def test_jetnum_arithmetic():
    a = JetNum(F(2), (F(1), F(0), None))
    b = JetNum(F(3), (F(0), F(2), F(5)))
    s = a + b
    assert s.val == 5 and s.d[0] == 1 and s.d[1] == 2 and s.d[2] is None
    p = a * b
    assert p.val == 6 and p.d[0] == 3 and p.d[1] == 4 and p.d[2] is None
    q = a / b
    assert q.val == F(2, 3) and q.d[0] == F(1, 3)
    assert (a ** 2).val == 4 and (a ** 2).d[0] == 4
    with pytest.raises(ValueError):
        s.slot(3)
