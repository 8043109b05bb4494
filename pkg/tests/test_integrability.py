import random
from fractions import Fraction

import pytest

from pfaffchain.integrability import (
    ChainMatrixSpec,
    Poly,
    RationalPoint,
    TensorPoint,
    WindowError,
    constant_chain_spec,
    diagonal_chain_spec,
    haantjes,
    haantjes_scan,
    load_spec_json,
    nijenhuis,
    nijenhuis_oracle_check,
    paper_chain_spec,
    random_rational_point,
    spec_with_overrides,
)

F = Fraction
SPEC = paper_chain_spec()


def _point(seed=0, window=10):
    return random_rational_point(random.Random(seed), window)


# ---------------------------------------------------------------------------
# polynomials
# ---------------------------------------------------------------------------

def test_poly_algebra():
    u = Poly.u
    p = (u(0) + 2 * u(1)) * u(0)  # u0^2 + 2 u0 u1
    assert p.eval(lambda k: F(k + 2)) == F(4 + 2 * 2 * 3)
    assert p.diff(0) == 2 * u(0) + 2 * u(1)
    assert p.diff(1) == 2 * u(0)
    assert p.diff(5) == Poly()
    assert p.variables() == {0, 1}


def test_poly_table_roundtrip():
    p = 3 * Poly.u(-2) * Poly.u(1) - Poly.const(F(1, 2))
    assert Poly.from_table(p.to_table()) == p


# ---------------------------------------------------------------------------
# the flagship rows and their exact partials
# ---------------------------------------------------------------------------

def test_row_zero_partials():
    ev = TensorPoint(SPEC, _point())
    assert ev.partial(0, 0, 0) == ev.point.at(1)   # d(u0 u1)/du0 = u1
    assert ev.partial(0, 0, 1) == ev.point.at(0)   # d(u0 u1)/du1 = u0


def test_structural_column_partial_is_one():
    ev = TensorPoint(SPEC, _point())
    for k in (-4, -3, 3, 5):
        assert ev.partial(k, k + 1, 0) == 1
        assert all(ev.partial(k, k + 1, p) == 0 for p in range(-6, 7) if p != 0)


def test_partials_match_central_differences_under_float_demotion():
    rng = random.Random(3)
    point = random_rational_point(rng, 8)
    ev = TensorPoint(SPEC, point)
    h = 1e-6
    for k in (-2, -1, 0, 1, 2, 3):
        for j in list(ev.cols(k)):
            for p in range(-4, 5):
                vals = {q: float(point.at(q)) for q in range(-8, 9)}
                up = dict(vals); up[p] = vals[p] + h
                dn = dict(vals); dn[p] = vals[p] - h
                poly = ev.row_polys(k).get(j)
                fd = (poly.eval(lambda q: up[q]) - poly.eval(lambda q: dn[q])) / (2 * h)
                assert abs(fd - float(ev.partial(k, j, p))) < 1e-9


# ---------------------------------------------------------------------------
# Nijenhuis tensor
# ---------------------------------------------------------------------------

def test_nijenhuis_antisymmetry():
    rng = random.Random(4)
    point = random_rational_point(rng, 10)
    ev = TensorPoint(SPEC, point)
    for _ in range(30):
        i, j, k = (rng.randint(-5, 5) for _ in range(3))
        assert ev.nijenhuis(i, j, k) + ev.nijenhuis(i, k, j) == 0


def test_nijenhuis_row_zero_vanishes():
    ev = TensorPoint(SPEC, _point(5))
    for j in range(-7, 8):
        for k in range(-7, 8):
            assert ev.nijenhuis(0, j, k) == 0


def test_nijenhuis_example_value():
    # N^1_{0,1} = -2 u^0 (2 + u^2): at u^0 = 1, u^2 = 0 this is -4
    values = {p: F(0) for p in range(-10, 11)}
    values[0] = F(1)
    point = RationalPoint(values=values, window=10)
    assert nijenhuis(SPEC, 1, 0, 1, point) == -4


def test_nijenhuis_flagged_entry_matches_print():
    # the one entry the printed table could not be cross-checked against:
    # N^-1_{0,-1} = -u^-2 - 6 u^0 - u^-1 u^1; the engine confirms it
    point = _point(6)
    u = point.at
    assert nijenhuis(SPEC, -1, 0, -1, point) == -u(-2) - 6 * u(0) - u(-1) * u(1)


def test_nijenhuis_generic_family_entries():
    point = _point(7, window=12)
    u = point.at
    ev = TensorPoint(SPEC, point)
    for i in (3, -5, 6):
        assert ev.nijenhuis(i, 0, i) == -4 * u(0)
        assert ev.nijenhuis(i, 0, i + 1) == u(0) * u(1)
        assert ev.nijenhuis(i, 1, i - 1) == u(0) * u(0)
        assert ev.nijenhuis(i, -1, i + 1) == u(0)
        sgn = 1 if i > 0 else -1
        assert ev.nijenhuis(i, -1, 1) == -sgn * u(0) * u(i)


def test_nijenhuis_absent_entry_is_zero():
    ev = TensorPoint(SPEC, _point(8))
    assert ev.nijenhuis(2, 2, 3) == 0


def test_oracle_check_full_window():
    report = nijenhuis_oracle_check(_point(9))
    assert report["nijenhuis_mismatches"] == []
    assert report["entries_checked"] > 1500


def test_window_error_names_requirement():
    small = RationalPoint(values={k: F(1) for k in range(-3, 4)}, window=3)
    with pytest.raises(WindowError, match="need W >="):
        nijenhuis(SPEC, 5, 0, 1, small)
    with pytest.raises(WindowError):
        haantjes(SPEC, 3, 0, 1, small)


# ---------------------------------------------------------------------------
# Haantjes tensor
# ---------------------------------------------------------------------------

def test_haantjes_vanishes_on_small_window():
    report = haantjes_scan(window=3, points=3, seed=1)
    assert report["haantjes_nonzero"] == []


def test_haantjes_inherited_antisymmetry():
    # generic sanity on a spec whose H does not vanish
    mutated = spec_with_overrides(SPEC, {"0,0": [["1", [0, 0]]]})
    point = _point(10)
    ev = TensorPoint(mutated, point)
    for (i, j, k) in [(1, 0, 2), (-1, 1, 2), (2, -1, 0)]:
        assert ev.haantjes(i, j, k) + ev.haantjes(i, k, j) == 0


def test_diagonal_control_spec_vanishes():
    report = haantjes_scan(window=3, points=2, seed=2, spec=diagonal_chain_spec())
    assert report["haantjes_nonzero"] == []


def test_constant_control_spec_tensors_vanish():
    spec = constant_chain_spec()
    point = _point(11)
    ev = TensorPoint(spec, point)
    for i in range(-3, 4):
        for j in range(-3, 4):
            for k in range(-3, 4):
                assert ev.nijenhuis(i, j, k) == 0
    report = haantjes_scan(window=3, points=1, seed=3, spec=spec)
    assert report["haantjes_nonzero"] == []


def test_mutated_spec_fails_the_scan():
    # corrupting a^0_1 from (u^0)^2 to u^0 breaks diagonalisability
    mutated = spec_with_overrides(SPEC, {"0,1": [["1", [0]]]}, name="mutated")
    report = haantjes_scan(window=2, points=1, seed=4, spec=mutated)
    assert report["haantjes_nonzero"]


def test_spec_json_forms(tmp_path):
    import json

    override = {"base": "paper", "overrides": {"0,1": [["1", [0]]]}}
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(override))
    spec = load_spec_json(str(path))
    point = _point(12)
    assert TensorPoint(spec, point).entry(0, 1) == point.at(0)

    table = {"name": "tiny", "stencil": 1,
             "rows": {"0": {"1": [["2", [0]]]}, "1": {"0": [["1", [1, 1]]]}}}
    spec2 = load_spec_json(table)
    ev = TensorPoint(spec2, point)
    assert ev.entry(0, 1) == 2 * point.at(0)
    assert ev.entry(1, 0) == point.at(1) ** 2
    assert ev.entry(5, 0) == 0

    with pytest.raises(ValueError):
        load_spec_json({"nonsense": True})


def test_scan_report_shape():
    report = haantjes_scan(window=2, points=1, seed=5)
    assert {"window", "points", "haantjes_nonzero",
            "nijenhuis_mismatches"} <= set(report)
