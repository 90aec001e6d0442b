import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modsynth.kinematics import DHTable
from modsynth.modlib import (
    GRAVITY,
    KA58,
    KA75_PLUS,
    LINK_MASS_PER_M,
    Composition,
    ModuleUnit,
    UnrepresentableError,
    composition_table,
    composition_violations,
    compose,
    count_combinations,
    dh_to_units,
    enumerate_variant_combos,
    quantize_angle,
    quantize_twists,
    select_variant_combo,
    snap_link_length,
    static_joint_torques,
)

deg = math.radians


def _row_table(a, alpha, d):
    return DHTable(a, alpha, d, np.zeros((len(a), 1)))


# -- examples -----------------------------------------------------------------


def test_table1_constants():
    assert (KA75_PLUS.mass, KA75_PLUS.nominal_torque, KA75_PLUS.epsilon) == (0.57, 12.0, 3)
    assert (KA58.mass, KA58.nominal_torque, KA58.epsilon) == (0.357, 3.6, 3)


def test_table2_unit_types(table2):
    assert [t for t, _ in dh_to_units(table2)] == [1, 4, 4]
    assert [m for _, m in dh_to_units(table2)] == ["pivot", "port", "none"]


def test_single_link_row():
    assert dh_to_units(_row_table([0.3], [0.0], [0.0])) == [(3, "none")]


def test_single_offset_row():
    assert dh_to_units(_row_table([0.0], [0.0], [0.25])) == [(1, "none")]


def test_pivot_range_exceeded():
    with pytest.raises(UnrepresentableError):
        dh_to_units(_row_table([0.0, 0.3], [deg(100), 0.0], [0.1, 0.0]))


@pytest.mark.parametrize(
    "alpha, step, want_deg, residual_deg",
    [(1.0367, 10, 60, 0.60), (1.0624, 30, 60, 0.87), (0.0, 10, 0, 0.0), (0.0, 30, 0, 0.0)],
)
def test_quantize_table2_twists(alpha, step, want_deg, residual_deg):
    q = quantize_angle(alpha, step)
    assert math.degrees(q) == pytest.approx(want_deg)
    assert math.degrees(abs(alpha - q)) == pytest.approx(residual_deg, abs=5e-3)


@pytest.mark.parametrize("n, count", list(zip(range(2, 9), [3, 4, 5, 4, 3, 2, 1])))
def test_counts(n, count):
    assert count_combinations(n) == count
    assert len(enumerate_variant_combos(n)) == count


def test_enumeration_lists():
    assert enumerate_variant_combos(3) == ["HHH", "HHL", "HLL", "LLL"]
    assert enumerate_variant_combos(2) == ["HH", "HL", "LL"]
    assert enumerate_variant_combos(8) == ["HHHHLLLL"]


@pytest.mark.parametrize("n", [0, 1, 9])
def test_dof_domain(n):
    with pytest.raises(ValueError):
        count_combinations(n)


def test_table2_composition(table2):
    comp, residual = compose(table2)
    assert comp.label == "H1-L4-L4"
    assert [round(math.degrees(u.twist), 9) for u in comp.units] == [60, 60, 0]
    assert comp.units[0].pivot_twist == pytest.approx(deg(60)) and comp.units[1].port_twist == pytest.approx(deg(60))
    np.testing.assert_allclose(residual.twist_deg, [0.60, 0.87, 0.0], atol=5e-3)
    assert comp.torque_feasible
    assert [u.link_length for u in comp.units] == [0.0, 0.3, 0.3]


def test_straight_two_link_arm():
    comp, _ = compose(_row_table([0.3, 0.3], [0.0, 0.0], [0.0, 0.0]))
    assert [u.unit_type for u in comp.units] == [3, 3]
    assert comp.variants == "HL"


def test_tiny_arm_takes_lightest_allowed_combo():
    # LL would be lightest but the base module must be H
    table = _row_table([0.01, 0.01], [0.0, 0.0], [0.0, 0.0])
    comp = select_variant_combo(table, enumerate_variant_combos(2), link_mass_per_m=0.0)
    assert comp.variants == "HL" and comp.torque_feasible


def test_huge_payload_flagged(table2):
    comp, _ = compose(table2, payload=100.0)
    assert not comp.torque_feasible
    assert comp.variants == "HHH"


def test_nine_joints_rejected():
    with pytest.raises(ValueError):
        compose(_row_table([0.1] * 9, [0.0] * 9, [0.0] * 9))


def test_static_torque_oracle():
    # straight two-link arm laid out horizontally, computed by hand
    table = _row_table([0.3, 0.2], [0.0, 0.0], [0.0, 0.0])
    m0, m1 = LINK_MASS_PER_M * 0.3, LINK_MASS_PER_M * 0.2
    payload = 0.5
    want0 = GRAVITY * (payload * 0.5 + KA58.mass * 0.3 + m0 * 0.15 + m1 * 0.4)
    want1 = GRAVITY * (payload * 0.2 + m1 * 0.1)
    np.testing.assert_allclose(static_joint_torques(table, "HL", payload), [want0, want1], rtol=1e-12)


def test_violations():
    assert composition_violations("HLL") == []
    assert "base module must be H" in composition_violations("LLL")
    assert any("follow" in p for p in composition_violations("HLH"))
    assert any("consecutive H" in p for p in composition_violations("HHHHH"))
    assert any("consecutive L" in p for p in composition_violations("HLLLLL"))
    assert composition_violations("H", first_type=2) == ["base unit must be type 1 or 3"]


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(variant="X", unit_type=1),
        dict(variant="H", unit_type=5),
        dict(variant="H", unit_type=3),
        dict(variant="H", unit_type=1, link_length=0.2),
        dict(variant="H", unit_type=1, pivot_twist=deg(15)),
        dict(variant="H", unit_type=1, pivot_twist=deg(100)),
        dict(variant="H", unit_type=3, link_length=0.2, port_twist=deg(45)),
    ],
)
def test_module_unit_validation(kwargs):
    with pytest.raises(ValueError):
        ModuleUnit(**kwargs)


def test_link_grid_snapping(table2):
    t = DHTable([0.0, 0.33, 0.27], table2.alpha, table2.d, table2.theta)
    comp, residual = compose(t, link_grid=0.05)
    assert [u.link_length for u in comp.units] == pytest.approx([0.0, 0.35, 0.25])
    np.testing.assert_allclose(residual.link, [0.0, 0.02, 0.02], atol=1e-12)
    assert snap_link_length(0.01, 0.05) == 0.05
    assert snap_link_length(0.123, None) == 0.123


def test_composition_table_uses_quantized_twists(table2):
    comp, _ = compose(table2)
    realised = composition_table(comp, table2)
    np.testing.assert_allclose(np.degrees(realised.alpha), [60, 60, 0], atol=1e-9)


# -- properties ---------------------------------------------------------------

alphas = st.floats(-math.pi / 2, math.pi / 2)


@pytest.mark.property_suite
@given(st.floats(-math.pi, math.pi), st.sampled_from([10.0, 30.0]))
def test_quantize_idempotent_and_bounded(alpha, step):
    q = quantize_angle(alpha, step)
    assert quantize_angle(q, step) == q
    assert abs(alpha - q) <= math.radians(step) / 2 + 1e-12
    k = math.degrees(q) / step
    assert abs(k - round(k)) < 1e-9


@st.composite
def dh_tables(draw):
    n = draw(st.integers(2, 8))
    a = [draw(st.sampled_from([0.0, 0.05, 0.1, 0.2, 0.3, 0.45])) for _ in range(n)]
    alpha = [draw(alphas) for _ in range(n)]
    d = [draw(st.floats(0.0, 0.5)) for _ in range(n)]
    return _row_table(a, alpha, d)


@pytest.mark.property_suite
@given(dh_tables(), st.floats(0.0, 20.0))
def test_compose_output_obeys_assembly_rules(table, payload):
    comp, residual = compose(table, payload=payload)
    assert composition_violations(comp.variants, comp.units[0].unit_type) == []
    Composition(comp.units)  # re-validates
    assert len(comp) == table.n_joints
    assert all(r >= 0 for r in residual.twist)
    assert comp.units[0].unit_type in (1, 3)
    for u, a in zip(comp.units, table.a):
        assert (u.unit_type in (3, 4)) == (a > 0)


@given(dh_tables())
def test_dh_to_units_pure(table):
    assert dh_to_units(table) == dh_to_units(DHTable(table.a.copy(), table.alpha.copy(), table.d.copy(), table.theta))


@given(dh_tables(), st.floats(0.0, 20.0), st.randoms(use_true_random=False))
def test_selection_ignores_combo_order(table, payload, rnd):
    combos = enumerate_variant_combos(table.n_joints)
    units, _ = quantize_twists(table, dh_to_units(table))
    shuffled = combos[:]
    rnd.shuffle(shuffled)
    a = select_variant_combo(table, combos, payload, units)
    b = select_variant_combo(table, shuffled, payload, units)
    assert a == b


@given(st.integers(2, 8))
def test_enumeration_matches_count(n):
    combos = enumerate_variant_combos(n)
    assert len(combos) == count_combinations(n) == len(set(combos))
    for c in combos:
        assert "LH" not in c and c.count("H") <= 4 and c.count("L") <= 4
