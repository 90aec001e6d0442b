"""Modular joint/link library and the DH-table-to-composition mapping.

Two joint module variants exist, heavy (``H``) and light (``L``), each
usable as one of four units:

====  ==============  =====================
type  input port      link module at output
====  ==============  =====================
1     Ip1             no
2     Ip2             no
3     Ip1             yes
4     Ip2             yes
====  ==============  =====================

Twists are realised either by the pivot slot of the twist unit (10 degree
grid over +/-90 degrees) or by the connection ports (30 degree grid).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .kinematics import DHTable

GRAVITY = 9.81
PIVOT_STEP_DEG = 10.0
PORT_STEP_DEG = 30.0
PIVOT_LIMIT_DEG = 90.0
MIN_DOF = 2
MAX_DOF = 8
# link module mass per metre (0.1 kg per 0.3 m)
LINK_MASS_PER_M = 0.1 / 0.3
ZERO_TOL = 1e-9


class UnrepresentableError(ValueError):
    """The DH table cannot be realised with the module library."""


@dataclass(frozen=True)
class ActuatorSpec:
    name: str
    mass: float
    nominal_torque: float
    max_torque: float
    epsilon: int
    no_load_speed_rpm: float

    def __post_init__(self):
        if min(self.mass, self.nominal_torque, self.max_torque, self.no_load_speed_rpm) <= 0:
            raise ValueError("actuator quantities must be positive")
        if self.epsilon < 1:
            raise ValueError("epsilon must be >= 1")

    @property
    def max_run(self) -> int:
        """Longest serial run of this variant: the module plus ``epsilon`` carried."""
        return self.epsilon + 1


KA75_PLUS = ActuatorSpec("KA-75+", mass=0.57, nominal_torque=12.0, max_torque=30.5, epsilon=3, no_load_speed_rpm=12.2)
KA58 = ActuatorSpec("KA-58", mass=0.357, nominal_torque=3.6, max_torque=6.8, epsilon=3, no_load_speed_rpm=20.3)
ACTUATORS = {"H": KA75_PLUS, "L": KA58}


@dataclass(frozen=True)
class ModuleUnit:
    """One joint module with its twist setting and optional link module.

    ``pivot_twist`` and ``port_twist`` are in radians and must sit on their
    10 and 30 degree grids.
    """

    variant: str
    unit_type: int
    pivot_twist: float = 0.0
    port_twist: float = 0.0
    link_length: float = 0.0

    def __post_init__(self):
        if self.variant not in ACTUATORS:
            raise ValueError(f"variant must be 'H' or 'L', got {self.variant!r}")
        if self.unit_type not in (1, 2, 3, 4):
            raise ValueError(f"unit_type must be 1..4, got {self.unit_type}")
        if (self.link_length > 0) != (self.unit_type in (3, 4)):
            raise ValueError("units 3/4 carry a link module (length > 0); units 1/2 do not")
        if self.link_length < 0:
            raise ValueError("link_length must be >= 0")
        piv = math.degrees(self.pivot_twist)
        if abs(piv) > PIVOT_LIMIT_DEG + 1e-9 or not _on_grid(piv, PIVOT_STEP_DEG):
            raise ValueError(f"pivot twist {piv:.6g} deg is not on the 10 deg grid within +/-90 deg")
        if not _on_grid(math.degrees(self.port_twist), PORT_STEP_DEG):
            raise ValueError("port twist must be a multiple of 30 deg")

    @property
    def label(self) -> str:
        return f"{self.variant}{self.unit_type}"

    @property
    def twist(self) -> float:
        return self.pivot_twist + self.port_twist

    @property
    def actuator(self) -> ActuatorSpec:
        return ACTUATORS[self.variant]


def _on_grid(value_deg, step_deg, tol=1e-7):
    k = value_deg / step_deg
    return abs(k - round(k)) < tol


@dataclass(frozen=True)
class Composition:
    """Ordered modular units, base first.

    ``torque_feasible`` and ``joint_torques`` record the static torque check
    done by :func:`select_variant_combo`.
    """

    units: tuple
    torque_feasible: bool = True
    joint_torques: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        check_composition(self.units)

    @property
    def variants(self) -> str:
        return "".join(u.variant for u in self.units)

    @property
    def label(self) -> str:
        return "-".join(u.label for u in self.units)

    @property
    def mass(self) -> float:
        return sum(u.actuator.mass + LINK_MASS_PER_M * u.link_length for u in self.units)

    def __len__(self):
        return len(self.units)


def composition_violations(variants: str, first_type: int | None = None) -> list[str]:
    """Assembly-rule violations of a variant string such as ``"HLL"``."""
    problems = []
    if not variants:
        return ["empty composition"]
    if variants[0] != "H":
        problems.append("base module must be H")
    if first_type is not None and first_type not in (1, 3):
        problems.append("base unit must be type 1 or 3")
    if "LH" in variants:
        problems.append("an H module cannot follow an L module")
    for v, spec in ACTUATORS.items():
        run = max((len(r) for r in variants.split("L" if v == "H" else "H")), default=0)
        if run > spec.max_run:
            problems.append(f"more than {spec.max_run} consecutive {v} modules")
    return problems


def check_composition(units: Sequence[ModuleUnit]) -> None:
    problems = composition_violations("".join(u.variant for u in units), units[0].unit_type if units else None)
    if problems:
        raise ValueError("invalid composition: " + "; ".join(problems))


@dataclass(frozen=True)
class TwistResidual:
    """Absolute quantisation residuals: twists in radians, link lengths in metres."""

    twist: tuple
    link: tuple

    @property
    def twist_deg(self) -> tuple:
        return tuple(math.degrees(t) for t in self.twist)


# -- DH rows to unit types ----------------------------------------------------


def previous_twist_predicate(threshold_deg: float = 45.0) -> Callable[[DHTable, int], bool]:
    """Default Ip2 rule: use port 2 when the preceding row's |alpha| >= threshold."""

    def uses_ip2(table: DHTable, i: int) -> bool:
        return abs(math.degrees(table.alpha[i - 1])) >= threshold_deg

    return uses_ip2


def _twist_mode(a, alpha):
    if abs(alpha) <= ZERO_TOL:
        return "none"
    return "pivot" if abs(a) <= ZERO_TOL else "port"


def dh_to_units(table: DHTable, uses_ip2: Callable[[DHTable, int], bool] | None = None) -> list[tuple[int, str]]:
    """Unit type (1-4) and twist mode for every DH row.

    Rows with ``a != 0`` need a link module (type 3/4), the rest are type 1/2.
    The base row always enters through Ip1.  For later rows ``uses_ip2``
    decides Ip1 vs Ip2; the default picks Ip2 after a twist of 45 degrees or
    more.  Twist mode is ``"pivot"`` for ``a = 0, alpha != 0``, ``"port"``
    for ``a != 0, alpha != 0`` and ``"none"`` otherwise.
    """
    uses_ip2 = uses_ip2 or previous_twist_predicate()
    out = []
    for i in range(table.n_joints):
        a, alpha = float(table.a[i]), float(table.alpha[i])
        mode = _twist_mode(a, alpha)
        if mode == "pivot" and abs(math.degrees(alpha)) > PIVOT_LIMIT_DEG + 1e-9:
            raise UnrepresentableError(
                f"row {i + 1}: twist {math.degrees(alpha):.2f} deg exceeds the +/-90 deg pivot range"
            )
        has_link = abs(a) > ZERO_TOL
        ip2 = i > 0 and uses_ip2(table, i)
        unit_type = (4 if ip2 else 3) if has_link else (2 if ip2 else 1)
        out.append((unit_type, mode))
    return out


def quantize_angle(angle: float, step_deg: float) -> float:
    """Nearest multiple of ``step_deg`` (radians in and out); exact ties go toward zero."""
    k = abs(math.degrees(angle)) / step_deg
    q = math.ceil(k - 0.5 - 1e-12) * step_deg
    return math.copysign(math.radians(q), angle) if q else 0.0


def quantize_twists(table: DHTable, units) -> tuple[list[tuple[int, str, float]], TwistResidual]:
    """Snap each row's twist to the grid of its twist mode.

    Returns ``(unit_type, mode, quantised_alpha)`` per row and the residuals.
    Link residuals are zero here (see :func:`snap_link_length`).
    """
    out, residual = [], []
    for i, (unit_type, mode) in enumerate(units):
        alpha = float(table.alpha[i])
        if mode == "pivot":
            q = quantize_angle(alpha, PIVOT_STEP_DEG)
        elif mode == "port":
            q = quantize_angle(alpha, PORT_STEP_DEG)
        else:
            q = 0.0
        out.append((unit_type, mode, q))
        residual.append(abs(alpha - q))
    return out, TwistResidual(tuple(residual), tuple(0.0 for _ in units))


def snap_link_length(length: float, grid: float | None) -> float:
    """Nearest catalog length on ``grid`` (never below one step); identity when ``grid`` is None."""
    if grid is None or length <= ZERO_TOL:
        return float(length)
    return max(grid, round(length / grid) * grid)


# -- H/L variant combinations ---------------------------------------------------


def _check_dof(n):
    if not MIN_DOF <= n <= MAX_DOF:
        raise ValueError(f"DoF must be in [{MIN_DOF}, {MAX_DOF}], got {n}")


def count_combinations(n: int) -> int:
    _check_dof(n)
    return 5 - abs(n - 4)


def enumerate_variant_combos(n: int) -> list[str]:
    """All ``H^h L^(n-h)`` strings with runs of at most four, most H first."""
    _check_dof(n)
    max_h, max_l = KA75_PLUS.max_run, KA58.max_run
    return ["H" * h + "L" * (n - h) for h in range(min(n, max_h), -1, -1) if n - h <= max_l]


def _lever_lengths(table: DHTable) -> np.ndarray:
    return np.hypot(table.a, table.d)


def static_joint_torques(
    table: DHTable,
    variants: str,
    payload: float = 0.0,
    link_mass_per_m: float = LINK_MASS_PER_M,
    g: float = GRAVITY,
) -> np.ndarray:
    """Worst-case static gravity torque at every joint.

    All distal segments are laid out horizontally in a straight line.  Joint
    ``i`` carries the actuators of joints ``k > i`` at their joint positions,
    every link ``k >= i`` at its midpoint and the payload at the tip.
    """
    L = _lever_lengths(table)
    s = np.concatenate([[0.0], np.cumsum(L)])
    tip = s[-1]
    n = table.n_joints
    tau = np.zeros(n)
    for i in range(n):
        t = payload * g * (tip - s[i])
        for k in range(i, n):
            if k > i:
                t += ACTUATORS[variants[k]].mass * g * (s[k] - s[i])
            t += link_mass_per_m * table.a[k] * g * (s[k] + 0.5 * L[k] - s[i])
        tau[i] = t
    return tau


def _combo_stats(table, combo, payload, link_mass_per_m):
    tau = static_joint_torques(table, combo, payload, link_mass_per_m)
    nominal = np.array([ACTUATORS[v].nominal_torque for v in combo])
    with np.errstate(divide="ignore", over="ignore"):
        margin = float(np.min(np.where(tau > 0, nominal / tau, np.inf)))
    mass = sum(ACTUATORS[v].mass for v in combo)
    return tau, margin, mass


def select_variant_combo(
    table: DHTable,
    combos: Sequence[str],
    payload: float = 0.0,
    units: Sequence[tuple[int, str, float]] | None = None,
    link_mass_per_m: float = LINK_MASS_PER_M,
) -> Composition:
    """Pick the H/L assignment by a static-torque heuristic.

    A combination qualifies when it obeys the assembly rules and every joint's
    worst static torque is within its actuator's nominal torque.  The
    lightest qualifying one wins, ties going to more L modules and then to
    string order.  With none qualifying, the largest torque margin (worst
    ``nominal / torque`` ratio over the joints) wins and the result is flagged
    ``torque_feasible=False``.

    ``units`` are ``(unit_type, mode, twist)`` triples from
    :func:`quantize_twists`; without them they are derived from ``table``.
    """
    combos = [c for c in combos if not composition_violations(c)]
    if not combos:
        raise ValueError("no combination satisfies the assembly rules")
    if any(len(c) != table.n_joints for c in combos):
        raise ValueError("combination length does not match the number of joints")
    if units is None:
        units, _ = quantize_twists(table, dh_to_units(table))
    stats = {c: _combo_stats(table, c, payload, link_mass_per_m) for c in combos}
    feasible = [c for c in combos if stats[c][1] >= 1.0]
    if feasible:
        choice = min(feasible, key=lambda c: (stats[c][2], -c.count("L"), c))
    else:
        choice = min(combos, key=lambda c: (-stats[c][1], c))
    return Composition(
        tuple(_make_unit(choice[i], *units[i], float(table.a[i])) for i in range(table.n_joints)),
        torque_feasible=bool(feasible),
        joint_torques=tuple(float(t) for t in stats[choice][0]),
    )


def _make_unit(variant, unit_type, mode, twist, link_length):
    return ModuleUnit(
        variant=variant,
        unit_type=unit_type,
        pivot_twist=twist if mode == "pivot" else 0.0,
        port_twist=twist if mode == "port" else 0.0,
        link_length=link_length if unit_type in (3, 4) else 0.0,
    )


def compose(
    table: DHTable,
    payload: float = 0.0,
    link_grid: float | None = None,
    uses_ip2: Callable[[DHTable, int], bool] | None = None,
) -> tuple[Composition, TwistResidual]:
    """Map an optimal DH table to a modular composition.

    Runs :func:`dh_to_units`, :func:`quantize_twists`,
    :func:`enumerate_variant_combos` and :func:`select_variant_combo`.  With
    ``link_grid`` set, link lengths snap to that catalog step and the
    residuals are reported.
    """
    _check_dof(table.n_joints)
    units, residual = quantize_twists(table, dh_to_units(table, uses_ip2))
    lengths = [snap_link_length(float(a), link_grid) for a in table.a]
    snapped = DHTable(lengths, table.alpha, table.d, table.theta)
    comp = select_variant_combo(snapped, enumerate_variant_combos(table.n_joints), payload, units)
    link_res = tuple(abs(float(a) - l) if t in (3, 4) else 0.0 for a, l, (t, _, _) in zip(table.a, lengths, units))
    return comp, TwistResidual(residual.twist, link_res)


def composition_table(comp: Composition, table: DHTable) -> DHTable:
    """DH table realised by ``comp``: quantised twists and module link lengths."""
    return DHTable(
        [u.link_length for u in comp.units],
        [u.twist for u in comp.units],
        table.d,
        table.theta,
    )
