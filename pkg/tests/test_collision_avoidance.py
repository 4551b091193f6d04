import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lsmrac.collision_avoidance import (
    RepulsiveConfig,
    alpha_coefficient,
    check_energy_feasibility,
    collision_avoidance_step,
    energy_budget,
    field_value,
    force_magnitude,
    intrusion_energy,
    modified_input,
    pair_force,
    pair_geometry,
    plateau_force,
    resultant_force,
)
from lsmrac.exceptions import ContractViolationError
from lsmrac.system_models import plant_step

CFG = RepulsiveConfig()
DT = 0.05


def test_field_value():
    assert field_value(0.5, CFG) == 0.0
    assert field_value(0.36, CFG) == 0.0
    assert field_value(0.3, CFG) == pytest.approx(0.6944, abs=1e-4)
    assert field_value(0.1, CFG) == field_value(0.15, CFG)


def test_force_magnitude():
    assert force_magnitude(0.4, CFG) == 0.0
    assert force_magnitude(0.3, CFG) == pytest.approx(27.78, abs=1e-2)
    assert force_magnitude(0.05, CFG) == plateau_force(CFG)
    grid = np.linspace(0.1501, 0.36, 200)
    values = [force_magnitude(rho, CFG) for rho in grid]
    assert np.all(np.diff(values) <= 0.0)


def test_pair_force_points_away_from_neighbor():
    geom = pair_geometry([0.0, 0.0], [0.3, 0.0])
    assert geom.rho_ij == pytest.approx(0.3)
    force = pair_force(geom, CFG)
    assert force[0] == pytest.approx(-27.78, abs=1e-2)
    assert force[1] == 0.0
    assert_allclose(pair_force(pair_geometry([0.0, 0.0], [1.0, 1.0]), CFG), [0.0, 0.0])


def test_coincident_centers_are_flagged():
    geom = pair_geometry([0.2, 0.2], [0.2, 0.2])
    assert geom.degenerate
    assert np.linalg.norm(geom.unit_ij) == pytest.approx(1.0)
    assert np.linalg.norm(pair_force(geom, CFG)) == pytest.approx(plateau_force(CFG))


def test_resultant_force():
    positions = [[0.0, 0.0], [0.3, 0.0], [5.0, 5.0]]
    assert_allclose(resultant_force(positions, 0, CFG), [-27.7778, 0.0], atol=1e-3)
    symmetric = [[0.0, 0.0], [0.3, 0.0], [-0.3, 0.0]]
    assert_allclose(resultant_force(symmetric, 0, CFG), [0.0, 0.0], atol=1e-12)
    far = [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]
    assert_allclose(resultant_force(far, 0, CFG), [0.0, 0.0])


def test_energy_budget():
    assert energy_budget(0.3, CFG) == 0.0
    assert energy_budget(0.5, CFG) == pytest.approx(field_value(0.3, CFG))
    assert energy_budget(0.33, CFG) == pytest.approx(0.5516, abs=1e-3)
    assert energy_budget(0.2, CFG) == 0.0


def test_intrusion_energy():
    f = np.array([27.78, 0.0])
    assert intrusion_energy([0.0, 3.0], f, CFG, DT) == 0.0
    assert intrusion_energy([2.0, 0.0], f, CFG, DT) < 0.0
    assert intrusion_energy([-10.0, 0.0], f, CFG, DT) == pytest.approx(0.75)
    assert intrusion_energy([1.0, 0.0], [0.0, 0.0], CFG, DT) is None


def test_alpha_coefficient():
    f = np.array([27.78, 0.0])
    assert alpha_coefficient([5.0, 0.0], [f], [0.5516], CFG, DT) == 1.0
    alpha = alpha_coefficient([-10.0, 0.0], [f], [energy_budget(0.33, CFG)], CFG, DT)
    assert alpha == pytest.approx(0.6619, abs=1e-3)
    assert alpha_coefficient([-10.0, 0.0], [f], [0.0], CFG, DT) == 0.0
    # the tightest pair wins
    assert alpha_coefficient(
        [-10.0, 0.0], [f, np.array([0.0, 5.0])], [0.5516, 0.0], CFG, DT
    ) == pytest.approx(0.6619, abs=1e-3)
    assert alpha_coefficient([1.0, 1.0], [], [], CFG, DT) == 1.0


def test_modified_input():
    assert_allclose(modified_input([1.0, -2.0], [0.0, 0.0], 1.0), [1.0, -2.0])
    assert_allclose(modified_input([1.0, -2.0], [3.0, 4.0], 0.0), [3.0, 4.0])
    assert_allclose(modified_input([-10.0, 0.0], [27.78, 0.0], 0.6619), [21.161, 0.0], atol=1e-3)
    with pytest.raises(ContractViolationError):
        modified_input([1.0, 0.0], [0.0, 0.0], 1.5)


def test_step_without_neighbors_is_pure_tracking():
    positions = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 3.0]])
    tracks = np.array([[1.0, 2.0], [-0.5, 0.3], [0.0, -4.0]])
    step = collision_avoidance_step(positions, tracks, CFG, DT)
    assert not step.F_r.any()
    assert_allclose(step.alpha, 1.0)
    assert_allclose(step.U, tracks)
    assert not step.degenerate.any()


def test_step_blends_near_pairs():
    positions = np.array([[0.0, 0.0], [0.33, 0.0]])
    tracks = np.array([[10.0, 0.0], [-10.0, 0.0]])
    step = collision_avoidance_step(positions, tracks, CFG, DT)
    assert step.F_r[0, 0] < 0.0 < step.F_r[1, 0]
    assert_allclose(step.alpha, [0.6612, 0.6612], atol=1e-3)
    assert_allclose(step.U, step.F_r + step.alpha[:, None] * tracks)


def test_config_invariants():
    with pytest.raises(ContractViolationError):
        RepulsiveConfig(beta=1.2)
    with pytest.raises(ContractViolationError):
        RepulsiveConfig(gamma=0.35)
    with pytest.raises(ContractViolationError):
        RepulsiveConfig(eta=0.0)


def test_energy_feasibility_warns_for_defaults(caplog):
    logger = logging.getLogger("lsmrac")
    logger.addHandler(caplog.handler)
    try:
        with caplog.at_level(logging.WARNING, logger="lsmrac"):
            report = check_energy_feasibility(CFG)
    finally:
        logger.removeHandler(caplog.handler)
    assert not report.feasible
    assert report.lhs == pytest.approx(0.6944, abs=1e-4)
    assert report.rhs == pytest.approx(0.5 * 18.0 * 1.5**2)
    assert "energy criterion" in caplog.text

    strong = RepulsiveConfig(eta=200.0, v_max=0.1, mass=1.0)
    assert check_energy_feasibility(strong).feasible


def test_pair_force_is_continuous_and_bounded():
    plateau = plateau_force(CFG)
    for rho in (CFG.gamma, CFG.rho0):
        below = force_magnitude(rho - 1e-9, CFG)
        above = force_magnitude(rho + 1e-9, CFG)
        assert abs(below - above) < 1e-4
    assert force_magnitude(CFG.rho0, CFG) == 0.0
    for gap in np.linspace(0.0, 1.0, 2001):
        force = pair_force(pair_geometry([0.0, 0.0], [gap, 0.0]), CFG)
        assert np.linalg.norm(force) <= plateau * (1.0 + 1e-12)


def test_alpha_is_monotone_in_budget_and_intrusion():
    f = np.array([force_magnitude(0.33, CFG), 0.0])
    budgets = np.linspace(0.0, 0.7, 50)
    by_budget = [alpha_coefficient([-10.0, 0.0], [f], [b], CFG, DT) for b in budgets]
    assert np.all(np.diff(by_budget) >= 0.0)
    pushes = np.linspace(0.1, 50.0, 50)
    by_push = [alpha_coefficient([-s, 0.0], [f], [0.3], CFG, DT) for s in pushes]
    assert np.all(np.diff(by_push) <= 0.0)
    assert by_push[0] == 1.0 and by_push[-1] < 1.0
    assert all(0.0 <= a <= 1.0 for a in by_budget + by_push)


def test_step_matches_pairwise_composition(rng):
    positions = rng.uniform(-0.4, 0.4, size=(5, 2))
    tracks = rng.normal(scale=5.0, size=(5, 2))
    step = collision_avoidance_step(positions, tracks, CFG, DT)
    for i in range(5):
        others = [j for j in range(5) if j != i]
        geoms = [pair_geometry(positions[i], positions[j]) for j in others]
        forces = [pair_force(g, CFG) for g in geoms]
        budgets = [energy_budget(g.rho_ij, CFG) for g in geoms]
        assert_allclose(step.F_r[i], resultant_force(positions, i, CFG), rtol=1e-12, atol=1e-12)
        alpha = alpha_coefficient(tracks[i], forces, budgets, CFG, DT)
        assert step.alpha[i] == pytest.approx(alpha, rel=1e-12, abs=1e-12)
        assert_allclose(step.U[i], modified_input(tracks[i], step.F_r[i], step.alpha[i]), atol=1e-12)


def test_repulsion_alone_keeps_converging_robots_apart(robot_plant):
    # velocities are in m per step; the pair closes in on each other
    states = np.array([[-0.3, 0.0, 0.005, 0.0], [0.3, 0.0, -0.005, 0.0]])
    tracks = np.array([[10.0, 0.0], [-10.0, 0.0]])
    closest = np.inf
    for _ in range(10_000):
        step = collision_avoidance_step(states[:, :2], tracks, CFG, DT)
        applied = np.array([modified_input(tracks[i], step.F_r[i], 0.0) for i in range(2)])
        states = plant_step(robot_plant, states, applied)
        closest = min(closest, float(np.linalg.norm(states[0, :2] - states[1, :2])))
    assert CFG.rho_min <= closest < CFG.rho0
