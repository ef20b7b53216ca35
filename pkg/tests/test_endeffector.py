import math
import random

import pytest

from luscan.endeffector import (
    STANDARD_GRAVITY,
    SpringParams,
    SpringState,
    TorsionParams,
    contact_force,
    ring_rail_equilibrium,
    ring_rail_residual,
    ring_rail_roots,
    spring_state_update,
    torsion_equilibrium,
)
from luscan.errors import DomainError

KGF = STANDARD_GRAVITY


def balanced_params(f_c_kgf=0.8):
    return SpringParams(f_c_N=f_c_kgf * KGF, m_cw_kg=0.5, m_us_kg=0.5)


def test_contact_force_balanced():
    force = contact_force(balanced_params(), SpringState(10.0, True, False))
    assert force == pytest.approx(0.8 * 9.80665, abs=1e-12)
    assert force == pytest.approx(7.845, abs=1e-3)


def test_contact_force_not_in_contact():
    assert contact_force(balanced_params(), SpringState()) == 0.0


def test_contact_force_unbalanced():
    params = SpringParams(f_c_N=7.845, m_cw_kg=0.6, m_us_kg=0.5)
    force = contact_force(params, SpringState(5.0, True, False))
    assert force == pytest.approx(8.826, abs=1e-3)


def test_contact_force_never_negative():
    params = SpringParams(f_c_N=0.0, m_cw_kg=0.0, m_us_kg=2.0)
    assert contact_force(params, SpringState(5.0, True, False)) == 0.0


def test_contact_force_independent_of_travel():
    params = balanced_params()
    forces = {contact_force(params, SpringState(t, True, False))
              for t in (0.001, 3.0, 17.5, 39.999)}
    assert len(forces) == 1


def test_contact_force_saturated_penalty():
    params = balanced_params()
    state = spring_state_update(45.0, params.travel_max_mm)
    assert state.saturated and state.overdrive_mm == pytest.approx(5.0)
    force = contact_force(params, state)
    assert force == pytest.approx(0.8 * KGF + 5.0 * 5.0)


def test_spring_state_update_cases():
    s = spring_state_update(-3.0, 40.0)
    assert s == SpringState(0.0, False, False, 0.0)
    s = spring_state_update(12.0, 40.0)
    assert s.travel_mm == 12.0 and s.in_contact and not s.saturated
    s = spring_state_update(55.0, 40.0)
    assert s.travel_mm == 40.0 and s.saturated


def test_torsion_zero_when_spring_dominates():
    assert torsion_equilibrium(0.3, 0.05, 0.5) == 0.0


def test_torsion_positive_root_matches_bisection_oracle():
    mgl = 1.0 * STANDARD_GRAVITY * 0.1

    def f(theta):
        return mgl * math.sin(theta) - 0.5 * theta

    lo, hi = 1e-9, math.pi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    oracle = 0.5 * (lo + hi)
    got = torsion_equilibrium(1.0, 0.1, 0.5)
    assert got == pytest.approx(oracle, abs=1e-9)
    assert got == pytest.approx(1.87, abs=5e-3)
    assert abs(f(got)) < 1e-10


def test_torsion_stiff_limit():
    assert torsion_equilibrium(1.0, 0.1, 1e9) == 0.0


def test_torsion_monotone_in_stiffness():
    prev = math.pi
    for k in (0.05, 0.1, 0.2, 0.4, 0.8, 0.95, 1.2):
        theta = torsion_equilibrium(1.0, 0.1, k)
        assert theta <= prev + 1e-12
        prev = theta


def test_torsion_residuals_random():
    rng = random.Random(3)
    for _ in range(500):
        m = rng.uniform(0.05, 5.0)
        l = rng.uniform(0.01, 0.5)
        k = rng.uniform(0.01, 5.0)
        theta = torsion_equilibrium(m, l, k)
        assert 0.0 <= theta < math.pi
        assert abs(m * STANDARD_GRAVITY * l * math.sin(theta) - k * theta) < 1e-10


def test_ring_rail_zero_is_exact_root():
    assert ring_rail_residual(0.0, 0.5, 0.08, 200.0, 0.05, math.pi / 3.0) == 0.0


def test_ring_rail_example_root():
    theta = ring_rail_equilibrium(0.5, 0.08, 200.0, 0.05, math.pi / 3.0)
    assert 0.0 <= theta < math.pi
    if theta > 0.0:
        assert abs(ring_rail_residual(theta, 0.5, 0.08, 200.0, 0.05, math.pi / 3.0)) < 1e-10


def test_ring_rail_large_ring_goes_to_zero():
    theta = ring_rail_equilibrium(0.5, 0.08, 200.0, 50.0, math.pi / 3.0)
    assert theta == pytest.approx(0.0, abs=1e-6)


def test_ring_rail_residuals_random():
    rng = random.Random(5)
    for _ in range(500):
        m = rng.uniform(0.05, 3.0)
        l = rng.uniform(0.01, 0.3)
        k = rng.uniform(10.0, 500.0)
        ring = rng.uniform(0.01, 0.2)
        phi = rng.uniform(0.1, math.pi - 0.1)
        theta = ring_rail_equilibrium(m, l, k, ring, phi)
        assert 0.0 <= theta < math.pi
        assert abs(ring_rail_residual(theta, m, l, k, ring, phi)) < 1e-10


def test_ring_rail_grid_refinement_invariance():
    rng = random.Random(9)
    for _ in range(50):
        m = rng.uniform(0.05, 3.0)
        l = rng.uniform(0.01, 0.3)
        k = rng.uniform(10.0, 500.0)
        ring = rng.uniform(0.01, 0.2)
        phi = rng.uniform(0.1, math.pi - 0.1)
        coarse = ring_rail_roots(m, l, k, ring, phi, grid=4096)
        fine = ring_rail_roots(m, l, k, ring, phi, grid=8192)
        pos_c = min((r for r in coarse if r > 0), default=0.0)
        pos_f = min((r for r in fine if r > 0), default=0.0)
        assert pos_c == pytest.approx(pos_f, abs=1e-9)


def test_param_validation():
    with pytest.raises(DomainError):
        SpringParams(f_c_N=-1.0, m_cw_kg=0.5, m_us_kg=0.5)
    with pytest.raises(DomainError):
        torsion_equilibrium(0.0, 0.1, 0.5)
    with pytest.raises(DomainError):
        ring_rail_equilibrium(0.5, 0.08, 200.0, 0.05, 0.0)
    with pytest.raises(DomainError):
        TorsionParams(1, 1, 1, 1, 1, 1, 0, 1)
