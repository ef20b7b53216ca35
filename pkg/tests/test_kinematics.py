import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from luscan.errors import DomainError, ReachError
from luscan.kinematics import (
    Gantry,
    JointLimits,
    JointState,
    MountFrame,
)
from luscan.torso import BreathingModel, TorsoModel


@pytest.fixture
def gantry():
    return Gantry()


@pytest.fixture
def torso():
    return TorsoModel(breathing=BreathingModel(enabled=False))


def test_clamp_examples(gantry):
    q = gantry.clamp_joints(JointState(1200.0, 250.0, -5.0, 0.0))
    assert q.x_mm == 1000.0
    assert q.z_mm == 0.0
    q2 = JointState(500.0, 250.0, 100.0, 0.3)
    assert gantry.clamp_joints(q2) == q2


@given(x=st.floats(-2000, 3000), y=st.floats(-2000, 3000),
       z=st.floats(-2000, 3000), psi=st.floats(-7, 7))
@settings(max_examples=150, deadline=None)
def test_clamp_idempotent(x, y, z, psi):
    gantry = Gantry()
    once = gantry.clamp_joints(JointState(x, y, z, psi))
    assert gantry.clamp_joints(once) == once
    assert gantry.in_limits(once)


def test_fk_straight_down(gantry):
    pose = gantry.forward_kinematics(JointState(500.0, 250.0, 200.0, 0.0))
    assert pose.axis == pytest.approx((0.0, 0.0, -1.0))
    assert pose.tip_mm == pytest.approx((500.0, 250.0, 380.0 - 120.0))


def test_fk_quarter_turn(gantry):
    pose = gantry.forward_kinematics(JointState(500.0, 250.0, 200.0, math.pi / 2.0))
    assert pose.axis[0] == pytest.approx(1.0)
    assert pose.axis[2] == pytest.approx(0.0, abs=1e-12)


def test_fk_tip_displacement_oracle():
    gantry = Gantry(mount=MountFrame(offset_mm=(0.0, 0.0, 0.0), le_mm=100.0))
    q = JointState(500.0, 250.0, 200.0, math.pi / 4.0)
    pose = gantry.forward_kinematics(q)
    mount = gantry.mount_point(q)
    dx = pose.tip_mm[0] - mount[0]
    dz = pose.tip_mm[2] - mount[2]
    assert dx == pytest.approx(100.0 * math.sin(math.pi / 4.0))
    assert dz == pytest.approx(-100.0 * math.cos(math.pi / 4.0))
    assert pose.roll_rad == q.phi_probe_rad


def test_fk_rejects_out_of_limit(gantry):
    with pytest.raises(DomainError):
        gantry.forward_kinematics(JointState(-50.0, 0.0, 0.0, 0.0))


def test_arc_solve_apex(gantry, torso):
    q = gantry.arc_solve(torso, 0.0, 0.0)
    assert q.psi_rad == pytest.approx(0.0, abs=1e-12)
    pose = gantry.forward_kinematics(q)
    assert pose.tip_mm[0] == pytest.approx(500.0)
    assert pose.tip_mm[2] == pytest.approx(200.0 + 315.5 / 2.0, abs=1e-9)


def test_arc_solve_oblique_value(gantry, torso):
    # The ellipse normal at alpha = pi/4 tilts atan(b/a) from vertical.
    q = gantry.arc_solve(torso, math.pi / 4.0, 0.0)
    expect = math.atan((315.5 / 2.0) / (311.4 / 2.0))
    assert abs(q.psi_rad) == pytest.approx(expect, abs=1e-12)
    assert abs(q.psi_rad) == pytest.approx(0.7919, abs=2e-4)


def test_arc_solve_mirror(gantry, torso):
    alpha = 0.9
    qp = gantry.arc_solve(torso, alpha, 5.0)
    qn = gantry.arc_solve(torso, -alpha, 5.0)
    xc = torso.center_mm[0]
    assert qn.psi_rad == pytest.approx(-qp.psi_rad, abs=1e-12)
    assert qn.x_mm - xc == pytest.approx(-(qp.x_mm - xc), abs=1e-9)
    assert qn.z_mm == pytest.approx(qp.z_mm, abs=1e-9)


def test_fk_of_arc_solution_sits_on_surface(gantry, torso):
    rng = random.Random(11)
    for _ in range(300):
        alpha = rng.uniform(-math.pi / 2.0, math.pi / 2.0)
        q = gantry.arc_solve(torso, alpha, 0.0)
        pose = gantry.forward_kinematics(q)
        assert abs(torso.signed_distance(pose.tip_mm, 0.0)) < 1e-6
        sp = torso.surface_point(alpha, 0.0, 0.0)
        dot = sum(a * n for a, n in zip(pose.axis, sp.normal))
        cross = pose.axis[2] * sp.normal[0] - pose.axis[0] * sp.normal[2]
        assert math.atan2(abs(cross), dot) < 1e-9


def test_arc_solve_rejects_beyond_limit(torso):
    gantry = Gantry(alpha_max_rad=1.0)
    with pytest.raises(ReachError):
        gantry.arc_solve(torso, 1.2, 0.0)


def test_arc_rates_match_finite_difference(gantry, torso):
    h = 1e-6
    for alpha in (-1.3, -0.6, 0.0, 0.35, 0.8, 1.4):
        for standoff in (0.0, 12.0):
            vel = gantry.arc_rates(torso, alpha, standoff, alpha_rate=1.0)
            qp = gantry._arc_joints(torso, alpha + h, standoff, 0.0, None)
            qm = gantry._arc_joints(torso, alpha - h, standoff, 0.0, None)
            assert vel.vx_mm_s == pytest.approx((qp.x_mm - qm.x_mm) / (2 * h), rel=1e-5, abs=1e-5)
            assert vel.vz_mm_s == pytest.approx((qp.z_mm - qm.z_mm) / (2 * h), rel=1e-5, abs=1e-5)
            assert vel.vpsi_rad_s == pytest.approx((qp.psi_rad - qm.psi_rad) / (2 * h), rel=1e-5, abs=1e-8)


def test_alpha_from_psi_round_trip(gantry, torso):
    for alpha in (-1.5, -0.8, 0.0, 0.4, 1.1, 1.5):
        q = gantry.arc_solve(torso, alpha, 0.0)
        assert gantry.alpha_from_psi(torso, q.psi_rad) == pytest.approx(alpha, abs=1e-12)


def test_reachable_examples(gantry, torso):
    for anchor in torso.anchors:
        assert gantry.anchor_reachable(torso, anchor)
        sp = torso.surface_point(anchor.alpha_rad, anchor.y_mm, 0.0)
        assert gantry.reachable(sp.point_mm)
    assert not gantry.reachable((torso.center_mm[0] + 2000.0, 250.0, 300.0))


def test_reachable_with_sd_grown_torso(gantry):
    grown = TorsoModel(
        dims=__import__("luscan.torso", fromlist=["TorsoDims"]).TorsoDims(
            width_mm=311.4 + 17.1, depth_mm=315.5 + 16.5, height_mm=209.7 + 19.9
        ),
        breathing=BreathingModel(enabled=False),
    )
    for anchor in grown.anchors:
        assert gantry.anchor_reachable(grown, anchor)


def test_reachable_monotone_under_shrinking(gantry, torso):
    from luscan.torso import TorsoDims

    for scale in (0.9, 0.7, 0.5):
        small = TorsoModel(
            dims=TorsoDims(311.4 * scale, 315.5 * scale, 209.7 * scale),
            breathing=BreathingModel(enabled=False),
        )
        for anchor in small.anchors:
            assert gantry.anchor_reachable(small, anchor)


def test_lateral_unreachable_with_short_x_axis(torso):
    gantry = Gantry(limits=JointLimits(x_mm=(0.0, 200.0)))
    for anchor in torso.anchors:
        if anchor.region_id in (3, 4):
            assert not gantry.anchor_reachable(torso, anchor)
