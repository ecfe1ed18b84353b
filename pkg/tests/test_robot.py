import math
from types import SimpleNamespace

import numpy as np
import pytest

from rftbot.drag import DragModel
from rftbot.elastic import ElasticModel
from rftbot.measure import (
    MeasurementError,
    efficiency,
    measure,
    measure_rotations,
    measure_speed,
    rad_s_to_rpm,
    rpm_to_rad_s,
)
from rftbot.robot import BuildError, RobotSpec, build_robot, simulate
from rftbot.stepper import SolverConfig

COARSE = 0.0185  # 6 edges per tail
W100 = rpm_to_rad_s(100.0)


def _coarse(n=2, **kw):
    return build_robot(RobotSpec(n=n, target_edge_length=COARSE, **kw))


def _synthetic(t, s=None, theta=None, spoke=None, omega_T=0.0):
    z = np.zeros_like(t)
    return SimpleNamespace(t=t, s=z if s is None else s, theta_h=z if theta is None else theta,
                           spoke_angle=spoke, omega_T=omega_T)


class TestSpec:
    def test_defaults(self):
        s = RobotSpec()
        assert (s.n, s.a, s.L2, s.L3, s.r0) == (2, 0.02, 0.04, 0.111, 0.0032)
        assert (s.E, s.nu, s.rho, s.target_edge_length) == (1.2e6, 0.5, 1000.0, 4.11e-3)
        assert s.L1 == pytest.approx(0.04)
        assert s.tail_edge_count == 27

    @pytest.mark.parametrize("kw", [{"n": 0}, {"a": 0.0}, {"L3": -1.0}, {"r0": 0.0}, {"E": -2.0},
                                    {"target_edge_length": 0.0}])
    def test_invalid(self, kw):
        with pytest.raises(BuildError):
            build_robot(RobotSpec(**kw)) if "n" not in kw else RobotSpec(**kw)


class TestGeometry:
    @pytest.mark.parametrize("n", [1, 2, 3, 5])
    def test_layout(self, n):
        r = build_robot(RobotSpec(n=n))
        x = r.positions
        np.testing.assert_allclose(x[:3], [[0, 0, 0], [0, 0, -0.02], [0, 0, -0.04]], atol=1e-15)
        tips = x[r.spoke_tips]
        np.testing.assert_allclose(np.linalg.norm(tips[:, :2], axis=1), 0.02, rtol=1e-14)
        np.testing.assert_allclose(tips[:, 2], -0.04, atol=1e-15)
        az = np.sort(np.mod(np.arctan2(tips[:, 1], tips[:, 0]), 2 * math.pi))
        np.testing.assert_allclose(np.diff(np.append(az, az[0] + 2 * math.pi)), 2 * math.pi / n, atol=1e-12)
        for k, row in enumerate(r.tail_edges):
            nodes = r.network.edges[row]
            np.testing.assert_allclose(x[nodes[:, 1]][:, :2], np.tile(tips[k, :2], (27, 1)), atol=1e-15)
            assert x[nodes[-1, 1], 2] == pytest.approx(-0.04 - 0.111, abs=1e-14)
            assert np.all(np.diff(x[nodes[:, 1], 2]) < 0)

    def test_rigid_flags(self):
        r = build_robot(RobotSpec(n=3))
        rig = r.network.rigid_edges
        assert rig[[0, 1]].all() and rig[r.spoke_edges].all()
        assert not rig[r.tail_edges.ravel()].any()
        assert rig.sum() == 2 + 3

    def test_stiffness(self):
        r = build_robot(RobotSpec(n=2))
        EA = math.pi * 0.0032**2 * 1.2e6
        np.testing.assert_allclose(r.stiffness.EA[r.tail_edges.ravel()], EA, rtol=1e-14)
        np.testing.assert_allclose(r.stiffness.EA[r.spoke_edges], 1e4 * EA, rtol=1e-14)
        sp = r.network.springs
        root = np.isin(sp.nodes[:, 1], r.spoke_tips)
        assert root.sum() == 2
        EI = 1.2e6 * math.pi * 0.0032**4 / 4
        np.testing.assert_allclose(r.stiffness.EI[root], 1e4 * EI, rtol=1e-14)
        np.testing.assert_allclose(r.stiffness.EI[r.flexible_springs], EI, rtol=1e-14)
        assert r.flexible_springs.sum() == 2 * 26

    @pytest.mark.parametrize("n", [2, 3])
    def test_zero_energy_at_start(self, n):
        r = build_robot(RobotSpec(n=n))
        s = r.initial_state()
        model = ElasticModel(r.network, r.natural, r.stiffness)
        assert model.energy(s.q, s.d1, s.d2, s.ref_twist, 0.0) == 0.0

    def test_head_mass(self):
        r = build_robot(RobotSpec(n=2))
        A = math.pi * 0.0032**2
        assert r.mass.masses[3] == pytest.approx(0.035 + 1000 * A * 0.02, rel=1e-12)

    def test_tail_stiffness_scaling(self):
        r = _coarse()
        s = r.with_tail_stiffness(1e6)
        tails = r.tail_edges.ravel()
        np.testing.assert_allclose(s.stiffness.EA[tails], 1e6 * r.stiffness.EA[tails])
        np.testing.assert_allclose(s.stiffness.EI[r.flexible_springs], 1e6 * r.stiffness.EI[r.flexible_springs])
        np.testing.assert_array_equal(s.stiffness.EA[r.spoke_edges], r.stiffness.EA[r.spoke_edges])


class TestSimulate:
    def test_stationary(self):
        r = _coarse()
        tr = simulate(r, 0.0, 0.5, keep_states=True)
        assert len(tr) == 51
        assert np.all(tr.states == tr.states[0])
        assert np.all(tr.s == 0)

    def test_deterministic(self):
        r = _coarse()
        a = simulate(r, W100, 0.3, keep_states=True)
        b = simulate(r, W100, 0.3, keep_states=True)
        assert np.array_equal(a.states, b.states)

    def test_invalid_duration(self):
        with pytest.raises(ValueError):
            simulate(_coarse(), W100, 0.0)

    @pytest.mark.parametrize("n", [2, 3])
    def test_mirror_symmetry(self, n):
        r = _coarse(n)
        v = [measure_speed(simulate(r, w, 3.0))[0] for w in (W100, -W100)]
        assert v[0] > 0
        assert abs(v[1] - v[0]) <= 1e-9 * abs(v[0])

    def test_head_and_tails_counter_rotate(self):
        r = _coarse()
        a = simulate(r, W100, 1.0)
        b = simulate(r, -W100, 1.0)
        # the head edge points backward, so its azimuth about the axis is -theta_h
        assert -a.theta_h[-1] * a.spoke_angle[-1] < 0
        assert a.theta_h[-1] == pytest.approx(-b.theta_h[-1], rel=1e-12)
        assert a.spoke_angle[-1] == pytest.approx(-b.spoke_angle[-1], rel=1e-9)

    @pytest.mark.parametrize("axis", [(1.0, 0.0, 0.0), (1.0, 2.0, -0.5)])
    def test_axis_invariance(self, axis):
        v = [measure_speed(simulate(_coarse(3, axis=ax), W100, 3.0))[0] for ax in ((0, 0, 1.0), axis)]
        assert abs(v[1] - v[0]) <= 1e-8 * abs(v[0])

    def test_rigid_multiplier_insensitive(self):
        v = []
        for mult in (1e4, 2e4):
            r = build_robot(RobotSpec(n=2, target_edge_length=COARSE), rigid_multiplier=mult)
            v.append(measure_speed(simulate(r, W100, 5.0, SolverConfig(rigid_multiplier=mult)))[0])
        assert abs(v[1] - v[0]) < 5e-3 * v[0]


class TestMeasureSpeed:
    def test_exact_line(self):
        t = np.linspace(0, 10, 1001)
        v, res = measure_speed(_synthetic(t, s=0.6e-3 * t))
        assert v * 1e3 == pytest.approx(0.6, rel=1e-12)
        assert res < 1e-15

    def test_transient_ignored(self):
        t = np.linspace(0, 10, 1001)
        s = np.where(t < 1.5, 0.0, 0.6e-3 * (t - 1.5))
        assert measure_speed(_synthetic(t, s=s))[0] * 1e3 == pytest.approx(0.6, rel=1e-12)

    def test_stationary(self):
        t = np.linspace(0, 10, 1001)
        assert measure_speed(_synthetic(t)) == (0.0, 0.0)

    def test_too_short(self):
        # 62 samples leave exactly 50 after the 20% transient
        with pytest.raises(MeasurementError, match="too short"):
            measure_speed(_synthetic(np.arange(61, dtype=float)))
        assert measure_speed(_synthetic(np.arange(62, dtype=float)))[0] == 0.0

    def test_length_mismatch(self):
        t = np.arange(100.0)
        with pytest.raises(MeasurementError):
            measure_speed(SimpleNamespace(t=t, s=t[:-1]))


class TestRotations:
    def test_locked_budget_exact(self):
        t = np.linspace(0, 20, 2001)
        wT, wh = 10.0, 9.5
        tr = _synthetic(t, theta=wh * t, spoke=-(wT - wh) * t, omega_T=wT)
        h, tt = measure_rotations(tr, wT)
        assert h + tt == pytest.approx(wT, rel=1e-13)
        assert (h, tt) == (pytest.approx(9.5), pytest.approx(0.5))

    def test_fallback_without_spoke(self):
        t = np.linspace(0, 20, 2001)
        h, tt = measure_rotations(_synthetic(t, theta=-3.0 * t), 5.0)
        assert (h, tt) == (pytest.approx(3.0), pytest.approx(2.0))

    def test_units(self):
        assert rpm_to_rad_s(60.0) == pytest.approx(2 * math.pi)
        assert rad_s_to_rpm(rpm_to_rad_s(95.47)) == pytest.approx(95.47)
        np.testing.assert_allclose(rpm_to_rad_s([30.0, 60.0]), [math.pi, 2 * math.pi])

    def test_simulated_budget(self):
        tr = simulate(_coarse(), W100, 3.0)
        m = measure(tr)
        assert m.budget_error < 1e-3
        assert m.omega_h > 0 and m.omega_t > 0


class TestEfficiency:
    def test_reference_value(self):
        assert efficiency(0.22e-3, rpm_to_rad_s(95.47), DragModel()) == pytest.approx(0.0512, abs=5e-5)

    def test_zero_speed(self):
        assert efficiency(0.0, 10.0) == 0.0

    def test_mu_cancels(self):
        a = efficiency(2e-4, 9.0, DragModel(mu=6.828))
        b = efficiency(2e-4, 9.0, DragModel(mu=0.5))
        assert a == b

    def test_closed_form(self):
        d = DragModel()
        v, wh = 3e-4, 7.0
        force = 6 * math.pi * d.C1 * d.mu * d.a * v
        torque = 8 * math.pi * d.C2 * d.mu * d.a**3 * wh
        assert efficiency(v, wh, d) == pytest.approx(force * d.a / torque, rel=1e-14)

    def test_non_rotating_head(self):
        with pytest.raises(MeasurementError):
            efficiency(1e-4, 0.0)
