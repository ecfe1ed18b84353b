import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.spatial.transform import Rotation

from rftbot.elastic import (
    ElasticModel,
    NaturalStrains,
    StiffnessSet,
    axial_stretch,
    curvature_binormal,
    discrete_twist,
    material_curvatures,
    natural_strains_from,
    rod_stiffness,
)
from rftbot.frames import DegenerateGeometryError, material_frame
from rftbot.network import RodNetwork, initial_state

from conftest import ElasticProblem, random_chain, star_positions


def fd_gradient(f, q, h=1e-7):
    g = np.empty_like(q)
    for i in range(len(q)):
        qp, qm = q.copy(), q.copy()
        qp[i] += h
        qm[i] -= h
        g[i] = (f(qp) - f(qm)) / (2 * h)
    return g


def energy_second_differences(f, q, h=1e-4):
    n = len(q)
    H = np.empty((n, n))
    f0 = f(q)
    for i in range(n):
        for j in range(i, n):
            if i == j:
                qp, qm = q.copy(), q.copy()
                qp[i] += h
                qm[i] -= h
                H[i, i] = (f(qp) - 2 * f0 + f(qm)) / h**2
            else:
                v = []
                for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                    qq = q.copy()
                    qq[i] += si * h
                    qq[j] += sj * h
                    v.append(f(qq))
                H[i, j] = H[j, i] = (v[0] - v[1] - v[2] + v[3]) / (4 * h**2)
    return H


def _problems(seed):
    rng = np.random.default_rng(seed)
    chain = random_chain(5, rng)
    flipped = [(0, 1), (2, 1), (2, 3), (3, 4)]
    sx, sedges = star_positions(n_arms=3, arm_nodes=2)
    sflip = [tuple(e) for e in sedges]
    sflip[1] = (2, 1)  # stem edge into the joint reversed
    sflip[3] = (4, 3)  # an arm edge reversed
    return {
        "chain": ElasticProblem(chain, [(i, i + 1) for i in range(4)], rng),
        "chain_flipped": ElasticProblem(chain, flipped, rng),
        "star": ElasticProblem(sx, sedges, rng, scale=0.01),
        "star_flipped": ElasticProblem(sx, sflip, rng, scale=0.01),
    }


PROBLEMS = _problems(7)


class TestStiffness:
    def test_values(self):
        EA, EI, GJ = rod_stiffness(1.2e6, 0.0032, 0.5)
        assert EA == pytest.approx(38.603890527311, rel=1e-12)
        assert EI == pytest.approx(9.8825959749916e-05, rel=1e-12)
        assert GJ == pytest.approx(6.5883973166611e-05, rel=1e-12)
        assert GJ == pytest.approx(EI * 2 / 3, rel=1e-14)

    def test_scaled(self):
        s = StiffnessSet(np.ones(3), np.ones(2), np.ones(2))
        t = s.scaled(np.array([True, False, True]), np.array([False, True]), 10.0)
        assert t.EA.tolist() == [10, 1, 10] and t.EI.tolist() == [1, 10] and t.GJ.tolist() == [1, 10]
        assert s.EA.tolist() == [1, 1, 1]


class TestStrains:
    def test_axial_stretch(self):
        assert axial_stretch([0, 0, 1.0], 1.0) == 0.0
        assert axial_stretch([0, 1.5, 0], 1.0) == pytest.approx(0.5)
        assert axial_stretch([1e-9, 0, 0], 1.0) == pytest.approx(-1.0, abs=1e-8)

    def test_binormal_examples(self):
        np.testing.assert_allclose(curvature_binormal([1.0, 0, 0], [2.0, 0, 0]), 0)
        np.testing.assert_allclose(curvature_binormal([1.0, 0, 0], [0, 1.0, 0]), [0, 0, 2])

    def test_binormal_antiparallel(self):
        with pytest.raises(DegenerateGeometryError):
            curvature_binormal([1.0, 0, 0], [-1.0, 0, 0])

    @given(st.floats(0.01, 3.0), st.floats(0.1, 3.0), st.floats(0.1, 3.0), st.integers(0, 1000))
    def test_binormal_norm(self, phi, la, lb, seed):
        R = Rotation.random(random_state=seed)
        e = R.apply([la, 0, 0])
        f = R.apply([lb * math.cos(phi), lb * math.sin(phi), 0])
        ang = math.acos(np.clip(e @ f / (la * lb), -1, 1))
        assert np.linalg.norm(curvature_binormal(e, f)) == pytest.approx(2 * math.tan(ang / 2), rel=1e-12)

    def test_material_curvatures(self):
        z, y = np.array([0, 0, 1.0]), np.array([0, 1.0, 0])
        assert material_curvatures(np.zeros(3), y, z, y, z) == (0.0, 0.0)
        k1, k2 = material_curvatures(np.array([0, 0, 2.0]), y, z, y, z)
        assert (k1, k2) == (2.0, 0.0)

    def test_material_curvatures_random(self, rng):
        # direct evaluation with the plus sign on kappa2
        kb = rng.standard_normal(3)
        m = rng.standard_normal((4, 3))
        k1, k2 = material_curvatures(kb, m[0], m[1], m[2], m[3])
        assert k1 == pytest.approx(0.5 * (m[1] + m[3]) @ kb)
        assert k2 == pytest.approx(0.5 * (m[0] + m[2]) @ kb)

    def test_discrete_twist(self):
        assert discrete_twist(0, 0, 0) == 0
        assert discrete_twist(0.1, 0.4, 0.0) == pytest.approx(0.3)
        assert discrete_twist(0.1, 0.4, 0.0, flip_in=True) == pytest.approx(0.5)
        assert discrete_twist(0.1, 0.4, 0.2, flip_out=True) == pytest.approx(-0.3)


class TestEnergyValues:
    def test_stretch_ten_percent(self):
        net = RodNetwork.from_edges([[0, 0, 0], [0, 0, 1.0]], [(0, 1)])
        nat = NaturalStrains(np.array([1.0]), np.zeros(0), np.zeros(0), np.zeros(0))
        m = ElasticModel(net, nat, StiffnessSet(np.array([1.0]), np.zeros(0), np.zeros(0)))
        s = initial_state(net, [[0, 0, 0], [0, 0, 1.1]])
        assert m.energy(s.q, s.d1, s.d2, s.ref_twist) == pytest.approx(0.005, rel=1e-12)

    def test_right_angle_bend(self):
        x = np.array([[0, 0, 0], [1.0, 0, 0], [1.0, 1.0, 0]])
        net = RodNetwork.from_edges(x, [(0, 1), (1, 2)])
        nat = NaturalStrains(np.ones(2), np.zeros(1), np.zeros(1), np.zeros(1))
        m = ElasticModel(net, nat, StiffnessSet(np.ones(2), np.ones(1), np.zeros(1)))
        s = initial_state(net, x)
        # transported frames: both m2 point along +z without any twist
        q = s.q.copy()
        m1, m2 = material_frame(s.d1, s.d2, q[-2:])
        np.testing.assert_allclose(m2, [[0, 0, 1], [0, 0, 1]], atol=1e-15)
        assert net.voronoi_lengths[0] == 1.0
        assert m.energy(q, s.d1, s.d2, s.ref_twist) == pytest.approx(2.0, rel=1e-12)
        k = m.strains(q, s.d1, s.d2, s.ref_twist)
        assert k[0, 0] == pytest.approx(2.0) and k[0, 1] == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("name", list(PROBLEMS))
    def test_zero_at_natural_configuration(self, name):
        p = PROBLEMS[name]
        x0 = p.tracker  # reuse topology only
        net = p.net
        rng = np.random.default_rng(3)
        q = p.q.copy()
        st = initial_state(net, q[: 3 * net.node_count].reshape(-1, 3))
        st.q[3 * net.node_count:] = rng.standard_normal(net.edge_count)
        nat = natural_strains_from(net, st.q, st.d1, st.d2, st.ref_twist)
        m = ElasticModel(net, nat, p.stiffness)
        e, g, _ = m.evaluate(st.q, st.d1, st.d2, st.ref_twist)
        assert e == 0.0
        assert np.max(np.abs(g)) < 1e-12
        assert x0 is not None


class TestDerivatives:
    @pytest.mark.parametrize("name", list(PROBLEMS))
    def test_gradient_central_differences(self, name):
        p = PROBLEMS[name]
        g = p.gradient()
        gfd = fd_gradient(p.energy, p.q, h=1e-7)
        assert np.max(np.abs(g - gfd)) / np.max(np.abs(g)) < 1e-6

    @pytest.mark.parametrize("name", list(PROBLEMS))
    def test_hessian_energy_second_differences(self, name):
        p = PROBLEMS[name]
        H = p.hessian()
        Hfd = energy_second_differences(p.energy, p.q)
        assert np.max(np.abs(H - Hfd)) / np.max(np.abs(H)) < 1e-4

    @pytest.mark.parametrize("name", list(PROBLEMS))
    def test_hessian_theta_columns_vs_gradient_differences(self, name):
        # moving a twist angle leaves the frames alone, so the gradient formula is exact there
        p = PROBLEMS[name]
        H = p.hessian()
        n3 = 3 * p.net.node_count
        h = 1e-6
        for j in range(n3, p.net.ndof):
            qp, qm = p.q.copy(), p.q.copy()
            qp[j] += h
            qm[j] -= h
            col = (p.gradient(qp) - p.gradient(qm)) / (2 * h)
            assert np.max(np.abs(col - H[:, j])) / np.max(np.abs(H)) < 1e-6

    @pytest.mark.parametrize("name", list(PROBLEMS))
    def test_hessian_symmetric(self, name):
        H = PROBLEMS[name].hessian()
        assert np.max(np.abs(H - H.T)) <= 1e-10 * np.max(np.abs(H))

    def test_sparsity_bound(self):
        p = PROBLEMS["star"]
        H = p.hessian()
        assert np.count_nonzero(H) <= 36 * p.net.edge_count + 121 * len(p.net.springs)


class TestInvariance:
    @pytest.mark.parametrize("name", list(PROBLEMS))
    def test_translation(self, name):
        p = PROBLEMS[name]
        d1, d2, _, rt = p.tracker.at(p.q)
        q = p.q.copy()
        q[: 3 * p.net.node_count] += np.tile([0.3, -1.2, 2.0], p.net.node_count)
        e0 = p.model.energy(p.q, d1, d2, rt)
        assert p.model.energy(q, d1, d2, rt) == pytest.approx(e0, rel=1e-10)

    @pytest.mark.parametrize("name", list(PROBLEMS))
    def test_rotation(self, name):
        p = PROBLEMS[name]
        d1, d2, _, rt = p.tracker.at(p.q)
        R = Rotation.from_rotvec([0.4, -1.1, 0.7])
        n3 = 3 * p.net.node_count
        q = p.q.copy()
        q[:n3] = R.apply(p.q[:n3].reshape(-1, 3)).ravel()
        e0 = p.model.energy(p.q, d1, d2, rt)
        assert p.model.energy(q, R.apply(d1), R.apply(d2), rt) == pytest.approx(e0, rel=1e-10)

    def test_flip_equals_reoriented_copy(self):
        rng = np.random.default_rng(11)
        x = random_chain(5, rng)
        plain = RodNetwork.from_edges(x, [(0, 1), (1, 2), (2, 3), (3, 4)])
        flip = RodNetwork.from_edges(x, [(0, 1), (2, 1), (2, 3), (4, 3)])
        s = initial_state(plain, x)
        s.q[3 * 5:] = rng.standard_normal(4)
        nat = natural_strains_from(plain, s.q, s.d1, s.d2, s.ref_twist)
        nat.kappa1 += 0.2
        nat.twist -= 0.1
        stiff = StiffnessSet(np.ones(4), np.ones(3), 0.5 * np.ones(3))
        y = x + 0.02 * rng.standard_normal(x.shape)
        sy = initial_state(plain, y)
        qy = np.concatenate([y.ravel(), rng.standard_normal(4)])
        e_plain = ElasticModel(plain, nat, stiff).energy(qy, sy.d1, sy.d2, sy.ref_twist)
        # same physical rods described with edges 1 and 3 reversed: {-d1, d2, -t}, -theta
        sgn = np.array([1.0, -1.0, 1.0, -1.0])
        d1f = sy.d1 * sgn[:, None]
        qf = qy.copy()
        qf[15:] *= sgn
        e_flip = ElasticModel(flip, nat, stiff).energy(qf, d1f, sy.d2, sy.ref_twist)
        assert e_flip == pytest.approx(e_plain, rel=1e-12)
