import numpy as np
import pytest

from mndist import classify as cl
from mndist import loewner as lw
from mndist import measures as ms
from mndist import transforms as tr
from mndist._util import sqrt_poscut


def ubm_psi_map(t=1.0):
    th0 = np.arccos(2 * np.exp(-t / 2) - 1)

    def fn(z):
        z = np.asarray(z, dtype=complex)
        s = np.sqrt(1 - z * np.exp(-1j * th0)) \
            * np.sqrt(1 - z * np.exp(1j * th0))
        return -0.5 + (1 + z) / (2 * s)

    return tr.AnalyticMap(fn, "D", "psi")


class TestUnivalence:
    def test_shift_passes(self):
        v = cl.univalence_test(tr.shift_F(0.7))
        assert v.verdict == "PASS"

    def test_symmetric_bernoulli_psi_fails(self):
        # psi(z) = z^2/(1-z^2) collides at (z, -z)
        psi = tr.AnalyticMap(lambda z: z * z / (1 - z * z), "D", "psi")
        v = cl.univalence_test(psi)
        assert v.verdict == "FAIL"
        z1, z2 = v.witness
        assert abs(z1 + z2) < 1e-5  # antipodal collision pair
        # witness re-evaluates at 10x tighter tolerance
        f1 = complex(psi(np.asarray(z1)))
        f2 = complex(psi(np.asarray(z2)))
        assert abs(f1 - f2) < v.value * 10 + 1e-12

    def test_finite_variance_halfplane_certificate(self):
        m = ms.from_table(np.linspace(-1, 1, 101), np.ones(101),
                          atoms=[(2.0, 0.3)], renormalize=True)
        sig = np.sqrt(m.variance())
        grid = cl.halfplane_grid(center=float(m.mean()), scale=2.0,
                                 r_min=0.01)
        grid = grid[grid.imag > sig * 1.01]
        v = cl.univalence_test(tr.f_transform(m), grid=grid)
        assert v.verdict == "PASS"


class TestUnimodalR:
    def test_uniform_midpoint_mode(self):
        t = 2.0
        v = cl.unimodal_test_R(ms.uniform(0, t), t / 2)
        assert v.verdict == "PASS"

    def test_semicircle_centre(self):
        v = cl.unimodal_test_R(ms.semicircle(0, 1.3), 0.0)
        assert v.verdict == "PASS"

    def test_arcsine_fails_every_mode(self):
        m = ms.arcsine(0, 1.0)
        for c in np.linspace(-1.2, 1.2, 7):
            v = cl.unimodal_test_R(m, c)
            assert v.verdict == "FAIL"
            # witness reproduces the violation
            val = cl.unimodal_value_R(m, c, np.asarray(v.witness))
            assert val < -cl.TIE_TOL


class TestUnimodalT:
    def test_uniform_upper_semicircle(self):
        arc = ms.circle_uniform_arc(0, np.pi)
        v = cl.unimodal_test_T(arc, 0.0, 0.0)
        assert v.verdict == "PASS"

    def test_delta_one_degenerate(self):
        v = cl.unimodal_test_T(ms.circle_point_mass(0.0), -np.pi, 0.0)
        assert v.verdict == "PASS"

    def test_ubm_fails_every_pair(self):
        scan = cl.unimodal_scan_T(ubm_psi_map(1.0), n_alpha=8, n_delta=8)
        assert all(v.verdict == "FAIL" for v in scan)

    def test_bad_mode_order_rejected(self):
        with pytest.raises(cl.ClassifyError):
            cl.unimodal_test_T(ms.circle_point_mass(0.0), 1.0, 0.5)


class TestStarlike:
    def test_semicircle_passes(self):
        v = cl.starlike_test_R(ms.semicircle(0, 1))
        assert v.verdict == "PASS"

    def test_left_shifted_arcsine_fails_with_witness(self):
        F = tr.AnalyticMap(lambda z: sqrt_poscut(z * z - 2.0) - 0.8,
                           "H", "F")
        v = cl.starlike_test_R(F)
        assert v.verdict == "FAIL"
        val = cl.starlike_value_R(F, np.asarray(v.witness))
        assert val < -cl.TIE_TOL

    def test_boolean_stable_half_passes(self):
        g = tr.boolean_stable_G(0.5, 1.0, 1.0)
        assert cl.starlike_test_R(g).verdict == "PASS"

    def test_type_h_ubm_passes(self):
        assert cl.type_h_test_T(ubm_psi_map(1.0)).verdict == "PASS"


class TestMarkovTransform:
    def test_point_mass_fixed(self):
        out = cl.markov_transform(ms.point_mass(0.7))
        assert list(out.atom_locs) == [0.7]

    def test_two_atoms_give_arcsine(self):
        nu = ms.RealMeasure([(-1.0, 0.5), (1.0, 0.5)])
        km = cl.markov_transform(nu)
        ref = ms.arcsine(0, 0.5)  # arcsine on [-1, 1]
        xs = np.linspace(-0.995, 0.995, 2001)
        assert np.trapezoid(np.abs(km.pdf(xs) - ref.pdf(xs)), xs) < 1e-3

    def test_atomic_density_product_formula(self):
        locs = np.array([-1.0, 0.5, 2.0])
        w = np.array([0.3, 0.45, 0.25])
        nu = ms.RealMeasure(list(zip(locs, w)))
        km = cl.markov_transform(nu)

        def dens(x):
            if x <= locs[0] or x >= locs[-1]:
                return 0.0
            p = np.searchsorted(locs, x) - 1
            return np.sin(np.pi * w[p + 1:].sum()) / np.pi \
                * np.prod(np.abs(x - locs) ** (-w))

        xs = np.concatenate([np.linspace(-0.9, 0.4, 400),
                             np.linspace(0.6, 1.9, 400)])
        expect = np.array([dens(x) for x in xs])
        assert np.max(np.abs(km.pdf(xs) - expect)) < 2e-3

    def test_master_equation_residual(self):
        nu = ms.RealMeasure([(-1.0, 0.3), (0.2, 0.7)])
        assert cl.km_master_residual(nu, n=20) < 1e-8

    def test_no_atoms_for_nondegenerate(self):
        nu = ms.RealMeasure([(-1.0, 0.5), (1.0, 0.5)])
        km = cl.markov_transform(nu)
        assert len(km.atom_locs) == 0


class TestInverseMarkov:
    def test_arcsine_recovers_two_atoms(self):
        spec = cl.inverse_markov_transform(ms.arcsine(0, 0.5))
        nu = spec.measure
        assert np.allclose(nu.atom_locs, [-1.0, 1.0], atol=1e-6)
        assert np.allclose(nu.atom_weights, [0.5, 0.5], atol=1e-6)

    def test_point_mass(self):
        spec = cl.inverse_markov_transform(ms.point_mass(0.4))
        assert spec.measure.atom_locs[0] == pytest.approx(0.4, abs=1e-9)
        assert len(spec.measure.atom_locs) == 1

    def test_semicircle_boolean_square(self):
        # nu has B_nu = 2 B_mu, i.e. F_nu = sqrt(z^2 - 4) for the standard
        # semicircle; verified through the round trip
        sc = ms.semicircle(0, 1)
        spec = cl.inverse_markov_transform(sc)
        zs = np.array([1j, 1 + 2j, -2 + 0.5j])
        F = tr.f_transform(spec.measure)
        assert np.max(np.abs(F(zs) - sqrt_poscut(zs * zs - 4))) < 1e-3
        km = cl.markov_transform(
            spec, grid=np.linspace(-2.3, 2.3, 1201),
            eps_ladder=2.0 ** -np.arange(4, 17))
        assert float(ms.levy_distance(km, sc)) < 1e-2

    def test_non_starlike_rejected(self):
        m = ms.RealMeasure([(-1.0, 0.5), (1.0, 0.5)])
        shifted = tr.stieltjes_invert(
            lambda z: 1.0 / (sqrt_poscut(z * z - 2.0) - 1.5))
        with pytest.raises(cl.NotSelfdecomposableError):
            cl.inverse_markov_transform(shifted)


class TestSelfdecompFactor:
    def test_point_mass_factor(self):
        fac = cl.selfdecomp_factor(ms.point_mass(2.0), 0.3)
        zs = np.array([1j, 1 + 2j])
        assert np.max(np.abs(fac(zs) - (zs - 0.7 * 2.0))) < 1e-9

    def test_monotone_stable_factor(self):
        al, rho, t, c = 0.7, 0.8, 1.2, 0.6
        fac = cl.selfdecomp_factor(tr.monotone_stable_F(al, rho, t), c)
        expect = tr.monotone_stable_F(al, rho, (1 - c ** al) * t)
        zs = np.array([1j, 1 + 2j, -0.5 + 0.8j])
        assert np.max(np.abs(fac(zs) - expect(zs))) < 1e-8

    def test_circle_type_h_factor_residual(self):
        psi = tr.as_psi(ubm_psi_map(1.0))
        c = 0.55
        eta_fac = cl.selfdecomp_factor_T(ubm_psi_map(1.0), c)
        zs = 0.5 * np.exp(1j * np.linspace(0.3, 5.9, 6))
        res = psi(eta_fac(zs)) - c * psi(zs)
        assert np.max(np.abs(res)) < 1e-9


class TestInfinitesimalSplit:
    def test_shift_pieces(self):
        pair = lw.GeneratingPairAdd(0.8, 0)
        pieces, rep = cl.infinitesimal_split(pair, 8)
        assert len(pieces) == 8
        assert pieces[0].atom_locs[0] == pytest.approx(0.1, abs=1e-9)
        assert rep["recomposition_residual"] < 1e-8

    def test_arcsine_semigroup_split(self):
        pair = lw.GeneratingPairAdd(
            0.0, ms.RealMeasure([(0.0, 1.0)], require_probability=False))
        pieces, rep = cl.infinitesimal_split(pair, 16)
        assert rep["recomposition_residual"] < 1e-8
        # increment is AS(0, 1/16): no mass outside [-1/2, 1/2]
        assert rep["sup_mass_outside"][0] < 1e-6
        assert float(ms.levy_distance(pieces[0],
                                      ms.arcsine(0, 1 / 16))) < 5e-3

    def test_ubm_split_recomposition(self):
        pair = lw.GeneratingPairMult(
            0.0, ms.CircleMeasure([(0.0, 0.5)], require_probability=False))
        pieces, rep = cl.infinitesimal_split(pair, 16)
        assert rep["recomposition_residual"] < 1e-8
        assert rep["sup_mass_outside"][0] < 0.05


class TestCircleEstimates:
    def test_point_mass_trivial(self):
        s1, s2, s3 = cl.circle_estimates(ms.circle_point_mass(0.0), 0.5, 5)
        assert s1 >= 0 and s2 >= 0 and s3 >= 0
        assert s1 == pytest.approx(0.0, abs=1e-12)

    def test_poisson_kernels(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            c = rng.uniform(0.1, 0.9) * np.exp(2j * np.pi * rng.random())
            slacks = cl.circle_estimates(ms.poisson_kernel(c), 0.5, 5)
            assert min(slacks) >= -1e-9

    def test_random_atomic(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            k = rng.integers(2, 5)
            th = np.sort(rng.uniform(0, 2 * np.pi, k))
            w = rng.dirichlet(np.ones(k))
            m = ms.CircleMeasure(list(zip(th, w)))
            delta = rng.uniform(0.1, 1.4)
            slacks = cl.circle_estimates(m, delta, int(rng.integers(1, 9)))
            assert min(slacks) >= -1e-9

    def test_bad_delta_rejected(self):
        with pytest.raises(cl.ClassifyError):
            cl.circle_estimates(ms.haar(), 2.0, 3)
