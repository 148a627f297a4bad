import numpy as np
import pytest

from mndist import measures as ms


def random_mixed_measure(rng, n_atoms=2, n_nodes=81):
    """Random atoms + random smooth tabulated bump density."""
    lo, hi = sorted(rng.uniform(-4, 4, 2))
    hi = max(hi, lo + 0.5)
    x = np.linspace(lo, hi, n_nodes)
    vals = np.zeros_like(x)
    for _ in range(rng.integers(1, 4)):
        c = rng.uniform(lo, hi)
        w = rng.uniform(0.1, 1.0)
        vals += rng.uniform(0.2, 1.0) * np.exp(-((x - c) / w) ** 2)
    atoms = []
    locs = []
    for _ in range(rng.integers(0, n_atoms + 1)):
        loc = round(float(rng.uniform(-6, 6)), 6)
        # keep atoms apart at the inversion grid's resolution scale
        if all(abs(loc - x) > 0.2 for x in locs):
            locs.append(loc)
            atoms.append((loc, float(rng.uniform(0.05, 0.3))))
    total_atoms = sum(w for _, w in atoms)
    seg = ms.Segment(lo, hi, grid=x, values=vals)
    scale = (1 - total_atoms) / seg.mass()
    return ms.RealMeasure(atoms, [ms.Segment(lo, hi, grid=x,
                                             values=vals * scale)])


class TestMoment:
    def test_point_mass_powers(self):
        m = ms.point_mass(1.7)
        for n in range(5):
            assert m.moment(n) == pytest.approx(1.7 ** n, abs=1e-14)

    def test_semicircle_fourth_moment_is_catalan(self):
        # independent oracle: Catalan number C_2 = 2 for the standard law
        m = ms.semicircle(0.0, 1.0)
        assert m.moment(4) == pytest.approx(2.0, abs=1e-10)
        assert m.moment(6) == pytest.approx(5.0, abs=1e-10)

    def test_haar_moments_vanish(self):
        h = ms.haar()
        for n in range(1, 6):
            assert abs(h.moment(n)) < 1e-14

    def test_moment_negative_order_rejected(self):
        with pytest.raises(ms.MeasureError):
            ms.point_mass(0.0).moment(-1)


class TestVariance:
    def test_point_mass(self):
        assert ms.point_mass(3.0).variance() == pytest.approx(0.0, abs=1e-13)

    def test_arcsine(self):
        assert ms.arcsine(1.2, 0.7).variance() == pytest.approx(0.7, abs=1e-9)

    def test_uniform_t2_over_12(self):
        t = 1.8
        assert ms.uniform(0, t).variance() == pytest.approx(t * t / 12,
                                                            abs=1e-10)


class TestDilate:
    def test_atoms_scale(self):
        m = ms.point_mass(2.0).dilate(-1.5)
        assert m.atom_locs[0] == pytest.approx(-3.0)

    def test_semicircle_density_change_of_variables(self):
        m = ms.semicircle(0, 1).dilate(2.0)
        ref = ms.semicircle(0, 4)
        xs = np.linspace(-3.9, 3.9, 101)
        assert np.max(np.abs(m.pdf(xs) - ref.pdf(xs))) < 1e-12

    def test_zero_collapses_to_delta(self):
        m = ms.semicircle(0, 1).dilate(0.0)
        assert list(m.atom_locs) == [0.0] and not m.segments

    def test_moment_scaling_invariant(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            m = random_mixed_measure(rng)
            c = rng.uniform(-2, 2)
            md = m.dilate(c)
            for n in range(7):
                assert md.moment(n) == pytest.approx(
                    c ** n * m.moment(n), abs=1e-8 * max(1, abs(c) ** n * 50))


class TestSample:
    def test_delta_deterministic(self):
        s = ms.point_mass(0.0).sample(42, 5)
        assert np.all(s == 0.0)

    def test_uniform_mean_mc(self):
        n = 10 ** 5
        s = ms.uniform(0, 1).sample(7, n)
        sigma = np.sqrt(1 / 12 / n)
        assert abs(s.mean() - 0.5) < 3 * sigma

    def test_bernoulli_fraction_mc(self):
        n = 10 ** 5
        m = ms.RealMeasure([(-1.0, 0.5), (1.0, 0.5)])
        s = m.sample(123, n)
        frac = np.mean(s > 0)
        assert abs(frac - 0.5) < 3 * np.sqrt(0.25 / n)

    def test_seed_reproducible(self):
        m = ms.semicircle(0, 1)
        assert np.array_equal(m.sample(5, 100), m.sample(5, 100))


class TestLevyDistance:
    def test_self_distance_zero(self):
        m = ms.semicircle(0, 1)
        assert float(ms.levy_distance(m, m)) == 0.0

    def test_translation_bound(self):
        eps = 0.004
        d = ms.levy_distance(ms.point_mass(0.0), ms.point_mass(eps))
        assert d <= eps + 1e-6
        assert d > 0

    def test_arcsine_vs_inversion(self):
        # oracle: closed-form F of AS_{0,t}; see also test_transforms
        from mndist import transforms as tr
        from mndist._util import sqrt_poscut
        t = 0.5
        g = tr.AnalyticMap(lambda z: 1 / sqrt_poscut(z * z - 2 * t), "H", "G")
        m = tr.stieltjes_invert(g)
        assert float(ms.levy_distance(m, ms.arcsine(0, t))) < 1e-2

    def test_triangle_inequality(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            a, b, c = (random_mixed_measure(rng) for _ in range(3))
            dab = float(ms.levy_distance(a, b))
            dbc = float(ms.levy_distance(b, c))
            dac = float(ms.levy_distance(a, c))
            assert dac <= dab + dbc + 5e-3  # grid tolerance


class TestInvariants:
    def test_total_mass_one(self):
        rng = np.random.default_rng(5)
        for _ in range(8):
            m = random_mixed_measure(rng)
            assert m.total_mass() == pytest.approx(1.0, abs=1e-10)
            assert m.dilate(rng.uniform(0.2, 3)).total_mass() == \
                pytest.approx(1.0, abs=1e-10)

    def test_negative_mass_rejected(self):
        with pytest.raises(ms.MeasureError):
            ms.RealMeasure([(0.0, -0.5), (1.0, 1.5)])

    def test_unsorted_duplicate_atoms_rejected(self):
        with pytest.raises(ms.MeasureError):
            ms.RealMeasure([(0.0, 0.5), (0.0, 0.5)])

    def test_mass_defect_rejected(self):
        with pytest.raises(ms.MeasureError):
            ms.RealMeasure([(0.0, 0.7)])


class TestCirclemeasure:
    def test_poisson_kernel_density_formula(self):
        c = 0.3 + 0.4j
        pk = ms.poisson_kernel(c)
        th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        expect = (1 - abs(c) ** 2) / np.abs(1 - np.conj(c)
                                            * np.exp(1j * th)) ** 2
        assert np.max(np.abs(pk.density_at(th) - expect)) < 1e-12

    def test_poisson_moments(self):
        c = 0.5 - 0.2j
        pk = ms.poisson_kernel(c)
        for n in range(1, 5):
            assert pk.moment(n) == pytest.approx(c ** n, abs=1e-12)

    def test_arc_mass(self):
        arc = ms.circle_uniform_arc(0, np.pi)
        assert arc.arc_mass(0, np.pi / 2) == pytest.approx(0.5, abs=1e-6)
        # boundary cells contribute at grid resolution only
        assert arc.arc_mass(-np.pi, 0) == pytest.approx(0.0, abs=1e-3)

    def test_sample_circle(self):
        pk = ms.poisson_kernel(0.6)
        s = pk.sample(11, 20000)
        m1 = np.mean(np.exp(1j * s))
        assert abs(m1 - 0.6) < 0.02


class TestJson:
    def test_round_trip_mixed(self):
        rng = np.random.default_rng(9)
        m = random_mixed_measure(rng)
        m2 = ms.measure_from_json(ms.measure_to_json(m))
        xs = np.linspace(*m.support(), 64)
        assert np.max(np.abs(m.cdf(xs) - m2.cdf(xs))) < 1e-9

    def test_round_trip_named(self):
        for m in (ms.semicircle(0.5, 2.0), ms.uniform(-1, 3),
                  ms.haar(), ms.poisson_kernel(0.2 + 0.1j)):
            m2 = ms.measure_from_json(ms.measure_to_json(m))
            assert m2.metadata.get("name") == m.metadata.get("name")

    def test_export_density_csv(self, tmp_path):
        from mndist.cli import _write_density_csv
        path = tmp_path / "dens.csv"
        _write_density_csv(ms.semicircle(0, 1), str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "x,density"
        assert (tmp_path / "dens.atoms.json").exists()
