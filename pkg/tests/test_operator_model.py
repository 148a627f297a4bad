import numpy as np
import pytest

from mndist import operator_model as om


@pytest.fixture(scope="module")
def bernoulli_ops():
    steps = [om.bernoulli_step() for _ in range(3)]
    ps = om.build_chain(steps)
    return om.build_operators(ps)


@pytest.fixture(scope="module")
def blaschke_ops():
    steps = [om.BlaschkeEta(phase=0.3, zeros=[0.4]),
             om.BlaschkeEta(phase=-0.2, zeros=[-0.3 + 0.2j]),
             om.BlaschkeEta(phase=0.1, zeros=[0.25j])]
    ps = om.build_chain(steps, side="multiplicative")
    return om.build_operators(ps)


class TestBuildChain:
    def test_shift_chain_deterministic(self):
        ps = om.build_chain([om.shift_step(0.5), om.shift_step(0.5)])
        assert ps.dim == 1
        assert np.allclose(ps.paths[0], [0.0, 0.5, 1.0])

    def test_bernoulli_roots_and_masses(self):
        locs, masses = om.bernoulli_step().kernel_atoms(0.7)
        # roots of w - 1/w = x: w = (x +- sqrt(x^2+4))/2
        expect = np.sort([(0.7 + np.sqrt(0.7 ** 2 + 4)) / 2,
                          (0.7 - np.sqrt(0.7 ** 2 + 4)) / 2])
        assert np.allclose(locs, expect, atol=1e-12)
        assert masses.sum() == pytest.approx(1.0, abs=1e-12)

    def test_two_step_chain_ck_exact(self):
        ps = om.build_chain([om.bernoulli_step(), om.bernoulli_step()])
        assert ps.dim == 4
        # exact Chapman-Kolmogorov: transition through the intermediate
        # time equals the direct 2-step transform
        zs = np.array([2j, 1 + 1.5j])
        f02 = om.chain_transition(ps, 0, 2)(zs)
        f01 = om.chain_transition(ps, 0, 1)
        f12 = om.chain_transition(ps, 1, 2)
        assert np.max(np.abs(f02 - f01(f12(zs)))) < 1e-14

    def test_cap_enforced(self):
        with pytest.raises(om.OperatorModelError):
            om.build_chain([om.bernoulli_step()] * 13, cap=4096)


class TestBuildOperators:
    def test_vacuum_projection_rank_one(self):
        ps = om.build_chain([om.bernoulli_step()])
        ops = om.build_operators(ps)
        assert np.linalg.matrix_rank(ops.P[0]) == 1
        assert np.allclose(ops.P[0] @ ops.vacuum, ops.vacuum)

    def test_x0_vanishes(self, bernoulli_ops):
        assert np.max(np.abs(bernoulli_ops.X[0])) == 0.0

    def test_p_block_structure(self, bernoulli_ops):
        # P_{t1} has one block per time-1 state: rank = number of
        # distinct one-step prefixes
        assert np.linalg.matrix_rank(bernoulli_ops.P[1]) == 2
        assert np.linalg.matrix_rank(bernoulli_ops.P[2]) == 4


class TestIncrementLaw:
    def test_s_equals_t_trivial(self, bernoulli_ops):
        ps = bernoulli_ops.space
        zs = np.array([2j])
        eye = np.eye(ps.dim)
        lhs = bernoulli_ops.P[1] @ np.linalg.solve(
            2j * eye - np.zeros((ps.dim, ps.dim)), bernoulli_ops.P[1])
        assert np.max(np.abs(lhs - bernoulli_ops.P[1] / 2j)) < 1e-14

    def test_first_increment_vacuum_law(self, bernoulli_ops):
        assert om.check_increment_law(bernoulli_ops, 0, 1) < 1e-10

    def test_later_increments(self, bernoulli_ops):
        assert om.check_increment_law(bernoulli_ops, 1, 2) < 1e-10
        assert om.check_increment_law(bernoulli_ops, 1, 3) < 1e-10
        assert om.check_increment_law(bernoulli_ops, 0, 3) < 1e-10


class TestMonotoneIndependence:
    def test_identity_middle_slot_collapses(self, bernoulli_ops):
        # (X, I) is monotonically independent: inserting the identity in
        # the middle slot is trivially the vacuum factorization
        A = bernoulli_ops.X[1]
        eye = np.eye(bernoulli_ops.space.dim)
        phi = om.vacuum_state(bernoulli_ops, eye)
        assert np.max(np.abs(A @ eye @ A - phi * (A @ A))) < 1e-14

    def test_three_time_chain(self, bernoulli_ops):
        assert om.check_monotone_independence(bernoulli_ops) < 1e-10

    def test_four_time_chain(self):
        steps = [om.bernoulli_step(0.5), om.bernoulli_step(1.0),
                 om.bernoulli_step(0.7), om.shift_step(0.3)]
        ops = om.build_operators(om.build_chain(steps))
        assert om.check_monotone_independence(ops) < 1e-10


class TestResolvent:
    def test_s_equals_t(self, bernoulli_ops):
        assert om.check_resolvent_formula(bernoulli_ops, 1, 1, 2j) < 1e-12

    def test_bernoulli(self, bernoulli_ops):
        assert om.check_resolvent_formula(bernoulli_ops, 0, 2, 2j) < 1e-10
        assert om.check_resolvent_formula(bernoulli_ops, 1, 3,
                                          1.5 + 0.5j) < 1e-10

    def test_shift_chain_closed_form(self):
        ps = om.build_chain([om.shift_step(0.4), om.shift_step(0.4)])
        ops = om.build_operators(ps)
        assert om.check_resolvent_formula(ops, 0, 2, 1j) < 1e-13


class TestUmip:
    def test_s_equals_t_sandwich(self, blaschke_ops):
        # W = I: the sandwich must equal z/(1-z) P_s
        ps = blaschke_ops.space
        eye = np.eye(ps.dim)
        z = 0.4 + 0.2j
        lhs = blaschke_ops.P[1] @ np.linalg.solve(
            eye - z * eye, z * eye) @ blaschke_ops.P[1]
        rhs = z / (1 - z) * blaschke_ops.P[1]
        assert np.max(np.abs(lhs - rhs)) < 1e-13

    def test_rotation_chain(self):
        ps = om.build_chain([om.rotation_eta_step(0.7),
                             om.rotation_eta_step(-0.4)],
                            side="multiplicative")
        ops = om.build_operators(ps)
        assert om.check_umip(ops, 0, 2) < 1e-12

    def test_blaschke_chain(self, blaschke_ops):
        for (i, j) in ((0, 1), (0, 2), (1, 3), (0, 3)):
            assert om.check_umip(blaschke_ops, i, j) < 1e-10

    def test_unitarity(self, blaschke_ops):
        eye = np.eye(blaschke_ops.space.dim)
        for U in blaschke_ops.U:
            assert np.max(np.abs(U.conj().T @ U - eye)) < 1e-12


class TestEquivalence:
    def test_refined_vs_coarse_chain(self):
        # chains with the same transition family have the same mixed
        # vacuum moments at shared times
        f = om.bernoulli_step()
        fine = om.build_operators(
            om.build_chain([f, om.shift_step(0.5), om.bernoulli_step(0.3)],
                           times=[0.0, 1.0, 1.5, 2.0]))

        class Fused:
            def __call__(self, z):
                return f(np.asarray(z, complex) - 0.5 * 1)

            def kernel_atoms(self, x):
                # kernel of F_{03}^{(1,2)} fused step: F = shift o F? not
                # needed: enumerate through the two-step tree instead
                raise NotImplementedError

        # instead fuse exactly: steps (shift then bernoulli(0.3)) -> use a
        # RationalPickF for F(z) = (z - 0.5) - 0.3/(z - 0.5)? composition
        # of rational steps is not rational Pick in general, so compare a
        # 2-step chain against itself with an extra refinement point that
        # is a deterministic zero-shift (identity step)
        ident = om.shift_step(0.0)
        a = om.build_operators(om.build_chain(
            [f, om.bernoulli_step(0.3)], times=[0.0, 1.0, 2.0]))
        b = om.build_operators(om.build_chain(
            [f, ident, om.bernoulli_step(0.3)], times=[0.0, 1.0, 1.5, 2.0]))
        dev = om.check_equivalence(a, b, shared_times=[0.0, 1.0, 2.0])
        assert dev < 1e-10
        assert fine is not None  # the refined chain builds fine


class TestIncrementLawMeasure:
    def test_vacuum_law_matches_kernel(self, bernoulli_ops):
        law = om.vacuum_spectral_law(
            bernoulli_ops, bernoulli_ops.X[2] - bernoulli_ops.X[0])
        kern = om.increment_law(bernoulli_ops.space, 0, 2)
        assert len(law) == len(kern.atom_locs)
        for (x, w), loc, wt in zip(law, kern.atom_locs, kern.atom_weights):
            assert x == pytest.approx(loc, abs=1e-10)
            assert w == pytest.approx(wt, abs=1e-10)
