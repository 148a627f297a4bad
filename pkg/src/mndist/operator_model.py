r"""Finite-dimensional operator model of monotone increment processes.

A chain with rational Pick per-step F-transforms has exactly atomic,
exactly homogeneous kernels: the kernel at state x sits on the real roots
of ``F(w) = x`` with masses ``1/F'(root)``.  Enumerating the path tree
gives a finite probability space; on its L^2 (represented in the
sqrt-probability basis so conditional expectations become orthogonal
projection matrices) the operators

.. math:: X_t = P_t M_t, \qquad U_t = I + (M_t - I) P_t

realize the additive / multiplicative monotone increment process, and the
defining identities hold to machine precision:

* increment sandwich  ``P_s (z - (X_t - X_s))^{-1} P_s = G_st(z) P_s``,
* resolvent formula for ``z - (X_t - X_s)``,
* monotone independence of increment algebras,
* unitary sandwich ``P_s zW(1-zW)^{-1} P_s = psi_st(z) P_s`` with
  ``W = U_s^* U_t``.
"""

from dataclasses import dataclass, field

import numpy as np

from . import measures as ms


class OperatorModelError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# per-step transforms with exact atomic kernels
# ---------------------------------------------------------------------------

class RationalPickF:
    """F(z) = z + a - sum_j b_j/(z - p_j) with b_j > 0 (an F-transform)."""

    def __init__(self, shift=0.0, poles=(), weights=()):
        self.shift = float(shift)
        self.poles = np.asarray(poles, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        if np.any(self.weights <= 0) and len(self.weights):
            raise OperatorModelError("pole weights must be positive")
        if len(self.poles) > 1 and np.min(np.diff(np.sort(self.poles))) <= 0:
            raise OperatorModelError("poles must be simple")

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        val = z + self.shift
        for p, b in zip(self.poles, self.weights):
            val = val - b / (z - p)
        return val

    def deriv(self, z):
        z = np.asarray(z, dtype=complex)
        val = np.ones_like(z)
        for p, b in zip(self.poles, self.weights):
            val = val + b / (z - p) ** 2
        return val

    def kernel_atoms(self, x):
        """Atoms of the measure with Cauchy transform 1/(F(z) - x).

        The roots of F(w) = x interlace the poles and are all real; the
        masses are the residues 1/F'(root) and sum to one.
        """
        # polynomial: (w + a - x) prod(w - p_k) - sum_j b_j prod_{k!=j}(w-p_k)
        base = np.poly(self.poles) if len(self.poles) else np.array([1.0])
        poly = np.polymul([1.0, self.shift - x], base)
        for j, b in enumerate(self.weights):
            others = np.delete(self.poles, j)
            term = b * (np.poly(others) if len(others) else np.array([1.0]))
            poly = np.polysub(poly, np.concatenate(
                [np.zeros(len(poly) - len(term)), term]))
        roots = np.roots(poly)
        if np.max(np.abs(roots.imag)) > 1e-8 * (1 + np.max(np.abs(roots))):
            raise OperatorModelError("non-real kernel roots (root "
                                     "multiplicity or bad data)")
        roots = np.sort(roots.real)
        masses = 1.0 / self.deriv(roots + 0j).real
        if np.any(masses <= 0) or abs(masses.sum() - 1.0) > 1e-10:
            raise OperatorModelError("kernel masses inconsistent")
        return roots, masses


def bernoulli_step(scale=1.0):
    """F(z) = z - scale/z: the two-atom (Bernoulli) base kernel."""
    return RationalPickF(0.0, poles=[0.0], weights=[scale])


def shift_step(c):
    return RationalPickF(-c)


class BlaschkeEta:
    """Inner rational eta-transform ``e^{i phi} z prod (z-a_j)/(1-conj(a_j) z)``.

    Inner eta-transforms have purely atomic (Clark-measure) kernels: the
    kernel at x sits on the conjugates of the solutions of eta(z) = 1/x.
    """

    def __init__(self, phase=0.0, zeros=()):
        self.phase = float(phase)
        self.zeros = np.asarray(zeros, dtype=complex)
        if np.any(np.abs(self.zeros) >= 1):
            raise OperatorModelError("Blaschke zeros must lie in the disk")

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        val = np.exp(1j * self.phase) * z
        for a in self.zeros:
            val = val * (z - a) / (1 - np.conj(a) * z)
        return val

    def deriv(self, z):
        z = np.asarray(z, dtype=complex)
        logd = 1.0 / z
        for a in self.zeros:
            logd = logd + 1.0 / (z - a) + np.conj(a) / (1 - np.conj(a) * z)
        return self(z) * logd

    def kernel_atoms(self, x):
        """Kernel atoms (angles, masses) at a unimodular state x = e^{i th}.

        Solves eta(z) x = 1 as a polynomial equation; for inner eta all
        roots lie on the circle and the atom of the kernel sits at the
        conjugate of each root with mass 1/(z eta'(z) x).
        """
        x = np.exp(1j * x) if np.isrealobj(np.asarray(x)) else complex(x)
        # numerator polynomial of eta(z) x - 1 over prod(1 - conj(a) z)
        num = np.array([np.exp(1j * self.phase) * x, 0.0])  # x e^{i phi} z
        den = np.array([1.0 + 0j])
        for a in self.zeros:
            num = np.polymul(num, np.array([1.0, -a]))
            den = np.polymul(den, np.array([-np.conj(a), 1.0]))
        poly = np.polysub(np.concatenate(
            [np.zeros(max(0, len(den) - len(num))), num]),
            np.concatenate([np.zeros(max(0, len(num) - len(den))), den]))
        roots = np.roots(poly)
        if np.max(np.abs(np.abs(roots) - 1.0)) > 1e-8:
            raise OperatorModelError("Clark roots left the circle")
        roots = roots / np.abs(roots)
        masses = (1.0 / (roots * self.deriv(roots) * x)).real
        if np.any(masses <= 0) or abs(masses.sum() - 1.0) > 1e-8:
            raise OperatorModelError("Clark masses inconsistent")
        angles = np.angle(np.conj(roots)) % (2 * np.pi)
        return angles, masses


def rotation_eta_step(phi):
    return BlaschkeEta(phase=phi)


# ---------------------------------------------------------------------------
# finite path spaces
# ---------------------------------------------------------------------------

@dataclass
class FinitePathSpace:
    times: np.ndarray          # t_0 = 0 < t_1 < ... < t_m
    paths: np.ndarray          # (N, m+1) states (reals or angles)
    probs: np.ndarray          # (N,)
    steps: list                # per-step transforms
    side: str = "additive"

    @property
    def dim(self):
        return len(self.probs)


def build_chain(steps, times=None, start=0.0, cap=4096, side="additive"):
    """Enumerate the path tree of a chain with exactly atomic kernels."""
    m = len(steps)
    if times is None:
        times = np.arange(m + 1, dtype=float)
    times = np.asarray(times, dtype=float)
    paths = [[float(start)]]
    probs = [1.0]
    for step in steps:
        new_paths, new_probs = [], []
        for path, pr in zip(paths, probs):
            locs, masses = step.kernel_atoms(path[-1])
            for loc, w in zip(locs, masses):
                new_paths.append(path + [float(loc)])
                new_probs.append(pr * w)
        if len(new_paths) > cap:
            raise OperatorModelError(f"path space exceeds cap {cap}")
        paths, probs = new_paths, new_probs
    return FinitePathSpace(times, np.asarray(paths), np.asarray(probs),
                           list(steps), side)


def chain_transition(ps, i, j):
    """F_{t_i t_j} (or eta_{t_i t_j}): composition of steps i..j-1."""
    def fn(z):
        w = np.asarray(z, dtype=complex)
        for k in range(j - 1, i - 1, -1):
            w = ps.steps[k](w)
        return w

    return fn


def increment_law(ps, i, j):
    """k_{t_i t_j}(start, .) by exact sub-chain enumeration from state 0."""
    start = 0.0
    states = {start: 1.0}
    for k in range(i, j):
        nxt = {}
        for x, pr in states.items():
            locs, masses = ps.steps[k].kernel_atoms(x)
            for loc, w in zip(locs, masses):
                key = round(float(loc), 12)
                nxt[key] = nxt.get(key, 0.0) + pr * w
        states = nxt
    if ps.side == "additive":
        return ms.RealMeasure(sorted(states.items()))
    return ms.CircleMeasure(sorted(states.items()))


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

@dataclass
class OperatorSet:
    times: np.ndarray
    P: list                    # projections (sqrt-probability basis)
    M: list                    # multiplication operators (diagonal)
    X: list = None             # additive: X_t = P_t M_t
    U: list = None             # multiplicative: U_t = I + (M_t - I) P_t
    vacuum: np.ndarray = None
    space: FinitePathSpace = None
    residuals: dict = field(default_factory=dict)


def build_operators(ps, dim_cap=4096, tol=1e-12):
    """Dense matrices for P_t, M_t and X_t / U_t; asserts the invariants."""
    N = ps.dim
    if N > dim_cap:
        raise OperatorModelError(f"dimension {N} exceeds cap")
    sq = np.sqrt(ps.probs)
    vac = sq.copy()
    P_list, M_list = [], []
    m = ps.paths.shape[1] - 1
    for i in range(m + 1):
        # group paths by their trajectory up to time i
        keys = {}
        for p in range(N):
            key = tuple(np.round(ps.paths[p, :i + 1], 12))
            keys.setdefault(key, []).append(p)
        P = np.zeros((N, N))
        for idx in keys.values():
            idx = np.asarray(idx)
            mass = ps.probs[idx].sum()
            P[np.ix_(idx, idx)] = np.outer(sq[idx], sq[idx]) / mass
        P_list.append(P)
        if ps.side == "additive":
            M_list.append(np.diag(ps.paths[:, i]))
        else:
            M_list.append(np.diag(np.exp(1j * ps.paths[:, i])))
    for i, P in enumerate(P_list):
        if np.max(np.abs(P @ P - P)) > tol or np.max(np.abs(P - P.T)) > tol:
            raise OperatorModelError("projection invariant violated")
        for j in range(i, m + 1):
            if np.max(np.abs(P_list[i] @ P_list[j] - P_list[i])) > tol:
                raise OperatorModelError("filtration invariant violated")
    ops = OperatorSet(ps.times, P_list, M_list, vacuum=vac, space=ps)
    if ps.side == "additive":
        ops.X = [P @ Mm for P, Mm in zip(P_list, M_list)]
        for Xi in ops.X:
            if np.max(np.abs(Xi - Xi.T)) > tol:
                raise OperatorModelError("X_t not symmetric")
    else:
        eye = np.eye(N)
        ops.U = [eye + (Mm - eye) @ P for P, Mm in zip(P_list, M_list)]
        for Ui in ops.U:
            if np.max(np.abs(Ui.conj().T @ Ui - eye)) > tol * 10:
                raise OperatorModelError("U_t not unitary")
    return ops


def vacuum_state(ops, A):
    return complex(ops.vacuum @ (A @ ops.vacuum))


def vacuum_spectral_law(ops, A, tol=1e-8):
    """Spectral distribution of a symmetric A in the vacuum state."""
    lam, V = np.linalg.eigh(A)
    w = (V.T @ ops.vacuum) ** 2
    atoms = []
    for x, wt in sorted(zip(lam, w)):
        if atoms and abs(x - atoms[-1][0]) < tol:
            atoms[-1] = (atoms[-1][0], atoms[-1][1] + wt)
        else:
            atoms.append((float(x), float(wt)))
    return [(x, wt) for x, wt in atoms if wt > 1e-14]


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def check_increment_law(ops, i, j, zs=None):
    """Sandwich identity and vacuum law of the increment X_j - X_i.

    Returns the max over sample z of
    ``||P_i (z - (X_j-X_i))^{-1} P_i - G_ij(z) P_i||`` plus the atomwise
    distance between the vacuum spectral law and the sub-chain kernel law.
    """
    ps = ops.space
    if zs is None:
        rng = np.random.default_rng(17)
        zs = rng.uniform(-2, 2, 10) + 1j * rng.uniform(0.5, 3, 10)
    N = ps.dim
    eye = np.eye(N)
    inc = ops.X[j] - ops.X[i]
    F = chain_transition(ps, i, j)
    dev = 0.0
    for z in np.atleast_1d(zs):
        lhs = ops.P[i] @ np.linalg.solve(z * eye - inc, ops.P[i])
        rhs = (1.0 / complex(F(np.asarray(z)))) * ops.P[i]
        dev = max(dev, float(np.max(np.abs(lhs - rhs))))
    # vacuum law vs exact kernel law
    law = vacuum_spectral_law(ops, inc)
    kern = increment_law(ps, i, j)
    kern_atoms = list(zip(kern.atom_locs, kern.atom_weights))
    if len(law) != len(kern_atoms):
        raise OperatorModelError(
            f"vacuum law has {len(law)} atoms, kernel {len(kern_atoms)}")
    atom_dev = max(max(abs(a - b), abs(wa - wb))
                   for (a, wa), (b, wb) in zip(law, kern_atoms))
    return max(dev, atom_dev)


def _resolvent_difference(z):
    def f(x):
        return 1.0 / (z - x) - 1.0 / z

    return f


def _matrix_function(A, f):
    lam, V = np.linalg.eigh(A)
    return (V * f(lam)) @ V.T


def check_monotone_independence(ops, zs=None, extra_functions=(), tol_order=0):
    """Max residual of the monotone-independence conditions (i) and (ii).

    Increment algebras are ordered by their time intervals; test elements
    are resolvent differences ``1/(z-x) - 1/z`` (vanishing at 0) and
    bounded trig maps.  Condition (i) is the vacuum factorization over
    decreasing-then-increasing index tuples; condition (ii) is the matrix
    identity ``A B C = Phi(B) A C`` for middle-maximal triples.
    """
    ps = ops.space
    m = len(ops.times) - 1
    if zs is None:
        zs = [1.7j, -0.8 + 1.3j]
    funcs = [_resolvent_difference(z) for z in zs]
    funcs += [np.sin, lambda x: 1 - np.cos(x)]
    funcs += list(extra_functions)
    intervals = [(i, j) for i in range(m + 1) for j in range(i + 1, m + 1)]

    def inc_op(iv, f):
        A = ops.X[iv[1]] - ops.X[iv[0]]
        return _matrix_function(A, f)

    worst = 0.0
    # condition (ii): intervals I_a, I_c <= I_b (b strictly later)
    for b in intervals:
        for a in intervals:
            if a[1] > b[0]:
                continue
            for c in intervals:
                if c[1] > b[0]:
                    continue
                for fa in funcs[:2]:
                    for fb in funcs:
                        for fc in funcs[:2]:
                            A = inc_op(a, fa)
                            B = inc_op(b, fb)
                            C = inc_op(c, fc)
                            phi = vacuum_state(ops, B)
                            worst = max(worst, float(np.max(np.abs(
                                A @ B @ C - phi * (A @ C)))))
    # condition (i): vacuum factorization on ordered tuples
    rng = np.random.default_rng(5)
    for _ in range(24):
        k = rng.integers(2, 5)
        ivs = [intervals[rng.integers(len(intervals))] for _ in range(k)]
        order = [iv[0] for iv in ivs]  # position order of the intervals
        jmin = int(np.argmin(order))
        # need strictly decreasing before, strictly increasing after, and
        # non-overlap between neighbours: sample until the shape fits
        ok = all(_interval_lt(ivs[i + 1], ivs[i]) for i in range(jmin)) and \
            all(_interval_lt(ivs[i], ivs[i + 1])
                for i in range(jmin, k - 1))
        if not ok:
            continue
        fs = [funcs[rng.integers(len(funcs))] for _ in range(k)]
        prod = np.eye(ps.dim)
        phis = 1.0
        for iv, f in zip(ivs, fs):
            A = inc_op(iv, f)
            prod = prod @ A
            phis *= vacuum_state(ops, A)
        worst = max(worst, abs(vacuum_state(ops, prod) - phis))
    return worst


def _interval_lt(a, b):
    """Strict order of time intervals: a entirely before b."""
    return a[1] <= b[0] and a != b


def check_resolvent_formula(ops, i, j, z):
    r"""Residual of the closed resolvent of the increment:

    ``R = I/z + M_t/(z(z-M_t)) P_t - M_s(F-M_s)/(F(z-M_t)) P_s (z-M_t)^{-1}``
    with ``F = F_{ij}(z)``, against ``(z - (X_j - X_i)) R = I``.
    """
    ps = ops.space
    N = ps.dim
    eye = np.eye(N)
    Ms = np.diag(ops.M[i])
    Mt = np.diag(ops.M[j])
    F = complex(chain_transition(ps, i, j)(np.asarray(z)))
    d1 = Mt / (z * (z - Mt))
    d2 = Ms * (F - Ms) / (F * (z - Mt))
    d3 = 1.0 / (z - Mt)
    R = eye / z + d1[:, None] * ops.P[j] \
        + (-d2[:, None]) * ops.P[i] * d3[None, :]
    inc = ops.X[j] - ops.X[i]
    r1 = np.max(np.abs((z * eye - inc) @ R - eye))
    r2 = np.max(np.abs(R @ (z * eye - inc) - eye))
    return float(max(r1, r2))


def check_umip(ops, i, j, zs=None):
    """Unitary sandwich residual ``P_i zW(1-zW)^{-1} P_i - psi_ij(z) P_i``
    with W = U_i^* U_j."""
    ps = ops.space
    if ps.side != "multiplicative":
        raise OperatorModelError("need a multiplicative chain")
    if zs is None:
        rng = np.random.default_rng(23)
        zs = 0.8 * np.sqrt(rng.random(8)) * np.exp(2j * np.pi * rng.random(8))
    N = ps.dim
    eye = np.eye(N)
    W = ops.U[i].conj().T @ ops.U[j]
    eta = chain_transition(ps, i, j)
    dev = 0.0
    for z in np.atleast_1d(zs):
        lhs = ops.P[i] @ np.linalg.solve(eye - z * W, z * W) @ ops.P[i]
        ev = complex(eta(np.asarray(z)))
        rhs = ev / (1 - ev) * ops.P[i]
        dev = max(dev, float(np.max(np.abs(lhs - rhs))))
    return dev


def check_equivalence(ops_a, ops_b, shared_times, zs=None):
    """Equal mixed vacuum moments of resolvent test functions at shared
    times for two chains with identical transition families."""
    if zs is None:
        zs = [2.1j, 1 + 1.5j]
    worst = 0.0
    ia = [int(np.where(ops_a.times == t)[0][0]) for t in shared_times]
    ib = [int(np.where(ops_b.times == t)[0][0]) for t in shared_times]
    pairs_a = [(ia[u], ia[v]) for u in range(len(ia))
               for v in range(u + 1, len(ia))]
    pairs_b = [(ib[u], ib[v]) for u in range(len(ib))
               for v in range(u + 1, len(ib))]
    for z in zs:
        f = _resolvent_difference(z)
        for order in ([0], [0, 1] if len(pairs_a) > 1 else [0]):
            Aa = np.eye(ops_a.space.dim)
            Ab = np.eye(ops_b.space.dim)
            for k in order:
                Aa = Aa @ _matrix_function(
                    ops_a.X[pairs_a[k][1]] - ops_a.X[pairs_a[k][0]], f)
                Ab = Ab @ _matrix_function(
                    ops_b.X[pairs_b[k][1]] - ops_b.X[pairs_b[k][0]], f)
            worst = max(worst, abs(vacuum_state(ops_a, Aa)
                                   - vacuum_state(ops_b, Ab)))
    return worst
