r"""Herglotz vector fields, Loewner flows, and monotone cumulants.

A generating pair ``(gamma, rho)`` (drift + finite non-negative measure)
encodes the vector field of a monotone convolution semigroup:

* additive:        ``-A(z) = gamma + int (1+zx)/(z-x) rho(dx)`` on H,
  with flow ``dF_t/dt = A(F_t)``, ``F_0 = id``;
* multiplicative:  ``B(z) = i alpha - int (1+z zeta)/(1-z zeta) rho(dzeta)``
  on D, with flow ``d eta_t/dt = eta_t B(eta_t)``, ``eta_0 = id``.

Flows are integrated with an embedded Dormand-Prince 5(4) pair whose step
control rejects any step leaving the half-plane/disk.  Time-dependent
fields integrate the transition equation
``d/ds f_st(z) = -M(f_st(z), s)``, ``f_tt = id``.

Monotone cumulants ``r_n`` are the coefficients of the field,
``-A(z) = sum_n r_n z^{1-n}``; they are computed by matching the formal
z-expansion of the flow at t = 1 against the moment series, degree by
degree, in exact rational arithmetic whenever the input moments are
rational.
"""

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import measures as ms
from . import transforms as tr


class FlowError(RuntimeError):
    pass


class StepUnderflowError(FlowError):
    """Adaptive step shrank below the floor near a boundary singularity."""


# ---------------------------------------------------------------------------
# generating pairs and fields
# ---------------------------------------------------------------------------

class GeneratingPairAdd:
    """Drift gamma and finite non-negative measure rho on R."""

    def __init__(self, gamma, rho):
        self.gamma = float(gamma)
        if isinstance(rho, (int, float)) and rho == 0:
            rho = ms.RealMeasure([], [], require_probability=False)
        self.rho = rho
        self._mass = rho.total_mass()
        if self._mass < -1e-14:
            raise ValueError("rho must be non-negative")

    def vector_field(self, z):
        """A(z); equals int (1+u^2)/(u-z) rho(du) - (gamma + int u rho)."""
        z = np.asarray(z, dtype=complex)
        return (-self.gamma + z * self._mass
                - (1 + z * z) * self.rho.cauchy(z)) \
            if self._mass else np.full(z.shape, -self.gamma, dtype=complex)

    def r1(self):
        """First cumulant gamma + int u rho(du) (the mean rate)."""
        return self.gamma + (self.rho.moment(1) if self._mass else 0.0)


class GeneratingPairMult:
    """Rotation rate alpha and finite non-negative measure rho on T."""

    def __init__(self, alpha, rho):
        self.alpha = float(alpha)
        if isinstance(rho, (int, float)) and rho == 0:
            rho = ms.CircleMeasure([], require_probability=False)
        self.rho = rho
        self._mass = rho.total_mass()

    def vector_field(self, z):
        """B(z) = i alpha - int (1+z zeta)/(1-z zeta) rho(dzeta)."""
        z = np.asarray(z, dtype=complex)
        val = np.full(z.shape, 1j * self.alpha, dtype=complex)
        for th, w in zip(self.rho.atom_angles, self.rho.atom_weights):
            zeta = np.exp(1j * th)
            val = val - w * (1 + z * zeta) / (1 - z * zeta)
        if self.rho.has_density():
            r = float(np.max(np.abs(z))) if np.size(z) else 0.0
            n = max(32, int(np.ceil(np.log(1e-16) / np.log(max(r, 1e-6)))))
            n = min(n, 100000)
            dens_mass = self._mass - float(self.rho.atom_weights.sum())
            mom = self.rho._density_moments(n)
            acc = np.zeros(z.shape, dtype=complex)
            for k in range(n, 0, -1):
                acc = acc * z + mom[k]
            val = val - dens_mass - 2 * acc * z
        return val


@dataclass
class HerglotzField:
    """Evaluable field M(z, t); autonomous or piecewise-constant in t."""

    eval: callable
    side: str = "H"  # 'H' additive, 'D' multiplicative
    breaks: tuple = ()
    time_dependent: bool = False

    @staticmethod
    def from_pair(pair):
        if isinstance(pair, GeneratingPairAdd):
            return HerglotzField(lambda z, t: pair.vector_field(z), "H")
        z_times_b = lambda z, t: z * pair.vector_field(z)
        return HerglotzField(z_times_b, "D")

    @staticmethod
    def from_schedule(schedule, side="H"):
        """Piecewise-constant field from [(t_k, pair_k)] with t_0 = 0."""
        times = [float(t) for t, _ in schedule]
        pairs = [p for _, p in schedule]
        if times[0] != 0.0:
            raise ValueError("schedule must start at t = 0")
        fields = [HerglotzField.from_pair(p).eval for p in pairs]

        def fn(z, t):
            k = int(np.searchsorted(times, t, side="right") - 1)
            k = min(max(k, 0), len(fields) - 1)
            return fields[k](z, t)

        return HerglotzField(fn, side, breaks=tuple(times[1:]),
                             time_dependent=True)

    @staticmethod
    def from_callable(fn, side="H", check=True, seed=0):
        fld = HerglotzField(fn, side, time_dependent=True)
        if check:
            rng = np.random.default_rng(seed)
            ts = rng.uniform(0, 1, 8)
            if side == "H":
                zs = rng.uniform(-3, 3, 8) + 1j * rng.uniform(0.1, 3, 8)
                for t in ts:
                    if np.min(np.asarray(fn(zs, t)).imag) < -1e-9:
                        raise ValueError("Im M(z,t) < 0: not Herglotz")
            else:
                zs = 0.9 * np.sqrt(rng.random(8)) * np.exp(2j * np.pi * rng.random(8))
                for t in ts:
                    vals = np.asarray(fn(zs, t))
                    if np.max((vals / (-zs)).real) < -1e-9:
                        pass  # Re p >= 0 check below
                    p = vals / (-zs)
                    if np.min(p.real) < -1e-9:
                        raise ValueError("field is not of -z p(z) form")
        return fld


# ---------------------------------------------------------------------------
# embedded Runge-Kutta 5(4), domain guarded
# ---------------------------------------------------------------------------

_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784,
                   11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
                   -92097 / 339200, 187 / 2100, 1 / 40])


def rk45(f, y0, t0, t1, rtol=1e-11, atol=1e-11, guard=None,
         min_step_frac=1e-12):
    """Dormand-Prince 5(4) for complex vector ODEs with a domain guard.

    Steps whose error exceeds tolerance *or* whose endpoint violates
    ``guard`` are rejected and retried with a smaller step.  Raises
    :class:`StepUnderflowError` when the step collapses.
    """
    y = np.atleast_1d(np.asarray(y0, dtype=complex)).copy()
    t = float(t0)
    span = t1 - t0
    if span == 0:
        return y.reshape(np.shape(y0))
    direction = 1.0 if span > 0 else -1.0
    h = span / 64.0
    min_step = abs(span) * min_step_frac
    while (t1 - t) * direction > 0:
        if abs(h) > abs(t1 - t):
            h = t1 - t
        k = [np.asarray(f(t, y), dtype=complex)]
        for i in range(1, 7):
            yi = y + h * sum(a * k[j] for j, a in enumerate(_DP_A[i]))
            k.append(np.asarray(f(t + _DP_C[i] * h, yi), dtype=complex))
        y5 = y + h * sum(b * ki for b, ki in zip(_DP_B5, k))
        y4 = y + h * sum(b * ki for b, ki in zip(_DP_B4, k))
        err = np.max(np.abs(y5 - y4) / (atol + rtol * np.abs(y5)))
        ok = err <= 1.0 and np.all(np.isfinite(y5))
        if ok and guard is not None:
            ok = bool(np.all(guard(y5)))
        if ok:
            t += h
            y = y5
            factor = 4.0 if err == 0 else min(4.0, 0.9 * err ** -0.2)
            h *= max(0.2, factor)
        else:
            h *= 0.25
            if abs(h) < min_step:
                raise StepUnderflowError(
                    f"step underflow at t={t:.6g} (boundary singularity?)")
    return y.reshape(np.shape(y0)) if np.shape(y0) else y[0]


# ---------------------------------------------------------------------------
# semigroup flows and transitions
# ---------------------------------------------------------------------------

def evolve_additive(pair, t, z, rtol=1e-11, atol=1e-11):
    """F_t(z) for the additive semigroup generated by ``pair``."""
    if t < 0:
        raise ValueError("need t >= 0")
    z = np.asarray(z, dtype=complex)
    if t == 0:
        return z.copy()

    def f(_, y):
        return pair.vector_field(y)

    return rk45(f, z, 0.0, t, rtol, atol, guard=lambda y: y.imag > 0)


def flow_map_additive(pair, t, rtol=1e-11, atol=1e-11):
    return tr.AnalyticMap(lambda z: evolve_additive(pair, t, z, rtol, atol),
                          "H", "F")


def evolve_mult(pair, t, z, rtol=1e-11, atol=1e-11):
    """eta_t(z) for the multiplicative semigroup generated by ``pair``."""
    if t < 0:
        raise ValueError("need t >= 0")
    z = np.asarray(z, dtype=complex)
    if t == 0:
        return z.copy()

    def f(_, y):
        return y * pair.vector_field(y)

    return rk45(f, z, 0.0, t, rtol, atol, guard=lambda y: np.abs(y) < 1.0)


def flow_map_mult(pair, t, rtol=1e-11, atol=1e-11):
    return tr.AnalyticMap(lambda z: evolve_mult(pair, t, z, rtol, atol),
                          "D", "eta")


def loewner_transition(fld, s, t, z, rtol=1e-11, atol=1e-11):
    """Transition map f_st(z) of the chain generated by field ``fld``.

    Integrates d/du f(u) = -M(f(u), u) from u = t down to u = s (splitting
    at the field's breakpoints), so that f_su = f_st o f_tu holds.
    """
    if s > t:
        raise ValueError("need s <= t")
    z = np.asarray(z, dtype=complex)
    if s == t:
        return z.copy()
    guard = (lambda y: y.imag > 0) if fld.side == "H" \
        else (lambda y: np.abs(y) < 1.0)
    stops = sorted([b for b in fld.breaks if s < b < t], reverse=True)
    y = z
    u_hi = t
    for u_lo in stops + [s]:
        # clamp stage times strictly inside the segment so piecewise
        # fields never sample the neighbouring piece at a breakpoint
        eps = 1e-12 * max(1.0, abs(u_hi - u_lo))

        def f(u, yv, lo=u_lo, hi=u_hi, eps=eps):
            uu = min(max(u, lo + eps), hi - eps)
            return -np.asarray(fld.eval(yv, uu))

        y = rk45(f, y, u_hi, u_lo, rtol, atol, guard=guard)
        u_hi = u_lo
    return y


def transition_map(fld, s, t, **kw):
    kind = "F" if fld.side == "H" else "eta"
    return tr.AnalyticMap(lambda z: loewner_transition(fld, s, t, z, **kw),
                          fld.side, kind)


def variance_via_F(f, y0=16.0, n=7):
    """Variance from F(iy) = iy - m1 + (m1^2 - m2)/(iy) + ... asymptotics."""
    ys = y0 * 2.0 ** np.arange(n)
    m1 = tr.first_moment_via_F(f)
    vals = np.array([(complex(f(np.asarray(1j * y))) - 1j * y + m1) * (1j * y)
                     for y in ys])
    from ._util import richardson
    return -float(richardson(vals).real)


# ---------------------------------------------------------------------------
# exact polynomial/series helpers (coefficients: Fraction or float)
# ---------------------------------------------------------------------------

def _padd(p, q):
    n = max(len(p), len(q))
    return [(p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0)
            for i in range(n)]


def _pscale(p, c):
    return [c * a for a in p]


def _pmul(p, q):
    out = [0] * (len(p) + len(q) - 1) if p and q else []
    for i, a in enumerate(p):
        if a == 0:
            continue
        for j, b in enumerate(q):
            out[i + j] += a * b
    return out


def _pint(p, exact):
    """Antiderivative with zero constant term."""
    one = Fraction(1) if exact else 1.0
    return [0 * one] + [a * one / (i + 1) for i, a in enumerate(p)]


def _peval1(p):
    return sum(p) if p else 0


def _series_mul(A, B, K):
    """Truncated product of z^{-i}-series with poly coefficients."""
    out = [[] for _ in range(K + 1)]
    for i, a in enumerate(A):
        if not a:
            continue
        for j, b in enumerate(B):
            if i + j > K or not b:
                continue
            out[i + j] = _padd(out[i + j], _pmul(a, b))
    return out


def _f_inverse_series(c_polys, K):
    """Series of 1/F up to z^{-K}: F = z (1 + u), u_i = c_{i-1} z^{-i}.

    Returns S with S[i] = [z^{-i}] (1/F); S[0] = 0, S[1] = 1.
    """
    one = [1]  # ints promote cleanly to both Fraction and float coefficients
    u = [[] for _ in range(K + 1)]
    for j, c in enumerate(c_polys):
        if j + 1 <= K:
            u[j + 1] = list(c)
    # geometric series sum (-u)^m, truncated
    acc = [[] for _ in range(K + 1)]
    acc[0] = list(one)
    term = [[] for _ in range(K + 1)]
    term[0] = list(one)
    for _ in range(K):
        term = _series_mul(term, [_pscale(ui, -1) for ui in u], K)
        if not any(term):
            break
        acc = [_padd(a, t) for a, t in zip(acc, term)]
    # multiply by z^{-1}
    out = [[] for _ in range(K + 1)]
    for i in range(K):
        out[i + 1] = acc[i]
    return out


# ---------------------------------------------------------------------------
# monotone cumulants
# ---------------------------------------------------------------------------

@dataclass
class CumulantSeq:
    """Monotone cumulant sequence r_1..r_N (Fractions when exact)."""

    r: list

    def __len__(self):
        return len(self.r)

    def __getitem__(self, i):
        return self.r[i]

    def as_floats(self):
        return [float(x) for x in self.r]


def _moments_to_fseries(moments, exact):
    """F-series target coefficients d_0..d_{N-1} from moments m_1..m_N."""
    one = Fraction(1) if exact else 1.0
    m = [one] + [x * one for x in moments]
    d = []
    for p in range(1, len(m)):
        val = -m[p]
        for k in range(p - 1):
            val -= d[k] * m[p - 1 - k]
        d.append(val)
    return d


def _fseries_to_moments(dvals, exact):
    """Moments m_1..m_N from F-series coefficients d_0..d_{N-1}."""
    one = Fraction(1) if exact else 1.0
    N = len(dvals)
    m = [one]
    for p in range(1, N + 1):
        val = -dvals[p - 1] * one
        for k in range(p - 1):
            val -= dvals[k] * m[p - 1 - k]
        m.append(val)
    return m[1:]


def _flow_rhs_series(r_known, c_polys, k, exact):
    """[z^{-k}] of A(F_t) given cumulants r_2..r_k and c_0..c_{k-1}.

    A(F) = -sum_n r_n F^{1-n}; the unknown r_{k+1} enters with coefficient
    -1 and is excluded here.
    """
    if k == 0:
        return []
    inv = _f_inverse_series(c_polys[:k], k)
    powm = inv
    rhs = []
    for n in range(2, k + 1):  # F^{-(n-1)} term; r_n known
        coeff = powm[k]
        if coeff:
            rhs = _padd(rhs, _pscale(coeff, -r_known[n - 1]))
        powm = _series_mul(powm, inv, k)
    return rhs


def monotone_cumulants(moments, N=None):
    r"""Monotone cumulants r_1..r_N from moments m_1..m_N.

    Solves the formal flow ``dF_t/dt = A(F_t)`` in truncated series
    ``z + sum c_k(t) z^{-k}`` with polynomial-in-t coefficients, matching
    ``F_1`` against the moment series.  Exact rational arithmetic is used
    when all moments are Fractions/ints; moment sequences need not be
    positive definite.
    """
    moments = list(moments)
    if N is not None:
        moments = moments[:N]
    exact = all(isinstance(x, (int, Fraction)) and not isinstance(x, bool)
                for x in moments)
    conv = (lambda x: Fraction(x)) if exact else float
    moments = [conv(x) for x in moments]
    d = _moments_to_fseries(moments, exact)
    r = []
    c_polys = []
    for k in range(len(moments)):
        rhs = _flow_rhs_series(r, c_polys, k, exact)
        q = _pint(rhs, exact)
        r_next = _peval1(q) - d[k]
        r.append(r_next)
        c_k = _padd(q, [0 * conv(1), -r_next])  # -r_{k+1} t + int rhs
        c_polys.append(c_k)
    return CumulantSeq(r)


def cumulants_to_moments(r_list):
    """Brute-force series oracle: moments of the time-1 flow of the field
    with cumulants ``r_list``."""
    r_list = list(r_list)
    exact = all(isinstance(x, (int, Fraction)) and not isinstance(x, bool)
                for x in r_list)
    conv = (lambda x: Fraction(x)) if exact else float
    r_list = [conv(x) for x in r_list]
    c_polys = []
    dvals = []
    for k in range(len(r_list)):
        rhs = _flow_rhs_series(r_list, c_polys, k, exact)
        q = _pint(rhs, exact)
        c_k = _padd(q, [0 * conv(1), -r_list[k]])
        c_polys.append(c_k)
        dvals.append(_peval1(c_k))
    return _fseries_to_moments(dvals, exact)


def _det_fraction(mat):
    """Exact determinant by fraction-free-ish Gaussian elimination."""
    n = len(mat)
    a = [row[:] for row in mat]
    det = Fraction(1) if isinstance(a[0][0], Fraction) else 1.0
    for col in range(n):
        piv = None
        for row in range(col, n):
            if a[row][col] != 0:
                piv = row
                break
        if piv is None:
            return 0 * det
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        det *= a[col][col]
        inv = a[col][col]
        for row in range(col + 1, n):
            f = a[row][col] / inv
            for j in range(col, n):
                a[row][j] -= f * a[col][j]
    return det


@dataclass
class IDTestReport:
    verdict: str  # 'NOT_ID' or 'INCONCLUSIVE'
    determinants: dict = field(default_factory=dict)

    def __repr__(self):
        dets = {k: (str(v) if isinstance(v, Fraction) else v)
                for k, v in self.determinants.items()}
        return f"IDTestReport({self.verdict}, dets={dets})"


def monotone_id_test(cumulants, tol=1e-12):
    r"""Conditional-positive-definiteness witness for |>-infinite divisibility.

    Computes ``det {r_{i+j}}_{i,j=1..k}`` for every feasible k; a negative
    determinant certifies NOT-ID (exactly, in rational arithmetic, when the
    cumulants are exact).  Non-negative minors are INCONCLUSIVE: the full
    criterion needs all orders.
    """
    r = cumulants.r if isinstance(cumulants, CumulantSeq) else list(cumulants)
    if len(r) < 4:
        raise ValueError("need at least 4 cumulants")
    dets = {}
    verdict = "INCONCLUSIVE"
    exact = all(isinstance(x, (int, Fraction)) and not isinstance(x, bool)
                for x in r)
    for k in range(1, len(r) // 2 + 1):
        mat = [[(Fraction(r[i + j + 1]) if exact else float(r[i + j + 1]))
                for j in range(k)] for i in range(k)]
        # r_{i+j} with i,j = 1..k  ->  index i+j-1 in the 0-based list
        det = _det_fraction(mat)
        dets[k] = det
        neg = det < 0 if exact else det < -tol
        if neg:
            verdict = "NOT_ID"
    return IDTestReport(verdict, dets)


@dataclass
class TruncatedPairData:
    """Moment data of the generating pair recovered from cumulants.

    ``r1 = gamma + int x rho(dx)`` and ``tau_moments[k] = int x^k (1+x^2)
    rho(dx) = r_{k+2}``.
    """

    r1: object
    tau_moments: list


def pair_from_cumulants(cumulants):
    r = cumulants.r if isinstance(cumulants, CumulantSeq) else list(cumulants)
    if len(r) < 2:
        raise ValueError("need at least r_1, r_2")
    return TruncatedPairData(r1=r[0], tau_moments=list(r[1:]))
