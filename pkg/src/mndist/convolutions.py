r"""The ten convolutions, computed at the transform level.

Additive, on R (F-transforms):

* monotone      ``F_{a |> b} = F_a o F_b``
* anti-monotone ``F_{a <| b} = F_b o F_a``
* Boolean       ``B_{a (+) b} = B_a + B_b``  with ``B = z - F``
* free          ``phi_{a ++ b} = phi_a + phi_b`` via subordination
* classical     direct convolution of the representations

Multiplicative, on the circle (eta-transforms):

* monotone      ``eta_{a (>) b} = eta_a o eta_b``
* Boolean       ``h_{a x b} = h_a h_b``      with ``h = eta / z``
* free          ``Sigma_{a [x] b} = Sigma_a Sigma_b``
* classical     ``m_n(a (*) b) = m_n(a) m_n(b)``

Results are transform-first: composition is exact while inversion is lossy,
so materialization is explicit and lazy.
"""

import warnings

import numpy as np

from . import measures as ms
from . import transforms as tr
from ._util import quad_real


class IterationDivergedError(tr.TransformError):
    """Subordination fixed point failed to converge (flags a bug)."""


class ConvolutionResult:
    """Transform of a convolution with optional lazy materialization."""

    def __init__(self, transform, op_tag, side):
        self.transform = transform
        self.op_tag = op_tag
        self.side = side
        self.materialized = None

    def __call__(self, z):
        return self.transform(z)

    def materialize(self, **kwargs):
        """Invert the transform into a measure (cached)."""
        if self.materialized is None:
            if self.side == "R":
                F = self.transform

                def g(z):
                    return 1.0 / F(z)

                self.materialized = tr.stieltjes_invert(g, **kwargs)
            else:
                eta = self.transform

                def psi(z):
                    e = eta(z)
                    return e / (1 - e)

                self.materialized = tr.herglotz_invert(psi, **kwargs)
        return self.materialized

    def consistency(self, n=40, seed=5):
        """Max distance between the transform and the re-transform of the
        materialized measure on a sample grid."""
        if self.materialized is None:
            raise tr.TransformError("nothing materialized yet")
        rng = np.random.default_rng(seed)
        if self.side == "R":
            z = rng.uniform(-4, 4, n) + 1j * rng.uniform(0.5, 4, n)
            back = tr.f_transform(self.materialized)
        else:
            z = 0.7 * np.sqrt(rng.random(n)) * np.exp(2j * np.pi * rng.random(n))
            back = tr.eta_transform(self.materialized)
        return float(np.max(np.abs(self.transform(z) - back(z))))


# ---------------------------------------------------------------------------
# additive convolutions
# ---------------------------------------------------------------------------

def monotone_add(a, b):
    """a |> b, the additive monotone convolution (F-composition)."""
    fa, fb = tr.as_F(a), tr.as_F(b)
    return ConvolutionResult(fa.compose(fb), "monotone", "R")


def antimonotone_add(a, b):
    fa, fb = tr.as_F(a), tr.as_F(b)
    return ConvolutionResult(fb.compose(fa), "antimonotone", "R")


def boolean_add(a, b):
    fa, fb = tr.as_F(a), tr.as_F(b)

    def fn(z):
        return fa(z) + fb(z) - z  # z - (B_a + B_b)

    tree = None
    if fa.tree is not None and fb.tree is not None:
        tree = {"op": "boolean_add", "a": fa.tree, "b": fb.tree}
    return ConvolutionResult(tr.AnalyticMap(fn, "H", "F", tree),
                             "boolean", "R")


def _subordination_fixed_point(fa, fb, z, tol=1e-12, maxit=2000):
    """omega_2 solving w = z + h_a(z + h_b(w)), h = F - id."""
    z = np.asarray(z, dtype=complex)
    w = z.copy()
    for _ in range(maxit):
        w1 = z + fb(w) - w
        w_new = z + fa(w1) - w1
        delta = np.max(np.abs(w_new - w) / (1.0 + np.abs(w_new)))
        w = w_new
        if delta < tol:
            return w
    raise IterationDivergedError(
        f"subordination iteration stalled at delta={delta:.2e}")


def free_add(a, b):
    r"""a ++ b, the free additive convolution via subordination.

    ``F(z) = F_a(omega_1(z))`` where the subordination pair solves the
    fixed-point system; convergence follows from the Denjoy-Wolff property
    of the iteration map.  Use :func:`check_phi_additivity` for the
    Voiculescu-transform residual.
    """
    fa, fb = tr.as_F(a), tr.as_F(b)

    def fn(z):
        w2 = _subordination_fixed_point(fa, fb, z)
        w1 = np.asarray(z, dtype=complex) + fb(w2) - w2
        return fa(w1)

    return ConvolutionResult(tr.AnalyticMap(fn, "H", "F"), "free", "R")


def check_phi_additivity(result, a, b, cone=None, n=5):
    """Max |phi_{a++b} - phi_a - phi_b| on cone sample points."""
    cone = cone or tr.ConeDomain(0.8, 4.0)
    zs = cone.sample(n)
    phi_ab = tr.voiculescu_phi(result.transform, zs)
    phi_a = tr.voiculescu_phi(tr.as_F(a), zs)
    phi_b = tr.voiculescu_phi(tr.as_F(b), zs)
    return float(np.max(np.abs(phi_ab - phi_a - phi_b)))


def classical_add(a, b, n_grid=2049):
    """a * b, the classical convolution, materialized directly."""
    atoms = []
    for xa, wa in zip(a.atom_locs, a.atom_weights):
        for xb, wb in zip(b.atom_locs, b.atom_weights):
            atoms.append((xa + xb, wa * wb))
    # merge coincident atom sums
    atoms.sort()
    merged = []
    for x, w in atoms:
        if merged and abs(x - merged[-1][0]) < 1e-13:
            merged[-1] = (merged[-1][0], merged[-1][1] + w)
        else:
            merged.append((x, w))
    contributions = []  # (weight, segment) pieces of the a.c. part
    for xa, wa in zip(a.atom_locs, a.atom_weights):
        for sb in b.segments:
            contributions.append((wa, sb.shift(xa)))
    for xb, wb in zip(b.atom_locs, b.atom_weights):
        for sa in a.segments:
            contributions.append((wb, sa.shift(xb)))
    dense_pairs = [(sa, sb) for sa in a.segments for sb in b.segments]
    if not contributions and not dense_pairs:
        return ms.RealMeasure(merged)
    lo = min([s.a for _, s in contributions]
             + [sa.a + sb.a for sa, sb in dense_pairs])
    hi = max([s.b for _, s in contributions]
             + [sa.b + sb.b for sa, sb in dense_pairs])
    grid = np.linspace(lo, hi, n_grid)
    vals = np.zeros(n_grid)
    for w, seg in contributions:
        vals += w * seg.pdf(grid)
    for sa, sb in dense_pairs:
        sa_t = sa if sa.tabulated else sa.as_table()
        sb_t = sb if sb.tabulated else sb.as_table()
        for i, x in enumerate(grid):
            u0, u1 = max(sa_t.a, x - sb_t.b), min(sa_t.b, x - sb_t.a)
            if u1 <= u0:
                continue
            vals[i] += quad_real(
                lambda u, x=x: float(sa_t.pdf(np.asarray(u)))
                * float(sb_t.pdf(np.asarray(x - u))),
                u0, u1, epsabs=1e-10)
    seg = ms.Segment(lo, hi, grid=grid, values=np.clip(vals, 0, None))
    return ms.RealMeasure(merged, [seg], renormalize=True)


# ---------------------------------------------------------------------------
# multiplicative convolutions
# ---------------------------------------------------------------------------

def _haar_result(op_tag):
    zero = tr.AnalyticMap(lambda z: np.zeros_like(np.asarray(z, complex)),
                          "D", "eta", tree={"op": "affine", "a": 0.0,
                                            "b": 0.0, "domain": "D",
                                            "kind": "eta"})
    res = ConvolutionResult(zero, op_tag, "T")
    res.materialized = ms.haar()
    return res


def _input_is_haar(x):
    return isinstance(x, ms.CircleMeasure) and ms.is_haar(x)


def monotone_mult(a, b):
    """a (>) b on the circle: eta-composition.  Haar is absorbing."""
    ea, eb = tr.as_eta(a), tr.as_eta(b)
    return ConvolutionResult(ea.compose(eb), "monotone", "T")


def antimonotone_mult(a, b):
    ea, eb = tr.as_eta(a), tr.as_eta(b)
    return ConvolutionResult(eb.compose(ea), "antimonotone", "T")


def boolean_mult(a, b):
    """a (x) b: h-transforms multiply, eta = z h_a h_b."""
    ha = tr.h_transform(a) if isinstance(a, ms.CircleMeasure) else a
    hb = tr.h_transform(b) if isinstance(b, ms.CircleMeasure) else b

    def fn(z):
        z = np.asarray(z, dtype=complex)
        return z * ha(z) * hb(z)

    tree = None
    if ha.tree is not None and hb.tree is not None:
        tree = {"op": "boolean_mult", "a": ha.tree, "b": hb.tree}
    return ConvolutionResult(tr.AnalyticMap(fn, "D", "eta", tree),
                             "boolean", "T")


def free_mult(a, b, r_step=0.05):
    r"""a [x] b via the Sigma-transform product.

    Solves ``eta_a^{-1}(w) eta_b^{-1}(w) / w = z`` for ``w = eta(z)`` by
    Newton with analytic continuation along the radial path to z; each
    solve is residual-certified.  Haar inputs short-circuit to Haar; zero
    means otherwise raise :class:`~mndist.transforms.ZeroMeanError`.
    """
    if _input_is_haar(a) or _input_is_haar(b):
        return _haar_result("free")
    for m in (a, b):
        if isinstance(m, ms.CircleMeasure) and abs(m.moment(1)) < 1e-9:
            raise tr.ZeroMeanError("free multiplicative convolution needs "
                                   "non-zero means")
    ea, eb = tr.as_eta(a), tr.as_eta(b)
    m1a = complex(ea(np.asarray(1e-7 + 0j))) / 1e-7
    m1b = complex(eb(np.asarray(1e-7 + 0j))) / 1e-7

    def eta_fn(z):
        z = np.asarray(z, dtype=complex)
        flat = np.atleast_1d(z).ravel()
        out = np.empty(flat.shape, dtype=complex)
        for i, zt in enumerate(flat):
            out[i] = _free_mult_point(ea, eb, m1a, m1b, zt, r_step)
        return out.reshape(z.shape)

    return ConvolutionResult(tr.AnalyticMap(eta_fn, "D", "eta"), "free", "T")


def _free_mult_point(ea, eb, m1a, m1b, z, r_step):
    if z == 0:
        return 0j
    rz, phase = abs(z), z / abs(z)
    nsteps = max(4, int(np.ceil(rz / r_step)))
    radii = rz * np.linspace(1.0 / nsteps, 1.0, nsteps)
    w = m1a * m1b * radii[0] * phase  # first-order seed
    u, v = w / m1a, w / m1b

    def q(wv, u0, v0):
        uu = tr.newton_inverse(lambda s: ea(np.asarray(s)), wv, u0, tol=1e-13)
        vv = tr.newton_inverse(lambda s: eb(np.asarray(s)), wv, v0, tol=1e-13)
        return uu * vv / wv, uu, vv

    for r in radii:
        target = r * phase
        for _ in range(60):
            val, u, v = q(w, u, v)
            res = val - target
            if abs(res) < 1e-12:
                break
            h = 1e-6 * (1 + abs(w))
            dval = (q(w + h, u, v)[0] - q(w - h, u, v)[0]) / (2 * h)
            step = res / dval
            # keep the continuation inside the disk
            while abs(w - step) >= 1.0:
                step *= 0.5
            w = w - step
        else:
            raise tr.NoConvergenceError(
                f"Sigma-product continuation failed at r={r:.3f}")
    val, _, _ = q(w, u, v)
    if abs(val - z) > 1e-10:
        raise tr.NoConvergenceError("free_mult residual too large")
    return w


def classical_mult(a, b, degree=64, tail_tol=1e-8):
    """a (*) b on the circle via moment products m_n -> m_n(a) m_n(b).

    Purely atomic inputs are convolved exactly by angle addition; otherwise
    the product moment sequence through ``degree`` is reconstructed by
    Herglotz inversion, with a warning if the truncated tail is not
    negligible.
    """
    if _input_is_haar(a) or _input_is_haar(b):
        return ms.haar()
    if (not a.has_density()) and (not b.has_density()):
        pairs = {}
        for ta, wa in zip(a.atom_angles, a.atom_weights):
            for tb, wb in zip(b.atom_angles, b.atom_weights):
                th = round((ta + tb) % (2 * np.pi), 13)
                pairs[th] = pairs.get(th, 0.0) + wa * wb
        return ms.CircleMeasure(sorted(pairs.items()))
    prod = np.array([complex(a.moment(n)) * complex(b.moment(n))
                     for n in range(degree + 1)])
    if abs(prod[degree]) > tail_tol:
        warnings.warn("classical_mult: truncated moment tail is "
                      f"{abs(prod[degree]):.2e}; increase degree",
                      RuntimeWarning)

    def psi(z):
        z = np.asarray(z, dtype=complex)
        val = np.zeros(z.shape, dtype=complex)
        for n in range(degree, 0, -1):
            val = val * z + prod[n]
        return val * z

    return tr.herglotz_invert(psi, mass_tol=1e-2)
