r"""The analytic transform stack and the inversion formulas.

For a measure :math:`\mu` on R the chain is

.. math:: G_\mu(z) = \int \frac{\mu(dx)}{z-x}, \qquad F_\mu = 1/G_\mu,
          \qquad B_\mu = z - F_\mu, \qquad \varphi_\mu = F_\mu^{-1}(z) - z,

and on the circle

.. math:: \psi_\mu(z) = \int \frac{xz}{1-xz}\,\mu(dx), \qquad
          \eta_\mu = \frac{\psi_\mu}{1+\psi_\mu}, \qquad
          h_\mu = \eta_\mu / z, \qquad \Sigma_\mu = \eta_\mu^{-1}(z)/z.

Boundary values are recovered by Stieltjes/Herglotz inversion on a
geometric epsilon-ladder with Richardson extrapolation; atoms are located
on the ladder and their masses extrapolated the same way.
"""

import numpy as np
from scipy import optimize

from . import measures as ms
from ._util import (DEFAULT_EPS_LADDER, power_poscut, quad_complex,
                    richardson, sqrt_poscut)


class TransformError(ValueError):
    pass


class NotCauchyTransformError(TransformError):
    """The supplied map fails the iy*g(iy) -> 1 normalization."""


class NormalizationError(TransformError):
    """psi(0) != 0 or Re(psi) < -1/2 on samples."""


class MassDefectError(TransformError):
    """Inversion recovered too little mass to renormalize honestly."""


class NoConvergenceError(TransformError):
    """Newton / fixed-point iteration did not converge."""


class ZeroMeanError(TransformError):
    """Sigma-transform of a circle measure with vanishing mean."""


# ---------------------------------------------------------------------------
# evaluable analytic maps
# ---------------------------------------------------------------------------

class AnalyticMap:
    """Evaluable analytic map with domain and normalization tags.

    ``domain`` is 'H' (upper half-plane) or 'D' (unit disk); ``kind`` tags
    the normalization: 'F', 'G', 'B' on H and 'eta', 'psi', 'h' on D, or
    'generic'.  ``tree`` is an optional serializable expression tree.
    """

    def __init__(self, fn, domain, kind="generic", tree=None):
        self._fn = fn
        self.domain = domain
        self.kind = kind
        self.tree = tree

    def __call__(self, z):
        return self._fn(np.asarray(z, dtype=complex))

    def compose(self, other):
        """self after other (z -> self(other(z)))."""
        if self.domain != other.domain:
            raise TransformError("domain mismatch in composition")
        kind = self.kind if self.kind == other.kind else "generic"
        tree = None
        if self.tree is not None and other.tree is not None:
            tree = {"op": "compose", "outer": self.tree, "inner": other.tree}
        return AnalyticMap(lambda z: self._fn(other._fn(z)), self.domain,
                           kind, tree)

    # -- tag invariants, sampled ------------------------------------------

    def check_f_tag(self, n=200, tol=1e-9, seed=7):
        """Im F(z) >= Im z on random samples of H."""
        rng = np.random.default_rng(seed)
        z = rng.uniform(-10, 10, n) + 1j * rng.uniform(0.05, 20, n)
        w = self(z)
        return float(np.min(w.imag - z.imag)) >= -tol

    def check_eta_tag(self, n=200, tol=1e-9, seed=7):
        """|eta(z)| <= |z| on random samples of D, eta(0) = 0."""
        rng = np.random.default_rng(seed)
        r = np.sqrt(rng.uniform(0.0004, 0.96, n))
        z = r * np.exp(2j * np.pi * rng.uniform(size=n))
        if abs(complex(self(np.asarray(1e-14 + 0j))) ) > 1e-10:
            return False
        return float(np.max(np.abs(self(z)) - np.abs(z))) <= tol


class ConeDomain:
    """Truncated cone Gamma_{lambda, M} inside the upper half-plane."""

    def __init__(self, lam, M):
        if lam <= 0 or M <= 0:
            raise TransformError("need lambda, M > 0")
        self.lam = float(lam)
        self.M = float(M)

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        return (z.imag > self.M) & (np.abs(z.real) < self.lam * z.imag)

    def sample(self, n=10, seed=3):
        rng = np.random.default_rng(seed)
        y = self.M * (1.2 + 4 * rng.random(n))
        x = self.lam * y * rng.uniform(-0.8, 0.8, n)
        return x + 1j * y


def identity_map(domain="H"):
    return AnalyticMap(lambda z: z, domain, kind="F" if domain == "H" else "eta",
                       tree={"op": "identity", "domain": domain})


# ---------------------------------------------------------------------------
# transforms of measures
# ---------------------------------------------------------------------------

def cauchy_G(m, z, method="auto"):
    """Cauchy transform of a RealMeasure at points z of H."""
    return m.cauchy(z, method=method)


def g_transform(m, method="auto"):
    tree = {"op": "measure_G", "measure": m.to_json_dict()}
    return AnalyticMap(lambda z: m.cauchy(z, method=method), "H", "G", tree)


def f_transform(m, method="auto"):
    """Reciprocal Cauchy transform of a RealMeasure as a tagged map."""
    tree = {"op": "measure_F", "measure": m.to_json_dict()}
    return AnalyticMap(lambda z: 1.0 / m.cauchy(z, method=method), "H", "F",
                       tree)


def psi_transform(m):
    tree = {"op": "measure_psi", "measure": m.to_json_dict()}
    return AnalyticMap(lambda z: m.psi(z), "D", "psi", tree)


def eta_transform(m):
    """eta-transform of a CircleMeasure (eta = psi/(1+psi), eta(0)=0)."""
    tree = {"op": "measure_eta", "measure": m.to_json_dict()}

    def fn(z):
        p = m.psi(z)
        return p / (1 + p)

    return AnalyticMap(fn, "D", "eta", tree)


def boolean_B(m_or_f):
    """B = z - F, the additive Boolean transform."""
    f = m_or_f if isinstance(m_or_f, AnalyticMap) else f_transform(m_or_f)
    tree = None if f.tree is None else {"op": "boolean_B", "inner": f.tree}
    return AnalyticMap(lambda z: z - f(z), "H", "B", tree)


def h_transform(m):
    """h = eta / z, analytic at 0 with h(0) = m_1."""
    m1 = complex(m.moment(1))

    def fn(z):
        z = np.asarray(z, dtype=complex)
        p = m.psi(z)
        out = np.where(np.abs(z) < 1e-9, m1, p / (np.where(z == 0, 1, z) * (1 + p)))
        return out

    tree = {"op": "measure_h", "measure": m.to_json_dict()}
    return AnalyticMap(fn, "D", "h", tree)


# ---------------------------------------------------------------------------
# Newton machinery (inverses)
# ---------------------------------------------------------------------------

def _num_derivative(fn, w, scale=1e-6):
    h = scale * (1.0 + abs(w))
    return (fn(w + h) - fn(w - h)) / (2 * h)


def newton_inverse(fn, target, w0, fprime=None, tol=1e-11, maxit=80):
    """Solve fn(w) = target by damped Newton from w0 (complex scalar)."""
    w = complex(w0)
    fw = complex(fn(w))
    res = abs(fw - target)
    for _ in range(maxit):
        if res < tol:
            return w
        dfw = complex(fprime(w)) if fprime is not None \
            else complex(_num_derivative(fn, w))
        if dfw == 0 or not np.isfinite(dfw):
            break
        step = (fw - target) / dfw
        lam = 1.0
        for _ in range(40):
            w_new = w - lam * step
            fw_new = complex(fn(w_new))
            if np.isfinite(fw_new) and abs(fw_new - target) < res:
                w, fw, res = w_new, fw_new, abs(fw_new - target)
                break
            lam *= 0.5
        else:
            break
    if res < tol:
        return w
    raise NoConvergenceError(f"Newton stalled, residual {res:.2e}")


def voiculescu_phi(m_or_f, z):
    r"""Voiculescu transform :math:`\varphi(z)=F^{-1}(z)-z` by Newton.

    ``z`` should lie in a truncated cone where F is invertible; points where
    the damped Newton iteration cannot reach residual 1e-10 raise
    :class:`NoConvergenceError`.
    """
    if isinstance(m_or_f, AnalyticMap):
        F = m_or_f
        fprime = None
    else:
        mm = m_or_f
        F = f_transform(mm)

        def fprime(w):
            g = mm.cauchy(w)
            return -mm.cauchy_prime(w) / g ** 2

    z = np.asarray(z, dtype=complex)
    flat = np.atleast_1d(z).ravel()
    out = np.empty(flat.shape, dtype=complex)
    for i, zi in enumerate(flat):
        w = newton_inverse(lambda u: F(np.asarray(u)), zi, zi,
                           fprime=fprime, tol=1e-10)
        out[i] = w - zi
    return out.reshape(z.shape) if z.shape else complex(out[0])


def sigma_transform(m, z):
    r"""Sigma-transform :math:`\Sigma(z) = \eta^{-1}(z)/z` near 0.

    Requires a non-zero mean; the inverse is found by Newton with the
    residual check :math:`\eta(z\,\Sigma(z)) = z`.
    """
    m1 = complex(m.moment(1))
    if abs(m1) < 1e-12:
        raise ZeroMeanError("Sigma-transform needs m_1 != 0")
    eta = eta_transform(m)
    z = np.asarray(z, dtype=complex)
    flat = np.atleast_1d(z).ravel()
    out = np.empty(flat.shape, dtype=complex)
    for i, zi in enumerate(flat):
        if zi == 0:
            out[i] = 1.0 / m1
            continue
        u = newton_inverse(lambda w: eta(np.asarray(w)), zi, zi / m1,
                           tol=1e-12)
        if abs(complex(eta(np.asarray(u))) - zi) > 1e-10:
            raise NoConvergenceError("eta inverse residual too large")
        out[i] = u / zi
    return out.reshape(z.shape) if z.shape else complex(out[0])


# ---------------------------------------------------------------------------
# Stieltjes inversion on R
# ---------------------------------------------------------------------------

def _vectorize_map(g):
    if isinstance(g, AnalyticMap):
        return lambda z: g(z)

    def fn(z):
        z = np.asarray(z, dtype=complex)
        try:
            out = np.asarray(g(z), dtype=complex)
            if out.shape == z.shape:
                return out
        except Exception:
            pass
        return np.asarray([g(w) for w in z.ravel()],
                          dtype=complex).reshape(z.shape)

    return fn


def _check_cauchy_normalization(g):
    for y, tol in ((1e2, 0.25), (1e3, 0.1), (1e4, 0.02)):
        val = complex(g(np.asarray(1j * y)))
        if abs(1j * y * val - 1.0) > tol:
            raise NotCauchyTransformError(
                f"iy*g(iy) = {1j * y * val:.4f} at y={y}, not -> 1")


def _estimate_location_scale(g):
    ys = np.array([32.0 * 2 ** k for k in range(6)])
    fvals = np.array([1j * y - 1.0 / complex(g(np.asarray(1j * y)))
                      for y in ys])
    m1 = float(richardson(fvals.real))  # eps = 1/y decreases along the ladder
    gvals = np.array([complex(g(np.asarray(1j * y))) for y in ys])
    s = (gvals * 1j * ys - 1.0) * 1j * ys  # -> m1 + m2/(iy)
    m2 = float(richardson(((s - m1) * 1j * ys).real))
    var = m2 - m1 ** 2
    if not np.isfinite(var) or var <= 0:
        return m1 if np.isfinite(m1) else 0.0, 4.0
    return m1, np.sqrt(var)


def _detect_atoms(g, grid, ladder, threshold):
    dx = float(np.median(np.diff(grid)))
    eps_scan = float(ladder[min(2, len(ladder) - 1)])
    eps_scan = max(eps_scan, 2 * dx)
    h = (1j * eps_scan * g(grid + 1j * eps_scan)).real
    floor = 0.3 * threshold
    cand = [i for i in range(1, len(grid) - 1)
            if h[i] > floor and h[i] >= h[i - 1] and h[i] >= h[i + 1]]
    atoms = []
    eps_small = float(ladder[-1])
    for i in cand:
        # the scan localizes peaks to grid resolution; keep the bracket
        # tight so neighbouring atoms stay out of each other's refinement
        lo = grid[i] - (3 * dx + 4 * eps_small)
        hi = grid[i] + (3 * dx + 4 * eps_small)
        # 1/g is approximately linear through the atom: root-find its real
        # part on the two deepest rungs and kill the O(eps^2) bias
        def q(x, eps):
            return (1.0 / complex(g(np.asarray(x + 1j * eps)))).real
        alpha = None
        try:
            locs = []
            for eps in (2 * eps_small, eps_small):
                qlo, qhi = q(lo, eps), q(hi, eps)
                if not (np.isfinite(qlo) and np.isfinite(qhi)
                        and qlo * qhi < 0):
                    raise ValueError
                locs.append(optimize.brentq(q, lo, hi, xtol=1e-14,
                                            args=(eps,)))
            alpha = (4 * locs[1] - locs[0]) / 3.0
        except Exception:
            alpha = None
        if alpha is None:
            res = optimize.minimize_scalar(
                lambda x: -(1j * eps_small
                            * complex(g(np.asarray(x + 1j * eps_small)))).real,
                bounds=(lo, hi), method="bounded",
                options={"xatol": 1e-12})
            alpha = float(res.x)
        vals = np.array([(1j * e * complex(g(np.asarray(alpha + 1j * e)))).real
                         for e in ladder])
        mass = float(richardson(vals))
        if mass >= threshold:
            atoms.append((alpha, mass))
    # merge duplicates found from neighbouring grid bumps
    window = max(2 * dx, 8 * eps_small)
    merged = []
    for alpha, mass in sorted(atoms):
        if merged and abs(alpha - merged[-1][0]) < window:
            if mass > merged[-1][1]:
                merged[-1] = (alpha, mass)
        else:
            merged.append((alpha, mass))
    return merged


def stieltjes_invert(g, grid=None, eps_ladder=None, atom_threshold=1e-4,
                     mass_tol=1e-3, n_grid=2049, metadata=None):
    r"""Recover a RealMeasure from a Cauchy-transform-like map.

    Density via :math:`-\pi^{-1}\,\Im g(x+i\epsilon)` Richardson-extrapolated
    over the epsilon-ladder; atoms where :math:`i\epsilon\,g(\alpha+i\epsilon)`
    stabilizes above ``atom_threshold`` (exact pole contributions are
    subtracted before the density pass).  The result is renormalized when the
    mass defect is below ``mass_tol`` and rejected otherwise.
    """
    g = _vectorize_map(g)
    _check_cauchy_normalization(g)
    ladder = np.asarray(DEFAULT_EPS_LADDER if eps_ladder is None
                        else eps_ladder, dtype=float)
    auto = grid is None
    if auto:
        m1, scale = _estimate_location_scale(g)
        width = 8.0 * scale + 1.0
    for attempt in range(5):
        if auto:
            grid_k = np.linspace(m1 - width, m1 + width, n_grid)
        else:
            grid_k = np.asarray(grid, dtype=float)
        atoms = _detect_atoms(g, grid_k, ladder, atom_threshold)

        def g_ac(z):
            val = g(z)
            for alpha, w in atoms:
                val = val - w / (z - alpha)
            return val

        dens = np.empty((len(ladder), len(grid_k)))
        for k, eps in enumerate(ladder):
            dens[k] = -g_ac(grid_k + 1j * eps).imag / np.pi
        rho = np.clip(richardson(dens, max_order=4), 0.0, None)
        atom_mass = sum(w for _, w in atoms)
        # mass accounting: per-rung masses, extrapolated over the rungs the
        # grid actually resolves (smoothed features have width ~ eps)
        dx = float(np.median(np.diff(grid_k)))
        masses = np.trapezoid(dens, grid_k, axis=1)
        resolved = ladder >= 2 * dx
        if np.count_nonzero(resolved) >= 3:
            raw_mass = float(richardson(masses[resolved]))
        else:
            raw_mass = float(richardson(masses[:4]))
        seg = ms.Segment(grid_k[0], grid_k[-1], grid=grid_k, values=rho)
        defect = 1.0 - (atom_mass + raw_mass)
        if abs(defect) <= mass_tol:
            break
        if auto and defect > mass_tol and attempt < 4:
            width *= 2.0
            continue
        raise MassDefectError(
            f"inversion mass defect {defect:.2e} exceeds {mass_tol}")
    segments = [seg] if seg.mass() > 1e-12 else []
    if not segments:
        total = sum(w for _, w in atoms)
        atoms = [(a, w / total) for a, w in atoms]
    return ms.RealMeasure(atoms, segments, metadata=metadata,
                          renormalize=bool(segments))


# ---------------------------------------------------------------------------
# Herglotz inversion on the circle
# ---------------------------------------------------------------------------

DEFAULT_R_LADDER = 1.0 - 2.0 ** -np.arange(4, 13)


def radial_density(psi_fn, thetas, r):
    """Smoothed Haar density Re(2 psi(r e^{-i theta}) + 1) at radius r."""
    psi_fn = _vectorize_map(psi_fn)
    z = r * np.exp(-1j * np.asarray(thetas, dtype=float))
    return (2 * psi_fn(z) + 1).real


def herglotz_invert(psi_like, n_theta=2048, r_ladder=None,
                    atom_threshold=1e-4, mass_tol=1e-3, metadata=None):
    r"""Recover a CircleMeasure from a psi-style map on the disk.

    Density against Haar from radial limits of :math:`\Re(2\psi+1)`, atoms
    from :math:`(1-r)\,\psi(r\bar\alpha)`.  Note the conjugated evaluation
    points: :math:`\psi` integrates the kernel :math:`xz/(1-xz)`, so the
    boundary data of the measure at :math:`e^{i\theta}` lives at
    :math:`z \to e^{-i\theta}`.
    """
    psi = _vectorize_map(psi_like)
    if abs(complex(psi(np.asarray(0j)))) > 1e-8:
        raise NormalizationError("psi(0) != 0")
    rng = np.random.default_rng(11)
    zs = 0.9 * np.sqrt(rng.random(64)) * np.exp(2j * np.pi * rng.random(64))
    if float(np.min(psi(zs).real)) < -0.5 - 1e-7:
        raise NormalizationError("Re(psi) < -1/2 on samples")
    ladder = np.asarray(DEFAULT_R_LADDER if r_ladder is None else r_ladder,
                        dtype=float)
    thetas = np.linspace(0, 2 * np.pi, n_theta, endpoint=False)
    dth = thetas[1] - thetas[0]

    # -- atoms ---------------------------------------------------------------
    r_scan = ladder[min(2, len(ladder) - 1)]
    hvals = ((1 - r_scan) * psi(r_scan * np.exp(-1j * thetas))).real
    floor = 0.3 * atom_threshold
    cand = [i for i in range(n_theta)
            if hvals[i] > floor
            and hvals[i] >= hvals[i - 1] and hvals[i] >= hvals[(i + 1) % n_theta]]
    atoms = []
    r_deep = ladder[-1]
    for i in cand:
        lo, hi = thetas[i] - 2 * dth, thetas[i] + 2 * dth
        res = optimize.minimize_scalar(
            lambda t: -((1 - r_deep)
                        * complex(psi(np.asarray(r_deep * np.exp(-1j * t))))).real,
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
        th = float(res.x) % (2 * np.pi)
        vals = np.array([((1 - r) * complex(psi(np.asarray(r * np.exp(-1j * th))))).real
                         for r in ladder])
        mass = float(richardson(vals))
        if mass >= atom_threshold:
            atoms.append((th, mass))
    merged = []
    for th, massv in sorted(atoms):
        if merged and abs(th - merged[-1][0]) < 2 * dth:
            if massv > merged[-1][1]:
                merged[-1] = (th, massv)
        else:
            merged.append((th, massv))
    atoms = merged

    def psi_ac(z):
        val = psi(z)
        for th, w in atoms:
            x = np.exp(1j * th)
            val = val - w * x * z / (1 - x * z)
        return val

    # the kernel of an atom carries its share of the constant term:
    # 2*psi_atom + w equals w*(conj(a)+z)/(conj(a)-z), so after subtracting
    # psi_atom the Haar offset shrinks from 1 to 1 - (atom mass)
    atom_mass = sum(w for _, w in atoms)

    def density_rows(angles):
        rows = np.empty((len(ladder), len(angles)))
        for k, r in enumerate(ladder):
            rows[k] = (2 * psi_ac(r * np.exp(-1j * angles))).real \
                + (1.0 - atom_mass)
        return rows

    dens = density_rows(thetas)
    rho = np.clip(richardson(dens, max_order=4), 0.0, None)
    masses = np.mean(dens, axis=1)
    resolved = (1.0 - ladder) >= 2 * dth
    if np.count_nonzero(resolved) >= 3:
        raw_mass = float(richardson(masses[resolved]))
    else:
        raw_mass = float(richardson(masses[:4]))
    defect = 1.0 - (atom_mass + raw_mass)
    if abs(defect) > mass_tol:
        raise MassDefectError(
            f"inversion mass defect {defect:.2e} exceeds {mass_tol}")
    if float(np.mean(rho)) < 1e-12:
        total = sum(w for _, w in atoms)
        atoms = [(th, w / total) for th, w in atoms]
        return ms.CircleMeasure(atoms, metadata=metadata)
    # refine the grid where the density is steep (support edges of
    # densities with root singularities), so the interpolant carries the
    # right mass and pointwise values stay unbiased after renormalization
    level = 8 * (np.median(rho) + 1e-9)
    steep = [i for i in range(n_theta)
             if max(rho[i], rho[(i + 1) % n_theta]) > level
             and (min(rho[i], rho[(i + 1) % n_theta]) + 1e-9)
             * 2.5 < max(rho[i], rho[(i + 1) % n_theta])]
    if steep:
        extra = []
        offs = dth * np.geomspace(1e-4, 1.0, 14)
        for i in steep[:32]:
            base = thetas[i]
            extra.extend(base + offs)
            extra.extend(base + dth - offs)
        extra = np.asarray(sorted(set(np.round(
            np.mod(extra, 2 * np.pi), 14))))
        rho_extra = np.clip(richardson(density_rows(extra), max_order=4),
                            0.0, None)
        all_th = np.concatenate([thetas, extra])
        all_rho = np.concatenate([rho, rho_extra])
        order = np.argsort(all_th)
        all_th, all_rho = all_th[order], all_rho[order]
        keep = np.concatenate([[True], np.diff(all_th) > 1e-13])
        thetas, rho = all_th[keep], all_rho[keep]
    return ms.CircleMeasure(atoms, grid=thetas, values=rho,
                            metadata=metadata, renormalize=True)


def circle_support_edges(psi_like, cutoff=0.02, r=1 - 1e-9):
    """Endpoints (symmetric scan from theta=0) of the density support.

    Bisects the level crossing of the radial density profile at a radius
    very close to the boundary; intended for densities with hard support
    edges.  Returns (theta_minus, theta_plus).
    """
    psi = _vectorize_map(psi_like)

    def profile(th):
        return float(radial_density(psi, np.asarray([th]), r)[0])

    edges = []
    for sign in (1.0, -1.0):
        lo, hi = 0.0, sign * np.pi
        if profile(lo) < cutoff:
            raise TransformError("no density mass near theta = 0")
        a, b = lo, hi
        for _ in range(60):
            mid = 0.5 * (a + b)
            if profile(mid) >= cutoff:
                a = mid
            else:
                b = mid
        edges.append(0.5 * (a + b))
    return edges[1], edges[0]


# ---------------------------------------------------------------------------
# asymptotics
# ---------------------------------------------------------------------------

def first_moment_via_F(f, y0=8.0, n=8, tol=1e-6):
    """Mean of the measure behind an F-transform via lim (iy - F(iy)).

    Richardson-extrapolates over a geometric y-ladder; raises
    DivergenceError when the tail fails to stabilize.
    """
    ys = y0 * 2.0 ** np.arange(n)
    vals = np.array([1j * y - complex(f(np.asarray(1j * y))) for y in ys])
    est_all = richardson(vals)
    est_drop = richardson(vals[:-1])
    if abs(est_all - est_drop) > tol * (1 + abs(est_all)) \
            or abs(est_all.imag) > 1e-4 * (1 + abs(est_all)):
        raise ms.DivergenceError("first-moment ladder did not stabilize")
    return float(est_all.real)


# ---------------------------------------------------------------------------
# named transform families (transform-level measures)
# ---------------------------------------------------------------------------

def monotone_stable_F(alpha, rho, t):
    r"""F-transform :math:`(z^\alpha + t e^{i\alpha\rho\pi})^{1/\alpha}`.

    Power branches are continuous on angles in (0, 2pi).
    """
    c = t * np.exp(1j * alpha * rho * np.pi)

    def fn(z):
        return power_poscut(power_poscut(z, alpha) + c, 1.0 / alpha)

    tree = {"op": "monotone_stable_F",
            "params": {"alpha": alpha, "rho": rho, "t": t}}
    return AnalyticMap(fn, "H", "F", tree)


def boolean_stable_G(alpha, rho, t):
    """Cauchy transform 1/(z + t e^{i alpha rho pi} z^{1-alpha})."""
    c = t * np.exp(1j * alpha * rho * np.pi)

    def fn(z):
        return 1.0 / (z + c * power_poscut(z, 1.0 - alpha))

    tree = {"op": "boolean_stable_G",
            "params": {"alpha": alpha, "rho": rho, "t": t}}
    return AnalyticMap(fn, "H", "G", tree)


def as_G(obj):
    """Coerce a measure or tagged map into an evaluable Cauchy transform."""
    if isinstance(obj, ms.RealMeasure):
        return g_transform(obj)
    if isinstance(obj, AnalyticMap):
        if obj.kind == "G":
            return obj
        if obj.kind == "F":
            tree = None if obj.tree is None else {"op": "reciprocal",
                                                  "inner": obj.tree}
            return AnalyticMap(lambda z: 1.0 / obj(z), "H", "G", tree)
    raise TransformError("expected a RealMeasure or an F/G-tagged map")


def as_F(obj):
    if isinstance(obj, ms.RealMeasure):
        return f_transform(obj)
    if isinstance(obj, AnalyticMap):
        if obj.kind == "F":
            return obj
        if obj.kind == "G":
            tree = None if obj.tree is None else {"op": "reciprocal",
                                                  "inner": obj.tree}
            return AnalyticMap(lambda z: 1.0 / obj(z), "H", "F", tree)
    raise TransformError("expected a RealMeasure or an F/G-tagged map")


def as_psi(obj):
    if isinstance(obj, ms.CircleMeasure):
        return psi_transform(obj)
    if isinstance(obj, AnalyticMap):
        if obj.kind == "psi":
            return obj
        if obj.kind == "eta":
            tree = None if obj.tree is None else {"op": "psi_of_eta",
                                                  "inner": obj.tree}
            return AnalyticMap(lambda z: obj(z) / (1 - obj(z)), "D", "psi",
                               tree)
    raise TransformError("expected a CircleMeasure or a psi/eta-tagged map")


def as_eta(obj):
    if isinstance(obj, ms.CircleMeasure):
        return eta_transform(obj)
    if isinstance(obj, AnalyticMap):
        if obj.kind == "eta":
            return obj
        if obj.kind == "psi":
            tree = None if obj.tree is None else {"op": "eta_of_psi",
                                                  "inner": obj.tree}
            return AnalyticMap(lambda z: obj(z) / (1 + obj(z)), "D", "eta",
                               tree)
    raise TransformError("expected a CircleMeasure or a psi/eta-tagged map")


# ---------------------------------------------------------------------------
# expression-tree (de)serialization
# ---------------------------------------------------------------------------

def map_to_tree(amap):
    if amap.tree is None:
        raise TransformError("map carries no expression tree")
    return amap.tree


def map_from_tree(tree):
    op = tree["op"]
    if op == "identity":
        return identity_map(tree.get("domain", "H"))
    if op == "compose":
        return map_from_tree(tree["outer"]).compose(map_from_tree(tree["inner"]))
    if op == "reciprocal":
        inner = map_from_tree(tree["inner"])
        kind = {"G": "F", "F": "G"}.get(inner.kind, "generic")
        return AnalyticMap(lambda z: 1.0 / inner(z), inner.domain, kind)
    if op == "boolean_B":
        inner = map_from_tree(tree["inner"])
        return AnalyticMap(lambda z: z - inner(z), "H", "B")
    if op == "boolean_add":
        fa = map_from_tree(tree["a"])
        fb = map_from_tree(tree["b"])
        return AnalyticMap(lambda z: fa(z) + fb(z) - z, "H", "F")
    if op == "boolean_mult":
        ha = map_from_tree(tree["a"])
        hb = map_from_tree(tree["b"])
        return AnalyticMap(lambda z: np.asarray(z, complex) * ha(z) * hb(z),
                           "D", "eta")
    if op == "psi_of_eta":
        inner = map_from_tree(tree["inner"])
        return AnalyticMap(lambda z: inner(z) / (1 - inner(z)), "D", "psi")
    if op == "eta_of_psi":
        inner = map_from_tree(tree["inner"])
        return AnalyticMap(lambda z: inner(z) / (1 + inner(z)), "D", "eta")
    if op == "measure_G":
        return g_transform(ms.measure_from_json(tree["measure"]))
    if op == "measure_F":
        return f_transform(ms.measure_from_json(tree["measure"]))
    if op == "measure_psi":
        return psi_transform(ms.measure_from_json(tree["measure"]))
    if op == "measure_eta":
        return eta_transform(ms.measure_from_json(tree["measure"]))
    if op == "measure_h":
        return h_transform(ms.measure_from_json(tree["measure"]))
    if op == "monotone_stable_F":
        return monotone_stable_F(**tree["params"])
    if op == "boolean_stable_G":
        return boolean_stable_G(**tree["params"])
    if op == "affine":
        a, b = tree["a"], tree["b"]
        return AnalyticMap(lambda z: a * z + b, tree.get("domain", "H"),
                           tree.get("kind", "generic"), tree)
    raise TransformError(f"unknown tree op {op!r}")


def shift_F(a):
    """F-transform of a point mass: z - a."""
    return AnalyticMap(lambda z: z - a, "H", "F",
                       tree={"op": "affine", "a": 1.0, "b": -a,
                             "domain": "H", "kind": "F"})


def rotation_eta(c):
    """eta-transform z -> c z (|c| <= 1); the Poisson kernel family."""
    return AnalyticMap(lambda z: c * z, "D", "eta",
                       tree={"op": "affine", "a": c, "b": 0.0,
                             "domain": "D", "kind": "eta"})
