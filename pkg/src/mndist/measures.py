r"""Probability measures on the real line and on the unit circle.

Measures are stored in a mixed representation: a list of atoms plus a
piecewise absolutely-continuous part.  Densities are either closed-form
callables or tabulated on a grid; tabulated data is interpolated with
monotone cubics (PCHIP), which cannot overshoot and therefore keeps
densities non-negative.

The module also provides the Cauchy-transform machinery used downstream:
for tabulated densities the integral

.. math:: \int \frac{\rho(u)}{z-u}\,du

is evaluated *exactly* for the piecewise-cubic interpolant (log/recurrence
formulas near the pole, series far from it), which makes transform
evaluation on inversion ladders cheap and accurate.
"""

import json

import numpy as np
from scipy.interpolate import PchipInterpolator

from ._util import as_rng, graded_grid, quad_real, sqrt_poscut

MASS_TOL = 1e-10


class MeasureError(ValueError):
    pass


class DivergenceError(MeasureError):
    """Raised when a moment/quadrature fails to converge (heavy tails)."""


# ---------------------------------------------------------------------------
# exact Cauchy integrals of piecewise cubics
# ---------------------------------------------------------------------------

_SERIES_CUT = 0.25
_SERIES_TERMS = 28


def _cauchy_cells(z, lefts, widths, coeffs, kernel="cauchy",
                  chunk_budget=2_000_000):
    """Sum of integrals ``int_0^h p_j(s) K(z - u_j - s) ds`` over all cells.

    ``coeffs[j, k]`` multiplies ``s**k`` on cell j.  Kernels: ``'cauchy'``
    is 1/w, ``'square'`` is 1/w^2, ``'log'`` is log(w).  Switches between
    log/recurrence formulas near the pole and a power series away from it.
    Broadcasts (cells x points) in chunks to keep memory bounded.
    """
    shape = np.shape(z)
    zf = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    out = np.zeros(zf.shape, dtype=complex)
    deg = coeffs.shape[1]
    nI = deg + 1 if kernel == "log" else deg
    m = len(lefts)
    L = lefts[:, None]
    H = widths[:, None]
    C = coeffs.T[:, :, None]  # (deg, m, 1)
    step = max(1, chunk_budget // max(m, 1))
    for lo in range(0, len(zf), step):
        zc = zf[lo:lo + step][None, :]  # (1, n)
        w = zc - L                       # (m, n)
        x = H / w
        far = np.abs(x) < _SERIES_CUT
        I = np.empty((nI,) + w.shape, dtype=complex)
        J = np.empty((deg,) + w.shape, dtype=complex) \
            if kernel == "square" else None
        # near-pole branch: exact log + recurrence
        logdiff = np.log(w) - np.log(w - H)
        I[0] = logdiff
        for k in range(1, nI):
            I[k] = w * I[k - 1] - H ** k / k
        if kernel == "square":
            J[0] = 1.0 / (w - H) - 1.0 / w
            for k in range(1, deg):
                J[k] = H ** k / (w - H) - k * I[k - 1]
        # far-field branch: series in h/w (the recurrence cancels there)
        if np.any(far):
            s = np.zeros((nI,) + w.shape, dtype=complex)
            sj = np.zeros((deg,) + w.shape, dtype=complex) \
                if kernel == "square" else None
            xm = np.where(far, x, 0.0)
            xstep = xm.copy()
            for mm in range(_SERIES_TERMS):
                for k in range(nI):
                    s[k] += xm / (k + mm + 1)
                    if kernel == "square" and k < deg:
                        sj[k] += (mm + 1) * xm / (k + mm + 1)
                xm = xm * xstep
            for k in range(nI):
                I[k] = np.where(far, H ** k * s[k], I[k])
                if kernel == "square" and k < deg:
                    J[k] = np.where(far, H ** k * sj[k] / w, J[k])
        acc = np.zeros(w.shape[1], dtype=complex)
        for k in range(deg):
            if kernel == "square":
                acc += np.sum(C[k] * J[k], axis=0)
            elif kernel == "log":
                Lk = (H ** (k + 1) * np.log(w - H) + I[k + 1]) / (k + 1)
                acc += np.sum(C[k] * Lk, axis=0)
            else:
                acc += np.sum(C[k] * I[k], axis=0)
        out[lo:lo + step] = acc
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# absolutely continuous segments
# ---------------------------------------------------------------------------

class Segment:
    """One absolutely continuous piece of a measure on [a, b].

    Either wraps a density callable or a tabulated grid interpolated with
    monotone cubics.
    """

    def __init__(self, a, b, density=None, grid=None, values=None):
        if b <= a:
            raise MeasureError("segment needs a < b")
        self.a = float(a)
        self.b = float(b)
        self.fn = density
        self._tab = None
        if grid is not None:
            grid = np.asarray(grid, dtype=float)
            values = np.asarray(values, dtype=float)
            if np.any(values < -1e-12):
                raise MeasureError("negative density values")
            values = np.clip(values, 0.0, None)
            self._set_table(grid, values)
        elif density is None:
            raise MeasureError("segment needs a density or a table")

    def _set_table(self, grid, values):
        self._tab = PchipInterpolator(grid, values, extrapolate=False)
        self.grid = grid
        self.values = values
        # ascending-order cubic coefficients per cell
        c = self._tab.c  # (4, m), descending powers
        self._coeffs = np.ascontiguousarray(c[::-1].T)  # (m, 4) ascending
        self._lefts = grid[:-1]
        self._widths = np.diff(grid)
        masses = np.zeros(len(self._lefts))
        for k in range(4):
            masses += self._coeffs[:, k] * self._widths ** (k + 1) / (k + 1)
        self._cell_mass = masses
        self._cum_mass = np.concatenate([[0.0], np.cumsum(masses)])

    @property
    def tabulated(self):
        return self._tab is not None

    def as_table(self, n=4097):
        """Tabulated view of this segment (identity when already tabulated).

        Endpoints are nudged inward so densities with integrable endpoint
        singularities stay finite; the nodes are graded toward the endpoints
        for the same reason.
        """
        if self.tabulated:
            return self
        eps = 1e-9 * (self.b - self.a)
        u = np.linspace(0.0, np.pi, n)
        x = self.a + (self.b - self.a) * 0.5 * (1 - np.cos(u))
        x[0] += eps
        x[-1] -= eps
        vals = np.asarray([self.fn(xi) for xi in x], dtype=float)
        vals = np.where(np.isfinite(vals), vals, 0.0)
        seg = Segment(self.a, self.b, grid=x, values=np.clip(vals, 0, None))
        target = self.mass()
        got = seg.mass()
        if got > 0:
            seg = Segment(self.a, self.b, grid=x,
                          values=np.clip(vals, 0, None) * (target / got))
        return seg

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.tabulated:
            out = self._tab(x)
            return np.where(np.isnan(out), 0.0, out)
        out = np.zeros(x.shape)
        inside = (x >= self.a) & (x <= self.b)
        if np.any(inside):
            out[inside] = [self.fn(xi) for xi in np.atleast_1d(x[inside])]
        return out

    def mass(self):
        if self.tabulated:
            return float(self._cum_mass[-1])
        return quad_real(self.fn, self.a, self.b)

    def moment(self, n):
        if self.tabulated:
            # exact integral of x^n times the piecewise cubic
            total = 0.0
            for j in range(len(self._lefts)):
                u0, h = self._lefts[j], self._widths[j]
                # expand (u0 + s)^n and integrate monomials
                val = 0.0
                from math import comb
                for k in range(4):
                    c = self._coeffs[j, k]
                    if c == 0.0:
                        continue
                    for i in range(n + 1):
                        val += c * comb(n, i) * u0 ** (n - i) \
                            * h ** (k + i + 1) / (k + i + 1)
                total += val
            return total
        return quad_real(lambda x: x ** n * self.fn(x), self.a, self.b)

    def cdf(self, x):
        seg = self if self.tabulated else self.as_table()
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, seg.grid[0], seg.grid[-1])
        j = np.clip(np.searchsorted(seg.grid, xc, side="right") - 1,
                    0, len(seg._lefts) - 1)
        s = xc - seg._lefts[j]
        out = seg._cum_mass[j].copy()
        for k in range(4):
            out += seg._coeffs[j, k] * s ** (k + 1) / (k + 1)
        out[x < seg.grid[0]] = 0.0
        out[x > seg.grid[-1]] = seg._cum_mass[-1]
        return out

    def cauchy(self, z, derivative=False):
        """integral of density/(z-u) du (or the squared-kernel integral)."""
        if self.tabulated:
            val = _cauchy_cells(np.asarray(z, dtype=complex), self._lefts,
                                self._widths, self._coeffs,
                                kernel="square" if derivative else "cauchy")
            return -val if derivative else val
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        flat = out.reshape(-1)
        zf = z.reshape(-1)
        from ._util import quad_complex
        for i, zi in enumerate(zf):
            pts = [zi.real] if self.a < zi.real < self.b else None
            if derivative:
                flat[i] = quad_complex(
                    lambda u, zi=zi: -self.fn(u) / (zi - u) ** 2,
                    self.a, self.b, points=pts)
            else:
                flat[i] = quad_complex(
                    lambda u, zi=zi: self.fn(u) / (zi - u),
                    self.a, self.b, points=pts)
        return out if out.shape else complex(flat[0])

    def log_kernel(self, z):
        """integral of density * log(z - u) du (principal log, z in H)."""
        if self.tabulated:
            return _cauchy_cells(np.asarray(z, dtype=complex), self._lefts,
                                 self._widths, self._coeffs, kernel="log")
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        flat = out.reshape(-1)
        zf = z.reshape(-1)
        from ._util import quad_complex
        for i, zi in enumerate(zf):
            pts = [zi.real] if self.a < zi.real < self.b else None
            flat[i] = quad_complex(
                lambda u, zi=zi: self.fn(u) * np.log(zi - u),
                self.a, self.b, points=pts)
        return out if out.shape else complex(flat[0])

    def dilate(self, c):
        if self.tabulated:
            if c > 0:
                return Segment(c * self.a, c * self.b, grid=c * self.grid,
                               values=self.values / abs(c))
            return Segment(c * self.b, c * self.a,
                           grid=(c * self.grid)[::-1],
                           values=(self.values / abs(c))[::-1])
        fn = self.fn
        lo, hi = sorted((c * self.a, c * self.b))
        return Segment(lo, hi, density=lambda x: fn(x / c) / abs(c))

    def shift(self, a):
        if self.tabulated:
            return Segment(self.a + a, self.b + a, grid=self.grid + a,
                           values=self.values)
        fn = self.fn
        return Segment(self.a + a, self.b + a, density=lambda x: fn(x - a))


# ---------------------------------------------------------------------------
# measures on R
# ---------------------------------------------------------------------------

class RealMeasure:
    """Measure on R given by atoms plus piecewise-a.c. segments.

    By default the total mass must be 1 (within 1e-10); generating measures
    of Herglotz fields reuse the class with ``require_probability=False``.
    """

    def __init__(self, atoms=(), segments=(), metadata=None,
                 require_probability=True, renormalize=False):
        locs, weights = [], []
        for x, w in atoms:
            if w < -1e-14:
                raise MeasureError("negative atom mass")
            if w > 0:
                locs.append(float(x))
                weights.append(float(w))
        order = np.argsort(locs)
        self.atom_locs = np.asarray(locs, dtype=float)[order]
        self.atom_weights = np.asarray(weights, dtype=float)[order]
        if len(self.atom_locs) > 1 and np.min(np.diff(self.atom_locs)) <= 0:
            raise MeasureError("atom locations must be strictly sorted")
        self.segments = list(segments)
        ivs = sorted((s.a, s.b) for s in self.segments)
        for (a0, b0), (a1, _) in zip(ivs, ivs[1:]):
            if a1 < b0 - 1e-12:
                raise MeasureError("overlapping segments")
        self.metadata = dict(metadata or {})
        mass = self.total_mass()
        if renormalize and self.segments and mass > 0:
            scale = (1.0 - self.atom_weights.sum()) / (mass - self.atom_weights.sum())
            segs = []
            for s in self.segments:
                t = s if s.tabulated else s.as_table()
                segs.append(Segment(t.a, t.b, grid=t.grid,
                                    values=t.values * scale))
            self.segments = segs
            mass = self.total_mass()
        if require_probability and abs(mass - 1.0) > MASS_TOL:
            raise MeasureError(f"total mass {mass} != 1")

    # -- basic functionals ---------------------------------------------------

    def total_mass(self):
        return float(self.atom_weights.sum()
                     + sum(s.mass() for s in self.segments))

    def is_atomic(self):
        return not self.segments

    def moment(self, n):
        """n-th moment; exact for atoms, quadrature for densities."""
        if n < 0:
            raise MeasureError("need n >= 0")
        if n == 0:
            return self.total_mass()
        val = float(np.sum(self.atom_weights * self.atom_locs ** n))
        for s in self.segments:
            try:
                val += s.moment(n)
            except Exception as exc:  # pragma: no cover - quadpack failure
                raise DivergenceError(f"moment {n} quadrature failed") from exc
        if not np.isfinite(val):
            raise DivergenceError(f"moment {n} diverges")
        return val

    def mean(self):
        return self.moment(1)

    def variance(self):
        m1 = self.moment(1)
        return self.moment(2) - m1 ** 2

    def support(self):
        lo, hi = np.inf, -np.inf
        if len(self.atom_locs):
            lo, hi = self.atom_locs[0], self.atom_locs[-1]
        for s in self.segments:
            lo, hi = min(lo, s.a), max(hi, s.b)
        return lo, hi

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for s in self.segments:
            out = out + s.pdf(x)
        return out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for loc, w in zip(self.atom_locs, self.atom_weights):
            out = out + w * (x >= loc)
        for s in self.segments:
            out = out + s.cdf(x)
        return out

    # -- transforms (used heavily by mndist.transforms) ----------------------

    def cauchy(self, z, method="auto"):
        r"""Cauchy transform :math:`G(z)=\int (z-x)^{-1} \mu(dx)`.

        ``method='closed'`` uses the tagged closed form (if any),
        ``'quadrature'`` forces evaluation from the representation, and
        ``'auto'`` prefers the closed form.
        """
        z = np.asarray(z, dtype=complex)
        closed = _closed_form_G(self.metadata)
        if closed is not None and method in ("auto", "closed"):
            val = closed(z, derivative=False)
        else:
            val = np.zeros(z.shape, dtype=complex)
            for s in self.segments:
                val = val + s.cauchy(z)
        for loc, w in zip(self.atom_locs, self.atom_weights):
            val = val + w / (z - loc)
        return val if val.shape else complex(val)

    def cauchy_prime(self, z, method="auto"):
        z = np.asarray(z, dtype=complex)
        closed = _closed_form_G(self.metadata)
        if closed is not None and method in ("auto", "closed"):
            val = closed(z, derivative=True)
        else:
            val = np.zeros(z.shape, dtype=complex)
            for s in self.segments:
                val = val + s.cauchy(z, derivative=True)
        for loc, w in zip(self.atom_locs, self.atom_weights):
            val = val - w / (z - loc) ** 2
        return val if val.shape else complex(val)

    def log_kernel(self, z):
        """integral of log(z - x) mu(dx), principal log."""
        z = np.asarray(z, dtype=complex)
        val = np.zeros(z.shape, dtype=complex)
        for s in self.segments:
            val = val + s.log_kernel(z)
        for loc, w in zip(self.atom_locs, self.atom_weights):
            val = val + w * np.log(z - loc)
        return val if val.shape else complex(val)

    # -- operations -----------------------------------------------------------

    def dilate(self, c):
        """Pushforward under x -> c*x; c = 0 collapses to delta_0."""
        if c == 0:
            return point_mass(0.0)
        atoms = list(zip(c * self.atom_locs, self.atom_weights))
        segs = [s.dilate(c) for s in self.segments]
        meta = _dilate_metadata(self.metadata, c)
        return RealMeasure(atoms, segs, metadata=meta,
                           require_probability=False)

    def shift(self, a):
        atoms = list(zip(self.atom_locs + a, self.atom_weights))
        segs = [s.shift(a) for s in self.segments]
        meta = _shift_metadata(self.metadata, a)
        return RealMeasure(atoms, segs, metadata=meta,
                           require_probability=False)

    def sample(self, seed, n):
        """n i.i.d. draws by inverse CDF on the mixed representation."""
        if n < 1:
            raise MeasureError("need n >= 1")
        rng = as_rng(seed)
        segs = [s if s.tabulated else s.as_table() for s in self.segments]
        weights = list(self.atom_weights) + [s.mass() for s in segs]
        weights = np.asarray(weights) / np.sum(weights) if weights else np.asarray([])
        if not len(weights):
            raise MeasureError("empty measure")
        comp = rng.choice(len(weights), size=n, p=weights)
        out = np.empty(n)
        n_atoms = len(self.atom_locs)
        for i in range(n_atoms):
            out[comp == i] = self.atom_locs[i]
        for j, seg in enumerate(segs):
            idx = comp == n_atoms + j
            k = int(idx.sum())
            if k:
                out[idx] = _sample_segment(seg, rng.random(k))
        return out

    # -- serialization ---------------------------------------------------------

    def to_json_dict(self):
        d = {"side": "R",
             "atoms": [{"x": float(x), "w": float(w)}
                       for x, w in zip(self.atom_locs, self.atom_weights)]}
        name = self.metadata.get("name")
        if name and name in _NAMED_REAL and self.segments \
                and not len(self.atom_locs):
            d["density"] = {"kind": "named", "name": name,
                            "params": self.metadata.get("params", {})}
        elif self.segments:
            tabs = [s if s.tabulated else s.as_table() for s in self.segments]
            grid = np.concatenate([t.grid for t in tabs])
            vals = np.concatenate([t.values for t in tabs])
            order = np.argsort(grid)
            d["density"] = {"kind": "tabulated",
                            "grid": grid[order].tolist(),
                            "values": vals[order].tolist()}
        else:
            d["density"] = None
        return d

    @staticmethod
    def from_json_dict(d):
        atoms = [(a["x"], a["w"]) for a in d.get("atoms", [])]
        dens = d.get("density")
        if dens is None:
            return RealMeasure(atoms)
        if dens["kind"] == "named":
            base = make_named(dens["name"], dens.get("params", {}))
            if atoms:
                raise MeasureError("named density with extra atoms "
                                   "not supported in JSON spec")
            return base
        grid = np.asarray(dens["grid"], dtype=float)
        vals = np.asarray(dens["values"], dtype=float)
        seg = Segment(grid[0], grid[-1], grid=grid, values=vals)
        return RealMeasure(atoms, [seg])

    def __repr__(self):
        tag = self.metadata.get("name", "")
        return (f"RealMeasure(atoms={len(self.atom_locs)}, "
                f"segments={len(self.segments)}"
                + (f", {tag!r}" if tag else "") + ")")


def _sample_segment(seg, u):
    """Inverse-CDF draws from a tabulated segment given uniforms u."""
    total = seg._cum_mass[-1]
    targets = u * total
    j = np.clip(np.searchsorted(seg._cum_mass, targets, side="right") - 1,
                0, len(seg._lefts) - 1)
    lo = np.zeros_like(targets)
    hi = seg._widths[j].astype(float).copy()
    rem = targets - seg._cum_mass[j]
    c = seg._coeffs[j]
    for _ in range(60):  # bisection on the quartic antiderivative
        mid = 0.5 * (lo + hi)
        val = np.zeros_like(mid)
        for k in range(4):
            val += c[:, k] * mid ** (k + 1) / (k + 1)
        take = val < rem
        lo = np.where(take, mid, lo)
        hi = np.where(take, hi, mid)
    return seg._lefts[j] + 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# named families on R
# ---------------------------------------------------------------------------

def point_mass(a):
    return RealMeasure([(a, 1.0)], metadata={"name": "point", "params": {"a": a}})


def atomic(pairs):
    return RealMeasure(list(pairs))


def semicircle(mean=0.0, var=1.0):
    """Semicircle law, density sqrt(4v - (x-m)^2) / (2 pi v)."""
    m, v = float(mean), float(var)
    r = 2.0 * np.sqrt(v)

    def dens(x):
        s = 4 * v - (x - m) ** 2
        return np.sqrt(s) / (2 * np.pi * v) if s > 0 else 0.0

    seg = Segment(m - r, m + r, density=dens)
    return RealMeasure([], [seg],
                       metadata={"name": "semicircle",
                                 "params": {"mean": m, "var": v}})


def arcsine(mean=0.0, var=1.0):
    """Arcsine law with given mean and variance, support mean +- sqrt(2 var)."""
    a, t = float(mean), float(var)
    r = np.sqrt(2 * t)

    def dens(x):
        s = 2 * t - (x - a) ** 2
        return 1.0 / (np.pi * np.sqrt(s)) if s > 0 else 0.0

    seg = Segment(a - r, a + r, density=dens)
    return RealMeasure([], [seg],
                       metadata={"name": "arcsine",
                                 "params": {"mean": a, "var": t}})


def uniform(a=0.0, b=1.0):
    a, b = float(a), float(b)
    seg = Segment(a, b, density=lambda x: 1.0 / (b - a))
    return RealMeasure([], [seg],
                       metadata={"name": "uniform", "params": {"a": a, "b": b}})


def marchenko_pastur(lam=1.0):
    """Free Poisson law MP_lambda (atom at 0 for lambda < 1)."""
    lam = float(lam)
    lo, hi = (1 - np.sqrt(lam)) ** 2, (1 + np.sqrt(lam)) ** 2

    def dens(x):
        s = (hi - x) * (x - lo)
        return np.sqrt(s) / (2 * np.pi * x) if s > 0 and x > 0 else 0.0

    atoms = [(0.0, 1 - lam)] if lam < 1 else []
    seg = Segment(lo, hi, density=dens)
    return RealMeasure(atoms, [seg],
                       metadata={"name": "mp", "params": {"lam": lam}})


def resample(m, n_base=257, per_side=32, extra_edges=()):
    """Re-tabulate the a.c. part on a compact edge-graded grid.

    Cuts the cell count of inversion outputs (whose grids are as fine as
    the inversion grid) before they enter quadratic-cost transforms.  The
    grid is graded toward the segment bounds, any supplied edges, and
    auto-detected steep cells (root-type singularities of the density).
    """
    segs = []
    for s in m.segments:
        t = s if s.tabulated else s.as_table()
        v = t.values
        level = 8 * (np.median(v) + 1e-12)
        steep = [t.grid[i if v[i] > v[i + 1] else i + 1]
                 for i in range(len(v) - 1)
                 if max(v[i], v[i + 1]) > level
                 and (min(v[i], v[i + 1]) + 1e-12) * 2.5 < max(v[i], v[i + 1])]
        edges = sorted({t.a, t.b, *np.round(steep[:8], 12),
                        *[e for e in extra_edges if t.a <= e <= t.b]})
        g = graded_grid(t.a, t.b, n_base, edges=edges, depth=1e-7,
                        per_side=per_side)
        vals = np.clip(t.pdf(g), 0.0, None)
        segs.append(Segment(t.a, t.b, grid=g, values=vals))
    out = RealMeasure(list(zip(m.atom_locs, m.atom_weights)), segs,
                      metadata=m.metadata, require_probability=False,
                      renormalize=bool(segs))
    return out


def prune(m, seg_mass_tol=1e-6):
    """Drop a.c. segments whose mass is below tolerance, renormalizing the
    atoms (used to clean inversion-noise remnants off atomic measures)."""
    segs = [s for s in m.segments if s.mass() > seg_mass_tol]
    atoms = list(zip(m.atom_locs, m.atom_weights))
    if not segs and atoms:
        total = sum(w for _, w in atoms)
        atoms = [(x, w / total) for x, w in atoms]
        return RealMeasure(atoms, [], metadata=m.metadata)
    return RealMeasure(atoms, segs, metadata=m.metadata,
                       renormalize=bool(segs))


def from_table(grid, values, atoms=(), renormalize=False, metadata=None):
    grid = np.asarray(grid, dtype=float)
    seg = Segment(grid[0], grid[-1], grid=grid, values=values)
    return RealMeasure(atoms, [seg], metadata=metadata,
                       renormalize=renormalize)


_NAMED_REAL = {
    "point": lambda p: point_mass(p["a"]),
    "semicircle": lambda p: semicircle(p.get("mean", 0.0), p.get("var", 1.0)),
    "arcsine": lambda p: arcsine(p.get("mean", 0.0), p.get("var", 1.0)),
    "uniform": lambda p: uniform(p.get("a", 0.0), p.get("b", 1.0)),
    "mp": lambda p: marchenko_pastur(p.get("lam", 1.0)),
}


def make_named(name, params):
    if name in _NAMED_REAL:
        return _NAMED_REAL[name](params)
    if name in _NAMED_CIRCLE:
        return _NAMED_CIRCLE[name](params)
    raise MeasureError(f"unknown named measure {name!r}")


def _closed_form_G(meta):
    """Vectorized closed-form G (and G') for tagged densities, if known."""
    name = meta.get("name")
    p = meta.get("params", {})
    if name == "semicircle":
        m, v = p["mean"], p["var"]

        def g(z, derivative=False):
            zz = z - m
            s = sqrt_poscut(zz * zz - 4 * v)
            if not derivative:
                return (zz - s) / (2 * v)
            return (1 - zz / s) / (2 * v)
        return g
    if name == "arcsine":
        a, t = p["mean"], p["var"]

        def g(z, derivative=False):
            zz = z - a
            s = sqrt_poscut(zz * zz - 2 * t)
            if not derivative:
                return 1.0 / s
            return -zz / s ** 3
        return g
    if name == "uniform":
        a, b = p["a"], p["b"]

        def g(z, derivative=False):
            if not derivative:
                return (np.log(z - a) - np.log(z - b)) / (b - a)
            return (1 / (z - a) - 1 / (z - b)) / (b - a)
        return g
    if name == "mp":
        lam = p["lam"]

        def g(z, derivative=False):
            s = sqrt_poscut((z + 1 - lam) ** 2 - 4 * z)
            gval = (z + 1 - lam - s) / (2 * z)
            if not derivative:
                # subtract the atom (added back by the caller) for lam < 1
                return gval - (max(1 - lam, 0.0) / z)
            gp = (1 - (z - 1 - lam) / s) / (2 * z) - gval / z
            return gp + max(1 - lam, 0.0) / z ** 2
        return g
    return None


def _dilate_metadata(meta, c):
    name = meta.get("name")
    p = meta.get("params", {})
    if name == "point":
        return {"name": "point", "params": {"a": c * p["a"]}}
    if name == "semicircle":
        return {"name": "semicircle",
                "params": {"mean": c * p["mean"], "var": c * c * p["var"]}}
    if name == "arcsine":
        return {"name": "arcsine",
                "params": {"mean": c * p["mean"], "var": c * c * p["var"]}}
    if name == "uniform":
        a, b = sorted((c * p["a"], c * p["b"]))
        return {"name": "uniform", "params": {"a": a, "b": b}}
    return {}


def _shift_metadata(meta, a):
    name = meta.get("name")
    p = meta.get("params", {})
    if name == "point":
        return {"name": "point", "params": {"a": p["a"] + a}}
    if name in ("semicircle", "arcsine"):
        return {"name": name,
                "params": {"mean": p["mean"] + a, "var": p["var"]}}
    if name == "uniform":
        return {"name": "uniform", "params": {"a": p["a"] + a, "b": p["b"] + a}}
    return {}


# ---------------------------------------------------------------------------
# measures on the unit circle
# ---------------------------------------------------------------------------

class CircleMeasure:
    """Measure on the unit circle: atoms (by angle) + density against Haar.

    The density is taken relative to normalized Haar measure, so a plain
    Haar measure has density identically 1.
    """

    def __init__(self, atoms=(), density=None, grid=None, values=None,
                 metadata=None, require_probability=True, renormalize=False):
        angs, weights = [], []
        for th, w in atoms:
            if w < -1e-14:
                raise MeasureError("negative atom mass")
            if w > 0:
                ang = float(th) % (2 * np.pi)
                if 2 * np.pi - ang < 1e-9:
                    ang = 0.0
                angs.append(ang)
                weights.append(float(w))
        order = np.argsort(angs)
        self.atom_angles = np.asarray(angs, dtype=float)[order]
        self.atom_weights = np.asarray(weights, dtype=float)[order]
        self.fn = density
        self._tab = None
        if grid is not None:
            grid = np.asarray(grid, dtype=float)
            values = np.clip(np.asarray(values, dtype=float), 0.0, None)
            if grid[0] != 0.0 or grid[-1] >= 2 * np.pi:
                raise MeasureError("circle table must cover [0, 2pi)")
            gg = np.concatenate([grid, [2 * np.pi]])
            vv = np.concatenate([values, [values[0]]])
            self._tab = PchipInterpolator(gg, vv, extrapolate=False)
            self.grid, self.values = grid, values
        self.metadata = dict(metadata or {})
        self._moment_cache = {}
        mass = self.total_mass()
        if renormalize and mass > 0 and self.has_density():
            scale = (1.0 - self.atom_weights.sum()) / (mass - self.atom_weights.sum())
            if self._tab is not None:
                vv = self.values * scale
                gg = np.concatenate([self.grid, [2 * np.pi]])
                self._tab = PchipInterpolator(
                    gg, np.concatenate([vv, [vv[0]]]), extrapolate=False)
                self.values = vv
            else:
                fn = self.fn
                self.fn = lambda th: scale * fn(th)
            mass = self.total_mass()
        if require_probability and abs(mass - 1.0) > MASS_TOL:
            raise MeasureError(f"total mass {mass} != 1")

    def has_density(self):
        return self.fn is not None or self._tab is not None

    def density_at(self, theta):
        theta = np.asarray(theta, dtype=float) % (2 * np.pi)
        if self._tab is not None:
            out = self._tab(theta)
            return np.where(np.isnan(out), 0.0, out)
        if self.fn is not None:
            return np.asarray([self.fn(t) for t in np.atleast_1d(theta)]
                              ).reshape(theta.shape)
        return np.zeros(theta.shape)

    def total_mass(self):
        m = float(self.atom_weights.sum())
        if self.has_density():
            if self.metadata.get("name") in ("haar", "poisson", "uniform_arc"):
                return m + 1.0  # normalized families
            if self._tab is not None:
                # exact integral of the interpolant (spiky tables included)
                m += float(self._tab.integrate(0.0, 2 * np.pi)) / (2 * np.pi)
            else:
                th = np.linspace(0, 2 * np.pi, 4097)[:-1]
                m += float(np.mean(self.density_at(th)))
        return m

    # -- moments and transforms -------------------------------------------

    def moment(self, n):
        r"""Moment :math:`m_n = \int_T x^n \mu(dx)` (complex), any n in Z."""
        if n == 0:
            return complex(self.total_mass())
        if n < 0:
            return np.conj(self.moment(-n))
        name = self.metadata.get("name")
        if name == "haar":
            return 0j
        if name == "poisson":
            c = self.metadata["params"]["c"]
            return complex(c) ** n
        if name == "uniform_arc":
            lo = self.metadata["params"]["lo"]
            hi = self.metadata["params"]["hi"]
            return (np.exp(1j * n * hi) - np.exp(1j * n * lo)) \
                / (1j * n * (hi - lo))
        mom = complex(np.sum(self.atom_weights
                             * np.exp(1j * n * self.atom_angles)))
        if self.has_density():
            mom += self._density_moments(max(n, 256))[n]
        return mom

    def _density_moments(self, nmax):
        spec = self._moment_cache.get("spec")
        if spec is None or len(spec) < 4 * nmax:
            M = max(8192, 4 * nmax)
            th = np.linspace(0, 2 * np.pi, M, endpoint=False)
            d = self.density_at(th)
            # m_n = (1/2pi) int e^{i n th} d(th) dth; np.fft.ifft computes
            # (1/M) sum_j d_j e^{2 pi i j n / M}, matching e^{i n th_j}
            spec = np.fft.ifft(d)
            self._moment_cache["spec"] = spec
        out = np.zeros(nmax + 1, dtype=complex)
        upto = min(nmax, len(spec) - 1)
        out[:upto + 1] = spec[:upto + 1]
        return out

    def psi(self, z):
        r"""Moment generating function :math:`\psi(z)=\int xz/(1-xz)\,\mu(dx)`."""
        z = np.asarray(z, dtype=complex)
        val = np.zeros(z.shape, dtype=complex)
        x = np.exp(1j * self.atom_angles)
        for xj, w in zip(x, self.atom_weights):
            val = val + w * xj * z / (1 - xj * z)
        if self.has_density():
            val = val + self._psi_density(z, derivative=False)
        return val if val.shape else complex(val)

    def psi_prime(self, z):
        z = np.asarray(z, dtype=complex)
        val = np.zeros(z.shape, dtype=complex)
        x = np.exp(1j * self.atom_angles)
        for xj, w in zip(x, self.atom_weights):
            val = val + w * xj / (1 - xj * z) ** 2
        if self.has_density():
            val = val + self._psi_density(z, derivative=True)
        return val if val.shape else complex(val)

    def _psi_density(self, z, derivative):
        name = self.metadata.get("name")
        if name == "haar" and not len(self.atom_angles):
            return np.zeros(np.shape(z), dtype=complex)
        if name == "poisson":
            c = complex(self.metadata["params"]["c"])
            if not derivative:
                return c * z / (1 - c * z)
            return c / (1 - c * z) ** 2
        if name == "uniform_arc":
            return self._psi_series(z, derivative,
                                    lambda n: complex(self.moment(n)))
        r = float(np.max(np.abs(z))) if np.size(z) else 0.0
        if r >= 0.999:
            raise MeasureError("psi of a raw density this close to the "
                               "boundary; use transform-level objects")
        n = max(64, int(np.ceil(np.log(1e-16) / np.log(max(r, 1e-6)))))
        n = min(n, 60000)
        mom = self._density_moments(n)
        return self._psi_series(z, derivative, lambda k: mom[k], n)

    def _psi_series(self, z, derivative, mom_at, n=None):
        if n is None:
            r = float(np.max(np.abs(z))) if np.size(z) else 0.0
            n = max(64, int(np.ceil(np.log(1e-16) / np.log(max(r, 1e-6)))))
            n = min(n, 60000)
        val = np.zeros(np.shape(z), dtype=complex)
        # Horner in z (moment series sum_{k>=1} m_k z^k)
        for k in range(n, 0, -1):
            if derivative:
                val = val * z + k * mom_at(k)
            else:
                val = val * z + mom_at(k)
        if not derivative:
            val = val * z
        return val

    def eta(self, z):
        psi = self.psi(z)
        return psi / (1 + psi)

    def arc_mass(self, lo, hi):
        """Mass of the arc {e^{i theta}: lo <= theta <= hi} (mod 2pi)."""
        lo_m = lo % (2 * np.pi)
        width = hi - lo
        if width >= 2 * np.pi - 1e-15:
            return self.total_mass()
        m = 0.0
        rel = (self.atom_angles - lo_m) % (2 * np.pi)
        m += float(self.atom_weights[(rel <= width) | (rel >= 2 * np.pi - 1e-12)].sum())
        if self.has_density():
            if self._tab is not None:
                hi_m = lo_m + width
                if hi_m <= 2 * np.pi:
                    val = self._tab.integrate(lo_m, hi_m)
                else:
                    val = self._tab.integrate(lo_m, 2 * np.pi) \
                        + self._tab.integrate(0.0, hi_m - 2 * np.pi)
                m += float(val) / (2 * np.pi)
            else:
                th = np.linspace(0, width, 2049)
                vals = self.density_at(lo_m + th)
                m += float(np.trapezoid(vals, th) / (2 * np.pi))
        return m

    def sample(self, seed, n):
        """n i.i.d. angle draws in [0, 2pi)."""
        if n < 1:
            raise MeasureError("need n >= 1")
        rng = as_rng(seed)
        dens_mass = max(self.total_mass() - self.atom_weights.sum(), 0.0)
        weights = np.concatenate([self.atom_weights, [dens_mass]])
        weights = weights / weights.sum()
        comp = rng.choice(len(weights), size=n, p=weights)
        out = np.empty(n)
        for i in range(len(self.atom_angles)):
            out[comp == i] = self.atom_angles[i]
        idx = comp == len(self.atom_angles)
        k = int(idx.sum())
        if k:
            th = np.linspace(0, 2 * np.pi, 4097)
            vals = self.density_at(th[:-1])
            vals = np.concatenate([vals, [vals[0]]])
            seg = Segment(0.0, 2 * np.pi, grid=th, values=np.clip(vals, 0, None))
            out[idx] = _sample_segment(seg, rng.random(k))
        return out

    def to_json_dict(self):
        d = {"side": "T",
             "atoms": [{"x": float(t), "w": float(w)}
                       for t, w in zip(self.atom_angles, self.atom_weights)]}
        name = self.metadata.get("name")
        if name in ("haar", "poisson", "uniform_arc"):
            params = dict(self.metadata.get("params", {}))
            if name == "poisson":
                c = complex(params["c"])
                params = {"c_re": c.real, "c_im": c.imag}
            d["density"] = {"kind": "named", "name": name, "params": params}
        elif self.has_density():
            th = self.grid if self._tab is not None \
                else np.linspace(0, 2 * np.pi, 2049)[:-1]
            d["density"] = {"kind": "tabulated", "grid": th.tolist(),
                            "values": self.density_at(th).tolist()}
        else:
            d["density"] = None
        return d

    @staticmethod
    def from_json_dict(d):
        atoms = [(a["x"], a["w"]) for a in d.get("atoms", [])]
        dens = d.get("density")
        if dens is None:
            return CircleMeasure(atoms)
        if dens["kind"] == "named":
            if atoms:
                raise MeasureError("named circle density with atoms "
                                   "not supported in JSON spec")
            return make_named(dens["name"], dens.get("params", {}))
        return CircleMeasure(atoms, grid=np.asarray(dens["grid"]),
                             values=np.asarray(dens["values"]))

    def __repr__(self):
        tag = self.metadata.get("name", "")
        return (f"CircleMeasure(atoms={len(self.atom_angles)}, "
                f"density={self.has_density()}"
                + (f", {tag!r}" if tag else "") + ")")


def haar():
    return CircleMeasure([], density=lambda th: 1.0, metadata={"name": "haar"})


def circle_point_mass(theta):
    return CircleMeasure([(theta, 1.0)],
                         metadata={"name": "cpoint", "params": {"theta": theta}})


def poisson_kernel(c):
    """Poisson kernel P_c, the measure with eta(z) = c z (|c| < 1)."""
    c = complex(c)
    if abs(c) >= 1:
        raise MeasureError("need |c| < 1")
    if c == 0:
        return haar()

    def dens(th):
        return (1 - abs(c) ** 2) / abs(1 - np.conj(c) * np.exp(1j * th)) ** 2

    return CircleMeasure([], density=dens,
                         metadata={"name": "poisson", "params": {"c": c}})


def circle_uniform_arc(lo=0.0, hi=np.pi):
    lo, hi = float(lo), float(hi)
    width = hi - lo
    if not 0 < width <= 2 * np.pi:
        raise MeasureError("bad arc")

    def dens(th):
        rel = (th - lo) % (2 * np.pi)
        return 2 * np.pi / width if rel <= width else 0.0

    return CircleMeasure([], density=dens,
                         metadata={"name": "uniform_arc",
                                   "params": {"lo": lo, "hi": hi}})


def circle_from_table(grid, values, atoms=(), renormalize=False):
    return CircleMeasure(atoms, grid=grid, values=values,
                         renormalize=renormalize)


_NAMED_CIRCLE = {
    "haar": lambda p: haar(),
    "cpoint": lambda p: circle_point_mass(p["theta"]),
    "poisson": lambda p: poisson_kernel(
        complex(p["c"]) if "c" in p else p.get("c_re", 0.0) + 1j * p.get("c_im", 0.0)),
    "uniform_arc": lambda p: circle_uniform_arc(p.get("lo", 0.0),
                                                p.get("hi", np.pi)),
}


def is_haar(m):
    if m.metadata.get("name") == "haar":
        return True
    if len(m.atom_angles) or not m.has_density():
        return False
    zs = 0.3 * np.exp(1j * np.linspace(0.1, 5.9, 7))
    return bool(np.max(np.abs(m.psi(zs))) < 1e-9)


# ---------------------------------------------------------------------------
# weak-convergence distance
# ---------------------------------------------------------------------------

class WeakDistance(float):
    """Levy / Levy-Prokhorov distance value with its grid resolution."""

    def __new__(cls, value, resolution):
        obj = float.__new__(cls, value)
        obj.resolution = resolution
        return obj

    @property
    def value(self):
        return float(self)


def _levy_from_cdfs(cdf_a, cdf_b, lo, hi, n):
    xs = np.linspace(lo, hi, n)
    span = hi - lo

    def ok(eps):
        fa_hi = cdf_a(xs + eps) + eps
        fa_lo = cdf_a(xs - eps) - eps
        fb = cdf_b(xs)
        return np.all(fb <= fa_hi + 1e-15) and np.all(fb >= fa_lo - 1e-15)

    lo_e, hi_e = 0.0, max(span, 1.0)
    if ok(0.0):
        return WeakDistance(0.0, span / n)
    for _ in range(45):
        mid = 0.5 * (lo_e + hi_e)
        if ok(mid):
            hi_e = mid
        else:
            lo_e = mid
    return WeakDistance(hi_e, span / n)


def levy_distance(a, b, n=4001):
    """Levy metric between two measures (grid approximation).

    On the circle the CDFs of the angle in [0, 2pi) are compared, which
    realizes a Levy-Prokhorov-type distance for the angle variable.
    """
    if isinstance(a, CircleMeasure) != isinstance(b, CircleMeasure):
        raise MeasureError("cannot mix R and T measures")
    if isinstance(a, CircleMeasure):
        def cdf_of(m):
            def cdf(x):
                x = np.clip(np.asarray(x, dtype=float), 0.0, 2 * np.pi)
                out = np.zeros(x.shape)
                for t, w in zip(m.atom_angles, m.atom_weights):
                    out += w * (x >= t)
                if m.has_density():
                    th = np.linspace(0, 2 * np.pi, 2048)
                    dens = m.density_at(th)
                    cums = np.concatenate(
                        [[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2
                                          * np.diff(th))]) / (2 * np.pi)
                    out += np.interp(x, th, cums)
                return out
            return cdf
        return _levy_from_cdfs(cdf_of(a), cdf_of(b), 0.0, 2 * np.pi, n)
    lo = min(a.support()[0], b.support()[0])
    hi = max(a.support()[1], b.support()[1])
    pad = 0.05 * (hi - lo + 1.0)
    return _levy_from_cdfs(a.cdf, b.cdf, lo - pad, hi + pad, n)


def exact_moments(m, N):
    """Moments m_1..m_N as Fractions when the representation allows it.

    Atomic measures and the named families (semicircle, arcsine, uniform,
    free Poisson) have rational moments in their (binary-float) parameters;
    everything else falls back to float quadrature.
    """
    from fractions import Fraction
    from math import comb
    name = m.metadata.get("name") if hasattr(m, "metadata") else None
    p = m.metadata.get("params", {}) if name else {}

    def central_even(name, v, k):
        if name == "semicircle":  # Catalan numbers
            return Fraction(comb(2 * k, k), k + 1) * v ** k
        return Fraction(comb(2 * k, k), 2 ** k) * v ** k  # arcsine

    if isinstance(m, RealMeasure) and not m.segments:
        locs = [Fraction(x) for x in m.atom_locs]
        ws = [Fraction(w) for w in m.atom_weights]
        return [sum(w * x ** n for x, w in zip(locs, ws))
                for n in range(1, N + 1)]
    if name in ("semicircle", "arcsine"):
        mean, v = Fraction(p["mean"]), Fraction(p["var"])
        cents = [central_even(name, v, k) for k in range(N // 2 + 1)]
        out = []
        for n in range(1, N + 1):
            val = Fraction(0)
            for i in range(0, n + 1, 2):
                val += comb(n, i) * cents[i // 2] * mean ** (n - i)
            out.append(val)
        return out
    if name == "uniform":
        a, b = Fraction(p["a"]), Fraction(p["b"])
        return [(b ** (n + 1) - a ** (n + 1)) / ((n + 1) * (b - a))
                for n in range(1, N + 1)]
    if name == "mp":
        lam = Fraction(p["lam"])
        out = []
        for n in range(1, N + 1):
            val = Fraction(0)
            for k in range(1, n + 1):
                val += Fraction(comb(n, k) * comb(n, k - 1), n) * lam ** k
            out.append(val)
        return out
    return [m.moment(n) for n in range(1, N + 1)]


def measure_to_json(m):
    return json.dumps(m.to_json_dict(), indent=1)


def measure_from_json(text):
    d = json.loads(text) if isinstance(text, str) else text
    if d.get("side", "R") == "T":
        return CircleMeasure.from_json_dict(d)
    return RealMeasure.from_json_dict(d)
