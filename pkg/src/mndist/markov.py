r"""Homogeneous Markov transition kernels from Loewner transition maps.

Additive kernels satisfy

.. math:: \int \frac{k_{st}(x, dy)}{z-y} = \frac{1}{F_{st}(z) - x},

i.e. the kernel at x is the monotone shift ``delta_x |> k_{st}(0,.)``;
multiplicative kernels satisfy ``psi_{k_st(x,.)}(z) = eta_st(z) x /
(1 - eta_st(z) x)``.  Kernels are materialized lazily (inversion is the
cost center); chains with closed-form kernels register fast density
formulas and samplers.
"""

from dataclasses import dataclass

import numpy as np

from . import loewner as lw
from . import measures as ms
from . import transforms as tr
from ._util import as_rng, graded_grid, quad_real, richardson


class KernelError(RuntimeError):
    pass


@dataclass
class MarkovPath:
    times: np.ndarray
    states: np.ndarray  # shape (n_times,) floats (reals or angles)
    seed: object = None


class TransitionKernel:
    """Family k_st(x, .) driven by a Loewner transition-map family.

    Parameters
    ----------
    side : 'additive' or 'multiplicative'
    transition : callable (s, t) -> vectorized map (F_st or eta_st)
    kernel_fn : optional callable (s, t, x) -> measure, closed form
    sampler : optional callable (rng, s, t, states) -> next states
    """

    def __init__(self, side, transition, kernel_fn=None, sampler=None,
                 tag=""):
        if side not in ("additive", "multiplicative"):
            raise KernelError("side must be additive|multiplicative")
        self.side = side
        self._transition = transition
        self._kernel_fn = kernel_fn
        self._sampler = sampler
        self.tag = tag

    def transition_map(self, s, t):
        kind = "F" if self.side == "additive" else "eta"
        dom = "H" if self.side == "additive" else "D"
        fn = self._transition(s, t)
        return tr.AnalyticMap(fn, dom, kind)

    def kernel(self, s, t, x, **invert_kwargs):
        """Materialize k_st(x, .) (closed form if available)."""
        if not 0 <= s <= t:
            raise KernelError("need 0 <= s <= t")
        if s == t:
            return (ms.point_mass(x) if self.side == "additive"
                    else ms.circle_point_mass(x))
        if self._kernel_fn is not None and not invert_kwargs.pop(
                "force_numeric", False):
            return self._kernel_fn(s, t, x)
        fn = self._transition(s, t)
        if self.side == "additive":
            return tr.stieltjes_invert(
                lambda z: 1.0 / (fn(z) - x), **invert_kwargs)
        xx = np.exp(1j * x)

        def psi(z):
            e = fn(z)
            return e * xx / (1 - e * xx)

        return tr.herglotz_invert(psi, **invert_kwargs)

    # -- sampling ----------------------------------------------------------

    def sample_step(self, rng, s, t, states):
        states = np.asarray(states, dtype=float)
        if s == t:
            return states.copy()
        if self._sampler is not None:
            return self._sampler(rng, s, t, states)
        if self.side == "additive":
            return _generic_additive_step(self, rng, s, t, states)
        return _generic_mult_step(self, rng, s, t, states)

    def sample_paths(self, times, seed, n_paths):
        """Markov paths at ``times`` (sorted, starting at 0); states start
        at 0 (resp. angle 0).  Deterministic given the seed."""
        times = np.asarray(times, dtype=float)
        if np.any(np.diff(times) < 0) or times[0] != 0.0:
            raise KernelError("times must be sorted and start at 0")
        rng = as_rng(seed)
        states = np.zeros((len(times), n_paths))
        for i in range(1, len(times)):
            states[i] = self.sample_step(rng, times[i - 1], times[i],
                                         states[i - 1])
        return states

    def sample_path(self, times, seed):
        states = self.sample_paths(times, seed, 1)[:, 0]
        return MarkovPath(np.asarray(times, dtype=float), states, seed)


def _sample_rows(rng, grid, dens_rows):
    """One draw per row from tabulated densities on a common grid."""
    cdf = np.cumsum((dens_rows[:, 1:] + dens_rows[:, :-1]) / 2
                    * np.diff(grid), axis=1)
    cdf = np.concatenate([np.zeros((len(dens_rows), 1)), cdf], axis=1)
    total = cdf[:, -1]
    u = rng.random(len(dens_rows)) * total
    idx = np.array([np.searchsorted(cdf[i], u[i]) - 1
                    for i in range(len(dens_rows))])
    idx = np.clip(idx, 0, len(grid) - 2)
    rows = np.arange(len(dens_rows))
    frac = (u - cdf[rows, idx]) / np.maximum(cdf[rows, idx + 1]
                                             - cdf[rows, idx], 1e-300)
    return grid[idx] + frac * (grid[idx + 1] - grid[idx])


def _generic_additive_step(tk, rng, s, t, states, n_grid=1024, eps=1e-6):
    """MC-grade vectorized step: smoothed density rows + boundary atoms.

    The transition map is evaluated once on a y-grid; each state's kernel
    density row is then algebraic in F.  Atoms (roots of F = x outside the
    band) are found by bisection on the real axis.
    """
    fn = tk._transition(s, t)
    probe = fn(np.asarray([1j * y for y in (4.0, 16.0, 64.0)]))
    m1 = float((1j * 64.0 - probe[2]).real)
    lo = min(states.min(), m1) - 1.0
    hi = max(states.max(), m1) + 1.0
    width = max(hi - lo, 1.0)
    grid = np.linspace(lo - 3 * width, hi + 3 * width, n_grid)
    Fg = fn(grid + 1j * eps)
    dens = -(1.0 / (Fg[None, :] - states[:, None])).imag / np.pi
    dens = np.clip(dens, 0.0, None)
    # boundary atoms: F real and increasing outside the spectral band
    out = np.empty_like(states)
    atom_mass = np.zeros_like(states)
    atom_loc = np.zeros_like(states)
    xs = np.linspace(lo - 50 * width, hi + 50 * width, 4096)
    Fx = fn(xs + 1j * 1e-9)
    real_axis = np.abs(Fx.imag) < 1e-6
    for i, x in enumerate(states):
        sign = np.sign(Fx.real - x)
        flips = np.where(real_axis[:-1] & real_axis[1:]
                         & (sign[:-1] * sign[1:] < 0))[0]
        if len(flips):
            j = flips[0]
            a, b = xs[j], xs[j + 1]
            for _ in range(60):
                mid = 0.5 * (a + b)
                if (complex(fn(np.asarray(mid + 1e-9j))).real - x) \
                        * (complex(fn(np.asarray(a + 1e-9j))).real - x) > 0:
                    a = mid
                else:
                    b = mid
            alpha = 0.5 * (a + b)
            h = 1e-6
            fp = (complex(fn(np.asarray(alpha + h + 1e-9j)))
                  - complex(fn(np.asarray(alpha - h + 1e-9j)))).real / (2 * h)
            if fp > 1e-12:
                atom_loc[i] = alpha
                atom_mass[i] = min(max(1.0 / fp, 0.0), 1.0)
    u = rng.random(len(states))
    take_atom = u < atom_mass
    draws = _sample_rows(rng, grid, dens)
    out = np.where(take_atom, atom_loc, draws)
    return out


def _generic_mult_step(tk, rng, s, t, states, n_grid=1024, eps=None):
    # the smoothing radius must stay resolvable on the theta grid or the
    # Poisson bumps of kernel atoms fall between the nodes and lose mass
    if eps is None:
        eps = 2 * (2 * np.pi / n_grid)
    fn = tk._transition(s, t)
    thetas = np.linspace(0, 2 * np.pi, n_grid, endpoint=False)
    eta = fn((1 - eps) * np.exp(-1j * thetas))
    x = np.exp(1j * states)
    psi = eta[None, :] * x[:, None] / (1 - eta[None, :] * x[:, None])
    dens = np.clip((2 * psi + 1).real, 0.0, None)
    th = np.concatenate([thetas, [2 * np.pi]])
    dens = np.concatenate([dens, dens[:, :1]], axis=1)
    return _sample_rows(rng, th, dens)


# ---------------------------------------------------------------------------
# kernel factories
# ---------------------------------------------------------------------------

def additive_semigroup_kernel(pair, rtol=1e-11):
    """Stationary additive kernel from a generating pair (F_st = F_{t-s})."""
    def transition(s, t):
        return lambda z: lw.evolve_additive(pair, t - s, z, rtol, rtol)

    return TransitionKernel("additive", transition, tag="additive-semigroup")


def mult_semigroup_kernel(pair, rtol=1e-11):
    def transition(s, t):
        return lambda z: lw.evolve_mult(pair, t - s, z, rtol, rtol)

    return TransitionKernel("multiplicative", transition,
                            tag="multiplicative-semigroup")


def field_kernel(fld):
    """Kernel of a (possibly time-dependent) Loewner chain."""
    side = "additive" if fld.side == "H" else "multiplicative"

    def transition(s, t):
        return lambda z: lw.loewner_transition(fld, s, t, z)

    return TransitionKernel(side, transition, tag="field")


def shift_kernel(gamma):
    """Deterministic chain F_st = z - gamma (t-s)."""
    def transition(s, t):
        return lambda z: np.asarray(z, dtype=complex) - gamma * (t - s)

    def kernel_fn(s, t, x):
        return ms.point_mass(x + gamma * (t - s))

    def sampler(rng, s, t, states):
        return states + gamma * (t - s)

    return TransitionKernel("additive", transition, kernel_fn, sampler,
                            tag="shift")


def arcsine_kernel(rate=1.0):
    r"""The arcsine chain: pair (0, rate * delta_0), F_t = sqrt(z^2 - 2 r t).

    Closed-form kernels: density
    ``sqrt(2 tau - y^2) / (pi (x^2 - y^2 + 2 tau))`` on ``(-sqrt(2 tau),
    sqrt(2 tau))`` plus an atom of mass ``|x|/sqrt(x^2 + 2 tau)`` at
    ``sign(x) sqrt(x^2 + 2 tau)``, where ``tau = rate*(t-s)``.
    """
    c = float(rate)

    def transition(s, t):
        tau = c * (t - s)

        def fn(z):
            from ._util import sqrt_poscut
            return sqrt_poscut(np.asarray(z, complex) ** 2 - 2 * tau)

        return fn

    def kernel_fn(s, t, x):
        tau = c * (t - s)
        r = np.sqrt(2 * tau)

        def dens(y):
            s2 = 2 * tau - y * y
            return np.sqrt(s2) / (np.pi * (x * x - y * y + 2 * tau)) \
                if s2 > 0 else 0.0

        atoms = []
        if x != 0:
            atoms = [(np.sign(x) * np.sqrt(x * x + 2 * tau),
                      abs(x) / np.sqrt(x * x + 2 * tau))]
        seg = ms.Segment(-r, r, density=dens)
        return ms.RealMeasure(atoms, [seg],
                              metadata={"name": "arcsine_kernel",
                                        "params": {"x": x, "tau": tau}})

    def sampler(rng, s, t, states):
        tau = c * (t - s)
        n = len(states)
        out = np.empty(n)
        amass = np.abs(states) / np.sqrt(states ** 2 + 2 * tau)
        take_atom = rng.random(n) < amass
        out[take_atom] = (np.sign(states) * np.sqrt(states ** 2 + 2 * tau)
                          )[take_atom]
        todo = np.where(~take_atom)[0]
        while len(todo):
            y = np.sqrt(2 * tau) * np.sin(np.pi * (rng.random(len(todo)) - 0.5))
            acc = (2 * tau - y ** 2) / (states[todo] ** 2 + 2 * tau - y ** 2)
            ok = rng.random(len(todo)) < acc
            out[todo[ok]] = y[ok]
            todo = todo[~ok]
        return out

    return TransitionKernel("additive", transition, kernel_fn, sampler,
                            tag="arcsine")


def free_semicircle_kernel():
    r"""Kernel of the free-Levy semicircle subordination chain.

    ``F_{nu_st}(z) = (1/2)(1+s/t) z + (1/2)(1-s/t) sqrt(z^2-4t)``; the
    closed-form kernels carry the density
    ``(t-s)/(2 pi) sqrt(4t-y^2)/((sy-tx)(y-x)+(t-s)^2)`` on [-2 sqrt(t),
    2 sqrt(t)] and, for ``|x| > (t+s)/sqrt(t)``, an atom.
    """
    def transition(s, t):
        def fn(z):
            from ._util import sqrt_poscut
            z = np.asarray(z, dtype=complex)
            return 0.5 * (1 + s / t) * z \
                + 0.5 * (1 - s / t) * sqrt_poscut(z * z - 4 * t)

        return fn

    def kernel_fn(s, t, x):
        r = 2 * np.sqrt(t)

        def dens(y):
            s2 = 4 * t - y * y
            if s2 <= 0:
                return 0.0
            den = (s * y - t * x) * (y - x) + (t - s) ** 2
            return (t - s) / (2 * np.pi) * np.sqrt(s2) / den

        atoms = []
        if abs(x) > (t + s) / np.sqrt(t) + 1e-14:
            if s > 0:
                root = np.sqrt(x * x - 4 * s)
                a = ((t + s) * x - np.sign(x) * (t - s) * root) / (2 * s)
                lam = (t + s - abs(x) * (t - s) / root) / (2 * s)
            else:
                a = x + t / x
                lam = 1 - t / (x * x)
            atoms = [(a, lam)]
        seg = ms.Segment(-r, r, density=dens)
        return ms.RealMeasure(atoms, [seg],
                              metadata={"name": "semicircle_kernel",
                                        "params": {"x": x, "s": s, "t": t}})

    return TransitionKernel("additive", transition, kernel_fn,
                            tag="free-semicircle")


def haar_jump_kernel():
    """The B(z) = z - 1 multiplicative chain, k_t(1,.) = (1-e^-t) Haar +
    e^-t delta_1."""
    def transition(s, t):
        q = np.exp(-(t - s))

        def fn(z):
            z = np.asarray(z, dtype=complex)
            return q * z / (1 - (1 - q) * z)

        return fn

    def kernel_fn(s, t, x):
        tau = t - s
        if abs(x % (2 * np.pi)) < 1e-14:
            return ms.CircleMeasure(
                [(0.0, np.exp(-tau))],
                density=lambda th: 1 - np.exp(-tau),
                metadata={"name": "haar_jump", "params": {"tau": tau}})
        xx = np.exp(1j * x)
        et = np.exp(tau)

        def dens(th):
            z = np.exp(-1j * th)
            psi = xx * z / (et - (et + xx - 1) * z)
            return float((2 * psi + 1).real)

        return ms.CircleMeasure([], density=dens)

    def sampler(rng, s, t, states, n_grid=512):
        # at angle 0 the kernel is e^-tau delta_1 + (1-e^-tau) Haar; at
        # other states it is a closed-form density against Haar
        tau = t - s
        q = np.exp(-tau)
        out = np.empty_like(states)
        wrapped = np.mod(states, 2 * np.pi)
        at_one = np.minimum(wrapped, 2 * np.pi - wrapped) < 1e-12
        u = rng.random(len(states))
        stay = at_one & (u < q)
        jump = at_one & ~stay
        out[stay] = states[stay]
        out[jump] = rng.uniform(0, 2 * np.pi, int(jump.sum()))
        rest = ~at_one
        if np.any(rest):
            th = np.linspace(0, 2 * np.pi, n_grid + 1)
            z = np.exp(-1j * th)[None, :]
            xx = np.exp(1j * states[rest])[:, None]
            psi = xx * z / (np.exp(tau) - (np.exp(tau) + xx - 1) * z)
            rows = np.clip((2 * psi + 1).real, 0.0, None)
            out[rest] = _sample_rows(rng, th, rows)
        return out

    return TransitionKernel("multiplicative", transition, kernel_fn, sampler,
                            tag="haar-jump")


# ---------------------------------------------------------------------------
# kernel materialization entry points (spec operations)
# ---------------------------------------------------------------------------

def kernel_additive(tk, s, t, x, **kw):
    if tk.side != "additive":
        raise KernelError("kernel_additive needs an additive chain")
    return tk.kernel(s, t, x, **kw)


def kernel_mult(tk, s, t, x, **kw):
    if tk.side != "multiplicative":
        raise KernelError("kernel_mult needs a multiplicative chain")
    return tk.kernel(s, t, x, **kw)


def sample_path(tk, times, seed):
    return tk.sample_path(times, seed)


# ---------------------------------------------------------------------------
# Hunt generators
# ---------------------------------------------------------------------------

@dataclass
class TestFunction:
    """C^2 test function with explicit first two derivatives."""

    f: callable
    fp: callable
    fpp: callable


def _dxd(f, fp, fpp, x, y, window):
    """(d_x d f)(x, y), switching to the Taylor form inside the window."""
    h = y - x
    if abs(h) < window:
        # 0.5 f''(x + h/3) matches the expansion through first order in h
        return 0.5 * fpp(x + h / 3.0)
    return (f(y) - f(x) - h * fp(x)) / (h * h)


def hunt_apply_additive(pair, fn, x, window=1e-3):
    r"""Hunt generator ``(Gf)(x) = gamma f'(x) + int [(1+y^2)
    (d_x d f)(x,y) + y f'(x)] rho(dy)``."""
    f, fp, fpp = fn.f, fn.fp, fn.fpp
    val = pair.gamma * fp(x)
    rho = pair.rho
    for y, w in zip(rho.atom_locs, rho.atom_weights):
        val += w * ((1 + y * y) * _dxd(f, fp, fpp, x, y, window)
                    + y * fp(x))
    for seg in rho.segments:
        val += quad_real(
            lambda y: seg.pdf(np.asarray(y))
            * ((1 + y * y) * _dxd(f, fp, fpp, x, y, window) + y * fp(x)),
            seg.a, seg.b, points=[x], epsabs=1e-11)
    return val


def _dtd_circle(f, fp, fpp, th, ph, window):
    """(d_theta delta f)(theta, phi) with the diagonal convention f''."""
    h = (ph - th + np.pi) % (2 * np.pi) - np.pi  # wrapped difference
    if abs(h) < window:
        return fpp(th + h / 3.0) + (h / 3.0) * fp(th)
    return (f(ph) - f(th) - np.sin(ph - th) * fp(th)) \
        / (1 - np.cos(th - ph))


def hunt_apply_mult(pair, fn, theta, window=1e-3):
    r"""Hunt generator on the circle:
    ``(Gf)(theta) = alpha f'(theta) + int (d_theta delta f)(theta, phi)
    rho(dphi)``."""
    f, fp, fpp = fn.f, fn.fp, fn.fpp
    val = pair.alpha * fp(theta)
    rho = pair.rho
    for ph, w in zip(rho.atom_angles, rho.atom_weights):
        val += w * _dtd_circle(f, fp, fpp, theta, ph, window)
    if rho.has_density():
        val += quad_real(
            lambda ph: float(rho.density_at(np.asarray(ph)))
            * _dtd_circle(f, fp, fpp, theta, ph, window),
            0.0, 2 * np.pi, points=[theta % (2 * np.pi)],
            epsabs=1e-11) / (2 * np.pi)
    return val


def _integrate_against(measure, f):
    val = 0.0
    if isinstance(measure, ms.CircleMeasure):
        for th, w in zip(measure.atom_angles, measure.atom_weights):
            val += w * f(th)
        if measure.has_density():
            val += quad_real(
                lambda th: float(measure.density_at(np.asarray(th))) * f(th),
                0.0, 2 * np.pi, epsabs=1e-10) / (2 * np.pi)
        return val
    for x, w in zip(measure.atom_locs, measure.atom_weights):
        val += w * f(x)
    for seg in measure.segments:
        val += quad_real(lambda y: float(seg.pdf(np.asarray(y))) * f(y),
                         seg.a, seg.b, epsabs=1e-10)
    return val


def generator_vs_semigroup(tk, pair, fn, x, h_ladder=None):
    """Finite-difference check |(T_h f - f)/h - Gf| over an h-ladder.

    Returns (deviations, slope): the observed log-log regression slope of
    the deviation, which should be about 1 (first order in h).
    """
    if h_ladder is None:
        h_ladder = 2.0 ** -np.arange(3, 9)
    if tk.side == "additive":
        gf = hunt_apply_additive(pair, fn, x)
    else:
        gf = hunt_apply_mult(pair, fn, x)
    devs = []
    for h in h_ladder:
        ker = tk.kernel(0.0, h, x)
        tf = _integrate_against(ker, fn.f)
        devs.append(abs((tf - fn.f(x)) / h - gf))
    devs = np.asarray(devs)
    slope = np.polyfit(np.log(h_ladder), np.log(np.maximum(devs, 1e-300)),
                       1)[0]
    return devs, slope


def feller_resolvent_deviation(tk, z, x, h_ladder=None):
    """|T_h r_z(x) - r_z(x)| for resolvents r_z = 1/(z - .), exact in F."""
    if h_ladder is None:
        h_ladder = 2.0 ** -np.arange(2, 10)
    out = []
    for h in h_ladder:
        F = tk.transition_map(0.0, h)
        out.append(abs(1.0 / (complex(F(np.asarray(z))) - x)
                       - 1.0 / (z - x)))
    return np.asarray(out)


# ---------------------------------------------------------------------------
# martingale check
# ---------------------------------------------------------------------------

def martingale_check(tk, z, times, n_paths, seed):
    r"""Empirical flatness of ``E[N_t^z]`` for the resolvent martingale.

    Additive: ``N_t = 1/(F_t^{-1}(z) - M_t)``; multiplicative:
    ``N_t = eta_t^{-1}(z) M_t / (1 - eta_t^{-1}(z) M_t)``.  Returns a dict
    with per-time deviations |mean - N_0| and Monte-Carlo standard errors.
    """
    times = np.asarray(times, dtype=float)
    t_max = times[-1]
    Fmax = tk.transition_map(0.0, t_max)
    guess = z if tk.side == "additive" else 0.5 * z
    try:
        w_probe = tr.newton_inverse(lambda w: Fmax(np.asarray(w)), z, guess,
                                    tol=1e-10)
        inside = w_probe.imag > 1e-10 if tk.side == "additive" \
            else abs(w_probe) < 1 - 1e-12
        if not inside:
            raise tr.NoConvergenceError("preimage left the domain")
    except tr.NoConvergenceError as exc:
        raise KernelError(f"z={z} outside the range of the chain at "
                          f"t={t_max}") from exc
    paths = tk.sample_paths(times, seed, n_paths)
    devs, ses, means = [], [], []
    for i, t in enumerate(times):
        if t == 0:
            w = z
        else:
            F = tk.transition_map(0.0, t)
            w = tr.newton_inverse(lambda u: F(np.asarray(u)), z, guess,
                                  tol=1e-10)
        if tk.side == "additive":
            vals = 1.0 / (w - paths[i])
            n0 = 1.0 / z
        else:
            mt = np.exp(1j * paths[i])
            vals = w * mt / (1 - w * mt)
            n0 = z / (1 - z)
        mean = vals.mean()
        se = np.sqrt(vals.real.var() + vals.imag.var()) / np.sqrt(n_paths)
        devs.append(abs(mean - n0))
        ses.append(se)
        means.append(mean)
    return {"times": times, "deviation": np.asarray(devs),
            "stderr": np.asarray(ses), "means": np.asarray(means)}


# ---------------------------------------------------------------------------
# free subordination kernels
# ---------------------------------------------------------------------------

def subordination_kernel_additive(free_F_family, s, t):
    """F_{nu_st}(z) = (s/t) z + (1 - s/t) F_{mu_t}(z) for a stationary free
    semigroup given by ``free_F_family(t) -> vectorized F_{mu_t}``."""
    if s == t:
        return tr.identity_map("H")
    Ft = free_F_family(t)

    def fn(z):
        z = np.asarray(z, dtype=complex)
        return (s / t) * z + (1 - s / t) * Ft(z)

    return tr.AnalyticMap(fn, "H", "F")


def subordination_kernel_mult(free_eta_family, s, t, n_branch_steps=32):
    r"""eta_{nu_st}(z) = z (eta_{mu_t}(z)/z)^{1-s/t}, branch fixed by
    continuity from z = 0 where the ratio tends to m_1(mu_t)."""
    if s == t:
        return tr.identity_map("D")
    eta_t = free_eta_family(t)
    expo = 1.0 - s / t

    def fn(z):
        z = np.asarray(z, dtype=complex)
        flat = np.atleast_1d(z).ravel()
        out = np.empty(flat.shape, dtype=complex)
        for i, zt in enumerate(flat):
            if zt == 0:
                out[i] = 0.0
                continue
            # walk the radius, tracking the continuous log of the ratio
            radii = np.linspace(1e-4, 1.0, n_branch_steps) * abs(zt)
            pts = radii * (zt / abs(zt))
            ratios = np.asarray(eta_t(pts)) / pts
            logs = np.log(ratios)
            branch = 0.0
            for a, b in zip(logs[:-1], logs[1:]):
                jump = (b + branch - a).imag
                if jump > np.pi:
                    branch -= 2 * np.pi
                elif jump < -np.pi:
                    branch += 2 * np.pi
                if abs((b + branch - a).imag) > 2.5:
                    raise tr.NoConvergenceError("branch tracking failed")
            out[i] = zt * np.exp(expo * (logs[-1] + branch))
        return out.reshape(z.shape)

    return tr.AnalyticMap(fn, "D", "eta")


# ---------------------------------------------------------------------------
# structural checks (CK, homogeneity)
# ---------------------------------------------------------------------------

def chapman_kolmogorov_residual(tk, s, t, u, x, zs):
    """Transform-level CK residual |1/(F_st(F_tu z) - x) - 1/(F_su z - x)|."""
    zs = np.asarray(zs, dtype=complex)
    f_st = tk._transition(s, t)
    f_tu = tk._transition(t, u)
    f_su = tk._transition(s, u)
    if tk.side == "additive":
        lhs = 1.0 / (f_st(f_tu(zs)) - x)
        rhs = 1.0 / (f_su(zs) - x)
    else:
        xx = np.exp(1j * x)
        e1 = f_st(f_tu(zs))
        e2 = f_su(zs)
        lhs = e1 * xx / (1 - e1 * xx)
        rhs = e2 * xx / (1 - e2 * xx)
    return float(np.max(np.abs(lhs - rhs)))


def homogeneity_residual(tk, s, t, x, y, zs):
    """|F_{k(x+y)} - (F_{k(y)} - x)| at sample z (additive chains)."""
    zs = np.asarray(zs, dtype=complex)
    fn = tk._transition(s, t)
    f_xy = fn(zs) - (x + y)
    f_y_shift = (fn(zs) - y) - x
    return float(np.max(np.abs(f_xy - f_y_shift)))
