"""Shared numerical helpers: branch cuts, extrapolation, quadrature."""

import warnings

import numpy as np
from scipy import integrate

warnings.filterwarnings("ignore", category=integrate.IntegrationWarning)


def as_rng(seed):
    """Coerce ``seed`` (int, None, or Generator) into a numpy Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def power_poscut(w, beta):
    r"""Power :math:`w^\beta` with the branch cut on the positive real axis.

    The argument is taken continuously in (0, 2\pi), i.e.
    ``w**beta = |w|**beta * exp(1j*beta*arg(w))`` with ``arg(w)`` in (0, 2pi).
    """
    w = np.asarray(w, dtype=complex)
    arg = np.angle(w)  # (-pi, pi]
    arg = np.where(arg <= 0.0, arg + 2.0 * np.pi, arg)
    return np.abs(w) ** beta * np.exp(1j * beta * arg)


def sqrt_poscut(w):
    """Square root continuous on angles arg(w) in (0, 2pi)."""
    return power_poscut(w, 0.5)


def richardson(values, ratio=2.0, max_order=5):
    """Extrapolate ``f(eps) -> f(0)`` from samples on a geometric ladder.

    ``values[k]`` is ``f(eps_0 / ratio**k)`` (so the ladder *decreases* along
    the first axis).  Assumes an expansion ``f(eps) = L + a1*eps + a2*eps^2 +
    ...`` and runs a Neville tableau; only the last ``max_order + 1`` rungs
    are used, which keeps rounding amplification bounded on deep ladders.

    Works on scalars or arrays (extrapolation along axis 0).
    """
    vals = np.asarray(values)
    k = min(max_order + 1, vals.shape[0])
    tab = vals[-k:].astype(vals.dtype)
    work = [tab[i] for i in range(k)]
    for m in range(1, k):
        fac = ratio ** m
        work = [(fac * work[i + 1] - work[i]) / (fac - 1.0)
                for i in range(len(work) - 1)]
    return work[0]


def quad_complex(f, a, b, points=None, epsabs=1e-12, limit=200):
    """Integrate a complex-valued ``f`` over [a, b] with QUADPACK.

    Real and imaginary parts are integrated separately (adaptive
    Gauss-Kronrod).  ``points`` marks interior break/near-singular abscissae.
    """
    if points is not None:
        points = [p for p in points if a < p < b]
        if not points:
            points = None
    re = integrate.quad(lambda x: f(x).real, a, b, points=points,
                        epsabs=epsabs, epsrel=epsabs, limit=limit)[0]
    im = integrate.quad(lambda x: f(x).imag, a, b, points=points,
                        epsabs=epsabs, epsrel=epsabs, limit=limit)[0]
    return re + 1j * im


def quad_real(f, a, b, points=None, epsabs=1e-12, limit=200):
    if points is not None:
        points = [p for p in points if a < p < b]
        if not points:
            points = None
    return integrate.quad(f, a, b, points=points, epsabs=epsabs,
                          epsrel=epsabs, limit=limit)[0]


def cheb_nodes(a, b, n):
    """n Chebyshev points in the open interval (a, b)."""
    k = np.arange(n)
    x = np.cos((2 * k + 1) * np.pi / (2 * n))  # in (-1, 1)
    return 0.5 * (a + b) + 0.5 * (b - a) * x[::-1]


def graded_grid(lo, hi, n_base=1025, edges=(), depth=1e-7, per_side=48):
    """Uniform grid on [lo, hi] refined geometrically toward ``edges``.

    Used when inverting transforms whose densities have integrable
    singularities at known support edges: the geometric clusters let the
    interpolant carry the 1/sqrt-type mass.
    """
    span = hi - lo
    pieces = [np.linspace(lo, hi, n_base)]
    offs = span * np.geomspace(depth, 0.05, per_side)
    for e in edges:
        for side in (-1.0, 1.0):
            pts = e + side * offs
            pieces.append(pts[(pts > lo) & (pts < hi)])
    grid = np.unique(np.concatenate(pieces))
    keep = np.concatenate([[True], np.diff(grid) > 1e-13 * max(1.0, span)])
    return grid[keep]


DEFAULT_EPS_LADDER = 2.0 ** -np.arange(4, 13)
