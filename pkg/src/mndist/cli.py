"""Command-line front end: JSON/CSV I/O around the library operations.

Exit codes: 0 success, 2 honest classification FAIL verdicts (so shell
pipelines can branch on them), 1 errors.  All runs are deterministic given
``--seed``; CSV floats are written with repr so outputs are byte-identical
across runs.
"""

import argparse
import json
import os
import sys
from fractions import Fraction

import numpy as np

from . import classify as cl
from . import convolutions as cv
from . import loewner as lw
from . import markov as mk
from . import measures as ms
from . import operator_model as om
from . import transforms as tr

EXIT_OK, EXIT_ERROR, EXIT_FAIL_VERDICT = 0, 1, 2


def _load_measure(path):
    with open(path) as fh:
        return ms.measure_from_json(fh.read())


def _scale_measure(m, scale):
    """Rescale a probability measure into a finite measure of given mass."""
    if scale == 1.0:
        if isinstance(m, ms.RealMeasure):
            return ms.RealMeasure(list(zip(m.atom_locs, m.atom_weights)),
                                  m.segments, metadata=m.metadata,
                                  require_probability=False)
        return m
    if isinstance(m, ms.RealMeasure):
        segs = []
        for s in m.segments:
            t = s if s.tabulated else s.as_table()
            segs.append(ms.Segment(t.a, t.b, grid=t.grid,
                                   values=scale * t.values))
        atoms = [(x, scale * w) for x, w in zip(m.atom_locs, m.atom_weights)]
        return ms.RealMeasure(atoms, segs, require_probability=False)
    atoms = [(t, scale * w) for t, w in zip(m.atom_angles, m.atom_weights)]
    dens = None
    if m.has_density():
        dens = lambda th, m=m, scale=scale: scale * float(
            m.density_at(np.asarray(th)))
    return ms.CircleMeasure(atoms, density=dens, require_probability=False)


def _load_pair(path):
    """Pair spec: {"gamma"|"alpha": drift, "rho": measure-spec,
    "rho_mass": total mass of rho (default 1)}; rho's side picks the
    additive / multiplicative interpretation."""
    with open(path) as fh:
        d = json.load(fh)
    scale = float(d.get("rho_mass", 1.0))
    rho = ms.measure_from_json(d["rho"]) if d.get("rho") else None
    additive = "gamma" in d if rho is None \
        else isinstance(rho, ms.RealMeasure)
    if additive:
        rho = 0 if rho is None else _scale_measure(rho, scale)
        return lw.GeneratingPairAdd(d.get("gamma", 0.0), rho)
    rho = 0 if rho is None else _scale_measure(rho, scale)
    return lw.GeneratingPairMult(d.get("alpha", 0.0), rho)


def _write_json(obj, path):
    text = json.dumps(obj, indent=1, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_density_csv(m, path):
    """CSV columns x,density; atoms in a sibling .atoms.json file."""
    lines = ["x,density"]
    if isinstance(m, ms.CircleMeasure):
        xs = np.linspace(0, 2 * np.pi, 1025, endpoint=False)
        dens = m.density_at(xs)
        atoms = [{"x": float(t), "w": float(w)}
                 for t, w in zip(m.atom_angles, m.atom_weights)]
    else:
        lo, hi = m.support()
        xs = np.linspace(lo, hi, 1025)
        dens = m.pdf(xs)
        atoms = [{"x": float(x), "w": float(w)}
                 for x, w in zip(m.atom_locs, m.atom_weights)]
    for x, d in zip(xs, dens):
        lines.append(f"{x!r},{d!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    stem, _ = os.path.splitext(path)
    with open(stem + ".atoms.json", "w") as fh:
        fh.write(json.dumps(atoms, indent=1, sort_keys=True) + "\n")


def _write_transform_csv(fn, zs, path):
    lines = ["re_z,im_z,re_f,im_f"]
    vals = fn(zs)
    for z, v in zip(zs, vals):
        lines.append(f"{z.real!r},{z.imag!r},{v.real!r},{v.imag!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _default_grid(side):
    if side == "H":
        xs = np.linspace(-3, 3, 7)
        ys = np.array([0.5, 1.0, 2.0, 4.0])
        return (xs[:, None] + 1j * ys[None, :]).ravel()
    r = np.array([0.2, 0.45, 0.7, 0.9])
    th = np.linspace(0, 2 * np.pi, 9)[:-1]
    return (r[:, None] * np.exp(1j * th[None, :])).ravel()


_CHAINS = {
    "arcsine": mk.arcsine_kernel,
    "shift": lambda: mk.shift_kernel(1.0),
    "free-semicircle": mk.free_semicircle_kernel,
    "haar-jump": mk.haar_jump_kernel,
}


def _load_chain(args):
    if args.chain in _CHAINS:
        return _CHAINS[args.chain]()
    pair = _load_pair(args.chain)
    if isinstance(pair, lw.GeneratingPairAdd):
        return mk.additive_semigroup_kernel(pair)
    return mk.mult_semigroup_kernel(pair)


_TEST_FUNCTIONS = {
    "inv_quad": mk.TestFunction(lambda x: 1 / (1 + x ** 2),
                                lambda x: -2 * x / (1 + x ** 2) ** 2,
                                lambda x: (6 * x ** 2 - 2) / (1 + x ** 2) ** 3),
    "cos": mk.TestFunction(np.cos, lambda x: -np.sin(x),
                           lambda x: -np.cos(x)),
    "sin": mk.TestFunction(np.sin, np.cos, lambda x: -np.sin(x)),
}


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def cmd_convolve(args):
    a, b = _load_measure(args.a), _load_measure(args.b)
    ops_R = {"mono": cv.monotone_add, "anti": cv.antimonotone_add,
             "bool": cv.boolean_add, "free": cv.free_add}
    ops_T = {"mono": cv.monotone_mult, "anti": cv.antimonotone_mult,
             "bool": cv.boolean_mult, "free": cv.free_mult}
    if args.op == "classical":
        out = cv.classical_add(a, b) if args.side == "R" \
            else cv.classical_mult(a, b)
        _write_json(out.to_json_dict(), args.out)
        if args.materialize:
            _write_density_csv(out, args.materialize)
        return EXIT_OK
    res = (ops_R if args.side == "R" else ops_T)[args.op](a, b)
    if args.materialize:
        meas = res.materialize()
        _write_density_csv(meas, args.materialize)
        _write_json(meas.to_json_dict(), args.out)
    elif res.transform.tree is not None:
        _write_json({"transform": res.transform.tree, "op": res.op_tag},
                    args.out)
    else:
        meas = res.materialize()
        _write_json(meas.to_json_dict(), args.out)
    return EXIT_OK


def cmd_invert(args):
    with open(args.transform) as fh:
        tree = json.load(fh)["transform"]
    amap = tr.map_from_tree(tree)
    if amap.domain == "H":
        g = tr.as_G(amap) if amap.kind in ("F", "G") else amap
        meas = tr.stieltjes_invert(g)
    else:
        psi = tr.as_psi(amap)
        meas = tr.herglotz_invert(psi)
    _write_json(meas.to_json_dict(), args.out)
    if args.density:
        _write_density_csv(meas, args.density)
    return EXIT_OK


def cmd_evolve(args):
    pair = _load_pair(args.pair)
    additive = isinstance(pair, lw.GeneratingPairAdd)
    zs = _default_grid("H" if additive else "D")
    fn = (lambda z: lw.evolve_additive(pair, args.t, z)) if additive \
        else (lambda z: lw.evolve_mult(pair, args.t, z))
    _write_transform_csv(fn, zs, args.grid)
    return EXIT_OK


def cmd_kernel(args):
    tk = _load_chain(args)
    meas = tk.kernel(args.s, args.t, args.x)
    _write_density_csv(meas, args.density)
    if args.out:
        _write_json(meas.to_json_dict(), args.out)
    return EXIT_OK


def cmd_sample_path(args):
    tk = _load_chain(args)
    times = [float(x) for x in args.times.split(",")]
    path = tk.sample_path(times, args.seed)
    lines = ["t,state"]
    for t, x in zip(path.times, path.states):
        lines.append(f"{t!r},{x!r}")
    with open(args.out, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_hunt(args):
    pair = _load_pair(args.pair)
    fn = _TEST_FUNCTIONS[args.fn]
    if isinstance(pair, lw.GeneratingPairAdd):
        val = mk.hunt_apply_additive(pair, fn, args.x)
    else:
        val = mk.hunt_apply_mult(pair, fn, args.x)
    _write_json({"x": args.x, "fn": args.fn, "generator": val}, args.out)
    return EXIT_OK


def cmd_martingale(args):
    tk = _load_chain(args)
    times = [float(x) for x in args.times.split(",")]
    z = complex(args.z)
    rep = mk.martingale_check(tk, z, times, args.paths, args.seed)
    out = {"times": rep["times"].tolist(),
           "deviation": rep["deviation"].tolist(),
           "stderr": rep["stderr"].tolist(),
           "flat_within_3se": bool(np.all(
               rep["deviation"] <= 3 * rep["stderr"] + 1e-12))}
    _write_json(out, args.out)
    return EXIT_OK


def _measure_cumulants(args):
    m = _load_measure(args.measure)
    moments = ms.exact_moments(m, args.n)
    return lw.monotone_cumulants(moments)


def _fraction_repr(x):
    return str(x) if isinstance(x, Fraction) else float(x)


def cmd_cumulants(args):
    r = _measure_cumulants(args)
    _write_json({"cumulants": [_fraction_repr(x) for x in r.r]}, args.out)
    return EXIT_OK


def cmd_idtest(args):
    r = _measure_cumulants(args)
    rep = lw.monotone_id_test(r)
    out = {"verdict": rep.verdict,
           "determinants": {str(k): _fraction_repr(v)
                            for k, v in rep.determinants.items()},
           "cumulants": [_fraction_repr(x) for x in r.r]}
    _write_json(out, args.out)
    return EXIT_FAIL_VERDICT if rep.verdict == "NOT_ID" else EXIT_OK


def cmd_classify(args):
    m = _load_measure(args.measure)
    if args.test == "univalent":
        f = tr.f_transform(m) if isinstance(m, ms.RealMeasure) \
            else tr.psi_transform(m)
        verdict = cl.univalence_test(f)
    elif args.test == "unimodal":
        if isinstance(m, ms.RealMeasure):
            verdict = cl.unimodal_test_R(m, args.mode)
        else:
            verdict = cl.unimodal_test_T(m, args.alpha, args.beta)
    elif args.test == "starlike":
        verdict = cl.starlike_test_R(m)
    else:
        verdict = cl.type_h_test_T(m)
    out = {"verdict": verdict.verdict, "criterion": verdict.criterion_id,
           "value": verdict.value}
    if verdict.witness is not None:
        w = verdict.witness
        out["witness"] = [w.real, w.imag] if isinstance(w, complex) \
            else [[p.real, p.imag] for p in w]
    _write_json(out, args.out)
    return EXIT_FAIL_VERDICT if verdict.verdict == "FAIL" else EXIT_OK


def cmd_km(args):
    nu = _load_measure(args.measure)
    out = cl.markov_transform(nu)
    _write_json(out.to_json_dict(), args.out)
    if args.density:
        _write_density_csv(out, args.density)
    return EXIT_OK


def cmd_km_inverse(args):
    m = _load_measure(args.measure)
    try:
        spec = cl.inverse_markov_transform(m)
    except cl.NotSelfdecomposableError as exc:
        _write_json({"verdict": "FAIL", "reason": str(exc)}, args.out)
        return EXIT_FAIL_VERDICT
    _write_json(spec.measure.to_json_dict(), args.out)
    return EXIT_OK


def cmd_split(args):
    pair = _load_pair(args.pair)
    pieces, report = cl.infinitesimal_split(pair, args.n)
    _write_json({"n": args.n, "piece": pieces[0].to_json_dict(),
                 "report": report}, args.out)
    return EXIT_OK


def cmd_operator_check(args):
    with open(args.chain) as fh:
        spec = json.load(fh)
    side = spec.get("side", "additive")
    steps = []
    for s in spec["steps"]:
        if side == "additive":
            steps.append(om.RationalPickF(s.get("shift", 0.0),
                                          s.get("poles", []),
                                          s.get("weights", [])))
        else:
            zeros = [complex(x[0], x[1]) for x in s.get("zeros", [])]
            steps.append(om.BlaschkeEta(s.get("phase", 0.0), zeros))
    ps = om.build_chain(steps, side=side)
    ops = om.build_operators(ps)
    m = len(steps)
    report = {"dimension": ps.dim, "side": side}
    if side == "additive":
        report["increment_law"] = max(
            om.check_increment_law(ops, i, j)
            for i in range(m) for j in range(i + 1, m + 1))
        report["monotone_independence"] = om.check_monotone_independence(ops)
        report["resolvent"] = max(
            om.check_resolvent_formula(ops, i, j, 2j)
            for i in range(m) for j in range(i, m + 1))
    else:
        report["umip"] = max(om.check_umip(ops, i, j)
                             for i in range(m) for j in range(i + 1, m + 1))
    _write_json(report, args.out)
    return EXIT_OK


def cmd_estimates(args):
    m = _load_measure(args.measure)
    s1, s2, s3 = cl.circle_estimates(m, args.delta, args.n)
    _write_json({"delta": args.delta, "n": args.n,
                 "slacks": [s1, s2, s3]}, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="mndist",
        description="monotone convolutions, Loewner flows, and homogeneous "
                    "Markov kernels")
    p.add_argument("--threads", type=int,
                   default=int(os.environ.get("MNDIST_THREADS", "0")),
                   help="cap BLAS threads (0 = library default)")
    sub = p.add_subparsers(dest="verb", required=True)

    c = sub.add_parser("convolve")
    c.add_argument("--op", required=True,
                   choices=["mono", "anti", "bool", "free", "classical"])
    c.add_argument("--side", default="R", choices=["R", "T"])
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--materialize", metavar="CSV")
    c.add_argument("--out")
    c.set_defaults(handler=cmd_convolve)

    c = sub.add_parser("invert")
    c.add_argument("--transform", required=True)
    c.add_argument("--out")
    c.add_argument("--density", metavar="CSV")
    c.set_defaults(handler=cmd_invert)

    c = sub.add_parser("evolve")
    c.add_argument("--pair", required=True)
    c.add_argument("--t", type=float, required=True)
    c.add_argument("--grid", required=True, metavar="CSV")
    c.set_defaults(handler=cmd_evolve)

    for verb, fn in (("kernel", cmd_kernel), ("sample-path", cmd_sample_path),
                     ("martingale", cmd_martingale)):
        c = sub.add_parser(verb)
        c.add_argument("--chain", required=True,
                       help="named chain (%s) or a pair JSON path"
                       % "|".join(_CHAINS))
        if verb == "kernel":
            c.add_argument("--s", type=float, default=0.0)
            c.add_argument("--t", type=float, required=True)
            c.add_argument("--x", type=float, required=True)
            c.add_argument("--density", required=True, metavar="CSV")
            c.add_argument("--out")
        elif verb == "sample-path":
            c.add_argument("--times", required=True)
            c.add_argument("--seed", type=int, default=0)
            c.add_argument("--out", required=True, metavar="CSV")
        else:
            c.add_argument("--z", required=True)
            c.add_argument("--times", required=True)
            c.add_argument("--paths", type=int, default=10000)
            c.add_argument("--seed", type=int, default=0)
            c.add_argument("--out")
        c.set_defaults(handler=fn)

    c = sub.add_parser("hunt")
    c.add_argument("--pair", required=True)
    c.add_argument("--fn", default="inv_quad", choices=sorted(_TEST_FUNCTIONS))
    c.add_argument("--x", type=float, required=True)
    c.add_argument("--out")
    c.set_defaults(handler=cmd_hunt)

    for verb, fn in (("cumulants", cmd_cumulants), ("idtest", cmd_idtest)):
        c = sub.add_parser(verb)
        c.add_argument("--measure", required=True)
        c.add_argument("--n", type=int, default=10)
        c.add_argument("--out")
        c.set_defaults(handler=fn)

    c = sub.add_parser("classify")
    c.add_argument("--test", required=True,
                   choices=["univalent", "unimodal", "starlike", "type-h"])
    c.add_argument("measure")
    c.add_argument("--mode", type=float, default=0.0)
    c.add_argument("--alpha", type=float, default=0.0)
    c.add_argument("--beta", type=float, default=0.0)
    c.add_argument("--out")
    c.set_defaults(handler=cmd_classify)

    for verb, fn in (("km", cmd_km), ("km-inverse", cmd_km_inverse)):
        c = sub.add_parser(verb)
        c.add_argument("--measure", required=True)
        c.add_argument("--out")
        if verb == "km":
            c.add_argument("--density", metavar="CSV")
        c.set_defaults(handler=fn)

    c = sub.add_parser("split")
    c.add_argument("--pair", required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--out")
    c.set_defaults(handler=cmd_split)

    c = sub.add_parser("operator-check")
    c.add_argument("--chain", required=True)
    c.add_argument("--out")
    c.set_defaults(handler=cmd_operator_check)

    c = sub.add_parser("estimates")
    c.add_argument("--measure", required=True)
    c.add_argument("--delta", type=float, default=0.5)
    c.add_argument("--n", type=int, default=5)
    c.add_argument("--out")
    c.set_defaults(handler=cmd_estimates)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads:
        try:  # best effort: bound BLAS pools when threadpoolctl is present
            from threadpoolctl import threadpool_limits
            threadpool_limits(args.threads)
        except ImportError:
            pass
    try:
        return args.handler(args)
    except (ms.MeasureError, tr.TransformError, lw.FlowError,
            mk.KernelError, cl.ClassifyError, om.OperatorModelError,
            OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"mndist {args.verb}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
