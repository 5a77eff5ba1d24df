"""``soe`` command line: kernel tables, validation, geometry, solves, studies, bench.

Exit codes: 0 on success, 2 when a measured error exceeds its target, 1 on
usage errors.  Every command that writes files also writes
``<first output>.manifest.json`` with the resolved parameters and the
SHA-256 of each artifact; passing that manifest back through ``--config``
reruns the command with the same parameters.
"""
import argparse
import math
import os
import sys

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; that code is reserved here
    def error(self, message):
        raise UsageError(message)


def _positive(kind):
    def conv(text):
        try:
            val = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value {text!r}") from None
        if not val > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
        return val
    return conv


def build_parser():
    p = _Parser(prog="soe", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=_positive(int), default=None,
                   help="BLAS/OpenMP thread count")
    p.add_argument("--config", default=None,
                   help="key = value file (or a manifest); flags take precedence")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    b = sub.add_parser("build-kernel", help="write separated kernel tables")
    b.add_argument("--dim", type=_positive(int))
    b.add_argument("--eps", type=_positive(float))
    b.add_argument("--t0", type=_positive(float), help="window start delta")
    b.add_argument("--t1", type=_positive(float), help="window end T")
    b.add_argument("--dlp", action="store_true", default=None,
                   help="double-layer kernel")
    b.add_argument("--radius", type=_positive(float),
                   help="distance bound R for --dlp")
    b.add_argument("--outer", choices=("constructed", "bundled"),
                   help="radial t^-beta sum (bundled: shipped t^-3/2 table)")
    b.add_argument("--out")

    v = sub.add_parser("validate", help="check a table on the validation grid")
    v.add_argument("--in", dest="input")
    v.add_argument("--nx", type=_positive(int))
    v.add_argument("--nt", type=_positive(int))
    v.add_argument("--target", type=_positive(float),
                   help="error target (default: the table's eps)")
    v.add_argument("--report")

    g = sub.add_parser("geometry", help="write a boundary discretization")
    g.add_argument("--curve")
    g.add_argument("--n", type=_positive(int))
    g.add_argument("--out")

    s = sub.add_parser("solve", help="one time march")
    _march_flags(s)
    s.add_argument("--dt", type=_positive(float))
    s.add_argument("--steps", type=_positive(int))
    s.add_argument("--solver", choices=("lu", "fixed_point"))
    s.add_argument("--report")

    st = sub.add_parser("study", help="convergence study over dt levels")
    _march_flags(st)
    st.add_argument("--levels", type=_positive(int))
    st.add_argument("--dt0", type=_positive(float))
    st.add_argument("--T", dest="T", type=_positive(float))
    st.add_argument("--out")
    st.add_argument("--report")

    bn = sub.add_parser("bench", help="recursive vs direct history timing")
    bn.add_argument("--sizes", help="comma separated N_T values")
    bn.add_argument("--n", type=_positive(int), help="boundary points")
    bn.add_argument("--dt", type=_positive(float))
    bn.add_argument("--eps", type=_positive(float))
    bn.add_argument("--report")
    return p


def _march_flags(sp):
    sp.add_argument("--curve")
    sp.add_argument("--n", type=_positive(int), help="boundary points")
    sp.add_argument("--order", type=int, choices=(2, 3, 4))
    sp.add_argument("--eps", type=_positive(float))
    sp.add_argument("--quad-order", type=int, choices=(2, 8, 16))
    sp.add_argument("--emit-plot-data", metavar="CSV")
    sp.add_argument("--outer", choices=("constructed", "bundled"),
                    help="radial t^-3/2 sum of the history kernel")


DEFAULTS = {
    "build-kernel": {"dim": 2, "eps": 1e-6, "t0": 1e-3, "t1": 1.0,
                     "dlp": False, "radius": None, "outer": "constructed",
                     "out": None},
    "validate": {"input": None, "nx": 50, "nt": 1000, "target": None,
                 "report": None},
    "geometry": {"curve": "circle", "n": None, "out": None},
    "solve": {"curve": "circle", "n": None, "order": 4, "eps": 1e-9,
              "quad_order": 16, "emit_plot_data": None, "outer": "constructed",
              "dt": 0.1,
              "steps": 10, "solver": "lu", "report": None},
    "study": {"curve": "circle", "n": None, "order": 4, "eps": 1e-9,
              "quad_order": 16, "emit_plot_data": None, "outer": "constructed",
              "levels": 5,
              "dt0": 0.1, "T": 1.0, "out": None, "report": None},
    "bench": {"sizes": "20,40,80,160", "n": 64, "dt": 0.00625, "eps": 1e-9,
              "report": None},
}


def resolve(args):
    """Merge defaults, the config file and explicit flags (highest precedence)."""
    from .io import read_config

    params = dict(DEFAULTS[args.command])
    if args.config:
        try:
            cfg = read_config(args.config)
        except (OSError, ValueError) as exc:
            raise UsageError(f"--config: {exc}") from None
        for key, val in cfg.items():
            if key not in params:
                raise UsageError(f"--config: unknown key {key!r} for "
                                 f"{args.command}")
            params[key] = val
    for key in params:
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    return params


def _require(params, *keys):
    for key in keys:
        if params.get(key) in (None, ""):
            raise UsageError(f"--{key.replace('_', '-')} is required")


def cmd_build_kernel(p):
    from .io import bundled_table4, write_kernel, write_manifest
    from .kernel import build_dlp_kernel, build_kernel

    _require(p, "out")
    if not p["t0"] < p["t1"]:
        raise UsageError("--t0 must be smaller than --t1")
    if p["dlp"]:
        _require(p, "radius")
        if not p["radius"] > 1:
            raise UsageError("--radius must exceed 1")
    outer = bundled_table4() if p["outer"] == "bundled" else None
    try:
        if p["dlp"]:
            k = build_dlp_kernel(int(p["dim"]), p["eps"], p["t0"], p["t1"],
                                 p["radius"], outer=outer)
        else:
            k = build_kernel(int(p["dim"]), p["eps"], p["t0"], p["t1"],
                             outer=outer)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_kernel(p["out"], k)
    write_manifest([p["out"]], p, "build-kernel")
    print(f"{p['out']}: n_inner={k.n_inner} n_outer={k.n_outer}")
    return EXIT_OK


def _validate_object(obj, nx, nt):
    from .contour import ExpSum, grid_error, stability_ratio, validation_grid
    from .kernel import SeparatedKernel, validate_on_grid
    from .power import PowerSum, verify_power_sum

    if isinstance(obj, SeparatedKernel):
        err, ratio = validate_on_grid(obj, nx, nt)
        return err, ratio, obj.n_inner, obj.n_outer, obj.target_eps
    if isinstance(obj, ExpSum):
        err = grid_error(obj, nx, nt)
        _, t = validation_grid(obj.valid_t_min, obj.valid_t_max, nx, nt)
        ratio = float(stability_ratio(obj, t).max())
        return err, ratio, len(obj), 0, obj.target_eps
    if isinstance(obj, PowerSum):
        return verify_power_sum(obj, nt), 1.0, 0, len(obj), obj.target_eps
    raise UsageError("--in: unsupported table")


def cmd_validate(p):
    from .io import read_any, write_json, write_manifest

    _require(p, "input")
    try:
        obj = read_any(p["input"])
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"--in: {exc}") from None
    err, ratio, n_in, n_out, eps = _validate_object(obj, int(p["nx"]),
                                                    int(p["nt"]))
    target = p["target"] if p["target"] is not None else eps
    ok = math.isfinite(err) and (target is None or math.isnan(target)
                                 or err <= target)
    report = {"max_weighted_error": err, "stability_ratio_max": ratio,
              "n_inner": n_in, "n_outer": n_out, "target": target,
              "passed": bool(ok)}
    if p["report"]:
        write_json(p["report"], report)
        write_manifest([p["report"]], p, "validate")
    print(f"max_weighted_error={err:.3e} target={target:.3e} "
          f"stability_ratio_max={ratio:.4f} {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_geometry(p):
    import numpy as np

    from .geometry import CURVES, make_curve
    from .io import write_manifest, write_table

    _require(p, "out")
    if p["curve"] not in CURVES:
        raise UsageError(f"--curve: unknown curve {p['curve']!r}")
    try:
        c = make_curve(p["curve"], p["n"])
    except ValueError as exc:
        raise UsageError(f"--n: {exc}") from None
    rows = np.column_stack([c.positions, c.normals, c.curvatures,
                            c.arclength_weights])
    write_table(p["out"], rows, {"curve": c.curve_id, "n": c.n_points},
                ("x", "y", "nx", "ny", "kappa", "weight"))
    write_manifest([p["out"]], p, "geometry")
    return EXIT_OK


def _check_curve(p):
    from .geometry import CURVES

    if p["curve"] not in CURVES:
        raise UsageError(f"--curve: unknown curve {p['curve']!r}")


def _write_plot_data(path, series):
    import numpy as np

    from .io import write_table

    rows = []
    for level, (dt, plot) in enumerate(series):
        for step, (t, u, ex) in enumerate(plot, 1):
            for j in range(len(u)):
                rows.append((level, dt, step, t, j, u[j], ex[j], u[j] - ex[j]))
    write_table(path, np.array(rows, dtype=float).reshape(-1, 8), None,
                ("level", "dt", "step", "t", "target", "computed", "exact",
                 "error"))


def _row_dict(row):
    return {"dt": row.dt, "NT": row.n_steps, "K": row.K, "E": row.E,
            "r": row.r, "t0": row.t0, "n_inner": row.n_inner,
            "n_outer": row.n_outer}


def _source_list(curve_id):
    from .geometry import interior_sources

    return [{"point": list(map(float, pt)), "t0": t0, "strength": q}
            for pt, t0, q in interior_sources(curve_id)]


def cmd_solve(p):
    from .io import write_json, write_manifest
    from .solver import MarchConfig, march

    _check_curve(p)
    try:
        cfg = MarchConfig(dt=p["dt"], n_steps=int(p["steps"]),
                          order_k=int(p["order"]), eps_soe=p["eps"],
                          curve_id=p["curve"], n_points=p["n"],
                          quad_order=int(p["quad_order"]), solver=p["solver"],
                          outer_sum=p["outer"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    row, _, plot = march(cfg, emit_plot_data=bool(p["emit_plot_data"]))
    report = dict(_row_dict(row), curve=cfg.curve_id, n_points=cfg.n_points,
                  order=cfg.order_k, eps=cfg.eps_soe, T=cfg.T_final,
                  sources=_source_list(cfg.curve_id))
    outs = []
    if p["report"]:
        write_json(p["report"], report)
        outs.append(p["report"])
    if p["emit_plot_data"]:
        _write_plot_data(p["emit_plot_data"], [(cfg.dt, plot)])
        outs.append(p["emit_plot_data"])
    write_manifest(outs, p, "solve")
    print(f"dt={row.dt:g} NT={row.n_steps} K={row.K:.4f} E={row.E:.3e}")
    return EXIT_OK


def cmd_study(p):
    from .io import write_json, write_manifest, write_table
    from .solver import convergence_study, fit_order

    _check_curve(p)
    try:
        rep = convergence_study(p["curve"], int(p["levels"]),
                                order_k=int(p["order"]), eps_soe=p["eps"],
                                n_points=p["n"], dt0=p["dt0"], T=p["T"],
                                quad_order=int(p["quad_order"]),
                                emit_plot_data=bool(p["emit_plot_data"]),
                                outer_sum=p["outer"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    outs = []
    if p["out"]:
        write_table(p["out"], rep.table(), {"curve": p["curve"]},
                    ("dt", "NT", "K", "E", "r"))
        outs.append(p["out"])
    if p["report"]:
        write_json(p["report"], {"curve": p["curve"],
                                 "rows": [_row_dict(r) for r in rep.rows],
                                 "fitted_order": fit_order(rep),
                                 "sources": _source_list(p["curve"])})
        outs.append(p["report"])
    if p["emit_plot_data"]:
        _write_plot_data(p["emit_plot_data"], rep.plot_data)
        outs.append(p["emit_plot_data"])
    write_manifest(outs, p, "study")
    for dt, nt, K, E, r in rep.table():
        print(f"{dt:.3e} {nt:5d} {K:.4f} {E:.3e} {r:.2f}")
    return EXIT_OK


def cmd_bench(p):
    from .bench import run_bench
    from .io import write_json, write_manifest

    try:
        sizes = tuple(int(x) for x in str(p["sizes"]).split(","))
    except ValueError:
        raise UsageError(f"--sizes: invalid list {p['sizes']!r}") from None
    res = run_bench(sizes=sizes, n_points=int(p["n"]), dt=p["dt"],
                    eps=p["eps"])
    if p["report"]:
        write_json(p["report"], res)
        write_manifest([p["report"]], p, "bench")
    for r in res["rows"]:
        print(f"NT={r['n_steps']:4d} soe={r['soe_seconds']:.3f}s "
              f"naive={r['naive_seconds']:.3f}s diff={r['max_abs_diff']:.1e}")
    print(f"exponents: soe={res['soe_exponent']:.2f} "
          f"naive={res['naive_exponent']:.2f}")
    return EXIT_OK


COMMANDS = {"build-kernel": cmd_build_kernel, "validate": cmd_validate,
            "geometry": cmd_geometry, "solve": cmd_solve, "study": cmd_study,
            "bench": cmd_bench}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        if args.threads:
            # effective only before numpy is first imported
            for var in _THREAD_VARS:
                os.environ[var] = str(args.threads)
        if args.verbose:
            import logging
            logging.basicConfig(level=logging.INFO)
        params = resolve(args)
        return COMMANDS[args.command](params)
    except UsageError as exc:
        print(f"soe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
