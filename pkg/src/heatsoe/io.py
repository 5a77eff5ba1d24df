"""Text formats: node/weight CSV tables, key=value configs, run manifests.

Floats are written with 17 significant digits so that every double
round-trips exactly.
"""
import hashlib
import json
import math
import os
import pathlib

import numpy as np

from .contour import ExpSum
from .power import PowerSum

__all__ = [
    "fmt",
    "write_table",
    "read_table",
    "write_expsum",
    "read_expsum",
    "write_power_sum",
    "read_power_sum",
    "write_kernel",
    "read_kernel",
    "read_any",
    "data_dir",
    "bundled_table5",
    "bundled_table4",
    "read_config",
    "write_json",
    "write_manifest",
    "sha256_file",
]

COLUMNS = ("re_s", "im_s", "re_w", "im_w")


def fmt(x):
    """Shortest-safe 17-significant-digit representation of a float."""
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return repr(x)
    return f"{x:.17g}"


def _fmt_meta(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def _parse_meta(v):
    v = v.strip()
    if v in ("true", "false"):
        return v == "true"
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def write_table(path, rows, meta=None, columns=COLUMNS):
    """Write ``rows`` (N x len(columns) reals) with ``# key = value`` header lines."""
    rows = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    lines = [f"# {k} = {_fmt_meta(v)}" for k, v in (meta or {}).items()]
    lines.append(",".join(columns))
    lines.extend(",".join(fmt(x) for x in row) for row in rows)
    pathlib.Path(path).write_text("\n".join(lines) + "\n")


def read_table(path):
    """Return ``(meta, columns, rows)`` from a table written by :func:`write_table`."""
    meta = {}
    columns = None
    rows = []
    for raw in pathlib.Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, val = line[1:].partition("=")
            if sep:
                meta[key.strip()] = _parse_meta(val)
            continue
        if columns is None:
            columns = [c.strip() for c in line.split(",")]
            continue
        rows.append([float(x) for x in line.split(",")])
    if columns is None:
        raise ValueError(f"{path}: missing column header")
    arr = np.array(rows, dtype=float).reshape(-1, len(columns))
    return meta, columns, arr


def _expsum_meta(sum_):
    meta = {"kind": "contour", "delta": sum_.valid_t_min, "T": sum_.valid_t_max,
            "eps": sum_.target_eps}
    if sum_.params is not None:
        p = sum_.params
        meta.update(alpha=p.alpha, beta=p.beta, theta=p.theta)
    meta["n"] = len(sum_)
    meta["conjugate"] = sum_.conjugate
    return meta


def expsum_rows(sum_):
    return np.column_stack([sum_.nodes.real, sum_.nodes.imag,
                            sum_.weights.real, sum_.weights.imag])


def power_rows(ps):
    z = np.zeros(len(ps))
    return np.column_stack([-ps.rates, z, ps.weights, z])


def write_expsum(path, sum_):
    write_table(path, expsum_rows(sum_), _expsum_meta(sum_))


def _expsum_from(meta, rows):
    return ExpSum(nodes=rows[:, 0] + 1j * rows[:, 1],
                  weights=rows[:, 2] + 1j * rows[:, 3],
                  valid_t_min=float(meta.get("delta", 0.0)),
                  valid_t_max=float(meta.get("T", math.inf)),
                  target_eps=float(meta.get("eps", math.nan)),
                  conjugate=bool(meta.get("conjugate", True)))


def _power_from(meta, rows):
    if np.any(rows[:, 1] != 0) or np.any(rows[:, 3] != 0):
        raise ValueError("power-sum table has non-real entries")
    return PowerSum(beta=float(meta["beta"]), weights=rows[:, 2],
                    rates=-rows[:, 0], valid_t_min=float(meta["delta"]),
                    valid_t_max=float(meta["T"]),
                    target_eps=float(meta.get("eps", math.nan)),
                    scale=float(meta.get("scale", 1.0)))


def read_expsum(path):
    meta, _, rows = read_table(path)
    return _expsum_from(meta, rows)


def write_power_sum(path, ps):
    meta = {"kind": "power", "beta": ps.beta, "delta": ps.valid_t_min,
            "T": ps.valid_t_max, "eps": ps.target_eps, "scale": ps.scale,
            "n": len(ps), "conjugate": False}
    write_table(path, power_rows(ps), meta)


def read_power_sum(path):
    meta, _, rows = read_table(path)
    return _power_from(meta, rows)


KERNEL_COLUMNS = ("part",) + COLUMNS


def write_kernel(path, kernel):
    """Combined table: ``part`` 0 rows hold the inner sum, ``part`` 1 the outer."""
    inner = expsum_rows(kernel.inner)
    parts = [np.column_stack([np.zeros(len(inner)), inner])]
    meta = {"kind": kernel.kind, "dim": kernel.dim, "eps": kernel.target_eps,
            "delta": kernel.valid_t_min, "T": kernel.valid_t_max,
            "inner_eps": kernel.inner.target_eps,
            "n_inner": kernel.n_inner, "n_outer": kernel.n_outer,
            "conjugate": kernel.inner.conjugate}
    if kernel.R is not None:
        meta["R"] = kernel.R
    if kernel.outer is not None:
        o = kernel.outer
        meta.update(beta=o.beta, scale=o.scale, outer_eps=o.target_eps)
        parts.append(np.column_stack([np.ones(len(o)), power_rows(o)]))
    write_table(path, np.vstack(parts), meta, KERNEL_COLUMNS)


def _kernel_from(meta, rows):
    from .kernel import SeparatedKernel

    part = rows[:, 0]
    imeta = dict(meta, eps=meta.get("inner_eps", meta.get("eps")))
    inner = _expsum_from(imeta, rows[part == 0, 1:])
    outer = None
    if np.any(part == 1):
        ometa = dict(meta, eps=meta.get("outer_eps", math.nan))
        outer = _power_from(ometa, rows[part == 1, 1:])
    R = meta.get("R")
    return SeparatedKernel(dim=int(meta["dim"]), inner=inner, outer=outer,
                           kind=str(meta["kind"]),
                           R=None if R is None else float(R),
                           target_eps=float(meta.get("eps", math.nan)))


def read_kernel(path):
    meta, columns, rows = read_table(path)
    if tuple(columns) != KERNEL_COLUMNS:
        raise ValueError(f"{path}: not a kernel table")
    return _kernel_from(meta, rows)


def read_any(path):
    """Kernel, contour sum or power sum, whichever the table holds."""
    meta, columns, rows = read_table(path)
    if tuple(columns) == KERNEL_COLUMNS:
        return _kernel_from(meta, rows)
    if tuple(columns) != COLUMNS:
        raise ValueError(f"{path}: unknown columns {columns}")
    if meta.get("kind") == "power":
        return _power_from(meta, rows)
    return _expsum_from(meta, rows)


def data_dir():
    """Directory of the bundled tables; ``SOE_DATA_DIR`` overrides it."""
    env = os.environ.get("SOE_DATA_DIR")
    if env:
        return pathlib.Path(env)
    return pathlib.Path(__file__).resolve().parent / "data"


def bundled_table5():
    """47-node contour sum for the 1D kernel on ``[1e-3, 1]`` at ``1e-9``."""
    return read_expsum(data_dir() / "table5_heat1d.csv")


def bundled_table4():
    """22-term exponential sum for ``t^(-3/2)`` on ``[1e-3, 1]``."""
    return read_power_sum(data_dir() / "table4_power_3_2.csv")


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment.

    A run manifest (JSON) is accepted too; its parameters are returned.
    """
    text = pathlib.Path(path).read_text()
    if text.lstrip().startswith("{"):
        return dict(json.loads(text).get("parameters", {}))
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"{path}:{n}: expected key = value")
        out[key.strip().replace("-", "_")] = _parse_meta(val)
    return out


class _Encoder(json.JSONEncoder):
    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, pathlib.PurePath):
            return str(o)
        return super().default(o)


def write_json(path, obj):
    # Python's float repr is already the shortest round-tripping form
    pathlib.Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True,
                                             cls=_Encoder) + "\n")


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outputs, params, command):
    """Write ``<first output>.manifest.json`` holding parameters and hashes."""
    outputs = [pathlib.Path(p) for p in outputs if p is not None]
    if not outputs:
        return None
    target = outputs[0].with_name(outputs[0].name + ".manifest.json")
    write_json(target, {
        "command": command,
        "parameters": params,
        "artifacts": {p.name: sha256_file(p) for p in outputs if p.exists()},
    })
    return target
