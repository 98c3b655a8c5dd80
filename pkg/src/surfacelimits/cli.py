"""Command-line entry point: ``surfacelimits <subcommand> [options]``."""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, SurfaceLimitsError
from .modesort import ModeBasis
from .sweeps import SweepSpec, mode_contributions, run_sweep, task_columns

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2

# flag dest -> fallback when neither flag nor config sets it
_DEFAULTS = {
    "kzr": 100.0,
    "modes_max_order": 10,
    "quad_tol": 1e-10,
    "format": "csv",
    "out": None,
    "workers": 1,
    "dx": None,
    "dz": None,
    "var": None,
    "lo": None,
    "hi": None,
    "points": None,
    "log": False,
}
_CONFIG_KEYS = {"from": "lo", "to": "hi", "modes-max-order": "modes_max_order", "quad-tol": "quad_tol"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kzr", type=float, default=None)
    p.add_argument("--modes-max-order", dest="modes_max_order", type=int, default=None)
    p.add_argument("--quad-tol", dest="quad_tol", type=float, default=None)
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--config", default=None, help="JSON file with the same keys as the flags")


def _point(p):
    p.add_argument("--dx", type=float, default=None)
    p.add_argument("--dz", type=float, default=None)


def _sweep(p):
    _point(p)
    p.add_argument("--var", choices=("dx", "dz"), default=None)
    p.add_argument("--from", dest="lo", type=float, default=None)
    p.add_argument("--to", dest="hi", type=float, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--log", action="store_true", default=None)
    p.add_argument("--workers", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="surfacelimits", description="Precision limits for surface-crack imaging.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, hlp in (("qfim", "quantum Fisher information of (width, depth)"),
                      ("fim-ms", "mode-sorting Fisher information"),
                      ("fim-di", "direct-imaging Fisher information"),
                      ("mode-contrib", "per-mode probabilities and Fisher contributions")):
        p = sub.add_parser(name, help=hlp)
        _point(p)
        _common(p)
    for name, hlp in (("crb-sweep", "CRB diagonals along a sweep"),
                      ("chernoff-sweep", "Chernoff exponents and fidelity bound along a sweep"),
                      ("modes-sweep", "per-mode Fisher contributions along a sweep")):
        p = sub.add_parser(name, help=hlp)
        _sweep(p)
        _common(p)
    p = sub.add_parser("selftest", help="run the invariant suite")
    p.add_argument("--verbose", action="store_true")
    return parser


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    out = {}
    for key, value in raw.items():
        dest = _CONFIG_KEYS.get(key, key.replace("-", "_"))
        if dest == "var" and value in ("delta_x", "delta_z"):
            value = "dx" if value == "delta_x" else "dz"
        out[dest] = value
    return out


def _resolve(args: argparse.Namespace) -> dict:
    """Flags override the config file, which overrides built-in defaults."""
    conf = _load_config(getattr(args, "config", None))
    wanted = conf.pop("command", args.command)
    if wanted != args.command:
        raise ConfigError(f"config is for {wanted!r}, not {args.command!r}")
    opts = dict(_DEFAULTS)
    for key, value in conf.items():
        if key not in opts:
            raise ConfigError(f"unknown config key {key!r}")
        opts[key] = value
    for key in opts:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    if opts["format"] not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json; got {opts['format']!r}")
    return opts


def _need(opts: dict, *keys: str) -> None:
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + k for k in missing))


def _fmt(value) -> str:
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def _metadata(opts: dict, command: str) -> dict:
    return {
        "tool": "surfacelimits",
        "version": __version__,
        "command": command,
        "kzr": float(opts["kzr"]),
        "modes_max_order": int(opts["modes_max_order"]),
        "quad_tol": float(opts["quad_tol"]),
    }


def render(columns: list[str], rows: list[dict], meta: dict, fmt: str) -> str:
    if fmt == "json":
        clean = [{k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in r.items()}
                 for r in rows]
        return json.dumps({"metadata": meta, "columns": columns, "rows": clean}, indent=1) + "\n"
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}: {_fmt(value)}\n")
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(r[c]) for c in columns) + "\n")
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _point_rows(command: str, opts: dict):
    from .direct_imaging import QuadratureGrid, fim_di_detail
    from .modesort import fim_ms
    from .qfim import qfim_reduced, reparametrize
    from .scenes import CRACK_PARAMS, crack, crack_jacobian

    _need(opts, "dx", "dz")
    dx, dz, kzr = float(opts["dx"]), float(opts["dz"]), float(opts["kzr"])
    basis = ModeBasis(int(opts["modes_max_order"]))
    if command == "mode-contrib":
        cols = ["dx", "dz", "j", "l", "p", "fim_dx", "fim_dz", "fim_dxdz"]
        rows = [dict(dx=dx, dz=dz, j=m.j, l=m.l, p=p, fim_dx=fx, fim_dz=fz, fim_dxdz=fxz)
                for m, p, fx, fz, fxz in mode_contributions(dx, dz, kzr, basis)]
        return cols, rows
    sc = crack(dx, dz, kzr)
    jac = crack_jacobian()
    params = list(CRACK_PARAMS)
    err = None
    if command == "qfim":
        f = reparametrize(qfim_reduced(sc, params), jac)
    elif command == "fim-ms":
        f = fim_ms(sc, basis, params, jacobian=jac)
    else:
        res = fim_di_detail(sc, params, QuadratureGrid(target_tol=float(opts["quad_tol"])), jac)
        f, err = res.fisher, res.error
    row = dict(dx=dx, dz=dz, f_dxdx=f.matrix[0, 0], f_dxdz=f.matrix[0, 1], f_dzdz=f.matrix[1, 1])
    cols = ["dx", "dz", "f_dxdx", "f_dxdz", "f_dzdz"]
    if err is not None:
        row["err"] = err
        cols.append("err")
    return cols, [{k: (float(v) if k not in ("j", "l") else v) for k, v in row.items()}]


def _sweep_rows(command: str, opts: dict):
    _need(opts, "var", "lo", "hi", "points")
    var = opts["var"]
    other = "dz" if var == "dx" else "dx"
    _need(opts, other)
    task = {"crb-sweep": "crb", "chernoff-sweep": "chernoff", "modes-sweep": "fim-modes"}[command]
    spec = SweepSpec(
        variable=var, lo=float(opts["lo"]), hi=float(opts["hi"]), points=int(opts["points"]),
        fixed=float(opts[other]), task=task, scale="log" if opts["log"] else "linear",
        kzr=float(opts["kzr"]), max_order=int(opts["modes_max_order"]), quad_tol=float(opts["quad_tol"]),
    )
    cols = task_columns(task, ModeBasis(spec.max_order))
    rows = [r.as_dict(cols) for r in run_sweep(spec, workers=int(opts["workers"]))]
    return ["dx", "dz"] + cols + ["status"], rows


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        if args.command == "selftest":
            from .selftest import run_selftest
            return EXIT_OK if run_selftest(verbose=args.verbose) else EXIT_COMPUTE
        opts = _resolve(args)
        if args.command in ("crb-sweep", "chernoff-sweep", "modes-sweep"):
            cols, rows = _sweep_rows(args.command, opts)
        else:
            cols, rows = _point_rows(args.command, opts)
        meta = _metadata(opts, args.command)
        _emit(render(cols, rows, meta, opts["format"]), opts["out"])
    except ConfigError as exc:
        print(f"surfacelimits: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (SurfaceLimitsError, ValueError, ArithmeticError, OSError) as exc:
        print(f"surfacelimits: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


def main() -> None:
    sys.exit(cli_main())
