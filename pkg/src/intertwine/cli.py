"""Command-line entry point: ``intertwine run|list|verify|export``.

Exit codes: 0 all checks pass, 1 some check failed, 2 invalid configuration,
3 runtime failure (blow-up, window violation, unstable step).
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .errors import ConfigError, IntertwineError
from .scenarios import builtin_config, catalog, parse_config, run_scenario

log = logging.getLogger("intertwine")

#: maximum number of time slices written per field CSV
MAX_SLICES = 21


def _anchor(text, message):
    """Line number of the config key named in ``message`` (``config.a.b: ...``), or None."""
    head = message.split(":", 1)[0]
    if not head.startswith("config"):
        head = "config." + head
    pos, line = 0, None
    for part in head.replace("]", "").replace("[", ".").split(".")[1:]:
        if not part or part.isdigit():
            continue
        i = text.find(f'"{part}"', pos)
        if i < 0:
            break
        pos = i + 1
        line = text.count("\n", 0, i) + 1
    return line


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("unreadable-config", f"{path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("invalid-json", f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        return cfg, parse_config(cfg)
    except ConfigError as exc:
        line = _anchor(text, exc.message)
        if line is not None:
            exc.message = f"{path}:{line}: {exc.message}"
        raise


def override_tolerances(cfg, tol):
    """Copy of ``cfg`` with every check tolerance set to ``tol``."""
    cfg = json.loads(json.dumps(cfg))
    for c in cfg.get("checks", []):
        c["tol"] = tol
    return cfg


def write_field_csv(path, snaps, every=None):
    """Write ``x,t,re,im`` rows for every ``every``-th snapshot (default: at most MAX_SLICES)."""
    stride = every or max(1, -(-(len(snaps) - 1) // (MAX_SLICES - 1)))
    idx = list(range(0, len(snaps), stride))
    if idx[-1] != len(snaps) - 1:
        idx.append(len(snaps) - 1)
    x = snaps.grid.x
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,t,re,im\n")
        for k in idx:
            t = np.full_like(x, snaps.times[k])
            v = snaps.values[k]
            np.savetxt(fh, np.column_stack([x, t, v.real, v.imag]), fmt="%.17g", delimiter=",")


def write_plot_script(path, names):
    lines = ["set datafile separator ','", "set key autotitle columnhead",
             "set xlabel 'x'", "set ylabel '|psi|'"]
    for name in names:
        lines += [f"set title '{name}'",
                  f"plot '{name}.csv' using 1:(sqrt($3**2+$4**2)) with lines title '{name}'",
                  "pause -1"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_outputs(outdir, report, fields, every=None):
    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    names = sorted(fields)
    for name in names:
        write_field_csv(os.path.join(outdir, f"{name}.csv"), fields[name], every)
    write_plot_script(os.path.join(outdir, "plot.gp"), names)


def summarize(report, out=None):
    out = out or sys.stdout
    for e in report.entries:
        status = "PASS" if e.passed else "FAIL"
        print(f"{status} {e.name} = {e.value:.3e} (tol {e.tolerance:.1e})", file=out)
    for c in report.convergence:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} convergence order {c.order:.3f} (declared {c.declared:g})", file=out)
    for k in sorted(report.flags):
        print(f"flag {k} = {report.flags[k]}", file=out)
    print(f"{report.scenario}: {'PASS' if report.passed else 'FAIL'}", file=out)


def _execute(cfg, scn, outdir):
    report, fields = run_scenario(scn)
    if outdir is not None:
        write_outputs(outdir, report, fields, (scn.output or {}).get("every"))
        if cfg is not None:
            with open(os.path.join(outdir, "config.json"), "w", encoding="utf-8") as fh:
                json.dump(cfg, fh, indent=2)
                fh.write("\n")
    summarize(report)
    return 0 if report.passed else 1


def cmd_run(args):
    cfg, scn = load_config(args.config)
    if args.tol is not None:
        cfg = override_tolerances(cfg, args.tol)
        scn = parse_config(cfg)
    outdir = args.out or (scn.output or {}).get("dir") or os.path.splitext(args.config)[0] + "_out"
    return _execute(None, scn, outdir)


def cmd_list(args):
    for line in catalog():
        print(line)
    return 0


def _builtin(args):
    cfg = builtin_config(args.name)
    if args.tol is not None:
        cfg = override_tolerances(cfg, args.tol)
    return cfg, parse_config(cfg)


def cmd_verify(args):
    cfg, scn = _builtin(args)
    return _execute(None, scn, None)


def cmd_export(args):
    cfg, scn = _builtin(args)
    return _execute(cfg, scn, args.out)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="intertwine",
        description="Build intertwined Schrodinger and diffusion families and verify them numerically.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a scenario from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: config output.dir or <config>_out)")
    p.add_argument("--tol", type=float, help="override every check tolerance")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("list", help="list built-in scenarios")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("verify", help="run a built-in scenario without writing files")
    p.add_argument("name")
    p.add_argument("--tol", type=float, help="override every check tolerance")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export", help="run a built-in scenario and write config and outputs")
    p.add_argument("name")
    p.add_argument("--out", required=True)
    p.add_argument("--tol", type=float, help="override every check tolerance")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except IntertwineError as exc:
        print(f"error [{exc.code}]: {exc.message}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
