"""Command line: ``solgeo run|sweep|export``.

Exit codes: 0 all tolerances met, 1 a tolerance failed (the failing equations
are printed), 2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from pathlib import Path

from . import __version__
from .fields import ResidualReport
from .scenarios import SCHEMA, ConfigError, resolve, run_one, with_levels

log = logging.getLogger("solgeo")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def load_config(path) -> tuple[dict, list[dict]]:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema") != SCHEMA:
        raise ConfigError(f"unsupported schema {cfg.get('schema')!r}; expected {SCHEMA}")
    if "scenarios" in cfg:
        scs = cfg["scenarios"]
        if not isinstance(scs, list) or not scs:
            raise ConfigError("'scenarios' must be a non-empty list")
    elif "kind" in cfg:
        scs = [{k: v for k, v in cfg.items() if k not in ("schema", "output")}]
    else:
        raise ConfigError("config needs 'scenarios' or a top-level 'kind'")
    return cfg, scs


def _table_csv(rep: ResidualReport) -> str:
    import csv
    import io

    buf = io.StringIO()
    if rep.spacings:
        w = csv.DictWriter(buf, fieldnames=["equation", "h", "linf", "order"], lineterminator="\n")
        w.writeheader()
        w.writerows(rep.table_rows())
    else:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["equation", "linf", "l2"])
        for k, (a, b) in rep.norms.items():
            w.writerow([k, repr(a), repr(b)])
    return buf.getvalue()


def execute(config: Path, out: Path | None, seed: int | None, tol: float | None, quiet: bool,
            levels: int | None = None) -> int:
    cfg, scs = load_config(config)
    params = [resolve(sc, seed if seed is not None else cfg.get("seed"), i) for i, sc in enumerate(scs)]
    names = [p["name"] for p in params]
    if len(set(names)) != len(names):
        raise ConfigError(f"scenario names must be unique, got {names}")
    if levels is not None:
        params = [with_levels(p, levels) for p in params]
    out = Path(out or cfg.get("output") or config.with_name(config.stem + "-report"))
    out.mkdir(parents=True, exist_ok=True)
    results = []
    for p in params:
        log.info("running %s (%s)", p["name"], p["kind"])
        res = run_one(p, out, tol)
        rep = res.pop("_report")
        atomic_write(out / f"{p['name']}.csv", _table_csv(rep))
        atomic_write(out / f"{p['name']}.json", dumps(res))
        results.append(res)
        if not quiet:
            for c in res["checks"]:
                flag = "PASS" if c["pass"] else "FAIL"
                print(f"{flag} {p['name']}: {c['equation']} ({c.get('detail', '')})")
    families = sorted({f for r in results for f in r["families"]})
    summary = {
        "schema": SCHEMA,
        "tool": "solgeo",
        "version": __version__,
        "families": families,
        "config": config.name,
        "scenarios": results,
        "pass": all(r["pass"] for r in results),
    }
    atomic_write(out / "report.json", dumps(summary))
    failed = [(r["name"], c["equation"], c.get("detail", "")) for r in results for c in r["checks"] if not c["pass"]]
    for name, eq, detail in failed:
        print(f"tolerance failure in {name}: equation {eq}: {detail}", file=sys.stderr)
    if not quiet:
        print(f"report: {out / 'report.json'}")
    return EXIT_FAIL if failed else EXIT_OK


def export(report: Path, fmt: str, out: Path | None) -> int:
    try:
        data = json.loads(Path(report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report: {exc}") from exc
    scen = data.get("scenarios") if "scenarios" in data else [data]
    if not isinstance(scen, list) or not all(isinstance(s, dict) and "report" in s for s in scen):
        raise ConfigError("not a solgeo report")
    if fmt == "json":
        text = dumps(data)
    else:
        lines = ["scenario,equation,h,linf,order"]
        for s in scen:
            rep = ResidualReport.from_dict(s["report"])
            if rep.spacings:
                for row in rep.table_rows():
                    lines.append(f"{s['name']},{row['equation']},{row['h']!r},{row['linf']!r},{row['order']}")
            else:
                for k, (a, _) in rep.norms.items():
                    lines.append(f"{s['name']},{k},,{a!r},NA")
        text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(Path(out), text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override every scenario seed (u64)")
    common.add_argument("--tol", type=float, default=None,
                        help="finest-level L-inf tolerance as a multiple of the field scale")
    common.add_argument("--quiet", action="store_true", help="only report failures")
    common.add_argument("--out", type=Path, default=None, help="output directory (default: <config>-report)")

    ap = argparse.ArgumentParser(prog="solgeo", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"solgeo {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", parents=[common], help="run every scenario of a config")
    r.add_argument("config", type=Path)
    s = sub.add_parser("sweep", parents=[common], help="run with N refinement levels from each scenario's coarsest")
    s.add_argument("config", type=Path)
    s.add_argument("--levels", type=int, default=3)
    e = sub.add_parser("export", help="re-emit a report as CSV or canonical JSON")
    e.add_argument("report", type=Path)
    e.add_argument("--format", choices=["csv", "json"], default="csv")
    e.add_argument("--output", type=Path, default=None, help="file to write (default: stdout)")
    e.add_argument("--quiet", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s")
    try:
        if args.cmd == "export":
            return export(args.report, args.format, args.output)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        levels = args.levels if args.cmd == "sweep" else None
        if levels is not None and levels < 3:
            raise ConfigError("--levels must be at least 3 to estimate an order")
        return execute(args.config, args.out, args.seed, args.tol, args.quiet, levels)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
