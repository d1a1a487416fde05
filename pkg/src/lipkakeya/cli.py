"""Command line entry point: sweep, probe-holder, campaign, verify, eval."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from lipkakeya import covering as cov
from lipkakeya import experiments as ex
from lipkakeya.geometry import Rect, UnitVec
from lipkakeya.maximal import (RectFamily, ScalarField, density_table, disc_indicator,
                               eval_M_K_eps, eval_M_kappa, eval_M_v, eval_M_v_delta,
                               load_csv_field, load_scalar_field, save_scalar_field)
from lipkakeya.vectorfield import VectorField

EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2


def _log(msg: str):
    print(msg, file=sys.stderr)


def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text, encoding="utf-8")


def config_from_args(args) -> ex.ExperimentConfig:
    cfg = ex.load_config(args.config) if args.config else ex.ExperimentConfig()
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ex.ConfigError("seed must be an unsigned 64-bit integer")
        cfg.seed = args.seed
    if args.kappa is not None:
        cfg.kappa = args.kappa
    if args.threads is not None:
        cfg.threads = args.threads
    if args.out is not None:
        cfg.out = args.out
    return cfg.validate()


# ------------------------------------------------------------- subcommands

def cmd_sweep(cfg, args) -> int:
    t0 = time.perf_counter()
    rows, slopes = ex.weak_type_sweep(cfg)
    out = Path(cfg.out)
    _write(out, "sweep.csv", ex.rows_to_csv(rows, ex.CSV_COLUMNS))
    _write(out, "sweep_slopes.csv", "radius,slope\n"
           + "".join(f"{r!r},{s!r}\n" for r, s in slopes.items()))
    _log(f"sweep: {len(rows)} rows in {time.perf_counter() - t0:.1f}s; slopes {slopes}")
    return EXIT_OK


def cmd_probe(cfg, args) -> int:
    t0 = time.perf_counter()
    res = ex.holder_probe(cfg)
    out = Path(cfg.out)
    _write(out, "holder.csv", ex.rows_to_csv(res["rows"], ("scale", "field", "n_terms",
                                                           "quantity", "family_size",
                                                           "reach")))
    _write(out, "holder.json", json.dumps({"alpha": res["alpha"],
                                           "nondecreasing": res["nondecreasing"],
                                           "reach_nondecreasing": res["reach_nondecreasing"],
                                           "control_ratio": res["control_ratio"]},
                                          sort_keys=True, indent=1) + "\n")
    _log(f"probe-holder: nondecreasing={res['nondecreasing']} "
         f"control ratio={res['control_ratio']:.3f} ({time.perf_counter() - t0:.1f}s)")
    return EXIT_OK


def cmd_campaign(cfg, args) -> int:
    t0 = time.perf_counter()
    bundle = ex.run_campaign(cfg)
    out = Path(cfg.out)
    _write(out, "campaign.json", cov.dumps(bundle) + "\n")
    _write(out, "campaign_summary.csv", ex.summary_csv(bundle["summary"]))
    s = bundle["summary"]
    _log(f"campaign: {s['n_instances']} instances, {s['n_errors']} errors, "
         f"lemmas_ok={s['lemmas_ok']} stable={s['stable']} ({time.perf_counter() - t0:.1f}s)")
    return EXIT_OK if s["lemmas_ok"] else EXIT_VIOLATION


def load_family(path) -> tuple[RectFamily, VectorField, float]:
    """JSON: {"field": {"kind", "params", "domain"}, "delta", "rects": [[cx, cy, angle, L, W]]}."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        fd = doc["field"]
        v = VectorField(fd["kind"], dict(fd.get("params", {})),
                        tuple(fd.get("domain", (0.0, 0.0, 1.0, 1.0))))
        delta = float(doc.get("delta", 0.25))
        rects = [Rect((r[0], r[1]), UnitVec(r[2]), r[3], r[4], k)
                 for k, r in enumerate(doc["rects"])]
    except (OSError, KeyError, TypeError, IndexError, ValueError) as e:
        raise ex.ConfigError(f"bad family file: {e}") from None
    return RectFamily.from_rects(rects, delta=delta, nu=v.nu), v, delta


def cmd_verify(cfg, args) -> int:
    if not args.family:
        raise ex.ConfigError("verify needs --family <json>")
    fam, v, delta = load_family(args.family)
    cr, uds, reports = cov.run_pipeline(fam, v, cfg.kappa)
    out = Path(cfg.out)
    _write(out, "verify.json", cov.dumps(cov.bundle(cr, uds, reports)) + "\n")
    _write(out, "selection.log", cov.write_log(cr))
    bad = [r.name for r in reports if r.name in ex.ZERO_VIOLATION and r.violations]
    _log(f"verify: {len(cr.selected)} selected, {len(uds)} hosts, violations in {bad or 'none'}")
    return EXIT_VIOLATION if bad else EXIT_OK


def _input_field(cfg, args) -> ScalarField:
    if args.input:
        p = Path(args.input)
        try:
            if p.suffix == ".csv":
                return load_csv_field(p, cfg.grid.pitch)
            return load_scalar_field(p)
        except (OSError, ValueError) as e:
            raise ex.ConfigError(f"bad input field: {e}") from None
    return disc_indicator(cfg.grid.n, cfg.grid.pitch, cfg.sweep.radii[0])


def _support_box(f: ScalarField):
    idx = np.argwhere(f.values > 0)
    if idx.size == 0:
        return None
    lo, hi = idx.min(axis=0), idx.max(axis=0)
    ox, oy = f.origin
    return (ox + lo[0] * f.pitch, oy + lo[1] * f.pitch, ox + hi[0] * f.pitch, oy + hi[1] * f.pitch)


def cmd_eval(cfg, args) -> int:
    f = _input_field(cfg, args)
    op = args.operator
    if op == "mvd":
        v = ex.build_field(cfg)
        roi = _support_box(f)
        if roi is None:
            mf_vals, wit = np.zeros(f.shape), np.full(f.shape, -1, dtype=np.int64)
        else:
            table = density_table(v, f.box, ex.sampler(cfg), ex.enum_spec(cfg, v), roi=roi)
            fam = table.family(args.delta)
            if len(fam) == 0:
                mf_vals, wit = np.zeros(f.shape), np.full(f.shape, -1, dtype=np.int64)
            else:
                mf = eval_M_v_delta(f, fam, skip_zero=True)
                mf_vals, wit = mf.values, mf.argmax
    elif op == "kakeya":
        mf = eval_M_K_eps(f, args.eps)
        mf_vals, wit = mf.values, mf.argmax
    elif op == "mkappa":
        mf = eval_M_kappa(f, cfg.kappa)
        mf_vals, wit = mf.values, mf.argmax
    else:
        mf = eval_M_v(f, ex.build_field(cfg))
        mf_vals, wit = mf.values, mf.argmax
    if not np.all(np.isfinite(mf_vals)):
        _log("eval: non-finite output")
        return EXIT_VIOLATION
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_scalar_field(out / f"{op}.bin", ScalarField(f.origin, f.pitch, mf_vals))
    np.savetxt(out / f"{op}_argmax.csv", wit, fmt="%d", delimiter=",")
    _log(f"eval {op}: max {float(mf_vals.max()):.6g}")
    return EXIT_OK


COMMANDS = {"sweep": cmd_sweep, "probe-holder": cmd_probe, "campaign": cmd_campaign,
            "verify": cmd_verify, "eval": cmd_eval}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lipkakeya", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int)
    common.add_argument("--kappa", type=int)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep", parents=[common], help="weak-type delta sweep")
    sub.add_parser("probe-holder", parents=[common], help="Hoelder sharpness probe")
    sub.add_parser("campaign", parents=[common], help="randomized covering campaign")
    pv = sub.add_parser("verify", parents=[common], help="covering checks on one family")
    pv.add_argument("--family", help="family JSON file")
    pe = sub.add_parser("eval", parents=[common], help="evaluate one operator on a grid")
    pe.add_argument("--operator", choices=("mvd", "kakeya", "mkappa", "mv"), default="mvd")
    pe.add_argument("--input", help="scalar field (.bin grid file or .csv)")
    pe.add_argument("--delta", type=float, default=0.25)
    pe.add_argument("--eps", type=float, default=0.125)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    try:
        cfg = config_from_args(args)
        if args.command == "eval" and not (0 < args.delta <= 1 and args.eps > 0):
            raise ex.ConfigError("eval needs 0 < delta <= 1 and eps > 0")
        return COMMANDS[args.command](cfg, args)
    except ex.ConfigError as e:
        _log(f"config error: {e}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
