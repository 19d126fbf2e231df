"""Command-line front end: ``onebitdet <subcommand> [options]``."""
import argparse
import csv
import io
import json
import logging
import sys

import numpy as np

from . import experiments as ex
from .config import EXPERIMENTS, ConfigError, RunConfig, build_config, parse_config
from .experiments import DetectorSpec, ThetaSource
from .model import matrix_rng
from .quantizer import SingularFIMError, crb, noncentrality

log = logging.getLogger("onebitdet")

ROC_COLUMNS = ("detector", "p_fa_internal", "p_fa", "p_d", "threshold", "trials", "seed")
TIMING_COLUMNS = ("detector", "runs", "mean_seconds", "seed")
CRB_COLUMNS = ("index", "theta", "crb")


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def roc_rows(result, p_fa_internal=None):
    rows = []
    for name, curve in result.curves.items():
        pfa_int = (p_fa_internal or {}).get(name)
        for pf, pd, th in zip(curve.p_fa, curve.p_d, curve.thresholds):
            rows.append({
                "detector": name, "p_fa_internal": pfa_int, "p_fa": float(pf), "p_d": float(pd),
                "threshold": float(th), "trials": result.trials, "seed": result.seed,
            })
    return rows


def render(rows, columns, meta, fmt):
    """CSV with ``#`` metadata lines, or a JSON mirror of the same content."""
    if fmt == "json":
        body = {"meta": dict(meta), "columns": list(columns),
                "rows": [{c: r.get(c) for c in columns} for r in rows]}
        return json.dumps(body, indent=2, allow_nan=True) + "\n"
    buf = io.StringIO()
    for k, v in meta:
        buf.write(f"# {k}={v}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def read_csv(text):
    """Parse a CSV emitted by :func:`render` back into (meta, rows of strings)."""
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        else:
            body.append(line)
    return meta, list(csv.DictReader(body))


def _double_names(cfg, specs):
    return {s.name: s.p_fa_internal for s in specs if s.detector is ex.DetectorId.DOUBLE}


def run_experiment(cfg):
    """Execute ``cfg.experiment``; returns (rows, columns, text_for_stdout_or_None)."""
    sc = cfg.scenario_config()
    src = ThetaSource(cfg.dd_theta_source)
    if cfg.experiment == "roc":
        spec = DetectorSpec(cfg.detector, cfg.p_fa_internal, src)
        batch = ex.run_trials(sc, spec, cfg.trials, cfg.seed)
        result = ex.ExperimentResult("roc", {spec.name: ex.roc_from_batch(batch, cfg.grid_size, spec.name)},
                                     sc, cfg.trials, cfg.seed)
        return roc_rows(result, _double_names(cfg, [spec])), ROC_COLUMNS
    if cfg.experiment == "pfa-sweep":
        result = ex.experiment_pfa_sweep(cfg.snr_db, cfg.trials, cfg.seed, sc, cfg.grid_size, src)
        return roc_rows(result, result.meta["p_fa_internal"]), ROC_COLUMNS
    if cfg.experiment == "compare":
        result = ex.experiment_comparison(cfg.trials, cfg.seed, sc, cfg.grid_size, cfg.p_fa_internal, src)
        return roc_rows(result, {k: cfg.p_fa_internal for k in result.curves if k.startswith("double")}), ROC_COLUMNS
    if cfg.experiment == "spectrum":
        rows = []
        for n in cfg.spectrum_sensors:
            result = ex.experiment_spectrum(n, cfg.trials, cfg.seed, cfg.snr_db, cfg.grid_size,
                                            cfg.p_fa_internal, src, config=sc)
            result.curves = {f"{k}[N={n}]": v for k, v in result.curves.items()}
            rows += roc_rows(result, {k: cfg.p_fa_internal for k in result.curves if k.startswith("double")})
        return rows, ROC_COLUMNS
    if cfg.experiment == "timing":
        res = ex.experiment_timing(cfg.runs, cfg.seed, sc, cfg.p_fa_internal)
        return [{"detector": r.detector, "runs": r.runs, "mean_seconds": r.mean_seconds, "seed": cfg.seed}
                for r in res], TIMING_COLUMNS
    if cfg.experiment == "crb":
        scenario = ex.experiment_scenario(sc, cfg.seed)
        diag = crb(scenario, scenario.theta)
        lam = noncentrality(scenario, scenario.theta)
        rows = [{"index": i, "theta": float(t), "crb": float(c)} for i, (t, c) in enumerate(zip(scenario.theta, diag))]
        return rows, CRB_COLUMNS, [("noncentrality", _cell(lam))]
    raise ConfigError("experiment", f"unknown experiment {cfg.experiment!r}")


def build_parser():
    parser = argparse.ArgumentParser(prog="onebitdet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(EXPERIMENTS) + "}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--snr-db", type=float)
    common.add_argument("-N", "--n-sensors", type=int, dest="N")
    common.add_argument("-M", "--dim", type=int, dest="M")
    common.add_argument("--theta", help="comma-separated signal entries")
    common.add_argument("--p-fa-internal", type=float)
    common.add_argument("--dd-theta-source", choices=[s.value for s in ThetaSource])
    common.add_argument("--norm-mode", choices=["unit", "oracle", "raw"])
    common.add_argument("--sparsity", type=int)
    common.add_argument("--biht-iterations", type=int)
    common.add_argument("--redraw-matrix", action="store_true", default=None)
    common.add_argument("--grid-size", type=int)
    common.add_argument("--runs", type=int, help="timing runs")
    common.add_argument("--detector", help="detector for the roc subcommand")
    common.add_argument("--spectrum-sensors", help="comma-separated sensor counts for spectrum")
    common.add_argument("-o", "--output", help="output file (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("-v", "--verbose", action="store_true")
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args):
    base = RunConfig()
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            base = parse_config(fh.read())
    overrides = {"experiment": args.command}
    for key in ("trials", "seed", "snr_db", "N", "M", "p_fa_internal", "dd_theta_source", "norm_mode",
                "sparsity", "biht_iterations", "redraw_matrix", "grid_size", "runs", "detector", "output"):
        v = getattr(args, key)
        if v is not None:
            overrides[key] = v
    if args.theta is not None:
        overrides["theta"] = parse_config(f"theta = {args.theta}").theta
    if args.spectrum_sensors is not None:
        overrides["spectrum_sensors"] = parse_config(f"spectrum_sensors = {args.spectrum_sensors}").spectrum_sensors
    return build_config(overrides, base)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve_config(args)
        # the output path is left out so identical runs give identical files
        meta = [(k, v) for k, v in cfg.as_items() if k != "output"]
        log.info("resolved config: %s", dict(meta))
        if cfg.experiment == "info":
            text = render([], (), meta, args.format) if args.format == "json" else "".join(f"{k} = {v}\n" for k, v in meta)
        else:
            out = run_experiment(cfg)
            rows, columns = out[0], out[1]
            extra = out[2] if len(out) > 2 else []
            text = render(rows, columns, meta + extra, args.format)
        if cfg.output:
            with open(cfg.output, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
            if cfg.experiment == "crb":
                for k, v in extra:
                    print(f"{k} = {v}", file=sys.stderr)
    except (ConfigError, SingularFIMError, ex.TrialError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
