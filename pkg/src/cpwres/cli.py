"""Command-line interface: ``cpwres <command> [options]``.

Commands
  design    line constants and design frequency from a TOML config
  fit       notch fit of one or more S21 traces
  photon    photon number from a fit record and the drive power
  tls-fit   TLS loss-model fit to a Qi vs photon-number table
  synth     synthetic trace from a parameter record
  report    fit + photon + tls-fit over a sweep manifest

Exit status: 0 success, 1 usage error, 2 input or parse error,
3 a fit did not converge (results are still written).
File formats are described in FORMATS.md.
"""

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .design import CpwGeometry, WaferStack, design_report
from .errors import CpwresError, SchemaError
from .ingest import (FORMATS, dumps_record, format_observations, load_record, parse_manifest,
                     parse_observations, parse_trace, write_trace)
from .loss import LossObservation, fit_tls
from .notchfit import NotchFitResult, coupling_diagnostics, fit_notch
from .photon import input_power, photon_number
from .s21 import NotchParams, TraceMetadata, noise_sigma_for_snr, synthesize_trace

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NOCONV = 0, 1, 2, 3

DESIGN_KEYS = {
    "d_si_um": True, "d_sige_um": True, "eps_si": False, "ge_fraction": False,
    "w_um": True, "g_um": True, "length_um": True,
    "f_measured_ghz": False, "qi": False, "lg_uh_per_m": False, "cg_nf_per_m": False,
    "label": False,
}
SYNTH_KEYS = {"fr_hz", "ql", "qc_mag", "phi_rad", "a", "alpha_rad", "tau_s",
              "f_start_hz", "f_stop_hz", "n_points", "p_vna_dbm", "p_att_db", "temperature_k"}
DEFAULT_SYNTH_POINTS = 1001
DEFAULT_SYNTH_LINEWIDTHS = 10.0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt6(value):
    """Six significant digits for terminal output."""
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "nan" if not math.isfinite(value) else f"{value:.6g}"
    return str(value)


def _print_record(rec, out, indent=""):
    width = max((len(k) for k in rec), default=0)
    for key in rec:
        out.write(f"{indent}{key:<{width}} = {fmt6(rec[key])}\n")


def _write_json(path, record):
    Path(path).write_text(dumps_record(record), encoding="utf-8")


# ---------------------------------------------------------------- design

def load_design_config(path):
    try:
        with open(path, "rb") as fh:
            cfg = tomllib.load(fh)
    except FileNotFoundError:
        raise FileNotFoundError(f"{path}: no such file") from None
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from None
    unknown = sorted(set(cfg) - set(DESIGN_KEYS))
    if unknown:
        raise SchemaError(f"{path}: unknown key", unknown[0])
    for key, required in DESIGN_KEYS.items():
        if required and key not in cfg:
            raise SchemaError(f"{path}: required key missing", key)
        if key in cfg and key != "label":
            v = cfg[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise SchemaError(f"{path}: expected a number", key)
    return cfg


def design_from_config(cfg):
    stack = WaferStack(cfg["d_si_um"], cfg["d_sige_um"],
                       eps_si=cfg.get("eps_si", 11.7), ge_fraction=cfg.get("ge_fraction", 0.3))
    geom = CpwGeometry.on_stack(stack, cfg["w_um"], cfg["g_um"], cfg["length_um"])
    return design_report(stack, geom, f_measured=cfg.get("f_measured_ghz"), qi=cfg.get("qi"),
                         lg_ref=cfg.get("lg_uh_per_m"), cg_ref=cfg.get("cg_nf_per_m"))


def cmd_design(args, out):
    cfg = load_design_config(args.config)
    rec = design_from_config(cfg).as_record()
    if "label" in cfg:
        rec = {"label": cfg["label"], **rec}
    _print_record(rec, out)
    if args.out:
        _write_json(args.out, rec)
    return EXIT_OK


# ---------------------------------------------------------------- fit

def _fit_one(job):
    path, fmt = job
    result = fit_notch(parse_trace(path, fmt))
    rec = {"trace": str(path), **result.as_record()}
    rec.update(coupling_diagnostics(result).as_record())
    return rec


def fit_records(paths, fmt="auto", jobs=1):
    """Fit records in input order, fitting in worker processes when jobs > 1."""
    work = [(str(p), fmt) for p in paths]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_fit_one, work))
    return [_fit_one(w) for w in work]


_FIT_SUMMARY = ("fr_hz", "ql", "qc_mag", "phi_rad", "qi", "qi_sigma", "tau_s",
                "coupling_coefficient", "regime", "converged")


def cmd_fit(args, out):
    recs = fit_records(args.traces, args.format, args.jobs)
    for rec in recs:
        out.write(f"[{rec['trace']}]\n")
        _print_record({k: rec[k] for k in _FIT_SUMMARY}, out, "  ")
    if args.out:
        _write_json(args.out, recs if len(recs) > 1 else recs[0])
    return EXIT_OK if all(r["converged"] for r in recs) else EXIT_NOCONV


# ---------------------------------------------------------------- photon

def photon_record(fit_rec, p_vna_dbm, p_att_db):
    result = NotchFitResult.from_record(fit_rec)
    power = input_power(p_vna_dbm, p_att_db)
    calc = photon_number(result.params.ql, result.params.qc_mag, result.qi,
                         result.params.fr, power.p_in_watts)
    return {**power.as_record(), **calc.as_record()}


def cmd_photon(args, out):
    data = load_record(args.fit)
    records = data if isinstance(data, list) else [data]
    if not records or not all(isinstance(r, dict) for r in records):
        raise SchemaError(f"{args.fit}: expected a fit record or a list of them", "$")
    results = []
    for i, rec in enumerate(records):
        vna = args.p_vna_dbm if args.p_vna_dbm is not None else rec.get("p_vna_dbm")
        att = args.p_att_db if args.p_att_db is not None else rec.get("p_att_db")
        if vna is None or att is None:
            raise UsageError("photon: --p-vna-dbm and --p-att-db are required "
                             "when the fit record carries no drive power")
        try:
            prec = photon_record(rec, vna, att)
        except KeyError as exc:
            raise SchemaError("required field missing", f"$[{i}].{exc.args[0]}") from None
        if "trace" in rec:
            prec = {"trace": rec["trace"], **prec}
        results.append(prec)
        if len(records) > 1:
            out.write(f"[{rec.get('trace', i)}]\n")
        _print_record(prec, out, "  " if len(records) > 1 else "")
    if args.out:
        _write_json(args.out, results if isinstance(data, list) else results[0])
    return EXIT_OK


# ---------------------------------------------------------------- tls-fit

def tls_record(observations, weighted=False):
    fit = fit_tls(observations, weighted=weighted)
    return fit.as_record(), fit


def cmd_tls_fit(args, out):
    obs = parse_observations(args.manifest)
    rec, fit = tls_record(obs, args.weighted)
    _print_record(rec, out)
    for note in fit.warnings:
        sys.stderr.write(f"warning: {note}\n")
    if args.out:
        _write_json(args.out, rec)
    return EXIT_OK if fit.converged else EXIT_NOCONV


# ---------------------------------------------------------------- synth

def synth_trace(rec, seed=0, noise=None, snr_db=None):
    if not isinstance(rec, dict):
        raise SchemaError("expected an object", "$")
    unknown = sorted(set(rec) - SYNTH_KEYS)
    if unknown:
        raise SchemaError("unknown key", f"$.{unknown[0]}")
    for key in ("fr_hz", "ql", "qc_mag"):
        if key not in rec:
            raise SchemaError("required field missing", f"$.{key}")
    p = NotchParams.from_record(rec)
    half = 0.5 * DEFAULT_SYNTH_LINEWIDTHS * p.fr / p.ql
    f_start = rec.get("f_start_hz", p.fr - half)
    f_stop = rec.get("f_stop_hz", p.fr + half)
    n = int(rec.get("n_points", DEFAULT_SYNTH_POINTS))
    sigma = 0.0
    if snr_db is not None:
        sigma = noise_sigma_for_snr(p, snr_db)
    elif noise is not None:
        sigma = noise
    meta = TraceMetadata(rec.get("p_vna_dbm"), rec.get("p_att_db"), rec.get("temperature_k"))
    return synthesize_trace(p, f_start, f_stop, n, sigma, seed, meta)


def cmd_synth(args, out):
    trace = synth_trace(load_record(args.params), args.seed, args.noise, args.snr_db)
    write_trace(trace, args.out)
    out.write(f"wrote {len(trace)} points to {args.out}\n")
    return EXIT_OK


# ---------------------------------------------------------------- report

@dataclass
class ReportBundle:
    design_rows: list = field(default_factory=list)
    fit_rows: list = field(default_factory=list)
    tls_rows: list = field(default_factory=list)
    series: dict = field(default_factory=dict)   # name -> {"x", "y", "y_sigma", ...}

    def as_record(self):
        return {"design_rows": self.design_rows, "fit_rows": self.fit_rows,
                "tls_rows": self.tls_rows, "series": self.series}


def _safe(name):
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in str(name))


def build_report(manifest_path, design_configs=(), jobs=1, weighted=False):
    """Returns (bundle, files) where ``files`` maps output names to text."""
    manifest = parse_manifest(manifest_path)
    bundle = ReportBundle()
    for cfg_path in design_configs:
        cfg = load_design_config(cfg_path)
        row = design_from_config(cfg).as_record()
        bundle.design_rows.append({"label": cfg.get("label", Path(cfg_path).stem), **row})

    paths = [manifest.resolve(e) for e in manifest.entries]
    fmts = {e.format for e in manifest.entries}
    if len(fmts) == 1:
        fits = fit_records(paths, fmts.pop(), jobs)
    else:
        fits = [_fit_one((str(p), e.format)) for p, e in zip(paths, manifest.entries)]

    by_label = {}
    for entry, fit in zip(manifest.entries, fits):
        row = {"label": entry.label, "trace": entry.trace_path, "temperature_k": entry.temperature_k,
               "fit": {k: v for k, v in fit.items() if k != "trace"}, "photon": None}
        if entry.power is not None:
            row["photon"] = photon_record(fit, entry.p_vna_dbm, entry.p_att_db)
            by_label.setdefault(entry.label, []).append(LossObservation(
                row["photon"]["n_ph"], entry.temperature_k, fit["fr_hz"], fit["qi"], fit["qi_sigma"]))
        bundle.fit_rows.append(row)

    files = {}
    for label in sorted(by_label):
        obs = by_label[label]
        obs_text = format_observations(obs)
        files[f"observations_{_safe(label)}.csv"] = obs_text
        for temp in sorted({o.temperature for o in obs}):
            pts = sorted((o for o in obs if o.temperature == temp), key=lambda o: o.n_ph)
            name = f"{label}@{temp:g}K"
            bundle.series[name] = {"label": label, "temperature_k": temp,
                                   "x_name": "n_ph", "y_name": "qi",
                                   "x": [o.n_ph for o in pts], "y": [o.qi_measured for o in pts],
                                   "y_sigma": [o.qi_sigma for o in pts]}
            lines = ["n_ph,qi,qi_sigma"]
            lines += [f"{o.n_ph!r},{o.qi_measured!r},{'' if o.qi_sigma is None else repr(o.qi_sigma)}"
                      for o in pts]
            files[f"series_{_safe(label)}_{temp * 1e3:g}mK.csv"] = "\n".join(lines) + "\n"
        if len(obs) >= 4:
            # refit from the serialized table so the result equals `tls-fit` on that file
            rec, _ = tls_record(parse_observations(obs_text.encode("utf-8")), weighted)
            bundle.tls_rows.append({"label": label, **rec})
    files["report.json"] = dumps_record(bundle.as_record())
    return bundle, files


def cmd_report(args, out):
    bundle, files = build_report(args.manifest, args.design_config or (), args.jobs, args.weighted)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in sorted(files):
        (out_dir / name).write_text(files[name], encoding="utf-8")
        out.write(f"wrote {out_dir / name}\n")
    for row in bundle.tls_rows:
        out.write(f"[{row['label']}]\n")
        _print_record({k: row[k] for k in ("q_tls0", "n_c", "beta", "q0", "converged")}, out, "  ")
    ok = all(r["fit"]["converged"] for r in bundle.fit_rows) and all(r["converged"] for r in bundle.tls_rows)
    return EXIT_OK if ok else EXIT_NOCONV


# ---------------------------------------------------------------- entry point

def _jobs(text):
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser():
    parser = _Parser(prog="cpwres", description=__doc__.split("\n\n")[0],
                     epilog="Exit status: 0 ok, 1 usage, 2 input/parse error, 3 non-convergence. "
                            "See FORMATS.md for file formats.")
    parser.add_argument("--version", action="version", version=f"cpwres {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("design", help="line constants from a wafer/geometry config",
                       description="Keys: " + ", ".join(DESIGN_KEYS))
    p.add_argument("--config", required=True, help="flat TOML file")
    p.add_argument("--out", help="write the JSON record here")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("fit", help="notch fit of S21 traces")
    p.add_argument("traces", nargs="+")
    p.add_argument("--format", choices=FORMATS, default="auto")
    p.add_argument("--jobs", type=_jobs, default=1, help="worker processes (default 1)")
    p.add_argument("--out", help="JSON output; a list when several traces are given")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("photon", help="average photon number from a fit record")
    p.add_argument("--fit", required=True, help="JSON fit record (or list) written by `fit --out`")
    p.add_argument("--p-vna-dbm", type=float)
    p.add_argument("--p-att-db", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_photon)

    p = sub.add_parser("tls-fit", help="fit the TLS loss model to a Qi table")
    p.add_argument("--manifest", required=True, help="CSV: n_ph,temperature_k,fr_hz,qi,qi_sigma")
    p.add_argument("--weighted", action="store_true", help="weight residuals by qi_sigma")
    p.add_argument("--out")
    p.set_defaults(func=cmd_tls_fit)

    p = sub.add_parser("synth", help="write a synthetic notch trace")
    p.add_argument("--params", required=True, help="JSON parameter record")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--noise", type=float, help="per-quadrature noise sigma")
    g.add_argument("--snr-db", type=float, help="noise from the resonance-circle SNR")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="fit, calibrate and model a whole sweep")
    p.add_argument("--manifest", required=True, help="JSON sweep manifest")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--design-config", action="append", help="add a design row (repeatable)")
    p.add_argument("--jobs", type=_jobs, default=1)
    p.add_argument("--weighted", action="store_true")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except (CpwresError, ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
