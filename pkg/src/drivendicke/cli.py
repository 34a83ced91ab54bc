"""Command-line entry point.

Exit status is 0 on success, 1 for configuration errors and 2 for numerical
failures.  ``DRIVENDICKE_LOG`` sets the log level (default WARNING).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, config as cfg
from .errors import ConfigError, DickeError, NumericalError
from .model import ModelParams
from .observables import eof
from .pipeline import solve

log = logging.getLogger("drivendicke")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _metadata(config: cfg.RunConfig, command: str) -> dict:
    return {"command": command, "version": __version__, "config": config.to_dict()}


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(text: str, path: str, suffix: str = ""):
    if not path:
        sys.stdout.write(text)
        return
    target = Path(path)
    if suffix:
        target = target.with_name(target.stem + suffix)
    target.write_text(text)


def run_quasienergies(config: cfg.RunConfig) -> dict:
    """Quasienergy ladders over a g sweep with system energies and sidebands.

    A level pair is flagged as crossing when E_n - E_n' is within the
    tolerance of the drive frequency.
    """
    spec = config.quasienergies
    base = config.model
    rows, crossings = [], []
    for g in spec.grid():
        sol = solve(base.replace(g=float(g), g_prime=float(g) * _prime_ratio(base)))
        E = np.asarray(sol.system.energies)
        labels = sol.basis.labels
        eps_of = {int(e): float(x) for e, x in zip(labels.eig_index, sol.basis.eps)}
        n_levels = min(spec.n_levels, len(E))
        for n in range(n_levels):
            rows.append((float(g), n, float(E[n]), eps_of[n],
                         float(E[n] - base.omega_d), float(E[n] + base.omega_d)))
            for k in range(n_levels):
                if k != n and abs(E[n] - E[k] - base.omega_d) < spec.tolerance:
                    crossings.append((float(g), n, k, float(E[n] - E[k] - base.omega_d)))
    return {"header": ("g", "n", "E", "eps", "E_minus_wd", "E_plus_wd"), "rows": rows,
            "crossings": crossings}


def _prime_ratio(model: ModelParams) -> float:
    return model.g_prime / model.g if model.g > 0 else 0.0


def run_spectrum(config: cfg.RunConfig) -> dict:
    sol = solve(config.model)
    omega = config.spectrum.grid()
    peaks = sol.peaks()
    S = peaks.evaluate(omega, sol.bath)
    return {"omega": omega, "S": S, "peaks": peaks.to_records(),
            "elastic": [{"frequency": f, "weight": w} for f, w in peaks.elastic]}


def run_g2(config: cfg.RunConfig) -> dict:
    sol = solve(config.model)
    out = {"g2_0": sol.g2_zero()}
    if config.g2.n_tau:
        tau = config.g2.grid()
        out["tau"] = tau
        out["g2"] = sol.g2_tau(tau)
    return out


def run_eof(config: cfg.RunConfig) -> dict:
    sol = solve(config.model)
    state = sol.emitter_state()
    C = sol.concurrence()
    return {"concurrence": C, "eof": eof(C), "x_form_residual": state.x_form_residual,
            "rho4_re": state.rho4.real, "rho4_im": state.rho4.imag}


def _sweep_point(args):
    params, observable = args
    try:
        sol = solve(params)
        if observable == "g2":
            value = sol.g2_zero()
        elif observable == "flux":
            value = sol.flux()
        else:
            value = sol.eof()
        return float(value), ""
    except DickeError as exc:
        return float("nan"), f"{type(exc).__name__}: {exc}"


def run_sweep(config: cfg.RunConfig, workers: int = 1) -> dict:
    spec = config.sweep
    Ts, gs = spec.grids()
    ratio = _prime_ratio(config.model)
    points = [config.model.replace(T=float(T), g=float(g), g_prime=float(g) * ratio)
              for T in Ts for g in gs]
    jobs = [(p, spec.observable) for p in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(job) for job in jobs]
    keys = ("N", "g", "g_prime", "Omega", "Omega_prime", "T", "gamma", "n_ph")
    rows = [tuple(getattr(p, k) for k in keys) + (value, err)
            for p, (value, err) in zip(points, results)]
    return {"header": keys + (spec.observable, "error"), "rows": rows}


def _render(command: str, result: dict, config: cfg.RunConfig) -> list[tuple[str, str]]:
    """Rendered outputs as (file-suffix, text) pairs; the empty suffix is the main file."""
    fmt = config.output.format
    meta = _metadata(config, command)
    if fmt == "json":
        payload = dict(result)
        if "rows" in payload:
            payload["rows"] = [dict(zip(result["header"], r)) for r in result["rows"]]
            payload.pop("header")
        return [("", _json_text({"metadata": meta, "result": payload}))]

    if command in ("quasienergies", "sweep"):
        out = [("", _csv_text(result["header"], result["rows"]))]
        if command == "quasienergies":
            out.append((".crossings.csv", _csv_text(("g", "n", "n_prime", "mismatch"),
                                                    result["crossings"])))
        return out
    if command == "spectrum":
        return [("", _csv_text(("omega", "S"), zip(result["omega"], result["S"]))),
                (".peaks.json", _json_text({"metadata": meta, "peaks": result["peaks"],
                                            "elastic": result["elastic"]}))]
    if command == "g2":
        if "tau" in result:
            return [("", _csv_text(("tau", "g2"), zip(result["tau"], result["g2"])))]
        return [("", _csv_text(("g2_0",), [(result["g2_0"],)]))]
    if command == "eof":
        rows = [("concurrence", result["concurrence"]), ("eof", result["eof"]),
                ("x_form_residual", result["x_form_residual"])]
        for i in range(4):
            for j in range(4):
                rows.append((f"rho{i + 1}{j + 1}_re", result["rho4_re"][i, j]))
                rows.append((f"rho{i + 1}{j + 1}_im", result["rho4_im"][i, j]))
        return [("", _csv_text(("quantity", "value"), rows))]
    raise ConfigError(f"unknown command {command}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="drivendicke",
                     description="Floquet master-equation observables of laser-driven emitters in a cavity.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML configuration file")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), help="output format")
    common.add_argument("--workers", type=int, default=1, help="parallel sweep workers")
    common.add_argument("--override", metavar="KEY=VALUE", action="append", default=[],
                        help="override a config value, e.g. model.g=0.5 (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (("quasienergies", "quasienergy ladders over a g sweep"),
                       ("spectrum", "emission spectrum and peak table"),
                       ("g2", "second-order Glauber function"),
                       ("eof", "two-emitter concurrence and entanglement of formation"),
                       ("sweep", "(T, g) grid of g2(0), EOF or output flux")):
        sub.add_parser(name, parents=[common], help=text, description=text)
    return parser


def load_config(args) -> cfg.RunConfig:
    config = cfg.load(args.config) if args.config else cfg.RunConfig()
    config = cfg.apply_overrides(config, args.override)
    output = {"path": args.out if args.out is not None else config.output.path,
              "format": args.format or config.output.format}
    return cfg.apply_overrides(config, [f"output.{k}={json.dumps(v)}" for k, v in output.items()])


def _setup_logging():
    level = os.environ.get("DRIVENDICKE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _setup_logging()
    try:
        args = build_parser().parse_args(argv)
        config = load_config(args)
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        runners = {"quasienergies": run_quasienergies, "spectrum": run_spectrum,
                   "g2": run_g2, "eof": run_eof}
        if args.command == "sweep":
            result = run_sweep(config, workers=args.workers)
        else:
            result = runners[args.command](config)
        for suffix, text in _render(args.command, result, config):
            if suffix and not config.output.path:
                continue
            _emit(text, config.output.path, suffix)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
