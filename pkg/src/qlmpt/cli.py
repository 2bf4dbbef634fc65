"""Command-line entry point.

Every command writes its result (JSON or CSV) to ``--out`` or stdout and,
when ``--out`` is given, a run manifest next to it at ``<out>.manifest.json``.
Exit codes: 0 success, 2 invalid input, 3 degenerate detector.
"""

import argparse
import json
import logging
import sys
import warnings

import numpy as np

from . import __version__
from .design import LQU, PsoParams, are, design, normalized_fi
from .detector import CLAIRVOYANT, DegenerateDetectorError, DegenerateDetectorWarning, fisher_information
from .harness import (
    ConfigError,
    ExperimentConfig,
    design_table_csv,
    fi_sweep_rows,
    run_design_table,
    run_manifest,
    run_mismatch,
    run_pd_vs_sensors,
    run_pd_vs_snr,
    run_roc,
)
from .quantizer import LQ, RQ, QuantizerSpec, build_quantizer
from .signal_model import MODES, SystemConfig

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_DEGENERATE = 3

log = logging.getLogger("qlmpt")

_RUNNERS = {
    "roc": ("pfa", run_roc),
    "pd-vs-m": ("sensors", run_pd_vs_sensors),
    "pd-vs-snr": ("snr", run_pd_vs_snr),
    "mismatch": ("assumed_pe", run_mismatch),
}


class _Parser(argparse.ArgumentParser):
    # argparse exits on its own; raise instead so cli_main can return a code
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text):
    return [int(v) for v in text.replace(",", " ").split()]


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _emit(text, out, manifest=None):
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "w", newline="") as fh:
        fh.write(text)
    if manifest is not None:
        with open(f"{out}.manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _plain_manifest(command, args, extra=None):
    man = {
        "command": command,
        "seed": getattr(args, "seed", None),
        "arguments": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")},
        "versions": {"qlmpt": __version__, "numpy": np.__version__},
    }
    man.update(extra or {})
    return man


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- commands ------------------------------------------------------------------


def _cmd_design(args):
    if args.table:
        res = run_design_table(args.qs, args.pes, args.kinds, args.sigma_w, args.range_factor)
        _emit(design_table_csv(res), args.out, _plain_manifest("design --table", args))
        return EXIT_OK
    if args.kind is None or args.q is None:
        raise ConfigError("design needs --kind and --q (or --table)")
    params = None if args.q == 1 and not args.pso else PsoParams(seed=args.seed)
    res = design(args.kind, args.q, args.pe, args.sigma_w, params=params, range_factor=args.range_factor)
    _emit(_dump(res.to_dict()), args.out, _plain_manifest("design", args))
    return EXIT_OK


def _spec_from_args(args):
    """Quantizer and crossover probability; a design record supplies its own pe."""
    if args.spec is not None:
        d = _load_json(args.spec)
        pe = d.get("pe", 0.0) if args.pe is None else args.pe
        return QuantizerSpec.from_dict(d.get("spec", d)), pe
    if args.kind is None or args.q is None or args.thresholds is None:
        raise ConfigError("fisher needs --spec or --kind, --q and --thresholds")
    return build_quantizer(args.kind, args.q, args.thresholds), (args.pe or 0.0)


def _cmd_fisher(args):
    if args.sweep is not None:
        lo, hi, step = args.sweep
        if not 0 < lo < hi or step <= 0:
            raise ConfigError("--sweep needs 0 < LO < HI and STEP > 0")
        taus = np.arange(lo, hi + step / 2, step)
        rows = ["pe,tau,normalized_fi"]
        rows += [f"{pe:.10g},{t:.10g},{v:.10g}" for pe, t, v in fi_sweep_rows(args.pes, taus)]
        _emit("\n".join(rows) + "\n", args.out, _plain_manifest("fisher --sweep", args))
        return EXIT_OK
    spec, pe = _spec_from_args(args)
    out = {"spec": spec.to_dict(), "pe": pe}
    out["normalized_fi"] = normalized_fi(spec.kind, spec.q, spec.thresholds, pe, args.sigma_w)
    if args.config is not None:
        d = _load_json(args.config)
        cfg = SystemConfig.from_dict(d.get("system", d))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateDetectorWarning)
            fi = fisher_information(spec.kind, cfg, spec, pe=pe, p=args.p)
        out["fisher_information"] = fi
        out["fisher_information_clairvoyant"] = fisher_information(CLAIRVOYANT, cfg, p=args.p)
        out["p"] = args.p
    _emit(_dump(out), args.out, _plain_manifest("fisher", args))
    if out["normalized_fi"] <= 0 or out.get("fisher_information", 1.0) <= 0:
        log.error("quantizer carries no Fisher information")
        return EXIT_DEGENERATE
    return EXIT_OK


def _cmd_are(args):
    params = PsoParams(seed=args.seed) if args.optimizer == "pso" and args.kind != LQU else None
    val = are(args.kind, args.q, args.pe, optimizer=args.optimizer, params=params, range_factor=args.range_factor)
    out = {"kind": args.kind, "q": args.q, "pe": args.pe, "optimizer": args.optimizer, "are": val}
    _emit(_dump(out), args.out, _plain_manifest("are", args))
    if not np.isfinite(val):
        return EXIT_DEGENERATE
    return EXIT_OK


def _experiment(args):
    d = _load_json(args.config)
    for key in ("trials", "seed", "mode"):
        if getattr(args, key) is not None:
            d[key] = getattr(args, key)
    if getattr(args, "calibration", None) is not None:
        d["calibration"] = args.calibration
    return ExperimentConfig.from_dict(d)


def _cmd_run(args):
    axis, runner = _RUNNERS[args.command]
    ecfg = _experiment(args)
    if ecfg.sweep_axis != axis:
        raise ConfigError(f"{args.command} needs sweep axis {axis!r}, config has {ecfg.sweep_axis!r}")
    res = runner(ecfg, workers=args.workers)
    extra = {"degenerate": res.degenerate} if res.degenerate else None
    _emit(res.to_csv(), args.out, run_manifest(ecfg, args.command, extra))
    if res.degenerate:
        log.error("degenerate detectors: %s", ", ".join(sorted(set(res.degenerate))))
        return EXIT_DEGENERATE
    return EXIT_OK


def _cmd_validate(args):
    if args.config is None and args.spec is None:
        raise ConfigError("validate needs --config and/or --spec")
    if args.spec is not None:
        d = _load_json(args.spec)
        QuantizerSpec.from_dict(d.get("spec", d))
    if args.config is not None:
        ecfg = ExperimentConfig.from_dict(_load_json(args.config))
        for entry in ecfg.quantizers:
            if entry.thresholds is not None:
                entry.resolve(ecfg.system.sigma_w, float(ecfg.system.pe[0]))
    print("ok")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser():
    p = _Parser(prog="qlmpt", description="Quantized LMPT detection of sparse stochastic signals.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("design", help="optimize quantizer thresholds")
    s.add_argument("--kind", choices=(RQ, LQ, LQU))
    s.add_argument("--q", type=int)
    s.add_argument("--pe", type=float, default=0.0)
    s.add_argument("--sigma-w", type=float, default=1.0)
    s.add_argument("--range-factor", type=float, default=3.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--pso", action="store_true", help="use the swarm optimizer for q = 1 too")
    s.add_argument("--table", action="store_true", help="emit the ARE table over --qs x --pes x --kinds")
    s.add_argument("--qs", type=_ints, default=[1, 2, 3])
    s.add_argument("--pes", type=_floats, default=[0.0, 0.01, 0.1, 0.2])
    s.add_argument("--kinds", type=lambda t: t.replace(",", " ").split(), default=[RQ, LQU, LQ])
    s.add_argument("--out")
    s.set_defaults(func=_cmd_design)

    s = sub.add_parser("fisher", help="Fisher information of a quantizer")
    s.add_argument("--spec", help="JSON quantizer record (as written by design)")
    s.add_argument("--kind", choices=(RQ, LQ))
    s.add_argument("--q", type=int)
    s.add_argument("--thresholds", type=_floats)
    s.add_argument("--pe", type=float, help="default: the record's design pe, else 0")
    s.add_argument("--sigma-w", type=float, default=1.0)
    s.add_argument("--config", help="system config; adds absolute FI values")
    s.add_argument("--p", type=float, default=0.0)
    s.add_argument("--sweep", type=float, nargs=3, metavar=("LO", "HI", "STEP"), help="one-bit LQ threshold sweep")
    s.add_argument("--pes", type=_floats, default=[0.0, 0.1, 0.2, 0.3])
    s.add_argument("--out")
    s.set_defaults(func=_cmd_fisher)

    s = sub.add_parser("are", help="asymptotic relative efficiency")
    s.add_argument("--kind", choices=(RQ, LQ, LQU), required=True)
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--pe", type=float, default=0.0)
    s.add_argument("--optimizer", choices=("pso", "grid"), default="pso")
    s.add_argument("--range-factor", type=float, default=3.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_are)

    for name, text in (
        ("roc", "ROC sweep over a pfa grid"),
        ("pd-vs-m", "detection probability versus sensor count"),
        ("pd-vs-snr", "detection probability versus SNR"),
        ("mismatch", "detection with a misestimated crossover probability"),
    ):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True)
        s.add_argument("--trials", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--mode", choices=MODES)
        s.add_argument("--workers", type=int, default=1)
        s.add_argument("--out")
        if name == "mismatch":
            s.add_argument("--calibration", choices=("true", "assumed"))
        s.set_defaults(func=_cmd_run)

    s = sub.add_parser("validate", help="check a config or quantizer file")
    s.add_argument("--config")
    s.add_argument("--spec")
    s.set_defaults(func=_cmd_validate)
    return p


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except DegenerateDetectorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
