"""Command-line interface.

    mixdistill distill bitflip --fidelity 0.75 --alpha2 0.25
    mixdistill sweep bitflip --param fidelity --start 0.5 --stop 1 --step 0.01 --alpha2 0.25
    mixdistill figures all --out-dir data/
    mixdistill validate --trials 100000 --seed 42

Exit codes: 0 success, 2 usage error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from mixdistill import closedform
from mixdistill.errors import DistillError, InvariantError, ParameterError, PreconditionError
from mixdistill.measures import MEASURE_KINDS
from mixdistill.montecarlo import mc_validate
from mixdistill.protocols import (
    PROTOCOLS,
    ProtocolParams,
    bitflip_efficiency,
    input_concurrence,
    round_registry,
    run,
)

VERSION = "0.1.0"
EXIT_OK, EXIT_USAGE, EXIT_INVARIANT = 0, 2, 3
SWEEPABLE = ("fidelity", "alpha2", "delta", "spdc_p")
FLAG_NAMES = {
    "fidelity": "--fidelity",
    "alpha2": "--alpha2",
    "parties": "--parties",
    "spdc_p": "--spdc-p",
    "delta": "--delta",
    "weighting": "--weighting",
}


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """12 significant digits; empty for missing values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _jsonable(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return None
    if isinstance(x, float):
        return float(f"{x:.12g}")
    return x


# -- closed forms matching each protocol ----------------------------------------


def closed_forms(protocol: str, params: ProtocolParams) -> tuple[float | None, float | None]:
    """(fidelity, success probability) predicted analytically, None where no formula applies."""
    F, a2 = params.fidelity, params.alpha2
    if protocol == "bitflip":
        return closedform.bitflip_fidelity(F), closedform.bitflip_prob(F, a2)
    if protocol == "phaseflip":
        return closedform.phaseflip_stage1_weights(F)[0], closedform.phaseflip_stage1_prob(a2)
    if protocol == "phaseflip-full":
        f1 = closedform.phaseflip_stage1_weights(F)[0]
        p1 = closedform.phaseflip_stage1_prob(a2)
        return closedform.phaseflip_full_fidelity(F), p1 * p1 * closedform.bitflip_prob(f1, 0.5)
    if protocol == "multipartite":
        return closedform.bitflip_fidelity(F), None
    if protocol == "spdc":
        if params.weighting == "paper" and params.delta == 0.0:
            return closedform.spdc_fidelity(F), None
        return None, None
    raise ValueError(protocol)


def _diff(a, b):
    return None if a is None or b is None else abs(a - b)


# -- output ----------------------------------------------------------------------


def render(metadata: dict, columns: list[str], rows: list[dict], fmt_name: str) -> str:
    if fmt_name == "json":
        doc = {
            "metadata": metadata,
            "rows": [{c: _jsonable(r.get(c)) for c in columns} for r in rows],
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    for key, value in metadata.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True)
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def emit(text: str, path: str | Path | None):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


def _metadata(protocol: str, params: ProtocolParams | dict, measure_kind: str, **extra) -> dict:
    parties = params.parties if isinstance(params, ProtocolParams) and protocol == "multipartite" else 2
    if isinstance(params, ProtocolParams):
        params = {
            "fidelity": params.fidelity,
            "alpha2": params.alpha2,
            "parties": params.parties,
            "spdc_p": params.spdc_p,
            "delta": params.delta,
            "weighting": params.weighting,
        }
    meta = {
        "artifact": "mixdistill",
        "version": VERSION,
        "protocol": protocol,
        "parameters": params,
        "measure_kind": measure_kind,
        "mode_ordering": [str(m) for m in round_registry(parties)],
    }
    meta.update(extra)
    return meta


# -- argument handling -----------------------------------------------------------


def _add_param_flags(p: argparse.ArgumentParser):
    p.add_argument("--fidelity", type=float, help="fidelity F of the input mixture, in (0, 1]")
    p.add_argument("--alpha2", type=float, help="|alpha|^2 of the less-entangled components, in (0, 1)")
    p.add_argument("--parties", type=int, default=None, help="number of parties (multipartite)")
    p.add_argument("--delta", type=float, default=None, help="SPDC relative phase in radians")
    p.add_argument("--spdc-p", dest="spdc_p", type=float, default=None, help="SPDC pair amplitude p")
    p.add_argument("--weighting", choices=("paper", "physical"), default=None)
    p.add_argument("--format", dest="fmt", choices=("text", "csv", "json"), default=None)
    p.add_argument("--config", help="flat key = value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mixdistill", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("distill", help="run one protocol and report against closed forms")
    d.add_argument("protocol", choices=PROTOCOLS)
    _add_param_flags(d)

    s = sub.add_parser("sweep", help="evaluate a protocol over a parameter grid")
    s.add_argument("protocol", choices=PROTOCOLS)
    _add_param_flags(s)
    s.add_argument("--param", choices=SWEEPABLE)
    s.add_argument("--start", type=float)
    s.add_argument("--stop", type=float)
    s.add_argument("--step", type=float)
    s.add_argument("--out", default=None, help="output file (default stdout)")
    s.add_argument("--measure", choices=MEASURE_KINDS, default=None)

    f = sub.add_parser("figures", help="write the datasets behind the fidelity/entanglement figures")
    f.add_argument("which", choices=("fig4", "fig5", "fig6", "fig7", "all"))
    f.add_argument("--out-dir", default=".")
    f.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    f.add_argument("--measure", choices=MEASURE_KINDS, default="concurrence")

    v = sub.add_parser("validate", help="Monte Carlo check of every protocol")
    v.add_argument("--trials", type=int, default=100_000)
    v.add_argument("--seed", type=int, default=42)
    return parser


def load_config(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc.strerror}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"--config: line {n} is not 'key = value'")
        out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


_FLOAT_KEYS = {"fidelity", "alpha2", "delta", "spdc_p", "start", "stop", "step"}


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    cfg = load_config(args.config)
    for key, raw in cfg.items():
        if key == "format":
            key = "fmt"
        if not hasattr(args, key):
            raise UsageError(f"--config: unknown key {key!r}")
        if getattr(args, key) is not None:
            continue
        try:
            if key in _FLOAT_KEYS:
                value = float(raw)
            elif key == "parties":
                value = int(raw)
            else:
                value = raw
        except ValueError:
            raise UsageError(f"--config: bad value for {key!r}: {raw!r}") from None
        setattr(args, key, value)
    return args


def params_from_args(args, require=("fidelity", "alpha2")) -> ProtocolParams:
    for name in require:
        if getattr(args, name, None) is None:
            raise UsageError(f"{FLAG_NAMES[name]} is required")
    kwargs = {}
    for name in ("fidelity", "alpha2", "parties", "spdc_p", "delta", "weighting"):
        value = getattr(args, name, None)
        if value is not None:
            kwargs[name] = value
    try:
        return ProtocolParams(**kwargs)
    except ParameterError as exc:
        raise UsageError(f"{FLAG_NAMES[exc.name]}: {exc.message}") from None


# -- commands --------------------------------------------------------------------


def cmd_distill(args) -> int:
    params = params_from_args(args)
    outcome = run(args.protocol, params)
    cf_fid, cf_prob = closed_forms(args.protocol, params)
    summary = {
        "success_probability": outcome.success_probability,
        "fidelity_out": outcome.fidelity_out,
        "closed_form_fidelity": cf_fid,
        "closed_form_probability": cf_prob,
        "abs_diff_fidelity": _diff(outcome.fidelity_out, cf_fid),
        "abs_diff_probability": _diff(outcome.success_probability, cf_prob),
        "below_threshold": outcome.below_threshold,
    }
    columns = ["source", "outcome", "probability", "correction_applied"]
    rows = [
        {
            "source": r.source,
            "outcome": r.outcome,
            "probability": r.probability,
            "correction_applied": int(r.correction_applied),
        }
        for r in outcome.branches
    ]
    fmt_name = args.fmt or "text"
    if fmt_name == "text":
        lines = [f"protocol: {args.protocol}"]
        lines.append(
            "parameters: "
            + " ".join(
                f"{k}={fmt(v) if isinstance(v, float) else v}"
                for k, v in _metadata(args.protocol, params, "concurrence")["parameters"].items()
            )
        )
        for key, value in summary.items():
            lines.append(f"{key}: {fmt(value) if value is not None else 'n/a'}")
        for rep in outcome.stage_reports:
            lines.append(
                f"stage {rep.name}: success_probability={fmt(rep.success_probability)} "
                f"fidelity={fmt(rep.fidelity_out)}"
            )
        lines.append("output:")
        for b in outcome.output.branches:
            lines.append(f"  {fmt(b.weight):>16}  {b.label}")
        lines.append("branches:")
        lines.append(f"  {'source':<12} {'outcome':<8} {'probability':>18}  corrected")
        for r in rows:
            lines.append(
                f"  {r['source']:<12} {r['outcome']:<8} {fmt(r['probability']):>18}  "
                f"{'yes' if r['correction_applied'] else 'no'}"
            )
        sys.stdout.write("\n".join(lines) + "\n")
    else:
        meta = _metadata(args.protocol, params, "concurrence", **{k: _jsonable(v) for k, v in summary.items()})
        sys.stdout.write(render(meta, columns, rows, fmt_name))
    return EXIT_OK


def grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive grid; a step wider than the range yields just ``start``."""
    if step is None or not step > 0:
        raise UsageError("--step must be > 0")
    if stop < start:
        raise UsageError("--stop must be >= --start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


SWEEP_COLUMNS = [
    "value",
    "sim_fidelity",
    "closed_fidelity",
    "sim_probability",
    "closed_probability",
    "abs_diff_fidelity",
    "abs_diff_probability",
]


def sweep_rows(protocol: str, base: ProtocolParams, param: str, values: list[float]) -> list[dict]:
    def point(v):
        try:
            params = replace(base, **{param: v})
        except ParameterError as exc:
            raise UsageError(f"{FLAG_NAMES[exc.name]}: {exc.message} (sweep value)") from None
        out = run(protocol, params)
        cf, cp = closed_forms(protocol, params)
        return {
            "value": v,
            "sim_fidelity": out.fidelity_out,
            "closed_fidelity": cf,
            "sim_probability": out.success_probability,
            "closed_probability": cp,
            "abs_diff_fidelity": _diff(out.fidelity_out, cf),
            "abs_diff_probability": _diff(out.success_probability, cp),
        }

    # map() keeps grid order whatever the completion order
    with ThreadPoolExecutor(max_workers=4) as pool:
        return list(pool.map(point, values))


def cmd_sweep(args) -> int:
    if args.param is None or args.start is None or args.stop is None or args.step is None:
        raise UsageError("--param, --start, --stop and --step are required")
    values = grid(args.start, args.stop, args.step)
    require = [k for k in ("fidelity", "alpha2") if k != args.param]
    if getattr(args, args.param, None) is None:
        setattr(args, args.param, values[0])
    base = params_from_args(args, require)
    rows = sweep_rows(args.protocol, base, args.param, values)
    meta = _metadata(
        args.protocol,
        base,
        args.measure or "concurrence",
        sweep={"param": args.param, "start": args.start, "stop": args.stop, "step": args.step},
        columns=SWEEP_COLUMNS,
    )
    fmt_name = args.fmt if args.fmt in ("csv", "json") else "csv"
    emit(render(meta, SWEEP_COLUMNS, rows, fmt_name), args.out)
    return EXIT_OK


# -- figures ---------------------------------------------------------------------

FIG4_ALPHA2 = 0.25
FIG5_ALPHA2 = 1 / 16
FIG6_FIDELITY = 1.0
FIG7_FIDELITY = 0.6
FIG7_REPLICATES = tuple(round(0.55 + 0.05 * i, 2) for i in range(9))


def figure_data(which: str, measure_kind: str = "concurrence") -> tuple[dict, list[str], list[dict]]:
    if which == "fig4":
        cols = ["F", "curveA", "curveB"]
        rows = []
        for F in grid(0.5, 1.0, 0.01):
            ideal = run("bitflip", ProtocolParams(F, FIG4_ALPHA2))
            spdc = run("spdc", ProtocolParams(F, FIG4_ALPHA2, weighting="paper"))
            rows.append({"F": F, "curveA": ideal.fidelity_out, "curveB": spdc.fidelity_out})
        meta = _metadata(
            "bitflip+spdc",
            {"alpha2": FIG4_ALPHA2, "weighting": "paper", "delta": 0.0},
            "fidelity",
            figure="output fidelity vs input fidelity (A ideal sources, B SPDC sources)",
        )
    elif which == "fig5":
        cols = ["F", "concurrence"]
        rows = [
            {"F": F, "concurrence": input_concurrence(ProtocolParams(F, FIG5_ALPHA2))}
            for F in grid(0.5, 1.0, 0.01)
        ]
        meta = _metadata(
            "input", {"alpha2": FIG5_ALPHA2}, "concurrence",
            figure="entanglement of the input mixture vs F",
        )
    elif which == "fig6":
        cols = ["alpha2", "eta", "E_out", "P", "E_in"]
        rows = []
        for a2 in grid(0.01, 0.99, 0.01):
            rep = bitflip_efficiency(ProtocolParams(FIG6_FIDELITY, a2), measure_kind)
            rows.append({"alpha2": a2, "eta": rep.eta, "E_out": rep.E_out, "P": rep.P, "E_in": rep.E_in})
        meta = _metadata(
            "bitflip", {"fidelity": FIG6_FIDELITY}, measure_kind,
            figure="transformation efficiency vs alpha^2 at F = 1",
        )
    elif which == "fig7":
        cols = ["alpha2", "eta", "eta_min_over_F", "eta_max_over_F", "eta_spread"]
        rows = []
        for a2 in grid(0.01, 0.99, 0.01):
            eta = bitflip_efficiency(ProtocolParams(FIG7_FIDELITY, a2), measure_kind).eta
            reps = [bitflip_efficiency(ProtocolParams(F, a2), measure_kind).eta for F in FIG7_REPLICATES]
            rows.append(
                {
                    "alpha2": a2,
                    "eta": eta,
                    "eta_min_over_F": min(reps),
                    "eta_max_over_F": max(reps),
                    "eta_spread": max(reps) - min(reps),
                }
            )
        meta = _metadata(
            "bitflip", {"fidelity": FIG7_FIDELITY, "replicate_fidelities": list(FIG7_REPLICATES)},
            measure_kind,
            figure="transformation efficiency vs alpha^2 at F = 0.6, with spread over F",
        )
    else:
        raise ValueError(which)
    meta["figure"] = f"{which}: {meta['figure']}"
    meta["columns"] = cols
    return meta, cols, rows


def cmd_figures(args) -> int:
    out_dir = Path(args.out_dir)
    if not out_dir.is_dir():
        raise UsageError(f"--out-dir: {out_dir} is not a directory")
    which = ("fig4", "fig5", "fig6", "fig7") if args.which == "all" else (args.which,)
    for name in which:
        try:
            meta, cols, rows = figure_data(name, args.measure)
        except PreconditionError as exc:
            raise UsageError(f"--measure {args.measure}: {exc}") from None
        path = out_dir / f"{name}.{args.fmt}"
        emit(render(meta, cols, rows, args.fmt), path)
        print(f"wrote {path} ({len(rows)} rows)")
    return EXIT_OK


# -- validation ------------------------------------------------------------------


def validation_points() -> list[tuple[str, ProtocolParams]]:
    pts = [(0.75, 0.25), (0.6, 0.1), (0.9, 0.45)]
    out = []
    for proto in ("bitflip", "phaseflip", "phaseflip-full"):
        out += [(proto, ProtocolParams(F, a2)) for F, a2 in pts]
    out += [(("multipartite", ProtocolParams(F, a2, parties=3))) for F, a2 in pts]
    weights = ("paper", "physical", "paper")
    out += [
        ("spdc", ProtocolParams(F, a2, spdc_p=0.3, weighting=w)) for (F, a2), w in zip(pts, weights)
    ]
    return out


def validate(trials: int, seed: int, sigmas: float = 4.0) -> tuple[bool, list[str]]:
    lines = []
    all_ok = True
    for proto, params in validation_points():
        exact = run(proto, params)
        est = mc_validate(proto, params, trials, seed)
        p = exact.success_probability
        sigma_p = math.sqrt(p * (1 - p) / trials)
        z_p = (est.success_probability - p) / sigma_p if sigma_p > 0 else 0.0
        ok_p = abs(est.success_probability - p) <= sigmas * sigma_p + 1e-12
        # per-trial fidelities lie in [0, 1], so mu(1 - mu) bounds their variance
        f = exact.fidelity_out
        if est.successes:
            sigma_f = math.sqrt(f * (1 - f) / est.successes)
            ok_f = abs(est.fidelity - f) <= sigmas * sigma_f + 1e-9
        else:
            ok_f = True
        ok = ok_p and ok_f
        all_ok &= ok
        lines.append(
            f"{'PASS' if ok else 'FAIL'} {proto:<14} F={fmt(params.fidelity)} alpha2={fmt(params.alpha2)} "
            f"N={params.parties} w={params.weighting} P={fmt(p)} P_mc={fmt(est.success_probability)} "
            f"z={z_p:+.3f} F_out={fmt(f)} F_mc={fmt(est.fidelity)} n_succ={est.successes}"
        )
    return all_ok, lines


def cmd_validate(args) -> int:
    if args.trials < 1000:
        raise UsageError("--trials must be >= 1000")
    ok, lines = validate(args.trials, args.seed)
    sys.stdout.write(f"# trials={args.trials} seed={args.seed} band=4 sigma\n")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK if ok else 1


COMMANDS = {
    "distill": cmd_distill,
    "sweep": cmd_sweep,
    "figures": cmd_figures,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args = _merge_config(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mixdistill: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantError as exc:
        print(f"mixdistill: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except DistillError as exc:
        print(f"mixdistill: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
