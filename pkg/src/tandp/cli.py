"""Command-line entry point: ``tandp {account,sweep,plan,simulate}``.

Exit codes: 0 success, 2 invalid input, 3 grid truncation under --strict,
4 unwritable output directory.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from tandp import planner, sim, tan
from tandp.accountant import DomainError, PrivacyParams, epsilon_rdp

EXIT_OK, EXIT_INVALID, EXIT_TRUNCATED, EXIT_UNWRITABLE = 0, 2, 3, 4

PRIVACY_KEYS = {"N": "dataset_size", "B": "batch_size", "S": "steps",
                "sigma": "noise_multiplier", "delta": "delta"}
SWEEP_HEADER = ["step_count", "sigma", "q", "eps_rdp", "eps_tan", "valid"]


class UsageError(Exception):
    """Input problem reported with exit status 2."""


def load_schema(name: str) -> dict:
    text = resources.files("tandp").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def fmt(x: float) -> str:
    return f"{x:.12g}"


def load_spec(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise UsageError(f"spec: cannot read {path}: {err}") from None
    try:
        jsonschema.validate(spec, load_schema("runspec"))
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "spec"
        raise UsageError(f"{where}: {err.message}") from None
    return spec


def _privacy(args, spec: dict) -> PrivacyParams:
    values = dict(spec.get("privacy", {}))
    for key in PRIVACY_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    missing = [k for k in PRIVACY_KEYS if k not in values]
    if missing:
        raise UsageError(f"{missing[0]}: missing privacy parameter")
    try:
        return PrivacyParams(**{PRIVACY_KEYS[k]: values[k] for k in PRIVACY_KEYS})
    except DomainError as err:
        raise UsageError(_flag_message(err)) from None


def _flag_message(err: DomainError) -> str:
    reverse = {v: k for k, v in PRIVACY_KEYS.items()}
    return f"{reverse.get(err.field, err.field)}: {str(err).split(': ', 1)[-1]}"


def _add_privacy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--N", type=int, help="dataset size")
    p.add_argument("--B", type=int, help="expected batch size")
    p.add_argument("--S", type=int, help="number of steps")
    p.add_argument("--sigma", type=float, help="noise multiplier")
    p.add_argument("--delta", type=float, help="target delta")


def _table(rows: list[tuple[str, str]]) -> str:
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def account_report(privacy: PrivacyParams) -> dict:
    account = epsilon_rdp(privacy)
    return {
        "privacy": {k: getattr(privacy, v) for k, v in PRIVACY_KEYS.items()},
        "q": privacy.q,
        "eps_rdp": account.epsilon,
        "best_order": account.best_order,
        "grid_truncated": account.grid_truncated,
        "tan": tan.summarize(privacy).to_dict(),
        "log_base": "e",
    }


def cmd_account(args, out) -> int:
    spec = load_spec(args.spec)
    report = account_report(_privacy(args, spec))
    jsonschema.validate(report, load_schema("account"))
    if args.json:
        out.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    else:
        rows = [(k, fmt(v)) for k, v in report["privacy"].items()]
        rows += [("q", fmt(report["q"])),
                 ("eps_rdp", fmt(report["eps_rdp"])),
                 ("best_order", str(report["best_order"])),
                 ("grid_truncated", str(report["grid_truncated"]).lower())]
        rows += [(k, fmt(v)) for k, v in report["tan"].items()]
        out.write(_table(rows) + "\n")
    if args.strict and report["grid_truncated"]:
        print("grid truncated: minimizing order is the largest grid order",
              file=sys.stderr)
        return EXIT_TRUNCATED
    return EXIT_OK


def _parse_list(text: str, kind=float) -> list:
    try:
        return [kind(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse list {text!r}") from None


def sweep_rows(eta: float, delta: float, steps_list, sigmas, workers=None):
    rows = []
    for steps in sorted(steps_list):
        try:
            result = planner.privacy_wall_sweep(eta, delta, steps, sigmas,
                                                workers=workers)
        except planner.InfeasibleError:
            continue
        rows.extend(result.rows)
    if not rows:
        raise UsageError("sigma_grid: empty sweep, q > 1 everywhere")
    return rows


def cmd_sweep(args, out) -> int:
    spec = load_spec(args.spec).get("planner", {}).get("sweep", {})
    eta = args.eta if args.eta is not None else spec.get("eta")
    delta = args.delta if args.delta is not None else spec.get("delta")
    steps = (_parse_list(args.steps, int) if args.steps else spec.get("steps"))
    low, high = args.sigma_range or (spec.get("sigma_min", 0.3), spec.get("sigma_max", 5.0))
    resolution = args.resolution or spec.get("resolution", 48)
    for name, value in (("eta", eta), ("delta", delta), ("steps", steps)):
        if value is None:
            raise UsageError(f"{name}: required")
    if not 0 < low <= high or resolution < 1:
        raise UsageError("sigma_range: need 0 < low <= high and resolution >= 1")
    try:
        rows = sweep_rows(eta, delta, steps, planner.sigma_grid(low, high, resolution),
                          workers=args.workers)
    except DomainError as err:
        raise UsageError(str(err)) from None

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for r in rows:
        writer.writerow([r.steps, fmt(r.sigma), fmt(r.q), fmt(r.eps_rdp),
                         fmt(r.eps_tan), "true" if r.valid else "false"])
    if args.out:
        try:
            Path(args.out).write_text(buf.getvalue())
        except OSError as err:
            print(f"out: {err}", file=sys.stderr)
            return EXIT_UNWRITABLE
    else:
        out.write(buf.getvalue())
    return EXIT_OK


def cmd_plan(args, out) -> int:
    spec = load_spec(args.spec)
    section = spec.get("planner", {})
    privacy = _privacy(args, spec)
    lr = args.lr if args.lr is not None else section.get("lr", 1.0)
    # Target lists given on the command line replace the spec file's.
    if args.batches or args.steps or args.beta:
        section = {}
    families = {
        "batches": _parse_list(args.batches, int) if args.batches else section.get("batches", []),
        "steps": _parse_list(args.steps, int) if args.steps else section.get("steps", []),
        "betas": _parse_list(args.beta) if args.beta else section.get("beta", []),
    }
    try:
        ref = planner.ReferenceConfig(privacy, lr)
        result = planner.plan(ref, **families)
    except DomainError as err:
        raise UsageError(str(err)) from None
    payload = result.to_dict()
    jsonschema.validate(payload, load_schema("plan"))
    if args.json:
        out.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return EXIT_OK
    cols = ["kind", "N", "B", "S", "sigma", "delta", "lr", "compute_factor",
            "eps_rdp", "eps_tan", "notes"]
    lines = [cols]
    for row in [payload["reference"], *payload["configs"]]:
        lines.append([fmt(row[c]) if isinstance(row[c], float) else
                      (",".join(row[c]) or "-") if isinstance(row[c], list) else
                      str(row[c]) for c in cols])
    widths = [max(len(line[i]) for line in lines) for i in range(len(cols))]
    for line in lines:
        out.write("  ".join(v.rjust(w) for v, w in zip(line, widths)).rstrip() + "\n")
    return EXIT_OK


def sim_config(spec: dict, args=None) -> sim.SimConfig:
    section = dict(spec.get("sim", {}))
    if args is not None and args.seed is not None:
        section["seed"] = args.seed
    privacy = _privacy(args or argparse.Namespace(), spec)
    try:
        return sim.SimConfig(num_samples=privacy.dataset_size, privacy=privacy,
                             **section)
    except DomainError as err:
        raise UsageError(str(err)) from None


def cmd_simulate(args, out) -> int:
    spec = load_spec(args.spec)
    if "sim" not in spec:
        raise UsageError("sim: section missing from spec")
    report = sim.train(sim_config(spec, args))
    payload = report.to_dict()
    jsonschema.validate(payload, load_schema("report"))
    try:
        report.write(args.out)
    except OSError as err:
        print(f"out: cannot write to {args.out}: {err}", file=sys.stderr)
        return EXIT_UNWRITABLE
    stats = report.noise_stats
    out.write(_table([
        ("final_loss", fmt(report.loss_trajectory[-1][1])),
        ("final_accuracy", fmt(report.final_accuracy)),
        ("noise_mean", fmt(stats["mean"])),
        ("noise_std", fmt(stats["std"])),
        ("expected_std", fmt(stats["expected_std"])),
        ("noise_count", str(stats["count"])),
    ]) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tandp", description="RDP / TAN accounting and constant-TAN planning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("account", help="eps_rdp and TAN summary of one run")
    p.add_argument("--spec")
    _add_privacy_flags(p)
    p.add_argument("--json", action="store_true")
    p.add_argument("--strict", action="store_true",
                   help="exit 3 when the minimizing order is the grid's largest")
    p.set_defaults(func=cmd_account)

    p = sub.add_parser("sweep", help="privacy-wall sweep at fixed eta (CSV)")
    p.add_argument("--spec")
    p.add_argument("--eta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--steps", help="comma-separated step counts")
    p.add_argument("--sigma-range", nargs=2, type=float, metavar=("LOW", "HIGH"))
    p.add_argument("--resolution", type=int, help="number of sigma points")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", help="CSV file (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plan", help="constant-TAN scaled configurations")
    p.add_argument("--spec")
    _add_privacy_flags(p)
    p.add_argument("--lr", type=float)
    p.add_argument("--batches", help="comma-separated target batch sizes")
    p.add_argument("--steps", help="comma-separated target step counts")
    p.add_argument("--beta", help="comma-separated dataset multipliers")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="toy DP-SGD run")
    p.add_argument("--spec", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="sim_out")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
