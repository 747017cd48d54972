"""Command-line entry point.

Exit codes: 0 ok, 1 verification failure, 2 parse / usage error, 3 fit error
(no binomial approximand available), 4 model too large to enumerate.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

from .bounds import FitError, compile_report, fit_alpha_n, fit_moment_matching, loss_moments
from .cdo import PricingError, tranche_expected_loss_bracketed, tranche_expected_loss_exact
from .config import FORMATS, ConfigError, load_config
from .corpus import reference_rows
from .dependence import ModelSizeError, enumerate_terms, exact_loss_pmf
from .pmf import binomial_pmf, poisson_pmf_truncated
from .serialize import params_to_dict, report_to_dict
from .stoploss import stoploss_distance_exact
from .verify import run_verify, verify_failed

EXIT_OK, EXIT_VERIFY, EXIT_PARSE, EXIT_FIT, EXIT_SIZE = 0, 1, 2, 3, 4
ZERO_DISPLAY = 1e-12


class Table:
    """Rows of raw values rendered as csv, markdown or a JSON document."""

    def __init__(self, columns, title=""):
        self.columns = list(columns)
        self.rows: list[list] = []
        self.title = title
        self.notes: list[str] = []

    def add(self, *row):
        self.rows.append(list(row))

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
        return buf.getvalue()

    def markdown(self) -> str:
        footnotes = []

        def cell(v):
            if v is None:
                return "n/a"
            if isinstance(v, bool):
                return "yes" if v else "no"
            if isinstance(v, float):
                if abs(v) < ZERO_DISPLAY:
                    if v == 0.0:
                        return "0"
                    footnotes.append(v)
                    return f"0[^{len(footnotes)}]"
                return f"{v:.6g}"
            return str(v)

        lines = []
        if self.title:
            lines += [f"### {self.title}", ""]
        lines.append("| " + " | ".join(self.columns) + " |")
        lines.append("|" + "---|" * len(self.columns))
        for row in self.rows:
            lines.append("| " + " | ".join(cell(v) for v in row) + " |")
        if self.notes:
            lines.append("")
            lines += self.notes
        if footnotes:
            lines.append("")
            lines += [f"[^{j}]: raw value {v!r}, below the {ZERO_DISPLAY:g} display threshold"
                      for j, v in enumerate(footnotes, 1)]
        return "\n".join(lines) + "\n"

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, row)) for row in self.rows]


def emit(out, fmt: str, tables, doc: dict | None = None):
    if fmt == "json":
        payload = doc if doc is not None else {t.title or "rows": t.records() for t in tables}
        out.write(json.dumps(payload, indent=2) + "\n")
        return
    for j, t in enumerate(tables):
        if j:
            out.write("\n")
        out.write(t.csv() if fmt == "csv" else t.markdown())


# -- commands ----------------------------------------------------------------


def cmd_table2(args, out) -> int:
    t = Table(["n", "poisson_comparison", "first_order_alpha_n", "second_order_moments"], "table2")
    for r in reference_rows():
        t.add(r.n, r.poisson, r.alpha_n, r.moments)
    emit(out, args.format, [t])
    return EXIT_OK


def _load(args):
    return load_config(args.config, seed=getattr(args, "seed", None), samples=getattr(args, "samples", None),
                       fmt=getattr(args, "format", None))


def _report_tables(report):
    head = Table(["field", "value"], "portfolio")
    head.add("n", report.n)
    head.add("ingredients", report.terms_mode)
    head.add("E W_n", report.loss_mean)
    head.add("Var W_n", report.loss_var)
    head.add("poisson lambda", report.poisson_lambda)
    for label, prm in (("fit alpha=n", report.fit_alpha_n), ("fit moments", report.fit_moments)):
        head.add(label, "unavailable" if prm is None else f"alpha={prm.alpha}, p={prm.p:.6g}, delta={prm.delta:.6g}")
    head.add("best", report.best.name if report.best else "none")
    t = Table(["bound", "value", "se", "upper", "applicable", "certified", "mode", "alpha", "p", "delta",
               "exact_dsl"], "bounds")
    for e in report.entries:
        prm = e.params
        t.add(e.name, e.value, e.se, e.upper, e.applicable, e.certified, e.mode,
              prm.alpha if prm else None, prm.p if prm else None, prm.delta if prm else None, e.exact_dsl)
    t.notes += [f"- {err}" for err in report.errors]
    return [head, t]


def cmd_bounds(args, out) -> int:
    cfg = _load(args)
    report = compile_report(cfg.model, cfg.options)
    if cfg.fmt == "json":
        emit(out, "json", [], {"command": "bounds", "report": report_to_dict(report)})
    else:
        emit(out, cfg.fmt, _report_tables(report))
    return EXIT_OK if report.best is not None else EXIT_FIT


def cmd_price(args, out) -> int:
    cfg = _load(args)
    if not cfg.tranches:
        raise ConfigError("configuration has no tranches")
    report = compile_report(cfg.model, cfg.options)
    if report.best is None:
        raise FitError("no applicable binomial bound: " + "; ".join(report.errors))
    pmf = exact_loss_pmf(cfg.model, cfg.options.enum_limit) if cfg.model.enumerable(cfg.options.enum_limit) else None
    t = Table(["label", "R", "z_star", "z", "exact", "approx", "half_width", "low", "high", "certified", "bound"],
              "tranches")
    for spec in cfg.tranches:
        br = tranche_expected_loss_bracketed(spec, report)
        exact = tranche_expected_loss_exact(cfg.model, spec, loss_pmf=pmf) if pmf is not None else None
        t.add(spec.label, spec.recovery, spec.z_star, br.z, exact, br.approx, br.half_width, br.low, br.high,
              br.certified, br.bound_name)
    if not report.best.certified:
        t.notes.append("- brackets are statistical (Monte Carlo, 4 standard errors), not certified")
    emit(out, cfg.fmt, [t])
    return EXIT_OK


def cmd_exact_dsl(args, out) -> int:
    cfg = _load(args)
    model = cfg.model
    if not model.enumerable(cfg.options.enum_limit):
        raise ModelSizeError(f"model with n={model.n} cannot be enumerated; exact distance unavailable")
    terms = enumerate_terms(model, cfg.options.enum_limit)
    if args.against == "poisson":
        lam = float(model.p_list.sum())
        target = poisson_pmf_truncated(lam, cfg.options.tail_eps)
        desc = {"lambda": lam}
    else:
        if args.fit == "alpha-n":
            prm = fit_alpha_n(terms.marginals)
        else:
            prm = fit_moment_matching(*loss_moments(terms))
        target = binomial_pmf(prm)
        desc = params_to_dict(prm)
    curve = stoploss_distance_exact(terms.loss_pmf, target)
    t = Table(["n", "against", "fit", "d_sl", "argsup"], "exact_dsl")
    t.add(model.n, args.against, json.dumps(desc, sort_keys=True), curve.sup_abs, curve.argsup)
    emit(out, cfg.fmt, [t])
    return EXIT_OK


def cmd_verify(args, out) -> int:
    results = run_verify(args.level)
    t = Table(["status", "property", "checked", "violations", "seconds", "detail"], "verify")
    for r in results:
        t.add(r.status, r.name, r.checked, r.violations, round(r.seconds, 3), r.detail)
    failed = verify_failed(results, strict=args.strict)
    t.notes.append(f"- overall: {'FAIL' if failed else 'PASS'} (level {args.level})")
    emit(out, args.format, [t])
    return EXIT_VERIFY if failed else EXIT_OK


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="binomcdo", description="Binomial stop-loss bounds and CDO tranche brackets.")
    sub = ap.add_subparsers(dest="command", required=True)

    def fmt(p, default=None):
        p.add_argument("--format", choices=FORMATS, default=default,
                       help="output format (default: config value, else markdown)")

    p = sub.add_parser("table2", help="reproduce the published bound comparison")
    fmt(p, "markdown")
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("bounds", help="bound report for a configured portfolio")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    fmt(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("price", help="tranche expected losses with error brackets")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int)
    fmt(p)
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("verify", help="run the property suite")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.add_argument("--strict", action="store_true", help="known published-statement violations also fail")
    fmt(p, "markdown")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("exact-dsl", help="exact stop-loss distance of an enumerable portfolio")
    p.add_argument("--config", required=True)
    p.add_argument("--against", choices=("binomial", "poisson"), required=True)
    p.add_argument("--fit", choices=("moments", "alpha-n"), default="moments")
    fmt(p)
    p.set_defaults(func=cmd_exact_dsl)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (FitError, PricingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except ModelSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIZE

