"""Plain-dict (JSON) form of bound reports; floats keep full precision."""
from __future__ import annotations

from .bounds import BoundEntry, BoundReport
from .pmf import BinomialParams


def params_to_dict(params: BinomialParams | None):
    if params is None:
        return None
    return {"alpha": params.alpha, "p": params.p, "delta": params.delta}


def params_from_dict(doc) -> BinomialParams | None:
    if doc is None:
        return None
    return BinomialParams(int(doc["alpha"]), float(doc["p"]), float(doc["delta"]))


def entry_to_dict(e: BoundEntry) -> dict:
    return {
        "name": e.name,
        "value": e.value,
        "applicable": e.applicable,
        "mode": e.mode,
        "certified": e.certified,
        "params": params_to_dict(e.params),
        "se": e.se,
        "exact_dsl": e.exact_dsl,
        "note": e.note,
    }


def entry_from_dict(doc: dict) -> BoundEntry:
    return BoundEntry(
        doc["name"], doc["value"], doc["applicable"], doc["mode"],
        params_from_dict(doc["params"]), doc["se"], doc["exact_dsl"], doc["note"],
    )


def report_to_dict(report: BoundReport) -> dict:
    return {
        "n": report.n,
        "terms_mode": report.terms_mode,
        "poisson_lambda": report.poisson_lambda,
        "loss_mean": report.loss_mean,
        "loss_var": report.loss_var,
        "fit_alpha_n": params_to_dict(report.fit_alpha_n),
        "fit_moments": params_to_dict(report.fit_moments),
        "entries": [entry_to_dict(e) for e in report.entries],
        "best": report.best.name if report.best else None,
        "errors": list(report.errors),
    }


def report_from_dict(doc: dict) -> BoundReport:
    entries = tuple(entry_from_dict(e) for e in doc["entries"])
    best = next((e for e in entries if e.name == doc["best"]), None)
    return BoundReport(
        n=doc["n"],
        entries=entries,
        poisson_lambda=doc["poisson_lambda"],
        terms_mode=doc["terms_mode"],
        best=best,
        fit_alpha_n=params_from_dict(doc["fit_alpha_n"]),
        fit_moments=params_from_dict(doc["fit_moments"]),
        loss_mean=doc["loss_mean"],
        loss_var=doc["loss_var"],
        errors=tuple(doc["errors"]),
    )
