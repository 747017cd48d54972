"""JSON portfolio / tranche configuration.

Example::

    {
      "n": 30,
      "p": {"blocks": [{"count": 20, "p": 0.06}, {"count": 10, "p": 0.07}]},
      "law": "independent",
      "neighborhoods": "auto",
      "tranches": [{"R": 0.4, "z_star": 0.03, "label": "mezz"}]
    }

``law`` may also be ``{"latent_one_dependent": {"theta": 0.3, "atoms": 32,
"link": "sum"}}`` or ``{"explicit_joint": {"table": [...]}}`` (``2^n``
probabilities, bit ``i`` of the index is obligor ``i + 1``; ``"p"`` may then
be omitted and is read off the table).  Explicit
neighbourhoods are a list of ``{"A": [...], "B": [...]}`` with 1-based
obligor numbers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import ReportOptions
from .cdo import PricingError, TrancheSpec
from .dependence import ExplicitJoint, Independent, LatentOneDependent, PortfolioModel

FORMATS = ("csv", "markdown", "json")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    model: PortfolioModel
    tranches: tuple = ()
    options: ReportOptions = field(default_factory=ReportOptions)
    fmt: str = "markdown"

    def __post_init__(self):
        if self.fmt not in FORMATS:
            raise ConfigError(f"output format must be one of {FORMATS}")


def parse_probs(spec) -> np.ndarray:
    if isinstance(spec, list):
        return np.array(spec, dtype=float)
    if isinstance(spec, dict) and "blocks" in spec:
        parts = []
        for block in spec["blocks"]:
            count = int(block["count"])
            if count < 0:
                raise ConfigError("block count must be non-negative")
            parts.append(np.full(count, float(block["p"])))
        return np.concatenate(parts) if parts else np.zeros(0)
    raise ConfigError('"p" must be a list of floats or {"blocks": [...]}')


def parse_law(spec):
    if spec in (None, "independent"):
        return Independent()
    if isinstance(spec, dict) and len(spec) == 1:
        (kind, body), = spec.items()
        body = body or {}
        if kind == "latent_one_dependent":
            return LatentOneDependent(
                float(body["theta"]), int(body.get("atoms", 32)), str(body.get("link", "sum"))
            )
        if kind == "explicit_joint":
            return ExplicitJoint(np.array(body["table"], dtype=float))
    raise ConfigError(f"unknown law {spec!r}")


def parse_neighborhoods(spec, n: int):
    if spec in (None, "auto"):
        return None
    if not isinstance(spec, list) or len(spec) != n:
        raise ConfigError("neighborhoods must be 'auto' or one {A, B} entry per obligor")
    return tuple(
        (tuple(int(j) - 1 for j in item["A"]), tuple(int(j) - 1 for j in item["B"])) for item in spec
    )


def parse_tranches(items) -> tuple:
    out = []
    for item in items or ():
        out.append(TrancheSpec(float(item["R"]), float(item["z_star"]), str(item.get("label", "")),
                               str(item.get("horizon", ""))))
    return tuple(out)


def joint_marginals(table: np.ndarray) -> np.ndarray:
    n = int(table.size).bit_length() - 1
    if table.size != 1 << n:
        raise ConfigError("explicit joint table length must be a power of two")
    idx = np.arange(table.size)
    return np.array([math.fsum(table[(idx >> i) & 1 == 1]) for i in range(n)])


def model_from_dict(doc: dict) -> PortfolioModel:
    law = parse_law(doc.get("law", "independent"))
    if "p" not in doc and isinstance(law, ExplicitJoint):
        ps = joint_marginals(law.table)
    else:
        ps = parse_probs(doc.get("p"))
    if "n" in doc and int(doc["n"]) != ps.size:
        raise ConfigError(f'"n" is {doc["n"]} but {ps.size} probabilities were given')
    nb = parse_neighborhoods(doc.get("neighborhoods", "auto"), ps.size)
    return PortfolioModel(ps, law, nb)


def config_from_dict(doc: dict, **overrides) -> RunConfig:
    try:
        if "portfolio" in doc:
            port = doc["portfolio"]
            if isinstance(port, str):
                port = json.loads(Path(port).read_text())
            model = model_from_dict(port)
        else:
            model = model_from_dict(doc)
        opts = doc.get("options", {})

        def pick(key, opt_key, default):
            if overrides.get(key) is not None:
                return overrides[key]
            return opts.get(opt_key, default)

        options = ReportOptions(
            seed=int(pick("seed", "seed", ReportOptions.seed)),
            n_samples=int(pick("samples", "samples", ReportOptions.n_samples)),
            enum_limit=int(opts.get("enum_limit", ReportOptions.enum_limit)),
            p_chosen=opts.get("p_chosen"),
        )
        fmt = pick("fmt", "format", "markdown")
        return RunConfig(model, parse_tranches(doc.get("tranches")), options, fmt)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, PricingError, OSError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_config(path: str | Path, **overrides) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    return config_from_dict(doc, **overrides)
