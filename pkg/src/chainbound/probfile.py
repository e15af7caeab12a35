"""Problem specification files (JSON) and machine-readable reports.

The on-disk format maps 1:1 onto :class:`MarkovProcessSpec`; model
artifacts can sit inline or in referenced files (paths resolve relative to
the problem file).  ``w_min`` / ``w_max`` use null for the corresponding
infinity.  Reports keep a fixed field order so byte-wise comparison works
for deterministic runs.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import InvalidParameter
from .markov import (
    Box,
    FeatureSet,
    LinearCut,
    MarkovProcessSpec,
    ParameterInequality,
    ParameterLink,
    PropertyQuery,
    QueryKind,
    QuerySense,
)
from .models import ModelArtifact, load_model
from .verifier import VerificationResult, VerifyConfig

FORMAT_VERSION = "1"


def _require(d: dict, key: str, path: str):
    if key not in d:
        raise InvalidParameter(f"{path}: missing field {key!r}")
    return d[key]


def load_problem(path: str | Path) -> MarkovProcessSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidParameter(f"{path}: cannot read problem file ({exc})") from exc
    return problem_from_json(raw, base_dir=path.parent, where=str(path))


def problem_from_json(raw: dict, base_dir: Path | None = None, where: str = "<memory>") -> MarkovProcessSpec:
    version = raw.get("version")
    if version != FORMAT_VERSION:
        raise InvalidParameter(f"{where}: unsupported version {version!r}")
    n_states = int(_require(raw, "n_states", where))
    n_features = int(_require(raw, "n_features", where))

    q = _require(raw, "query", where)
    try:
        kind = QueryKind(q["kind"])
        sense = QuerySense(q.get("sense", "max"))
    except (KeyError, ValueError) as exc:
        raise InvalidParameter(f"{where}: query: bad kind/sense ({exc})") from exc
    query = PropertyQuery(
        kind=kind,
        sense=sense,
        target_set=tuple(q.get("target_set", ())),
        transient_set=tuple(q.get("transient_set", ())),
        w_min=-math.inf if q.get("w_min") is None else float(q["w_min"]),
        w_max=math.inf if q.get("w_max") is None else float(q["w_max"]),
    )

    links = {}
    for k, entry in enumerate(_require(raw, "links", where)):
        target = _require(entry, "target", f"{where}: links[{k}]")
        links[target] = ParameterLink(
            target,
            np.asarray(_require(entry, "A", f"{where}: links[{k}]"), dtype=float),
            np.asarray(_require(entry, "b", f"{where}: links[{k}]"), dtype=float),
        )

    ineqs = [
        ParameterInequality(
            _require(e, "target", f"{where}: inequalities[{k}]"),
            np.asarray(_require(e, "C", f"{where}: inequalities[{k}]"), dtype=float),
            np.asarray(_require(e, "d", f"{where}: inequalities[{k}]"), dtype=float),
        )
        for k, e in enumerate(raw.get("inequalities", []))
    ]

    fs_raw = _require(raw, "feature_set", where)
    boxes = tuple(
        Box(np.asarray(b["lower"], dtype=float), np.asarray(b["upper"], dtype=float))
        for b in _require(fs_raw, "boxes", f"{where}: feature_set")
    )
    cuts = tuple(
        LinearCut(np.asarray(c["c"], dtype=float), float(c["rhs"]), c.get("sense", "<="))
        for c in fs_raw.get("linear", [])
    )
    integ = tuple(bool(f) for f in fs_raw.get("integrality", [False] * n_features))
    feature_set = FeatureSet(boxes, cuts, integ)

    models = []
    for k, entry in enumerate(raw.get("models", [])):
        if "path" in entry:
            mpath = Path(entry["path"])
            if base_dir is not None and not mpath.is_absolute():
                mpath = base_dir / mpath
            try:
                models.append(load_model(mpath))
            except (OSError, json.JSONDecodeError) as exc:
                raise InvalidParameter(f"{where}: models[{k}]: cannot load {mpath} ({exc})") from exc
        else:
            models.append(ModelArtifact.from_json_dict(entry))

    return MarkovProcessSpec(
        n_states=n_states,
        m_features=n_features,
        query=query,
        feature_set=feature_set,
        links=links,
        models=models,
        ineqs=ineqs,
        discount=None if raw.get("discount") is None else float(raw["discount"]),
        absorbing_states=tuple(raw.get("absorbing_states", ())),
    )


def problem_to_json(
    spec: MarkovProcessSpec, model_refs: list[str] | None = None
) -> dict:
    """Inverse of problem_from_json.  With ``model_refs`` the models are
    written as file references instead of inline artifacts."""
    q = spec.query
    out = {
        "version": FORMAT_VERSION,
        "n_states": spec.n_states,
        "n_features": spec.m_features,
        "discount": spec.discount,
        "query": {
            "kind": q.kind.value,
            "sense": q.sense.value,
            "target_set": list(q.target_set),
            "transient_set": list(q.transient_set),
            "w_min": None if math.isinf(q.w_min) else q.w_min,
            "w_max": None if math.isinf(q.w_max) else q.w_max,
        },
        "links": [
            {"target": t, "A": link.A.tolist(), "b": link.b.tolist()}
            for t, link in sorted(spec.links.items())
        ],
        "inequalities": [
            {"target": i.target, "C": i.C.tolist(), "d": i.d.tolist()} for i in spec.ineqs
        ],
        "feature_set": {
            "boxes": [
                {"lower": b.lower.tolist(), "upper": b.upper.tolist()}
                for b in spec.feature_set.boxes
            ],
            "linear": [
                {"c": c.c.tolist(), "rhs": c.rhs, "sense": c.sense}
                for c in spec.feature_set.extra_linear
            ],
            "integrality": list(spec.feature_set.integrality),
        },
        "models": (
            [{"path": ref} for ref in model_refs]
            if model_refs is not None
            else [m.to_json_dict() for m in spec.models]
        ),
        "absorbing_states": list(spec.absorbing_states),
    }
    return out


def save_problem(spec: MarkovProcessSpec, path: str | Path, model_refs=None) -> None:
    Path(path).write_text(json.dumps(problem_to_json(spec, model_refs), indent=1) + "\n")


def report_dict(
    result: VerificationResult,
    config: VerifyConfig,
    problem_path: str | None = None,
) -> dict:
    """Fixed-order report for stdout / --json-out."""
    return {
        "version": FORMAT_VERSION,
        "problem": problem_path,
        "status": result.status,
        "message": result.message,
        "problem_class": result.problem_class.value,
        "value": result.value,
        "bound": result.bound,
        "gap": result.gap,
        "outer_bound": result.outer_bound,
        "envelope_gap": result.envelope_gap,
        "witness": None if result.witness is None else list(map(float, result.witness)),
        "witness_value": result.witness_value,
        "ledger": result.ledger.to_json_dict(),
        "n_nodes": result.n_nodes,
        "runtime_sec": result.runtime,
        "config": {
            "gap_tol": config.gap_tol,
            "time_limit": config.time_limit,
            "sigmoid_segments": config.sigmoid_segments,
            "epsilon": config.epsilon,
            "ablate": sorted(config.ablate),
            "force_full_bilinear": config.force_full_bilinear,
            "bounds_only": config.bounds_only,
        },
    }
