"""JSON files for metrics, request sequences and solutions."""
from __future__ import annotations

import json
from pathlib import Path

from .errors import ValidationError
from .model import MetricSpace, RequestSequence, validate_metric


def metric_from_json(data: dict) -> MetricSpace:
    try:
        return validate_metric(data["dist"], data["rates"], data.get("labels"))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed metric object: {exc}") from exc


def load_metric(path) -> MetricSpace:
    with open(path) as fh:
        return metric_from_json(json.load(fh))


def save_metric(metric: MetricSpace, path) -> None:
    Path(path).write_text(json.dumps(metric.to_json(), indent=2) + "\n")


def sequence_from_json(data: dict, base: Path | None = None,
                       metric: MetricSpace | None = None) -> RequestSequence:
    """``metric`` may be inline or a path, resolved relative to ``base``."""
    if metric is None:
        ref = data.get("metric")
        if isinstance(ref, dict):
            metric = metric_from_json(ref)
        elif isinstance(ref, str):
            p = Path(ref)
            metric = load_metric(p if p.is_absolute() or base is None else base / p)
        else:
            raise ValidationError("sequence file has no metric")
    try:
        reqs = [(int(r["loc"]), float(r["t"])) for r in data["requests"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed request list: {exc}") from exc
    return RequestSequence.from_pairs(metric, reqs)


def load_sequence(path, metric: MetricSpace | None = None) -> RequestSequence:
    path = Path(path)
    with open(path) as fh:
        return sequence_from_json(json.load(fh), path.parent, metric)


def save_sequence(seq: RequestSequence, path, metric_ref=None) -> None:
    Path(path).write_text(json.dumps(seq.to_json(metric_ref), indent=2) + "\n")
