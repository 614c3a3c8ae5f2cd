"""File formats: event CSVs and JSON documents for models, weights and trees."""
from __future__ import annotations

import csv
import json
from collections import defaultdict

import numpy as np

from .core import ExperimentData, MultiExperimentData, MultiModel
from .crosscov import SimilarityWeights

__all__ = [
    "read_events",
    "write_events",
    "read_model",
    "write_model",
    "read_weights",
    "write_weights",
    "parse_float_list",
]

EVENT_COLUMNS = ("experiment", "unit", "time")


def parse_float_list(text):
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ValueError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def read_events(path, horizons=None, p=None) -> MultiExperimentData:
    """Read ``experiment,unit,time`` rows (1-based indices).

    Without ``horizons`` each experiment ends at its last event. Times of a
    unit must appear in nondecreasing order.
    """
    rows = defaultdict(lambda: defaultdict(list))
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in EVENT_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing column(s) {', '.join(missing)}; "
                             f"expected header {','.join(EVENT_COLUMNS)}")
        for line, row in enumerate(reader, start=2):
            try:
                m, i, t = int(row["experiment"]), int(row["unit"]), float(row["time"])
            except (TypeError, ValueError):
                raise ValueError(f"{path}:{line}: cannot parse {row}") from None
            if m < 1 or i < 1:
                raise ValueError(f"{path}:{line}: experiment and unit indices start at 1")
            if p is not None and i > p:
                raise ValueError(f"{path}:{line}: unit {i} out of range 1..{p}")
            if not np.isfinite(t) or t < 0:
                raise ValueError(f"{path}:{line}: time must be finite and nonnegative")
            seq = rows[m][i]
            if seq and t < seq[-1]:
                raise ValueError(f"{path}:{line}: times of experiment {m} unit {i} "
                                 f"are not monotone ({t} after {seq[-1]})")
            seq.append(t)
    M = max(rows) if rows else (len(horizons) if horizons is not None else 0)
    if M == 0:
        raise ValueError(f"{path}: no events and no horizons given")
    if p is None:
        p = max((max(u) for u in rows.values() if u), default=1)
    if horizons is not None:
        horizons = list(horizons)
        if len(horizons) == 1:
            horizons *= M
        if len(horizons) != M:
            raise ValueError(f"{len(horizons)} horizons given for {M} experiments")
    exps = []
    for m in range(1, M + 1):
        units = rows.get(m, {})
        last = max((ts[-1] for ts in units.values()), default=0.0)
        T = horizons[m - 1] if horizons is not None else last
        if not T > 0:
            raise ValueError(f"experiment {m} has no events; pass --horizons")
        if last > T:
            raise ValueError(f"experiment {m} has events after its horizon {T}")
        exps.append(ExperimentData.from_times([units.get(i, []) for i in range(1, p + 1)],
                                              T, experiment_id=m))
    return MultiExperimentData(tuple(exps))


def write_events(data: MultiExperimentData, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_COLUMNS)
        for m, exp in enumerate(data, start=1):
            times, units = exp.merged()
            for t, u in zip(times, units):
                w.writerow((m, int(u) + 1, repr(float(t))))


def read_model(path) -> MultiModel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from None
    if "experiments" not in doc:
        raise ValueError(f"{path}: model document needs an 'experiments' list")
    return MultiModel.from_dict(doc)


def write_model(model: MultiModel, path, extra=None):
    doc = model.to_dict()
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def write_weights(weights: SimilarityWeights, path, extra=None):
    doc = {"W": weights.W.tolist(),
           "counts": None if weights.counts is None else np.asarray(weights.counts).tolist()}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)


def read_weights(path) -> SimilarityWeights:
    with open(path) as fh:
        doc = json.load(fh)
    W = doc["W"] if isinstance(doc, dict) else doc
    counts = doc.get("counts") if isinstance(doc, dict) else None
    return SimilarityWeights(np.asarray(W, dtype=float),
                             None if counts is None else np.asarray(counts))
