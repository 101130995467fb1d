"""CSV ingestion, report documents and tab-separated sidecar files."""
from __future__ import annotations

import dataclasses
import json
import logging
import os
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

from .data import Dataset
from .exceptions import EmptyAfterFiltering, MissingColumn, NonNumericValue
from .forms import FORM_TYPES, FormSpec
from .glm import get_family

logger = logging.getLogger(__name__)


def _as_floats(values):
    """Exact decimal parse of every value, or None if any is not a number."""
    try:
        return np.array([float(v) for v in values], dtype=float)
    except ValueError:
        return None


def load_csv(path, outcome: str, covariates, confounders=(), family="gaussian") -> Dataset:
    """Read a headed CSV file into a Dataset.

    Outcome and covariates must be numeric. Confounder columns holding any
    non-numeric value are expanded into 0/1 indicators with the
    lexicographically first level as reference. Rows with a missing value in
    any used column are dropped.
    """
    covariates = list(covariates)
    confounders = list(confounders)
    used = [outcome, *covariates, *confounders]
    if len(set(used)) != len(used):
        raise ValueError("outcome, covariate and confounder columns must be distinct")
    frame = pd.read_csv(path, dtype=str, keep_default_na=True, skipinitialspace=True)
    missing = [c for c in used if c not in frame.columns]
    if missing:
        raise MissingColumn(f"columns not found in {path}: {missing}")
    frame = frame[used]
    before = len(frame)
    frame = frame.dropna()
    if len(frame) < before:
        logger.info("dropped %d row(s) with missing values", before - len(frame))
    if frame.empty:
        raise EmptyAfterFiltering("no complete rows left after dropping missing values")

    numeric = {}
    for col in [outcome, *covariates]:
        values = _as_floats(frame[col])
        if values is None:
            bad = next(v for v in frame[col] if _as_floats([v]) is None)
            raise NonNumericValue(f"column {col!r} holds non-numeric value {bad!r}")
        numeric[col] = values

    fam = get_family(family)
    y = numeric[outcome]
    try:
        fam.check_outcome(y)
    except ValueError as exc:
        raise NonNumericValue(f"outcome {outcome!r}: {exc}") from None

    z_cols, z_names = [], []
    for col in confounders:
        values = _as_floats(frame[col])
        if values is not None:
            z_cols.append(values)
            z_names.append(col)
            continue
        levels = sorted(frame[col].unique())
        for level in levels[1:]:
            z_cols.append((frame[col] == level).to_numpy(dtype=float))
            z_names.append(f"{col}[{level}]")

    X = np.column_stack([numeric[c] for c in covariates])
    Z = np.column_stack(z_cols) if z_cols else None
    return Dataset(y, X, Z, fam, tuple(covariates), tuple(z_names))


def form_to_dict(form: FormSpec, names) -> dict:
    out = {"kind": form.kind}
    out.update(dataclasses.asdict(form))
    if "j" in out:
        out["covariate"] = names[form.j]
    if "k" in out:
        out["partner"] = names[form.k]
    return out


def form_from_dict(doc: dict) -> FormSpec:
    cls = FORM_TYPES[doc["kind"]]
    fields = {f.name for f in dataclasses.fields(cls)}
    return cls(**{k: v for k, v in doc.items() if k in fields})


def _loocv_doc(res) -> dict:
    return {"mean": res.mean, "se": res.se, "n_failed_folds": res.n_failed_folds}


def _step_doc(outcome, names) -> dict:
    if outcome is None:
        return None
    return {
        "selected": form_to_dict(outcome.selected, names),
        "reference": outcome.reference_kind,
        "reference_loocv": (None if outcome.reference_loocv is None
                            else _loocv_doc(outcome.reference_loocv)),
        "candidates": {k: _loocv_doc(v) for k, v in outcome.candidate_loocvs.items()},
        "candidate_forms": {k: form_to_dict(v, names)
                            for k, v in outcome.candidate_forms.items()},
        "best": outcome.best_kind,
        "gate_passed": bool(outcome.gate_passed),
        "unavailable": dict(outcome.unavailable),
    }


def report_document(report, config: dict = None, wall_time: float = None) -> dict:
    """JSON-ready document describing a DendiReport."""
    from . import __version__

    names = report.names
    coef = dict(zip(report.column_labels, map(float, report.coefficients)))
    key_to_label = dict(zip(report.column_keys, report.column_labels))
    covariates = []
    for j, form in enumerate(report.forms):
        own = [key_to_label[k] for k in form.column_keys() if k in key_to_label]
        covariates.append({
            "name": names[j],
            "selected_form": form_to_dict(form, names),
            "label": form.kind,
            "description": form.describe(names),
            "split_points": [{"variable": names[v], "value": c} for v, c in form.split_points()],
            "coefficients": {lab: coef[lab] for lab in own},
            "step1": _step_doc(report.step1[j], names),
            "step2": _step_doc(report.step2.get(j), names),
        })
    return {
        "software": {"name": "dendi", "version": __version__},
        "config": dict(config) if config is not None else report.config.to_dict(),
        "family": report.family,
        "n": int(len(report.fit.eta)),
        "covariates": covariates,
        "confounders": list(report.confounder_names),
        "coefficients": coef,
        "dropped_columns": list(report.dropped_columns),
        "interactions": [[names[a], names[b]] for a, b in report.interactions],
        "reference_point": dict(zip(names, map(float, report.reference_point))),
        "loglik": report.fit.loglik,
        "deviance": report.fit.deviance,
        "dispersion": report.fit.dispersion,
        "wall_time_seconds": wall_time,
    }


def _atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_ready(value):
    if isinstance(value, dict):
        return {k: _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, (float, np.floating)):
        # JSON has no infinities; a -inf LOOCV score (zero-variance fold) becomes null
        return float(value) if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def write_report(doc: dict, path) -> None:
    """Write a report document as JSON; floats keep their shortest exact repr."""
    _atomic_write(path, json.dumps(_json_ready(doc), indent=2, allow_nan=False) + "\n")


def read_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_tsv(path, header, rows) -> None:
    lines = ["\t".join(header)]
    lines.extend("\t".join(fmt(v) for v in row) for row in rows)
    _atomic_write(path, "\n".join(lines) + "\n")


def read_tsv(path) -> pd.DataFrame:
    return pd.read_csv(path, sep="\t")


def curve_rows(report):
    for j, table in report.curves.items():
        for x, eta, mu in table:
            yield (report.names[j], x, eta, mu)
