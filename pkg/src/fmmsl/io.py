"""Data ingestion and JSON (de)serialization of fits, parameters and study configs."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import pandas as pd

from .em import EmConfig, FitResult
from .mixture import MixtureParams, n_free_params
from .msl import MslParams
from .simstudy import StudyConfig

REPORT_FORMAT = "fmmsl-fit-report"
SWISS_BANK_ENV = "FMMSL_SWISS_BANK"


class DataError(ValueError):
    """Unreadable input, bad columns, or a document that violates its schema."""


@dataclass
class Dataset:
    columns: list[str]
    data: np.ndarray
    path: str

    @property
    def n(self) -> int:
        return self.data.shape[0]


def load_dataset(path, columns=None) -> Dataset:
    """Read a delimited text file with a header row and select numeric columns by name.

    The delimiter is sniffed (comma, semicolon, tab or whitespace). When
    ``columns`` is None every column except one named ``label`` is used.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"cannot read data file {path}")
    try:
        frame = pd.read_csv(path, sep=None, engine="python")
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    frame.columns = [str(c).strip() for c in frame.columns]
    if columns is None:
        columns = [c for c in frame.columns if c.lower() != "label"]
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataError(f"columns {missing} not in {path} (have {list(frame.columns)})")
    sub = frame[list(columns)]
    bad = [c for c in columns if not pd.api.types.is_numeric_dtype(sub[c])]
    if bad:
        raise DataError(f"non-numeric columns: {bad}")
    values = sub.to_numpy(dtype=float)
    if len(values) == 0:
        raise DataError(f"{path} has no data rows")
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path} contains missing or non-finite values in {list(columns)}")
    return Dataset(list(columns), values, str(path))


def swiss_bank_path() -> Path | None:
    """Location of the Swiss banknote measurements, if available.

    Looks at ``$FMMSL_SWISS_BANK`` first, then ``fmmsl/data/swiss_bank.csv``.
    """
    env = os.environ.get(SWISS_BANK_ENV)
    if env:
        return Path(env)
    bundled = resources.files("fmmsl") / "data" / "swiss_bank.csv"
    return Path(str(bundled)) if bundled.is_file() else None


def write_delimited(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


# -- parameter blocks ------------------------------------------------------

_VECTOR = {"type": "array", "items": {"type": "number"}, "minItems": 1}
PARAMS_SCHEMA = {
    "type": "object",
    "required": ["weights", "components"],
    "properties": {
        "weights": _VECTOR,
        "components": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["mu", "sigma", "gamma"],
                "properties": {
                    "mu": _VECTOR,
                    "sigma": {"type": "array", "items": _VECTOR, "minItems": 1},
                    "gamma": _VECTOR,
                },
            },
        },
    },
}

STUDY_SCHEMA = {
    "type": "object",
    "required": ["theta_true", "replicates"],
    "properties": {
        "theta_true": PARAMS_SCHEMA,
        "sample_sizes": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "replicates": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "em": {"type": "object"},
    },
}


def _validate(doc, schema, root: str) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = root + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in exc.absolute_path)
        raise DataError(f"{where}: {exc.message}") from None


def params_to_dict(theta: MixtureParams) -> dict:
    return {
        "weights": theta.weights.tolist(),
        "components": [{"mu": c.mu.tolist(), "sigma": c.sigma.tolist(), "gamma": c.gamma.tolist()}
                       for c in theta.components],
    }


def params_from_dict(doc, root: str = "params") -> MixtureParams:
    _validate(doc, PARAMS_SCHEMA, root)
    comps = []
    for i, c in enumerate(doc["components"]):
        try:
            comps.append(MslParams(c["mu"], c["sigma"], c["gamma"]))
        except ValueError as exc:
            raise DataError(f"{root}.components[{i}]: {exc}") from None
    try:
        return MixtureParams(np.asarray(doc["weights"], dtype=float), tuple(comps))
    except ValueError as exc:
        raise DataError(f"{root}.weights: {exc}") from None


def load_params(path) -> MixtureParams:
    """Parameters from a bare parameter block or from the ``params`` key of a fit report."""
    doc = _read_json(path)
    if isinstance(doc, dict) and "params" in doc:
        return params_from_dict(doc["params"], "params")
    return params_from_dict(doc, "$")


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc


def em_config_from_dict(doc: dict, root: str = "em", **defaults) -> EmConfig:
    fields = set(EmConfig.__dataclass_fields__)
    unknown = set(doc) - fields
    if unknown:
        raise DataError(f"{root}: unknown keys {sorted(unknown)}")
    try:
        return EmConfig(**{**defaults, **doc})
    except (TypeError, ValueError) as exc:
        raise DataError(f"{root}: {exc}") from None


def load_study_config(path) -> StudyConfig:
    doc = _read_json(path)
    _validate(doc, STUDY_SCHEMA, "$")
    theta = params_from_dict(doc["theta_true"], "theta_true")
    em = em_config_from_dict(doc.get("em", {}), g=theta.g)
    kwargs = {k: doc[k] for k in ("sample_sizes", "replicates", "seed") if k in doc}
    try:
        return StudyConfig(theta_true=theta, em=em, **kwargs)
    except ValueError as exc:
        raise DataError(f"$: {exc}") from None


# -- fit reports -------------------------------------------------------------

def fit_report(result: FitResult, dataset: Dataset, config: EmConfig, se_error: str | None = None) -> dict:
    theta = result.theta
    return {
        "format": REPORT_FORMAT,
        "version": 1,
        "data": {
            "path": dataset.path,
            "columns": dataset.columns,
            "n": dataset.n,
            "p": theta.p,
            "min": dataset.data.min(axis=0).tolist(),
            "max": dataset.data.max(axis=0).tolist(),
        },
        "config": asdict(config),
        "seed": config.seed,
        "params": params_to_dict(theta),
        "n_free_params": n_free_params(theta.g, theta.p),
        "standard_errors": result.se,
        "se_error": se_error,
        "loglik": result.loglik,
        "aic": result.aic,
        "bic": result.bic,
        "converged": result.converged,
        "iterations": result.iterations,
        "restart": result.restart,
        "failed_restarts": result.failed_restarts,
        "loglik_trace": list(result.loglik_trace),
        "labels": [int(v) for v in result.labels],
    }


def dump_report(report: dict, path) -> None:
    # json writes floats with repr(), the shortest string that round-trips exactly
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, allow_nan=True)
        fh.write("\n")


def load_report(path) -> dict:
    doc = _read_json(path)
    if not isinstance(doc, dict) or doc.get("format") != REPORT_FORMAT:
        raise DataError(f"{path} is not a fit report")
    params_from_dict(doc.get("params"), "params")
    return doc
