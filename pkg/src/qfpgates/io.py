"""JSON/CSV readers and writers for configs, gate reports, datasets and run manifests."""

from __future__ import annotations

import csv
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from .gates import GateReport
from .multiport import QfpConfig, config_from_dict, config_to_dict
from .tomography import TomographyDataset


@lru_cache(maxsize=None)
def schema(name: str) -> dict:
    text = resources.files("qfpgates").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def validate(doc: dict, name: str) -> dict:
    jsonschema.validate(doc, schema(name))
    return doc


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_json(path, doc) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return path


def load_config(path) -> QfpConfig:
    return config_from_dict(validate(read_json(path), "qfp_config"))


def save_config(path, cfg: QfpConfig) -> Path:
    return write_json(path, validate(config_to_dict(cfg), "qfp_config"))


def load_report(path) -> GateReport:
    return GateReport.from_dict(validate(read_json(path), "gate_report"))


def save_report(path, report: GateReport) -> Path:
    return write_json(path, validate(report.to_dict(), "gate_report"))


def load_dataset(path) -> TomographyDataset:
    return TomographyDataset.from_dict(validate(read_json(path), "dataset"))


def save_dataset(path, d: TomographyDataset) -> Path:
    return write_json(path, validate(d.to_dict(), "dataset"))


def fmt(x) -> str:
    """Full double precision for floats, plain text otherwise."""
    if isinstance(x, float):
        return f"{x:.17g}"
    return "" if x is None else str(x)


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
