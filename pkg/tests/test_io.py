import json

import jsonschema
import numpy as np
import pytest

from qfpgates.beamsplitter import BeamsplitterSpec, bs_config
from qfpgates.gates import GateReport, target_unitary
from qfpgates.io import (
    fmt,
    load_config,
    load_dataset,
    load_report,
    read_csv,
    save_config,
    save_dataset,
    save_report,
    write_csv,
    write_json,
)
from qfpgates.multiport import gate_of
from qfpgates.tomography import simulate_counts


def test_config_file_round_trip(tmp_path):
    cfg = bs_config(BeamsplitterSpec(0.829, 1.3))
    path = save_config(tmp_path / "c.json", cfg)
    back = load_config(path)
    assert back == cfg
    assert np.array_equal(gate_of(back).w, gate_of(cfg).w)


def test_report_file_round_trip(tmp_path):
    rep = GateReport.build(0.99 * target_unitary(0.3, 0.2, 0.1), 0.3, 0.2, 0.1, params=[0.5], scenario="3x1", seed=1)
    back = load_report(save_report(tmp_path / "r.json", rep))
    np.testing.assert_array_equal(back.w, rep.w)
    assert back.fidelity == rep.fidelity


def test_dataset_file_round_trip(tmp_path):
    d = simulate_counts(np.eye(2) / 2, budget=100, seed=1)
    assert load_dataset(save_dataset(tmp_path / "d.json", d)) == d


def test_schema_rejects_bad_documents(tmp_path):
    write_json(tmp_path / "bad.json", {"counts": {"n0": 1}})
    with pytest.raises(jsonschema.ValidationError):
        load_dataset(tmp_path / "bad.json")
    write_json(tmp_path / "cfg.json", {"elements": [{"eom": {"harmonics": [[1, -0.5, 0]]}}]})
    with pytest.raises(jsonschema.ValidationError):
        load_config(tmp_path / "cfg.json")


def test_negative_external_counts_clamped(tmp_path):
    # dark subtraction done elsewhere may leave small negatives
    write_json(tmp_path / "neg.json", {"counts": dict.fromkeys(["n0", "n1", "np", "nm", "npi", "nmi"], -1)})
    assert all(v == 0.0 for v in load_dataset(tmp_path / "neg.json").counts.values())


def test_external_dataset_minimal(tmp_path):
    # externally produced files may omit the metadata
    (tmp_path / "ext.json").write_text(json.dumps({"counts": dict(zip(["n0", "n1", "np", "nm", "npi", "nmi"], [9, 1, 5, 5, 6.5, 3.5]))}))
    d = load_dataset(tmp_path / "ext.json")
    assert d.counts["npi"] == 6.5 and d.budget is None


def test_csv_full_precision(tmp_path):
    x = 0.1 + 0.2
    write_csv(tmp_path / "t.csv", ["a", "b", "c"], [[x, "s", None]])
    row = read_csv(tmp_path / "t.csv")[0]
    assert float(row["a"]) == x
    assert row["b"] == "s" and row["c"] == ""
    assert fmt(1.0 / 3.0) == "0.33333333333333331"
