import csv
import json
import math
import os
import pathlib
import subprocess
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

import phishaudit as pa

SOURCE = pathlib.Path(os.environ.get("PHISHAUDIT_SOURCE_DIR", pathlib.Path(__file__).parents[2]))
SCHEMAS = SOURCE / "schemas"

TINY_CONFIG = """[run]
seed = 9

[data]
synthetic = true
synthetic_d1_rows = 600
synthetic_d2_rows = 400
merge_per_class = 60

[model.gbdt]
n_rounds = 20
max_depth = 3

[model.rf]
n_trees = 5

[experiments]
zoo = lr, nb, gbdt_second

[explain]
n_per_class = 12
background_size = 16
"""


def _registry():
    resources = []
    for path in SCHEMAS.glob("*.schema.json"):
        contents = json.loads(path.read_text())
        resources.append((contents["$id"], Resource.from_contents(contents)))
    return Registry().with_resources(resources)


REGISTRY = _registry()


def validate(instance, schema_name):
    schema = json.loads((SCHEMAS / f"{schema_name}.schema.json").read_text())
    Draft202012Validator(schema, registry=REGISTRY).validate(instance)


def schema_for(rel: pathlib.Path):
    name = rel.name
    if rel.parts[0] == "divergence":
        return "divergence"
    if rel.parts[0] == "zoo":
        return "zoo"
    return {
        "manifest.json": "manifest",
        "summary.json": "summary",
        "stats.json": "stats",
        "metrics.json": "experiment_metrics",
        "model.json": "model",
        "shap_header.json": "shap_header",
        "importance.json": "importance",
    }[name]


@pytest.fixture(scope="module")
def matrix_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("matrix")
    cfg = root / "run.ini"
    cfg.write_text(TINY_CONFIG)
    summary = pa.run_matrix(str(cfg), out=str(root / "out"))
    return root / "out", summary


def test_schemas_are_valid_documents():
    for path in SCHEMAS.glob("*.schema.json"):
        Draft202012Validator.check_schema(json.loads(path.read_text()))


def test_feature_names_and_extraction_match_golden_rows():
    names = pa.feature_names()
    assert len(names) == 20
    rows = list(csv.DictReader(open(SOURCE / "tests" / "data" / "golden_urls.csv")))
    resolved = {
        r["url"]: (int(r["url_google_index"]), int(r["qty_redirects"]))
        for r in csv.DictReader(open(SOURCE / "tests" / "data" / "golden_resolver.csv"))
    }
    got = pa.extract_features([r["url"] for r in rows], resolved)
    for row, features in zip(rows, got):
        assert set(features) == set(names)
        for n in names:
            assert features[n] == int(row[n]), (row["url"], n)


def test_unresolved_external_features_are_nan():
    f = pa.extract_features(["http://a.com/x"])[0]
    assert math.isnan(f["url_google_index"])
    assert f["length_url"] == 14


def test_tree_attributions_match_enumeration_and_add_up():
    rng = np.random.default_rng(0)
    x = rng.integers(0, 4, size=(200, 4)).astype(float)
    y = ((x[:, 0] + x[:, 2] > 3) ^ (rng.random(200) < 0.1)).astype(int).tolist()
    model = pa.Model.train(x, y, ["a", "b", "c", "d"], model="gbdt_second", seed=1)
    background = x[:12]
    values, base = pa.shap_values(model, x[:20], background)
    assert values.shape == (20, 4)
    for i in range(20):
        brute = pa.shap_brute_force(model, x[i].tolist(), background)
        np.testing.assert_allclose(values[i], brute, atol=1e-9, rtol=0)
    prob = model.predict_proba(x[:20])
    margin = values.sum(axis=1) + base
    np.testing.assert_allclose(1.0 / (1.0 + np.exp(-margin)), prob, atol=1e-9, rtol=0)

    imp = pa.global_importance(values, model.feature_names)
    validate(imp, "importance")
    same = pa.compare_rankings(imp, imp)
    validate(same, "divergence")
    assert same["kendall_tau"] == 1.0 and same["sign_flips"] == []


def test_model_round_trip_and_schema(tmp_path):
    x = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 1.0], [3.0, 0.0]] * 5)
    y = [0, 0, 1, 1] * 5
    for name in pa.model_names():
        m = pa.Model.train(x, y, ["u", "v"], model=name, seed=3)
        validate(m.to_json(), "model")
        m.save(str(tmp_path / f"{name}.json"))
        back = pa.Model.load(str(tmp_path / f"{name}.json"))
        np.testing.assert_array_equal(back.predict_proba(x), m.predict_proba(x))


def test_errors_surface_as_python_exceptions():
    with pytest.raises(pa.Error, match="UnknownModel"):
        pa.Model.train(np.zeros((4, 1)), [0, 1, 0, 1], ["u"], model="svm")
    with pytest.raises(pa.Error):
        pa.evaluate([1, 0], [1])
    m = pa.evaluate([1, 1, 0, 0], [1, 0, 1, 0])
    validate(m, "classification_metrics")
    assert m["accuracy"] == 0.5


def test_matrix_outputs_validate(matrix_run):
    out, summary = matrix_run
    validate(summary, "summary")
    assert [e["id"] for e in summary["experiments"]][:3] == ["Exp-1", "Exp-2", "Exp-3"]
    assert len(summary["experiments"]) == 9
    json_files = sorted(p for p in out.rglob("*.json"))
    assert len(json_files) > 30
    for path in json_files:
        rel = path.relative_to(out)
        validate(json.loads(path.read_text()), schema_for(rel))
    svgs = sorted(out.rglob("*.svg"))
    assert len(svgs) == 18
    for path in svgs:
        assert ET.parse(path).getroot().tag == "{http://www.w3.org/2000/svg}svg"


def test_cli_in_process_and_binary(tmp_path, matrix_run):
    code, _, err = pa.cli(["frob"])
    assert code == 1 and "run-matrix" in err

    out, _ = matrix_run
    code, _, err = pa.cli(["stats", "--input", str(out / "data" / "d2.csv"), "--label", "status",
                           "--positive", "phishing", "--native", "d2", "--out", str(tmp_path / "s")])
    assert code == 0, err
    validate(json.loads((tmp_path / "s" / "stats.json").read_text()), "stats_report")

    code, _, err = pa.cli(["prepare", "--config", str(out.parent / "run.ini"),
                           "--out", str(tmp_path / "p")])
    assert code == 0, err
    prepared = tmp_path / "p" / "prepared"
    validate(json.loads((prepared / "manifest.json").read_text()), "manifest")
    code, _, err = pa.cli(["train", "--train", str(prepared / "D1_train.csv"), "--model", "nb",
                           "--out", str(tmp_path / "nb.json")])
    assert code == 0, err
    code, _, err = pa.cli(["eval", "--model", str(tmp_path / "nb.json"), "--test",
                           str(prepared / "D1_test.csv"), "--out", str(tmp_path / "ev")])
    assert code == 0, err
    validate(json.loads((tmp_path / "ev" / "metrics.json").read_text()), "classification_metrics")

    binary = os.environ.get("PHISHAUDIT_CLI")
    if binary:
        r = subprocess.run([binary, "frob"], capture_output=True, text=True)
        assert r.returncode == 1 and "Usage" in r.stderr + r.stdout


def test_synthetic_files(tmp_path):
    d1, d2 = pa.generate_synthetic(str(tmp_path), seed=4, d1_rows=90, d2_rows=60)
    with open(d1) as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 90
    assert sum(r["phishing"] == "1" for r in rows) == 30
    with open(d2) as f:
        assert {r["status"] for r in csv.DictReader(f)} == {"phishing", "legitimate"}
