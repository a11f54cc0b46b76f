import json
from fractions import Fraction

import numpy as np
import pytest

from carnot import algebra as A
from carnot import cli
from carnot import forms as F
from carnot import group as G
from carnot import homs as H
from carnot import io_schemas as IO
from carnot import smoothing as S


def test_algebra_roundtrip_byte_identical(h1, ch1):
    for g in (h1, ch1, A.heisenberg(2), A.free_step2(3)):
        blob = IO.dump_canonical(IO.algebra_to_json(g))
        g2 = IO.algebra_from_json(json.loads(blob))
        blob2 = IO.dump_canonical(IO.algebra_to_json(g2))
        assert blob == blob2
        assert A.validate_algebra(g2).valid
        assert g2.layer_dims == g.layer_dims


def test_schema_errors_name_fields():
    with pytest.raises(IO.SchemaError) as exc:
        IO.algebra_from_json({"schema_version": 1, "scalar": "Q", "layers": [2, 1]})
    assert "brackets" in str(exc.value)
    with pytest.raises(IO.SchemaVersionError):
        IO.algebra_from_json({"schema_version": 99, "scalar": "Q",
                              "layers": [2, 1], "brackets": []})
    with pytest.raises(IO.SchemaError) as exc2:
        IO.algebra_from_json({"scalar": "Q", "layers": [2, 1],
                              "brackets": [[1, 2, [[3, "x/y"]]]]})
    assert "brackets[0]" in str(exc2.value)


def test_form_and_hom_roundtrip(h1):
    a = F.theta(h1, 1, 3).scale(Fraction(5, 7)) + F.theta(h1, 2, 3)
    blob = IO.dump_canonical(IO.form_to_json(a))
    a2 = IO.form_from_json(h1, json.loads(blob))
    assert a == a2
    phi = H.dilation_hom(h1, Fraction(3, 2))
    blob2 = IO.dump_canonical(IO.hom_to_json(phi))
    phi2 = IO.hom_from_json(h1, h1, json.loads(blob2))
    assert phi2.blocks == phi.blocks


def test_pq_roundtrip():
    pq = A.product_quotient("R", 1, 3, [[1, 1, 1]])
    blob = IO.dump_canonical(IO.pq_to_json(pq))
    pq2 = IO.pq_from_json(json.loads(blob))
    assert pq2.n == 3 and pq2.field == "R"
    assert pq2.certificate.valid


def test_sampled_map_roundtrip(h1):
    lat = G.sample_box(h1, np.zeros(3), 1.0, 3)
    sm = S.SampledMap(lat, lat.points() * 1.5, h1)
    blob = IO.dump_canonical(IO.sampled_map_to_json(sm))
    sm2 = IO.sampled_map_from_json(h1, h1, json.loads(blob))
    assert np.allclose(sm2.values, sm.values)
    blob2 = IO.dump_canonical(IO.sampled_map_to_json(sm2))
    assert blob == blob2


def test_builtin_algebra_parser():
    assert IO.builtin_algebra("heisenberg(2)").dim == 5
    assert IO.builtin_algebra("sum(heisenberg(1), 3)").dim == 9
    with pytest.raises(IO.SchemaError):
        IO.builtin_algebra("nope(1)")


def test_cli_validate(tmp_path, h1):
    f = tmp_path / "h1.json"
    f.write_text(IO.dump_canonical(IO.algebra_to_json(h1)))
    rc = cli.main(["--out", str(tmp_path), "validate", str(f)])
    assert rc == 0
    report = json.loads((tmp_path / "validate.json").read_text())
    assert report["valid"] is True
    # broken algebra exits 1
    bad = {"schema_version": 1, "scalar": "Q", "layers": [2, 1],
           "brackets": [[1, 2, [[1, "1"]]]]}
    f2 = tmp_path / "bad.json"
    f2.write_text(json.dumps(bad))
    assert cli.main(["--out", str(tmp_path), "validate", str(f2)]) == 1


def test_cli_usage_error_exit_2(tmp_path):
    assert cli.main(["--out", str(tmp_path), "no-such-verb"]) == 2


def test_cli_classify_pq(tmp_path):
    pq = A.product_quotient("R", 1, 3, [[1, 1, 1]])
    f = tmp_path / "pq.json"
    f.write_text(IO.dump_canonical(IO.pq_to_json(pq)))
    rc = cli.main(["--out", str(tmp_path), "classify", str(f)])
    assert rc == 0
    rep = json.loads((tmp_path / "classify.json").read_text())
    assert rep["verdict"] == "heisenberg-like"
    assert rep["field"] == "R" and rep["n"] == 3 and rep["m"] == 1
    assert rep["finest_partition"] == {"blocks": [[1, 2, 3]]}


def test_cli_decompose(tmp_path, sum3h1):
    f = tmp_path / "g.json"
    f.write_text(IO.dump_canonical(IO.algebra_to_json(sum3h1)))
    rc = cli.main(["--out", str(tmp_path), "decompose", str(f)])
    assert rc == 0
    rep = json.loads((tmp_path / "decompose.json").read_text())
    assert len(rep["factors"]) == 3


def test_cli_forms_and_lift(tmp_path):
    rc = cli.main(["--out", str(tmp_path), "forms", "heisenberg(1)", "theta", "1", "2"])
    assert rc == 0
    rep = json.loads((tmp_path / "form.json").read_text())
    assert rep["weight"] == -2
    src = tmp_path / "shear.map"
    src.write_text("map(x,y)->(x, y + x^2)")
    rc2 = cli.main(["--out", str(tmp_path), "lift", str(src)])
    assert rc2 == 0
    rep2 = json.loads((tmp_path / "lift.json").read_text())
    assert rep2["contact_exact"] is True
    # non-symplectic input: domain error
    bad = tmp_path / "bad.map"
    bad.write_text("map(x,y)->(2*x, y)")
    assert cli.main(["--out", str(tmp_path), "lift", str(bad)]) == 1


def test_cli_verify_pullback_reproducible(tmp_path):
    spec = {
        "schema_version": 1,
        "algebra": "heisenberg(1)",
        "map": "lift_symplectic(x^2)",
        "omega": {"schema_version": 1, "degree": 2,
                  "terms": [[[1, 3], "1"]]},
        "eta": {"schema_version": 1, "degree": 0, "terms": [[[], "1"]]},
        "box": 1,
        "resolutions": [8, 16],
    }
    f = tmp_path / "exp.json"
    f.write_text(json.dumps(spec))
    rc = cli.main(["--out", str(tmp_path), "--format", "csv", "verify-pullback",
                   str(f), "--svg"])
    assert rc == 0
    blob1 = (tmp_path / "pullback.json").read_bytes()
    svg1 = (tmp_path / "pullback.svg").read_bytes()
    rc2 = cli.main(["--out", str(tmp_path), "--format", "csv", "verify-pullback",
                    str(f), "--svg"])
    assert rc2 == 0
    assert (tmp_path / "pullback.json").read_bytes() == blob1
    assert (tmp_path / "pullback.svg").read_bytes() == svg1
    assert (tmp_path / "pullback.csv").exists()


def test_cli_mollify(tmp_path, h1):
    lat = G.sample_box(h1, np.zeros(3), 1.0, 5)
    sm = S.SampledMap(lat, lat.points(), h1)
    f = tmp_path / "map.json"
    f.write_text(IO.dump_canonical(IO.sampled_map_to_json(sm)))
    rc = cli.main(["--out", str(tmp_path), "mollify", str(f),
                   "--algebra", "heisenberg(1)", "--rho", "0.2"])
    assert rc == 0
    out = json.loads((tmp_path / "mollified.json").read_text())
    assert out["resolution"] == [5, 5, 5]


def test_cli_report(tmp_path, h1):
    f = tmp_path / "h1.json"
    f.write_text(IO.dump_canonical(IO.algebra_to_json(h1)))
    pq = A.product_quotient("R", 1, 3, [[1, 1, 1]])
    f2 = tmp_path / "pq.json"
    f2.write_text(IO.dump_canonical(IO.pq_to_json(pq)))
    rc = cli.main(["--out", str(tmp_path), "report", str(f), str(f2)])
    assert rc == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert len(rep["reports"]) == 2
    assert all(r["valid"] for r in rep["reports"])


def test_docs_examples_pass_their_verbs(tmp_path):
    """Every example file in docs/ passes its declared verb."""
    import pathlib
    docs = pathlib.Path(__file__).resolve().parent.parent / "docs"
    assert cli.main(["--out", str(tmp_path), "validate",
                     str(docs / "heisenberg1.algebra.json")]) == 0
    assert cli.main(["--out", str(tmp_path), "validate",
                     str(docs / "complex_heisenberg1.algebra.json")]) == 0
    assert cli.main(["--out", str(tmp_path), "classify",
                     str(docs / "diagonal3.pq.json")]) == 0
    assert cli.main(["--out", str(tmp_path), "lift",
                     str(docs / "shear.map")]) == 0
    assert cli.main(["--out", str(tmp_path), "verify-pullback",
                     str(docs / "h1_codegree1.experiment.json")]) == 0
