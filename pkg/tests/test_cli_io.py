import json
import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from hypersmml import cli
from hypersmml.errors import UnsupportedError
from hypersmml.prior_marginal import TruncatedDomain
from hypersmml.serialization import code_from_dict, dumps, read_code
from hypersmml.smml_estimator import SmmlCode, message_length_I1
from hypersmml import svg

SVG_NS = "{http://www.w3.org/2000/svg}"


def run(*args):
    return cli.main([str(a) for a in args])


@pytest.fixture(scope="module")
def fitted(tmp_path_factory):
    d = tmp_path_factory.mktemp("fits")
    paths = {}
    for m in (1, 2, 3):
        path = d / f"m{m}.json"
        assert run("fit", "--m", m, "--n", 4, "--resolution", 64, "--restarts", 3, "--out", path) == 0
        paths[m] = path
    return paths


class TestVerify:
    def test_default_passes(self, tmp_path, capsys):
        report = tmp_path / "report.json"
        assert run("verify", "--report", report) == 0
        doc = json.loads(report.read_text())
        assert doc["passed"] is True
        assert doc["counts"]["fail"] == 0
        names = {c["name"] for c in doc["checks"]}
        for name in ("fisher_natural_fd", "reparam_round_trip", "density_normalization", "curvature",
                     "marginal_quadrature", "horomap_geodesy"):
            assert name in names
        for c in doc["checks"]:
            assert set(c) >= {"name", "expected", "observed", "tolerance", "status"}
        assert "all checks passed" in capsys.readouterr().out

    def test_n1_skips_density_checks(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"cases": [{"n": 1, "p": 1}]}))
        report = tmp_path / "report.json"
        assert run("verify", "--config", cfg, "--report", report) == 0
        checks = {c["name"]: c for c in json.loads(report.read_text())["checks"]}
        assert checks["density_normalization"]["status"] == "skipped"
        assert checks["volume_ratio"]["status"] == "skipped"

    def test_zero_tolerance_reports_failures(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"cases": [{"n": 4, "p": 1}], "tolerance": 0.0}))
        report = tmp_path / "report.json"
        assert run("verify", "--config", cfg, "--report", report) == 1
        doc = json.loads(report.read_text())
        failed = [c for c in doc["checks"] if c["status"] == "fail"]
        assert failed
        assert all(c["delta"] > 0 for c in failed)

    def test_unreadable_config(self, tmp_path, capsys):
        assert run("verify", "--config", tmp_path / "missing.json") == 2
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert run("verify", "--config", bad) == 2
        assert "cannot read config" in capsys.readouterr().err


class TestFit:
    def test_single_cell_document(self, fitted):
        doc = json.loads(fitted[1].read_text())
        assert doc["coding_probs"] == [1.0]
        assert doc["facets"] == []
        assert list(doc) == ["m", "n", "p", "domain", "assertions", "coding_probs", "I1_nats", "I1_bits",
                             "iterations", "seed", "facets"]
        assert doc["I1_bits"] == pytest.approx(doc["I1_nats"] / math.log(2), rel=1e-15)

    def test_symmetric_facet(self, fitted):
        doc = json.loads(fitted[2].read_text())
        (facet,) = doc["facets"]
        a = np.array(facet["a"])
        assert abs(a[1]) < 1e-9 * abs(a[0])
        assert abs(facet["b"]) < 1e-9
        assert facet["hyperbolic"]["variant"] == "vertical"
        assert facet["hyperbolic"]["d"] == pytest.approx(0.0, abs=1e-9)

    def test_facets_cover_pairs(self, fitted):
        doc = json.loads(fitted[3].read_text())
        assert [f["cells"] for f in doc["facets"]] == [[0, 1], [0, 2], [1, 2]]

    def test_same_seed_byte_identical(self, fitted, tmp_path):
        out = tmp_path / "again.json"
        assert run("fit", "--m", 3, "--n", 4, "--resolution", 64, "--restarts", 3, "--out", out) == 0
        assert out.read_bytes() == fitted[3].read_bytes()

    def test_round_trip(self, fitted):
        for path in fitted.values():
            code, n, doc = read_code(path)
            assert abs(message_length_I1(code, n) - doc["I1_nats"]) <= 1e-12 * abs(doc["I1_nats"])
            np.testing.assert_array_equal(code.assertions, np.array(doc["assertions"]))

    def test_custom_domain(self, tmp_path):
        out = tmp_path / "c.json"
        assert run("fit", "--m", 2, "--n", 6, "--domain", "-1,0.5/1,2", "--resolution", 16,
                   "--restarts", 2, "--out", out) == 0
        doc = json.loads(out.read_text())
        assert doc["domain"] == {"lower": [-1.0, 0.5], "upper": [1.0, 2.0], "resolution": 16}

    @pytest.mark.parametrize(
        "args",
        [
            ["--m", 0, "--n", 4],
            ["--m", 2, "--n", 4, "--domain", "garbage"],
            ["--m", 2, "--n", 4, "--domain", "-1,0.5/1,2", "--p", 2],
        ],
    )
    def test_invalid_arguments(self, tmp_path, args):
        assert run("fit", *args, "--out", tmp_path / "x.json") == 2

    def test_domain_error_is_reported(self, tmp_path):
        assert run("fit", "--m", 2, "--n", 4, "--domain", "1,0.5/-1,2", "--out", tmp_path / "x.json") == 1


class TestPlot:
    @pytest.mark.parametrize("view", ["affine", "hyperbolic"])
    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_well_formed_with_m_cells(self, fitted, tmp_path, m, view):
        out = tmp_path / f"{m}{view}.svg"
        assert run("plot", fitted[m], "--out", out, "--view", view) == 0
        root = ET.parse(out).getroot()
        cells = [el for el in root.iter() if el.get("class") == "cell"]
        assert len(cells) == m
        assert sorted(int(el.get("data-cell")) for el in cells) == list(range(m))
        facets = [el for el in root.iter() if el.get("class") == "facet"]
        if m == 1:
            assert facets == []

    def test_m2_vertical_boundary_at_zero(self, fitted, tmp_path):
        out = tmp_path / "h.svg"
        assert run("plot", fitted[2], "--out", out) == 0
        root = ET.parse(out).getroot()
        facets = [el for el in root.iter() if el.get("class") == "facet"]
        assert len(facets) == 1
        line = facets[0]
        assert line.tag == SVG_NS + "line"
        # u_1 = 0 is the horizontal centre of the symmetric [-2, 2] box
        assert float(line.get("x1")) == pytest.approx(float(line.get("x2")))
        assert float(line.get("x1")) == pytest.approx(float(root.get("width")) / 2, abs=0.01)

    def test_requires_p1(self):
        dom = TruncatedDomain((-1.0, -1.0, 0.5), (1.0, 1.0, 2.0), 4)
        code = SmmlCode(np.array([[0.0, 0.0, -1.0]]), np.array([1.0]), dom)
        with pytest.raises(UnsupportedError):
            svg.render(code, 5)

    def test_missing_file(self, tmp_path):
        assert run("plot", tmp_path / "nope.json", "--out", tmp_path / "x.svg") == 2


class TestSuffStat:
    def write(self, path, text):
        path.write_text(text)
        return path

    def test_ones_column(self, tmp_path):
        design = self.write(tmp_path / "A.csv", "intercept\n1\n1\n")
        response = self.write(tmp_path / "y.csv", "y\n1\n1\n")
        out = tmp_path / "x.json"
        assert run("suffstat", design, response, "--out", out) == 0
        doc = json.loads(out.read_text())
        assert doc["n"] == 2 and doc["p"] == 1
        np.testing.assert_allclose(doc["x"], [math.sqrt(2), 2.0], rtol=1e-15)
        np.testing.assert_allclose(doc["B"], [[1 / math.sqrt(2)], [1 / math.sqrt(2)]], rtol=1e-15)

    def test_zero_response(self, tmp_path):
        design = self.write(tmp_path / "A.csv", "1,0\n1,1\n1,2\n")
        response = self.write(tmp_path / "y.csv", "0\n0\n0\n")
        out = tmp_path / "x.json"
        assert run("suffstat", design, response, "--out", out) == 0
        assert json.loads(out.read_text())["x"] == [0.0, 0.0, 0.0]

    @pytest.mark.parametrize(
        "design, message",
        [
            ("1,2\n3,4\n5,6\n1,2\n", None),
            ("1,1\n2,2\n3,3\n", "condition number"),
            ("1,2\n3\n5,6\n", "ragged row"),
            ("1,2\n3,x\n5,6\n", "non-numeric cell 'x'"),
        ],
    )
    def test_errors(self, tmp_path, capsys, design, message):
        A = self.write(tmp_path / "A.csv", design)
        rows = len(design.strip().splitlines())
        y = self.write(tmp_path / "y.csv", "\n".join(["1"] * rows) + "\n")
        code = run("suffstat", A, y, "--out", tmp_path / "x.json")
        if message is None:
            assert code == 0
        else:
            assert code == 1
            assert message in capsys.readouterr().err

    def test_length_mismatch(self, tmp_path, capsys):
        A = self.write(tmp_path / "A.csv", "1\n2\n3\n")
        y = self.write(tmp_path / "y.csv", "1\n2\n")
        assert run("suffstat", A, y, "--out", tmp_path / "x.json") == 1
        assert "rows" in capsys.readouterr().err


class TestSerialization:
    def test_float_format(self):
        assert dumps(1.0) == "1.0"
        assert dumps(0.1) == "0.10000000000000001"
        assert dumps([1, 2.5]) == "[1, 2.5]"
        assert dumps({"a": None, "b": True}) == '{\n  "a": null,\n  "b": true\n}'
        with pytest.raises(ValueError):
            dumps(float("nan"))

    def test_exact_float_round_trip(self, rng):
        values = rng.standard_normal(100) * 10.0 ** rng.integers(-10, 10, 100)
        assert json.loads(dumps(values.tolist())) == values.tolist()

    def test_malformed_document(self):
        from hypersmml.errors import DomainError

        with pytest.raises(DomainError):
            code_from_dict({"m": 1})
