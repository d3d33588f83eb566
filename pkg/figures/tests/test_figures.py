"""Figure scripts against golden harness outputs: every script renders the
fixtures without error, and schema mismatches fail loudly before anything is
written."""

import shutil
from pathlib import Path

import pytest

from nestedenkf_figures.cli import (boxplot_main, covbars_main, curve_main,
                                    heatmap_main, trace_main)
from nestedenkf_figures.schema import (SchemaError, parameter_columns,
                                       read_summary, read_table)

FIXTURES = Path(__file__).parent / "fixtures"


def fixture(name):
    return str(FIXTURES / name)


class TestSchemaReaders:
    def test_read_table_golden(self):
        header, data = read_table(fixture("grid1d.csv"), "grid",
                                  required=("rmse_mean", "rmse_std"))
        assert header == ["sigma", "rmse_mean", "rmse_std", "n_replicates"]
        assert data.shape == (5, 4)

    def test_parameter_columns(self):
        header, _ = read_table(fixture("outer_cycles.csv"), "outer")
        assert parameter_columns(header, "mean") == ["sigma"]
        assert parameter_columns(header, "spread") == ["sigma"]

    def test_foreign_file_rejected(self, tmp_path):
        foreign = tmp_path / "foreign.csv"
        foreign.write_text("sigma,rmse_mean\n2.0,0.4\n")
        with pytest.raises(SchemaError, match="magic"):
            read_table(foreign, "grid")

    def test_wrong_kind_rejected(self):
        with pytest.raises(SchemaError, match="kind 'grid'"):
            read_table(fixture("grid1d.csv"), "outer")

    def test_future_schema_version_rejected(self, tmp_path):
        f = tmp_path / "v9.csv"
        f.write_text("# nestedenkf-csv-v9 grid\nsigma,rmse_mean\n2.0,0.4\n")
        with pytest.raises(SchemaError, match="schema v9"):
            read_table(f, "grid")

    def test_missing_column_named_in_error(self, tmp_path):
        f = tmp_path / "cols.csv"
        f.write_text("# nestedenkf-csv-v1 grid\nsigma,rmse_mean\n2.0,0.4\n")
        with pytest.raises(SchemaError, match="'rmse_std'"):
            read_table(f, "grid", required=("rmse_mean", "rmse_std"))

    def test_empty_table_rejected(self, tmp_path):
        f = tmp_path / "empty.csv"
        f.write_text("# nestedenkf-csv-v1 outer\nreplicate,outer,s_mean\n")
        with pytest.raises(SchemaError, match="no data rows"):
            read_table(f, "outer")

    def test_summary_reader(self):
        payload = read_summary(fixture("summary.json"),
                               required=("parameter_names", "replicates"))
        assert payload["parameter_names"] == ["sigma"]
        assert len(payload["replicates"]) == 3

    def test_summary_missing_key(self, tmp_path):
        f = tmp_path / "s.json"
        f.write_text('{"schema_version": 1}')
        with pytest.raises(SchemaError, match="'replicates'"):
            read_summary(f, required=("replicates",))

    def test_summary_bad_version(self, tmp_path):
        f = tmp_path / "s.json"
        f.write_text('{"schema_version": 2, "replicates": []}')
        with pytest.raises(SchemaError, match="schema_version"):
            read_summary(f)


class TestScriptsRenderGoldenFixtures:
    """The [SECONDARY] acceptance: each script renders from the golden
    fixtures without error."""

    @pytest.mark.parametrize("name,main,infile,extra", [
        ("trace", trace_main, "outer_cycles.csv", ["--ref", "2.15"]),
        ("curve", curve_main, "grid1d.csv", ["--ref", "2.15"]),
        ("heatmap", heatmap_main, "grid2d.csv",
         ["--estimate", "2.1,0.3", "--estimate", "1.9,0.25"]),
        ("boxplot", boxplot_main, "summary.json", []),
        ("covbars", covbars_main, "residual_cov.csv", []),
    ])
    @pytest.mark.parametrize("fmt", ["png", "svg"])
    def test_renders_without_error(self, tmp_path, capsys, name, main,
                                   infile, extra, fmt):
        out = tmp_path / f"{name}.{fmt}"
        rc = main(["--in", fixture(infile), "--out", str(out),
                   "--format", fmt] + extra)
        assert rc == 0, capsys.readouterr().err
        assert out.stat().st_size > 1000
        head = out.read_bytes()[:5]
        assert head == (b"\x89PNG\r" if fmt == "png" else b"<?xml")

    def test_png_render_is_byte_idempotent(self, tmp_path):
        outs = []
        for i in (1, 2):
            out = tmp_path / f"curve{i}.png"
            assert curve_main(["--in", fixture("grid1d.csv"),
                               "--out", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestScriptsFailLoudly:
    def test_schema_mismatch_exits_nonzero(self, tmp_path, capsys):
        rc = curve_main(["--in", fixture("outer_cycles.csv"),
                         "--out", str(tmp_path / "x.png")])
        assert rc == 1
        assert "kind" in capsys.readouterr().err
        assert not (tmp_path / "x.png").exists()

    def test_empty_trace_is_an_error_not_an_empty_plot(self, tmp_path,
                                                       capsys):
        empty = tmp_path / "outer_cycles.csv"
        with open(fixture("outer_cycles.csv"), encoding="utf-8") as fh:
            magic, header = fh.readline(), fh.readline()
        empty.write_text(magic + header)
        rc = trace_main(["--in", str(empty),
                         "--out", str(tmp_path / "t.png")])
        assert rc == 1
        assert "no data rows" in capsys.readouterr().err
        assert not (tmp_path / "t.png").exists()

    def test_missing_column_is_named(self, tmp_path, capsys):
        broken = tmp_path / "grid.csv"
        lines = Path(fixture("grid1d.csv")).read_text().splitlines()
        lines[1] = lines[1].replace("rmse_mean", "rmse_avg")
        broken.write_text("\n".join(lines) + "\n")
        rc = curve_main(["--in", str(broken),
                         "--out", str(tmp_path / "c.png")])
        assert rc == 1
        assert "rmse_mean" in capsys.readouterr().err

    def test_heatmap_needs_two_parameters(self, tmp_path, capsys):
        rc = heatmap_main(["--in", fixture("grid1d.csv"),
                           "--out", str(tmp_path / "h.png")])
        assert rc == 1
        assert "two parameter" in capsys.readouterr().err

    def test_curve_rejects_two_parameters(self, tmp_path, capsys):
        rc = curve_main(["--in", fixture("grid2d.csv"),
                         "--out", str(tmp_path / "c.png")])
        assert rc == 1
        assert "one parameter" in capsys.readouterr().err

    def test_heatmap_incomplete_lattice(self, tmp_path, capsys):
        lines = Path(fixture("grid2d.csv")).read_text().splitlines()
        broken = tmp_path / "grid.csv"
        broken.write_text("\n".join(lines[:-1]) + "\n")  # drop one point
        rc = heatmap_main(["--in", str(broken),
                           "--out", str(tmp_path / "h.png")])
        assert rc == 1
        assert "lattice" in capsys.readouterr().err

    def test_missing_input_file(self, tmp_path, capsys):
        rc = boxplot_main(["--in", str(tmp_path / "nope.json"),
                           "--out", str(tmp_path / "b.png")])
        assert rc == 1
        assert "nope.json" in capsys.readouterr().err

    def test_covbars_rejects_nonsquare(self, tmp_path, capsys):
        lines = Path(fixture("residual_cov.csv")).read_text().splitlines()
        broken = tmp_path / "cov.csv"
        broken.write_text("\n".join(lines[:-2]) + "\n")
        rc = covbars_main(["--in", str(broken),
                           "--out", str(tmp_path / "cb.png")])
        assert rc == 1
        assert "square" in capsys.readouterr().err
