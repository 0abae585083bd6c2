import json

import pytest

from hztools.plot import main, plot_ranges, read_ranges


def test_read_ranges_filters_and_sorts(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("image,class,lo,hi,verdict,label\n"
                    "1,1,0.0,1.0,Unknown,0\n"
                    "1,0,-1.0,0.5,Unknown,0\n"
                    "2,0,0.0,0.0,Robust,0\n")
    image, rows = read_ranges(str(path), image=1)
    assert image == 1
    assert [int(r["class"]) for r in rows] == [0, 1]
    image, rows = read_ranges(str(path))
    assert image == 1  # defaults to the first row's image


def test_read_ranges_missing_column_diagnostic(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("image,class,lo\n0,0,1.0\n")
    with pytest.raises(ValueError, match="missing columns: hi"):
        read_ranges(str(path))


def test_read_ranges_empty_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("image,class,lo,hi\n")
    with pytest.raises(ValueError, match="no data rows"):
        read_ranges(str(path))


def test_plot_golden_svg_is_reproducible(fixtures, tmp_path):
    out = tmp_path / "out.svg"
    plot_ranges(str(fixtures / "ranges_golden.csv"),
                str(fixtures / "verdict_golden.json"), str(out))
    assert out.read_bytes() == (fixtures / "ranges_golden.svg").read_bytes()


def test_main_success_and_errors(fixtures, tmp_path):
    out = tmp_path / "p.svg"
    assert main(["--ranges", str(fixtures / "ranges_golden.csv"),
                 "--report", str(fixtures / "verdict_golden.json"),
                 "--out", str(out)]) == 0
    assert out.exists()
    bad = tmp_path / "bad.csv"
    bad.write_text("foo,bar\n1,2\n")
    assert main(["--ranges", str(bad), "--out", str(tmp_path / "q.svg")]) == 1
    assert main(["--ranges", str(tmp_path / "missing.csv"),
                 "--out", str(tmp_path / "q.svg")]) == 1


def test_verdict_json_overrides_csv(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("image,class,lo,hi,verdict,label\n"
                    "0,0,0.0,1.0,Unknown,1\n"
                    "0,1,2.0,3.0,Unknown,1\n")
    report = tmp_path / "rep.json"
    report.write_text(json.dumps(
        {"records": [{"image": 0, "label": 0, "verdict": "Robust"}]}))
    out = tmp_path / "v.svg"
    plot_ranges(str(path), str(report), str(out))
    text = out.read_text()
    assert "Robust" in text and "label 0" in text
