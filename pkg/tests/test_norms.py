import json

import pytest

from sktscore.errors import ExampleNormsError, InputError, NormError
from sktscore.model import IqBand, SubjectMeta, SubtestId
from sktscore.norms import (Severity, assemble_result, classify_total, cognitive_group,
                            example_norms_path, load_norm_table, raw_to_norm)
from sktscore.scoring import RawScore

EXPECTED_BANDS = (["NCI"] * 5 + ["MCI"] * 4 + ["MildDem"] * 5 + ["ModerateDem"] * 5
                  + ["SevereDem"] * 5 + ["VerySevereDem"] * 4)


@pytest.mark.parametrize("total", range(28))
def test_all_totals(total):
    assert classify_total(total).value == EXPECTED_BANDS[total]


@pytest.mark.parametrize("bad", [-1, 28, 3.5, True])
def test_out_of_range_totals(bad):
    with pytest.raises(ValueError):
        classify_total(bad)


def test_groups():
    assert [cognitive_group(t) for t in (4, 5, 8, 9, 27)] == ["NCI", "MCI", "MCI", "DEM", "DEM"]


def _table_doc(**over):
    bands = [{"label": "60-79", "min": 60, "max": 79}]
    cells = {b.value: [2.0, 4.0, 6.0] for b in IqBand}
    doc = {"name": "t", "age_bands": bands,
           "cutoffs": {s.value: {"60-79": dict(cells)} for s in SubtestId}}
    doc.update(over)
    return doc


@pytest.fixture
def table(tmp_path):
    p = tmp_path / "n.json"
    p.write_text(json.dumps(_table_doc(), indent=2))
    return load_norm_table(p)


META = SubjectMeta(70, IqBand.BAND_90_TO_110)


@pytest.mark.parametrize("raw,norm", [(0, 0), (2, 0), (2.001, 1), (4, 1), (6, 2), (6.5, 3)])
def test_inclusive_upper_cutoffs(table, raw, norm):
    assert raw_to_norm(raw, META, table, SubtestId.S2) == norm


def test_missing_age_band_is_norm_error(table):
    with pytest.raises(NormError, match="age"):
        raw_to_norm(1, SubjectMeta(90, IqBand.BELOW_90), table, SubtestId.S2)


def test_assemble(table):
    raws = {s: RawScore(s, 7.0) for s in (SubtestId.S1, SubtestId.S2, SubtestId.S9)}
    res = assemble_result("p", META, raws, table)
    assert res.total == 9 and res.severity is Severity.MILD_DEM and res.partial
    assert res.memory_subtotal == 6 and res.attention_subtotal == 3


def test_schema_error_points_at_line(tmp_path):
    doc = _table_doc()
    doc["cutoffs"]["S3"]["60-79"]["Below90"] = [1, "x", 3]
    p = tmp_path / "n.json"
    p.write_text(json.dumps(doc, indent=2))
    with pytest.raises(InputError) as err:
        load_norm_table(p)
    line = p.read_text().splitlines()[err.value.line - 1]
    assert '"x"' in line


def test_decreasing_cutoffs_rejected(tmp_path):
    doc = _table_doc()
    doc["cutoffs"]["S7"]["60-79"]["Above110"] = [5, 4, 6]
    p = tmp_path / "n.json"
    p.write_text(json.dumps(doc, indent=2))
    with pytest.raises(InputError, match="non-decreasing"):
        load_norm_table(p)


def test_missing_cell_rejected(tmp_path):
    doc = _table_doc()
    del doc["cutoffs"]["S1"]["60-79"]["Above110"]
    p = tmp_path / "n.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(InputError, match="Above110"):
        load_norm_table(p)


def test_example_table_refused_without_opt_in():
    with pytest.raises(ExampleNormsError):
        load_norm_table(example_norms_path())
    assert load_norm_table(example_norms_path(), allow_example=True).example
