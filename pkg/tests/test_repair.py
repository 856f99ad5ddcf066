import json

import pytest

from conftest import generic_reply, make_config
from gdtbench.errors import NoJsonFound, NotAnArray, RepairRefused
from gdtbench.model import FieldKind, normalize_field_value
from gdtbench.repair import (
    RepairReport,
    deterministic_repair,
    extract_json_block,
    llm_repair,
    normalize_prediction,
    repair_directory,
    repair_prediction,
)
from gdtbench.annotation_io import parse_annotation, serialize_annotation


def test_extract_from_fences():
    assert extract_json_block('```json\n[{"a": 1}]\n```') == '[{"a": 1}]'
    assert extract_json_block("```\n[]\n```") == "[]"
    assert extract_json_block("prose\n```json\n[1, 2]\n```\nmore prose") == "[1, 2]"


def test_extract_from_prose():
    assert extract_json_block("Here are the results: [] Thanks!") == "[]"
    assert extract_json_block('before {"k": [1]} after') == '{"k": [1]}'


def test_extract_respects_strings_and_balance():
    assert extract_json_block('[{"a": "bracket ] in string"}]') == '[{"a": "bracket ] in string"}]'
    assert extract_json_block('[{"a": "\\" ]"}]') == '[{"a": "\\" ]"}]'
    # first opener never closes; the scan moves on to the next candidate
    assert extract_json_block("list [ of things\n[1, 2] end") == "[1, 2]"


def test_extract_nothing_found():
    for text in ("no structure here", "", "half open [1, 2", "} ] backwards"):
        with pytest.raises(NoJsonFound):
            extract_json_block(text)


def test_repair_trailing_commas():
    assert deterministic_repair('[{"a":1},]') == '[{"a":1}]'
    assert deterministic_repair('[{"a":1,\n}, ]') == '[{"a":1\n} ]'
    assert deterministic_repair('["a,]"]') == '["a,]"]'  # comma inside string survives


def test_repair_quotes():
    assert deterministic_repair("[{'tolerance': '0.1'}]") == '[{"tolerance": "0.1"}]'
    assert deterministic_repair("{'a': 'it\\'s'}") == '{"a": "it\'s"}'
    assert deterministic_repair('{“a”: “b”}') == '{"a": "b"}'
    # apostrophe in the middle of regular text is not a string delimiter
    assert deterministic_repair('["it\'s fine"]') == '["it\'s fine"]'


def test_repair_is_idempotent_and_preserves_valid_json():
    cases = [
        '[{"a": 1}, {"b": "x"}]',
        "[{'a': '1'},]",
        '{“q”: “v”, \'r\': \'w\'}',
        '[{"a": "0.1"}]',
    ]
    for text in cases:
        once = deterministic_repair(text)
        assert deterministic_repair(once) == once
    assert deterministic_repair('[{"a": 1}]') == '[{"a": 1}]'


def test_repaired_text_parses():
    raw = "[{'geometric_characteristic': 'flatness', 'tolerance': '0.1', 'datum': ''},]"
    parsed = json.loads(deterministic_repair(raw))
    assert parsed[0]["tolerance"] == "0.1"


def test_normalize_prediction_folds_and_drops():
    parsed = [
        {"symbol": "flatness", "tol": "0.1", "datums": ["A"]},
        {"tolerance": "0.2"},  # no characteristic: dropped
        {"geometric_characteristic": "wiggle", "tolerance": "0.3"},  # unknown: dropped
        "not an object",  # dropped
        {"geometric_characteristic": "⊕", "tolerance": "Ø 0.4 (M)", "datum": "B|C"},
    ]
    annotation, report = normalize_prediction(parsed, "d9")
    assert report.parse_ok and report.dropped_entries == 3
    assert annotation.entry_count == 2
    assert annotation.fcfs[0].characteristic.glyph == "⏥"
    assert annotation.fcfs[0].datums == ("A",)
    assert annotation.fcfs[1].characteristic.glyph == "⌖"
    assert annotation.fcfs[1].tolerance == "⌀0.4Ⓜ"


def test_normalize_prediction_not_array():
    with pytest.raises(NotAnArray):
        normalize_prediction({"entries": []})


def test_normalized_values_are_fixed_points():
    parsed = [{"symbol": "perpendicularity", "tol": "Ø 0.2 ( L )", "datums": ["A ", "B(M)"]}]
    annotation, _ = normalize_prediction(parsed)
    fcf = annotation.fcfs[0]
    assert normalize_field_value(fcf.tolerance, FieldKind.TOLERANCE) == fcf.tolerance
    for datum in fcf.datums:
        assert normalize_field_value(datum, FieldKind.DATUM) == datum


def test_repair_prediction_stages():
    noisy = "Result:\n```json\n[{'gdt_symbol': 'flatness', 'tolerance_value': 0.1, 'datums': []},]\n```"
    annotation, report = repair_prediction(noisy, "d1")
    assert report.parse_ok
    assert report.stage_applied == [
        "extract_json_block",
        "deterministic_repair",
        "normalize_prediction",
    ]
    assert annotation.entry_count == 1
    assert annotation.fcfs[0].tolerance == "0.1"

    clean = '[{"geometric_characteristic": "⏥", "tolerance": "0.1", "datum": ""}]'
    _, clean_report = repair_prediction(clean, "d1")
    assert clean_report.stage_applied == ["extract_json_block", "normalize_prediction"]


def test_repair_prediction_failure_modes():
    annotation, report = repair_prediction("nothing json-like", "d2")
    assert not report.parse_ok
    assert annotation.entry_count == 0
    assert report.error

    annotation, report = repair_prediction('{"entries": []}', "d3")
    assert not report.parse_ok
    assert annotation.entry_count == 0


def test_repair_prediction_never_calls_endpoint_for_valid_input(stub_endpoint):
    stub = stub_endpoint(lambda path, body: (200, generic_reply("[]")))
    config = make_config(stub.url)
    _, report = repair_prediction("[]", "d4", repair_endpoint=config, sleep=lambda _: None)
    assert report.parse_ok
    assert stub.requests == 0


def test_llm_repair_path(stub_endpoint):
    fixed = '[{"geometric_characteristic": "⏥", "tolerance": "0.1", "datum": ""}]'
    stub = stub_endpoint(lambda path, body: (200, generic_reply(fixed)))
    config = make_config(stub.url)

    raw = "tolerance callout: flatness 0.1 (not json)"
    assert llm_repair(raw, config, sleep=lambda _: None) == fixed

    annotation, report = repair_prediction(raw, "d5", repair_endpoint=config, sleep=lambda _: None)
    assert report.parse_ok
    assert "llm_repair" in report.stage_applied
    assert annotation.entry_count == 1
    assert stub.requests >= 1


def test_llm_repair_refused(stub_endpoint):
    stub = stub_endpoint(lambda path, body: (200, generic_reply("still not json")))
    config = make_config(stub.url)
    with pytest.raises(RepairRefused):
        llm_repair("garbage", config, sleep=lambda _: None)

    annotation, report = repair_prediction(
        "garbage", "d6", repair_endpoint=config, sleep=lambda _: None
    )
    assert not report.parse_ok
    assert "RepairRefused" in report.error
    assert annotation.entry_count == 0


def test_repair_directory(tmp_path):
    (tmp_path / "a.raw.txt").write_text("[{'symbol': 'flatness', 'tol': '0.1'},]", encoding="utf-8")
    (tmp_path / "b.raw.txt").write_text("no json here", encoding="utf-8")

    results = repair_directory(tmp_path)
    assert [record_id for record_id, _ in results] == ["a", "b"]
    reports = dict(results)
    assert reports["a"].parse_ok and not reports["b"].parse_ok

    parsed = parse_annotation((tmp_path / "a.json").read_text(encoding="utf-8"), "a")
    assert parsed.entry_count == 1
    empty = parse_annotation((tmp_path / "b.json").read_text(encoding="utf-8"), "b")
    assert empty.entry_count == 0

    saved = json.loads((tmp_path / "a.repair.json").read_text(encoding="utf-8"))
    assert saved["parse_ok"] is True
    assert saved["stage_applied"][0] == "extract_json_block"


def test_repaired_annotation_reserializes():
    noisy = "```json\n[{'symbol': 'true position', 'tol': 'Ø 0.5', 'datums': ['A', 'B']}]\n```"
    annotation, report = repair_prediction(noisy, "d7")
    assert report.parse_ok
    text = serialize_annotation(annotation)
    assert parse_annotation(text, "d7") == annotation
