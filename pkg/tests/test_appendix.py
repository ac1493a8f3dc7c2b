import pytest

from qcf.appendix import (
    SUSPECTED_MISPRINTS,
    AppendixParseError,
    appendix_report,
    compare_box1,
    compare_D,
    parse_entry,
)
from qcf.cfcomplex import render_Y


def test_parser_round_trip():
    assert render_Y(parse_entry("-Y3-iY4")) == "-Y3-iY4"
    with pytest.raises(AppendixParseError):
        parse_entry("Q7")


def test_D0_matches_printed():
    assert compare_D(0)["passed"]


def test_literal_differences_are_the_four_known_entries():
    rep = appendix_report(corrected=False)
    found = {("D1", m["row"], m["col"]) for m in rep["D1"]["mismatches"]}
    found |= {("A", m["row"], m["col"]) for m in rep["box1"]["mismatches"]["A"]}
    found |= {("D", m["row"] - 4, m["col"] - 4) for m in rep["box1"]["mismatches"]["D"]}
    assert found == set(SUSPECTED_MISPRINTS)


def test_corrected_reference_matches():
    rep = appendix_report(corrected=True)
    assert rep["passed"]
    assert compare_box1(corrected=True)["block_placement"] == {"A": "upper", "D": "lower"}
    assert compare_box1()["off_diagonal_blocks_zero"]
