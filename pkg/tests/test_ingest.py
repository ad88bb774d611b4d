import json
from datetime import date
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairkit.ingest import (
    ColumnSchema,
    Dialect,
    DuplicateColumn,
    EncodingError,
    SchemaError,
    UnknownColumn,
    apply_schema,
    parse_cell,
    parse_csv,
    read_csv,
    sha256_hex,
)

from csv_cases import CASES


def schema(*cols):
    return ColumnSchema.from_dict({"columns": [dict(c) for c in cols]})


@pytest.mark.parametrize("name,data,expected", CASES, ids=[c[0] for c in CASES])
def test_csv_conformance(name, data, expected):
    if isinstance(expected, tuple):
        exc_type, attrs = expected
        with pytest.raises(exc_type) as exc:
            parse_csv(data)
        for k, v in attrs.items():
            assert getattr(exc.value, k) == v
    else:
        assert list(parse_csv(data).rows) == expected


def test_header_and_digest():
    data = b"x,y\n1,2\n"
    ds = parse_csv(data, source="t.csv")
    assert ds.columns == ("x", "y")
    assert ds.digest == sha256_hex(data) == parse_csv(data).digest


def test_other_delimiter_and_headerless():
    ds = parse_csv(b"1;2\n3;4\n", Dialect(delimiter=";", header=False))
    assert ds.columns == ("col1", "col2")
    assert len(ds.rows) == 2


def test_duplicate_column():
    with pytest.raises(DuplicateColumn):
        parse_csv(b"a,a\n1,2\n")


def test_non_utf8_input():
    with pytest.raises(EncodingError):
        parse_csv(b"a\n\xff\n")


def test_integer_parse():
    ds = parse_csv(b"n\n042\n")
    typed = apply_schema(ds, schema({"name": "n", "type": "integer", "nullable": True}))
    assert typed.rows == ((42,),)
    assert typed.row_errors == ()


def test_empty_in_nullable_column_is_null_without_error():
    typed = apply_schema(parse_csv(b"n,m\n,1\n"), schema({"name": "n", "type": "integer", "nullable": True}))
    assert typed.rows == ((None,),)
    assert typed.row_errors == ()


def test_bad_cell_is_logged_and_isolated():
    ds = parse_csv(b"n,d\nabc,2020-01-02\n")
    typed = apply_schema(ds, schema({"name": "n", "type": "integer", "nullable": True},
                                    {"name": "d", "type": "date", "nullable": True}))
    assert typed.rows == ((None, date(2020, 1, 2)),)
    (err,) = typed.row_errors
    assert (err.row, err.column, err.reason) == (1, "n", "invalid integer")


def test_null_marker_in_non_nullable_column():
    typed = apply_schema(parse_csv(b"n\nNA\n"),
                         schema({"name": "n", "type": "integer", "nullable": False, "null_markers": ["NA"]}))
    assert typed.rows == ((None,),)
    assert typed.row_errors[0].reason == "null in non-nullable column"


def test_subset_law_drops_extra_columns():
    typed = apply_schema(parse_csv(b"a,extra,b\n1,x,2\n"),
                         schema({"name": "b", "type": "integer", "nullable": True},
                                {"name": "a", "type": "string", "nullable": True}))
    assert typed.columns == ("b", "a")
    assert typed.rows == ((2, "1"),)


def test_missing_schema_column():
    with pytest.raises(UnknownColumn):
        apply_schema(parse_csv(b"a\n1\n"), schema({"name": "b", "type": "string", "nullable": True}))


@pytest.mark.parametrize("doc", [
    {"columns": [{"name": "a", "type": "float", "nullable": True}]},
    {"columns": [{"name": "a", "type": "string"}]},
    {"columns": [{"name": "a", "type": "string", "nullable": True, "colour": "red"}]},
    {"cols": []},
])
def test_schema_is_strict(doc):
    with pytest.raises(SchemaError):
        ColumnSchema.from_dict(doc)


@pytest.mark.parametrize("raw,type_,value", [
    ("-7", "integer", -7),
    ("36.50", "decimal", Decimal("36.50")),
    ("TRUE", "boolean", True),
    ("0", "boolean", False),
    ("2020-02-29", "date", date(2020, 2, 29)),
])
def test_parse_cell(raw, type_, value):
    assert parse_cell(raw, type_) == value


@pytest.mark.parametrize("raw,type_", [("38,5", "decimal"), ("2020-13-01", "date"), ("yes", "boolean"),
                                        ("1e3", "integer"), ("2020-01-01 10:00", "datetime")])
def test_parse_cell_rejects(raw, type_):
    with pytest.raises(ValueError):
        parse_cell(raw, type_)


def test_fixture_errors_are_the_planted_ones(fixture_dir):
    ds = read_csv(fixture_dir / "crf.csv")
    s = ColumnSchema.from_dict(json.loads((fixture_dir / "schema.json").read_text()))
    typed = apply_schema(ds, s)
    assert len(typed) == 200
    assert [(e.row, e.column) for e in typed.row_errors] == [(7, "age"), (42, "temperature"), (100, "admission_date")]


cell = st.text(alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"), max_size=8)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.lists(cell, min_size=3, max_size=3), min_size=1, max_size=10))
def test_csv_round_trip_through_the_writer(rows):
    import csv
    import io

    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_ALL)
    writer.writerow(["a", "b", "c"])
    writer.writerows(rows)
    ds = parse_csv(buf.getvalue().encode("utf-8"))
    assert [list(r) for r in ds.rows] == rows
