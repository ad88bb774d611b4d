import copy
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairkit.metadata import (
    DCAT,
    DCT,
    LayerRecord,
    InvalidRecord,
    MissingRequiredField,
    WrongParentKind,
    attach_data_file,
    build_layer,
    link_children,
    read_metadata,
    record_from_graph,
    serialize_layer,
    validate_layer,
)
from fairkit.provenance import fixed_clock
from fairkit.rdf import RDF, Iri, Literal, parse_ntriples, serialize_ntriples
from fairkit.ingest import sha256_hex

DATA = Path(__file__).parent / "data"
LICENSE = "http://creativecommons.org/licenses/by/4.0/"
TYPE = Iri(RDF + "type")


def basics(id_, **kw):
    doc = {"id": id_, "title": "T", "version": "1.0", "publisher": "http://ex.org/pub"}
    doc.update(kw)
    return doc


@pytest.fixture
def tree():
    clock = fixed_clock("2026-05-06T00:00:00Z")
    root = build_layer("fdp_root", basics("http://ex.org/"), clock=clock)
    cat = build_layer("catalog", basics("http://ex.org/catalog/c"), root, clock=clock)
    ds = build_layer("dataset", basics("http://ex.org/dataset/d", license=LICENSE, keywords=["a", "b"]), cat,
                     clock=clock)
    dist = build_layer("distribution", basics("http://ex.org/distribution/x", license=LICENSE,
                                              download_url="http://ex.org/x.nt"), ds, clock=clock)
    return root, cat, ds, dist


def test_link_law(tree):
    root, cat, ds, dist = tree
    assert ds.parent == cat.id and ds.id in cat.children
    assert dist.modified == "2026-05-06"


def test_wrong_parent_kind(tree):
    _, cat, _, _ = tree
    with pytest.raises(WrongParentKind):
        build_layer("distribution", basics("http://ex.org/z", license=LICENSE, access_url="http://ex.org/"), cat)


def test_missing_title(tree):
    root = tree[0]
    doc = basics("http://ex.org/catalog/c2")
    del doc["title"]
    with pytest.raises(MissingRequiredField) as exc:
        build_layer("catalog", doc, root)
    assert exc.value.field == "title"


def test_complete_distribution_validates(tree):
    dist = tree[3]
    dist.description, dist.media_type = "N-Triples file", "application/n-triples"
    assert validate_layer(dist) == []


def test_distribution_without_urls(tree):
    dist = tree[3]
    dist.download_url = None
    issues = validate_layer(dist)
    assert any(i.field == "access" and i.severity == "essential" for i in issues)
    with pytest.raises(InvalidRecord):
        serialize_layer(dist)


def test_dataset_without_license(tree):
    ds = tree[2]
    ds.license = None
    assert [i.field for i in validate_layer(ds) if i.severity == "essential"] == ["license"]


def test_minimal_catalog_triples(tree):
    root, cat = tree[0], tree[1]
    g = serialize_layer(cat)
    assert any(g.triples(Iri(cat.id), TYPE, Iri(DCAT + "Catalog")))
    assert any(g.triples(Iri(cat.id), Iri(DCT + "isPartOf"), Iri(root.id)))


def test_two_keywords_two_triples(tree):
    ds = tree[2]
    assert len(list(serialize_layer(ds).triples(Iri(ds.id), Iri(DCAT + "keyword")))) == 2


def test_four_layer_fixture_matches_hand_written_file(fixture_dir):
    records = read_metadata(fixture_dir / "metadata.json")
    link_children(records)
    got = set()
    for r in records:
        got |= set(serialize_layer(r))
    expected = parse_ntriples((DATA / "fdp_layers.nt").read_text(encoding="utf-8"))
    assert got == set(expected)


def test_checksum_node(tmp_path, tree):
    dist = tree[3]
    f = tmp_path / "d.nt"
    f.write_bytes(b"<http://a/b> <http://a/c> <http://a/d> .\n")
    attach_data_file(dist, f)
    assert dist.byte_size == f.stat().st_size
    g = serialize_layer(dist)
    values = [t.object for t in g if t.predicate.value.endswith("checksumValue")]
    assert values == [Literal(sha256_hex(f.read_bytes()), Iri("http://www.w3.org/2001/XMLSchema#hexBinary"))]


def test_fixture_is_a_tree(fixture_dir):
    records = read_metadata(fixture_dir / "metadata.json")
    link_children(records)
    by_id = {r.id: r for r in records}
    root = next(r for r in records if r.kind == "fdp_root")
    seen, queue = [], [root.id]
    while queue:
        rid = queue.pop()
        seen.append(rid)
        queue.extend(by_id[rid].children)
    assert sorted(seen) == sorted(by_id)


words = st.text(alphabet="abcdefghij XYZ-", min_size=1, max_size=12)


@settings(max_examples=100, deadline=None)
@given(title=words, description=st.one_of(st.none(), words), keywords=st.lists(words, max_size=4, unique=True),
       version=st.from_regex(r"[0-9]{1,2}(\.[0-9]{1,2}){0,2}", fullmatch=True),
       issued=st.one_of(st.none(), st.dates().map(lambda d: d.isoformat())))
def test_serialization_faithfulness(title, description, keywords, version, issued):
    rec = LayerRecord("dataset", "http://ex.org/dataset/d", title=title, description=description,
                      version=version, publisher="http://ex.org/pub", license=LICENSE, issued=issued,
                      keywords=keywords, parent="http://ex.org/catalog/c")
    g = parse_ntriples(serialize_ntriples(serialize_layer(rec)))
    back = record_from_graph(g, rec.id)
    expected = copy.deepcopy(rec)
    assert back.to_dict() | {"keywords": sorted(back.keywords)} == expected.to_dict() | {"keywords": sorted(keywords)}
    for t in g:
        for term in (t.subject, t.predicate, t.object):
            if isinstance(term, Iri):
                assert ":" in term.value
