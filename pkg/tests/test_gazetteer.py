import gzip
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import _human, brute_gazetteer_matches, synthetic_dump_lines
from sanipipe.corpus import tokenize
from sanipipe.gazetteer import (
    Gazetteer,
    GazetteerError,
    GazetteerMatcher,
    ParseStats,
    PropertySpec,
    augment_dem,
    build_gazetteer,
    build_label_index,
    is_excluded,
    load_gazetteer,
    load_properties,
    match_spans,
    normalize_term,
    open_dump,
    parse_entity_stream,
    referenced_values,
    save_gazetteer,
)

SPECS = [PropertySpec("P106", "occupation", "DEM"), PropertySpec("P39", "position held", "DEM"),
         PropertySpec("P1196", "manner of death", "MISC"), PropertySpec("P8839", "hairstyle / hair", "DEM")]


def gaz(category, *terms):
    g = Gazetteer(category)
    for t in terms:
        g.add(t, "P0")
    return g


def test_bundled_property_list_counts():
    specs = load_properties()
    assert sum(s.category == "DEM" for s in specs) == 44
    assert sum(s.category == "MISC" for s in specs) == 196
    ids = {s.property_id: s.category for s in specs}
    assert ids["P106"] == "DEM" and ids["P1196"] == "MISC"
    assert len(ids) == len(specs)


@pytest.mark.parametrize("pid,cat", [("X106", "DEM"), ("P10a", "DEM"), ("P106", "OTHER")])
def test_property_spec_validation(pid, cat):
    with pytest.raises(GazetteerError):
        PropertySpec(pid, "x", cat)


def lines_of(*entities):
    return ["[\n"] + [json.dumps(e) + ",\n" for e in entities] + ["]\n"]


def test_human_occupation_emitted():
    human = _human("Q1", [("P106", "Q36180")])
    out = list(parse_entity_stream(lines_of(human), SPECS, {"Q36180": "writer"}))
    assert out == [("P106", "writer")]


def test_non_human_emits_nothing():
    city = _human("Q2", [("P106", "Q36180")])
    city["claims"]["P31"][0]["mainsnak"]["datavalue"]["value"]["id"] = "Q515"
    assert list(parse_entity_stream(lines_of(city), SPECS, {"Q36180": "writer"})) == []


def test_position_held_label():
    human = _human("Q3", [("P39", "Q4416090")])
    assert list(parse_entity_stream(lines_of(human), SPECS, {"Q4416090": "U.S. senator"})) == [("P39", "U.S. senator")]


def test_malformed_and_unresolvable_are_counted():
    stats = ParseStats()
    lines = lines_of(_human("Q1", [("P106", "Q7"), ("P106", "Q8")]))
    lines.insert(1, '{"id": "Q9", "claims": \n')
    lines.insert(2, "[1, 2],\n")
    out = list(parse_entity_stream(lines, SPECS, {"Q7": "nurse"}, stats=stats))
    assert out == [("P106", "nurse")]
    assert stats.malformed == 2 and stats.unresolved == 1 and stats.humans == 1


def test_literal_value_types():
    human = _human("Q1", [])
    human["claims"]["P1196"] = [
        {"mainsnak": {"snaktype": "value", "datavalue": {"type": "string", "value": "drowning"}}},
        {"mainsnak": {"snaktype": "value", "datavalue": {"type": "monolingualtext", "value": {"text": "suicide", "language": "en"}}}},
        {"mainsnak": {"snaktype": "value", "datavalue": {"type": "monolingualtext", "value": {"text": "Selbstmord", "language": "de"}}}},
        {"mainsnak": {"snaktype": "novalue"}},
    ]
    human["claims"]["P8839"] = [
        {"mainsnak": {"snaktype": "value", "datavalue": {"type": "quantity",
                                                         "value": {"amount": "+12", "unit": "http://www.wikidata.org/entity/Q11573"}}}}]
    out = list(parse_entity_stream(lines_of(human), SPECS, {"Q11573": "metre"}))
    assert sorted(out) == [("P1196", "drowning"), ("P1196", "suicide"), ("P8839", "12 metre")]


def test_two_pass_label_resolution():
    lines = list(synthetic_dump_lines(300, seed=1, n_values=10))
    wanted = referenced_values(lines, SPECS)
    assert wanted and wanted <= {f"Q{k}" for k in range(1, 11)}
    labels = build_label_index(lines, wanted)
    assert set(labels) == wanted
    dem, misc, _ = build_gazetteer(parse_entity_stream(lines, SPECS, labels), SPECS)
    assert dem.terms and all(t.startswith("occupation") for t in dem.terms)
    assert misc.terms and all(t.startswith("cause") for t in misc.terms)


def test_build_gazetteer_examples():
    dem, misc, dropped = build_gazetteer(
        [("P1196", "capital punishment"), ("P8839", "Baldness"), ("P8839", "baldness"), ("P8839", " ... "),
         ("P106", "7"), ("P106", "x"), ("P999", "ignored")], SPECS)
    assert "capital punishment" in misc.terms
    assert dem.terms == {"baldness"} and dem.provenance["baldness"] == {"P8839"}
    assert dropped == {"empty": 1, "excluded": 2, "unknown_property": 1}
    e_dem, e_misc, _ = build_gazetteer([], SPECS)
    assert len(e_dem) == 0 and len(e_misc) == 0


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=40))
def test_normalization_is_idempotent(term):
    once = normalize_term(term)
    assert normalize_term(once) == once


@pytest.mark.parametrize("raw,norm", [("  Tennis   Coach. ", "tennis coach"), ("«Writer»", "writer"), ("U.S. senator", "u.s. senator")])
def test_normalize_examples(raw, norm):
    assert normalize_term(raw) == norm


def test_exclusions():
    assert is_excluded("1984") and is_excluded("a")
    assert not is_excluded("1984 olympics") and not is_excluded("ab")


def test_augment_dem(tmp_path):
    f = tmp_path / "countries.txt"
    f.write_text("Poland\nPolish\n", encoding="utf-8")
    g = gaz("DEM", "polish")
    augment_dem(g, f)
    assert {"poland", "polish"} <= g.terms
    assert g.provenance["polish"] == {"P0", "manual:countries"}
    empty = tmp_path / "empty.txt"
    empty.write_text("", encoding="utf-8")
    before = set(g.terms)
    assert augment_dem(g, empty).terms == before
    with pytest.raises(FileNotFoundError, match="missing.txt"):
        augment_dem(g, tmp_path / "missing.txt")


def test_gazetteer_round_trip_and_errors(tmp_path):
    g = Gazetteer("MISC", set(), {})
    for t, p in [("second world war", "P607"), ("capital punishment", "P1196"), ("order of merit", "P166")]:
        g.add(t, p)
    g.add("order of merit", "P4622")
    path = tmp_path / "misc.tsv"
    save_gazetteer(g, path)
    back = load_gazetteer(path)
    assert back.category == "MISC" and back.terms == g.terms and back.provenance == g.provenance
    save_gazetteer(back, tmp_path / "again.tsv")
    assert (tmp_path / "again.tsv").read_bytes() == path.read_bytes()

    bad = tmp_path / "bad.tsv"
    bad.write_text("writer\tDEM\tP106\nnurse\tFOO\tP106\n", encoding="utf-8")
    with pytest.raises(GazetteerError, match=":2:"):
        load_gazetteer(bad)
    empty = tmp_path / "empty.tsv"
    empty.write_text("", encoding="utf-8")
    assert len(load_gazetteer(empty)) == 0


def test_gzip_dump(tmp_path):
    path = tmp_path / "dump.json.gz"
    with gzip.open(path, "wt", encoding="utf-8") as fh:
        fh.writelines(lines_of(_human("Q1", [("P106", "Q7")]), {"id": "Q7", "labels": {"en": {"value": "nurse"}}}))
    with open_dump(path) as fh:
        wanted = referenced_values(fh, SPECS)
    with open_dump(path) as fh:
        labels = build_label_index(fh, wanted)
    with open_dump(path) as fh:
        assert list(parse_entity_stream(fh, SPECS, labels)) == [("P106", "nurse")]


def _matches(text, gazetteers):
    return [(m.start, m.end, m.category) for m in match_spans(text, tokenize(text), gazetteers)]


def test_bachelor_in_computer_science():
    g = gaz("DEM", "bachelor in computer science", "bachelor", "computer science")
    text = "She holds a Bachelor in Computer Science from Oxford."
    (m,) = match_spans(text, tokenize(text), [g])
    assert text[m.start:m.end] == "Bachelor in Computer Science"
    assert m.term == "bachelor in computer science"


def test_tennis_coach_and_ties():
    assert _matches("tennis coach", [gaz("DEM", "tennis coach", "coach")]) == [(0, 12, "DEM")]
    assert _matches("nothing here", [gaz("DEM", "coach")]) == []
    # same span in both categories: DEM wins
    assert _matches("the Catholic faith", [gaz("MISC", "catholic"), gaz("DEM", "catholic")]) == [(4, 12, "DEM")]
    # equal-length overlapping matches: leftmost wins
    assert _matches("aa bb aa", [gaz("DEM", "aa bb", "bb aa")]) == [(0, 5, "DEM")]


def test_token_boundaries_respected():
    g = gaz("DEM", "coach", "u.s. senator")
    assert _matches("coaching staff", [g]) == []
    assert _matches("a U.S. Senator", [g]) == [(2, 14, "DEM")]
    assert _matches("a U.S.Senator", [g]) == []


WORDS = ["tennis", "coach", "senior", "writer", "bachelor", "in", "computer", "science", "of", "arts"]


def random_case(rng):
    terms_dem = {" ".join(rng.choices(WORDS, k=rng.randint(1, 3))) for _ in range(rng.randint(0, 25))}
    terms_misc = {" ".join(rng.choices(WORDS, k=rng.randint(1, 3))) for _ in range(rng.randint(0, 25))}
    words = [w.upper() if rng.random() < 0.1 else w for w in rng.choices(WORDS + [",", "."], k=rng.randint(0, 35))]
    text = ""
    for w in words:
        text += w + rng.choice([" ", " ", "  ", "\n"])
    text = text[:200]
    return text, [gaz("DEM", *terms_dem), gaz("MISC", *terms_misc)]


def test_matcher_equals_brute_force():
    rng = random.Random(11)
    for _ in range(300):
        text, gazetteers = random_case(rng)
        got = _matches(text, gazetteers)
        assert got == brute_gazetteer_matches(text, gazetteers), text


def test_matcher_output_invariants():
    rng = random.Random(5)
    for _ in range(200):
        text, gazetteers = random_case(rng)
        matcher = GazetteerMatcher(gazetteers)
        toks = tokenize(text)
        cands = matcher.candidates(text, toks)
        out = matcher.match(text, toks)
        for a, b in zip(out, out[1:]):
            assert a.end <= b.start
        for m in out:
            assert normalize_term(text[m.start:m.end]) == m.term
            assert any(t.start == m.start for t in toks) and any(t.end == m.end for t in toks)
            for c in cands:
                if c.start < m.end and m.start < c.end:
                    assert c.end - c.start <= m.end - m.start
