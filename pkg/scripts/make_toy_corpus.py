"""Regenerate the bundled toy data under src/sanipipe/data/toy/.

    python3 scripts/make_toy_corpus.py [--seed 7]

Writes a 20-document court-case style corpus (train.json: 12 docs,
test.json: 8 docs, two annotators on every other document), NER spans,
a small entity dump, the gazetteers built from it, per-token sequence
labeller predictions and a web-search fixture covering every query the
toy pipeline issues. Everything is a pure function of the seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import random
from pathlib import Path

from sanipipe.corpus import AnnotationSet, Document, IdentifierKind, Mention, SemanticType, save_corpus, tokenize
from sanipipe.gazetteer import (
    augment_dem,
    build_gazetteer,
    build_label_index,
    data_path,
    load_properties,
    parse_entity_stream,
    referenced_values,
    save_gazetteer,
)
from sanipipe.pipeline import detect
from sanipipe.silver import PredictedSpan, write_span_file
from sanipipe.websearch import make_query

OUT = Path(__file__).resolve().parents[1] / "src" / "sanipipe" / "data" / "toy"

FIRST = ["Anna", "Leszek", "Mehmet", "Olga", "Jean", "Maria", "Tomas", "Elif", "Ivan", "Sofia",
         "Karel", "Nadia", "Pavel", "Irena", "Hakan", "Lucia", "Dmitri", "Eva", "Marek", "Zeynep"]
LAST = ["Kowalska", "Nowicki", "Yilmaz", "Petrova", "Dupont", "Rossi", "Novak", "Demir", "Ivanov",
        "Georgiou", "Svoboda", "Haddad", "Horvat", "Melnyk", "Aksoy", "Ferrari", "Smirnov", "Lindqvist",
        "Kaminski", "Celik"]
LAWYERS = ["Mr J. Brandt", "Ms K. Weber", "Mr A. Costa", "Ms L. Marin", "Mr P. Ostrowski"]
AGENTS = ["Mr M. Wolny", "Ms H. Kaya", "Mr V. Lazar"]
CITIES = ["Warsaw", "Ankara", "Kyiv", "Lyon", "Milan", "Brno", "Izmir", "Gdansk", "Sofia", "Riga"]
COUNTRIES = ["Poland", "Turkey", "Ukraine", "France", "Italy", "Czech Republic", "Bulgaria", "Latvia"]
NATIONALITY = {"Poland": "Polish", "Turkey": "Turkish", "Ukraine": "Ukrainian", "France": "French",
               "Italy": "Italian", "Czech Republic": "Czech", "Bulgaria": "Bulgarian", "Latvia": "Latvian"}
OCCUPATIONS = ["lawyer", "teacher", "journalist", "police officer", "engineer", "nurse", "farmer", "judge"]
DEGREES = ["Bachelor in Computer Science", "Master of Laws", "Bachelor of Arts"]
LANGUAGES = ["Polish", "Turkish", "Russian", "Italian", "Kurdish"]
RELIGIONS = ["Catholic", "Muslim", "Orthodox"]
AWARDS = ["Order of Merit", "Medal for Bravery"]
CONFLICTS = ["Second World War", "Kosovo War"]
ORGS = ["Polimex Ltd", "Metro Bank", "Anadolu Press", "City Hospital", "Agrocorp", "Nordic Steel"]
UNIVERSITIES = ["University of Warsaw", "Ankara University", "Charles University"]
MONTHS = ["January", "February", "March", "April", "May", "June", "July", "August", "September",
          "October", "November", "December"]


class Builder:
    """Accumulates text and mention offsets."""

    def __init__(self):
        self.parts = []
        self.pos = 0
        self.mentions = []

    def text(self, s):
        self.parts.append(s)
        self.pos += len(s)

    def mention(self, s, stype, kind, entity):
        self.mentions.append(Mention(self.pos, self.pos + len(s), SemanticType(stype), IdentifierKind(kind),
                                     False, entity))
        self.text(s)

    def build(self):
        return "".join(self.parts), self.mentions


def _date(rng):
    return f"{rng.randint(1, 28)} {rng.choice(MONTHS)} {rng.randint(1995, 2015)}"


def make_document(idx, rng):
    first, last = FIRST[idx], LAST[idx]
    name = f"{first} {last}"
    title = "Ms" if first in ("Anna", "Olga", "Maria", "Elif", "Sofia", "Nadia", "Irena", "Lucia", "Eva", "Zeynep") else "Mr"
    country = rng.choice(COUNTRIES)
    city, city2 = rng.sample(CITIES, 2)
    org = rng.choice(ORGS)
    b = Builder()
    b.text("PROCEDURE\n\nThe case originated in an application against ")
    b.mention(country, "LOC", "QUASI", "country")
    b.text(" lodged by a ")
    b.mention(NATIONALITY[country], "DEM", "QUASI", "nationality")
    b.text(" national, ")
    b.mention(name, "PERSON", "DIRECT", "applicant")
    b.text(", on ")
    b.mention(_date(rng), "DATETIME", "QUASI", "lodged")
    b.text(". The applicant was represented by ")
    b.mention(rng.choice(LAWYERS), "PERSON", "DIRECT", "lawyer")
    b.text(", a lawyer practising in ")
    b.mention(city2, "LOC", "QUASI", "lawyer_city")
    b.text(". The Government were represented by their Agent, ")
    b.mention(rng.choice(AGENTS), "PERSON", "NO_MASK", "agent")
    b.text(".\n\nTHE FACTS\n\nThe applicant was born in ")
    b.mention(str(rng.randint(1950, 1990)), "DATETIME", "QUASI", "born")
    b.text(" and lives in ")
    b.mention(city, "LOC", "QUASI", "home")
    b.text(". ")
    b.mention(f"{title} {last}", "PERSON", "DIRECT", "applicant")
    b.text(" worked as a ")
    b.mention(rng.choice(OCCUPATIONS), "DEM", "QUASI", "occupation")
    b.text(" at ")
    b.mention(org, "ORG", "QUASI", "employer")
    b.text(" until ")
    b.mention(_date(rng), "DATETIME", "QUASI", "left")
    b.text(".")
    if rng.random() < 0.6:
        b.text(" The applicant holds a ")
        b.mention(rng.choice(DEGREES), "DEM", "QUASI", "degree")
        b.text(" from ")
        b.mention(rng.choice(UNIVERSITIES), "ORG", "QUASI", "university")
        b.text(".")
    if rng.random() < 0.5:
        b.text(" The applicant is ")
        b.mention(rng.choice(RELIGIONS), "DEM", "QUASI", "religion")
        b.text(" and speaks ")
        b.mention(rng.choice(LANGUAGES), "DEM", "QUASI", "language")
        b.text(".")
    b.text("\n\nOn ")
    b.mention(_date(rng), "DATETIME", "QUASI", "arrest")
    b.text(" the police in ")
    b.mention(city, "LOC", "QUASI", "home")
    b.text(" arrested ")
    b.mention(f"{title} {last}", "PERSON", "DIRECT", "applicant")
    b.text(" and seized passport no. ")
    b.mention(f"{rng.choice('ABCDEFGH')}{rng.choice('KLMNPRST')}{rng.randint(1000000, 9999999)}", "CODE", "DIRECT", "passport")
    b.text(". The case file no. ")
    b.mention(f"{rng.randint(100, 99999)}/{rng.randint(95, 99) if rng.random() < 0.3 else rng.randint(10, 15):02d}", "CODE", "DIRECT", "caseno")
    b.text(" was opened by the prosecutor.")
    if rng.random() < 0.5:
        b.text(" In ")
        b.mention(str(rng.randint(1996, 2012)), "DATETIME", "QUASI", "award_year")
        b.text(" the applicant had received the ")
        b.mention(rng.choice(AWARDS), "MISC", "QUASI", "award")
        b.text(" for service during the ")
        b.mention(rng.choice(CONFLICTS), "MISC", "NO_MASK", "conflict")
        b.text(".")
    b.text("\n\nThe applicant claimed ")
    b.mention(f"{rng.randint(2, 90) * 1000} euros", "QUANTITY", "NO_MASK", "claim")
    b.text(" in respect of non-pecuniary damage. The Court awards ")
    b.mention(_date(rng)[-4:] + " euros", "QUANTITY", "NO_MASK", "award_sum")
    b.text(" to ")
    b.mention(name, "PERSON", "DIRECT", "applicant")
    b.text(".")
    text, mentions = b.build()
    doc_id = f"toy-{idx:03d}"
    anns = {"ann1": AnnotationSet("ann1", tuple(mentions))}
    if idx % 2 == 0:
        second = []
        for m in mentions:
            if m.semantic_type == SemanticType.QUANTITY and rng.random() < 0.5:
                continue
            if m.identifier_kind == IdentifierKind.QUASI and rng.random() < 0.15:
                m = Mention(m.start, m.end, m.semantic_type, IdentifierKind.NO_MASK, m.confidential, m.entity_id)
            second.append(m)
        anns["ann2"] = AnnotationSet("ann2", tuple(second))
    return Document(doc_id, text, name, anns)


def ner_spans(doc, rng):
    """Simulated recognizer output: gold spans minus DEM/MISC, with misses and one false alarm."""
    out = []
    for m in doc.annotations["ann1"].mentions:
        if m.semantic_type in (SemanticType.DEM, SemanticType.MISC):
            continue
        if rng.random() < 0.12:
            continue
        out.append(PredictedSpan(m.start, m.end, m.semantic_type, "NER"))
    k = doc.text.find("Court")
    if k >= 0 and rng.random() < 0.5:
        out.append(PredictedSpan(k, k + 5, SemanticType.ORG, "NER"))
    return sorted(out, key=lambda s: s.start)


def make_dump(rng):
    """Wikidata-style dump lines: a few humans plus the items their claims point to."""
    items = {}

    def item(label):
        if label not in items:
            items[label] = f"Q{1000 + len(items)}"
        return items[label]

    def claim(pid, value):
        if isinstance(value, str):
            dv = {"type": "wikibase-entityid", "value": {"entity-type": "item", "id": item(value)}}
        else:
            dv = value
        return {"mainsnak": {"snaktype": "value", "property": pid, "datavalue": dv}, "type": "statement"}

    humans = []
    pools = [("P106", OCCUPATIONS), ("P512", DEGREES), ("P1412", LANGUAGES), ("P140", RELIGIONS),
             ("P166", AWARDS), ("P607", CONFLICTS), ("P172", ["Roma", "Kurds"])]
    for n in range(40):
        claims = {"P31": [claim("P31", {"type": "wikibase-entityid", "value": {"id": "Q5"}})]}
        for pid, pool in pools:
            if rng.random() < 0.7:
                claims[pid] = [claim(pid, rng.choice(pool))]
        humans.append({"type": "item", "id": f"Q{500 + n}", "labels": {"en": {"language": "en", "value": f"Person {n}"}},
                       "claims": claims})
    lines = ["["]
    lines += [json.dumps(h) + "," for h in humans]
    for label, qid in sorted(items.items(), key=lambda kv: kv[1]):
        lines.append(json.dumps({"type": "item", "id": qid, "labels": {"en": {"language": "en", "value": label}},
                                 "claims": {}}) + ",")
    lines.append("]")
    return lines


def _h(s):
    return int.from_bytes(hashlib.blake2b(s.encode("utf-8"), digest_size=8).digest(), "big")


def web_entry(query, identifying, target=None):
    """Deterministic fake search result: identifying spans are rare and share URLs with the target."""
    h = _h(query)
    if identifying:
        hits = h % 90
        urls = [f"https://news.example.org/{h % 997}", f"https://registry.example.com/{h % 101}"]
        if target:
            urls.append(f"https://people.example.net/{_h(target) % 1009}")
    else:
        hits = 1000 + h % 5_000_000
        urls = [f"https://www.example.com/{query.strip(chr(34)).lower().replace(' ', '-')}/{i}" for i in range(3)]
    return {"urls": urls, "total_hits": hits}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)

    docs = [make_document(i, rng) for i in range(20)]
    train, test = docs[:12], docs[12:]
    save_corpus(train, out / "train.json")
    save_corpus(test, out / "test.json")

    ner = {d.doc_id: ner_spans(d, rng) for d in docs}
    write_span_file(out / "ner.jsonl", [(d.doc_id, ner[d.doc_id]) for d in test])

    dump = make_dump(rng)
    (out / "dump.jsonl").write_text("\n".join(dump) + "\n", encoding="utf-8")
    specs = load_properties()
    wanted = referenced_values(dump, specs)
    labels = build_label_index(dump, wanted)
    dem, misc, _ = build_gazetteer(parse_entity_stream(dump, specs, labels), specs)
    augment_dem(dem, data_path("countries.txt"))
    for extra in NATIONALITY.values():
        dem.add(extra.lower(), "manual:nationalities")
    save_gazetteer(dem, out / "dem.tsv")
    save_gazetteer(misc, out / "misc.tsv")

    with open(out / "seqlab.jsonl", "w", encoding="utf-8") as fh:
        for d in test:
            tokens = tokenize(d.text)
            mask = [False] * len(tokens)
            for m in d.annotations["ann1"].mentions:
                if m.identifier_kind == IdentifierKind.NO_MASK:
                    continue
                for t, tok in enumerate(tokens):
                    if tok.start < m.end and m.start < tok.end:
                        mask[t] = True
            labels_ = ["MASK" if (f if rng.random() > 0.08 else not f) else "NO_MASK" for f in mask]
            fh.write(json.dumps({"doc_id": d.doc_id, "labels": labels_}) + "\n")

    spans = detect(test, ner={d.doc_id: ner[d.doc_id] for d in test}, gazetteers=[dem, misc])
    fixture = {}
    for d in test:
        gold = d.annotations["ann1"].mentions
        for s in spans[d.doc_id]:
            surface = d.text[s.start:s.end]
            identifying = any(m.start < s.end and s.start < m.end and m.identifier_kind == IdentifierKind.DIRECT
                              for m in gold)
            for quote in (True, False):
                q = make_query(surface, quote)
                fixture.setdefault(q, web_entry(q, identifying, d.target_name))
        person = " ".join(d.target_name.split())
        fixture.setdefault(person, {"urls": [f"https://people.example.net/{_h(d.target_name) % 1009}",
                                             f"https://social.example.com/{_h(person) % 4099}"],
                                    "total_hits": 40 + _h(person) % 50})
    (out / "web_fixture.json").write_text(json.dumps(fixture, indent=1, sort_keys=True, ensure_ascii=False) + "\n",
                                          encoding="utf-8")
    print(f"wrote {len(docs)} documents, {sum(len(v) for v in spans.values())} detected test spans, "
          f"{len(fixture)} fixture queries to {out}")


if __name__ == "__main__":
    main()
