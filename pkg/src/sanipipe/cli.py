"""Command-line entry point.

Each stage is a subcommand that reads and writes files:

    build-gazetteer  dump -> dem.tsv, misc.tsv
    convert-tab      TAB JSON -> corpus JSON
    detect           corpus (+ NER spans, gazetteers | predictions) -> spans JSONL
    score            corpus + spans -> decisions JSONL
    tune             corpus (+ spans) -> threshold sweep CSV + best JSON
    sanitize         corpus + spans + decisions -> sanitized JSONL + masksets JSONL
    evaluate         corpus + masksets -> report CSV + JSON

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import json
import logging
import sys
from collections import Counter
from pathlib import Path

import click

from . import pipeline
from .corpus import CorpusError, convert_tab, load_corpus, save_corpus, tokenize
from .evaluation import (
    EvaluationError,
    read_masksets,
    report,
    write_masksets,
    write_report_csv,
    write_report_json,
)
from .gazetteer import (
    GazetteerError,
    ParseStats,
    augment_dem,
    build_gazetteer,
    build_label_index,
    load_gazetteer,
    load_properties,
    open_dump,
    parse_entity_stream,
    referenced_values,
    save_gazetteer,
)
from .indicators.decisions import INDICATORS, read_decisions, write_decisions
from .indicators.perturbation import tune_threshold, write_sweep_csv
from .indicators.seqlab import PARTIAL, STRICT, read_token_predictions
from .scorer import NGramScorer, ScorerError, external_scorer, serve_jsonl, train_ngram
from .silver import SpanFileError, read_span_file, write_span_file
from .websearch import SearchClient, SearchError

logger = logging.getLogger("sanipipe")

RUNTIME_ERRORS = (CorpusError, GazetteerError, SpanFileError, EvaluationError, ScorerError,
                  SearchError, pipeline.StageError, OSError, ValueError)


def _fail(exc):
    raise click.ClickException(str(exc))


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.exceptions.Exit:
            raise
        except click.ClickException:
            raise
        except RUNTIME_ERRORS as exc:
            _fail(exc)


def _load_config(path):
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise click.BadParameter(str(exc), param_hint="--config")
    if not isinstance(cfg, dict) or any(isinstance(v, dict) for v in cfg.values()):
        raise click.BadParameter("config must be a flat JSON object", param_hint="--config")
    return {k.replace("-", "_"): v for k, v in cfg.items()}


def _apply_config(ctx, param, value):
    if value is None:
        return None
    cfg = _load_config(value)
    ctx.default_map = {name: cfg for name in ctx.command.commands}
    for key in ("workers", "seed"):
        if key in cfg:
            ctx.meta["config_" + key] = cfg[key]
    return value


@click.group(cls=_Group)
@click.option("--config", type=click.Path(exists=True, dir_okay=False), callback=_apply_config,
              is_eager=True, expose_value=False, help="Flat JSON file of option defaults; flags win.")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Document-parallel workers.")
@click.option("--seed", type=int, default=None, help="Seed for every random choice.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def main(ctx, workers, seed, verbose):
    """Span-level privacy risk scoring and text sanitization."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj["workers"] = workers if workers is not None else int(ctx.meta.get("config_workers", 1))
    ctx.obj["seed"] = seed if seed is not None else int(ctx.meta.get("config_seed", 0))


def _echo_json(obj):
    click.echo(json.dumps(obj, sort_keys=True))


# -- gazetteers ------------------------------------------------------------

@main.command("build-gazetteer")
@click.option("--dump", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Wikidata JSON dump (plain or gzip).")
@click.option("--properties", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Property list TSV (default: bundled list).")
@click.option("--countries", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--lang", default="en", show_default=True)
@click.option("--aliases/--no-aliases", default=False, show_default=True)
def build_gazetteer_cmd(dump, properties, countries, out_dir, lang, aliases):
    """Build DEM and MISC gazetteers from a dump (three streaming passes)."""
    specs = load_properties(properties)
    stats = ParseStats()
    with open_dump(dump) as fh:
        wanted = referenced_values(fh, specs, stats)
    with open_dump(dump) as fh:
        labels = build_label_index(fh, wanted, lang, aliases)
    emitted = ParseStats()
    with open_dump(dump) as fh:
        dem, misc, dropped = build_gazetteer(parse_entity_stream(fh, specs, labels, lang, emitted), specs)
    if countries:
        augment_dem(dem, countries)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_gazetteer(dem, out / "dem.tsv")
    save_gazetteer(misc, out / "misc.tsv")
    _echo_json({"DEM": len(dem.terms), "MISC": len(misc.terms), "entities": stats.entities,
                "humans": emitted.humans, "malformed": stats.malformed, "dropped": dict(dropped)})


@main.command("convert-tab")
@click.argument("tab_json", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def convert_tab_cmd(tab_json, out):
    """Convert a TAB-layout JSON file into the corpus format."""
    raw = json.loads(Path(tab_json).read_text(encoding="utf-8"))
    docs, counters = convert_tab(raw)
    save_corpus(docs, out)
    _echo_json({"documents": len(docs), **dict(counters)})


# -- detection -------------------------------------------------------------

@main.command()
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--ner", type=click.Path(exists=True, dir_okay=False), default=None, help="NER spans JSONL.")
@click.option("--gazetteer", "gazetteers", type=click.Path(exists=True, dir_okay=False), multiple=True,
              help="Gazetteer TSV (repeatable).")
@click.option("--predictions", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Recognizer predictions JSONL, passed through after validation.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def detect(corpus, ner, gazetteers, predictions, out):
    """Detect candidate spans."""
    if bool(ner is not None or gazetteers) == (predictions is not None):
        raise click.UsageError("give --ner/--gazetteer or --predictions, not both or neither")
    docs = load_corpus(corpus)
    spans = pipeline.detect(
        docs,
        ner=read_span_file(ner, "NER") if ner else None,
        gazetteers=[load_gazetteer(g) for g in gazetteers],
        predictions=read_span_file(predictions, "MODEL") if predictions else None,
    )
    write_span_file(out, [(d.doc_id, spans[d.doc_id]) for d in docs])
    _echo_json({"documents": len(docs), "spans": sum(len(v) for v in spans.values())})


# -- scoring ---------------------------------------------------------------

def _scorer_options(f):
    opts = [
        click.option("--ngram-model", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="Saved n-gram model."),
        click.option("--ngram-train", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="Corpus whose texts train the n-gram scorer."),
        click.option("--ngram-order", type=click.IntRange(min=1), default=3, show_default=True),
        click.option("--ngram-k", type=click.FloatRange(min=0), default=0.1, show_default=True),
        click.option("--external-command", default=None, help="Scorer subprocess speaking JSONL on stdio."),
        click.option("--external-address", default=None, help="host:port of a JSONL scorer service."),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def _make_scorer(ngram_model, ngram_train, ngram_order, ngram_k, external_command, external_address,
                 fallback_docs=None, required=True):
    chosen = [x for x in (ngram_model, ngram_train, external_command, external_address) if x]
    if len(chosen) > 1:
        raise click.UsageError("choose one scorer: --ngram-model, --ngram-train, --external-command or --external-address")
    if ngram_model:
        return NGramScorer.load(ngram_model)
    if ngram_train:
        return train_ngram([d.text for d in load_corpus(ngram_train)], ngram_order, ngram_k)
    if external_command or external_address:
        return external_scorer(command=external_command, address=external_address)
    if fallback_docs:
        return train_ngram([d.text for d in fallback_docs], ngram_order, ngram_k)
    if required:
        raise click.UsageError("a scorer is required (--ngram-model, --ngram-train or --external-*)")
    return None


def _close(scorer):
    if hasattr(scorer, "close"):
        scorer.close()


@main.command()
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--spans", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--train", "train_corpus", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Gold training corpus for the classifiers, threshold tuning and default n-gram.")
@click.option("--indicators", default=",".join(INDICATORS), show_default=True,
              help="Comma-separated subset of " + ", ".join(INDICATORS))
@_scorer_options
@click.option("--prob-threshold", type=float, default=0.5, show_default=True)
@click.option("--perturb-threshold", type=float, default=None,
              help="Fixed perturbation threshold (default: tuned on --train).")
@click.option("--tuned", type=click.Path(exists=True, dir_okay=False), default=None,
              help="best.json written by `tune`.")
@click.option("--train-fraction", type=click.FloatRange(0, 1, min_open=True), default=1.0, show_default=True)
@click.option("--text-dim", type=click.IntRange(min=1), default=1024, show_default=True)
@click.option("--iters", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--lr", type=float, default=0.5, show_default=True)
@click.option("--l2", type=float, default=1e-4, show_default=True)
@click.option("--token-predictions", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--seqlab-mode", type=click.Choice([STRICT, PARTIAL]), default=PARTIAL, show_default=True)
@click.option("--web-fixture", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--web-live", is_flag=True, help="Query the live endpoint from SANIPIPE_SEARCH_* (not deterministic).")
@click.option("--web-cache", type=click.Path(dir_okay=False), default=None)
@click.option("--web-mode", type=click.Choice(["hits", "urls"]), default="hits", show_default=True)
@click.option("--hits-lower", type=int, default=100, show_default=True)
@click.option("--hits-upper", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.pass_obj
def score(obj, corpus, spans, train_corpus, indicators, ngram_model, ngram_train, ngram_order, ngram_k,
          external_command, external_address, prob_threshold, perturb_threshold, tuned, train_fraction, text_dim,
          iters, lr, l2, token_predictions, seqlab_mode, web_fixture, web_live, web_cache, web_mode,
          hits_lower, hits_upper, out):
    """Run the configured risk indicators on every span."""
    names = tuple(n.strip().upper() for n in indicators.split(",") if n.strip())
    bad = [n for n in names if n not in INDICATORS]
    if bad or not names:
        raise click.BadParameter(f"unknown indicators {bad}" if bad else "empty", param_hint="--indicators")
    names = tuple(n for n in INDICATORS if n in names)
    if tuned and perturb_threshold is None:
        perturb_threshold = float(json.loads(Path(tuned).read_text(encoding="utf-8"))["threshold"])
    if web_fixture and web_live:
        raise click.UsageError("--web-fixture and --web-live are exclusive")
    docs = load_corpus(corpus)
    span_map = read_span_file(spans, "MODEL")
    _check_span_docs(docs, span_map)
    train_docs = load_corpus(train_corpus) if train_corpus else None
    client = None
    if "WEBSEARCH" in names:
        if web_fixture:
            client = SearchClient(fixture=web_fixture)
        elif web_live:
            client = SearchClient.from_env(cache_path=web_cache)
            logger.warning("live web search: output is not reproducible")
    cfg = pipeline.ScoreConfig(
        indicators=names, prob_threshold=prob_threshold, perturb_threshold=perturb_threshold,
        seqlab_mode=seqlab_mode, web_mode=web_mode, hits_lower=hits_lower, hits_upper=hits_upper,
        text_dim=text_dim, train_fraction=train_fraction, seed=obj["seed"], lr=lr, iters=iters, l2=l2,
        workers=obj["workers"],
    )
    preds = read_token_predictions(token_predictions) if token_predictions else None
    scorer = _make_scorer(ngram_model, ngram_train, ngram_order, ngram_k, external_command, external_address,
                          fallback_docs=train_docs)
    try:
        decisions = pipeline.score(docs, span_map, scorer, cfg, train_docs, preds, client)
    finally:
        _close(scorer)
    write_decisions(out, decisions)
    _echo_json({"spans": sum(len(v) for v in span_map.values()), "decisions": len(decisions),
                "risky": dict(Counter(d.indicator for d in decisions if d.risky))})


def _check_span_docs(docs, span_map):
    known = {d.doc_id for d in docs}
    unknown = sorted(set(span_map) - known)
    if unknown:
        raise pipeline.StageError(f"spans for unknown documents: {', '.join(unknown)}")
    for d in docs:
        span_map.setdefault(d.doc_id, [])


@main.command()
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Gold-annotated tuning corpus.")
@click.option("--spans", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Spans to score (default: gold mentions of the first annotator).")
@_scorer_options
@click.option("--sweep-out", type=click.Path(dir_okay=False), required=True)
@click.option("--best-out", type=click.Path(dir_okay=False), required=True)
@click.option("--masks-out", type=click.Path(dir_okay=False), default=None,
              help="MaskSet JSONL of the risky spans at the best threshold.")
@click.pass_obj
def tune(obj, corpus, spans, ngram_model, ngram_train, ngram_order, ngram_k, external_command,
         external_address, sweep_out, best_out, masks_out):
    """Sweep the perturbation threshold."""
    from .evaluation import MaskSet
    from .indicators.perturbation import risky_from_records

    docs = load_corpus(corpus)
    if spans:
        span_map = read_span_file(spans, "MODEL")
        _check_span_docs(docs, span_map)
    else:
        span_map = {d.doc_id: pipeline.gold_spans(d) for d in docs}
    scorer = _make_scorer(ngram_model, ngram_train, ngram_order, ngram_k, external_command, external_address,
                          fallback_docs=docs)
    try:
        items = pipeline.tune_items(docs, span_map, scorer, obj["workers"])
    finally:
        _close(scorer)
    best, sweep = tune_threshold(docs, items)
    write_sweep_csv(sweep_out, sweep)
    result = {"threshold": best.threshold, "precision": best.precision, "recall_direct": best.recall_direct,
              "recall_quasi": best.recall_quasi, "objective": best.objective}
    Path(best_out).write_text(json.dumps(result, indent=1) + "\n", encoding="utf-8")
    if masks_out:
        sets = []
        for doc, (p_spans, clusters, records) in zip(docs, items):
            risky = risky_from_records(records, clusters, best.threshold)
            sets.append(MaskSet(doc.doc_id, tuple((p_spans[k].start, p_spans[k].end) for k in sorted(risky))))
        write_masksets(masks_out, sets)
    _echo_json(result)


# -- masking and evaluation ------------------------------------------------

@main.command()
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--spans", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Spans JSONL the decisions refer to (supplies the semantic types).")
@click.option("--decisions", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("-k", "k", type=click.IntRange(1, len(INDICATORS)), default=1, show_default=True,
              help="Mask spans flagged by at least k indicators.")
@click.option("--opaque", is_flag=True, help="Use *** instead of [TYPE] placeholders.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Sanitized texts JSONL.")
@click.option("--masks-out", type=click.Path(dir_okay=False), required=True, help="MaskSet JSONL.")
def sanitize(corpus, spans, decisions, k, opaque, out, masks_out):
    """Combine indicator votes and mask risky spans."""
    docs = load_corpus(corpus)
    span_map = read_span_file(spans, "MODEL")
    _check_span_docs(docs, span_map)
    texts, sets = pipeline.sanitize(docs, span_map, read_decisions(decisions), k, opaque)
    pipeline.write_sanitized(out, texts)
    write_masksets(masks_out, sets)
    _echo_json({"documents": len(docs), "masked_spans": sum(len(m.spans) for m in sets)})


@main.command()
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--masks", "masks", multiple=True, required=True,
              help="NAME=PATH (or PATH; the file stem names the row). Repeatable.")
@_scorer_options
@click.option("--out-csv", type=click.Path(dir_okay=False), required=True)
@click.option("--out-json", type=click.Path(dir_okay=False), required=True)
def evaluate(corpus, masks, ngram_model, ngram_train, ngram_order, ngram_k, external_command,
             external_address, out_csv, out_json):
    """Report P, Pw, recalls and F1 for one or more mask configurations.

    Without a scorer option the weighted precision falls back to uniform weights.
    """
    docs = load_corpus(corpus)
    scorer = _make_scorer(ngram_model, ngram_train, ngram_order, ngram_k, external_command, external_address,
                          required=False)
    reports = []
    try:
        for spec in masks:
            name, _, path = spec.rpartition("=") if "=" in spec else (Path(spec).stem, "", spec)
            if not Path(path).is_file():
                raise click.BadParameter(f"no such file {path!r}", param_hint="--masks")
            reports.append(report(docs, read_masksets(path), scorer, config=name))
    finally:
        _close(scorer)
    write_report_csv(out_csv, reports)
    write_report_json(out_json, reports)
    for rep in reports:
        _echo_json({**rep.row(), "undefined": rep.undefined})


@main.command("train-ngram")
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--order", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("-k", "add_k", type=click.FloatRange(min=0), default=0.1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def train_ngram_cmd(corpus, order, add_k, out):
    """Train and save an n-gram scorer."""
    model = train_ngram([d.text for d in load_corpus(corpus)], order, add_k)
    model.save(out)
    _echo_json({"order": order, "add_k": add_k, "vocab": len(model.vocab)})


@main.command("serve-scorer")
@click.option("--ngram-model", type=click.Path(exists=True, dir_okay=False), required=True)
def serve_scorer(ngram_model):
    """Serve an n-gram model over the JSONL scoring protocol on stdin/stdout."""
    serve_jsonl(NGramScorer.load(ngram_model), sys.stdin, sys.stdout)


@main.command()
@click.option("--corpus", type=click.Path(exists=True, dir_okay=False), required=True)
def stats(corpus):
    """Corpus statistics."""
    from .corpus import corpus_stats

    docs = load_corpus(corpus)
    s = corpus_stats(docs)
    _echo_json({**s.__dict__, "tokens": sum(len(tokenize(d.text)) for d in docs)})


if __name__ == "__main__":
    main()
