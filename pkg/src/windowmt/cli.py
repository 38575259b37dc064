"""Command-line pipeline: synth, train, translate, embed, cluster, segment.

Every subcommand prints a machine-readable JSON summary on stdout, writes
artifacts to declared paths, and logs to stderr.  Exit codes: 0 success,
1 usage error, 2 data/contract error.  A key=value config file can set any
flag; explicit command-line flags win.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import analysis, multitask, stream, text
from .model import (BundleError, Seq2SeqConfig, Seq2SeqParams, desk_config,
                    load_bundle, paper_config, read_tensor_dir, save_bundle)
from .multitask import (ParamRegistry, TaskSpec, alternating_train,
                        assemble_model, load_registry, load_task_manifest,
                        save_registry)
from .text import CharVocab, SyntheticWorld, build_vocab, load_parallel

PRESETS = {
    "desk": dict(hidden_dim=64, embed_dim=64, batch_size=16, max_len=100, vocab_cap=90,
                 src_window=6, tgt_window=5, prefix=6, vote=2),
    "paper": dict(hidden_dim=400, embed_dim=400, batch_size=16, max_len=100, vocab_cap=90,
                  src_window=6, tgt_window=5, prefix=6, vote=2),
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(summary: dict) -> None:
    print(json.dumps(summary, sort_keys=True))


def _load_config_file(path) -> dict:
    """key=value lines; '#' comments and blank lines ignored."""
    cfg = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"malformed config line: {line!r}")
        key, value = line.split("=", 1)
        cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def _coerce(value: str, default):
    if isinstance(default, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


class _ArgHelper:
    """add_argument wrapper that lets a config file override defaults."""

    def __init__(self, parser, cfg):
        self.parser = parser
        self.cfg = cfg

    def add(self, name, default=None, **kw):
        dest = name.lstrip("-").replace("-", "_")
        if dest in self.cfg and "required" not in kw:
            raw = self.cfg[dest]
            default = _coerce(raw, default) if default is not None else raw
        elif dest in self.cfg and kw.get("required"):
            kw = dict(kw)
            kw.pop("required")
            default = self.cfg[dest]
        if kw.get("action") == "store_true":
            self.parser.add_argument(name, action="store_true", default=bool(default))
            return
        self.parser.add_argument(name, default=default, **kw)


def build_parser(cfg: dict) -> _Parser:
    parser = _Parser(prog="windowmt", description=__doc__)
    parser.add_argument("--config", default=None, help="key=value config file")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("synth", help="generate a deterministic synthetic corpus tree")
    a = _ArgHelper(p, cfg)
    a.add("--seed", 0, type=int)
    a.add("--out", required=True)
    a.add("--lexicon", 60, type=int)
    a.add("--sentences", 400, type=int)
    a.add("--topics", 4, type=int)
    a.add("--languages", "l1", help="comma-separated non-pivot languages")
    a.add("--pivot", "pv")
    a.add("--docs-per-topic", 10, type=int)
    a.add("--inflection", False, action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="alternating multi-task training from a manifest")
    a = _ArgHelper(p, cfg)
    a.add("--tasks", required=True, help="task manifest TSV")
    a.add("--out", required=True, help="output bundle directory")
    a.add("--updates", 200, type=int)
    a.add("--turn", 50, type=int)
    a.add("--preset", "desk", choices=sorted(PRESETS))
    a.add("--seed", 0, type=int)
    a.add("--lr", 0.5, type=float)
    a.add("--momentum", 0.9, type=float)
    a.add("--hidden", 0, type=int, help="override preset hidden size")
    a.add("--embed", 0, type=int, help="override preset embedding size")
    a.add("--batch", 0, type=int, help="override preset batch size")
    a.add("--truncate", 100, type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", help="sliding-window translation of a stream")
    a = _ArgHelper(p, cfg)
    a.add("--bundle", required=True)
    a.add("--in", required=True, help="stream document file")
    a.add("--out-prefix", required=True)
    a.add("--src-lang", "")
    a.add("--tgt-lang", "")
    a.add("--doc-index", 0, type=int)
    a.add("--src-window", 6, type=int)
    a.add("--tgt-window", 5, type=int)
    a.add("--vote", 2, type=int)
    a.add("--prefix", 6, type=int)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("embed", help="document trace vectors for a stream file")
    a = _ArgHelper(p, cfg)
    a.add("--bundle", required=True)
    a.add("--in", required=True)
    a.add("--out", required=True)
    a.add("--src-lang", "")
    a.add("--tgt-lang", "")
    a.add("--src-window", 6, type=int)
    a.add("--tgt-window", 5, type=int)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("cluster", help="spherical k-means over exported vectors")
    a = _ArgHelper(p, cfg)
    a.add("--vectors", required=True)
    a.add("--k", 4, type=int)
    a.add("--seed", 0, type=int)
    a.add("--out", required=True)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("segment", help="story boundary detection on a stream file")
    a = _ArgHelper(p, cfg)
    a.add("--bundle", required=True, help="next-window predictor bundle")
    a.add("--in", required=True)
    a.add("--out", required=True)
    a.add("--src-lang", "")
    a.add("--tgt-lang", "")
    a.add("--window", 5, type=int)
    a.add("--alpha", 1.0, type=float)
    a.add("--beta", 0.5, type=float)
    a.add("--gamma", 1.0, type=float)
    a.add("--z-threshold", 2.0, type=float)
    a.add("--min-gap", 5, type=int)
    p.set_defaults(func=cmd_segment)
    return parser


def _load_any_bundle(path, src_lang: str, tgt_lang: str):
    """Load a model or registry bundle into (params, config, vocab)."""
    _, meta = read_tensor_dir(path)
    if meta.get("kind") == "model":
        return load_bundle(path)
    registry, config, vocab = load_registry(path)
    langs = meta.get("languages", [])
    if not src_lang or not tgt_lang:
        if len(langs) == 1:
            src_lang = tgt_lang = langs[0]
        else:
            raise BundleError(
                "registry bundle needs --src-lang and --tgt-lang "
                f"(available: {', '.join(langs)})")
    kind = multitask.AUTOENCODER if src_lang == tgt_lang else multitask.TRANSLATIONAL
    params = assemble_model(registry, TaskSpec(kind, src_lang, tgt_lang))
    return params, config, vocab


def cmd_synth(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    langs = [s for s in args.languages.split(",") if s]
    world = SyntheticWorld(args.seed, args.lexicon, args.topics)
    files = []
    manifest_rows = []
    for lang in langs:
        corpus = world.parallel_corpus(lang, args.pivot, args.sentences, args.seed,
                                       inflect_target=args.inflection)
        path = out / f"parallel_{lang}-{args.pivot}.tsv"
        text.save_parallel(corpus, path)
        files.append(str(path))
        manifest_rows.append(("translational", lang, args.pivot, path.name))
        docs = world.stream_documents(lang, args.seed, args.docs_per_topic)
        spath = out / f"streams_{lang}.txt"
        text.save_stream_documents(docs, spath)
        files.append(str(spath))
    for lang in langs + [args.pivot]:
        mono = world.parallel_corpus(lang, lang, args.sentences, f"mono:{args.seed}")
        path = out / f"mono_{lang}.tsv"
        text.save_parallel(mono, path)
        files.append(str(path))
        manifest_rows.append(("autoencoder", lang, lang, path.name))
    mpath = out / "tasks.tsv"
    with mpath.open("w", encoding="utf-8") as fh:
        for row in manifest_rows:
            fh.write("\t".join(row) + "\n")
    files.append(str(mpath))
    _emit({"command": "synth", "seed": args.seed, "files": sorted(files)})
    return 0


def cmd_train(args) -> int:
    preset = PRESETS[args.preset]
    rows = load_task_manifest(args.tasks)
    base = Path(args.tasks).parent
    tasks = []
    corpora_text = []
    for kind, src, tgt, corpus_path in rows:
        corpus = load_parallel(base / corpus_path, truncate_chars=args.truncate)
        kind = {"translational": multitask.TRANSLATIONAL,
                "autoencoder": multitask.AUTOENCODER}.get(kind, kind)
        tasks.append(TaskSpec(kind, src, tgt, corpus))
        for s, t in corpus.pairs:
            corpora_text.extend((s, t))
    vocab = build_vocab(corpora_text, cap=preset["vocab_cap"])
    make = desk_config if args.preset == "desk" else paper_config
    over = {}
    if args.hidden:
        over["hidden_dim"] = args.hidden
    if args.embed:
        over["embed_dim"] = args.embed
    if args.batch:
        over["batch_size"] = args.batch
    config = make(vocab.size, **over)
    registry = ParamRegistry(config, seed=args.seed)
    for task in tasks:
        registry.init_language(task.src)
        registry.init_language(task.tgt)
    _log(f"training {len(tasks)} tasks for {args.updates} updates "
         f"(turn {args.turn}, lr {args.lr})")
    report = alternating_train(registry, tasks, vocab, args.turn, args.updates,
                               lr=args.lr, seed=args.seed, momentum=args.momentum)
    save_registry(registry, vocab, args.out, extra_meta={"preset": args.preset})
    _emit({"command": "train", "bundle": str(args.out), "preset": args.preset,
           "schedule": report.schedule,
           "final_losses": {k: round(v, 6) for k, v in report.final_losses().items()},
           "vocab_size": vocab.size})
    return 0


def _pick_doc(args):
    docs = text.load_stream_documents(getattr(args, "in"))
    if not docs:
        raise ValueError(f"no documents in {getattr(args, 'in')}")
    if args.doc_index < 0 or args.doc_index >= len(docs):
        raise ValueError(f"doc index {args.doc_index} out of range ({len(docs)} documents)")
    return docs[args.doc_index]


def cmd_translate(args) -> int:
    params, config, vocab = _load_any_bundle(args.bundle, args.src_lang, args.tgt_lang)
    doc = _pick_doc(args)
    table = stream.translate_windows(doc, params, config, vocab,
                                     src_window=args.src_window,
                                     tgt_window=args.tgt_window)
    merged = stream.merge_columns(table, vote_threshold=args.vote,
                                  prefix_len=args.prefix)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    txt_path = prefix.with_suffix(prefix.suffix + ".txt") if prefix.suffix else Path(str(prefix) + ".txt")
    table_path = Path(str(prefix) + ".table.tsv")
    trace_path = Path(str(prefix) + ".trace.tsv")
    txt_path.write_text(stream.final_text(merged) + "\n", encoding="utf-8")
    stream.save_table_tsv(table, table_path)
    traces = [analysis.DocVector(f"{doc.doc_id}#w{row.start}", row.trace / max(np.linalg.norm(row.trace), 1e-12))
              for row in table.rows]
    analysis.save_vectors_tsv(traces, trace_path)
    _emit({"command": "translate", "doc_id": doc.doc_id,
           "source_words": table.n_columns,
           "merged_words": len(merged.entries),
           "windows": len(table.rows),
           "files": [str(txt_path), str(table_path), str(trace_path)]})
    return 0


def cmd_embed(args) -> int:
    params, config, vocab = _load_any_bundle(args.bundle, args.src_lang, args.tgt_lang)
    docs = text.load_stream_documents(getattr(args, "in"))
    if not docs:
        raise ValueError(f"no documents in {getattr(args, 'in')}")
    vectors = []
    for doc in docs:
        table = stream.translate_windows(doc, params, config, vocab,
                                         src_window=args.src_window,
                                         tgt_window=args.tgt_window)
        vectors.append(analysis.doc_vector(analysis.DocTrace(doc.doc_id, table.traces())))
    analysis.save_vectors_tsv(vectors, args.out)
    _emit({"command": "embed", "documents": len(vectors),
           "dim": int(vectors[0].vec.shape[0]), "out": str(args.out)})
    return 0


def cmd_cluster(args) -> int:
    vectors = analysis.load_vectors_tsv(args.vectors)
    result = analysis.kmeans(vectors, args.k, seed=args.seed)
    analysis.save_clusters_tsv([v.doc_id for v in vectors], result.assignments, args.out)
    sizes = [int((result.assignments == j).sum()) for j in range(args.k)]
    _emit({"command": "cluster", "k": args.k, "inertia": round(result.inertia, 6),
           "sizes": sizes, "out": str(args.out)})
    return 0


def cmd_segment(args) -> int:
    params, config, vocab = _load_any_bundle(args.bundle, args.src_lang, args.tgt_lang)
    docs = text.load_stream_documents(getattr(args, "in"))
    if not docs:
        raise ValueError(f"no documents in {getattr(args, 'in')}")
    rows = []
    per_doc = {}
    for doc in docs:
        signals, boundaries = analysis.segment_document(
            doc, params, config, vocab, window=args.window,
            alpha=args.alpha, beta=args.beta, gamma=args.gamma,
            z_threshold=args.z_threshold, min_gap=args.min_gap)
        by_pos = {s.position: s for s in signals}
        rows.extend((doc.doc_id, b, by_pos[b].combined) for b in boundaries)
        per_doc[doc.doc_id] = boundaries
    analysis.save_boundaries_tsv(rows, args.out)
    _emit({"command": "segment", "boundaries": per_doc, "out": str(args.out)})
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    cfg = {}
    try:
        if "--config" in argv:
            cfg_path = argv[argv.index("--config") + 1]
            cfg = _load_config_file(cfg_path)
        else:
            for item in argv:
                if item.startswith("--config="):
                    cfg = _load_config_file(item.split("=", 1)[1])
        parser = build_parser(cfg)
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_help(sys.stderr)
            return 1
        return args.func(args)
    except UsageError as exc:
        _log(f"usage error: {exc}")
        return 1
    except (ValueError, KeyError, IndexError, OSError, BundleError) as exc:
        _log(f"error: {exc}")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
