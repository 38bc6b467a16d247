"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numeric failure.

Settings come from an optional JSON config file (``--config``) with the
sections ``model``, ``train``, ``decode``, ``paths`` and a top-level ``seed``;
explicit flags override file values. Unknown keys are rejected. Every command
that writes files also writes the effective configuration next to them.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .beamsearch import DecodeConfig, correct_corpus
from .editops import (
    ClassifierConfig,
    EditClassifier,
    extract_edits,
    featurize,
    filter_and_apply,
    label_edits,
    read_labeled,
    read_vectors,
    train_classifier,
    write_labeled,
)
from .metrics import (
    bleu,
    format_length_bins,
    format_type_recall,
    length_breakdown,
    m2_evaluate,
    per_type_recall,
)
from .ngramlm import ArpaFormatError, build_lm, read_arpa, write_arpa
from .numcore import NumericError, derive_seed
from .seq2seq import ModelConfig, Seq2Seq
from .synth import ART_OR_DET, DETERMINERS, NOUN_NUMBER, ErrorDistribution, corrupt_corpus, estimate_error_stats, read_tagged, tag_heuristic, write_tagged
from .textdata import ParseError, read_m2, read_parallel, write_m2, write_parallel
from .trainer import CheckpointFormatError, TrainConfig, load_checkpoint, train

log = logging.getLogger("nlcorrect")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

CONFIG_SECTIONS = {"model": ModelConfig, "train": TrainConfig, "decode": DecodeConfig}
PATH_KEYS = {"train", "dev", "lm", "vectors", "checkpoint", "input", "output", "gold"}


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# Configuration


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise DataError(f"{path}: config must be a JSON object")
    unknown = set(data) - set(CONFIG_SECTIONS) - {"paths", "seed"}
    if unknown:
        raise DataError(f"{path}: unknown config keys {sorted(unknown)}")
    for section, cls in CONFIG_SECTIONS.items():
        allowed = {f.name for f in fields(cls)}
        bad = set(data.get(section, {})) - allowed
        if bad:
            raise DataError(f"{path}: unknown keys in [{section}]: {sorted(bad)}")
    bad = set(data.get("paths", {})) - PATH_KEYS
    if bad:
        raise DataError(f"{path}: unknown keys in [paths]: {sorted(bad)}")
    return data


def _section(cfg: dict, name: str, overrides: dict) -> dict:
    out = dict(cfg.get(name, {}))
    out.update({k: v for k, v in overrides.items() if v is not None})
    return out


def _seed(args, cfg: dict) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    return int(cfg.get("seed", 0))


def _path(args, cfg: dict, attr: str, key: str | None = None, required: bool = True) -> str | None:
    val = getattr(args, attr, None) or cfg.get("paths", {}).get(key or attr)
    if val is None and required:
        raise UsageError(f"missing required path --{attr.replace('_', '-')}")
    return val


def echo_config(effective: dict, target: Path) -> None:
    """Write the effective settings as ``config.json`` in a directory, or ``<file>.config.json``."""
    dest = target / "config.json" if target.is_dir() else target.with_name(target.name + ".config.json")
    dest.write_text(json.dumps(effective, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n").rstrip("\r") for line in f]


def _write_lines(lines: Sequence[str], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")


# ---------------------------------------------------------------------------
# train / correct


def cmd_train(args, cfg: dict) -> int:
    seed = _seed(args, cfg)
    model_kw = _section(cfg, "model", {
        "hidden": args.hidden, "enc_layers": args.enc_layers, "dec_layers": args.dec_layers,
        "dropout": args.dropout, "attention": args.attention,
    })
    train_kw = _section(cfg, "train", {
        "lr": args.lr, "batch_size": args.batch_size, "max_epochs": args.epochs, "dropout": args.dropout,
        "clip_norm": args.clip_norm,
    })
    out = Path(_path(args, cfg, "out", "checkpoint"))
    out.mkdir(parents=True, exist_ok=True)
    train_kw.update(seed=seed, checkpoint_dir=str(out))
    if "dropout" in train_kw:
        model_kw["dropout"] = train_kw["dropout"]
    mcfg = ModelConfig(**model_kw)
    tcfg = TrainConfig(**train_kw)
    train_pairs, _ = read_parallel(_path(args, cfg, "train"))
    dev_pairs, _ = read_parallel(_path(args, cfg, "dev"))
    if not train_pairs or not dev_pairs:
        raise DataError("training and dev files must contain at least one pair")
    echo_config({"seed": seed, "model": mcfg.to_dict(), "train": asdict(tcfg),
                 "paths": {"train": _path(args, cfg, "train"), "dev": _path(args, cfg, "dev"),
                           "checkpoint": str(out)}}, out)
    model = Seq2Seq(mcfg, seed=derive_seed(seed, "model", "init"))

    def report(st):
        print(f"epoch {st.epoch}\ttrain_loss {st.train_loss:.4f}\tdev_ppl {st.dev_perplexity:.4f}", flush=True)

    best = train(model, train_pairs, dev_pairs, tcfg, on_epoch=report)
    print(f"best epoch {best.epoch} dev perplexity {best.dev_perplexity:.4f} -> {out / 'best.ckpt'}")
    return EXIT_OK


def _decode_config(args, cfg: dict) -> DecodeConfig:
    beam = 1 if getattr(args, "greedy", False) else args.beam
    kw = _section(cfg, "decode", {
        "lam": args.lam, "beam": beam, "max_len": args.max_len, "nbest": None, "normalize": args.normalize,
    })
    if kw.get("lam") is None:
        kw["lam"] = 0.3 if (args.lm or cfg.get("paths", {}).get("lm")) else 0.0
    return DecodeConfig(**kw)


def cmd_correct(args, cfg: dict) -> int:
    dcfg = _decode_config(args, cfg)
    model, _ = load_checkpoint(_path(args, cfg, "model", "checkpoint"))
    lm_path = _path(args, cfg, "lm", required=False)
    lm = read_arpa(lm_path) if lm_path else None
    src = _read_lines(_path(args, cfg, "input"))
    results = correct_corpus(model, lm, src, dcfg, threads=args.threads)
    out = _path(args, cfg, "output")
    _write_lines([r.text for r in results], out)
    failed = sum(r.error is not None for r in results)
    if failed:
        log.warning("%d of %d sentences failed to decode and were copied unchanged", failed, len(src))
    echo_config({"decode": asdict(dcfg), "paths": {"checkpoint": _path(args, cfg, "model", "checkpoint"),
                 "lm": lm_path, "input": _path(args, cfg, "input"), "output": out}}, Path(out))
    return EXIT_OK


# ---------------------------------------------------------------------------
# lm


def cmd_lm_build(args, cfg: dict) -> int:
    sents = [line.split() for line in _read_lines(args.text) if line.strip()]
    if not sents:
        raise DataError(f"{args.text}: no sentences")
    model = build_lm(sents, order=args.order, D=args.discount, mode=args.mode)
    write_arpa(model, args.out)
    echo_config({"lm": {"order": args.order, "discount": args.discount, "mode": args.mode},
                 "paths": {"input": args.text, "output": args.out}}, Path(args.out))
    print(f"wrote {args.out}: n-gram counts {model.num_ngrams()}")
    return EXIT_OK


def cmd_lm_query(args, cfg: dict) -> int:
    lm = read_arpa(args.lm)
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        for lineno, line in enumerate(_read_lines(args.text), start=1):
            toks = line.split()
            hist = ["<s>"] * (lm.order - 1)
            total = 0.0
            for w in toks + ["</s>"]:
                lp = lm.logprob(w, hist[-(lm.order - 1):] if lm.order > 1 else [])
                total += lp
                out.write(f"{lineno}\t{w}\t{lp:.6f}\n")
                hist.append(w)
            out.write(f"{lineno}\t<total>\t{total:.6f}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# edits


def cmd_edits_extract(args, cfg: dict) -> int:
    src, hyp = _read_lines(args.source), _read_lines(args.hyp)
    if len(src) != len(hyp):
        raise DataError(f"{len(src)} source lines but {len(hyp)} hypothesis lines")
    rows = [(k, e, None) for k, (s, h) in enumerate(zip(src, hyp)) for e in extract_edits(s.split(), h.split())]
    write_labeled(rows, args.out)
    print(f"{len(rows)} edits from {len(src)} sentences")
    return EXIT_OK


def cmd_edits_label(args, cfg: dict) -> int:
    gold = read_m2(args.gold)
    rows = read_labeled(args.edits)
    out = []
    for sid, e, _ in rows:
        if not 0 <= sid < len(gold):
            raise DataError(f"sentence id {sid} outside the gold file ({len(gold)} sentences)")
        g = gold[sid]
        good = any(lbl for aid in g.annotators() for _, lbl in label_edits([e], g.gold(aid)))
        out.append((sid, e, good))
    write_labeled(out, args.out)
    print(f"{sum(l for _, _, l in out)} good / {len(out)} edits")
    return EXIT_OK


def _features(rows, sentences: list[list[str]], vectors) -> np.ndarray:
    return np.stack([featurize(e, sentences[sid], vectors) for sid, e, _ in rows])


def cmd_edits_train_clf(args, cfg: dict) -> int:
    rows = [r for r in read_labeled(args.labeled) if r[2] is not None]
    if not rows:
        raise DataError(f"{args.labeled}: no labeled edits")
    sents = [line.split() for line in _read_lines(args.source)]
    vectors = read_vectors(args.vectors) if args.vectors else {}
    X = _features(rows, sents, vectors)
    y = np.array([float(l) for _, _, l in rows])
    ccfg = ClassifierConfig(epochs=args.epochs, seed=_seed(args, cfg))
    try:
        clf = train_classifier(X, y, ccfg)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    with open(args.out, "wb") as f:
        clf.save(f)
    echo_config({"classifier": asdict(ccfg), "paths": {"input": args.labeled, "output": args.out,
                 "vectors": args.vectors}}, Path(args.out))
    acc = float(np.mean((clf.predict_proba(X) > 0.5) == (y > 0.5)))
    print(f"trained on {len(y)} edits, training accuracy {acc:.4f}")
    return EXIT_OK


def cmd_edits_filter(args, cfg: dict) -> int:
    src, hyp = _read_lines(args.source), _read_lines(args.hyp)
    if len(src) != len(hyp):
        raise DataError(f"{len(src)} source lines but {len(hyp)} hypothesis lines")
    clf = EditClassifier.load(args.clf)
    vectors = read_vectors(args.vectors) if args.vectors else {}
    out = []
    for s, h in zip(src, hyp):
        toks = s.split()
        out.append(" ".join(filter_and_apply(toks, extract_edits(toks, h.split()), clf, args.p_min, vectors)))
    _write_lines(out, args.output)
    echo_config({"p_min": args.p_min, "paths": {"input": args.hyp, "output": args.output}}, Path(args.output))
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth


def cmd_synth_stats(args, cfg: dict) -> int:
    dist = estimate_error_stats(read_m2(args.m2))
    Path(args.out).write_text(dist.to_json() + "\n", encoding="utf-8")
    print(dist.to_json())
    return EXIT_OK


def cmd_synth_corrupt(args, cfg: dict) -> int:
    seed = _seed(args, cfg)
    try:
        dist = ErrorDistribution.from_json(Path(args.dist).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, TypeError) as exc:
        raise DataError(f"{args.dist}: {exc}") from None
    if args.tagged:
        tagged = read_tagged(args.tagged)
    else:
        tagged = [tag_heuristic(line.split()) for line in _read_lines(args.text) if line.strip()]
    pairs = corrupt_corpus(tagged, dist, seed, passes=args.passes)
    if args.include_clean:
        pairs += [(" ".join(t.tokens),) * 2 for t in tagged]
    write_parallel(pairs, args.out)
    echo_config({"seed": seed, "passes": args.passes, "distribution": json.loads(dist.to_json()),
                 "paths": {"input": args.tagged or args.text, "output": args.out}}, Path(args.out))
    print(f"{len(pairs)} pairs from {len(tagged)} sentences")
    return EXIT_OK


# ---------------------------------------------------------------------------
# score


def _hyp_and_gold(args):
    gold = read_m2(args.gold)
    hyp = _read_lines(args.hyp)
    if len(hyp) != len(gold):
        raise DataError(f"{len(hyp)} hypothesis lines but {len(gold)} gold sentences")
    return hyp, gold


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_score_m2(args, cfg: dict) -> int:
    hyp, gold = _hyp_and_gold(args)
    rep = m2_evaluate([g.tokens for g in gold], hyp, gold, beta=args.beta, max_unchanged=args.max_unchanged)
    _emit(rep.to_tsv() if args.tsv else rep.to_text(), args.output)
    return EXIT_OK


def cmd_score_types(args, cfg: dict) -> int:
    hyp, gold = _hyp_and_gold(args)
    rep = m2_evaluate([g.tokens for g in gold], hyp, gold, beta=args.beta, max_unchanged=args.max_unchanged)
    _emit(format_type_recall(per_type_recall(rep, gold), args.top), args.output)
    return EXIT_OK


def cmd_score_length_bins(args, cfg: dict) -> int:
    hyp, gold = _hyp_and_gold(args)
    rep = m2_evaluate([g.tokens for g in gold], hyp, gold, beta=args.beta, max_unchanged=args.max_unchanged)
    counts = [(s.matched, s.proposed, s.n_gold) for s in rep.sentences]
    bins = length_breakdown(counts, [len(g.tokens) for g in gold], args.width, args.min_count, args.beta)
    _emit(format_length_bins(bins), args.output)
    return EXIT_OK


def cmd_score_bleu(args, cfg: dict) -> int:
    hyp = _read_lines(args.hyp)
    refs = [_read_lines(r) for r in args.ref]
    if any(len(r) != len(hyp) for r in refs):
        raise DataError("every reference file needs one line per hypothesis")
    score = bleu(hyp, [list(alts) for alts in zip(*refs)])
    _emit(f"BLEU = {score:.2f}\n", args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# tune


def cmd_tune(args, cfg: dict) -> int:
    """Grid-search the LM weight (and, given a classifier, p_min) for dev F."""
    model, _ = load_checkpoint(args.model)
    lm = read_arpa(args.lm) if args.lm else None
    gold = read_m2(args.gold)
    sources = [" ".join(g.tokens) for g in gold]
    lams = args.lambdas if lm is not None else [0.0]
    clf = EditClassifier.load(args.clf) if args.clf else None
    vectors = read_vectors(args.vectors) if args.vectors else {}
    p_mins = args.p_mins if clf is not None else [None]
    rows = []
    for lam in lams:
        dcfg = DecodeConfig(lam=lam, beam=args.beam)
        hyps = [r.text for r in correct_corpus(model, lm, sources, dcfg, threads=args.threads)]
        for p_min in p_mins:
            final = hyps
            if p_min is not None:
                final = []
                for s, h in zip(sources, hyps):
                    toks = s.split()
                    final.append(" ".join(filter_and_apply(toks, extract_edits(toks, h.split()), clf, p_min, vectors)))
            rep = m2_evaluate([g.tokens for g in gold], final, gold)
            rows.append((lam, p_min, rep))
    best = max(rows, key=lambda r: (r[2].f, -r[0]))
    lines = ["lambda\tp_min\tP\tR\tF0.5"]
    lines += [f"{l:g}\t{'-' if p is None else f'{p:g}'}\t{r.precision:.2f}\t{r.recall:.2f}\t{r.f:.2f}" for l, p, r in rows]
    lines.append(f"best\tlambda={best[0]:g}\tp_min={'-' if best[1] is None else f'{best[1]:g}'}\tF0.5={best[2].f:.2f}")
    _emit("\n".join(lines) + "\n", args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------
# fixture


def cmd_fixture(args, cfg: dict) -> int:
    """Write a small synthetic corpus for trying the pipeline end to end."""
    from .numcore import make_rng
    from .synth import corrupt_pass
    from .textdata import AnnotatedSentence
    from .toygrammar import corpus

    seed = _seed(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = make_rng(derive_seed(seed, "fixture"))
    clean = corpus(args.sentences, rng)
    write_tagged(clean, out / "train.tagged")
    _write_lines([" ".join(s.tokens) for s in clean], str(out / "train.clean.txt"))
    dist = ErrorDistribution(p_delete=0.3, p_to_singular=0.3, p_to_plural=0.3)
    (out / "errors.json").write_text(dist.to_json() + "\n", encoding="utf-8")

    def single_error(n: int) -> tuple[list[tuple[str, str]], list[AnnotatedSentence]]:
        pairs, annotated = [], []
        while len(pairs) < n:
            s = corpus(1, rng)[0]
            toks, k = corrupt_pass(s, dist, rng)
            if k != 1:
                continue
            edits = extract_edits(toks, s.tokens)
            typed = [replace(e, type=ART_OR_DET if set(e.source + e.target) & DETERMINERS else NOUN_NUMBER)
                     for e in edits]
            pairs.append((" ".join(toks), " ".join(s.tokens)))
            annotated.append(AnnotatedSentence(list(toks), {0: typed}))
        return pairs, annotated

    for name, n in (("dev", args.eval_sentences), ("test", args.eval_sentences)):
        pairs, annotated = single_error(n)
        write_parallel(pairs, out / f"{name}.tsv")
        _write_lines([s for s, _ in pairs], str(out / f"{name}.src"))
        write_m2(annotated, out / f"{name}.m2")
    echo_config({"seed": seed, "sentences": args.sentences, "eval_sentences": args.eval_sentences}, out)
    print(f"wrote fixture to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nlcorrect", description="Character-level neural grammatical error correction.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a correction model")
    t.add_argument("--train", help="training pairs (source<TAB>target)")
    t.add_argument("--dev", help="dev pairs for perplexity-based model selection")
    t.add_argument("--out", help="checkpoint directory")
    t.add_argument("--hidden", type=int)
    t.add_argument("--enc-layers", type=int)
    t.add_argument("--dec-layers", type=int)
    t.add_argument("--attention", choices=["softmax", "linear"])
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--dropout", type=float)
    t.add_argument("--clip-norm", type=float)
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("correct", help="decode a file of sentences")
    c.add_argument("--model", help="checkpoint file")
    c.add_argument("--input")
    c.add_argument("--output")
    c.add_argument("--lm", help="ARPA language model for shallow fusion")
    c.add_argument("--lambda", dest="lam", type=float, help="LM weight (default 0.3 with --lm)")
    c.add_argument("--beam", type=int, default=None)
    c.add_argument("--greedy", action="store_true", help="same as --beam 1")
    c.add_argument("--max-len", type=int)
    c.add_argument("--normalize", choices=["step", "end"])
    c.add_argument("--threads", type=int, default=1)
    c.add_argument("--seed", type=int)
    c.set_defaults(func=cmd_correct)

    lm = sub.add_parser("lm", help="n-gram language model").add_subparsers(dest="lm_cmd", required=True, parser_class=_Parser)
    b = lm.add_parser("build", help="estimate a Kneser-Ney LM and write ARPA")
    b.add_argument("--text", required=True, help="one whitespace-tokenized sentence per line")
    b.add_argument("--out", required=True)
    b.add_argument("--order", type=int, default=5)
    b.add_argument("--discount", type=float, default=0.75)
    b.add_argument("--mode", choices=["fixed", "modified"], default="fixed")
    b.set_defaults(func=cmd_lm_build)
    q = lm.add_parser("query", help="per-word log10 probabilities")
    q.add_argument("--lm", required=True)
    q.add_argument("--text", required=True)
    q.add_argument("--output")
    q.set_defaults(func=cmd_lm_query)

    ed = sub.add_parser("edits", help="edit extraction and classifier").add_subparsers(dest="edits_cmd", required=True, parser_class=_Parser)
    x = ed.add_parser("extract", help="proposed edits between sources and hypotheses")
    x.add_argument("--source", required=True)
    x.add_argument("--hyp", required=True)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_edits_extract)
    lb = ed.add_parser("label", help="mark extracted edits good/bad against M2 gold")
    lb.add_argument("--edits", required=True)
    lb.add_argument("--gold", required=True)
    lb.add_argument("--out", required=True)
    lb.set_defaults(func=cmd_edits_label)
    tc = ed.add_parser("train-clf", help="train the edit classifier")
    tc.add_argument("--labeled", required=True)
    tc.add_argument("--source", required=True, help="source sentences the edit ids refer to")
    tc.add_argument("--vectors", help="word vector text file (100 dims)")
    tc.add_argument("--out", required=True)
    tc.add_argument("--epochs", type=int, default=200)
    tc.add_argument("--seed", type=int)
    tc.set_defaults(func=cmd_edits_train_clf)
    fl = ed.add_parser("filter", help="apply only edits above --p-min")
    fl.add_argument("--source", required=True)
    fl.add_argument("--hyp", required=True)
    fl.add_argument("--clf", required=True)
    fl.add_argument("--vectors")
    fl.add_argument("--p-min", type=float, default=0.5)
    fl.add_argument("--output", required=True)
    fl.set_defaults(func=cmd_edits_filter)

    sy = sub.add_parser("synth", help="synthetic error generation").add_subparsers(dest="synth_cmd", required=True, parser_class=_Parser)
    st = sy.add_parser("stats", help="estimate error statistics from M2")
    st.add_argument("--m2", required=True)
    st.add_argument("--out", required=True)
    st.set_defaults(func=cmd_synth_stats)
    co = sy.add_parser("corrupt", help="corrupt clean sentences")
    src = co.add_mutually_exclusive_group(required=True)
    src.add_argument("--text", help="clean sentences, one per line (tagged heuristically)")
    src.add_argument("--tagged", help="pre-tagged sentences (token<TAB>flags)")
    co.add_argument("--dist", required=True, help="error distribution JSON")
    co.add_argument("--out", required=True)
    co.add_argument("--passes", type=int, default=2)
    co.add_argument("--include-clean", action="store_true", help="also emit clean->clean pairs")
    co.add_argument("--seed", type=int)
    co.set_defaults(func=cmd_synth_corrupt)

    sc = sub.add_parser("score", help="evaluation").add_subparsers(dest="score_cmd", required=True, parser_class=_Parser)
    for name, func in (("m2", cmd_score_m2), ("types", cmd_score_types), ("length-bins", cmd_score_length_bins)):
        s = sc.add_parser(name)
        s.add_argument("--hyp", required=True)
        s.add_argument("--gold", required=True, help="M2 file; its source sentences are the inputs")
        s.add_argument("--beta", type=float, default=0.5)
        s.add_argument("--max-unchanged", type=int, default=2)
        s.add_argument("--output")
        s.set_defaults(func=func)
        if name == "m2":
            s.add_argument("--tsv", action="store_true")
        if name == "types":
            s.add_argument("--top", type=int, default=5)
        if name == "length-bins":
            s.add_argument("--width", type=int, default=5)
            s.add_argument("--min-count", type=int, default=10)
    bl = sc.add_parser("bleu")
    bl.add_argument("--hyp", required=True)
    bl.add_argument("--ref", required=True, action="append", help="reference file (repeatable)")
    bl.add_argument("--output")
    bl.set_defaults(func=cmd_score_bleu)

    tu = sub.add_parser("tune", help="grid-search LM weight and p_min on a dev M2 file")
    tu.add_argument("--model", required=True)
    tu.add_argument("--gold", required=True)
    tu.add_argument("--lm")
    tu.add_argument("--clf")
    tu.add_argument("--vectors")
    tu.add_argument("--beam", type=int, default=8)
    tu.add_argument("--lambdas", type=float, nargs="+", default=[round(0.1 * k, 1) for k in range(11)])
    tu.add_argument("--p-mins", type=float, nargs="+", default=[round(0.1 * k, 1) for k in range(1, 10)])
    tu.add_argument("--threads", type=int, default=1)
    tu.add_argument("--output")
    tu.set_defaults(func=cmd_tune)

    fx = sub.add_parser("fixture", help="write the synthetic toy corpus")
    fx.add_argument("--out", required=True)
    fx.add_argument("--sentences", type=int, default=2000)
    fx.add_argument("--eval-sentences", type=int, default=200)
    fx.add_argument("--seed", type=int)
    fx.set_defaults(func=cmd_fixture)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if getattr(args, "beam", "unset") is None:
            args.beam = cfg.get("decode", {}).get("beam", 64)
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"nlcorrect: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"nlcorrect: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ParseError, ArpaFormatError, CheckpointFormatError, OSError, ValueError) as exc:
        print(f"nlcorrect: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
