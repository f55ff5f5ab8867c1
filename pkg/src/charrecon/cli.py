"""Command-line entry point: ``charrecon <command> ...``.

All randomness derives from ``--seed``; repeated runs with the same flags and
inputs write identical files.
"""

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .encoder import CharEncoder, build_char_vocab, encode_vocab
from .evaluation import eval_analogy, eval_similarity, nearest_neighbors
from .metrics import DistanceMetric
from .numerics import make_rng
from .reconstruct import INIT_STREAM, TrainConfig, train_reconstruction
from .synthetic import MODES as GEN_MODES
from .synthetic import generate_synthetic_teacher
from .tagger import MODES, count_lookup_params, grid_search, grid_values, predict, tag_accuracy, train_tagger

log = logging.getLogger("charrecon")


def _emit(text, out):
    if out:
        io.atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _read_words(path):
    """Words from a word list or an embedding file (first field per line, header skipped)."""
    words = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        parts = line.split()
        if not parts or (lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts)):
            continue
        words.append(parts[0])
    return words


def _model_table(args, words):
    if args.ckpt:
        return encode_vocab(io.load_checkpoint(args.ckpt).encoder, words)
    return io.parse_embedding_file(args.embeddings)


def cmd_train_reconstruct(args):
    teacher = io.parse_embedding_file(args.embeddings)
    cfg = TrainConfig(metric=args.metric, epochs=args.epochs, lr=args.lr, dropout=args.dropout,
                      seed=args.seed, use_highway=args.highway, batch_size=args.batch_size)
    init = CharEncoder.init(build_char_vocab(teacher.words), teacher.dim,
                            make_rng(args.seed, INIT_STREAM), cfg.use_highway)
    enc, trace = train_reconstruction(cfg, teacher, init)
    meta = {"metric": str(cfg.metric), "epochs": cfg.epochs, "lr": cfg.lr, "dropout": cfg.dropout,
            "seed": cfg.seed, "highway": cfg.use_highway, "batch_size": cfg.batch_size}
    io.save_checkpoint(args.out, enc, meta)
    io.atomic_write(args.trace or args.out + ".trace.tsv", trace.to_tsv())
    if trace.losses:
        log.info("final mean loss %.6f", trace.losses[-1])


def cmd_eval_sim(args):
    datasets = [io.parse_similarity_file(p) for p in args.datasets.split(",") if p]
    words = [w for ds in datasets for w in ds.words]
    report = eval_similarity(_model_table(args, words), datasets)
    _emit(report.to_tsv(), args.out)


def cmd_eval_analogy(args):
    ds = io.parse_analogy_file(args.questions)
    extra = _read_words(args.vocab) if args.vocab else []
    if args.ckpt:
        model = io.load_checkpoint(args.ckpt).encoder
    else:
        model = io.parse_embedding_file(args.embeddings)
    report = eval_analogy(model, ds, extra_words=extra)
    _emit(report.to_tsv(ds.name), args.out)


def cmd_nn(args):
    if args.ckpt:
        if not args.vocab:
            raise SystemExit("nn --ckpt needs --vocab to define the candidate words")
        table = encode_vocab(io.load_checkpoint(args.ckpt).encoder, [args.word] + _read_words(args.vocab))
    else:
        table = io.parse_embedding_file(args.embeddings)
    _emit("".join(w + "\n" for w in nearest_neighbors(table, args.word, args.k)), args.out)


def _tagger_inputs(args):
    train = io.parse_tagged_corpus(args.train)
    dev = io.parse_tagged_corpus(args.dev) if args.dev else None
    kwargs = {"dim": args.dim, "freeze_encoder": args.freeze_encoder}
    if args.embeddings:
        kwargs["pretrained"] = io.parse_embedding_file(args.embeddings)
    if args.recon_ckpt:
        kwargs["reconstructed"] = io.load_checkpoint(args.recon_ckpt).encoder
    cfg = TrainConfig(epochs=args.epochs, lr=args.lr, dropout=args.dropout, seed=args.seed,
                      batch_size=args.batch_size)
    return train, dev, cfg, kwargs


def cmd_train_tagger(args):
    train, dev, cfg, kwargs = _tagger_inputs(args)
    model = train_tagger(cfg, train, args.mode, **kwargs)
    meta = {"epochs": cfg.epochs, "lr": cfg.lr, "dropout": cfg.dropout, "seed": cfg.seed}
    io.save_checkpoint(args.out, model, meta)
    if dev is not None:
        print(f"dev_accuracy\t{tag_accuracy(model, dev):.6f}")
    print(f"lookup_params\t{count_lookup_params(model)}")


def _parse_grid(text):
    grid = {}
    for part in text.split(","):
        key, _, rng = part.partition("=")
        lo, hi, n = rng.split(":")
        grid[key.strip()] = grid_values(float(lo), float(hi), int(n))
    return grid.get("lr", [0.001]), grid.get("dropout", [0.0])


def cmd_grid_search(args):
    train, dev, cfg, kwargs = _tagger_inputs(args)
    if dev is None:
        raise SystemExit("grid-search needs --dev")
    lrs, drops = _parse_grid(args.grid)
    result = grid_search(cfg, train, dev, args.mode, lrs, drops, **kwargs)
    _emit(result.to_tsv(), args.report)
    if args.out:
        io.save_checkpoint(args.out, result.best_model,
                           {"lr": result.best_lr, "dropout": result.best_dropout, "seed": cfg.seed})
    print(f"best\tlr={result.best_lr!r}\tdropout={result.best_dropout!r}\tdev={result.best_accuracy:.6f}")


def cmd_tag(args):
    model = io.load_checkpoint(args.model).model
    out = []
    for sent in io.parse_token_file(args.input):
        out.append("".join(f"{w}\t{t}\n" for w, t in zip(sent, predict(model, sent))) + "\n")
    _emit("".join(out), args.out)


def cmd_report_params(args):
    ckpt = io.load_checkpoint(args.model)
    if ckpt.kind != "tagger":
        raise SystemExit("report-params expects a tagger model")
    print(f"mode\t{ckpt.model.mode}\nlookup_params\t{count_lookup_params(ckpt.model)}")


def cmd_gen_teacher(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    st = generate_synthetic_teacher(args.seed, args.vocab, args.dim, args.mode, noise_rate=args.noise_rate)
    io.write_embedding_file(out / "teacher.txt", st.table)
    io.write_similarity_file(out / "similarity.tsv", st.similarity)
    io.write_analogy_file(out / "analogy.txt", st.analogy, section=st.analogy.name)
    io.atomic_write(out / "outliers.txt", "".join(w + "\n" for w, o in zip(st.table.words, st.outliers) if o))
    print(f"wrote {len(st.table)} words, {len(st.similarity.pairs)} pairs, "
          f"{len(st.analogy.questions)} questions, {int(st.outliers.sum())} outliers to {out}")


def _add_source(p, vocab_help=None):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--ckpt", help="encoder checkpoint (student embeddings)")
    src.add_argument("--embeddings", help="embedding text file (e.g. the teacher)")
    if vocab_help:
        p.add_argument("--vocab", help=vocab_help)


def _add_tagger_args(p):
    p.add_argument("--mode", required=True, type=str.lower, choices=MODES)
    p.add_argument("--train", required=True)
    p.add_argument("--dev")
    p.add_argument("--embeddings", help="pretrained table for full+emb")
    p.add_argument("--recon-ckpt", help="reconstruction checkpoint for chard")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim", type=int, default=32, help="character dimension (ignored for chard)")
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--freeze-encoder", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(prog="charrecon", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-reconstruct", help="fit a character encoder to teacher embeddings")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--metric", required=True, type=DistanceMetric.parse,
                   metavar="{" + "|".join(m.value for m in DistanceMetric) + "}")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=1)
    p.add_argument("--highway", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="loss trace TSV (default: <out>.trace.tsv)")
    p.set_defaults(func=cmd_train_reconstruct)

    p = sub.add_parser("eval-sim", help="Spearman correlation on word-similarity files")
    _add_source(p)
    p.add_argument("--datasets", required=True, help="comma-separated similarity files")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_sim)

    p = sub.add_parser("eval-analogy", help="3CosMul analogy accuracy")
    _add_source(p, "extra candidate words (word list or embedding file)")
    p.add_argument("--questions", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval_analogy)

    p = sub.add_parser("nn", help="nearest neighbours by cosine")
    _add_source(p, "candidate words (required with --ckpt)")
    p.add_argument("--word", required=True)
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--out")
    p.set_defaults(func=cmd_nn)

    p = sub.add_parser("train-tagger", help="train a BiLSTM POS tagger")
    _add_tagger_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_tagger)

    p = sub.add_parser("grid-search", help="learning-rate x dropout sweep on dev accuracy")
    _add_tagger_args(p)
    p.add_argument("--grid", default="lr=0.0001:0.0005:5,dropout=0.1:0.5:5")
    p.add_argument("--report", help="write the grid table here instead of stdout")
    p.add_argument("--out", help="save the best model")
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("tag", help="tag a token file with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("report-params", help="lookup-parameter count of a tagger")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_report_params)

    p = sub.add_parser("gen-teacher", help="write a synthetic teacher and gold benchmarks")
    p.add_argument("--mode", required=True, choices=GEN_MODES)
    p.add_argument("--vocab", type=int, default=200)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-rate", type=float, default=0.1)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen_teacher)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except (OSError, ValueError, KeyError, FloatingPointError) as e:
        # bad inputs (parse errors, corrupt checkpoints, unknown words) end with a message, not a traceback
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"charrecon: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
