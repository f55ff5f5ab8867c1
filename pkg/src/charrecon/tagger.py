"""BiLSTM part-of-speech tagger with per-position softmax.

Input vector per token, by mode:

* ``full``      word lookup row ++ character encoding
* ``full+emb``  as ``full``, lookup rows initialised from a pretrained table
* ``char``      character encoding only
* ``chard``     as ``char``, encoder initialised from a reconstruction run

Tokens go through a sentence-level BiLSTM (hidden size = input size per
direction); the concatenated states are projected to ``dim`` and classified by
``softmax(W2 relu(W1 h + b1) + b2)``.
"""

import logging
import time
from collections import Counter
from dataclasses import dataclass, field, replace

import numpy as np

from .encoder import CharEncoder, build_char_vocab, encode_backward, encode_word_cached
from .errors import DimensionError, TrainingDivergedError
from .numerics import (
    AdamState,
    LstmParams,
    adam_step,
    clip_global_norm,
    dropout_mask,
    glorot_uniform,
    lstm_sequence,
    lstm_sequence_backward,
    make_rng,
)
from .reconstruct import DROPOUT_STREAM, SHUFFLE_STREAM, LossTrace, TrainConfig

log = logging.getLogger(__name__)

MODES = ("full", "full+emb", "char", "chard")
FULL_MODES = ("full", "full+emb")

TAGGER_INIT_STREAM = 10
UNK_STREAM = 11
WORD_UNK = "<unk>"


@dataclass
class TaggedCorpus:
    sentences: list                 # each a list of (token, tag)
    tags: tuple = None

    def __post_init__(self):
        self.sentences = [list(map(tuple, s)) for s in self.sentences]
        if any(len(s) == 0 for s in self.sentences):
            raise ValueError("empty sentence in corpus")
        seen = sorted({t for s in self.sentences for _, t in s})
        if self.tags is None:
            self.tags = tuple(seen)
        else:
            self.tags = tuple(self.tags)
            missing = set(seen) - set(self.tags)
            if missing:
                raise ValueError(f"tags outside the inventory: {sorted(missing)}")

    def __len__(self):
        return len(self.sentences)

    @property
    def tokens(self):
        return [w for s in self.sentences for w, _ in s]

    @property
    def n_tokens(self):
        return sum(len(s) for s in self.sentences)


@dataclass
class TaggerModel:
    mode: str
    tags: tuple
    encoder: CharEncoder
    sent_fwd: LstmParams
    sent_bwd: LstmParams
    proj: np.ndarray        # (dim, 2*dv)
    proj_b: np.ndarray
    W1: np.ndarray          # (dim, dim)
    b1: np.ndarray
    W2: np.ndarray          # (|T|, dim)
    b2: np.ndarray
    words: tuple = None     # word lookup vocabulary, full modes only; row len(words) is UNK
    word_emb: np.ndarray = None
    trace: LossTrace = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown tagger mode {self.mode!r}")
        if (self.mode in FULL_MODES) != (self.word_emb is not None):
            raise ValueError(f"mode {self.mode!r} and word lookup presence disagree")
        self.tags = tuple(self.tags)
        self._tag_index = {t: i for i, t in enumerate(self.tags)}
        if self.words is not None:
            self.words = tuple(self.words)
            self._word_index = {w: i for i, w in enumerate(self.words)}
            if self.word_emb.shape[0] != len(self.words) + 1:
                raise DimensionError("word lookup needs one row per word plus UNK")
        dv = self.input_dim
        d = self.encoder.dim
        if self.sent_fwd.input_size != dv or self.sent_fwd.hidden_size != dv:
            raise DimensionError(f"sentence LSTM must be {dv}->{dv}")
        if self.proj.shape != (d, 2 * dv) or self.W1.shape != (d, d) or self.W2.shape != (len(self.tags), d):
            raise DimensionError("classifier shapes inconsistent with dimensions")

    @property
    def word_dim(self):
        return 0 if self.word_emb is None else self.word_emb.shape[1]

    @property
    def input_dim(self):
        return self.word_dim + self.encoder.dim

    def word_id(self, w):
        return self._word_index.get(w, len(self.words))

    def tensors(self):
        out = {"enc." + k: v for k, v in self.encoder.tensors().items()}
        if self.word_emb is not None:
            out["word_emb"] = self.word_emb
        out.update(self.sent_fwd.tensors("sent_fwd."))
        out.update(self.sent_bwd.tensors("sent_bwd."))
        out.update(proj=self.proj, proj_b=self.proj_b, W1=self.W1, b1=self.b1, W2=self.W2, b2=self.b2)
        return out

    def zero_grads(self):
        return {k: np.zeros_like(v) for k, v in self.tensors().items()}

    def copy(self):
        t = {k: v.copy() for k, v in self.tensors().items()}
        return TaggerModel(
            self.mode, self.tags, self.encoder.copy(),
            LstmParams(t["sent_fwd.W"], t["sent_fwd.U"], t["sent_fwd.b"]),
            LstmParams(t["sent_bwd.W"], t["sent_bwd.U"], t["sent_bwd.b"]),
            t["proj"], t["proj_b"], t["W1"], t["b1"], t["W2"], t["b2"],
            self.words, t.get("word_emb"))


def _softmax(a):
    e = np.exp(a - a.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _forward(model, tokens, dropout, rng, word_ids=None):
    enc = model.encoder
    char_out, char_caches = [], []
    for w in tokens:
        out, cache = encode_word_cached(enc, w, dropout > 0.0, rng, dropout)
        char_out.append(out.output)
        char_caches.append(cache)
    V = np.vstack(char_out)
    if model.word_emb is not None:
        if word_ids is None:
            word_ids = [model.word_id(w) for w in tokens]
        V = np.hstack([model.word_emb[word_ids], V])
    if dropout > 0.0:
        mf = dropout_mask(V.shape, dropout, rng)
        mb = dropout_mask(V.shape, dropout, rng)
        Vf, Vb = V * mf, V * mb
    else:
        mf = mb = None
        Vf = Vb = V
    Hf, cf = lstm_sequence(model.sent_fwd, Vf)
    Hb, cb = lstm_sequence(model.sent_bwd, Vb[::-1])
    C = np.hstack([Hf, Hb[::-1]])
    Hh = C @ model.proj.T + model.proj_b
    A1 = Hh @ model.W1.T + model.b1
    R = np.maximum(A1, 0.0)
    probs = _softmax(R @ model.W2.T + model.b2)
    cache = (char_caches, word_ids, mf, mb, cf, cb, C, Hh, A1, R)
    return probs, cache


def tagger_forward(model, tokens, training=False, rng=None, dropout=0.0):
    """Per-position tag distributions, shape ``(len(tokens), len(model.tags))``."""
    if not tokens:
        raise ValueError("empty sentence")
    rate = dropout if training else 0.0
    return _forward(model, list(tokens), rate, rng)[0]


def sentence_nll_and_grads(model, tokens, tags, training=False, rng=None, dropout=0.0, word_ids=None):
    """Negative log likelihood of ``tags`` and its gradient for every tensor."""
    try:
        gold = np.array([model._tag_index[t] for t in tags])
    except KeyError as e:
        raise ValueError(f"tag {e.args[0]!r} not in the model's inventory") from None
    rate = dropout if training else 0.0
    probs, cache = _forward(model, list(tokens), rate, rng, word_ids)
    char_caches, word_ids, mf, mb, cf, cb, C, Hh, A1, R = cache
    n = len(tokens)
    nll = -float(np.log(probs[np.arange(n), gold]).sum())

    g = model.zero_grads()
    dlog = probs.copy()
    dlog[np.arange(n), gold] -= 1.0
    g["W2"] += dlog.T @ R
    g["b2"] += dlog.sum(axis=0)
    dA1 = (dlog @ model.W2) * (A1 > 0)
    g["W1"] += dA1.T @ Hh
    g["b1"] += dA1.sum(axis=0)
    dHh = dA1 @ model.W1
    g["proj"] += dHh.T @ C
    g["proj_b"] += dHh.sum(axis=0)
    dC = dHh @ model.proj
    dv = model.input_dim
    sub = lambda p: {k: g[p + k] for k in ("W", "U", "b")}  # noqa: E731
    dVf = lstm_sequence_backward(model.sent_fwd, cf, dC[:, :dv], sub("sent_fwd."))
    dVb = lstm_sequence_backward(model.sent_bwd, cb, dC[::-1, dv:], sub("sent_bwd."))[::-1]
    if mf is not None:
        dVf = dVf * mf
        dVb = dVb * mb
    dV = dVf + dVb
    wd = model.word_dim
    if wd:
        np.add.at(g["word_emb"], word_ids, dV[:, :wd])
    enc_g = {k: g["enc." + k] for k in model.encoder.tensors()}
    for i, cache_i in enumerate(char_caches):
        encode_backward(model.encoder, cache_i, dV[i, wd:], enc_g)
    return nll, g


def init_tagger(corpus, mode, seed=0, dim=32, word_dim=None, pretrained=None, reconstructed=None,
                use_highway=False):
    """Fresh model for ``corpus`` in ``mode``.

    ``full+emb`` copies pretrained rows into the word lookup where the word is
    known; ``chard`` starts from ``reconstructed`` re-indexed onto the union of
    its characters and the corpus characters.
    """
    if mode not in MODES:
        raise ValueError(f"unknown tagger mode {mode!r}; expected one of {'|'.join(MODES)}")
    if mode == "full+emb" and pretrained is None:
        raise ValueError("mode full+emb needs a pretrained embedding table")
    if mode == "chard" and reconstructed is None:
        raise ValueError("mode chard needs a reconstructed character encoder")
    corpus_chars = build_char_vocab(corpus.tokens)
    if mode == "chard":
        encoder = reconstructed.with_vocab(corpus_chars.union(reconstructed.vocab),
                                           make_rng(seed, TAGGER_INIT_STREAM, 1))
    else:
        encoder = CharEncoder.init(corpus_chars, dim, make_rng(seed, TAGGER_INIT_STREAM, 1), use_highway)
    d = encoder.dim

    words = word_emb = None
    if mode in FULL_MODES:
        if word_dim is None:
            word_dim = pretrained.dim if pretrained is not None else d
        if pretrained is not None and pretrained.dim != word_dim:
            raise DimensionError(f"pretrained dim {pretrained.dim} != word lookup dim {word_dim}")
        words = tuple(sorted(set(corpus.tokens)))
        lim = np.sqrt(3.0 / word_dim)
        word_emb = make_rng(seed, TAGGER_INIT_STREAM, 2).uniform(-lim, lim, size=(len(words) + 1, word_dim))
        if mode == "full+emb":
            for i, w in enumerate(words):
                if w in pretrained:
                    word_emb[i] = pretrained[w]
    dv = d + (word_emb.shape[1] if word_emb is not None else 0)
    rng = make_rng(seed, TAGGER_INIT_STREAM, 3)
    T = len(corpus.tags)
    return TaggerModel(
        mode, corpus.tags, encoder,
        LstmParams.init(rng, dv, dv), LstmParams.init(rng, dv, dv),
        glorot_uniform(rng, d, 2 * dv), np.zeros(d),
        glorot_uniform(rng, d, d), np.zeros(d),
        glorot_uniform(rng, T, d), np.zeros(T),
        words, word_emb)


def train_tagger(config, corpus, mode, pretrained=None, reconstructed=None, dim=32, word_dim=None,
                 freeze_encoder=False, init=None):
    """Maximise tag log likelihood with Adam, one update per ``config.batch_size`` sentences.

    In full modes, training tokens seen once are swapped for the UNK lookup row
    with probability 1/2, so the UNK row gets trained. ``freeze_encoder`` keeps
    the character encoder fixed.
    """
    model = init.copy() if init is not None else init_tagger(
        corpus, mode, config.seed, dim, word_dim, pretrained, reconstructed, config.use_highway)
    trace = LossTrace()
    model.trace = trace
    if config.epochs == 0:
        return model
    params = model.tensors()
    if freeze_encoder:
        params = {k: v for k, v in params.items() if not k.startswith("enc.")}
    singletons = set()
    if model.words is not None:
        singletons = {w for w, n in Counter(corpus.tokens).items() if n == 1}
    adam = AdamState()
    sents = corpus.sentences
    for epoch in range(config.epochs):
        start = time.perf_counter()
        order = make_rng(config.seed, SHUFFLE_STREAM, epoch).permutation(len(sents))
        drop_rng = make_rng(config.seed, DROPOUT_STREAM, epoch)
        unk_rng = make_rng(config.seed, UNK_STREAM, epoch)
        total = 0.0
        for lo in range(0, len(order), config.batch_size):
            grads = None
            for j in order[lo:lo + config.batch_size]:
                tokens = [w for w, _ in sents[j]]
                tags = [t for _, t in sents[j]]
                word_ids = None
                if model.words is not None:
                    unk = len(model.words)
                    word_ids = [unk if (w in singletons and unk_rng.random() < 0.5) else model.word_id(w)
                                for w in tokens]
                nll, g = sentence_nll_and_grads(model, tokens, tags, True, drop_rng, config.dropout, word_ids)
                if not np.isfinite(nll):
                    raise TrainingDivergedError(f"non-finite likelihood at epoch {epoch + 1}, sentence {j}")
                total += nll
                if grads is None:
                    grads = g
                else:
                    for k in grads:
                        grads[k] += g[k]
            grads = {k: grads[k] for k in params}
            clip_global_norm(grads, config.clip_norm)
            adam_step(adam, params, grads, config.lr)
        trace.losses.append(total / corpus.n_tokens)
        trace.seconds.append(time.perf_counter() - start)
        log.info("epoch %d  nll/token %.5f  (%.1fs)", epoch + 1, trace.losses[-1], trace.seconds[-1])
    model.encoder.refresh_unk_row()
    return model


def predict(model, tokens):
    probs = tagger_forward(model, tokens)
    # argmax takes the first maximum: lowest tag index wins ties
    return [model.tags[i] for i in probs.argmax(axis=1)]


def tag_accuracy(model, corpus):
    correct = total = 0
    for sent in corpus.sentences:
        pred = predict(model, [w for w, _ in sent])
        correct += sum(p == t for p, (_, t) in zip(pred, sent))
        total += len(sent)
    return correct / total if total else 0.0


def count_lookup_params(model):
    """Lookup rows: word types plus character types (reserved UNK rows not counted)."""
    n = len(model.encoder.vocab)
    if model.words is not None:
        n += len(model.words)
    return n


@dataclass
class GridResult:
    best_lr: float
    best_dropout: float
    best_accuracy: float
    best_model: TaggerModel
    results: list   # (lr, dropout, dev accuracy) in search order

    def to_tsv(self):
        lines = ["lr\tdropout\tdev_accuracy"]
        lines += [f"{lr!r}\t{p!r}\t{acc:.6f}" for lr, p, acc in self.results]
        return "\n".join(lines) + "\n"


def grid_search(config, train, dev, mode, lrs, dropouts, **kwargs):
    """Train one tagger per (lr, dropout) and keep the best on ``dev`` (first wins ties)."""
    results = []
    best = None
    for lr in lrs:
        for p in dropouts:
            model = train_tagger(replace(config, lr=lr, dropout=p), train, mode, **kwargs)
            acc = tag_accuracy(model, dev)
            results.append((lr, p, acc))
            log.info("grid lr=%g dropout=%g dev=%.4f", lr, p, acc)
            if best is None or acc > best[2]:
                best = (lr, p, acc, model)
    return GridResult(best[0], best[1], best[2], best[3], results)


def grid_values(lo, hi, n):
    """``n`` evenly spaced values from ``lo`` to ``hi`` inclusive, rounded to 12 digits."""
    if n == 1:
        return [lo]
    return [round(lo + (hi - lo) * i / (n - 1), 12) for i in range(n)]
