"""Bidirectional character LSTM word encoder with optional highway output.

A word's characters are embedded, read left-to-right by one LSTM and
right-to-left by another; the two final states are projected, summed with a
bias and rectified::

    z = Wf f_last + Wb b_first + bias
    h = max(0, z)
    h~ = t*h + (1-t)*z,   t = sigmoid(W_hw h + b_hw)     (highway only)

The student vector is ``h~`` when the highway layer is on, ``h`` otherwise.
Character and output dimensions are the same number ``dim``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingTable
from .errors import DimensionError
from .numerics import (
    LstmParams,
    dropout_mask,
    glorot_uniform,
    highway_backward,
    lstm_sequence,
    lstm_sequence_backward,
    sigmoid,
)


class CharVocab:
    """Sorted character inventory; index ``len(chars)`` is reserved for unknowns."""

    def __init__(self, chars):
        chars = sorted(set(chars))
        self.chars = tuple(chars)
        self._index = {c: i for i, c in enumerate(chars)}

    @property
    def unk(self):
        return len(self.chars)

    @property
    def n_rows(self):
        return len(self.chars) + 1

    def __len__(self):
        return len(self.chars)

    def __contains__(self, c):
        return c in self._index

    def __eq__(self, other):
        return isinstance(other, CharVocab) and self.chars == other.chars

    def __repr__(self):
        return f"CharVocab({len(self)} chars)"

    def id(self, c):
        return self._index.get(c, self.unk)

    def ids(self, word):
        return [self._index.get(c, self.unk) for c in word]

    def union(self, other):
        return CharVocab(self.chars + tuple(other.chars))


def build_char_vocab(words):
    words = list(words)
    if not words:
        raise ValueError("cannot build a character vocabulary from no words")
    return CharVocab(c for w in words for c in w)


@dataclass
class WordEncoding:
    z: np.ndarray
    h: np.ndarray
    h_tilde: np.ndarray = None

    @property
    def output(self):
        return self.h if self.h_tilde is None else self.h_tilde


@dataclass
class CharEncoder:
    """Encoder parameters together with the character vocabulary they index."""

    vocab: CharVocab
    emb: np.ndarray        # (|C|+1, dim), last row is UNK
    fwd: LstmParams
    bwd: LstmParams
    Wf: np.ndarray         # (dim, dim)
    Wb: np.ndarray
    bias: np.ndarray
    hw_W: np.ndarray = None
    hw_b: np.ndarray = None

    def __post_init__(self):
        d = self.emb.shape[1]
        if self.emb.shape[0] != self.vocab.n_rows:
            raise DimensionError(f"embedding has {self.emb.shape[0]} rows, vocabulary needs {self.vocab.n_rows}")
        for name, lstm in (("fwd", self.fwd), ("bwd", self.bwd)):
            if lstm.input_size != d or lstm.hidden_size != d:
                raise DimensionError(f"{name} LSTM must be {d}->{d}, got {lstm.input_size}->{lstm.hidden_size}")
        for name in ("Wf", "Wb"):
            if getattr(self, name).shape != (d, d):
                raise DimensionError(f"{name} must be ({d}, {d})")
        if self.bias.shape != (d,):
            raise DimensionError(f"bias must be ({d},)")
        if (self.hw_W is None) != (self.hw_b is None):
            raise ValueError("highway weight and bias must both be present or both absent")
        if self.hw_W is not None and (self.hw_W.shape != (d, d) or self.hw_b.shape != (d,)):
            raise DimensionError("highway parameters must be (dim, dim) and (dim,)")

    @property
    def dim(self):
        return self.emb.shape[1]

    @property
    def use_highway(self):
        return self.hw_W is not None

    @classmethod
    def init(cls, vocab, dim, rng, use_highway=False):
        """Glorot-uniform matrices, zero biases (forget gate 1), char rows in +-sqrt(3/dim)."""
        lim = np.sqrt(3.0 / dim)
        emb = rng.uniform(-lim, lim, size=(vocab.n_rows, dim))
        fwd = LstmParams.init(rng, dim, dim)
        bwd = LstmParams.init(rng, dim, dim)
        Wf = glorot_uniform(rng, dim, dim)
        Wb = glorot_uniform(rng, dim, dim)
        hw_W = hw_b = None
        if use_highway:
            hw_W = glorot_uniform(rng, dim, dim)
            hw_b = np.zeros(dim)
        enc = cls(vocab, emb, fwd, bwd, Wf, Wb, np.zeros(dim), hw_W, hw_b)
        enc.refresh_unk_row()
        return enc

    @classmethod
    def zeros(cls, vocab, dim, use_highway=False):
        hw = (np.zeros((dim, dim)), np.zeros(dim)) if use_highway else (None, None)
        return cls(vocab, np.zeros((vocab.n_rows, dim)), LstmParams.zeros(dim, dim),
                   LstmParams.zeros(dim, dim), np.zeros((dim, dim)), np.zeros((dim, dim)),
                   np.zeros(dim), *hw)

    def tensors(self):
        """Name -> array, sharing memory with the encoder (in-place updates stick)."""
        out = {"emb": self.emb}
        out.update(self.fwd.tensors("fwd."))
        out.update(self.bwd.tensors("bwd."))
        out.update({"Wf": self.Wf, "Wb": self.Wb, "bias": self.bias})
        if self.use_highway:
            out.update({"hw_W": self.hw_W, "hw_b": self.hw_b})
        return out

    def zero_grads(self):
        return {k: np.zeros_like(v) for k, v in self.tensors().items()}

    def copy(self):
        t = {k: v.copy() for k, v in self.tensors().items()}
        return CharEncoder(
            self.vocab, t["emb"],
            LstmParams(t["fwd.W"], t["fwd.U"], t["fwd.b"]),
            LstmParams(t["bwd.W"], t["bwd.U"], t["bwd.b"]),
            t["Wf"], t["Wb"], t["bias"], t.get("hw_W"), t.get("hw_b"))

    def refresh_unk_row(self):
        """Set the UNK row to the mean of the known character rows."""
        if len(self.vocab):
            self.emb[self.vocab.unk] = self.emb[:self.vocab.unk].mean(axis=0)

    def with_vocab(self, vocab, rng):
        """Copy re-indexed onto ``vocab``; characters new to this encoder get fresh rows."""
        out = self.copy()
        lim = np.sqrt(3.0 / self.dim)
        emb = np.empty((vocab.n_rows, self.dim))
        for i, c in enumerate(vocab.chars):
            if c in self.vocab:
                emb[i] = self.emb[self.vocab.id(c)]
            else:
                emb[i] = rng.uniform(-lim, lim, size=self.dim)
        out.vocab = vocab
        out.emb = emb
        out.refresh_unk_row()
        return out


def _forward(enc, ids, dropout, rng):
    E = enc.emb[ids]
    if dropout > 0.0:
        mf = dropout_mask(E.shape, dropout, rng)
        mb = dropout_mask(E.shape, dropout, rng)
    else:
        mf = mb = None
    xf = E if mf is None else E * mf
    xb = (E if mb is None else E * mb)[::-1]
    hf, cf = lstm_sequence(enc.fwd, xf)
    hb, cb = lstm_sequence(enc.bwd, xb)
    f_last, b_first = hf[-1], hb[-1]
    z = enc.Wf @ f_last + enc.Wb @ b_first + enc.bias
    h = np.maximum(z, 0.0)
    ht = None
    if enc.use_highway:
        t = sigmoid(enc.hw_W @ h + enc.hw_b)
        ht = t * h + (1.0 - t) * z
    cache = (ids, mf, mb, cf, cb, f_last, b_first, z, h)
    return WordEncoding(z, h, ht), cache


def encode_word_cached(enc, word, training=False, rng=None, dropout=0.0):
    """Like :func:`encode_word` but also returns the cache for :func:`encode_backward`."""
    if not word:
        raise ValueError("cannot encode an empty word")
    rate = dropout if training else 0.0
    if rate > 0.0 and rng is None:
        raise ValueError("training with dropout needs an rng")
    return _forward(enc, enc.vocab.ids(word), rate, rng)


def encode_word(enc, word, training=False, rng=None, dropout=0.0):
    """Encode one word. Unknown characters use the UNK row.

    Dropout on the LSTM inputs is only active with ``training=True``; inference
    is deterministic and ignores ``rng``.
    """
    return encode_word_cached(enc, word, training, rng, dropout)[0]


def encode_backward(enc, cache, d_out, grads):
    """Accumulate into ``grads`` the gradient of a loss with ``d loss / d output = d_out``."""
    ids, mf, mb, cf, cb, f_last, b_first, z, h = cache
    if enc.use_highway:
        dW, db, dh, dz = highway_backward(enc.hw_W, enc.hw_b, h, z, d_out)
        grads["hw_W"] += dW
        grads["hw_b"] += db
        dz = dz + dh * (z > 0)
    else:
        dz = d_out * (z > 0)
    grads["Wf"] += np.outer(dz, f_last)
    grads["Wb"] += np.outer(dz, b_first)
    grads["bias"] += dz
    n = len(ids)
    d = enc.dim
    dhf = np.zeros((n, d))
    dhf[-1] = enc.Wf.T @ dz
    dhb = np.zeros((n, d))
    dhb[-1] = enc.Wb.T @ dz
    dxf = lstm_sequence_backward(enc.fwd, cf, dhf, _sub(grads, "fwd."))
    dxb = lstm_sequence_backward(enc.bwd, cb, dhb, _sub(grads, "bwd."))[::-1]
    if mf is not None:
        dxf = dxf * mf
        dxb = dxb * mb
    np.add.at(grads["emb"], ids, dxf + dxb)


def _sub(grads, prefix):
    return {"W": grads[prefix + "W"], "U": grads[prefix + "U"], "b": grads[prefix + "b"]}


def encode_vocab(enc, words, workers=1):
    """Inference-mode student vectors for ``words`` (duplicates collapse)."""
    unique = list(dict.fromkeys(words))
    if not unique:
        raise ValueError("no words to encode")
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            vecs = list(pool.map(lambda w: encode_word(enc, w).output, unique))
    else:
        vecs = [encode_word(enc, w).output for w in unique]
    return EmbeddingTable(unique, np.vstack(vecs))
