"""Text data formats and the binary checkpoint container.

Text formats (UTF-8, one record per line, blank lines ignored unless noted):

embeddings   optional ``<count> <dim>`` header, then ``word v1 ... vd``
similarity   ``word1<TAB>word2<TAB>score``
analogy      ``a b c d``; lines starting with ``:`` name a section and are skipped
corpus       ``token<TAB>tag``; a blank line ends a sentence

Checkpoint layout (all integers little-endian)::

    magic  b"CHRCKPT\\0"
    u32    format version
    u32    header length, then that many bytes of JSON (sorted keys)
    f32[]  tensors in the order listed in the header, row-major
    u32    CRC-32 of everything above

Tensors are stored as float32, so a save/load/save cycle is byte-identical.
"""

import json
import os
import struct
import tempfile
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embeddings import EmbeddingTable
from .encoder import CharEncoder, CharVocab
from .errors import CorruptCheckpointError, ParseError
from .evaluation import AnalogyDataset, SimilarityDataset
from .numerics import LstmParams
from .tagger import TaggedCorpus, TaggerModel

MAGIC = b"CHRCKPT\0"
FORMAT_VERSION = 1


def atomic_write(path, data):
    """Write bytes or text to ``path`` via a temp file in the same directory + rename."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _lines(path):
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            yield lineno, line.rstrip("\n").rstrip("\r")


def _float(path, lineno, tok):
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(path, lineno, f"non-numeric value {tok!r}") from None
    if not np.isfinite(v):
        raise ParseError(path, lineno, f"non-finite value {tok!r}")
    return v


# ------------------------------------------------------------ embeddings

def parse_embedding_file(path):
    words, rows = [], []
    seen = {}
    dim = count = None
    for lineno, line in _lines(path):
        parts = line.split()
        if not parts:
            continue
        if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
            count, dim = int(parts[0]), int(parts[1])
            continue
        word, vals = parts[0], parts[1:]
        if not vals:
            raise ParseError(path, lineno, f"no values for word {word!r}")
        if dim is None:
            dim = len(vals)
        elif len(vals) != dim:
            raise ParseError(path, lineno, f"expected {dim} values, found {len(vals)}")
        if word in seen:
            raise ParseError(path, lineno, f"duplicate word {word!r} (first on line {seen[word]})")
        seen[word] = lineno
        words.append(word)
        rows.append([_float(path, lineno, v) for v in vals])
    if not words:
        raise ParseError(path, 1, "no embeddings found")
    if count is not None and count != len(words):
        raise ParseError(path, 1, f"header announces {count} words, file has {len(words)}")
    return EmbeddingTable(words, np.array(rows, dtype=float))


def format_embeddings(table, header=True):
    out = [f"{len(table)} {table.dim}"] if header else []
    for w, v in table.items():
        out.append(w + " " + " ".join(repr(float(x)) for x in v))
    return "\n".join(out) + "\n"


def write_embedding_file(path, table, header=True):
    atomic_write(path, format_embeddings(table, header))


# ------------------------------------------------------------ similarity

def parse_similarity_file(path, name=None):
    pairs = []
    for lineno, line in _lines(path):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3 or not parts[0] or not parts[1]:
            raise ParseError(path, lineno, "expected word1<TAB>word2<TAB>score")
        pairs.append((parts[0], parts[1], _float(path, lineno, parts[2])))
    if not pairs:
        raise ParseError(path, 1, "no word pairs found")
    return SimilarityDataset(name or Path(path).stem, pairs)


def write_similarity_file(path, dataset):
    atomic_write(path, "".join(f"{a}\t{b}\t{float(s)!r}\n" for a, b, s in dataset.pairs))


# --------------------------------------------------------------- analogy

def parse_analogy_file(path, name=None, label="syntactic"):
    questions = []
    for lineno, line in _lines(path):
        if not line.strip() or line.lstrip().startswith(":"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(path, lineno, f"expected 4 words, found {len(parts)}")
        questions.append(tuple(parts))
    return AnalogyDataset(name or Path(path).stem, questions, label)


def write_analogy_file(path, dataset, section=None):
    head = f": {section}\n" if section else ""
    atomic_write(path, head + "".join(" ".join(q) + "\n" for q in dataset.questions))


# ---------------------------------------------------------------- corpus

def parse_tagged_corpus(path, tags=None):
    sents, cur = [], []
    for lineno, line in _lines(path):
        if not line.strip():
            if cur:
                sents.append(cur)
                cur = []
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ParseError(path, lineno, "expected token<TAB>tag")
        cur.append((parts[0], parts[1]))
    if cur:
        sents.append(cur)
    if not sents:
        raise ParseError(path, 1, "no sentences found")
    return TaggedCorpus(sents, tags)


def format_corpus(corpus):
    return "".join("".join(f"{w}\t{t}\n" for w, t in s) + "\n" for s in corpus.sentences)


def write_tagged_corpus(path, corpus):
    atomic_write(path, format_corpus(corpus))


def parse_token_file(path):
    """Untagged input for tagging: one token per line (extra TAB fields ignored)."""
    sents, cur = [], []
    for _, line in _lines(path):
        if not line.strip():
            if cur:
                sents.append(cur)
                cur = []
            continue
        cur.append(line.split("\t")[0])
    if cur:
        sents.append(cur)
    return sents


# ------------------------------------------------------------ checkpoints

@dataclass
class Checkpoint:
    model: object                  # CharEncoder or TaggerModel
    meta: dict = field(default_factory=dict)
    version: int = FORMAT_VERSION

    @property
    def kind(self):
        return "tagger" if isinstance(self.model, TaggerModel) else "encoder"

    @property
    def encoder(self):
        return self.model.encoder if isinstance(self.model, TaggerModel) else self.model


def _header(model, meta):
    enc = model.encoder if isinstance(model, TaggerModel) else model
    tensors = model.tensors()
    head = {
        "kind": "tagger" if isinstance(model, TaggerModel) else "encoder",
        "dims": {"d": enc.dim, "d_c": enc.dim},
        "chars": list(enc.vocab.chars),
        "highway": enc.use_highway,
        "tensors": [[k, list(v.shape)] for k, v in tensors.items()],
        "meta": meta or {},
    }
    if isinstance(model, TaggerModel):
        head.update(mode=model.mode, tags=list(model.tags),
                    words=None if model.words is None else list(model.words))
    return head, tensors


def checkpoint_bytes(model, meta=None):
    head, tensors = _header(model, meta)
    hbytes = json.dumps(head, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode("ascii")
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(hbytes)), hbytes]
    for v in tensors.values():
        parts.append(np.ascontiguousarray(v, dtype="<f4").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def save_checkpoint(path, model, meta=None):
    if isinstance(model, Checkpoint):
        model, meta = model.model, model.meta if meta is None else meta
    atomic_write(path, checkpoint_bytes(model, meta))


def _encoder_from(chars, t, prefix, highway):
    g = lambda k: t[prefix + k]  # noqa: E731
    return CharEncoder(
        CharVocab(chars), g("emb"),
        LstmParams(g("fwd.W"), g("fwd.U"), g("fwd.b")),
        LstmParams(g("bwd.W"), g("bwd.U"), g("bwd.b")),
        g("Wf"), g("Wb"), g("bias"),
        g("hw_W") if highway else None, g("hw_b") if highway else None)


def _model_from(head, data, off, source):
    tensors = {}
    for name, shape in head["tensors"]:
        n = int(np.prod(shape, dtype=np.int64))
        if off + 4 * n > len(data) - 4:
            raise CorruptCheckpointError(f"{source}: tensor {name!r} runs past end of file")
        tensors[name] = np.frombuffer(data, dtype="<f4", count=n, offset=off).astype(np.float64).reshape(shape)
        off += 4 * n
    if off != len(data) - 4:
        raise CorruptCheckpointError(f"{source}: {len(data) - 4 - off} trailing bytes")
    if head["kind"] == "encoder":
        model = _encoder_from(head["chars"], tensors, "", head["highway"])
    else:
        enc = _encoder_from(head["chars"], tensors, "enc.", head["highway"])
        t = tensors
        model = TaggerModel(
            head["mode"], tuple(head["tags"]), enc,
            LstmParams(t["sent_fwd.W"], t["sent_fwd.U"], t["sent_fwd.b"]),
            LstmParams(t["sent_bwd.W"], t["sent_bwd.U"], t["sent_bwd.b"]),
            t["proj"], t["proj_b"], t["W1"], t["b1"], t["W2"], t["b2"],
            None if head["words"] is None else tuple(head["words"]), t.get("word_emb"))
    return model


def checkpoint_from_bytes(data, source="<bytes>"):
    if len(data) < len(MAGIC) + 12 or data[:len(MAGIC)] != MAGIC:
        raise CorruptCheckpointError(f"{source}: not a checkpoint (bad magic or too short)")
    version, hlen = struct.unpack_from("<II", data, len(MAGIC))
    if version != FORMAT_VERSION:
        raise CorruptCheckpointError(f"{source}: format version {version}, expected {FORMAT_VERSION}")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != crc:
        raise CorruptCheckpointError(f"{source}: checksum mismatch (truncated or corrupt)")
    off = len(MAGIC) + 8
    try:
        head = json.loads(data[off:off + hlen].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptCheckpointError(f"{source}: unreadable header: {e}") from None
    try:
        model = _model_from(head, data, off + hlen, source)
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, CorruptCheckpointError):
            raise
        raise CorruptCheckpointError(f"{source}: inconsistent header or tensors: {e}") from None
    return Checkpoint(model, head.get("meta", {}), version)


def load_checkpoint(path):
    return checkpoint_from_bytes(Path(path).read_bytes(), str(path))
