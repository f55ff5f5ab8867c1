"""Desk-scale synthetic teachers, benchmarks and tagging corpora.

Words are stems (random consonant-vowel strings) with suffixes attached.
Underlying "meaning" vectors are a deterministic function of a word's first
two and last two characters, so they are fully recoverable from spelling.
The teacher table is that latent table (``coherent``), the latent table with a
fraction of rows replaced by outliers (``noisy``), or independent random
vectors (``incoherent``). Gold similarity scores always come from the latent
vectors, so a coherent teacher scores near 1 and an incoherent one near 0.
"""

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingTable
from .evaluation import AnalogyDataset, SimilarityDataset
from .numerics import make_rng
from .tagger import TaggedCorpus

MODES = ("coherent", "noisy", "incoherent")
SUFFIXES = ("", "r", "s", "ing", "ed", "ly")
CONSONANTS = "bcdfghjklmnpqstvwxz"
VOWELS = "aeiou"

_WORDS, _PREFIX, _SUFFIX, _NOISE, _RANDOM, _PAIRS, _GOLD, _ANALOGY = range(20, 28)


@dataclass
class SyntheticTeacher:
    mode: str
    table: EmbeddingTable
    similarity: SimilarityDataset
    analogy: AnalogyDataset
    outliers: np.ndarray     # bool per table row; all False unless noisy


def _stem(rng):
    n = int(rng.integers(3, 7))
    return "".join(rng.choice(list(CONSONANTS if i % 2 == 0 else VOWELS)) for i in range(n))


def _key_vector(seed, stream, key, dim):
    return make_rng(seed, stream, *map(ord, key)).normal(size=dim)


def latent_vector(seed, word, dim):
    """Deterministic function of ``word[:2]`` and ``word[-2:]``."""
    return _key_vector(seed, _PREFIX, word[:2], dim) + _key_vector(seed, _SUFFIX, word[-2:], dim)


def make_vocabulary(seed, size):
    """``size`` words grouped into stem families; every family has ``stem`` and ``stem+'r'``."""
    rng = make_rng(seed, _WORDS)
    words, stems, seen = [], [], set()
    while len(words) < size:
        s = _stem(rng)
        if s in seen or s + "r" in seen:
            continue
        n_extra = int(rng.integers(0, len(SUFFIXES) - 1))
        extra = list(rng.choice(SUFFIXES[2:], size=n_extra, replace=False))
        family = [s + suf for suf in ("", "r", *extra)]
        family = [w for w in family if w not in seen]
        if len(family) < 2 or len(words) + 2 > size:
            break
        family = family[:size - len(words)]
        seen.update(family)
        words.extend(family)
        stems.append(s)
    while len(words) < size:  # top up with bare stems if a family did not fit
        s = _stem(rng)
        if s not in seen:
            seen.add(s)
            words.append(s)
    return words, stems


def generate_synthetic_teacher(seed, vocab_size=200, dim=16, mode="coherent", noise_rate=0.1,
                               outlier_scale=4.0, n_pairs=None, n_questions=200, gold_noise=0.1):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {'|'.join(MODES)}")
    if dim < 2 or vocab_size < 10:
        raise ValueError("need dim >= 2 and vocab_size >= 10")
    words, stems = make_vocabulary(seed, vocab_size)
    latent = np.vstack([latent_vector(seed, w, dim) for w in words])
    outliers = np.zeros(len(words), dtype=bool)
    if mode == "coherent":
        vectors = latent.copy()
    elif mode == "noisy":
        rng = make_rng(seed, _NOISE)
        outliers = rng.random(len(words)) < noise_rate
        vectors = latent.copy()
        vectors[outliers] = outlier_scale * rng.normal(size=(int(outliers.sum()), dim))
    else:
        vectors = make_rng(seed, _RANDOM).normal(size=(len(words), dim))
    table = EmbeddingTable(words, vectors)

    rng = make_rng(seed, _PAIRS)
    stem_set = set(stems)
    n_pairs = n_pairs or vocab_size
    index = {w: i for i, w in enumerate(words)}
    pairs, seen = [], set()
    while len(pairs) < n_pairs:
        i, j = rng.choice(len(words), size=2, replace=False)
        if rng.random() < 0.5:  # same-family pair
            stem_of = _family_stem(words[i], stem_set)
            fam = [w for w in words if _family_stem(w, stem_set) == stem_of and w != words[i]]
            if fam:
                j = index[fam[int(rng.integers(len(fam)))]]
        key = tuple(sorted((words[i], words[j])))
        if key in seen:
            continue
        seen.add(key)
        pairs.append((words[i], words[j]))
    gold_rng = make_rng(seed, _GOLD)
    unit = latent / np.linalg.norm(latent, axis=1, keepdims=True)
    scored = []
    for w1, w2 in pairs:
        s = float(unit[index[w1]] @ unit[index[w2]]) + gold_noise * gold_rng.normal()
        scored.append((w1, w2, round(s, 6)))
    similarity = SimilarityDataset(f"synthetic-{mode}", scored)

    rng = make_rng(seed, _ANALOGY)
    family_stems = [s for s in stems if s in index and s + "r" in index]
    questions = []
    all_q = [(a, b) for a in family_stems for b in family_stems if a != b]
    if all_q:
        picks = rng.permutation(len(all_q))[:n_questions]
        questions = [(all_q[k][0], all_q[k][0] + "r", all_q[k][1], all_q[k][1] + "r") for k in picks]
    analogy = AnalogyDataset("synthetic-append-r", questions, "syntactic")
    return SyntheticTeacher(mode, table, similarity, analogy, outliers)


def _family_stem(word, stems):
    for suf in sorted(SUFFIXES, key=len, reverse=True):
        if suf and word.endswith(suf) and word[:-len(suf)] in stems:
            return word[:-len(suf)]
    return word


def final_char_corpus(seed, n_sentences, min_len=3, max_len=7, n_stems=60):
    """Toy tagging corpus: a token ending in 'a' is tagged A, in 'b' B, in 'c' C."""
    rng = make_rng(seed, _WORDS, 1)
    stems = sorted({_stem(rng) for _ in range(n_stems)})
    sents = []
    for _ in range(n_sentences):
        n = int(rng.integers(min_len, max_len + 1))
        sent = []
        for _ in range(n):
            s = stems[int(rng.integers(len(stems)))]
            end = "abc"[int(rng.integers(3))]
            sent.append((s + end, end.upper()))
        sents.append(sent)
    return TaggedCorpus(sents, tags=("A", "B", "C"))
