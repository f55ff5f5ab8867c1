"""Intrinsic evaluation: cosine similarity vs. human scores, 3CosMul analogies, neighbours.

Every function accepts either an :class:`EmbeddingTable` or a
:class:`CharEncoder`. An encoder can embed any string, so nothing is skipped
for coverage; a table skips pairs/questions whose words it lacks and reports
the count.
"""

from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingTable
from .encoder import CharEncoder, encode_vocab
from .errors import DegenerateInputError
from .metrics import NORM_EPS

COSMUL_EPS = 1e-3


@dataclass
class SimilarityDataset:
    name: str
    pairs: list  # (word1, word2, score)

    def __post_init__(self):
        if not self.pairs:
            raise ValueError(f"similarity dataset {self.name!r} has no pairs")
        for w1, w2, s in self.pairs:
            if not np.isfinite(s):
                raise ValueError(f"non-finite score for ({w1!r}, {w2!r})")

    @property
    def words(self):
        return [w for w1, w2, _ in self.pairs for w in (w1, w2)]


@dataclass
class AnalogyDataset:
    name: str
    questions: list  # (a, b, c, d): a is to b as c is to d
    label: str = "syntactic"

    def __post_init__(self):
        for q in self.questions:
            if len(q) != 4 or not all(q):
                raise ValueError(f"malformed analogy question {q!r}")

    @property
    def words(self):
        return [w for q in self.questions for w in q]


def cosine_similarity(u, v):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu <= NORM_EPS or nv <= NORM_EPS:
        raise DegenerateInputError("cosine similarity of a (near-)zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def average_ranks(values):
    """1-based ranks; tied values share the mean of the ranks they span."""
    a = np.asarray(values, dtype=float)
    order = np.argsort(a, kind="mergesort")
    sorted_a = a[order]
    ranks = np.empty(len(a))
    i = 0
    while i < len(a):
        j = i
        while j + 1 < len(a) and sorted_a[j + 1] == sorted_a[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(a, b):
    if len(a) != len(b):
        raise ValueError("spearman needs equal-length inputs")
    if len(a) < 2:
        raise ValueError("spearman needs at least two observations")
    ra = average_ranks(a)
    rb = average_ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = np.sqrt((ra @ ra) * (rb @ rb))
    if denom == 0.0:
        raise ValueError("spearman is undefined when all ranks tie")
    return float(ra @ rb / denom)


def _as_table(model, words):
    if isinstance(model, CharEncoder):
        return encode_vocab(model, words)
    return model


@dataclass
class SimilarityReport:
    rho: dict = field(default_factory=dict)       # dataset name -> Spearman
    scored: dict = field(default_factory=dict)    # dataset name -> pairs used
    skipped: dict = field(default_factory=dict)   # dataset name -> pairs skipped

    @property
    def mean(self):
        return float(np.mean(list(self.rho.values())))

    def to_tsv(self):
        lines = ["dataset\tspearman\tscored\tskipped"]
        for name, r in self.rho.items():
            lines.append(f"{name}\t{r:.6f}\t{self.scored[name]}\t{self.skipped[name]}")
        lines.append(f"average\t{self.mean:.6f}\t\t")
        return "\n".join(lines) + "\n"


def eval_similarity(model, datasets):
    """Spearman between model cosines and human scores, per dataset and macro-averaged.

    Pairs with a missing word or a zero vector are skipped; a dataset with fewer
    than two scorable pairs is an error.
    """
    if isinstance(datasets, SimilarityDataset):
        datasets = [datasets]
    table = _as_table(model, [w for ds in datasets for w in ds.words])
    report = SimilarityReport()
    for ds in datasets:
        model_scores, gold = [], []
        skipped = 0
        for w1, w2, score in ds.pairs:
            if w1 not in table or w2 not in table:
                skipped += 1
                continue
            try:
                model_scores.append(cosine_similarity(table[w1], table[w2]))
            except DegenerateInputError:
                skipped += 1
                continue
            gold.append(score)
        if len(gold) < 2:
            raise ValueError(f"dataset {ds.name!r}: fewer than two scorable pairs")
        report.rho[ds.name] = spearman(model_scores, gold)
        report.scored[ds.name] = len(gold)
        report.skipped[ds.name] = skipped
    return report


class _Normalised:
    """Unit-normalised view of a table; zero rows are unusable as candidates."""

    def __init__(self, table):
        self.table = table
        norms = np.linalg.norm(table.vectors, axis=1)
        self.valid = norms > NORM_EPS
        safe = np.where(self.valid, norms, 1.0)
        self.unit = table.vectors / safe[:, None]
        self.words = np.array(table.words, dtype=object)

    def unit_of(self, word):
        i = self.table.index(word)
        if not self.valid[i]:
            raise DegenerateInputError(f"zero vector for {word!r}")
        return self.unit[i]


def _pick(scores, words, allowed):
    """Highest score among ``allowed``; exact ties go to the smallest word."""
    idx = np.flatnonzero(allowed)
    if idx.size == 0:
        raise ValueError("no candidate words")
    best = scores[idx].max()
    tied = idx[scores[idx] == best]
    return min(words[i] for i in tied)


def _cosmul(norm, a, b, c, eps):
    for w in (a, b, c):
        if w not in norm.table:
            raise KeyError(f"analogy word {w!r} missing from table")
    U = norm.unit

    def shifted(w):
        return (U @ norm.unit_of(w) + 1.0) / 2.0

    scores = shifted(b) * shifted(c) / (shifted(a) + eps)
    allowed = norm.valid.copy()
    for w in (a, b, c):
        allowed[norm.table.index(w)] = False
    return _pick(scores, norm.words, allowed)


def answer_analogy(table, a, b, c, eps=COSMUL_EPS):
    """3CosMul answer to ``a : b :: c : ?`` over all table words except a, b, c.

    Cosines are shifted into [0, 1] before combining.
    """
    return _cosmul(_Normalised(table), a, b, c, eps)


@dataclass
class AnalogyReport:
    correct: int = 0
    answered: int = 0
    skipped: int = 0

    @property
    def accuracy(self):
        return self.correct / self.answered if self.answered else 0.0

    def to_tsv(self, name="analogy"):
        return ("dataset\taccuracy\tcorrect\tanswered\tskipped\n"
                f"{name}\t{self.accuracy:.6f}\t{self.correct}\t{self.answered}\t{self.skipped}\n")


def eval_analogy(model, dataset, extra_words=()):
    """Fraction of questions whose 3CosMul answer equals the gold fourth word.

    For an encoder the candidate set is every word in the dataset plus
    ``extra_words``. Questions with a word missing from a table are skipped;
    a question whose query vector is zero counts as answered wrongly.
    """
    table = _as_table(model, list(dataset.words) + list(extra_words))
    norm = _Normalised(table)
    report = AnalogyReport()
    for a, b, c, d in dataset.questions:
        if any(w not in table for w in (a, b, c, d)):
            report.skipped += 1
            continue
        report.answered += 1
        try:
            guess = _cosmul(norm, a, b, c, COSMUL_EPS)
        except (DegenerateInputError, ValueError):
            continue
        report.correct += guess == d
    return report


def nearest_neighbors(table, query, k):
    """Top-``k`` words by cosine to ``query`` (excluded), ties broken alphabetically."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if query not in table:
        raise KeyError(f"query word {query!r} missing from table")
    norm = _Normalised(table)
    sims = norm.unit @ norm.unit_of(query)
    qi = table.index(query)
    ranked = sorted((-sims[i], table.words[i]) for i in range(len(table)) if i != qi and norm.valid[i])
    return [w for _, w in ranked[:k]]
