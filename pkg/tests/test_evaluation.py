import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from charrecon.embeddings import EmbeddingTable
from charrecon.encoder import CharEncoder, build_char_vocab, encode_vocab
from charrecon.errors import DegenerateInputError
from charrecon.evaluation import (
    AnalogyDataset,
    SimilarityDataset,
    answer_analogy,
    average_ranks,
    cosine_similarity,
    eval_analogy,
    eval_similarity,
    nearest_neighbors,
    spearman,
)
from charrecon.numerics import make_rng

from oracles import cosmul_brute, neighbors_brute, spearman_brute, spearman_formula


def test_cosine_examples():
    u = np.array([1.0, -2.0, 0.5])
    assert cosine_similarity(u, u) == pytest.approx(1.0)
    assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert cosine_similarity(u, 3 * u) == pytest.approx(1.0)
    with pytest.raises(DegenerateInputError):
        cosine_similarity(np.zeros(2), np.ones(2))


def test_spearman_examples():
    assert spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)
    assert spearman_formula([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)


def test_spearman_errors():
    with pytest.raises(ValueError):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        spearman([1], [1])
    with pytest.raises(ValueError):
        spearman([1, 2], [1, 2, 3])


def test_average_ranks_ties():
    np.testing.assert_array_equal(average_ranks([10, 20, 10, 30]), [1.5, 3.0, 1.5, 4.0])


@pytest.mark.parametrize("seed", range(20))
def test_spearman_matches_scipy(seed):
    rng = make_rng(seed, 30)
    a = rng.integers(0, 6, size=15)
    b = rng.normal(size=15)
    assert spearman(a, b) == pytest.approx(stats.spearmanr(a, b)[0], abs=1e-12)


@pytest.mark.parametrize("seed", range(100))
def test_spearman_fuzz_against_oracles(seed):
    rng = make_rng(seed, 31)
    n = int(rng.integers(3, 25))
    a, b = rng.permutation(n * 3)[:n], rng.normal(size=n)
    assert spearman(a, b) == pytest.approx(spearman_formula(list(a), list(b)), abs=1e-9)
    ta, tb = rng.integers(0, 4, size=n), rng.integers(0, 4, size=n)
    if len(set(ta)) > 1 and len(set(tb)) > 1:
        assert spearman(ta, tb) == pytest.approx(spearman_brute(list(ta), list(tb)), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=3, max_size=20, unique=True), st.randoms(use_true_random=False))
def test_spearman_monotone_invariance(a, rnd):
    b = a[:]
    rnd.shuffle(b)
    r = spearman(a, b)
    assert spearman([x ** 3 + 7 for x in a], b) == pytest.approx(r)
    assert spearman(a, [np.exp(x / 10) for x in b]) == pytest.approx(r)


def _table(words, vectors):
    return EmbeddingTable(words, np.asarray(vectors, dtype=float))


def test_eval_similarity_perfect_and_average():
    rng = make_rng(1)
    t = _table(list("abcdef"), rng.normal(size=(6, 4)))
    pairs = [("a", "b"), ("c", "d"), ("a", "e"), ("b", "f"), ("d", "e")]
    perfect = SimilarityDataset("p", [(x, y, cosine_similarity(t[x], t[y])) for x, y in pairs])
    assert eval_similarity(t, [perfect]).rho["p"] == pytest.approx(1.0)
    # two datasets with rho 1 and rho 0 average to 0.5
    t2 = _table(["a", "b", "c", "d", "e"], [[1, 0], [1, 0.5], [1, 1], [0.5, 1], [0, 1]])
    # cosines to "a": decreasing along b, c, d, e
    one = SimilarityDataset("one", [("a", "b", 4), ("a", "c", 3), ("a", "d", 2), ("a", "e", 1)])
    zero = SimilarityDataset("zero", [("a", "b", 2), ("a", "c", 1), ("a", "d", 1), ("a", "e", 2)])
    rep = eval_similarity(t2, [one, zero])
    assert rep.rho["one"] == pytest.approx(1.0)
    assert rep.rho["zero"] == pytest.approx(0.0, abs=1e-12)
    assert rep.mean == pytest.approx(0.5)


def test_eval_similarity_skips_missing_words_in_tables():
    t = _table(["a", "b", "c"], [[1, 0], [1, 1], [0, 1]])
    ds = SimilarityDataset("s", [("a", "b", 2), ("a", "c", 1), ("a", "zzz", 5)])
    rep = eval_similarity(t, [ds])
    assert rep.skipped["s"] == 1 and rep.scored["s"] == 2
    with pytest.raises(ValueError):
        eval_similarity(t, [SimilarityDataset("s", [("a", "q", 1), ("a", "b", 2)])])


def test_eval_similarity_encoder_never_skips():
    enc = CharEncoder.init(build_char_vocab(["abc"]), 6, make_rng(2), use_highway=True)
    ds = SimilarityDataset("s", [("ab", "xyz", 1.0), ("ba", "abc", 2.0), ("cab", "b", 0.5)])
    rep = eval_similarity(enc, [ds])
    assert rep.skipped["s"] == 0 and rep.scored["s"] == 3


def test_eval_similarity_scale_invariant():
    rng = make_rng(3)
    words = [f"w{i}" for i in range(12)]
    t = _table(words, rng.normal(size=(12, 5)))
    ds = SimilarityDataset("s", [(words[i], words[j], float(rng.normal())) for i, j in rng.integers(0, 12, (20, 2)) if i != j])
    scaled = _table(words, 7.5 * t.vectors)
    assert eval_similarity(t, [ds]).mean == eval_similarity(scaled, [ds]).mean


# ------------------------------------------------------------ analogy

def test_analogy_exact_offset():
    rng = make_rng(4)
    d = 40
    base = {w: rng.normal(size=d) for w in ["a", "b", "c"] + [f"n{i}" for i in range(15)]}
    base["d"] = base["b"] + base["c"] - base["a"]
    t = EmbeddingTable.from_dict(base)
    assert answer_analogy(t, "a", "b", "c") == "d"
    assert cosmul_brute(t, "a", "b", "c") == "d"


def test_analogy_forced_candidate():
    t = _table(["a", "b", "c", "d"], make_rng(5).normal(size=(4, 3)))
    assert answer_analogy(t, "a", "b", "c") == "d"


def test_analogy_excludes_query_words():
    # "b" sits right on top of the ideal answer but must not be returned
    t = _table(["a", "b", "c", "x", "y"], [[1, 0, 0], [0, 1, 0], [0, 1, 0.01], [0, 0, 1], [1, 1, 1]])
    assert answer_analogy(t, "a", "b", "c") != "b"


def test_analogy_ties_go_to_smallest_word():
    t = _table(["a", "b", "c", "zz", "yy"], [[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 1, 1], [0, 1, 1]])
    assert answer_analogy(t, "a", "b", "c") == "yy"


def test_analogy_missing_word():
    t = _table(["a", "b", "c", "d"], np.eye(4))
    with pytest.raises(KeyError):
        answer_analogy(t, "a", "b", "nope")


@pytest.mark.parametrize("seed", range(10))
def test_analogy_matches_brute_force(seed):
    rng = make_rng(seed, 40)
    words = [f"w{i:02d}" for i in range(30)]
    t = _table(words, rng.normal(size=(30, 6)))
    for _ in range(10):
        a, b, c = rng.choice(words, size=3, replace=False)
        assert answer_analogy(t, a, b, c) == cosmul_brute(t, a, b, c)


def test_eval_analogy_right_and_wrong():
    rng = make_rng(6)
    base = {w: rng.normal(size=30) for w in ["a", "b", "c", "e", "f", "g"]}
    base["d"] = base["b"] + base["c"] - base["a"]
    t = EmbeddingTable.from_dict(base)
    assert eval_analogy(t, AnalogyDataset("x", [("a", "b", "c", "d")])).accuracy == 1.0
    assert eval_analogy(t, AnalogyDataset("x", [("a", "b", "c", "e")])).accuracy == 0.0
    rep = eval_analogy(t, AnalogyDataset("x", [("a", "b", "c", "d"), ("a", "b", "c", "missing")]))
    assert rep.skipped == 1 and rep.answered == 1


def test_analogy_scale_invariant():
    rng = make_rng(7)
    words = [f"w{i}" for i in range(20)]
    t = _table(words, rng.normal(size=(20, 5)))
    s = _table(words, 3.0 * t.vectors)
    for a, b, c in rng.choice(words, size=(10, 3)):
        if len({a, b, c}) == 3:
            assert answer_analogy(t, a, b, c) == answer_analogy(s, a, b, c)


# --------------------------------------------------------- neighbours

def test_neighbors_two_words():
    t = _table(["a", "b"], [[1, 0], [0, 1]])
    assert nearest_neighbors(t, "a", 1) == ["b"]


def test_neighbors_duplicate_vector_first():
    t = _table(["a", "b", "c", "dup"], [[1, 2], [2, 1], [-1, 0], [1, 2]])
    assert nearest_neighbors(t, "a", 2)[0] == "dup"


@pytest.mark.parametrize("seed", range(5))
def test_neighbors_match_exhaustive_sort(seed):
    rng = make_rng(seed, 50)
    words = [f"w{i:02d}" for i in range(20)]
    t = _table(words, rng.normal(size=(20, 4)))
    for q in words[:5]:
        assert nearest_neighbors(t, q, 5) == neighbors_brute(t, q, 5)
        full = nearest_neighbors(t, q, len(words) - 1)
        assert sorted(full) == sorted(w for w in words if w != q)


def test_neighbors_errors():
    t = _table(["a", "b"], [[1, 0], [0, 1]])
    with pytest.raises(KeyError):
        nearest_neighbors(t, "c", 1)
    with pytest.raises(ValueError):
        nearest_neighbors(t, "a", 0)


def test_student_table_from_encoder():
    enc = CharEncoder.init(build_char_vocab(["spring", "field"]), 8, make_rng(8), use_highway=True)
    t = encode_vocab(enc, ["springfield", "smithfield", "spring", "field", "sing"])
    assert len(nearest_neighbors(t, "springfield", 3)) == 3
