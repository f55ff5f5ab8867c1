import math

import numpy as np
import pytest

from charrecon.evaluation import eval_similarity
from charrecon.synthetic import final_char_corpus, generate_synthetic_teacher, latent_vector, make_vocabulary


def test_vocabulary_size_and_families():
    words, stems = make_vocabulary(0, 200)
    assert len(words) == 200 and len(set(words)) == 200
    full = [s for s in stems if s in words and s + "r" in words]
    assert len(full) >= len(stems) - 1


def test_shared_prefix_and_suffix_give_identical_latents():
    np.testing.assert_array_equal(latent_vector(0, "bakor", 8), latent_vector(0, "baxxxor", 8))
    assert not np.array_equal(latent_vector(0, "bakor", 8), latent_vector(0, "bakos", 8))


def test_coherent_teacher_is_a_function_of_spelling():
    t = generate_synthetic_teacher(0, 100, 8)
    for w in t.table.words[:20]:
        np.testing.assert_array_equal(t.table[w], latent_vector(0, w, 8))
    assert not t.outliers.any()


def test_same_seed_same_teacher():
    for mode in ("coherent", "noisy", "incoherent"):
        a = generate_synthetic_teacher(5, 60, 6, mode)
        b = generate_synthetic_teacher(5, 60, 6, mode)
        assert a.table == b.table
        assert a.similarity.pairs == b.similarity.pairs
        assert a.analogy.questions == b.analogy.questions
    assert generate_synthetic_teacher(5, 60, 6).table != generate_synthetic_teacher(6, 60, 6).table


def test_noisy_outlier_count_and_mask():
    n, rate = 100, 0.1
    t = generate_synthetic_teacher(2, n, 8, "noisy", noise_rate=rate)
    k = int(t.outliers.sum())
    sd = math.sqrt(n * rate * (1 - rate))
    assert abs(k - n * rate) <= 4 * sd
    changed = np.array([not np.array_equal(t.table[w], latent_vector(2, w, 8)) for w in t.table.words])
    np.testing.assert_array_equal(changed, t.outliers)


def test_coherent_scores_high_incoherent_low():
    coh = generate_synthetic_teacher(0, 200, 16)
    inc = generate_synthetic_teacher(0, 200, 16, "incoherent")
    assert eval_similarity(coh.table, [coh.similarity]).mean > 0.8
    assert abs(eval_similarity(inc.table, [inc.similarity]).mean) < 0.3


def test_analogy_questions_append_r():
    t = generate_synthetic_teacher(1, 200, 16, n_questions=50)
    assert len(t.analogy.questions) == 50
    for a, b, c, d in t.analogy.questions:
        assert b == a + "r" and d == c + "r" and a != c
        assert all(w in t.table for w in (a, b, c, d))


def test_bad_arguments():
    with pytest.raises(ValueError):
        generate_synthetic_teacher(0, mode="weird")
    with pytest.raises(ValueError):
        generate_synthetic_teacher(0, vocab_size=5)


def test_final_char_corpus():
    c = final_char_corpus(0, 30)
    assert len(c) == 30 and c.tags == ("A", "B", "C")
    for s in c.sentences:
        for w, t in s:
            assert w[-1].upper() == t
    assert final_char_corpus(0, 30).sentences == c.sentences
