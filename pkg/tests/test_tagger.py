import numpy as np
import pytest

from charrecon.embeddings import EmbeddingTable
from charrecon.encoder import CharEncoder, CharVocab, build_char_vocab
from charrecon.errors import DimensionError
from charrecon.numerics import finite_diff_grad, make_rng, rel_error
from charrecon.reconstruct import TrainConfig
from charrecon.synthetic import final_char_corpus
from charrecon.tagger import (
    MODES,
    TaggedCorpus,
    count_lookup_params,
    grid_search,
    grid_values,
    init_tagger,
    predict,
    sentence_nll_and_grads,
    tag_accuracy,
    tagger_forward,
    train_tagger,
)

TINY = TaggedCorpus([[("ab", "X"), ("ba", "Y")], [("abc", "X"), ("c", "Z"), ("ab", "Y")]])


def tiny_model(mode, seed=0, dim=3):
    pre = EmbeddingTable(["ab", "c"], make_rng(seed, 5).normal(size=(2, 2)))
    rec = CharEncoder.init(build_char_vocab(["abd"]), dim, make_rng(seed, 6), use_highway=True)
    m = init_tagger(TINY, mode, seed, dim=dim, word_dim=2, pretrained=pre, reconstructed=rec)
    rng = make_rng(seed, 7)
    for t in m.tensors().values():
        t += rng.normal(0, 0.3, t.shape)
    return m


def corpus_nll(model, corpus):
    return sum(sentence_nll_and_grads(model, [w for w, _ in s], [t for _, t in s])[0] for s in corpus.sentences)


def test_corpus_validation():
    with pytest.raises(ValueError):
        TaggedCorpus([[]])
    with pytest.raises(ValueError):
        TaggedCorpus([[("a", "X")]], tags=("Y",))
    assert TINY.tags == ("X", "Y", "Z") and TINY.n_tokens == 5


@pytest.mark.parametrize("mode", MODES)
def test_zero_classifier_gives_uniform(mode):
    m = tiny_model(mode)
    m.W2[:] = 0.0
    m.b2[:] = 0.0
    np.testing.assert_allclose(tagger_forward(m, ["ab", "zz", "c"]), 1 / 3)


def test_single_tag_probability_one():
    c = TaggedCorpus([[("ab", "N"), ("ba", "N")]])
    m = init_tagger(c, "char", dim=4)
    np.testing.assert_array_equal(tagger_forward(m, ["ab", "q"]), 1.0)


@pytest.mark.parametrize("mode", MODES)
def test_rows_are_distributions(mode):
    p = tagger_forward(tiny_model(mode, 1), ["abc", "ab", "dd", "c"])
    assert p.shape == (4, 3)
    assert np.all(p >= 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_gradients_match_finite_differences(seed):
    mode = MODES[seed % 4]
    m = tiny_model(mode, seed)
    tokens, tags = ["abc", "c", "ab", "ba"], ["X", "Z", "Y", "X"]
    _, g = sentence_nll_and_grads(m, tokens, tags)
    for k, t in m.tensors().items():
        fd = finite_diff_grad(lambda _: sentence_nll_and_grads(m, tokens, tags)[0], t)
        if np.abs(fd).max() < 1e-10:
            # unused rows (e.g. an UNK lookup row) have no gradient at all
            assert np.abs(g[k]).max() < 1e-10, k
        else:
            assert rel_error(g[k], fd) < 1e-5, (mode, k)


def test_gradient_with_dropout():
    m = tiny_model("full", 3)
    tokens, tags = ["abc", "c", "ab"], ["X", "Z", "Y"]

    def f(_):
        return sentence_nll_and_grads(m, tokens, tags, True, make_rng(4), 0.3)[0]

    _, g = sentence_nll_and_grads(m, tokens, tags, True, make_rng(4), 0.3)
    for k, t in m.tensors().items():
        fd = finite_diff_grad(f, t)
        if np.abs(fd).max() > 1e-10:
            assert rel_error(g[k], fd) < 1e-5, k


def test_unknown_tag_rejected():
    with pytest.raises(ValueError, match="'Q'"):
        sentence_nll_and_grads(tiny_model("char"), ["ab"], ["Q"])


def test_zero_epochs_identity():
    init = tiny_model("full+emb")
    m = train_tagger(TrainConfig(epochs=0), TINY, "full+emb", init=init)
    for k, v in init.tensors().items():
        assert m.tensors()[k].tobytes() == v.tobytes()


@pytest.mark.parametrize("mode", ["full", "char"])
def test_training_is_deterministic(mode):
    cfg = TrainConfig(epochs=2, lr=0.01, dropout=0.2, seed=3)
    a = train_tagger(cfg, TINY, mode, dim=4)
    b = train_tagger(cfg, TINY, mode, dim=4)
    assert a.trace.losses == b.trace.losses
    for k in a.tensors():
        assert a.tensors()[k].tobytes() == b.tensors()[k].tobytes()


def test_full_emb_with_init_rows_equals_full():
    corpus = final_char_corpus(0, 20)
    full = init_tagger(corpus, "full", 2, dim=6, word_dim=5)
    table = EmbeddingTable(list(full.words), full.word_emb[:-1].copy())
    emb = init_tagger(corpus, "full+emb", 2, dim=6, word_dim=5, pretrained=table)
    for k in full.tensors():
        np.testing.assert_array_equal(full.tensors()[k], emb.tensors()[k])
    cfg = TrainConfig(epochs=1, lr=0.01, seed=2)
    a = train_tagger(cfg, corpus, "full", init=full)
    b = train_tagger(cfg, corpus, "full+emb", init=emb)
    assert a.trace.losses == b.trace.losses


def test_likelihood_improves_over_first_epochs():
    corpus = final_char_corpus(0, 30)
    init = init_tagger(corpus, "char", 0, dim=8)
    nll = [corpus_nll(init, corpus)]
    for k in (1, 2, 3):
        m = train_tagger(TrainConfig(epochs=k, lr=0.005), corpus, "char", init=init)
        nll.append(corpus_nll(m, corpus))
    assert all(b <= a for a, b in zip(nll, nll[1:])), nll


def test_mode_argument_errors():
    with pytest.raises(ValueError, match="full\\+emb needs"):
        init_tagger(TINY, "full+emb")
    with pytest.raises(ValueError, match="chard needs"):
        init_tagger(TINY, "chard")
    with pytest.raises(ValueError, match="unknown tagger mode"):
        init_tagger(TINY, "words")
    with pytest.raises(DimensionError):
        init_tagger(TINY, "full+emb", word_dim=3, pretrained=EmbeddingTable(["ab"], np.ones((1, 2))))


def _corpus_with_chars(chars, words_per_sentence=4):
    chars = list(chars)
    sents = [[(c, "T")] for c in chars]
    return TaggedCorpus(sents)


def test_lookup_counts():
    chars = [chr(0x100 + i) for i in range(80)]
    corpus = _corpus_with_chars(chars)
    assert count_lookup_params(init_tagger(corpus, "char", dim=4)) == 80
    rec = CharEncoder.init(CharVocab(chars[:7] + [chr(0x300 + i) for i in range(13)]), 4, make_rng(0))
    chard = init_tagger(corpus, "chard", reconstructed=rec)
    assert count_lookup_params(chard) == 93

    words = ["ab", "cd", "ef", "gh", "ij"]
    full = init_tagger(TaggedCorpus([[(w, "T") for w in words]]), "full", dim=4)
    assert count_lookup_params(full) == 15


def test_chard_keeps_reconstructed_weights():
    rec = CharEncoder.init(build_char_vocab(["abd"]), 3, make_rng(1), use_highway=True)
    m = init_tagger(TINY, "chard", reconstructed=rec)
    assert m.encoder.dim == 3
    np.testing.assert_array_equal(m.encoder.Wf, rec.Wf)
    np.testing.assert_array_equal(m.encoder.emb[m.encoder.vocab.id("d")], rec.emb[rec.vocab.id("d")])


def test_frozen_encoder_stays_fixed():
    rec = CharEncoder.init(build_char_vocab(["abc"]), 3, make_rng(1))
    m = train_tagger(TrainConfig(epochs=1, lr=0.01), TINY, "chard", reconstructed=rec, freeze_encoder=True)
    np.testing.assert_array_equal(m.encoder.Wf, rec.Wf)


def test_char_tagger_learns_final_character():
    train = final_char_corpus(0, 60)
    m = train_tagger(TrainConfig(epochs=5, lr=0.01), train, "char", dim=8)
    assert tag_accuracy(m, final_char_corpus(1, 20)) > 0.9
    assert predict(m, ["ka", "kib", "koc"]) == ["A", "B", "C"]


def test_grid_search_small():
    train, dev = final_char_corpus(0, 10), final_char_corpus(1, 5)
    res = grid_search(TrainConfig(epochs=1), train, dev, "char", [0.001, 0.01], [0.0, 0.2], dim=4)
    assert len(res.results) == 4
    assert res.best_accuracy == max(a for *_, a in res.results)
    first = next(r for r in res.results if r[2] == res.best_accuracy)
    assert (res.best_lr, res.best_dropout) == first[:2]
    assert res.to_tsv().startswith("lr\tdropout\tdev_accuracy\n")


def test_grid_values():
    assert grid_values(0.0001, 0.0005, 5) == [0.0001, 0.0002, 0.0003, 0.0004, 0.0005]
    assert grid_values(0.1, 0.5, 1) == [0.1]
