import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from authorkit.corpus import Corpus, Document
from authorkit.encoder import (
    PAD_ID,
    UNK_ID,
    AttributionModel,
    ModelConfig,
    TokenVocabulary,
    build_token_vocab,
    load_checkpoint,
    save_checkpoint,
    tokenize,
    tokenize_batch,
)
from authorkit.losses import LossConfig, joint_loss

from conftest import random_batch, tiny_model


# --- vocabulary and tokenize --------------------------------------------------


def test_build_vocab_cap_one():
    corpus = Corpus.from_documents([Document("1", "a a b", "x")])
    vocab = build_token_vocab(corpus, cap=1)
    assert vocab.tokens == ["<pad>", "<unk>", "a"]


def test_build_vocab_saturation():
    corpus = Corpus.from_documents([Document("1", "a b c", "x")])
    vocab = build_token_vocab(corpus, cap=100)
    assert vocab.size == 5


def test_vocab_excludes_unseen_tokens():
    train = Corpus.from_documents([Document("1", "alpha beta", "x")])
    vocab = build_token_vocab(train, cap=10)
    ids, n = tokenize("alpha gamma", vocab)
    assert n == 2
    assert ids[0] == vocab.token_index["alpha"]
    assert ids[1] == UNK_ID


def test_tokenize_empty_text():
    vocab = build_token_vocab(Corpus.from_documents([Document("1", "a", "x")]), cap=5)
    ids, n = tokenize("...", vocab)
    assert n == 0
    assert np.all(ids == PAD_ID)


def test_tokenize_truncates():
    vocab = TokenVocabulary(tokens=["<pad>", "<unk>", "w"], max_len=4)
    ids, n = tokenize("w w w w w w", vocab)
    assert n == 4
    assert ids.shape == (4,)
    assert np.all(ids == vocab.token_index["w"])


@settings(max_examples=50, deadline=None)
@given(st.text(max_size=300))
def test_tokenize_shape_contract(text):
    vocab = TokenVocabulary(tokens=["<pad>", "<unk>", "a", "b"], max_len=16)
    ids, n = tokenize(text, vocab)
    assert ids.shape == (16,)
    assert 0 <= n <= 16
    assert np.all(ids[n:] == PAD_ID)
    assert np.all(ids[:n] != PAD_ID)


def test_vocab_rejects_duplicates():
    with pytest.raises(ValueError):
        TokenVocabulary(tokens=["<pad>", "<unk>", "a", "a"], max_len=4)


# --- forward semantics ---------------------------------------------------------


def test_all_pad_input_constant_embedding():
    model = tiny_model()
    ids = np.zeros((2, model.vocab.max_len), dtype=np.int64)
    n_real = np.array([0, 0])
    emb, pooled, _ = model.encode(ids, n_real)
    assert np.all(pooled == 0.0)
    assert np.array_equal(emb[0], emb[1])


def test_duplicate_documents_identical_rows():
    model = tiny_model()
    rng = np.random.default_rng(0)
    row = rng.integers(2, model.vocab.size, size=model.vocab.max_len)
    ids = np.stack([row, row])
    n_real = np.array([model.vocab.max_len] * 2)
    emb, _, _ = model.encode(ids, n_real)
    assert np.array_equal(emb[0], emb[1])


def test_padding_invariance():
    # the embedding depends only on the positions before the non-pad count
    model = tiny_model()
    L = model.vocab.max_len
    ids_padded = np.zeros((1, L), dtype=np.int64)
    ids_padded[0, :3] = [2, 3, 4]
    emb_a, _, _ = model.encode(ids_padded, np.array([3]))
    ids_junk = ids_padded.copy()
    ids_junk[0, 3:] = 7  # anything past the real prefix must be ignored
    emb_b, _, _ = model.encode(ids_junk, np.array([3]))
    assert np.array_equal(emb_a, emb_b)


def test_batch_permutation_equivariance():
    model = tiny_model()
    rng = np.random.default_rng(1)
    ids, n_real, _ = random_batch(rng, model, n=6)
    emb, _, _ = model.encode(ids, n_real)
    perm = rng.permutation(6)
    emb_p, _, _ = model.encode(ids[perm], n_real[perm])
    assert np.array_equal(emb_p, emb[perm])


def test_two_token_embedding_matches_scalar_recomputation():
    model = tiny_model()
    L = model.vocab.max_len
    ids = np.zeros((1, L), dtype=np.int64)
    ids[0, :2] = [5, 9]
    emb, _, _ = model.encode(ids, np.array([2]))
    p = model.params
    pooled = [(p["emb"][5][k] + p["emb"][9][k]) / 2.0 for k in range(model.config.d_tok)]
    hidden = []
    for j in range(model.config.d_h):
        acc = p["enc_b1"][j]
        for k in range(model.config.d_tok):
            acc += pooled[k] * p["enc_w1"][k, j]
        hidden.append(np.tanh(acc))
    out = []
    for j in range(model.config.d_e):
        acc = p["enc_b2"][j]
        for k in range(model.config.d_h):
            acc += hidden[k] * p["enc_w2"][k, j]
        out.append(acc)
    assert emb[0] == pytest.approx(np.array(out), rel=1e-12)


def test_eval_forward_deterministic():
    model = tiny_model()
    rng = np.random.default_rng(2)
    ids, n_real, _ = random_batch(rng, model)
    a = model.forward(ids, n_real, train_mode=False)
    b = model.forward(ids, n_real, train_mode=False)
    assert np.array_equal(a.logits, b.logits)


def test_dropout_eval_mode_no_effect():
    model = tiny_model()
    rng = np.random.default_rng(3)
    ids, n_real, _ = random_batch(rng, model)
    emb, _, _ = model.encode(ids, n_real)
    logits_a, _, mask_a, _ = model.classify(emb, train_mode=False, dropout_seed=1)
    logits_b, _, mask_b, _ = model.classify(emb, train_mode=False, dropout_seed=2)
    assert mask_a is None and mask_b is None
    assert np.array_equal(logits_a, logits_b)


def test_dropout_zero_rate_equals_eval():
    model = tiny_model(dropout=0.0)
    rng = np.random.default_rng(4)
    ids, n_real, _ = random_batch(rng, model)
    emb, _, _ = model.encode(ids, n_real)
    train_logits, _, _, _ = model.classify(emb, train_mode=True, dropout_seed=7)
    eval_logits, _, _, _ = model.classify(emb, train_mode=False)
    assert np.array_equal(train_logits, eval_logits)


def test_dropout_reproducible_given_seed():
    model = tiny_model()
    rng = np.random.default_rng(5)
    ids, n_real, _ = random_batch(rng, model)
    emb, _, _ = model.encode(ids, n_real)
    a, _, _, _ = model.classify(emb, train_mode=True, dropout_seed=11)
    b, _, _, _ = model.classify(emb, train_mode=True, dropout_seed=11)
    c, _, _, _ = model.classify(emb, train_mode=True, dropout_seed=12)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# --- backward -------------------------------------------------------------------


def test_zero_upstream_gradient_gives_zero_grads():
    model = tiny_model()
    rng = np.random.default_rng(6)
    ids, n_real, _ = random_batch(rng, model)
    fwd = model.forward(ids, n_real, train_mode=True, dropout_seed=0)
    grads = model.backward(fwd.cache, np.zeros_like(fwd.logits))
    for name, g in grads.items():
        assert np.all(g == 0.0), name


def test_mean_pool_gradient_distribution():
    # each contributing table row receives d_pooled / (non-pad count); four
    # distinct single-occurrence tokens therefore share identical gradients
    model = tiny_model(dropout=0.0)
    L = model.vocab.max_len
    ids = np.zeros((1, L), dtype=np.int64)
    ids[0, :4] = [2, 3, 4, 5]
    fwd = model.forward(ids, np.array([4]), train_mode=True, dropout_seed=0)
    grads = model.backward(fwd.cache, np.ones_like(fwd.logits))
    share = grads["emb"][2]
    assert not np.all(share == 0.0)
    for tok in (3, 4, 5):
        assert np.array_equal(grads["emb"][tok], share)
    untouched = [t for t in range(model.vocab.size) if t not in (0, 2, 3, 4, 5)]
    for tok in untouched:
        assert np.all(grads["emb"][tok] == 0.0)


def test_full_model_gradients_match_fd():
    rng = np.random.default_rng(7)
    for seed in (1, 2, 3):
        model = tiny_model(init_seed=seed)
        ids, n_real, labels = random_batch(rng, model, n=4)
        cfg = LossConfig(tau=0.1, lam=1.0)
        dropout_seed = 99

        def loss_value():
            fwd = model.forward(ids, n_real, train_mode=True, dropout_seed=dropout_seed)
            return joint_loss(fwd.logits, fwd.embeddings, labels, cfg)

        res = loss_value()
        fwd = model.forward(ids, n_real, train_mode=True, dropout_seed=dropout_seed)
        grads = model.backward(fwd.cache, res.grad_logits, res.grad_embeddings)

        h = 1e-4
        for name, p in model.params.items():
            fd = np.zeros_like(p)
            flat = p.ravel()
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + h
                lp = loss_value().total
                flat[idx] = orig - h
                lm = loss_value().total
                flat[idx] = orig
                fd.ravel()[idx] = (lp - lm) / (2 * h)
            rel = np.linalg.norm(grads[name] - fd) / max(
                np.linalg.norm(grads[name]), np.linalg.norm(fd), 1e-12
            )
            assert rel < 1e-4, f"{name}: {rel}"


def test_backward_requires_cache():
    model = tiny_model()
    with pytest.raises(ValueError, match="cache"):
        model.backward(None, np.zeros((1, 3)))


def test_backward_detects_stale_cache():
    model = tiny_model()
    rng = np.random.default_rng(8)
    ids, n_real, _ = random_batch(rng, model, n=4)
    fwd = model.forward(ids, n_real, train_mode=True, dropout_seed=0)
    with pytest.raises(ValueError, match="stale"):
        model.backward(fwd.cache, np.zeros((2, model.num_authors)))


# --- checkpointing ----------------------------------------------------------------


def test_checkpoint_round_trip_bit_exact(tmp_path):
    model = tiny_model(init_seed=21)
    rng = np.random.default_rng(9)
    ids, n_real, _ = random_batch(rng, model)
    logits_before = model.forward(ids, n_real).logits

    base = tmp_path / "ckpt"
    meta, blob = save_checkpoint(model, base)
    assert meta.exists() and blob.exists()
    loaded = load_checkpoint(base)
    assert loaded.authors == model.authors
    assert loaded.vocab.tokens == model.vocab.tokens
    for name in model.params:
        assert np.array_equal(loaded.params[name], model.params[name])
    logits_after = loaded.forward(ids, n_real).logits
    assert np.array_equal(logits_before, logits_after)


def test_checkpoint_detects_vocab_hash_mismatch(tmp_path):
    import json

    model = tiny_model()
    base = tmp_path / "ckpt"
    meta_path, _ = save_checkpoint(model, base)
    meta = json.loads(meta_path.read_text())
    meta["vocab"][2] = "tampered"
    meta_path.write_text(json.dumps(meta))
    with pytest.raises(ValueError, match="hash"):
        load_checkpoint(base)
