import math

import numpy as np
import pytest

from authorkit.corpus import generate_synthetic_corpus, stratified_split
from authorkit.encoder import AttributionModel, ModelConfig, build_token_vocab
from authorkit.losses import LossConfig
from authorkit.training import (
    AdamWState,
    TrainConfig,
    adamw_step,
    cosine_lr,
    evaluate,
    train,
)


# --- cosine schedule ---------------------------------------------------------


def test_cosine_lr_boundaries():
    assert cosine_lr(0, 100, 1e-3) == pytest.approx(1e-3)
    assert cosine_lr(100, 100, 1e-3) == pytest.approx(0.0)
    assert cosine_lr(50, 100, 1e-3, 2e-4) == pytest.approx((1e-3 + 2e-4) / 2)


def test_cosine_lr_monotone():
    values = [cosine_lr(s, 200, 1e-3, 1e-5) for s in range(201)]
    assert all(a >= b for a, b in zip(values, values[1:]))
    assert values[0] == pytest.approx(1e-3)
    assert values[-1] == pytest.approx(1e-5)


def test_cosine_lr_out_of_range():
    with pytest.raises(ValueError):
        cosine_lr(-1, 10, 1e-3)
    with pytest.raises(ValueError):
        cosine_lr(11, 10, 1e-3)
    with pytest.raises(ValueError):
        cosine_lr(0, 0, 1e-3)


# --- AdamW --------------------------------------------------------------------


def _single_param(value):
    return {"w": np.array([value], dtype=np.float64)}


def test_adamw_zero_grad_no_decay_fixed_point():
    params = _single_param(0.7)
    state = AdamWState.for_params(params)
    cfg = TrainConfig(weight_decay=0.0)
    adamw_step(params, _single_param(0.0), state, lr=1e-2, config=cfg)
    assert params["w"][0] == pytest.approx(0.7)


def test_adamw_zero_grad_decoupled_decay():
    params = _single_param(0.7)
    state = AdamWState.for_params(params)
    cfg = TrainConfig(weight_decay=0.1)
    adamw_step(params, _single_param(0.0), state, lr=1e-2, config=cfg)
    assert params["w"][0] == pytest.approx(0.7 * (1 - 1e-2 * 0.1))


def test_adamw_first_step_is_signed_unit_step():
    # scalar oracle: from zero moments, m_hat = g, v_hat = g^2, so the update
    # direction is -lr * sign(g) up to the epsilon in the denominator
    for g in (0.3, -2.5, 11.0):
        params = _single_param(1.0)
        state = AdamWState.for_params(params)
        cfg = TrainConfig(weight_decay=0.0, adam_epsilon=1e-8)
        adamw_step(params, _single_param(g), state, lr=1e-3, config=cfg)
        expected = 1.0 - 1e-3 * g / (abs(g) + 1e-8)
        assert params["w"][0] == pytest.approx(expected, rel=1e-12)


def test_adamw_matches_scalar_oracle_two_steps():
    beta1, beta2, eps, lr, wd = 0.9, 0.999, 1e-8, 1e-2, 0.01
    params = _single_param(0.5)
    state = AdamWState.for_params(params)
    cfg = TrainConfig(beta1=beta1, beta2=beta2, adam_epsilon=eps, weight_decay=wd)

    w, m, v = 0.5, 0.0, 0.0
    for t, g in ((1, 0.2), (2, -0.4)):
        adamw_step(params, _single_param(g), state, lr=lr, config=cfg)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        w = w - lr * m_hat / (math.sqrt(v_hat) + eps)
        w = w - lr * wd * w
        assert params["w"][0] == pytest.approx(w, rel=1e-14)


def test_adamw_rejects_non_finite_gradient():
    params = _single_param(1.0)
    state = AdamWState.for_params(params)
    with pytest.raises(FloatingPointError, match="'w'"):
        adamw_step(params, _single_param(float("nan")), state, lr=1e-3, config=TrainConfig())


# --- train loop ----------------------------------------------------------------


@pytest.fixture(scope="module")
def small_task():
    corpus = generate_synthetic_corpus(3, 12, 25, 120, 0.8, seed=2)
    manifest = stratified_split(corpus, (0.8, 0.1, 0.1), seed=2)
    return {name: corpus.subset(ids) for name, ids in manifest.splits().items()}


def _fresh_model(train_corpus, seed=0):
    vocab = build_token_vocab(train_corpus, cap=200, max_len=32)
    config = ModelConfig(d_tok=12, d_h=16, d_e=10, d_h2=14, vocab_cap=200, max_len=32)
    return AttributionModel.build(vocab, train_corpus.authors, config, init_seed=seed)


def test_train_deterministic(small_task):
    cfg = TrainConfig(epochs=2, batch_size=8, lr0=1e-3, seed=5)
    r1 = train(_fresh_model(small_task["train"]), small_task["train"], small_task["val"], cfg)
    r2 = train(_fresh_model(small_task["train"]), small_task["train"], small_task["val"], cfg)
    for name in r1.model.params:
        assert np.array_equal(r1.final_params[name], r2.final_params[name])
        assert np.array_equal(r1.best_params[name], r2.best_params[name])
    assert r1.history.to_csv() == r2.history.to_csv()


def test_train_step_count_and_lr_schedule(small_task):
    cfg = TrainConfig(epochs=3, batch_size=8, lr0=1e-3, lr_min=1e-5, seed=5)
    n = len(small_task["train"].documents)
    result = train(_fresh_model(small_task["train"]), small_task["train"], None, cfg)
    steps_per_epoch = math.ceil(n / cfg.batch_size)
    total = cfg.epochs * steps_per_epoch
    assert len(result.history.steps) == total
    for rec in result.history.steps:
        assert rec.lr == cosine_lr(rec.step, total, cfg.lr0, cfg.lr_min)


def test_lambda_zero_matches_ce_only_bitwise(small_task):
    cfg_joint = TrainConfig(epochs=2, batch_size=8, lr0=1e-3, seed=7,
                            loss=LossConfig(tau=0.1, lam=0.0))
    cfg_ce = TrainConfig(epochs=2, batch_size=8, lr0=1e-3, seed=7)
    r_joint = train(_fresh_model(small_task["train"]), small_task["train"],
                    small_task["val"], cfg_joint)
    r_ce = train(_fresh_model(small_task["train"]), small_task["train"],
                 small_task["val"], cfg_ce, ce_only=True)
    for name in r_joint.final_params:
        assert np.array_equal(r_joint.final_params[name], r_ce.final_params[name]), name
    ce_steps = [(s.step, s.lr, s.l_ce) for s in r_ce.history.steps]
    joint_steps = [(s.step, s.lr, s.l_ce) for s in r_joint.history.steps]
    assert ce_steps == joint_steps
    # the lam=0 history still reports the contrastive value
    assert any(s.l_cl > 0 for s in r_joint.history.steps)
    assert all(s.l_cl == 0 for s in r_ce.history.steps)


def test_train_records_val_accuracy_and_best(small_task):
    cfg = TrainConfig(epochs=3, batch_size=8, lr0=2e-3, seed=1)
    result = train(_fresh_model(small_task["train"]), small_task["train"], small_task["val"], cfg)
    assert len(result.history.val_accuracy) == 3
    assert result.history.best_epoch is not None
    best = max(result.history.val_accuracy)
    assert result.best_val_accuracy == best
    # ties keep the latest epoch with the max value
    expected_epoch = max(i for i, v in enumerate(result.history.val_accuracy) if v == best)
    assert result.history.best_epoch == expected_epoch


def test_train_without_val_returns_final(small_task):
    cfg = TrainConfig(epochs=1, batch_size=8, lr0=1e-3, seed=1)
    result = train(_fresh_model(small_task["train"]), small_task["train"], None, cfg)
    assert result.best_val_accuracy is None
    for name in result.final_params:
        assert np.array_equal(result.best_params[name], result.final_params[name])


def test_class_balanced_sampler_runs(small_task):
    cfg = TrainConfig(epochs=1, batch_size=6, lr0=1e-3, seed=3,
                      sampler="class_balanced", balanced_authors=2, balanced_docs=3)
    result = train(_fresh_model(small_task["train"]), small_task["train"], None, cfg)
    n = len(small_task["train"].documents)
    assert len(result.history.steps) == math.ceil(n / 6)


def test_class_balanced_deterministic(small_task):
    cfg = TrainConfig(epochs=1, batch_size=6, lr0=1e-3, seed=3,
                      sampler="class_balanced", balanced_authors=2, balanced_docs=3)
    a = train(_fresh_model(small_task["train"]), small_task["train"], None, cfg)
    b = train(_fresh_model(small_task["train"]), small_task["train"], None, cfg)
    assert a.history.to_csv() == b.history.to_csv()


def test_evaluate_deterministic_and_tie_break(small_task):
    model = _fresh_model(small_task["train"])
    preds_a, emb_a = evaluate(model, small_task["test"])
    preds_b, emb_b = evaluate(model, small_task["test"])
    assert np.array_equal(preds_a, preds_b)
    assert np.array_equal(emb_a, emb_b)
    # argmax resolves ties toward the lowest author id
    assert int(np.argmax(np.array([1.0, 1.0, 0.5]))) == 0


def test_evaluate_rejects_author_mismatch(small_task):
    model = _fresh_model(small_task["train"])
    other = generate_synthetic_corpus(2, 4, 10, 50, 0.5, seed=9)
    with pytest.raises(ValueError, match="author"):
        evaluate(model, other)


def test_train_config_round_trip():
    cfg = TrainConfig(epochs=2, lr0=5e-4, loss=LossConfig(tau=0.3, lam=0.5), seed=9)
    again = TrainConfig.from_dict(cfg.to_dict())
    assert again == cfg


def test_overfit_tiny_corpus():
    corpus = generate_synthetic_corpus(4, 5, 20, 80, 0.9, seed=6)
    vocab = build_token_vocab(corpus, cap=100, max_len=24)
    config = ModelConfig(d_tok=12, d_h=16, d_e=10, d_h2=14, vocab_cap=100, max_len=24)
    model = AttributionModel.build(vocab, corpus.authors, config, init_seed=3)
    cfg = TrainConfig(epochs=60, batch_size=24, lr0=3e-3, seed=3)
    result = train(model, corpus, None, cfg)
    preds, _ = evaluate(result.model, corpus)
    assert float(np.mean(preds == corpus.label_ids())) == 1.0


def test_first_epoch_loss_trend_on_golden_corpus(golden_splits):
    from authorkit.encoder import ModelConfig as MC

    tr = golden_splits["train"]
    mc = MC()
    vocab = build_token_vocab(tr, cap=mc.vocab_cap, max_len=mc.max_len)
    model = AttributionModel.build(vocab, tr.authors, mc, init_seed=7)
    cfg = TrainConfig(epochs=1, batch_size=24, lr0=1e-3, seed=7)
    result = train(model, tr, None, cfg)
    totals = [s.l_total for s in result.history.steps]
    assert len(totals) >= 20
    assert np.mean(totals[-10:]) < np.mean(totals[:10])
