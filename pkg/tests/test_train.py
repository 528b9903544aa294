import numpy as np
import pytest

from heterfc.corpus import ClaimRecord, Label, Source, augment
from heterfc.errors import ConfigMismatch, CorruptCheckpoint
from heterfc.graph import parse_stopwords
from heterfc.model import init_params
from heterfc.synthetic import make_dataset
from heterfc.tensor import Tensor
from heterfc.train import (
    AdamState,
    TrainConfig,
    adam_step,
    checkpoint_load,
    checkpoint_save,
    evaluate,
    influence_test,
    lr_at,
    make_provider,
    prepare_instances,
    train,
)

from helpers import instance, sentence


# --- schedule -----------------------------------------------------------------

def test_lr_warmup_apex():
    assert lr_at(20, 100, 1.0, 0.2) == pytest.approx(1.0)


def test_lr_warmup_interpolation():
    assert lr_at(10, 100, 1.0, 0.2) == pytest.approx(0.5)


def test_lr_decay():
    assert lr_at(60, 100, 1.0, 0.2) == pytest.approx(0.5)


def test_lr_endpoints():
    assert lr_at(0, 100, 1.0, 0.2) == 0.0
    assert lr_at(100, 100, 1.0, 0.2) == 0.0


def test_lr_no_warmup():
    assert lr_at(0, 10, 2.0, 0.0) == pytest.approx(2.0)


# --- adam ---------------------------------------------------------------------

def test_adam_first_step_closed_form():
    p = Tensor(np.zeros((1, 1)), requires_grad=True)
    p.grad = np.ones((1, 1))
    state = AdamState({"w": p})
    adam_step({"w": p}, state, lr_model=0.1, lr_embed=0.1)
    # first step: m_hat = v_hat = 1 -> delta = -lr/(1+eps)
    assert p.data[0, 0] == pytest.approx(-0.1, abs=1e-8)


def test_adam_zero_grad_no_change():
    p = Tensor(np.full((2, 2), 3.0), requires_grad=True)
    p.grad = np.zeros((2, 2))
    state = AdamState({"w": p})
    adam_step({"w": p}, state, 0.1, 0.1)
    np.testing.assert_array_equal(p.data, np.full((2, 2), 3.0))


def test_adam_groups_use_own_lr():
    pm = Tensor(np.zeros((1, 1)), requires_grad=True)
    pe = Tensor(np.zeros((1, 1)), requires_grad=True)
    pm.grad = np.ones((1, 1))
    pe.grad = np.ones((1, 1))
    params = {"fusion.W1": pm, "embed.table": pe}
    adam_step(params, AdamState(params), lr_model=0.1, lr_embed=0.001)
    assert pm.data[0, 0] == pytest.approx(-0.1, abs=1e-6)
    assert pe.data[0, 0] == pytest.approx(-0.001, abs=1e-8)


# --- training -----------------------------------------------------------------

def small_cfg(**kw):
    base = dict(dim=8, k=2, window=2, epochs=3, seed=0, dtype="f64")
    base.update(kw)
    return TrainConfig(**base)


def test_loss_decreases_over_early_epochs():
    recs = make_dataset(16, seed=3)
    cfg = small_cfg(epochs=10)
    _, _, log = train(recs, cfg)
    first = log[0]["mean_loss_c"] + log[0]["mean_loss_e"]
    last = log[-1]["mean_loss_c"] + log[-1]["mean_loss_e"]
    assert last < first


def test_training_deterministic_given_seed():
    recs = make_dataset(8, seed=3)
    cfg = small_cfg()
    p1, _, _ = train(recs, cfg)
    p2, _, _ = train(recs, cfg)
    for name in p1:
        np.testing.assert_array_equal(p1[name].data, p2[name].data)


def test_shuffling_preserves_instances():
    recs = make_dataset(8, seed=3)
    prepared = prepare_instances(recs, small_cfg())
    rng = np.random.default_rng(0)
    order = rng.permutation(len(prepared))
    assert sorted(order) == list(range(len(prepared)))


def test_beta_zero_keeps_loss_e_logged():
    recs = make_dataset(8, seed=3)
    _, _, log = train(recs, small_cfg(beta=0.0))
    assert all(np.isfinite(e["mean_loss_e"]) for e in log)


def test_table_provider_training_runs():
    recs = make_dataset(8, seed=3)
    cfg = small_cfg(provider="TABLE", epochs=2)
    params, provider, log = train(recs, cfg)
    assert "embed.table" in params
    m = evaluate(recs, params, cfg, provider)
    assert 0.0 <= m.label_accuracy <= 1.0


# --- metrics ------------------------------------------------------------------

def _claim(cid, label, retrieved, golden):
    return ClaimRecord(cid, f"claim {cid}", label,
                       retrieved=tuple(retrieved), golden=tuple(golden))


def test_metric_fixture_accuracy_one_score_half():
    # two claims; model is irrelevant because we overfit first on them
    s_full = sentence("e1", "shared keyword alpha", gold=True)
    s_extra = sentence("e9", "another keyword beta", gold=True)
    rec_full = _claim("a", Label.SUPPORTED, [s_full], [s_full])
    rec_missing = _claim("b", Label.SUPPORTED, [s_full], [s_full, s_extra])
    cfg = small_cfg(epochs=80, dim=16)
    params, provider, _ = train([rec_full, rec_missing], cfg)
    m = evaluate([rec_full, rec_missing], params, cfg, provider)
    assert m.label_accuracy == pytest.approx(1.0)
    assert m.feverous_score == pytest.approx(0.5)


def test_feverous_score_bounded_by_accuracy():
    recs = make_dataset(12, seed=5)
    cfg = small_cfg(epochs=2)
    params, provider, _ = train(recs, cfg)
    m = evaluate(recs, params, cfg, provider)
    assert 0.0 <= m.feverous_score <= m.label_accuracy <= 1.0
    assert sum(sum(row) for row in m.confusion) == len(recs)


# --- checkpointing --------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    cfg = small_cfg(dtype="f32")
    params = init_params(cfg.model_config(), seed=1, dtype=np.float32)
    path = str(tmp_path / "m.hfck")
    checkpoint_save(params, cfg, path)
    loaded, cfg2 = checkpoint_load(path, expected_cfg=cfg)
    assert cfg2 == cfg
    for name in params:
        np.testing.assert_array_equal(loaded[name].data, params[name].data)


def test_checkpoint_truncated(tmp_path):
    cfg = small_cfg(dtype="f32")
    params = init_params(cfg.model_config(), seed=1, dtype=np.float32)
    path = str(tmp_path / "m.hfck")
    checkpoint_save(params, cfg, path)
    data = open(path, "rb").read()
    open(path, "wb").write(data[:len(data) // 2])
    with pytest.raises(CorruptCheckpoint):
        checkpoint_load(path)


def test_checkpoint_config_mismatch(tmp_path):
    cfg = small_cfg(dtype="f32")
    params = init_params(cfg.model_config(), seed=1, dtype=np.float32)
    path = str(tmp_path / "m.hfck")
    checkpoint_save(params, cfg, path)
    other = small_cfg(dim=16, dtype="f32")
    with pytest.raises(ConfigMismatch):
        checkpoint_load(path, expected_cfg=other)


def test_bit_identical_checkpoints_same_seed(tmp_path):
    recs = make_dataset(8, seed=3)
    cfg = small_cfg(epochs=2)
    blobs = []
    for run in range(2):
        params, _, _ = train(recs, cfg)
        path = str(tmp_path / f"run{run}.hfck")
        checkpoint_save(params, cfg, path)
        blobs.append(open(path, "rb").read())
    assert blobs[0] == blobs[1]


# --- influence -------------------------------------------------------------------

STOP = parse_stopwords("is\na\nthe\nof\nfor")


def test_influence_shared_keyword():
    inst = instance([sentence("s0", "Ulm grew fast"), sentence("s1", "Ulm is a city")],
                    labels=[1, 0], source=Source.RETRIEVED)
    cfg = small_cfg()
    params = init_params(cfg.model_config(), seed=2)
    rep = influence_test(params, inst, cfg, stopwords=STOP)
    assert rep["delta_with_re"] > 0
    assert rep["delta_without_re"] == 0.0
    assert rep["num_re_edges"] > 0


def test_influence_no_shared_word():
    inst = instance([sentence("s0", "alpha beta"), sentence("s1", "gamma delta")],
                    labels=[1, 0], source=Source.RETRIEVED)
    cfg = small_cfg()
    params = init_params(cfg.model_config(), seed=2)
    rep = influence_test(params, inst, cfg, stopwords=STOP)
    assert rep["num_re_edges"] == 0
    assert rep["delta_with_re"] == 0.0
    assert rep["delta_without_re"] == 0.0
