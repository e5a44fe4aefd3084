"""Encoder, context template, backbone, and JEPA baseline tests."""
import numpy as np
import pytest

from glpworld.core import (
    ConversationContext,
    JepaModel,
    ObservationEncoder,
    TextEmbedder,
    WorldModelBackbone,
    build_context,
    jepa_loss,
    latent_variance,
)
from glpworld.core.context import ContextBlock
from glpworld.env import render, generate_episode
from glpworld.numerics import AdamW, GradTape, RngStream, Tensor, concat

from .helpers import fd_gradient_check


def _rng(name="core"):
    return RngStream(23, name)


def _blob_frame(y, x):
    frame = np.zeros((32, 32, 3), np.float32)
    frame[y : y + 8, x : x + 8, 0] = 0.8
    frame[y : y + 8, x : x + 8, 2] = 0.3
    return frame


@pytest.fixture(scope="module")
def encoder():
    return ObservationEncoder("enc", _rng("enc"))


@pytest.fixture(scope="module")
def text():
    return TextEmbedder("text", _rng("text"))


@pytest.fixture(scope="module")
def backbone():
    return WorldModelBackbone("bb", _rng("bb"))


@pytest.fixture(scope="module")
def live_backbone():
    # the output head is zero-initialized, so sensitivity tests need to
    # overwrite it before predictions can depend on the context at all
    bb = WorldModelBackbone("bb-live", _rng("bb-live"))
    bb.head.w.data[...] = 0.05 * _rng("bb-head").normal(bb.head.w.data.shape)
    return bb


# ---------------------------------------------------------------- encoder


def test_encoder_token_count(encoder):
    tokens = encoder(_blob_frame(8, 12))
    assert tokens.shape == (64, 64)


def test_encoder_deterministic_on_identical_frames(encoder):
    frame = _blob_frame(4, 4)
    a = encoder(frame)
    b = encoder(frame.copy())
    assert np.array_equal(a.data, b.data)
    pooled = encoder(np.stack([frame, frame]))
    assert np.allclose(pooled.data, a.data, atol=1e-6)


def test_encoder_translation_shifts_token_grid(encoder):
    # 4 px right = one patch column; relative-position attention keeps the
    # map translation-equivariant away from the grid boundary
    base = encoder(_blob_frame(8, 12)).data.reshape(8, 8, 64)
    moved = encoder(_blob_frame(8, 16)).data.reshape(8, 8, 64)
    rolled = np.roll(base, 1, axis=1)
    scale = np.abs(base).mean()
    aligned = np.abs(moved[:, 1:, :] - rolled[:, 1:, :]).max()
    unaligned = np.abs(moved[:, 1:, :] - base[:, 1:, :]).max()
    assert aligned < 0.01 * scale * 10
    assert unaligned > 20 * aligned


def test_encoder_multiframe_mean_pooling(encoder):
    f1, f2 = _blob_frame(4, 4), _blob_frame(16, 20)
    pooled = encoder(np.stack([f1, f2]))
    manual = 0.5 * (encoder(f1).data + encoder(f2).data)
    assert np.allclose(pooled.data, manual, atol=1e-6)


def test_encoder_gradients_match_fd():
    rng = _rng("enc-fd")
    enc = ObservationEncoder("e", rng.child("model"), dim=32, heads=2, grid=4,
                             dtype=np.float64)
    frame = np.asarray(render(generate_episode(3, 1).initial_state)[::2, ::2], np.float64)
    target = rng.child("target").normal((16, 32)).astype(np.float64)

    def loss_fn():
        return ((enc(frame) - Tensor(target)) ** 2).mean()

    fd_gradient_check(loss_fn, enc.parameters(), rng.child("probe"), n_probes=10)


# ---------------------------------------------------------------- text embedder


def test_text_embedder_shapes(text):
    out = text("move the red cube up")
    assert out.shape == (5, 64)
    assert text(None).shape == (1, 64)


def test_text_embedder_unknown_word_is_unk(text):
    a = text("warp the red cube up")
    b = text("zonk the red cube up")
    assert np.array_equal(a.data, b.data)  # both unknown verbs hit the UNK row
    assert not np.array_equal(a.data, text("move the red cube up").data)


def test_text_embedder_rejects_overlong(text):
    with pytest.raises(ValueError, match="too long"):
        text("a b c d e f g h i")


# ---------------------------------------------------------------- context


def _round(rng, n_state=64):
    state = Tensor(rng.normal((n_state, 64)))
    action = Tensor(rng.normal((4, 64)))
    return state, action


def test_context_single_round_layout():
    rng = _rng("ctx1")
    ctx = build_context([_round(rng)])
    assert [(b.role, b.kind) for b in ctx.blocks] == [
        ("user", "state"),
        ("user", "action"),
        ("assistant", "query"),
    ]
    assert ctx.n_rounds == 1


def test_context_truncation_keeps_initial_state():
    rng = _rng("ctx2")
    history = [_round(rng) for _ in range(12)]
    ctx = build_context(history, max_rounds=10)
    assert ctx.blocks[0].kind == "state"
    assert ctx.blocks[0].round_index == 0
    assert ctx.blocks[0].tokens is history[0][0]
    kept = sorted({b.round_index for b in ctx.blocks[1:]})
    assert kept == list(range(2, 12))
    assert len(ctx.blocks) == 1 + 10 * 3


def test_context_requires_history():
    with pytest.raises(ValueError, match="at least one round"):
        build_context([])


# ---------------------------------------------------------------- backbone


def test_backbone_output_shape_for_any_history(backbone):
    rng = _rng("bb-shapes")
    for rounds in (1, 3, 12):
        ctx = build_context([_round(rng, n_state=80 if k else 64) for k in range(rounds)])
        assert backbone.predict_next_state(ctx).shape == (16, 64)


def test_backbone_initial_predictions_all_zero(backbone):
    ctx = build_context([_round(_rng("bb-zero"))])
    out = backbone.predict_next_state(ctx)
    assert np.all(out.data == 0.0)


def test_backbone_causal_mask_blocks_future_rounds(live_backbone):
    rng = _rng("bb-causal")
    history = [_round(rng) for _ in range(3)]
    preds = live_backbone.predict_all_rounds(build_context(history))
    # rewrite the last round entirely; earlier rounds' outputs are bitwise equal
    mutated = history[:2] + [_round(_rng("bb-causal-other"))]
    preds2 = live_backbone.predict_all_rounds(build_context(mutated))
    assert np.array_equal(preds[0].data, preds2[0].data)
    assert np.array_equal(preds[1].data, preds2[1].data)
    assert not np.array_equal(preds[2].data, preds2[2].data)


def test_backbone_ignores_dropped_rounds(live_backbone):
    rng = _rng("bb-trunc")
    history = [_round(rng) for _ in range(12)]
    base = live_backbone.predict_next_state(build_context(history))
    noisy = list(history)
    noisy[1] = _round(_rng("bb-trunc-noise"))  # round 1 is dropped by truncation
    assert np.array_equal(
        base.data, live_backbone.predict_next_state(build_context(noisy)).data
    )
    anchored = list(history)
    anchored[0] = (Tensor(history[0][0].data + 1.0), history[0][1])  # anchor state is kept
    assert not np.array_equal(
        base.data, live_backbone.predict_next_state(build_context(anchored)).data
    )


def test_backbone_rejects_malformed_tail(backbone):
    rng = _rng("bb-tail")
    state, action = _round(rng)
    ctx = ConversationContext(
        blocks=[
            ContextBlock("user", "state", state, 0),
            ContextBlock("assistant", "query", None, 0),
            ContextBlock("user", "action", action, 0),
        ],
        n_rounds=1,
    )
    with pytest.raises(ValueError, match="action block then a query block"):
        backbone.predict_next_state(ctx)


def test_backbone_context_length_guard():
    bb = WorldModelBackbone("tiny", _rng("bb-short"), max_len=32)
    with pytest.raises(ValueError, match="exceeds maximum"):
        bb.predict_next_state(build_context([_round(_rng("bb-short-data"))]))


def test_backbone_gradients_match_fd():
    rng = _rng("bb-fd")
    bb = WorldModelBackbone("b", rng.child("model"), dim=32, heads=2, n_blocks=2,
                            n_queries=4, dtype=np.float64)
    data = rng.child("data")
    history = [
        (Tensor(data.normal((6, 32)).astype(np.float64)),
         Tensor(data.normal((3, 32)).astype(np.float64)))
        for _ in range(2)
    ]
    target = data.normal((4, 32)).astype(np.float64)

    def loss_fn():
        return ((bb.predict_next_state(build_context(history)) - Tensor(target)) ** 2).mean()

    fd_gradient_check(loss_fn, bb.parameters(), rng.child("probe"), n_probes=10)


# ---------------------------------------------------------------- JEPA


def test_jepa_collapse_witness_is_exactly_zero():
    constant = Tensor(np.full((64, 64), 0.37, np.float32))
    frames = [_blob_frame(4, 4), _blob_frame(16, 16), _blob_frame(8, 20)]
    batch = [(frames[0], "move the red cube up", frames[1]),
             (frames[1], "move the red cube down", frames[2])]
    loss = jepa_loss(lambda o: constant, lambda s, a: s, batch)
    assert loss.data == 0.0
    assert latent_variance([constant.data] * 8) == 0.0


def test_latent_variance_sees_distinct_states(encoder):
    states = [encoder(_blob_frame(4, 4)).data, encoder(_blob_frame(16, 20)).data]
    assert latent_variance(states) > 1e-4


def test_jepa_loss_empty_batch_raises():
    with pytest.raises(ValueError, match="empty"):
        jepa_loss(lambda o: Tensor(np.zeros((4, 4))), lambda s, a: s, [])


def test_jepa_model_step_reduces_loss():
    rng = _rng("jepa-step")
    model = JepaModel("j", rng.child("model"))
    batch = [(_blob_frame(4, 4), "move the red cube right", _blob_frame(4, 8)),
             (_blob_frame(12, 12), "move the red cube down", _blob_frame(16, 12))]
    params = model.parameters()
    opt = AdamW(params)
    with GradTape() as tape:
        loss0 = model.loss(batch)
    opt.step(tape.gradients(loss0, params.values()), lr=1e-3)
    loss1 = model.loss(batch).item()
    assert np.isfinite(loss1)
    assert loss1 < loss0.item()
