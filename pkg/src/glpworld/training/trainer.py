"""Two-stage flow-matching training plus the latent-matching baseline.

Stage 1 trains the DiT alone on windows of two adjacent latent chunks at
paired noise levels, the earlier chunk half an interval cleaner, with
action conditioning only. Stage 2 starts from stage-1 weights and adds
each chunk's predicted world state as a second conditioning stream,
training the DiT together with the state pathway. The observation
encoder and the action embedder stay frozen throughout, so per-episode
latents, action embeddings, and observation tokens are computed once and
cached.

All stochastic choices a training run makes flow through one sequential
RNG stream whose counter is checkpointed, which is what makes resuming
bit-exact. Validation windows come from a separate stream that is
re-derived from the seed, so every evaluation (and every stage) scores
the same fixed batch.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import MAX_ROUNDS, JepaModel, build_context, latent_variance
from ..codec import encode_causal
from ..datapipe import load_dataset
from ..decoder import COND_AUG_K, NoiseSchedule, flow_mix, training_k_pair
from ..env import Episode
from ..numerics import AdamW, GradTape, RngStream, Tensor, clip_by_global_norm, lr_at
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint, split_arrays
from .config import SHAPE_PRESETS, JepaConfig, TrainConfig
from .models import ModelBundle


# --------------------------------------------------------------- episode prep

@dataclass
class EpisodeCache:
    latents: np.ndarray            # (1 + T*C, grid, grid, ch) float32
    action_texts: list[str]
    action_embs: list[Tensor]      # frozen, detached
    obs_tokens: list[Tensor] | None  # h(o_0..o_{T-1}), stage 2 only


def _key_observation(ep: Episode, j: int) -> np.ndarray:
    """o_j: the resting frame before action j (initial frame for j = 0)."""
    if j == 0:
        return ep.initial_frame
    return ep.step_frames(j - 1)[-1]


def _episode_cache(bundle: ModelBundle, ep: Episode, with_obs: bool) -> EpisodeCache:
    shape = bundle.shape
    if ep.frames_per_action != shape.frames_per_action:
        raise ValueError(
            f"episode has {ep.frames_per_action} frames per action, "
            f"model expects {shape.frames_per_action}"
        )
    if ep.num_steps < 2:
        raise ValueError("episode too short: training windows need at least 2 actions")
    if with_obs and ep.num_steps > MAX_ROUNDS:
        raise ValueError(
            f"episode has {ep.num_steps} actions but the context window holds "
            f"{MAX_ROUNDS} rounds; teacher forcing needs the full episode"
        )
    latents = encode_causal(ep.full_stream())
    embs = [bundle.text(a).detach() for a in ep.actions]
    obs = None
    if with_obs:
        obs = [bundle.encoder(_key_observation(ep, j)).detach() for j in range(ep.num_steps)]
    return EpisodeCache(latents=latents, action_texts=list(ep.actions),
                        action_embs=embs, obs_tokens=obs)


def _load_split(dataset: str | Path) -> tuple[list[Episode], list[Episode]]:
    path = Path(dataset)
    if path.is_dir():
        path = path / "manifest.json"
    episodes = load_dataset(path)
    if len(episodes) < 2:
        raise ValueError(f"dataset {dataset} has {len(episodes)} episodes; need >= 2")
    n_val = max(1, len(episodes) // 10)
    return episodes[:-n_val], episodes[-n_val:]


# ------------------------------------------------------------- training items

@dataclass
class WindowItem:
    """One training window, fully materialized except for world states."""

    ep_idx: int
    chunk_ids: list[int]           # episode chunk index per chunk slot
    frames: np.ndarray             # (W, grid, grid, ch) noisy input, cond first
    ks: np.ndarray                 # (W,) float64 noise levels
    actions: list[Tensor | None]   # per chunk, None = unconditional branch
    target: np.ndarray             # (W, grid, grid, ch); cond row is masked out


def _sample_item(cache: EpisodeCache, ep_idx: int, schedule: NoiseSchedule,
                 chunk_len: int, draw: RngStream, drop_p: float,
                 first_chunk: bool, window_idx: int | None = None) -> WindowItem:
    """Draw order per item is fixed: window index, k pair, conditioning
    noise, per-chunk sample noise, per-chunk drop coins."""
    lat = cache.latents
    c = chunk_len
    n_windows = len(cache.action_embs) - 1
    if first_chunk:
        i = 0
        k, _ = training_k_pair(draw, schedule, first_chunk_mode=True)
        chunk_ids = [0]
        chunk_ks = [k]
    else:
        if window_idx is None:
            i = int(draw.integers(0, n_windows))
        else:
            i = window_idx % n_windows
        k_late, k_early = training_k_pair(draw, schedule)
        chunk_ids = [i, i + 1]
        chunk_ks = [k_early, k_late]  # earlier chunk is the cleaner one

    cond_clean = lat[i * c]
    cond = flow_mix(cond_clean, draw.normal(cond_clean.shape), COND_AUG_K)
    rows = [cond[None]]
    targets = [np.zeros_like(cond)[None]]
    ks = [COND_AUG_K]
    actions: list[Tensor | None] = []
    for j, k in zip(chunk_ids, chunk_ks):
        x1 = lat[1 + j * c : 1 + (j + 1) * c]
        x0 = draw.normal(x1.shape)
        rows.append(flow_mix(x1, x0, k))
        targets.append(x1 - x0)
        ks.extend([k] * c)
        dropped = drop_p > 0.0 and float(draw.uniform()) < drop_p
        actions.append(None if dropped else cache.action_embs[j])
    return WindowItem(
        ep_idx=ep_idx,
        chunk_ids=chunk_ids,
        frames=np.concatenate(rows, axis=0),
        ks=np.asarray(ks, dtype=np.float64),
        actions=actions,
        target=np.concatenate(targets, axis=0),
    )


def _draw_batch(caches: list[EpisodeCache], schedule: NoiseSchedule, chunk_len: int,
                draw: RngStream, cfg: TrainConfig) -> list[WindowItem]:
    items = []
    for _ in range(cfg.batch_size):
        ep_idx = int(draw.integers(0, len(caches)))
        first = float(draw.uniform()) < cfg.first_chunk_frac
        items.append(_sample_item(caches[ep_idx], ep_idx, schedule, chunk_len,
                                  draw, cfg.cfg_drop, first))
    return items


def _build_val_items(caches: list[EpisodeCache], schedule: NoiseSchedule,
                     chunk_len: int, seed: int, n_items: int) -> list[WindowItem]:
    """Fixed validation batch: derived only from the seed and the val split,
    so stages 1 and 2 score the very same windows. No action dropping."""
    draw = RngStream(seed, "train/val")
    items = []
    for idx in range(n_items):
        ep_idx = idx % len(caches)
        first = idx % 5 == 4
        items.append(_sample_item(caches[ep_idx], ep_idx, schedule, chunk_len,
                                  draw, 0.0, first, window_idx=idx))
    return items


# ---------------------------------------------------------------------- loss

def _item_loss(dit, item: WindowItem, states: list[Tensor | None]) -> Tensor:
    """Flow-matching MSE over the chunk rows of one window.

    The conditioning frame is input only: its token rows are sliced out of
    both prediction and target, so its target entries never reach the loss.
    """
    c = (item.frames.shape[0] - 1) // len(item.chunk_ids)
    segments = [(1, None, None)]
    segments += [(c, a, s) for a, s in zip(item.actions, states)]
    v = dit.velocity_tokens(item.frames, item.ks, segments)
    tpf = dit.tokens_per_frame
    tgt = dit.frame_tokens(item.target)[tpf:]
    diff = v[tpf:] - Tensor(tgt)
    return (diff * diff).mean()


def _episode_states(bundle: ModelBundle, cache: EpisodeCache) -> list[Tensor]:
    """Teacher-forced predictions; entry j conditions chunk j."""
    history = list(zip(cache.obs_tokens, cache.action_embs))
    return bundle.backbone.predict_all_rounds(build_context(history))


def _batch_loss(bundle: ModelBundle, caches: list[EpisodeCache],
                items: list[WindowItem], stage: int) -> Tensor:
    states_by_ep: dict[int, list[Tensor]] = {}
    if stage == 2:
        for it in items:
            if it.ep_idx not in states_by_ep:
                states_by_ep[it.ep_idx] = _episode_states(bundle, caches[it.ep_idx])
    total = None
    for it in items:
        if stage == 2:
            states = [states_by_ep[it.ep_idx][j] for j in it.chunk_ids]
        else:
            states = [None] * len(it.chunk_ids)
        li = _item_loss(bundle.dit, it, states)
        total = li if total is None else total + li
    return total * (1.0 / len(items))


def _eval_loss(bundle: ModelBundle, caches: list[EpisodeCache],
               items: list[WindowItem], stage: int) -> float:
    return float(_batch_loss(bundle, caches, items, stage).item())


# ------------------------------------------------------------- training loops

@dataclass
class TrainResult:
    checkpoint: Path | None
    history: dict
    bundle: ModelBundle
    steps: int


def _default_out(cfg: TrainConfig) -> Path:
    return Path(cfg.out) if cfg.out else Path(f"stage{cfg.stage}.ckpt")


def _save_state(path: Path, cfg: TrainConfig, bundle: ModelBundle, opt: AdamW,
                draw: RngStream, step: int, extra: dict) -> Path:
    arrays = {f"param/{k}": v for k, v in bundle.param_arrays().items()}
    state = opt.state_dict()
    arrays.update({f"adam_m/{k}": v for k, v in state["m"].items()})
    arrays.update({f"adam_v/{k}": v for k, v in state["v"].items()})
    ckpt = Checkpoint(
        config=dataclasses.asdict(cfg),
        step=step,
        arrays=arrays,
        rng_states={"draw": draw.state()},
        optimizer={k: state[k] for k in ("t", "betas", "eps", "weight_decay")},
        extra=extra,
    )
    return save_checkpoint(ckpt, path)


def _restore_optimizer(opt: AdamW, ckpt: Checkpoint) -> None:
    state = dict(ckpt.optimizer)
    state["m"] = split_arrays(ckpt.arrays, "adam_m")
    state["v"] = split_arrays(ckpt.arrays, "adam_v")
    opt.load_state_dict(state)


def _run_flow_training(cfg: TrainConfig, bundle: ModelBundle,
                       caches_train: list[EpisodeCache], caches_val: list[EpisodeCache],
                       resume: Checkpoint | None, log) -> TrainResult:
    shape = cfg.shape
    schedule = bundle.schedule
    trainable = bundle.trainable_parameters(cfg.stage, cfg.unfreeze_backbone)
    opt = AdamW(trainable, weight_decay=cfg.weight_decay)
    val_items = _build_val_items(caches_val, schedule, shape.chunk_len,
                                 cfg.seed, cfg.val_items)

    if resume is not None:
        bundle.load_arrays(split_arrays(resume.arrays, "param"))
        _restore_optimizer(opt, resume)
        draw = RngStream.from_state(resume.rng_states["draw"])
        step = resume.step
        extra = dict(resume.extra)
        history = extra["history"]
    else:
        draw = RngStream(cfg.seed, f"train/stage{cfg.stage}")
        step = 0
        history = {"train_loss": [], "val_loss": [], "stopped_early": False}
        val0 = _eval_loss(bundle, caches_val, val_items, cfg.stage)
        history["val_loss"].append(val0)
        log(f"stage {cfg.stage} | step 0 | val {val0:.6f}")
        extra = {"history": history, "best_val": val0, "bad_epochs": 0,
                 "epoch_sum": 0.0, "epoch_count": 0}

    total_steps = cfg.epochs * cfg.steps_per_epoch
    limit = total_steps if cfg.max_steps is None else min(total_steps, cfg.max_steps)

    while step < limit and not history["stopped_early"]:
        items = _draw_batch(caches_train, schedule, shape.chunk_len, draw, cfg)
        with GradTape() as tape:
            loss = _batch_loss(bundle, caches_train, items, cfg.stage)
        grads = tape.gradients(loss, trainable.values())
        grads, _ = clip_by_global_norm(grads, cfg.grad_clip)
        opt.step(grads, lr_at(step, total_steps, cfg.lr, cfg.warmup_fraction))
        step += 1
        extra["epoch_sum"] += loss.item()
        extra["epoch_count"] += 1

        if step % cfg.steps_per_epoch == 0:
            train_mean = extra["epoch_sum"] / extra["epoch_count"]
            history["train_loss"].append(train_mean)
            extra["epoch_sum"] = 0.0
            extra["epoch_count"] = 0
            val = _eval_loss(bundle, caches_val, val_items, cfg.stage)
            history["val_loss"].append(val)
            log(f"stage {cfg.stage} | step {step} | train {train_mean:.6f} | val {val:.6f}")
            best = extra["best_val"]
            if val < best - cfg.early_stop_epsilon * best:
                extra["best_val"] = val
                extra["bad_epochs"] = 0
            else:
                extra["bad_epochs"] += 1
                if extra["bad_epochs"] >= cfg.early_stop_patience and step < total_steps:
                    history["stopped_early"] = True
                    log(f"stage {cfg.stage} | early stop at step {step}")

    out = _save_state(_default_out(cfg), cfg, bundle, opt, draw, step, extra)
    return TrainResult(checkpoint=out, history=history, bundle=bundle, steps=step)


def train_stage1(cfg: TrainConfig, resume: str | Path | None = None,
                 log=print) -> TrainResult:
    """Action-conditioned flow matching for the DiT, from fresh weights."""
    if cfg.stage != 1:
        raise ValueError(f"train_stage1 called with stage {cfg.stage}")
    train_eps, val_eps = _load_split(cfg.dataset)
    bundle = ModelBundle(cfg.shape, cfg.seed)
    caches_train = [_episode_cache(bundle, ep, with_obs=False) for ep in train_eps]
    caches_val = [_episode_cache(bundle, ep, with_obs=False) for ep in val_eps]
    resumed = load_checkpoint(resume) if resume is not None else None
    return _run_flow_training(cfg, bundle, caches_train, caches_val, resumed, log)


def train_stage2(cfg: TrainConfig, init_from: str | Path | None = None,
                 resume: str | Path | None = None, log=print) -> TrainResult:
    """State-conditioned flow matching, initialized from a stage-1 checkpoint.

    The state cross-attention output projections start at zero and were
    untouched by stage 1, so the first validation score here must equal
    stage 1's final one; the identity is a cheap end-to-end wiring check.
    """
    if cfg.stage != 2:
        raise ValueError(f"train_stage2 called with stage {cfg.stage}")
    if (init_from is None) == (resume is None):
        raise ValueError("pass exactly one of init_from (fresh stage 2) or resume")
    train_eps, val_eps = _load_split(cfg.dataset)
    bundle = ModelBundle(cfg.shape, cfg.seed)
    resumed = None
    if resume is not None:
        resumed = load_checkpoint(resume)
    else:
        start = load_checkpoint(init_from)
        bundle.load_arrays(split_arrays(start.arrays, "param"))
    caches_train = [_episode_cache(bundle, ep, with_obs=True) for ep in train_eps]
    caches_val = [_episode_cache(bundle, ep, with_obs=True) for ep in val_eps]
    return _run_flow_training(cfg, bundle, caches_train, caches_val, resumed, log)


# ------------------------------------------------------------------- baseline

@dataclass
class JepaResult:
    loss_history: list[float]
    variance_history: list[float]
    final_variance: float
    model: JepaModel


def _jepa_triples(episodes: list[Episode], draw: RngStream, n: int):
    batch = []
    for _ in range(n):
        ep = episodes[int(draw.integers(0, len(episodes)))]
        j = int(draw.integers(0, ep.num_steps))
        batch.append((_key_observation(ep, j), ep.actions[j], _key_observation(ep, j + 1)))
    return batch


def train_jepa(cfg: JepaConfig, log=print) -> JepaResult:
    """Latent-matching baseline with both encoder branches live.

    Tracks latent variance on held-out observations per epoch; the run is
    a measurement, so nothing is checkpointed.
    """
    shape = SHAPE_PRESETS[cfg.preset]
    train_eps, val_eps = _load_split(cfg.dataset)
    model = JepaModel("jepa", RngStream(cfg.seed, "jepa"), dim=shape.d_s,
                      n_queries=shape.n_queries, grid=shape.enc_grid)
    params = model.parameters()
    opt = AdamW(params)
    draw = RngStream(cfg.seed, "jepa/draw")
    val_obs = [_key_observation(ep, j) for ep in val_eps for j in range(ep.num_steps)]

    losses: list[float] = []
    variances: list[float] = []
    total = cfg.epochs * cfg.steps_per_epoch
    for step in range(total):
        batch = _jepa_triples(train_eps, draw, cfg.batch_size)
        with GradTape() as tape:
            loss = model.loss(batch)
        opt.step(tape.gradients(loss, params.values()), lr=cfg.lr)
        if (step + 1) % cfg.steps_per_epoch == 0:
            var = latent_variance([model.encoder(o) for o in val_obs])
            losses.append(loss.item())
            variances.append(var)
            log(f"jepa | step {step + 1} | loss {loss.item():.6f} | latent var {var:.6f}")
    return JepaResult(loss_history=losses, variance_history=variances,
                      final_variance=variances[-1], model=model)
