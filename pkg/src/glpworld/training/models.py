"""Model assembly shared by training, rollout, and serving."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..core import ObservationEncoder, TextEmbedder, WorldModelBackbone
from ..decoder import DiT, NoiseSchedule
from ..numerics import Parameter, RngStream
from .config import SHAPE_PRESETS, ModelShape


class ModelBundle:
    """Encoder h, action embedder, backbone f, and decoder DiT, built from one seed.

    Parameter names carry the sub-model prefix (enc/text/wm/dit), so the
    merged dict is collision-free and checkpoints can address any subset.
    """

    def __init__(self, shape: ModelShape, seed: int):
        base = RngStream(seed, "model")
        self.shape = shape
        self.seed = seed
        self.encoder = ObservationEncoder(
            "enc", base.child("enc"), dim=shape.d_s, heads=shape.enc_heads,
            grid=shape.enc_grid,
        )
        self.text = TextEmbedder("text", base.child("text"), dim=shape.d_s)
        self.backbone = WorldModelBackbone(
            "wm", base.child("wm"), dim=shape.d_s, heads=shape.backbone_heads,
            n_blocks=shape.backbone_blocks, n_queries=shape.n_queries,
        )
        self.dit = DiT(
            "dit", base.child("dit"), width=shape.dit_width, heads=shape.dit_heads,
            blocks=shape.dit_blocks, ctx_dim=shape.d_s,
        )
        self.schedule = NoiseSchedule(K=shape.k_steps, N=shape.n_steps, shift=shape.shift)

    def parameters(self) -> dict[str, Parameter]:
        out: dict[str, Parameter] = {}
        for mod in (self.encoder, self.text, self.backbone, self.dit):
            out.update(mod.parameters())
        return out

    def trainable_parameters(self, stage: int, unfreeze_backbone: bool = False) -> dict[str, Parameter]:
        """Stage 1 trains the DiT; stage 2 adds the query embeddings, or the
        whole backbone when unfrozen. The observation encoder and the action
        embedder never train here."""
        params = dict(self.dit.parameters())
        if stage == 2:
            if unfreeze_backbone:
                params.update(self.backbone.parameters())
            else:
                q = self.backbone.queries
                params[q.name] = q
        return params

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.parameters().items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        """Copy checkpointed arrays into the live parameters, strictly."""
        params = self.parameters()
        missing = set(params) - set(arrays)
        extra = set(arrays) - set(params)
        if missing or extra:
            raise ValueError(
                f"checkpoint does not match model: missing {sorted(missing)[:3]}, "
                f"unexpected {sorted(extra)[:3]}"
            )
        for name, p in params.items():
            arr = np.asarray(arrays[name])
            if arr.shape != p.data.shape:
                raise ValueError(
                    f"shape mismatch for {name!r}: checkpoint {arr.shape}, model {p.data.shape}"
                )
            p.data[...] = arr.astype(p.data.dtype)


def bundle_from_checkpoint(path: str | Path) -> ModelBundle:
    """Rebuild the exact bundle a checkpoint was saved from and load its weights."""
    from .checkpoint import load_checkpoint, split_arrays

    ckpt = load_checkpoint(path)
    preset = ckpt.config.get("preset")
    if preset not in SHAPE_PRESETS:
        raise ValueError(f"checkpoint names unknown preset {preset!r}")
    bundle = ModelBundle(SHAPE_PRESETS[preset], seed=int(ckpt.config["seed"]))
    bundle.load_arrays(split_arrays(ckpt.arrays, "param"))
    return bundle
