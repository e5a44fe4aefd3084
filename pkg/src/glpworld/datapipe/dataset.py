"""Episode datasets on disk: one GWV file per episode plus a JSON manifest.

Each GWV stores the full frame stream (initial frame followed by the
rendered action frames), so frame_count == 1 + num_steps * frames_per_action.
The manifest records enough to replay the episode: the per-episode seed
regenerates the initial scene deterministically.
"""
from __future__ import annotations

import json
from pathlib import Path

from ..env import Episode, random_scene
from ..numerics import RngStream
from .gwv import GwvVideo, read_gwv, write_gwv

ENV_FPS = 12


def write_dataset(episodes: list[Episode], out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, ep in enumerate(episodes):
        name = f"episode_{i:05d}.gwv"
        write_gwv(GwvVideo.from_float(ep.full_stream(), fps_num=ENV_FPS), out / name)
        entries.append(
            {
                "gwv_path": name,
                "actions": list(ep.actions),
                "seed": ep.seed,
                "frames_per_action": ep.frames_per_action,
            }
        )
    manifest = out / "manifest.json"
    manifest.write_text(json.dumps({"episodes": entries}, indent=2, sort_keys=True))
    return manifest


def load_dataset(manifest_path: str | Path) -> list[Episode]:
    manifest_path = Path(manifest_path)
    spec = json.loads(manifest_path.read_text())
    episodes = []
    for entry in spec["episodes"]:
        video = read_gwv(manifest_path.parent / entry["gwv_path"])
        stream = video.to_float()
        scene_rng = RngStream(entry["seed"], "env/episode").child("scene")
        episodes.append(
            Episode(
                initial_state=random_scene(scene_rng),
                actions=list(entry["actions"]),
                frames=stream[1:],
                seed=entry["seed"],
                frames_per_action=entry["frames_per_action"],
                initial_frame=stream[0],
            )
        )
    return episodes
