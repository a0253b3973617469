"""Line-delimited episode logs that can be re-simulated and digest-verified.

First line is a header record; every following line is one tick:
{"tick": t, "actions": {...}, "rewards": [...], "events": [...], "rng": "...", "digest": "..."}
"""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

from ..errors import InputError
from .core import Event, MoveAction, rng_digest


def state_digest(tensor, rewards, rng_dig: str) -> str:
    h = hashlib.sha256()
    h.update(tensor.tobytes())
    h.update(rewards.tobytes())
    h.update(rng_dig.encode())
    return h.hexdigest()[:24]


def _encode_action(action) -> object:
    if isinstance(action, MoveAction):
        return {"d": action.direction, "s": action.speed}
    return int(action)


def _decode_action(raw) -> object:
    if isinstance(raw, dict):
        return MoveAction(direction=float(raw["d"]), speed=float(raw["s"]))
    return int(raw)


def _encode_event(ev: Event) -> list:
    return [ev.kind, list(ev.edge[0]), list(ev.edge[1]), ev.weight]


class ReplayWriter:
    def __init__(self, path, env_name: str, seed: int, extra: dict | None = None):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w")
        header = {"env": env_name, "seed": seed}
        if extra:
            header.update(extra)
        self._fh.write(json.dumps(header) + "\n")

    def record(self, tick: int, actions: dict, rewards, events, rng_dig: str, tensor) -> None:
        row = {
            "tick": tick,
            "actions": {str(k): _encode_action(v) for k, v in actions.items()},
            "rewards": [float(r) for r in rewards],
            "events": [_encode_event(e) for e in events],
            "rng": rng_dig,
            "digest": state_digest(tensor, rewards, rng_dig),
        }
        self._fh.write(json.dumps(row) + "\n")

    def close(self) -> None:
        self._fh.close()


def verify_replay(env, path) -> tuple[bool, int, str]:
    """Re-simulate a logged episode and compare per-tick digests.

    Returns (ok, ticks_checked, message).  The env must be configured
    identically to the one that wrote the log.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise InputError(f"empty replay log {path}")
    header = json.loads(lines[0])
    if header.get("env") != env.name:
        return False, 0, f"log was written by env {header.get('env')!r}, not {env.name!r}"
    state, _ = env.reset(header["seed"])
    for n, line in enumerate(lines[1:], start=1):
        row = json.loads(line)
        actions = {int(k): _decode_action(v) for k, v in row["actions"].items()}
        result = env.step(state, actions)
        state = result.state
        dig = state_digest(result.tensor, result.rewards, rng_digest(state.rng))
        if dig != row["digest"]:
            return False, n, f"digest mismatch at tick {row['tick']}"
        if state.tick != row["tick"]:
            return False, n, f"tick mismatch: log {row['tick']}, sim {state.tick}"
    return True, len(lines) - 1, "ok"
