"""Grid-world games, scripted default agents, and event extraction."""
from .core import (
    A_BOMB,
    A_DOWN,
    A_LEFT,
    A_NOOP,
    A_RIGHT,
    A_UP,
    Event,
    EVENT_WEIGHTS,
    MoveAction,
    agent_vertex,
    encode_discrete,
    object_vertex,
    rng_digest,
)
from .predator_prey import PredatorPreyConfig, PredatorPreyEnv, PPState, CH_PREY, CH_WALL
from .bomber import BomberConfig, BomberEnv, BomberState
from .replay_log import ReplayWriter, state_digest, verify_replay


def make_env(name: str, **kwargs):
    if name in ("predator-prey", "pp"):
        return PredatorPreyEnv(PredatorPreyConfig(**kwargs))
    if name in ("bomber", "pommerman-like", "pm"):
        return BomberEnv(BomberConfig(**kwargs))
    raise ValueError(f"unknown environment {name!r}")
