import numpy as np

from magnet.envs import BomberEnv, BomberConfig, PredatorPreyConfig, PredatorPreyEnv, ReplayWriter, rng_digest, verify_replay
from magnet.rng import RngStream


def roll_and_log(env, seed, path, ticks=20):
    state, _ = env.reset(seed)
    writer = ReplayWriter(path, env.name, seed)
    rng = RngStream(seed, "pol")
    n = env.n_agents
    for _ in range(ticks):
        acts = {}
        for i in range(n):
            try:
                acts[i] = env.scripted_policy(state, i, rng)
            except Exception:
                pass
        alive_acts = {i: a for i, a in acts.items()}
        res = env.step(state, alive_acts)
        state = res.state
        writer.record(state.tick, alive_acts, res.rewards, res.events, rng_digest(state.rng), res.tensor)
        if res.done:
            break
    writer.close()


def test_replay_roundtrip_pp(tmp_path):
    env = PredatorPreyEnv(PredatorPreyConfig(grid=8, predators_team1=2, n_prey=1, wall_count=3))
    path = tmp_path / "ep.jsonl"
    roll_and_log(env, 5, path)
    ok, ticks, msg = verify_replay(env, path)
    assert ok, msg
    assert ticks > 0


def test_replay_roundtrip_bomber(tmp_path):
    env = BomberEnv(BomberConfig(grid=9))
    path = tmp_path / "ep.jsonl"
    roll_and_log(env, 8, path, ticks=25)
    ok, ticks, msg = verify_replay(env, path)
    assert ok, msg


def test_replay_detects_tampering(tmp_path):
    env = PredatorPreyEnv(PredatorPreyConfig(grid=8, predators_team1=2, n_prey=1, wall_count=3))
    path = tmp_path / "ep.jsonl"
    roll_and_log(env, 5, path)
    lines = path.read_text().splitlines()
    import json

    row = json.loads(lines[3])
    row["actions"]["0"]["d"] = (row["actions"]["0"]["d"] + 1.7) % 6.28
    lines[3] = json.dumps(row)
    path.write_text("\n".join(lines) + "\n")
    ok, _, msg = verify_replay(env, path)
    assert not ok and "mismatch" in msg
