import numpy as np
import pytest

from magnet.envs import A_BOMB, A_DOWN, A_LEFT, A_NOOP, A_RIGHT, A_UP, BomberConfig, BomberEnv
from magnet.envs.bomber import CH_BOMB, CH_FLAME, CH_WOOD, _corners
from magnet.errors import InputError
from magnet.rng import RngStream


def env9(**kw):
    base = dict(grid=9, channels=12)
    base.update(kw)
    return BomberEnv(BomberConfig(**base))


def noops():
    return {i: A_NOOP for i in range(4)}


def test_paper_scale_tensor_shape():
    env = BomberEnv(BomberConfig(grid=11, channels=30))
    state, tensor = env.reset(3)
    assert tensor.shape == (11, 11, 30)


def test_reset_symmetric_and_connected():
    env = env9()
    for seed in range(5):
        state, _ = env.reset(seed)
        d = env.cfg.grid
        for cell in state.rigid:
            assert (d - 1 - cell[0], d - 1 - cell[1]) in state.rigid
        for cell in state.wood:
            assert (d - 1 - cell[0], d - 1 - cell[1]) in state.wood
        assert [a.pos for a in state.agents] == _corners(d)
        assert [a.team for a in state.agents] == [0, 0, 1, 1]


def test_reset_deterministic():
    env = env9()
    s1, t1 = env.reset(42)
    s2, t2 = env.reset(42)
    assert np.array_equal(t1, t2)
    assert s1.rigid == s2.rigid and s1.wood == s2.wood


def test_bomb_explodes_exactly_ten_steps_after_placement():
    env = env9()
    # lone agent far from others; empty map
    state = env.from_layout(rigid=[], wood=[], agents=[((4, 4), True), ((8, 8), True), ((0, 8), True), ((8, 0), True)])
    acts = noops()
    acts[0] = A_BOMB
    res = env.step(state, acts)
    state = res.state
    placed_tick = state.tick
    assert any(b.pos == (4, 4) and b.fuse == 10 for b in state.bombs)
    # walk away so the owner survives: two cells up then off-axis
    for a in (A_UP, A_UP, A_LEFT, A_LEFT, A_LEFT):
        acts = noops()
        acts[0] = a
        state = env.step(state, acts).state
    while state.bombs:
        prev = state
        res = env.step(state, noops())
        state = res.state
    assert state.tick == placed_tick + 10
    assert prev.bombs[0].fuse == 1
    assert (4, 4) in state.flames
    assert state.tensor[4, 4, CH_BOMB] == 0.0


def test_blast_kills_at_range_4_on_axis_only():
    env = env9()
    # victim 4 cells right of the bomb, bystander 5 cells right, another off-axis
    state = env.from_layout(
        rigid=[], wood=[],
        agents=[((4, 0), True), ((4, 4), True), ((4, 5), True), ((5, 3), True)],
    )
    env._place_bomb(state, (4, 0), 1, 4, 0)
    state.tensor = env._encode(state)
    res = env.step(state, noops())
    assert not res.state.agents[1].alive  # distance 4 on the ray dies
    assert res.state.agents[2].alive      # distance 5 is out of range
    assert res.state.agents[3].alive      # off-axis survives


def test_wood_destroyed_only_at_distance_one():
    env = env9()
    state = env.from_layout(
        rigid=[], wood=[(4, 5), (2, 4)],
        agents=[((0, 0), True), ((8, 8), True), ((0, 8), True), ((8, 0), True)],
    )
    env._place_bomb(state, (4, 4), 1, 4, 0)
    state.tensor = env._encode(state)
    res = env.step(state, noops())
    assert (4, 5) not in res.state.wood      # distance 1: destroyed
    assert (2, 4) in res.state.wood          # distance 2: ray stops there but wood survives
    assert res.state.tensor[4, 5, CH_WOOD] == 0.0
    assert res.state.tensor[2, 4, CH_WOOD] == 1.0


def test_wood_blocks_ray_beyond_it():
    env = env9()
    state = env.from_layout(
        rigid=[], wood=[(4, 5)],
        agents=[((4, 7), True), ((8, 8), True), ((0, 8), True), ((8, 0), True)],
    )
    env._place_bomb(state, (4, 4), 1, 4, 0)
    state.tensor = env._encode(state)
    res = env.step(state, noops())
    assert res.state.agents[0].alive  # shielded by the wooden square


def test_rigid_blocks_ray_and_survives():
    env = env9()
    state = env.from_layout(
        rigid=[(4, 5)], wood=[],
        agents=[((4, 6), True), ((8, 8), True), ((0, 8), True), ((8, 0), True)],
    )
    env._place_bomb(state, (4, 4), 1, 4, 0)
    state.tensor = env._encode(state)
    res = env.step(state, noops())
    assert res.state.agents[0].alive
    assert (4, 5) in res.state.rigid


def test_bomb_affects_no_agent_before_explosion():
    env = env9()
    state = env.from_layout(rigid=[], wood=[], agents=[((4, 4), True), ((4, 6), True), ((0, 8), True), ((8, 0), True)])
    acts = noops()
    acts[0] = A_BOMB
    state = env.step(state, acts).state
    for _ in range(9):
        state = env.step(state, noops()).state
        assert all(a.alive for a in state.agents)
    state = env.step(state, noops()).state
    assert not state.agents[0].alive and not state.agents[1].alive


def test_team_loss_when_both_members_die():
    env = env9()
    state = env.from_layout(rigid=[], wood=[], agents=[((0, 0), True), ((8, 8), True), ((4, 4), True), ((4, 5), True)])
    env._place_bomb(state, (4, 4), 1, 4, 0)
    state.tensor = env._encode(state)
    res = env.step(state, noops())
    assert res.done and res.winner == "team0"
    # +1 for the win plus two kill-event shaping bonuses of 100/100 each
    assert res.rewards[0] == 3.0 and res.rewards[2] == -1.0


def test_kill_enemy_event_on_edge_killer_victim():
    env = env9()
    state = env.from_layout(rigid=[], wood=[], agents=[((0, 0), True), ((8, 8), True), ((4, 4), True), ((0, 8), True)])
    env._place_bomb(state, (4, 4), 1, 4, 0)  # owned by agent 0 (team 0); kills agent 2 (team 1)
    state.tensor = env._encode(state)
    res = env.step(state, noops())
    kills = [e for e in res.events if e.kind == "kill-enemy-agent"]
    assert len(kills) == 1
    assert kills[0].edge == (("agent", 0), ("agent", 2))
    assert kills[0].weight == 100.0


def test_no_event_for_suicide():
    env = env9()
    state = env.from_layout(rigid=[], wood=[], agents=[((4, 4), True), ((8, 8), True), ((0, 8), True), ((8, 0), True)])
    env._place_bomb(state, (4, 4), 1, 4, 0)  # kills its own team-0 owner
    state.tensor = env._encode(state)
    res = env.step(state, noops())
    assert all(e.kind != "kill-enemy-agent" for e in res.events)
    assert not res.state.agents[0].alive


def test_item_pickup_event_and_effect():
    env = env9()
    state = env.from_layout(
        rigid=[], wood=[],
        agents=[((4, 3), True), ((8, 8), True), ((0, 8), True), ((8, 0), True)],
        items=[((4, 4), "extra-bomb")],
    )
    slot = state.items[(4, 4)][1]
    acts = noops()
    acts[0] = A_RIGHT
    res = env.step(state, acts)
    assert res.state.agents[0].bomb_capacity == 2
    picks = [e for e in res.events if e.kind == "pick-up-extra-bomb"]
    assert picks == [res.events[0]]
    assert picks[0].edge == (("agent", 0), ("object", slot))
    assert picks[0].weight == 25.0
    assert res.state.object_slots[slot] is None


def test_blast_power_item_increases_range():
    env = env9()
    state = env.from_layout(
        rigid=[], wood=[],
        agents=[((4, 4), True), ((8, 8), True), ((0, 8), True), ((8, 0), True)],
        items=[((4, 4), "blast-power")],
    )
    res = env.step(state, noops())
    assert res.state.agents[0].blast_power == env.cfg.kill_range + 1


def test_bomb_capacity_limits_placement():
    env = env9()
    state = env.from_layout(rigid=[], wood=[], agents=[((4, 4), True), ((8, 8), True), ((0, 8), True), ((8, 0), True)])
    acts = noops()
    acts[0] = A_BOMB
    state = env.step(state, acts).state
    assert len(state.bombs) == 1
    acts = noops()
    acts[0] = A_RIGHT
    state = env.step(state, acts).state
    acts = noops()
    acts[0] = A_BOMB  # second placement exceeds capacity 1
    state = env.step(state, acts).state
    assert len(state.bombs) == 1


def test_wood_and_bombs_block_movement():
    env = env9()
    state = env.from_layout(rigid=[], wood=[(4, 5)], agents=[((4, 4), True), ((8, 8), True), ((0, 8), True), ((8, 0), True)])
    acts = noops()
    acts[0] = A_RIGHT
    res = env.step(state, acts)
    assert res.state.agents[0].pos == (4, 4)


def test_draw_at_episode_limit():
    env = env9(episode_limit=5)
    state = env.from_layout(rigid=[], wood=[], agents=[((0, 0), True), ((8, 8), True), ((0, 8), True), ((8, 0), True)])
    for _ in range(5):
        res = env.step(state, noops())
        state = res.state
    assert res.done and res.winner is None
    assert np.array_equal(res.rewards, np.zeros(4))


def test_malformed_action_rejected():
    env = env9()
    state, _ = env.reset(0)
    with pytest.raises(InputError):
        env.step(state, {0: "jump", 1: A_NOOP, 2: A_NOOP, 3: A_NOOP})


def test_incremental_tensor_matches_reencoding():
    env = env9()
    state, _ = env.reset(17)
    rng = RngStream(4, "probe")
    for _ in range(40):
        acts = {i: env.scripted_policy(state, i, rng) for i in range(4)}
        res = env.step(state, acts)
        state = res.state
        assert np.array_equal(state.tensor, env._encode(state))
        if res.done:
            break


def test_determinism_with_scripted_agents():
    env = env9()

    def run():
        state, _ = env.reset(33)
        rng = RngStream(5, "pol")
        trail = []
        for _ in range(30):
            acts = {i: env.scripted_policy(state, i, rng) for i in range(4)}
            res = env.step(state, acts)
            state = res.state
            trail.append(res.tensor.tobytes())
            if res.done:
                break
        return trail

    assert run() == run()


def test_scripted_agent_escapes_blast_zone():
    env = BomberEnv(BomberConfig(grid=8, channels=12))
    # crafted 8x8 map: agent 0 stands on the future blast axis with a free escape
    state = env.from_layout(
        rigid=[], wood=[],
        agents=[((4, 2), True), ((7, 7), True), ((0, 7), True), ((7, 0), True)],
    )
    env._place_bomb(state, (4, 0), 6, 4, 2)
    state.tensor = env._encode(state)
    act = env.scripted_policy(state, 0, RngStream(0, "x"))
    assert act in (A_UP, A_DOWN)  # any perpendicular move leaves the cross
    zone = env.blast_zone(state)
    assert state.agents[0].pos in zone
    d = {A_UP: (-1, 0), A_DOWN: (1, 0)}[act]
    assert (4 + d[0], 2 + d[1]) not in zone


def test_scripted_agent_bombs_adjacent_wood():
    env = env9()
    state = env.from_layout(rigid=[], wood=[(4, 5)], agents=[((4, 4), True), ((8, 8), True), ((0, 8), True), ((8, 0), True)])
    act = env.scripted_policy(state, 0, RngStream(0, "x"))
    assert act == A_BOMB
