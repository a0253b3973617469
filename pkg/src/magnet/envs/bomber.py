"""Team bombing game: 2 teams x 2 agents on a randomly generated symmetric map.

Agents move in four directions, place bombs, or pass.  A bomb explodes a fixed
number of steps after placement in a cross-shaped blast that kills agents along
unblocked rays and breaks adjacent wooden squares, which may drop power-up
items.  A team loses when both of its agents are dead.

Channel map (fixed): 0..3 agents, 4 rigid, 5 wood, 6 bomb, 7 flame,
8 extra-bomb item, 9 blast-power item, 10..channels-1 reserved.
"""
from __future__ import annotations

import copy as _copy
import logging
from dataclasses import dataclass, replace

import numpy as np

from ..errors import GenerationError, InputError, AbsentVertexError
from ..rng import RngStream
from .core import (
    A_BOMB,
    A_NOOP,
    DIR_ORDER,
    DISCRETE_DIRS,
    Event,
    agent_vertex,
    connected_component,
    encode_discrete,
    in_bounds,
    object_vertex,
)

log = logging.getLogger(__name__)

CH_RIGID = 4
CH_WOOD = 5
CH_BOMB = 6
CH_FLAME = 7
CH_ITEM_BOMB = 8
CH_ITEM_POWER = 9
MIN_CHANNELS = 10
N_AGENTS = 4


@dataclass
class BomberConfig:
    grid: int = 9
    channels: int = 12
    episode_limit: int = 100
    bomb_fuse: int = 10
    kill_range: int = 4
    wood_range: int = 1
    item_probability: float = 0.3
    rigid_density: float = 0.08
    wood_density: float = 0.12
    local_window: int = 5
    max_objects: int = 28
    dynamic_slots: int = 6
    reward_shaping: bool = True

    def validate(self) -> None:
        if self.grid < 8:
            raise InputError(f"grid must be >= 8, got {self.grid}")
        if self.channels < MIN_CHANNELS:
            raise InputError(f"need at least {MIN_CHANNELS} channels, got {self.channels}")
        if not 0.0 <= self.item_probability <= 1.0:
            raise InputError("item_probability must lie in [0, 1]")
        if self.dynamic_slots < 2:
            raise InputError("need at least 2 dynamic object slots")


@dataclass
class BomberAgent:
    pos: tuple
    team: int
    alive: bool = True
    bomb_capacity: int = 1
    blast_power: int = 4


@dataclass
class Bomb:
    pos: tuple
    fuse: int
    power: int
    owner: int
    slot: int


@dataclass
class BomberState:
    tick: int
    agents: list
    rigid: frozenset
    wood: set
    bombs: list
    items: dict  # cell -> (kind, slot)
    flames: set
    object_slots: list  # slot -> (kind, key) or None
    rng: np.random.Generator | None
    tensor: np.ndarray | None = None

    def copy(self) -> "BomberState":
        return BomberState(
            tick=self.tick,
            agents=[replace(a) for a in self.agents],
            rigid=self.rigid,
            wood=set(self.wood),
            bombs=[replace(b) for b in self.bombs],
            items=dict(self.items),
            flames=set(self.flames),
            object_slots=list(self.object_slots),
            rng=_copy.deepcopy(self.rng),
            tensor=None if self.tensor is None else self.tensor.copy(),
        )

    def compact(self) -> "BomberState":
        c = self.copy()
        c.rng = None
        c.tensor = None
        return c


@dataclass
class BomberStepResult:
    state: BomberState
    tensor: np.ndarray
    rewards: np.ndarray
    events: list
    done: bool
    winner: str | None


def _corners(d: int) -> list:
    return [(0, 0), (d - 1, d - 1), (0, d - 1), (d - 1, 0)]


class BomberEnv:
    """Bomb-placement team game; operations are pure with respect to the passed state."""

    name = "bomber"

    def __init__(self, cfg: BomberConfig | None = None):
        self.cfg = cfg or BomberConfig()
        self.cfg.validate()

    @property
    def n_agents(self) -> int:
        return N_AGENTS

    def agent_team(self, i: int) -> int:
        return 0 if i < 2 else 1

    def learning_agents(self) -> list[int]:
        return [0, 1]

    def encode_action(self, action) -> np.ndarray:
        return encode_discrete(action)

    # -- reset -------------------------------------------------------------------

    def reset(self, seed: int) -> tuple[BomberState, np.ndarray]:
        cfg = self.cfg
        d = cfg.grid
        gen = RngStream(seed, "bomber/reset").generator
        corners = _corners(d)
        protected = set()
        for cr in corners:
            protected.add(cr)
            for dr in DIR_ORDER:
                cell = (cr[0] + dr[0], cr[1] + dr[1])
                if in_bounds(cell, d):
                    protected.add(cell)

        half = [
            (r, c)
            for r in range(d)
            for c in range(d)
            if (r * d + c) < ((d - 1 - r) * d + (d - 1 - c))
            and (r, c) not in protected
            and (d - 1 - r, d - 1 - c) not in protected
        ]
        budget = (cfg.max_objects - cfg.dynamic_slots) // 2
        n_rigid = min(int(round(cfg.rigid_density * d * d / 2)), budget // 3)
        n_wood = min(int(round(cfg.wood_density * d * d / 2)), budget - n_rigid)

        for _attempt in range(64):
            picks = gen.choice(len(half), size=n_rigid + n_wood, replace=False)
            rigid = set()
            wood = set()
            for k, pi in enumerate(picks):
                cell = half[int(pi)]
                mirror = (d - 1 - cell[0], d - 1 - cell[1])
                (rigid if k < n_rigid else wood).update((cell, mirror))
            comp = connected_component(corners[0], rigid, d)
            if not all(c in comp for c in corners):
                continue
            agents = [BomberAgent(pos=corners[i], team=self.agent_team(i), blast_power=cfg.kill_range) for i in range(4)]
            statics = [("rigid", cell) for cell in sorted(rigid)] + [("wood", cell) for cell in sorted(wood)]
            slots = statics + [None] * (cfg.max_objects - len(statics))
            state = BomberState(
                tick=0,
                agents=agents,
                rigid=frozenset(rigid),
                wood=wood,
                bombs=[],
                items={},
                flames=set(),
                object_slots=slots,
                rng=RngStream(seed, "bomber/steps").generator,
            )
            state.tensor = self._encode(state)
            return state, state.tensor.copy()
        raise GenerationError(f"could not build a connected bomber map in 64 tries (seed {seed})")

    def from_layout(self, rigid=(), wood=(), agents=None, bombs=(), items=(), tick: int = 0, seed: int = 0) -> BomberState:
        """Crafted-map constructor.  agents: list of (pos, alive) or positions;
        bombs: (pos, fuse, power, owner); items: (pos, kind)."""
        cfg = self.cfg
        d = cfg.grid
        if agents is None:
            agents = [(c, True) for c in _corners(d)]
        recs = []
        for i, a in enumerate(agents):
            pos, alive = a if isinstance(a[0], tuple) else (a, True)
            recs.append(BomberAgent(pos=tuple(pos), team=self.agent_team(i), alive=alive, blast_power=cfg.kill_range))
        rigid = frozenset(tuple(c) for c in rigid)
        wood = set(tuple(c) for c in wood)
        statics = [("rigid", c) for c in sorted(rigid)] + [("wood", c) for c in sorted(wood)]
        slots = statics + [None] * (cfg.max_objects - len(statics))
        state = BomberState(
            tick=tick, agents=recs, rigid=rigid, wood=wood, bombs=[], items={}, flames=set(),
            object_slots=slots, rng=RngStream(seed, "bomber/steps").generator,
        )
        for pos, fuse, power, owner in bombs:
            self._place_bomb(state, tuple(pos), fuse, power, owner)
        for pos, kind in items:
            slot = self._alloc_slot(state, (kind, tuple(pos)))
            state.items[tuple(pos)] = (kind, slot)
        state.tensor = self._encode(state)
        return state

    # -- object slots ---------------------------------------------------------------

    def _alloc_slot(self, state: BomberState, descriptor) -> int:
        for s, val in enumerate(state.object_slots):
            if val is None:
                state.object_slots[s] = descriptor
                return s
        raise InputError("object slot capacity exhausted; raise max_objects")

    def _free_slot(self, state: BomberState, slot: int) -> None:
        state.object_slots[slot] = None

    def _place_bomb(self, state: BomberState, pos, fuse, power, owner) -> Bomb:
        slot = self._alloc_slot(state, ("bomb", pos))
        bomb = Bomb(pos=pos, fuse=fuse, power=power, owner=owner, slot=slot)
        state.bombs.append(bomb)
        if state.tensor is not None:
            state.tensor[pos[0], pos[1], CH_BOMB] = 1.0
        return bomb

    # -- observation ------------------------------------------------------------------

    def _encode(self, state: BomberState) -> np.ndarray:
        cfg = self.cfg
        t = np.zeros((cfg.grid, cfg.grid, cfg.channels))
        for i, a in enumerate(state.agents):
            if a.alive:
                t[a.pos[0], a.pos[1], i] = 1.0
        for cell in state.rigid:
            t[cell[0], cell[1], CH_RIGID] = 1.0
        for cell in state.wood:
            t[cell[0], cell[1], CH_WOOD] = 1.0
        for b in state.bombs:
            t[b.pos[0], b.pos[1], CH_BOMB] = 1.0
        for cell in state.flames:
            t[cell[0], cell[1], CH_FLAME] = 1.0
        for cell, (kind, _slot) in state.items.items():
            ch = CH_ITEM_BOMB if kind == "extra-bomb" else CH_ITEM_POWER
            t[cell[0], cell[1], ch] = 1.0
        return t

    def observe_global(self, state: BomberState) -> np.ndarray:
        if state.tensor is None:
            state.tensor = self._encode(state)
        return state.tensor

    def vertex_position(self, state: BomberState, vertex) -> tuple:
        kind, idx = vertex
        if kind == "agent":
            rec = state.agents[idx]
            if not rec.alive:
                raise AbsentVertexError(f"agent {idx} is dead")
            return rec.pos
        desc = state.object_slots[idx]
        if desc is None:
            raise AbsentVertexError(f"object slot {idx} is empty")
        return desc[1]

    def present_vertices(self, state: BomberState) -> list:
        out = [agent_vertex(i) for i, a in enumerate(state.agents) if a.alive]
        out += [object_vertex(s) for s, d in enumerate(state.object_slots) if d is not None]
        return out

    def observe_local(self, state: BomberState, vertex) -> np.ndarray:
        cfg = self.cfg
        k = cfg.local_window
        half = k // 2
        r0, c0 = self.vertex_position(state, vertex)
        glob = self.observe_global(state)
        out = np.zeros((k, k, cfg.channels + 1))
        lo_r, hi_r = max(0, r0 - half), min(cfg.grid, r0 + half + 1)
        lo_c, hi_c = max(0, c0 - half), min(cfg.grid, c0 + half + 1)
        out[lo_r - r0 + half : hi_r - r0 + half, lo_c - c0 + half : hi_c - c0 + half, : cfg.channels] = glob[
            lo_r:hi_r, lo_c:hi_c
        ]
        for b in state.bombs:
            if abs(b.pos[0] - r0) <= half and abs(b.pos[1] - c0) <= half:
                out[b.pos[0] - r0 + half, b.pos[1] - c0 + half, cfg.channels] = b.fuse / 10.0
        return out

    def local_obs_dim(self) -> int:
        return self.cfg.local_window ** 2 * (self.cfg.channels + 1)

    # -- blast geometry ------------------------------------------------------------------

    def _blast(self, pos, power, rigid, wood) -> tuple[set, list]:
        """Cells covered by one bomb's cross plus (wood cell, distance) hits.

        Rays stop at rigid squares (unaffected) and at the first wooden square.
        """
        cells = {pos}
        wood_hits = []
        for d in DIR_ORDER:
            for dist in range(1, power + 1):
                cell = (pos[0] + d[0] * dist, pos[1] + d[1] * dist)
                if not in_bounds(cell, self.cfg.grid) or cell in rigid:
                    break
                if cell in wood:
                    wood_hits.append((cell, dist))
                    break
                cells.add(cell)
        return cells, wood_hits

    def blast_zone(self, state: BomberState) -> set:
        """Cells any currently live bomb will cover when it explodes."""
        zone = set()
        for b in state.bombs:
            cells, _ = self._blast(b.pos, b.power, state.rigid, state.wood)
            zone |= cells
        return zone

    # -- dynamics ----------------------------------------------------------------------

    def step(self, state: BomberState, actions: dict) -> BomberStepResult:
        cfg = self.cfg
        for idx, act in actions.items():
            if not (0 <= idx < N_AGENTS):
                raise InputError(f"action for unknown agent {idx}")
            if not isinstance(act, (int, np.integer)) or not 0 <= int(act) <= 5:
                raise InputError(f"agent {idx}: bomber actions are integers 0..5, got {act!r}")
        new = state.copy()
        if new.tensor is not None:
            for cell in new.flames:
                new.tensor[cell[0], cell[1], CH_FLAME] = 0.0
        new.flames = set()
        pre_bomb_slots = {b.slot for b in state.bombs}

        # movement and placement, agent-index priority
        for i, agent in enumerate(new.agents):
            if not agent.alive:
                if i in actions and actions[i] != A_NOOP:
                    log.warning("ignoring action for dead agent %d at tick %d", i, new.tick)
                continue
            if i not in actions:
                raise InputError(f"missing action for living agent {i}")
            act = int(actions[i])
            if act == A_NOOP:
                continue
            if act == A_BOMB:
                own_live = sum(1 for b in new.bombs if b.owner == i)
                if own_live < agent.bomb_capacity and all(b.pos != agent.pos for b in new.bombs):
                    self._place_bomb(new, agent.pos, cfg.bomb_fuse, agent.blast_power, i)
                continue
            d = DISCRETE_DIRS[act]
            target = (agent.pos[0] + d[0], agent.pos[1] + d[1])
            occupied = {a.pos for a in new.agents if a.alive and a is not agent}
            bomb_cells = {b.pos for b in new.bombs}
            if (
                in_bounds(target, cfg.grid)
                and target not in new.rigid
                and target not in new.wood
                and target not in bomb_cells
                and target not in occupied
            ):
                if new.tensor is not None:
                    new.tensor[agent.pos[0], agent.pos[1], i] = 0.0
                    new.tensor[target[0], target[1], i] = 1.0
                agent.pos = target

        # item pickups at post-move positions
        for i, agent in enumerate(new.agents):
            if agent.alive and agent.pos in new.items:
                kind, slot = new.items.pop(agent.pos)
                if kind == "extra-bomb":
                    agent.bomb_capacity += 1
                else:
                    agent.blast_power += 1
                self._free_slot(new, slot)
                if new.tensor is not None:
                    ch = CH_ITEM_BOMB if kind == "extra-bomb" else CH_ITEM_POWER
                    new.tensor[agent.pos[0], agent.pos[1], ch] = 0.0

        # fuse ticks for bombs that existed before this step
        for b in new.bombs:
            if b.slot in pre_bomb_slots:
                b.fuse -= 1
        exploding = [b for b in new.bombs if b.fuse <= 0]
        pre_wood = set(new.wood)
        dead_now: dict[int, int] = {}
        wood_destroyed: list = []
        for b in exploding:
            cells, wood_hits = self._blast(b.pos, b.power, new.rigid, pre_wood)
            new.flames |= cells
            for vi, victim in enumerate(new.agents):
                if victim.alive and victim.pos in cells and vi not in dead_now:
                    dead_now[vi] = b.owner
            for cell, dist in wood_hits:
                if dist <= cfg.wood_range and cell in new.wood:
                    wood_destroyed.append(cell)
                    new.wood.discard(cell)
        for b in exploding:
            self._free_slot(new, b.slot)
            if new.tensor is not None:
                new.tensor[b.pos[0], b.pos[1], CH_BOMB] = 0.0
        new.bombs = [b for b in new.bombs if b.fuse > 0]

        for cell in sorted(wood_destroyed):
            for s, desc in enumerate(new.object_slots):
                if desc == ("wood", cell):
                    self._free_slot(new, s)
                    break
            if new.tensor is not None:
                new.tensor[cell[0], cell[1], CH_WOOD] = 0.0
            if new.rng.random() < cfg.item_probability:
                kind = "extra-bomb" if new.rng.random() < 0.5 else "blast-power"
                slot = self._alloc_slot(new, (kind, cell))
                new.items[cell] = (kind, slot)
                if new.tensor is not None:
                    ch = CH_ITEM_BOMB if kind == "extra-bomb" else CH_ITEM_POWER
                    new.tensor[cell[0], cell[1], ch] = 1.0

        for vi in dead_now:
            agent = new.agents[vi]
            agent.alive = False
            if new.tensor is not None:
                new.tensor[agent.pos[0], agent.pos[1], vi] = 0.0
        if new.tensor is not None:
            for cell in new.flames:
                new.tensor[cell[0], cell[1], CH_FLAME] = 1.0

        new.tick += 1
        team_alive = [any(a.alive for a in new.agents if a.team == t) for t in (0, 1)]
        done = not (team_alive[0] and team_alive[1]) or new.tick >= cfg.episode_limit
        winner = None
        if done:
            if team_alive[0] and not team_alive[1]:
                winner = "team0"
            elif team_alive[1] and not team_alive[0]:
                winner = "team1"

        events = self.extract_events(state, actions, new)
        rewards = np.zeros(N_AGENTS)
        if cfg.reward_shaping:
            for ev in events:
                rewards[ev.edge[0][1]] += ev.weight / 100.0
        if done and winner is not None:
            for i, a in enumerate(new.agents):
                rewards[i] += 1.0 if f"team{a.team}" == winner else -1.0
        return BomberStepResult(new, self.observe_global(new).copy(), rewards, events, done, winner)

    def extract_events(self, pre: BomberState, actions: dict, post: BomberState) -> list:
        """Re-derive kill and pick-up events from two consecutive states."""
        events = []
        exploding = [b for b in pre.bombs if b.fuse == 1]
        blast_of = [(b, self._blast(b.pos, b.power, pre.rigid, pre.wood)[0]) for b in exploding]
        for vi, (a0, a1) in enumerate(zip(pre.agents, post.agents)):
            if a0.alive and not a1.alive:
                for b, cells in blast_of:
                    if a1.pos in cells:
                        if pre.agents[b.owner].team != a0.team:
                            events.append(Event.make("kill-enemy-agent", agent_vertex(b.owner), agent_vertex(vi)))
                        break
        for cell, (kind, slot) in pre.items.items():
            if cell not in post.items:
                picker = next((i for i, a in enumerate(post.agents) if a.alive and a.pos == cell), None)
                if picker is not None:
                    name = "pick-up-extra-bomb" if kind == "extra-bomb" else "pick-up-blast-power"
                    events.append(Event.make(name, agent_vertex(picker), object_vertex(slot)))
        return events

    # -- scripted policy -----------------------------------------------------------------

    def scripted_policy(self, state: BomberState, agent_id: int, rng: RngStream) -> int:
        """Rule-based default: flee blast zones, bomb adjacent wood/enemies,
        otherwise epsilon-greedy shortest path toward the nearest enemy."""
        cfg = self.cfg
        me = state.agents[agent_id]
        if not me.alive:
            return A_NOOP
        zone = self.blast_zone(state)
        occupied = {a.pos for i, a in enumerate(state.agents) if a.alive and i != agent_id}
        bomb_cells = {b.pos for b in state.bombs}

        def passable(cell):
            return (
                in_bounds(cell, cfg.grid)
                and cell not in state.rigid
                and cell not in state.wood
                and cell not in bomb_cells
                and cell not in occupied
            )

        if me.pos in zone:
            fallback = None
            for k, d in enumerate(DIR_ORDER):
                cand = (me.pos[0] + d[0], me.pos[1] + d[1])
                if not passable(cand):
                    continue
                if cand not in zone:
                    return (0, 1, 2, 3)[k]
                if fallback is None:
                    fallback = (0, 1, 2, 3)[k]
            return fallback if fallback is not None else A_NOOP

        adjacent_target = False
        for d in DIR_ORDER:
            cand = (me.pos[0] + d[0], me.pos[1] + d[1])
            if cand in state.wood:
                adjacent_target = True
            for i, a in enumerate(state.agents):
                if a.alive and a.team != me.team and a.pos == cand:
                    adjacent_target = True
        own_live = sum(1 for b in state.bombs if b.owner == agent_id)
        if adjacent_target and own_live < me.bomb_capacity and me.pos not in bomb_cells:
            return A_BOMB

        legal = [(0, 1, 2, 3)[k] for k, d in enumerate(DIR_ORDER) if passable((me.pos[0] + d[0], me.pos[1] + d[1]))]
        enemies = {a.pos for a in state.agents if a.alive and a.team != me.team}
        if rng.generator.random() < 0.1:
            return int(rng.generator.choice(legal)) if legal else A_NOOP
        if enemies:
            from .core import bfs_first_step

            blocked = set(state.rigid) | state.wood | bomb_cells | (occupied - enemies)
            step = bfs_first_step(me.pos, enemies, blocked, cfg.grid)
            if step is not None and passable((me.pos[0] + step[0], me.pos[1] + step[1])):
                return (0, 1, 2, 3)[DIR_ORDER.index(step)]
        return int(rng.generator.choice(legal)) if legal else A_NOOP
