"""Predator-prey pursuit game on a discrete grid.

Predators try to drain the health of faster-roaming prey by staying within
attack range; prey win by surviving to the episode limit.  All dynamics are
deterministic given the reset seed and the action sequence.

Channel map (fixed): 0..5 predators by global index, 6 prey, 7 walls,
8..channels-1 reserved.
"""
from __future__ import annotations

import copy as _copy
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import GenerationError, InputError, AbsentVertexError
from ..rng import RngStream
from .core import (
    DIR_ORDER,
    Event,
    MoveAction,
    agent_vertex,
    angle_to_dir,
    chebyshev,
    connected_component,
    dir_to_angle,
    in_bounds,
    object_vertex,
)

log = logging.getLogger(__name__)

CH_PREY = 6
CH_WALL = 7
MIN_CHANNELS = 8
MAX_PREDATORS = 6


@dataclass
class PredatorPreyConfig:
    grid: int = 16
    channels: int = 20
    predators_team1: int = 3
    predators_team2: int = 0
    n_prey: int = 1
    wall_count: int = 8
    episode_limit: int = 500
    attack_range: int = 1
    predator_speed: int = 1
    prey_speed: int = 1
    prey_health: int = 10
    local_window: int = 5
    max_objects: int = 16
    reward_shaping: bool = True

    def validate(self) -> None:
        if self.grid < 8:
            raise InputError(f"grid must be >= 8, got {self.grid}")
        if self.channels < MIN_CHANNELS:
            raise InputError(f"need at least {MIN_CHANNELS} channels, got {self.channels}")
        n_pred = self.predators_team1 + self.predators_team2
        if not 0 < n_pred <= MAX_PREDATORS:
            raise InputError(f"predator count must be in 1..{MAX_PREDATORS}, got {n_pred}")
        if self.n_prey < 1:
            raise InputError("need at least one prey")
        if self.wall_count > self.max_objects:
            raise InputError(f"wall_count {self.wall_count} exceeds max_objects {self.max_objects}")
        if self.local_window % 2 == 0:
            raise InputError("local_window must be odd")


@dataclass
class Predator:
    pos: tuple
    team: int
    alive: bool = True


@dataclass
class Prey:
    pos: tuple
    health: int
    alive: bool = True


@dataclass
class PPState:
    tick: int
    predators: list
    preys: list
    walls: tuple  # static for the episode, scan order
    object_slots: tuple  # slot -> ("wall", (r, c)) or None
    rng: np.random.Generator | None
    tensor: np.ndarray | None = None

    def copy(self) -> "PPState":
        return PPState(
            tick=self.tick,
            predators=[replace(p) for p in self.predators],
            preys=[replace(p) for p in self.preys],
            walls=self.walls,
            object_slots=self.object_slots,
            rng=_copy.deepcopy(self.rng),
            tensor=None if self.tensor is None else self.tensor.copy(),
        )

    def compact(self) -> "PPState":
        """Tensor- and rng-free snapshot for replay storage."""
        return PPState(
            tick=self.tick,
            predators=[replace(p) for p in self.predators],
            preys=[replace(p) for p in self.preys],
            walls=self.walls,
            object_slots=self.object_slots,
            rng=None,
            tensor=None,
        )


@dataclass
class StepResult:
    state: PPState
    tensor: np.ndarray
    rewards: np.ndarray
    events: list
    done: bool
    winner: str | None


class PredatorPreyEnv:
    """Grid pursuit game; all public operations are pure with respect to the passed state."""

    name = "predator-prey"

    def __init__(self, cfg: PredatorPreyConfig | None = None):
        self.cfg = cfg or PredatorPreyConfig()
        self.cfg.validate()

    # -- identity helpers ------------------------------------------------------

    @property
    def n_predators(self) -> int:
        return self.cfg.predators_team1 + self.cfg.predators_team2

    @property
    def n_agents(self) -> int:
        return self.n_predators + self.cfg.n_prey

    def agent_team(self, i: int) -> str:
        if i < self.cfg.predators_team1:
            return "team1"
        if i < self.n_predators:
            return "team2"
        return "prey"

    def is_predator(self, i: int) -> bool:
        return i < self.n_predators

    def learning_agents(self) -> list[int]:
        """Agents controlled by the learner: team-1 predators."""
        return list(range(self.cfg.predators_team1))

    def encode_action(self, action) -> np.ndarray:
        return action.encoded()

    # -- reset ------------------------------------------------------------------

    def reset(self, seed: int) -> tuple[PPState, np.ndarray]:
        cfg = self.cfg
        gen = RngStream(seed, "pp/reset").generator
        d = cfg.grid
        for _attempt in range(64):
            cells = gen.choice(d * d, size=cfg.wall_count + self.n_agents, replace=False)
            walls = tuple(sorted((int(c) // d, int(c) % d) for c in cells[: cfg.wall_count]))
            blocked = set(walls)
            free = [(r, c) for r in range(d) for c in range(d) if (r, c) not in blocked]
            if connected_component(free[0], blocked, d) != set(free):
                continue
            spots = [(int(c) // d, int(c) % d) for c in cells[cfg.wall_count :]]
            preds = [Predator(pos=spots[i], team=1 if i < cfg.predators_team1 else 2) for i in range(self.n_predators)]
            preys = [Prey(pos=spots[self.n_predators + j], health=cfg.prey_health) for j in range(cfg.n_prey)]
            slots = tuple(("wall", w) for w in walls) + (None,) * (cfg.max_objects - len(walls))
            state = PPState(
                tick=0,
                predators=preds,
                preys=preys,
                walls=walls,
                object_slots=slots,
                rng=RngStream(seed, "pp/steps").generator,
            )
            state.tensor = self._encode(state)
            return state, state.tensor.copy()
        raise GenerationError(f"could not build a connected predator-prey map in 64 tries (seed {seed})")

    def from_layout(self, walls, predators, preys, tick: int = 0, seed: int = 0) -> PPState:
        """Crafted-map constructor: predators as (pos, team), preys as (pos, health)."""
        walls = tuple(sorted(tuple(w) for w in walls))
        if len(walls) > self.cfg.max_objects:
            raise InputError("more walls than object slots")
        state = PPState(
            tick=tick,
            predators=[Predator(pos=tuple(p), team=t) for p, t in predators],
            preys=[Prey(pos=tuple(p), health=h) for p, h in preys],
            walls=walls,
            object_slots=tuple(("wall", w) for w in walls) + (None,) * (self.cfg.max_objects - len(walls)),
            rng=RngStream(seed, "pp/steps").generator,
        )
        state.tensor = self._encode(state)
        return state

    # -- observation --------------------------------------------------------------

    def _encode(self, state: PPState) -> np.ndarray:
        cfg = self.cfg
        t = np.zeros((cfg.grid, cfg.grid, cfg.channels))
        for i, p in enumerate(state.predators):
            if p.alive:
                t[p.pos[0], p.pos[1], i] = 1.0
        for q in state.preys:
            if q.alive:
                t[q.pos[0], q.pos[1], CH_PREY] = 1.0
        for w in state.walls:
            t[w[0], w[1], CH_WALL] = 1.0
        return t

    def observe_global(self, state: PPState) -> np.ndarray:
        if state.tensor is None:
            state.tensor = self._encode(state)
        return state.tensor

    def vertex_position(self, state: PPState, vertex) -> tuple:
        kind, idx = vertex
        if kind == "agent":
            if idx < self.n_predators:
                rec = state.predators[idx]
            else:
                rec = state.preys[idx - self.n_predators]
            if not rec.alive:
                raise AbsentVertexError(f"agent {idx} is dead")
            return rec.pos
        slot = state.object_slots[idx]
        if slot is None:
            raise AbsentVertexError(f"object slot {idx} is empty")
        return slot[1]

    def present_vertices(self, state: PPState) -> list:
        out = [agent_vertex(i) for i, p in enumerate(state.predators) if p.alive]
        out += [agent_vertex(self.n_predators + j) for j, q in enumerate(state.preys) if q.alive]
        out += [object_vertex(s) for s, slot in enumerate(state.object_slots) if slot is not None]
        return out

    def observe_local(self, state: PPState, vertex) -> np.ndarray:
        """K x K x (channels+1) crop centered on the vertex; last layer carries
        per-cell scalars (prey health / 10), zero-padded outside the map."""
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
        for q in state.preys:
            if q.alive and abs(q.pos[0] - r0) <= half and abs(q.pos[1] - c0) <= half:
                out[q.pos[0] - r0 + half, q.pos[1] - c0 + half, cfg.channels] = q.health / 10.0
        return out

    def local_obs_dim(self) -> int:
        return self.cfg.local_window ** 2 * (self.cfg.channels + 1)

    # -- dynamics -------------------------------------------------------------------

    def _occupied(self, state: PPState) -> set:
        occ = {p.pos for p in state.predators if p.alive}
        occ |= {q.pos for q in state.preys if q.alive}
        return occ

    def _move_agent(self, state: PPState, idx: int, action: MoveAction, walls: set) -> None:
        speed_cells = self.cfg.predator_speed if idx < self.n_predators else self.cfg.prey_speed
        steps = int(round(min(max(action.speed, 0.0), 1.0) * speed_cells))
        if steps == 0:
            return
        d = angle_to_dir(action.direction)
        rec = state.predators[idx] if idx < self.n_predators else state.preys[idx - self.n_predators]
        ch = idx if idx < self.n_predators else CH_PREY
        for _ in range(steps):
            target = (rec.pos[0] + d[0], rec.pos[1] + d[1])
            if not in_bounds(target, self.cfg.grid) or target in walls or target in self._occupied(state):
                break
            if state.tensor is not None:
                state.tensor[rec.pos[0], rec.pos[1], ch] = 0.0
                state.tensor[target[0], target[1], ch] = 1.0
            rec.pos = target

    def step(self, state: PPState, actions: dict) -> StepResult:
        """Advance one tick: moves (agent-index priority), then attacks, then bookkeeping."""
        cfg = self.cfg
        for idx in actions:
            if not (0 <= idx < self.n_agents):
                raise InputError(f"action for unknown agent {idx}")
            if not isinstance(actions[idx], MoveAction):
                raise InputError(f"agent {idx}: expected MoveAction, got {type(actions[idx]).__name__}")
        new = state.copy()
        walls = set(new.walls)

        for idx in range(self.n_agents):
            rec = new.predators[idx] if idx < self.n_predators else new.preys[idx - self.n_predators]
            if not rec.alive:
                if idx in actions:
                    log.warning("ignoring action for dead agent %d at tick %d", idx, new.tick)
                continue
            if idx not in actions:
                raise InputError(f"missing action for living agent {idx}")
            self._move_agent(new, idx, actions[idx], walls)

        # Attack resolution: every predator within attack range drains 1 health,
        # processed in (prey, predator) index order so the killing blow is attributable.
        for q in new.preys:
            if not q.alive:
                continue
            for p in new.predators:
                if q.health <= 0:
                    break
                if p.alive and chebyshev(p.pos, q.pos) <= cfg.attack_range:
                    q.health -= 1
            if q.health <= 0:
                q.alive = False
                if new.tensor is not None:
                    new.tensor[q.pos[0], q.pos[1], CH_PREY] = 0.0

        new.tick += 1
        prey_alive = any(q.alive for q in new.preys)
        done = not prey_alive or new.tick >= cfg.episode_limit
        winner = None
        if done:
            winner = "prey" if prey_alive else "predators"

        events = self.extract_events(state, actions, new)
        rewards = np.zeros(self.n_agents)
        if cfg.reward_shaping:
            for ev in events:
                rewards[ev.edge[0][1]] += ev.weight / 100.0
        if done:
            pred_r = 1.0 if winner == "predators" else -1.0
            for i in range(self.n_predators):
                rewards[i] += pred_r
            for j in range(self.cfg.n_prey):
                rewards[self.n_predators + j] += -pred_r
        return StepResult(new, self.observe_global(new).copy(), rewards, events, done, winner)

    def extract_events(self, pre: PPState, actions: dict, post: PPState) -> list:
        """Re-derive scoring events from two consecutive states."""
        events = []
        for j, (q0, q1) in enumerate(zip(pre.preys, post.preys)):
            if not q0.alive:
                continue
            health = q0.health
            prey_v = agent_vertex(self.n_predators + j)
            for i, p in enumerate(post.predators):
                if health <= 0:
                    break
                if p.alive and chebyshev(p.pos, q1.pos) <= self.cfg.attack_range:
                    health -= 1
                    kind = "kill-prey" if health == 0 else "wound-prey"
                    events.append(Event.make(kind, agent_vertex(i), prey_v))
        return events

    # -- scripted policies --------------------------------------------------------------

    def scripted_policy(self, state: PPState, agent_id: int, rng: RngStream) -> MoveAction:
        if agent_id < self.n_predators:
            return self._scripted_predator(state, agent_id)
        return self._scripted_prey(state, agent_id - self.n_predators)

    def _scripted_predator(self, state: PPState, idx: int) -> MoveAction:
        """Greedy pursuit: first step of a shortest path to the nearest living prey."""
        me = state.predators[idx]
        goals = {q.pos for q in state.preys if q.alive}
        if not me.alive or not goals:
            return MoveAction(0.0, 0.0)
        from .core import bfs_first_step

        step = bfs_first_step(me.pos, goals, set(state.walls), self.cfg.grid)
        if step is None:
            return MoveAction(0.0, 0.0)
        return MoveAction(dir_to_angle(step), 1.0)

    def _scripted_prey(self, state: PPState, prey_idx: int) -> MoveAction:
        """Flee: maximize distance to the nearest predator; tie-break up<down<left<right, stay last."""
        me = state.preys[prey_idx]
        hunters = [p.pos for p in state.predators if p.alive]
        if not me.alive or not hunters:
            return MoveAction(0.0, 0.0)
        walls = set(state.walls)
        occupied = self._occupied(state)

        def score(cell):
            return min((cell[0] - h[0]) ** 2 + (cell[1] - h[1]) ** 2 for h in hunters)

        best_dir, best = None, score(me.pos)
        for d in DIR_ORDER:
            cand = (me.pos[0] + d[0], me.pos[1] + d[1])
            if not in_bounds(cand, self.cfg.grid) or cand in walls or cand in occupied:
                continue
            s = score(cand)
            if s > best:
                best, best_dir = s, d
        if best_dir is None:
            return MoveAction(0.0, 0.0)
        return MoveAction(dir_to_angle(best_dir), 1.0)
