"""Deterministic labeled multi-agent gridworld with temporally extended options.

Coordinates are (x, y) with x in [0, width) and y in [0, height); "up" is y+1.
Moves of all agents are applied simultaneously; a move off-grid or into an
obstacle cell resolves to staying put. Agents may share a cell; that surfaces
as the reserved `col` label so tasks opt in to forbidding collisions.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Sequence

Cell = tuple[int, int]
JointState = tuple[Cell, ...]

PROP_NAME_RE = re.compile(r"[a-z][a-z0-9_]*")
RESERVED_PROPS = ("o", "col")

MOVES: dict[str, tuple[int, int]] = {
    "up": (0, 1),
    "down": (0, -1),
    "left": (-1, 0),
    "right": (1, 0),
    "stay": (0, 0),
}
PRIMITIVE_ORDER = ("up", "down", "left", "right", "stay")
# fixed tie-break order for the goto / avoid policies
TIEBREAK_ORDER = ("up", "down", "left", "right")


@dataclass(frozen=True)
class LabelDef:
    """Cells that make a proposition true, optionally bound to one agent (0-based)."""

    cells: frozenset[Cell]
    agent: int | None = None


@dataclass(frozen=True)
class GridSpec:
    width: int
    height: int
    obstacles: frozenset[Cell]
    labels: dict[str, LabelDef]
    agent_starts: tuple[Cell, ...]
    agent_goals: tuple[Cell | None, ...]

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        if not self.agent_starts:
            raise ValueError("at least one agent required")
        if len(self.agent_goals) != len(self.agent_starts):
            raise ValueError("one goal entry per agent required (may be None)")
        for c in self.obstacles:
            if not self.in_grid(c):
                raise ValueError(f"obstacle outside grid: {c}")
        for c in self.agent_starts:
            if not self.in_grid(c):
                raise ValueError(f"agent start outside grid: {c}")
            if c in self.obstacles:
                raise ValueError(f"agent start on obstacle: {c}")
        for c in self.agent_goals:
            if c is not None and not self.in_grid(c):
                raise ValueError(f"agent goal outside grid: {c}")
        for name, ld in self.labels.items():
            if not PROP_NAME_RE.fullmatch(name):
                raise ValueError(f"invalid proposition name: {name!r}")
            if name in RESERVED_PROPS:
                raise ValueError(f"{name!r} is reserved (derived automatically)")
            if ld.agent is not None and not (0 <= ld.agent < len(self.agent_starts)):
                raise ValueError(f"label {name!r} bound to unknown agent {ld.agent}")
            for c in ld.cells:
                if not self.in_grid(c):
                    raise ValueError(f"label {name!r} cell outside grid: {c}")

    @property
    def n_agents(self) -> int:
        return len(self.agent_starts)

    def in_grid(self, c: Cell) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def apply_move(self, c: Cell, move: str) -> Cell:
        dx, dy = MOVES[move]
        nc = (c[0] + dx, c[1] + dy)
        if not self.in_grid(nc) or nc in self.obstacles:
            return c
        return nc

    def prop_names(self) -> tuple[str, ...]:
        return tuple(sorted(self.labels)) + RESERVED_PROPS


def check_state(g: GridSpec, s: JointState):
    if len(s) != g.n_agents:
        raise ValueError("joint state has wrong number of agents")
    for c in s:
        if not g.in_grid(c):
            raise ValueError(f"agent position outside grid: {c}")


def label(g: GridSpec, s: JointState) -> frozenset[str]:
    """Propositions true at the joint state.

    Agent-bound props fire when their agent stands on a labeled cell, unbound
    props when any agent does. Reserved: `o` iff any agent is on an obstacle
    cell, `col` iff two agents share a cell.
    """
    check_state(g, s)
    out = set()
    for name, ld in g.labels.items():
        if ld.agent is None:
            if any(pos in ld.cells for pos in s):
                out.add(name)
        elif s[ld.agent] in ld.cells:
            out.add(name)
    if any(pos in g.obstacles for pos in s):
        out.add("o")
    if len(set(s)) < len(s):
        out.add("col")
    return frozenset(out)


def manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def _threats(g: GridSpec, s: JointState, agent: int) -> list[Cell]:
    return list(g.obstacles) + [pos for i, pos in enumerate(s) if i != agent]


def _min_cheb(c: Cell, threats: Sequence[Cell]) -> float:
    return min((chebyshev(c, t) for t in threats), default=float("inf"))


@dataclass(frozen=True)
class OptionDef:
    """Temporally extended action: initiation set, internal policy, termination rule.

    kind "primitive": executable everywhere, emits one fixed move, terminates
      after exactly one step.
    kind "goto": executable unless already at `target`; each step takes the
      first move in up/down/left/right order that strictly reduces Manhattan
      distance to the target without entering an obstacle, else stays (stuck);
      terminates at the target or when stuck.
    kind "avoid": executable when the Chebyshev distance to the nearest
      obstacle or other agent is <= 1; moves to the adjacent free cell
      maximizing that distance (same tie-break order); terminates once the
      distance is >= 2 or no strictly improving move exists.
    """

    name: str
    kind: str
    move: str | None = None
    target: Cell | None = None

    def __post_init__(self):
        if self.kind == "primitive":
            if self.move not in MOVES:
                raise ValueError(f"primitive option needs a move, got {self.move!r}")
        elif self.kind == "goto":
            if self.target is None:
                raise ValueError("goto option needs a target cell")
        elif self.kind != "avoid":
            raise ValueError(f"unknown option kind: {self.kind!r}")

    def initiation(self, g: GridSpec, s: JointState, agent: int) -> bool:
        if self.kind == "primitive":
            return True
        if self.kind == "goto":
            return s[agent] != self.target
        return _min_cheb(s[agent], _threats(g, s, agent)) <= 1

    def policy(self, g: GridSpec, s: JointState, agent: int) -> str:
        if self.kind == "primitive":
            return self.move
        if self.kind == "goto":
            return self._goto_move(g, s[agent]) or "stay"
        return self._avoid_move(g, s, agent) or "stay"

    def termination(self, g: GridSpec, s: JointState, agent: int) -> bool:
        if self.kind == "primitive":
            return True
        if self.kind == "goto":
            return s[agent] == self.target or self._goto_move(g, s[agent]) is None
        threats = _threats(g, s, agent)
        here = _min_cheb(s[agent], threats)
        if here >= 2:
            return True
        return self._avoid_move(g, s, agent, strictly_better_than=here) is None

    def _goto_move(self, g: GridSpec, pos: Cell) -> str | None:
        if pos == self.target:
            return None
        base = manhattan(pos, self.target)
        for move in TIEBREAK_ORDER:
            dx, dy = MOVES[move]
            nc = (pos[0] + dx, pos[1] + dy)
            if not g.in_grid(nc) or nc in g.obstacles:
                continue
            if manhattan(nc, self.target) < base:
                return move
        return None

    def _avoid_move(
        self, g: GridSpec, s: JointState, agent: int, strictly_better_than=None
    ) -> str | None:
        threats = _threats(g, s, agent)
        best_move = None
        best = strictly_better_than if strictly_better_than is not None else -1
        for move in TIEBREAK_ORDER:
            dx, dy = MOVES[move]
            nc = (s[agent][0] + dx, s[agent][1] + dy)
            if not g.in_grid(nc) or nc in g.obstacles:
                continue
            d = _min_cheb(nc, threats)
            if d > best:
                best = d
                best_move = move
        return best_move


def primitive_options() -> tuple[OptionDef, ...]:
    return tuple(OptionDef(m, "primitive", move=m) for m in PRIMITIVE_ORDER)


def build_menu(g: GridSpec, agent: int, options_enabled: bool) -> tuple[OptionDef, ...]:
    """Option menu for one agent: primitives, plus goto/avoid when enabled."""
    menu = list(primitive_options())
    if options_enabled:
        goal = g.agent_goals[agent]
        if goal is not None:
            menu.append(OptionDef("goto", "goto", target=goal))
        menu.append(OptionDef("avoid", "avoid"))
    return tuple(menu)


def build_menus(g: GridSpec, options_enabled: bool) -> tuple[tuple[OptionDef, ...], ...]:
    return tuple(build_menu(g, i, options_enabled) for i in range(g.n_agents))


def executable_options(
    g: GridSpec, s: JointState, agent: int, menu: Sequence[OptionDef]
) -> list[int]:
    """Indexes into the menu whose initiation predicate holds at (s, agent)."""
    check_state(g, s)
    return [i for i, opt in enumerate(menu) if opt.initiation(g, s, agent)]


def permissible_joint_options(
    g: GridSpec,
    s: JointState,
    menus: Sequence[Sequence[OptionDef]],
    active: Sequence[int | None] | None = None,
) -> list[tuple[int, ...]]:
    """Joint options selectable now, in lexicographic (joint id) order.

    Agents whose option is still active keep it; only freed agents vary over
    their executable sets. `active[i]` is the menu index of agent i's running
    option, or None when the agent is free.
    """
    per_agent: list[list[int]] = []
    for i in range(g.n_agents):
        if active is not None and active[i] is not None:
            per_agent.append([active[i]])
        else:
            per_agent.append(executable_options(g, s, i, menus[i]))
    combos: list[tuple[int, ...]] = [()]
    for choices in per_agent:
        combos = [c + (x,) for c in combos for x in choices]
    return combos


def step(
    g: GridSpec,
    s: JointState,
    opts: Sequence[OptionDef],
    newly_started: Sequence[bool] | None = None,
) -> tuple[JointState, tuple[bool, ...]]:
    """Advance one time step: every agent's option emits one primitive move.

    Moves are simultaneous; blocked moves resolve to staying. Returns the next
    joint state and each agent's termination flag evaluated there. An agent
    starting a fresh option must satisfy its initiation set.
    """
    check_state(g, s)
    if len(opts) != g.n_agents:
        raise ValueError("one option per agent required")
    if newly_started is None:
        newly_started = [True] * g.n_agents
    for i, opt in enumerate(opts):
        if newly_started[i] and not opt.initiation(g, s, i):
            raise ValueError(f"option {opt.name!r} not initiable for agent {i} at {s[i]}")
    moves = [opt.policy(g, s, i) for i, opt in enumerate(opts)]
    s_next = tuple(g.apply_move(s[i], moves[i]) for i in range(g.n_agents))
    flags = tuple(opt.termination(g, s_next, i) for i, opt in enumerate(opts))
    return s_next, flags


# --- scenario files -----------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    grid: GridSpec
    formula: str


def scenario_from_dict(data: dict) -> Scenario:
    """Build a scenario from its JSON form.

    Label entries bind to agents by 1-based number (matching names like g1);
    omit "agent" for a global label.
    """
    try:
        agents = data["agents"]
        width, height = int(data["width"]), int(data["height"])
    except KeyError as e:
        raise ValueError(f"scenario missing field: {e}") from None
    starts = tuple((int(a["start"][0]), int(a["start"][1])) for a in agents)
    goals = tuple(
        (int(a["goal"][0]), int(a["goal"][1])) if a.get("goal") is not None else None
        for a in agents
    )
    obstacles = frozenset((int(c[0]), int(c[1])) for c in data.get("obstacles", []))
    labels = {}
    for name, ld in data.get("labels", {}).items():
        agent_no = ld.get("agent")
        labels[name] = LabelDef(
            cells=frozenset((int(c[0]), int(c[1])) for c in ld["cells"]),
            agent=None if agent_no is None else int(agent_no) - 1,
        )
    grid = GridSpec(
        width=width,
        height=height,
        obstacles=obstacles,
        labels=labels,
        agent_starts=starts,
        agent_goals=goals,
    )
    formula = data.get("formula", "")
    if not formula:
        raise ValueError("scenario missing task formula")
    return Scenario(grid=grid, formula=formula)


def scenario_to_dict(sc: Scenario) -> dict:
    g = sc.grid
    return {
        "width": g.width,
        "height": g.height,
        "obstacles": [list(c) for c in sorted(g.obstacles)],
        "agents": [
            {"start": list(g.agent_starts[i]), "goal": None if g.agent_goals[i] is None else list(g.agent_goals[i])}
            for i in range(g.n_agents)
        ],
        "labels": {
            name: {
                "cells": [list(c) for c in sorted(ld.cells)],
                **({} if ld.agent is None else {"agent": ld.agent + 1}),
            }
            for name, ld in sorted(g.labels.items())
        },
        "formula": sc.formula,
    }


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))


def save_scenario(sc: Scenario, path):
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(sc), fh, indent=2)
        fh.write("\n")


def canonical_scenario() -> Scenario:
    """The 5x5 two-agent reach-avoid desk scenario used across tests and docs."""
    return scaled_scenario(5)


def scaled_scenario(n: int) -> Scenario:
    """n x n version of the desk scenario: opposite corners, one center obstacle."""
    if n < 3:
        raise ValueError("scenario needs n >= 3")
    c = n - 1
    grid = GridSpec(
        width=n,
        height=n,
        obstacles=frozenset({(n // 2, n // 2)}),
        labels={
            "g1": LabelDef(cells=frozenset({(c, c)}), agent=0),
            "g2": LabelDef(cells=frozenset({(0, c)}), agent=1),
        },
        agent_starts=((0, 0), (c, 0)),
        agent_goals=((c, c), (0, c)),
    )
    return Scenario(grid=grid, formula="F g1 & F g2 & G ! o & G ! col")
