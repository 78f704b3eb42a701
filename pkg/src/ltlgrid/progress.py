"""Progress levels over automaton states: SCC condensation, BFS annotation, shaping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .automaton import BuchiAutomaton
from .graphs import tarjan_sccs

UNREACHABLE = math.inf


def tarjan_scc(a: BuchiAutomaton) -> tuple[dict[int, int], list[tuple[int, int]]]:
    """SCC id per state plus the deduplicated condensation edge list.

    Two states share an id iff mutually reachable; a single state without a
    self-loop is its own component. SCC ids are assigned in topological order
    of the condensation, which is acyclic by construction.
    """
    adj: list[list[int]] = [[] for _ in range(a.num_states)]
    for e in a.edges:
        if e.dst not in adj[e.src]:
            adj[e.src].append(e.dst)
    for lst in adj:
        lst.sort()

    components = tarjan_sccs(range(a.num_states), lambda q: adj[q])
    components.reverse()  # topological order of the condensation
    scc_id = {}
    for cid, comp in enumerate(components):
        for q in comp:
            scc_id[q] = cid

    cond_edges = sorted(
        {
            (scc_id[src], scc_id[dst])
            for src in range(a.num_states)
            for dst in adj[src]
            if scc_id[src] != scc_id[dst]
        }
    )
    for u, v in cond_edges:
        if (v, u) in cond_edges or u == v:
            raise AssertionError("condensation is not acyclic")
    return scc_id, cond_edges


@dataclass(frozen=True)
class ProgressAnnotation:
    """Integer progress level per automaton state.

    Levels are BFS depth over the SCC condensation starting from the initial
    state's component; all states of one component share a level. States not
    reachable from the initial state (possible only in hand-built automata)
    carry the UNREACHABLE sentinel and are listed in `unreachable`.
    """

    level: dict[int, float]
    scc_id: dict[int, int]
    num_levels: int
    unreachable: frozenset[int]
    cond_edges: tuple[tuple[int, int], ...] = field(default=())

    def max_level(self) -> int:
        return self.num_levels - 1

    def dump_text(self) -> str:
        lines = []
        for q in sorted(self.level):
            lvl = self.level[q]
            shown = "unreachable" if lvl == UNREACHABLE else str(int(lvl))
            lines.append(f"state {q} scc {self.scc_id[q]} level {shown}")
        for u, v in self.cond_edges:
            lines.append(f"condensation {u} -> {v}")
        return "\n".join(lines) + "\n"


def annotate_progress(a: BuchiAutomaton) -> ProgressAnnotation:
    """Annotate every state with its progress level.

    The initial state's component gets level 0; components adjacent to a
    level-k component get level k+1 unless already annotated (breadth-first
    over the condensation, so the first annotation is the smallest).
    """
    scc_id, cond_edges = tarjan_scc(a)
    n_sccs = max(scc_id.values()) + 1 if scc_id else 0
    cond_adj: list[list[int]] = [[] for _ in range(n_sccs)]
    for u, v in cond_edges:
        cond_adj[u].append(v)

    scc_level: dict[int, int] = {scc_id[a.initial]: 0}
    frontier = [scc_id[a.initial]]
    while frontier:
        boundary = []
        for cid in frontier:
            for nb in cond_adj[cid]:
                if nb not in scc_level:
                    scc_level[nb] = scc_level[cid] + 1
                    boundary.append(nb)
        frontier = boundary

    level: dict[int, float] = {}
    unreachable = set()
    for q in range(a.num_states):
        cid = scc_id[q]
        if cid in scc_level:
            level[q] = scc_level[cid]
        else:
            level[q] = UNREACHABLE
            unreachable.add(q)
    finite = [lv for lv in level.values() if lv != UNREACHABLE]
    return ProgressAnnotation(
        level=level,
        scc_id=scc_id,
        num_levels=int(max(finite)) + 1 if finite else 0,
        unreachable=frozenset(unreachable),
        cond_edges=tuple(cond_edges),
    )


@dataclass(frozen=True)
class ShapingConfig:
    """How automaton progress turns into reward.

    proportional: multiplier * level(q_next) whenever the level increases,
      0 otherwise. Paying on every accepted transition (including self-loops)
      would make loitering one level below the goal worth multiplier*l/(1-gamma),
      strictly better than finishing, so the reward is tied to progress events.
    potential: gamma * Phi(q_next) - Phi(q_prev) with Phi = multiplier * level;
      policy-invariant in the usual sense.
    terminal: multiplier * max_level only when the top level is reached; the
      unshaped baseline used for shaping-benefit comparisons.
    """

    multiplier: float = 50.0
    mode: str = "proportional"
    gamma: float = 0.9

    def __post_init__(self):
        if self.multiplier <= 0:
            raise ValueError("multiplier must be positive")
        if not (0 < self.gamma <= 1):
            raise ValueError("gamma must be in (0, 1]")
        if self.mode not in ("proportional", "potential", "terminal"):
            raise ValueError(f"unknown shaping mode: {self.mode!r}")


def shaped_reward(
    q_next: int, ann: ProgressAnnotation, cfg: ShapingConfig, q_prev: int
) -> float:
    """Reward for an accepted automaton transition q_prev -> q_next."""
    nxt, prev = ann.level[q_next], ann.level[q_prev]
    if nxt == UNREACHABLE or prev == UNREACHABLE:
        raise ValueError("shaped reward over unreachable automaton states")
    if cfg.mode == "proportional":
        return cfg.multiplier * nxt if nxt > prev else 0.0
    if cfg.mode == "potential":
        return cfg.gamma * cfg.multiplier * nxt - cfg.multiplier * prev
    # terminal
    return cfg.multiplier * nxt if nxt == ann.max_level() and nxt > prev else 0.0
