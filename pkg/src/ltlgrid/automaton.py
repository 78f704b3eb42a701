"""Büchi automata: tableau translation from NNF LTL, lasso acceptance, HOA text."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .graphs import tarjan_sccs
from .ltl import (
    And,
    FalseF,
    Finally,
    Formula,
    Globally,
    LassoWord,
    Next,
    Not,
    Or,
    Prop,
    Release,
    TrueF,
    Until,
    is_nnf,
    print_formula,
    props_of,
    to_nnf,
)

# Guards are plain boolean formulas over the AP universe: TrueF, FalseF, Prop,
# Not, And, Or. They are kept as formula trees; universes here are small enough
# that a truth table over 2^|AP| labels is the cheap canonical form.


def guard_satisfied(guard: Formula, label: frozenset[str]) -> bool:
    if isinstance(guard, TrueF):
        return True
    if isinstance(guard, FalseF):
        return False
    if isinstance(guard, Prop):
        return guard.name in label
    if isinstance(guard, Not):
        return not guard_satisfied(guard.operand, label)
    if isinstance(guard, And):
        return guard_satisfied(guard.left, label) and guard_satisfied(guard.right, label)
    if isinstance(guard, Or):
        return guard_satisfied(guard.left, label) or guard_satisfied(guard.right, label)
    raise TypeError(f"not a guard formula: {guard!r}")


def label_mask(label: frozenset[str], ap: tuple[str, ...]) -> int:
    """Bitmask of the label restricted to the AP universe; foreign props ignored."""
    m = 0
    for i, name in enumerate(ap):
        if name in label:
            m |= 1 << i
    return m


def guard_table(guard: Formula, ap: tuple[str, ...]) -> int:
    """Truth table bitmask: bit m set iff the label with mask m satisfies the guard."""
    table = 0
    for m in range(1 << len(ap)):
        label = frozenset(ap[i] for i in range(len(ap)) if m & (1 << i))
        if guard_satisfied(guard, label):
            table |= 1 << m
    return table


@dataclass(frozen=True)
class Edge:
    src: int
    guard: Formula
    dst: int


class BuchiAutomaton:
    """Nondeterministic Büchi automaton with guard-labeled edges.

    State-based acceptance: a run is accepting iff it visits a state in
    `accepting` infinitely often. Immutable after construction.
    """

    def __init__(
        self,
        num_states: int,
        initial: int,
        edges: list[Edge],
        accepting: frozenset[int],
        ap: tuple[str, ...],
    ):
        if not (0 <= initial < num_states):
            raise ValueError("initial state out of range")
        for e in edges:
            if not (0 <= e.src < num_states and 0 <= e.dst < num_states):
                raise ValueError(f"edge endpoint out of range: {e}")
        if not accepting <= set(range(num_states)):
            raise ValueError("accepting set contains unknown states")
        self.num_states = num_states
        self.initial = initial
        self.edges = list(edges)
        self.accepting = frozenset(accepting)
        self.ap = tuple(ap)
        self._out: list[list[Edge]] = [[] for _ in range(num_states)]
        for e in self.edges:
            self._out[e.src].append(e)
        self._succ_cache: dict[tuple[int, int], tuple[int, ...]] = {}

    @property
    def states(self) -> range:
        return range(self.num_states)

    def out_edges(self, q: int) -> list[Edge]:
        if not (0 <= q < self.num_states):
            raise ValueError(f"unknown state id: {q}")
        return self._out[q]

    def successors(self, q: int, label) -> frozenset[int]:
        """States reachable from q on one letter; empty means the label is rejected."""
        return frozenset(self.successors_masked(q, label_mask(frozenset(label), self.ap)))

    def successors_masked(self, q: int, mask: int) -> tuple[int, ...]:
        if not (0 <= q < self.num_states):
            raise ValueError(f"unknown state id: {q}")
        key = (q, mask)
        cached = self._succ_cache.get(key)
        if cached is not None:
            return cached
        label = frozenset(self.ap[i] for i in range(len(self.ap)) if mask & (1 << i))
        succ = tuple(
            sorted({e.dst for e in self._out[q] if guard_satisfied(e.guard, label)})
        )
        self._succ_cache[key] = succ
        return succ

    def structure_key(self):
        """Canonical tuple for isomorphism-by-construction comparisons."""
        table_edges = sorted(
            (e.src, guard_table(e.guard, self.ap), e.dst) for e in self.edges
        )
        return (
            self.num_states,
            self.initial,
            tuple(sorted(self.accepting)),
            self.ap,
            tuple(table_edges),
        )


class GeneralizedBuchi:
    """Intermediate automaton with one acceptance set per Until obligation."""

    def __init__(
        self,
        num_states: int,
        initial: int,
        edges: list[Edge],
        acceptance_sets: tuple[frozenset[int], ...],
        ap: tuple[str, ...],
    ):
        self.num_states = num_states
        self.initial = initial
        self.edges = list(edges)
        self.acceptance_sets = tuple(acceptance_sets)
        self.ap = tuple(ap)
        self._out: list[list[Edge]] = [[] for _ in range(num_states)]
        for e in self.edges:
            self._out[e.src].append(e)

    def successors(self, q: int, label: frozenset[str]) -> list[int]:
        return sorted({e.dst for e in self._out[q] if guard_satisfied(e.guard, label)})


def successors(a: BuchiAutomaton, q: int, label) -> frozenset[int]:
    return a.successors(q, label)


# --- tableau construction ----------------------------------------------------


def _desugar(f: Formula) -> Formula:
    """Rewrite F/G to Until/Release so the tableau handles four temporal kinds."""
    if isinstance(f, (TrueF, FalseF, Prop)):
        return f
    if isinstance(f, Not):
        return Not(_desugar(f.operand))
    if isinstance(f, And):
        return And(_desugar(f.left), _desugar(f.right))
    if isinstance(f, Or):
        return Or(_desugar(f.left), _desugar(f.right))
    if isinstance(f, Next):
        return Next(_desugar(f.operand))
    if isinstance(f, Finally):
        return Until(TrueF(), _desugar(f.operand))
    if isinstance(f, Globally):
        return Release(FalseF(), _desugar(f.operand))
    if isinstance(f, Until):
        return Until(_desugar(f.left), _desugar(f.right))
    if isinstance(f, Release):
        return Release(_desugar(f.left), _desugar(f.right))
    raise TypeError(f"not a formula: {f!r}")


def _is_literal(f: Formula) -> bool:
    return isinstance(f, (TrueF, FalseF, Prop)) or (
        isinstance(f, Not) and isinstance(f.operand, Prop)
    )


def _negate_literal(f: Formula) -> Formula:
    if isinstance(f, Not):
        return f.operand
    return Not(f)


def _sort_key(f: Formula) -> str:
    # total order independent of hash randomization, for deterministic output
    return print_formula(f)


class _Node:
    __slots__ = ("incoming", "new", "old", "next")

    def __init__(self, incoming, new, old, nxt):
        self.incoming: set[int] = incoming
        self.new: set[Formula] = new
        self.old: set[Formula] = old
        self.next: set[Formula] = nxt


_INIT = -1


def tableau_gba(f: Formula, ap: tuple[str, ...]) -> GeneralizedBuchi:
    """Classic expand/closure tableau from NNF LTL to a generalized Büchi automaton.

    State 0 of the result is a fresh initial state; the word letter at position
    i is consumed by the edge taken at step i, guarded by the conjunction of
    literals the target tableau node asserts.
    """
    f = _desugar(to_nnf(f))
    missing = props_of(f) - set(ap)
    if missing:
        raise ValueError(f"formula props missing from universe: {sorted(missing)}")

    done: list[tuple[frozenset[Formula], frozenset[Formula], set[int]]] = []
    done_index: dict[tuple[frozenset[Formula], frozenset[Formula]], int] = {}

    def expand(node: _Node):
        if not node.new:
            key = (frozenset(node.old), frozenset(node.next))
            existing = done_index.get(key)
            if existing is not None:
                done[existing][2].update(node.incoming)
                return
            node_id = len(done)
            done.append((key[0], key[1], set(node.incoming)))
            done_index[key] = node_id
            expand(_Node({node_id}, set(node.next), set(), set()))
            return
        eta = min(node.new, key=_sort_key)
        node.new.discard(eta)
        if _is_literal(eta):
            if isinstance(eta, FalseF) or _negate_literal(eta) in node.old:
                return  # contradiction: branch dies
            node.old.add(eta)
            expand(node)
        elif isinstance(eta, And):
            node.new |= {eta.left, eta.right} - node.old
            node.old.add(eta)
            expand(node)
        elif isinstance(eta, Or):
            expand(
                _Node(
                    set(node.incoming),
                    node.new | ({eta.left} - node.old),
                    node.old | {eta},
                    set(node.next),
                )
            )
            expand(
                _Node(
                    set(node.incoming),
                    node.new | ({eta.right} - node.old),
                    node.old | {eta},
                    set(node.next),
                )
            )
        elif isinstance(eta, Next):
            node.old.add(eta)
            node.next.add(eta.operand)
            expand(node)
        elif isinstance(eta, Until):
            expand(
                _Node(
                    set(node.incoming),
                    node.new | ({eta.left} - node.old),
                    node.old | {eta},
                    node.next | {eta},
                )
            )
            expand(
                _Node(
                    set(node.incoming),
                    node.new | ({eta.right} - node.old),
                    node.old | {eta},
                    set(node.next),
                )
            )
        elif isinstance(eta, Release):
            expand(
                _Node(
                    set(node.incoming),
                    node.new | ({eta.right} - node.old),
                    node.old | {eta},
                    node.next | {eta},
                )
            )
            expand(
                _Node(
                    set(node.incoming),
                    node.new | ({eta.left, eta.right} - node.old),
                    node.old | {eta},
                    set(node.next),
                )
            )
        else:
            raise TypeError(f"unexpected formula in tableau: {eta!r}")

    expand(_Node({_INIT}, {f}, set(), set()))

    # node ids 0..m-1 become automaton states 1..m; state 0 is the fresh initial
    def guard_of(old: frozenset[Formula]) -> Formula:
        lits = sorted(
            (g for g in old if _is_literal(g) and not isinstance(g, TrueF)),
            key=_sort_key,
        )
        guard: Formula = TrueF()
        for lit in lits:
            guard = lit if isinstance(guard, TrueF) else And(guard, lit)
        return guard

    edges: list[Edge] = []
    for node_id, (old, _nxt, incoming) in enumerate(done):
        guard = guard_of(old)
        for src in sorted(incoming):
            edges.append(Edge(0 if src == _INIT else src + 1, guard, node_id + 1))

    untils = sorted(
        {g for g in _subformulas(f) if isinstance(g, Until)}, key=_sort_key
    )
    if untils:
        acceptance = tuple(
            frozenset(
                node_id + 1
                for node_id, (old, _nxt, _inc) in enumerate(done)
                if u not in old or u.right in old
            )
            for u in untils
        )
    else:
        acceptance = (frozenset(range(1, len(done) + 1)),)

    return GeneralizedBuchi(len(done) + 1, 0, edges, acceptance, ap)


def _subformulas(f: Formula) -> set[Formula]:
    out = {f}
    if isinstance(f, (Not, Next, Finally, Globally)):
        out |= _subformulas(f.operand)
    elif isinstance(f, (And, Or, Until, Release)):
        out |= _subformulas(f.left) | _subformulas(f.right)
    return out


# --- degeneralization and simplification -------------------------------------


def degeneralize(gba: GeneralizedBuchi) -> BuchiAutomaton:
    """Counter product over the acceptance sets.

    From (q, j) the counter advances to j+1 (mod k) iff q is in set j; a state
    (q, k-1) with q in the last set is accepting, so visiting accepting states
    infinitely often forces every set to be hit infinitely often.
    """
    k = len(gba.acceptance_sets)
    sets = gba.acceptance_sets
    state_ids: dict[tuple[int, int], int] = {}
    order: list[tuple[int, int]] = []

    def intern(qj: tuple[int, int]) -> int:
        if qj not in state_ids:
            state_ids[qj] = len(order)
            order.append(qj)
        return state_ids[qj]

    start = intern((gba.initial, 0))
    edges: list[Edge] = []
    frontier = [start]
    seen = {start}
    while frontier:
        sid = frontier.pop()
        q, j = order[sid]
        j_next = (j + 1) % k if q in sets[j] else j
        for e in sorted(gba._out[q], key=lambda e: (_sort_key(e.guard), e.dst)):
            tid = intern((e.dst, j_next))
            edges.append(Edge(sid, e.guard, tid))
            if tid not in seen:
                seen.add(tid)
                frontier.append(tid)
    accepting = frozenset(
        sid for sid, (q, j) in enumerate(order) if j == k - 1 and q in sets[k - 1]
    )
    edges.sort(key=lambda e: (e.src, _sort_key(e.guard), e.dst))
    return BuchiAutomaton(len(order), start, edges, accepting, gba.ap)


def _simplify(a: BuchiAutomaton) -> BuchiAutomaton:
    """Quotient trivially-bisimilar states, fold the initial state, prune, renumber."""
    num = a.num_states
    edge_set = {(e.src, guard_table(e.guard, a.ap), e.dst) for e in a.edges}
    guard_repr: dict[int, Formula] = {}
    for e in a.edges:
        t = guard_table(e.guard, a.ap)
        if t not in guard_repr or _sort_key(e.guard) < _sort_key(guard_repr[t]):
            guard_repr[t] = e.guard
    edge_set = {(s, t, d) for (s, t, d) in edge_set if t != 0}  # unsatisfiable
    accepting = set(a.accepting)
    initial = a.initial
    state_alive = set(range(num))

    changed = True
    while changed:
        changed = False
        sig: dict[tuple, list[int]] = {}
        for s in sorted(state_alive):
            out = tuple(sorted((t, d) for (src, t, d) in edge_set if src == s))
            sig.setdefault((s in accepting, out), []).append(s)
        remap = {}
        for members in sig.values():
            if len(members) > 1:
                rep = members[0]
                for m in members[1:]:
                    remap[m] = rep
        if remap:
            changed = True
            edge_set = {
                (remap.get(s, s), t, remap.get(d, d)) for (s, t, d) in edge_set
            }
            initial = remap.get(initial, initial)
            accepting = {remap.get(s, s) for s in accepting}
            state_alive -= set(remap)

    # the initial state is entered exactly once, so its acceptance flag is
    # irrelevant: fold it into any state with the same outgoing behavior
    has_incoming = {d for (_s, _t, d) in edge_set}
    if initial not in has_incoming:
        init_out = tuple(sorted((t, d) for (s, t, d) in edge_set if s == initial))
        for s in sorted(state_alive):
            if s == initial:
                continue
            out = tuple(sorted((t, d) for (src, t, d) in edge_set if src == s))
            if out == init_out:
                edge_set = {e for e in edge_set if e[0] != initial}
                state_alive.discard(initial)
                accepting.discard(initial)
                initial = s
                break

    # prune unreachable, renumber in BFS order from the initial state
    adj: dict[int, list[tuple[int, int]]] = {}
    for s, t, d in sorted(edge_set):
        adj.setdefault(s, []).append((t, d))
    new_id = {initial: 0}
    bfs = [initial]
    i = 0
    while i < len(bfs):
        s = bfs[i]
        i += 1
        for _t, d in adj.get(s, []):
            if d not in new_id:
                new_id[d] = len(bfs)
                bfs.append(d)
    edges = [
        Edge(new_id[s], guard_repr[t], new_id[d])
        for (s, t, d) in sorted(edge_set)
        if s in new_id and d in new_id
    ]
    edges.sort(key=lambda e: (e.src, _sort_key(e.guard), e.dst))
    return BuchiAutomaton(
        len(bfs),
        0,
        edges,
        frozenset(new_id[s] for s in accepting if s in new_id),
        a.ap,
    )


def translate(f: Formula, ap_universe) -> BuchiAutomaton:
    """NNF LTL formula to a nondeterministic Büchi automaton over the universe.

    Tableau to a generalized automaton (one acceptance set per Until), then a
    counter-product degeneralization, then pruning/quotienting. Every state of
    the result is reachable from the initial state.
    """
    ap = tuple(ap_universe)
    if len(set(ap)) != len(ap):
        raise ValueError("duplicate propositions in universe")
    g = to_nnf(f)
    if not is_nnf(g):
        raise ValueError("normalization failed to produce NNF")
    return _simplify(degeneralize(tableau_gba(g, ap)))


# --- lasso acceptance ---------------------------------------------------------


def _lasso_cyclic_sccs(succ_fn, initial_states, word: LassoWord):
    """SCCs of the (state, loop position) product reachable after the prefix.

    Yields (scc_states, is_cyclic) where scc_states is the set of automaton
    states appearing in the SCC.
    """
    loop_len = len(word.loop)
    frontier = set(initial_states)
    for lab in word.prefix:
        nxt = set()
        for q in frontier:
            nxt.update(succ_fn(q, lab))
        frontier = nxt
        if not frontier:
            return
    roots = sorted((q, 0) for q in frontier)

    succ_cache: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def product_succ(node):
        cached = succ_cache.get(node)
        if cached is None:
            q, j = node
            j2 = (j + 1) % loop_len
            cached = [(q2, j2) for q2 in succ_fn(q, word.loop[j])]
            succ_cache[node] = cached
        return cached

    # restrict to reachable product nodes
    seen = set(roots)
    frontier2 = list(roots)
    while frontier2:
        node = frontier2.pop()
        for m in product_succ(node):
            if m not in seen:
                seen.add(m)
                frontier2.append(m)

    for scc in tarjan_sccs(sorted(seen), product_succ):
        members = set(scc)
        cyclic = len(scc) > 1 or any(m in members for m in product_succ(scc[0]))
        yield {q for q, _j in scc}, cyclic


def accepts_lasso(a: BuchiAutomaton, w: LassoWord) -> bool:
    """True iff some run over prefix.loop^omega hits an accepting state infinitely often."""

    def succ(q, lab):
        return a.successors_masked(q, label_mask(lab, a.ap))

    for states, cyclic in _lasso_cyclic_sccs(succ, [a.initial], w):
        if cyclic and states & a.accepting:
            return True
    return False


def gba_accepts_lasso(gba: GeneralizedBuchi, w: LassoWord) -> bool:
    """Generalized acceptance: some reachable cycle intersects every acceptance set."""
    for states, cyclic in _lasso_cyclic_sccs(gba.successors, [gba.initial], w):
        if cyclic and all(states & fs for fs in gba.acceptance_sets):
            return True
    return False


# --- HOA v1 text form ----------------------------------------------------------


def _guard_to_hoa(g: Formula, ap: tuple[str, ...]) -> str:
    def disj(f):
        if isinstance(f, Or):
            return f"{disj(f.left)} | {disj(f.right)}"
        return conj(f)

    def conj(f):
        if isinstance(f, And):
            return f"{conj(f.left)} & {conj(f.right)}"
        return unary(f)

    def unary(f):
        if isinstance(f, TrueF):
            return "t"
        if isinstance(f, FalseF):
            return "f"
        if isinstance(f, Prop):
            return str(ap.index(f.name))
        if isinstance(f, Not):
            return f"!{unary(f.operand)}"
        return f"({disj(f)})"

    return disj(g)


def serialize_hoa(a: BuchiAutomaton) -> str:
    """HOA v1 text with state-based Büchi acceptance (`Acceptance: 1 Inf(0)`)."""
    lines = [
        "HOA: v1",
        f"States: {a.num_states}",
        f"Start: {a.initial}",
        "AP: {} {}".format(len(a.ap), " ".join(f'"{p}"' for p in a.ap)).rstrip(),
        "acc-name: Buchi",
        "Acceptance: 1 Inf(0)",
        "--BODY--",
    ]
    for q in a.states:
        mark = " {0}" if q in a.accepting else ""
        lines.append(f"State: {q}{mark}")
        for e in a.out_edges(q):
            lines.append(f"[{_guard_to_hoa(e.guard, a.ap)}] {e.dst}")
    lines.append("--END--")
    return "\n".join(lines) + "\n"


class HoaParseError(ValueError):
    pass


class _GuardParser:
    def __init__(self, text: str, ap: tuple[str, ...]):
        self.toks = re.findall(r"\d+|[tf!&|()]", text.replace(" ", ""))
        if "".join(self.toks) != text.replace(" ", ""):
            raise HoaParseError(f"bad guard expression: {text!r}")
        self.ap = ap
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else None

    def take(self):
        t = self.peek()
        self.i += 1
        return t

    def parse(self) -> Formula:
        f = self.disj()
        if self.peek() is not None:
            raise HoaParseError(f"trailing guard tokens: {self.toks[self.i:]}")
        return f

    def disj(self):
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self):
        f = self.unary()
        while self.peek() == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self):
        t = self.peek()
        if t == "!":
            self.take()
            return Not(self.unary())
        if t == "(":
            self.take()
            f = self.disj()
            if self.take() != ")":
                raise HoaParseError("unbalanced parens in guard")
            return f
        if t == "t":
            self.take()
            return TrueF()
        if t == "f":
            self.take()
            return FalseF()
        if t is not None and t.isdigit():
            self.take()
            idx = int(t)
            if idx >= len(self.ap):
                raise HoaParseError(f"AP index {idx} out of range")
            return Prop(self.ap[idx])
        raise HoaParseError(f"bad guard token: {t!r}")


def parse_hoa(text: str) -> BuchiAutomaton:
    """Parse HOA v1 with state-based Büchi acceptance, as written by serialize_hoa."""
    num_states = None
    initial = None
    ap: tuple[str, ...] | None = None
    acceptance_ok = False
    lines = [ln.strip() for ln in text.splitlines()]
    body_at = None
    for idx, ln in enumerate(lines):
        if ln == "--BODY--":
            body_at = idx
            break
        if not ln or ln.startswith(("acc-name:", "name:", "properties:", "tool:", "HOA:")):
            continue
        if ln.startswith("States:"):
            num_states = int(ln.split()[1])
        elif ln.startswith("Start:"):
            parts = ln.split()[1:]
            if len(parts) != 1:
                raise HoaParseError("exactly one start state supported")
            initial = int(parts[0])
        elif ln.startswith("AP:"):
            names = re.findall(r'"([^"]*)"', ln)
            count = int(ln.split()[1])
            if count != len(names):
                raise HoaParseError("AP count does not match names")
            ap = tuple(names)
        elif ln.startswith("Acceptance:"):
            if ln.split(":", 1)[1].split() != ["1", "Inf(0)"]:
                raise HoaParseError("only Buchi acceptance '1 Inf(0)' supported")
            acceptance_ok = True
        else:
            raise HoaParseError(f"unsupported header line: {ln!r}")
    if body_at is None or num_states is None or initial is None or ap is None:
        raise HoaParseError("missing required HOA headers or --BODY--")
    if not acceptance_ok:
        raise HoaParseError("missing Acceptance header")

    edges: list[Edge] = []
    accepting = set()
    cur = None
    for ln in lines[body_at + 1 :]:
        if not ln:
            continue
        if ln == "--END--":
            break
        if ln.startswith("State:"):
            m = re.fullmatch(r"State:\s*(\d+)\s*(\{(?:\s*\d+\s*)+\})?", ln)
            if m is None:
                raise HoaParseError(f"bad state line: {ln!r}")
            cur = int(m.group(1))
            if m.group(2):
                sets = {int(x) for x in re.findall(r"\d+", m.group(2))}
                if sets != {0}:
                    raise HoaParseError("only acceptance set 0 supported")
                accepting.add(cur)
        else:
            m = re.fullmatch(r"\[([^\]]*)\]\s*(\d+)", ln)
            if m is None or cur is None:
                raise HoaParseError(f"bad edge line: {ln!r}")
            guard = _GuardParser(m.group(1), ap).parse()
            edges.append(Edge(cur, guard, int(m.group(2))))
    return BuchiAutomaton(num_states, initial, edges, frozenset(accepting), ap)
