"""Product-state Q-learning over joint options with experience replay.

The environment state is augmented with the task automaton state on the fly:
each accepted one-step transition becomes an experience over (joint state,
automaton state) pairs, rewarded by automaton progress. Agents whose option
has not terminated keep it, so the value of finishing an option cascades back
along the whole stretch it was active via the bootstrap.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from random import Random
from typing import Callable, Sequence

from .automaton import BuchiAutomaton, label_mask
from .progress import UNREACHABLE, ProgressAnnotation, ShapingConfig, shaped_reward
from .world import (
    Cell,
    GridSpec,
    JointState,
    OptionDef,
    executable_options,
    label,
    step as world_step,
)


@dataclass(frozen=True)
class AugmentedState:
    s: JointState
    q: int


@dataclass(frozen=True)
class Experience:
    """One accepted transition sample.

    boot_keys are the Q-table keys of the joint options permissible at the
    destination given the still-active part of the executed option; empty for
    terminal destinations (bootstrap value 0). They are fixed at collection
    time because destination, active set and hence the permissible set are.
    """

    from_state: AugmentedState
    option_id: int
    reward: float
    to_state: AugmentedState
    terminated: tuple[bool, ...]
    from_key: int
    boot_keys: tuple[int, ...]


class ReplayMemory:
    """Bounded ring of experiences; push evicts the oldest, sampling is uniform."""

    def __init__(self, capacity: int, rng: Random):
        if capacity < 1:
            raise ValueError("replay capacity must be positive")
        self.capacity = capacity
        self.rng = rng
        self.ring: list[Experience] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self.ring)

    def push(self, exp: Experience):
        if len(self.ring) < self.capacity:
            self.ring.append(exp)
        else:
            self.ring[self._next] = exp
            self._next = (self._next + 1) % self.capacity

    def sample(self, k: int) -> list[Experience]:
        n = len(self.ring)
        if n == 0:
            return []
        ring = self.ring
        randrange = self.rng.randrange
        return [ring[randrange(n)] for _ in range(k)]


@dataclass(frozen=True)
class Hyperparams:
    epsilon: float = 0.1
    gamma: float = 0.9
    alpha: float = 0.1
    replay_capacity: int = 10000
    batch_size: int = 32
    updates_per_step: int = 32
    max_traj: int = 50
    total_steps: int = 12000
    stop_tol: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0 <= self.epsilon <= 1):
            raise ValueError("epsilon must be in [0, 1]")
        if not (0 < self.gamma <= 1):
            raise ValueError("gamma must be in (0, 1]")
        if not (0 < self.alpha <= 1):
            raise ValueError("alpha must be in (0, 1]")
        if min(self.replay_capacity, self.batch_size, self.updates_per_step) < 1:
            raise ValueError("replay sizes must be positive")
        if self.max_traj < 1 or self.total_steps < 1:
            raise ValueError("trajectory/step budgets must be positive")


class ProductSpace:
    """Integer codecs and caches for the on-the-fly product of grid and automaton.

    Encodes joint states, augmented states and joint options as ints, caches
    labels, the resolved automaton successor per (state, label), per-state
    executable sets and permissible joint-option lists. Pure bookkeeping: all
    semantics come from the world/automaton/progress modules.
    """

    def __init__(
        self,
        grid: GridSpec,
        aut: BuchiAutomaton,
        ann: ProgressAnnotation,
        shaping: ShapingConfig,
        menus: Sequence[Sequence[OptionDef]],
    ):
        self.grid = grid
        self.aut = aut
        self.ann = ann
        self.shaping = shaping
        self.menus = tuple(tuple(m) for m in menus)
        if len(self.menus) != grid.n_agents:
            raise ValueError("one option menu per agent required")
        self.n_cells = grid.width * grid.height
        self.n_q = aut.num_states
        self.n_agents = grid.n_agents
        # joint option id = lexicographic rank of the per-agent index tuple
        self.strides = []
        stride = 1
        for m in reversed(self.menus):
            self.strides.append(stride)
            stride *= len(m)
        self.strides.reverse()
        self.n_jo = stride
        self.combo_of_jid = [
            tuple((jid // self.strides[i]) % len(self.menus[i]) for i in range(self.n_agents))
            for jid in range(self.n_jo)
        ]
        self._mask_cache: dict[int, int] = {}
        self._exec_cache: dict[tuple[int, int], tuple[int, ...]] = {}
        self._perm_cache: dict[tuple[int, ...], tuple[tuple[int, ...], ...]] = {}
        # resolved successor per (automaton state, label mask): the successor
        # with maximal progress level, ties to the smallest id; -1 = rejection
        n_masks = 1 << len(aut.ap)
        self.chosen_succ = []
        for q in range(self.n_q):
            row = []
            for mask in range(n_masks):
                succs = aut.successors_masked(q, mask)
                if not succs:
                    row.append(-1)
                else:
                    best = max(succs, key=lambda x: (ann.level[x], -x))
                    row.append(best)
            self.chosen_succ.append(row)
        self.reward_table = [
            [shaped_reward(qn, ann, shaping, qp) for qn in range(self.n_q)]
            for qp in range(self.n_q)
        ]
        top = ann.max_level()
        self.terminal_q = [
            q in aut.accepting and ann.level[q] == top for q in range(self.n_q)
        ]

    # --- codecs ---
    def pos_code(self, c: Cell) -> int:
        return c[0] * self.grid.height + c[1]

    def state_code(self, s: JointState) -> int:
        code = 0
        for c in s:
            code = code * self.n_cells + self.pos_code(c)
        return code

    def decode_state(self, code: int) -> JointState:
        cells = []
        for _ in range(self.n_agents):
            code, pc = divmod(code, self.n_cells)
            cells.append((pc // self.grid.height, pc % self.grid.height))
        return tuple(reversed(cells))

    def aug_code(self, s_code: int, q: int) -> int:
        return s_code * self.n_q + q

    def qkey(self, aug: int, jid: int) -> int:
        return aug * self.n_jo + jid

    def jid_of_combo(self, combo: Sequence[int]) -> int:
        return sum(idx * self.strides[i] for i, idx in enumerate(combo))

    def decode_qkey(self, key: int) -> tuple[JointState, int, tuple[int, ...]]:
        aug, jid = divmod(key, self.n_jo)
        s_code, q = divmod(aug, self.n_q)
        return self.decode_state(s_code), q, self.combo_of_jid[jid]

    # --- cached environment views ---
    def label_mask_at(self, s: JointState, s_code: int) -> int:
        m = self._mask_cache.get(s_code)
        if m is None:
            m = label_mask(label(self.grid, s), self.aut.ap)
            self._mask_cache[s_code] = m
        return m

    def executable(self, s: JointState, s_code: int, agent: int) -> tuple[int, ...]:
        key = (s_code, agent)
        got = self._exec_cache.get(key)
        if got is None:
            got = tuple(executable_options(self.grid, s, agent, self.menus[agent]))
            self._exec_cache[key] = got
        return got

    def permissible_jids(
        self, s: JointState, s_code: int, active: Sequence[int | None]
    ) -> tuple[int, ...]:
        """Joint option ids selectable at s given active options, ascending."""
        sig = (s_code,) + tuple(-1 if a is None else a for a in active)
        got = self._perm_cache.get(sig)
        if got is None:
            per_agent = [
                (self.executable(s, s_code, i) if active[i] is None else (active[i],))
                for i in range(self.n_agents)
            ]
            jids = [0]
            for i, choices in enumerate(per_agent):
                stride = self.strides[i]
                jids = [j + idx * stride for j in jids for idx in choices]
            got = tuple(jids)
            self._perm_cache[sig] = got
        return got

    def option_names(self, jid: int) -> tuple[str, ...]:
        combo = self.combo_of_jid[jid]
        return tuple(self.menus[i][idx].name for i, idx in enumerate(combo))

    def option_kinds(self, jid: int) -> tuple[str, ...]:
        combo = self.combo_of_jid[jid]
        return tuple(self.menus[i][idx].kind for i, idx in enumerate(combo))


class QTable:
    """Action values keyed by (augmented state, joint option id); unseen keys are 0."""

    def __init__(self, space: ProductSpace):
        self.space = space
        self.data: dict[int, float] = {}

    def value(self, aug: AugmentedState, jid: int) -> float:
        key = self.space.qkey(
            self.space.aug_code(self.space.state_code(aug.s), aug.q), jid
        )
        return self.data.get(key, 0.0)

    def __len__(self) -> int:
        return len(self.data)


def choose_joint_option(
    qtable: QTable,
    aug_code: int,
    permissible: Sequence[int],
    epsilon: float,
    rng: Random,
) -> int:
    """Epsilon-greedy pick over permissible joint option ids.

    Greedy ties break to the smallest id; the supplied RNG is the only source
    of randomness.
    """
    if not permissible:
        raise ValueError("permissible set must be nonempty")
    if rng.random() < epsilon:
        return permissible[rng.randrange(len(permissible))]
    data = qtable.data
    base = aug_code * qtable.space.n_jo
    best_jid = permissible[0]
    best = data.get(base + best_jid, 0.0)
    for jid in permissible[1:]:
        v = data.get(base + jid, 0.0)
        if v > best:
            best = v
            best_jid = jid
    return best_jid


def observe(
    space: ProductSpace,
    s: JointState,
    q: int,
    jid: int,
    s_next: JointState,
    terminated: tuple[bool, ...],
) -> Experience | None:
    """Turn one simulated step into an experience, or None if the automaton rejects.

    The destination automaton state is the accepted successor with maximal
    progress level (ties to the smallest id); the reward is the shaped reward
    of that automaton transition (there is no separate environmental reward).
    """
    s_code = space.state_code(s)
    s2_code = space.state_code(s_next)
    mask = space.label_mask_at(s_next, s2_code)
    q2 = space.chosen_succ[q][mask]
    if q2 < 0:
        return None
    reward = space.reward_table[q][q2]
    aug2 = space.aug_code(s2_code, q2)
    if space.terminal_q[q2]:
        boot_keys: tuple[int, ...] = ()
    else:
        combo = space.combo_of_jid[jid]
        next_active = [None if terminated[i] else combo[i] for i in range(space.n_agents)]
        base = aug2 * space.n_jo
        boot_keys = tuple(
            base + j for j in space.permissible_jids(s_next, s2_code, next_active)
        )
    return Experience(
        from_state=AugmentedState(s, q),
        option_id=jid,
        reward=reward,
        to_state=AugmentedState(s_next, q2),
        terminated=terminated,
        from_key=space.qkey(space.aug_code(s_code, q), jid),
        boot_keys=boot_keys,
    )


def q_update(
    qtable: QTable,
    batch: Sequence[Experience],
    gamma: float,
    alpha: float,
    boot_options: Callable[[Experience], Sequence[int]] | None = None,
) -> float:
    """One-step Q backup for each experience in order; returns max |change|.

    The bootstrap is the max over the joint options permissible at the
    destination given the still-active part of the executed option (taken from
    the experience's cached keys unless an override is supplied); terminal
    destinations bootstrap 0.
    """
    data = qtable.data
    get = data.get
    maxd = 0.0
    for exp in batch:
        keys = exp.boot_keys if boot_options is None else boot_options(exp)
        if keys:
            m = get(keys[0], 0.0)
            for k in keys[1:]:
                v = get(k, 0.0)
                if v > m:
                    m = v
        else:
            m = 0.0
        fk = exp.from_key
        old = get(fk, 0.0)
        nv = old + alpha * (exp.reward + gamma * m - old)
        data[fk] = nv
        d = nv - old
        if d < 0.0:
            d = -d
        if d > maxd:
            maxd = d
    return maxd


@dataclass
class EpisodeMetrics:
    episode: int
    env_steps: int
    cumulative_reward: float
    reached_accepting: bool
    max_progress_level: int
    wall_ms: float


@dataclass
class PlanStep:
    positions: JointState
    q: int
    option_names: tuple[str, ...]
    option_kinds: tuple[str, ...]
    moves: tuple[str, ...]
    next_positions: JointState
    next_q: int


@dataclass
class Plan:
    status: str  # satisfied | violated | timeout
    steps: list[PlanStep]

    def __len__(self) -> int:
        return len(self.steps)

    def to_jsonable(self) -> dict:
        return {
            "status": self.status,
            "length": len(self.steps),
            "steps": [
                {
                    "positions": [list(c) for c in st.positions],
                    "automaton_state": st.q,
                    "options": list(st.option_names),
                    "kinds": list(st.option_kinds),
                    "moves": list(st.moves),
                    "next_positions": [list(c) for c in st.next_positions],
                    "next_automaton_state": st.next_q,
                }
                for st in self.steps
            ],
        }


@dataclass
class TrainResult:
    qtable: QTable
    space: ProductSpace
    episodes: list[EpisodeMetrics]
    env_steps: int
    converged_at: int | None
    first_success_episode: int | None
    wall_s: float


def train(
    space: ProductSpace,
    hp: Hyperparams,
    *,
    eval_every: int | None = None,
    eval_max_len: int | None = None,
    stop_on_convergence: bool = False,
) -> TrainResult:
    """Run the full learning loop on the product space.

    Per environment step: gather permissible joint options (active options are
    kept), pick epsilon-greedily, simulate one step, check the label against
    the automaton and store the experience if accepted, then run
    `updates_per_step` sampled replay batches of `batch_size` through q_update.
    Episodes reset to the start state and initial automaton state on reaching
    the accepting top-level state, on rejection, and at max trajectory length.

    With eval_every set, the greedy policy is rolled out at every multiple of
    eval_every steps; the first step count whose rollout satisfies the task is
    reported as convergence (dynamics, policy and tie-breaks are deterministic,
    so one rollout stands for any number of repeats).
    """
    grid = space.grid
    rng = Random(hp.seed)
    memory = ReplayMemory(hp.replay_capacity, Random(hp.seed + 1))
    qtable = QTable(space)
    menus = space.menus

    start_state: JointState = tuple(grid.agent_starts)
    q0 = space.aut.initial
    if space.ann.level[q0] != 0:
        raise ValueError("initial automaton state must have progress level 0")

    s = start_state
    s_code = space.state_code(s)
    q = q0
    active: list[int | None] = [None] * space.n_agents

    episodes: list[EpisodeMetrics] = []
    ep_steps = 0
    ep_reward = 0.0
    ep_max_level = int(space.ann.level[q0])
    ep_start = time.perf_counter()
    first_success_episode: int | None = None
    converged_at: int | None = None
    window_max_delta = 0.0
    t0 = time.perf_counter()
    steps_done = 0

    def end_episode(reached: bool):
        nonlocal s, s_code, q, active, ep_steps, ep_reward, ep_max_level, ep_start
        nonlocal first_success_episode
        episodes.append(
            EpisodeMetrics(
                episode=len(episodes),
                env_steps=ep_steps,
                cumulative_reward=ep_reward,
                reached_accepting=reached,
                max_progress_level=ep_max_level,
                wall_ms=(time.perf_counter() - ep_start) * 1000.0,
            )
        )
        if reached and first_success_episode is None:
            first_success_episode = episodes[-1].episode
        s = start_state
        s_code = space.state_code(s)
        q = q0
        active = [None] * space.n_agents
        ep_steps = 0
        ep_reward = 0.0
        ep_max_level = int(space.ann.level[q0])
        ep_start = time.perf_counter()

    for step_no in range(1, hp.total_steps + 1):
        perm = space.permissible_jids(s, s_code, active)
        jid = choose_joint_option(
            qtable, space.aug_code(s_code, q), perm, hp.epsilon, rng
        )
        combo = space.combo_of_jid[jid]
        opts = [menus[i][combo[i]] for i in range(space.n_agents)]
        fresh = [active[i] is None for i in range(space.n_agents)]
        s_next, flags = world_step(grid, s, opts, fresh)
        exp = observe(space, s, q, jid, s_next, flags)
        steps_done = step_no
        ep_steps += 1

        if exp is None:
            # safety violation or dead automaton state: reset, store nothing
            end_episode(False)
        else:
            memory.push(exp)
            ep_reward += exp.reward
            q2 = exp.to_state.q
            lvl = int(space.ann.level[q2])
            if lvl > ep_max_level:
                ep_max_level = lvl
            if space.terminal_q[q2]:
                end_episode(True)
            elif ep_steps >= hp.max_traj:
                end_episode(False)
            else:
                s = s_next
                s_code = space.state_code(s_next)
                q = q2
                active = [None if flags[i] else combo[i] for i in range(space.n_agents)]

        for _ in range(hp.updates_per_step):
            batch = memory.sample(hp.batch_size)
            if not batch:
                break
            d = q_update(qtable, batch, hp.gamma, hp.alpha)
            if d > window_max_delta:
                window_max_delta = d

        if eval_every is not None and step_no % eval_every == 0 and converged_at is None:
            rollout = extract_plan(
                space, qtable, eval_max_len if eval_max_len is not None else 4 * (grid.width + grid.height)
            )
            if rollout.status == "satisfied":
                converged_at = step_no
                if stop_on_convergence:
                    break

        if hp.stop_tol > 0.0 and step_no % 1000 == 0:
            if window_max_delta < hp.stop_tol:
                break
            window_max_delta = 0.0

    if ep_steps > 0:
        end_episode(False)
    return TrainResult(
        qtable=qtable,
        space=space,
        episodes=episodes,
        env_steps=steps_done,
        converged_at=converged_at,
        first_success_episode=first_success_episode,
        wall_s=time.perf_counter() - t0,
    )


def extract_plan(space: ProductSpace, qtable: QTable, max_len: int) -> Plan:
    """Greedy rollout from the start configuration, recording moves and option kinds.

    Stops on entering the accepting top-level state (satisfied), on an
    automaton rejection (violated), or after max_len steps (timeout).
    """
    grid = space.grid
    s: JointState = tuple(grid.agent_starts)
    s_code = space.state_code(s)
    q = space.aut.initial
    active: list[int | None] = [None] * space.n_agents
    data = qtable.data
    steps: list[PlanStep] = []
    for _ in range(max_len):
        perm = space.permissible_jids(s, s_code, active)
        base = space.qkey(space.aug_code(s_code, q), 0)
        best_jid = perm[0]
        best = data.get(base + best_jid, 0.0)
        for jid in perm[1:]:
            v = data.get(base + jid, 0.0)
            if v > best:
                best = v
                best_jid = jid
        combo = space.combo_of_jid[best_jid]
        opts = [space.menus[i][combo[i]] for i in range(space.n_agents)]
        moves = tuple(opts[i].policy(grid, s, i) for i in range(space.n_agents))
        fresh = [active[i] is None for i in range(space.n_agents)]
        s_next, flags = world_step(grid, s, opts, fresh)
        s2_code = space.state_code(s_next)
        mask = space.label_mask_at(s_next, s2_code)
        q2 = space.chosen_succ[q][mask]
        steps.append(
            PlanStep(
                positions=s,
                q=q,
                option_names=space.option_names(best_jid),
                option_kinds=space.option_kinds(best_jid),
                moves=moves,
                next_positions=s_next,
                next_q=q2 if q2 >= 0 else q,
            )
        )
        if q2 < 0:
            return Plan("violated", steps)
        if space.terminal_q[q2]:
            return Plan("satisfied", steps)
        s, s_code, q = s_next, s2_code, q2
        active = [None if flags[i] else combo[i] for i in range(space.n_agents)]
    return Plan("timeout", steps)


# --- explicit value-iteration oracle -------------------------------------------

ORACLE_HARD_CAP = 2_000_000  # (augmented states) x (joint options)


@dataclass
class OracleResult:
    values: list[float]
    q_values: dict[tuple[int, int], float]
    space: ProductSpace
    sweeps: int
    initial_value: float
    optimal_plan_len: int | None


def value_iteration_oracle(
    space: ProductSpace, gamma: float, tol: float = 1e-8, max_sweeps: int = 100000
) -> OracleResult:
    """Exact Q* over the fully enumerated product of grid and automaton states.

    Primitive options only (every joint option terminates each step, so the
    product is a plain MDP). Transitions the automaton rejects are excluded;
    their action value is pinned at 0, mirroring a learner that never stores
    them. Terminal top-level accepting states have value 0.
    """
    grid = space.grid
    for menu in space.menus:
        if any(opt.kind != "primitive" for opt in menu):
            raise ValueError("oracle supports primitive options only")
    n_aug = (space.n_cells ** space.n_agents) * space.n_q
    if n_aug * space.n_jo > ORACLE_HARD_CAP:
        raise ValueError(
            f"product too large for the oracle: {n_aug * space.n_jo} > {ORACLE_HARD_CAP}"
        )

    cells = [(x, y) for x in range(grid.width) for y in range(grid.height)]
    all_states: list[JointState] = [()]
    for _ in range(space.n_agents):
        all_states = [s + (c,) for s in all_states for c in cells]

    # transitions[aug] = list of (jid, reward, to_aug); terminal/rejected excluded
    transitions: list[list[tuple[int, float, int]] | None] = [None] * n_aug
    has_rejected = [False] * n_aug
    for s in all_states:
        s_code = space.state_code(s)
        next_info = []
        for jid in range(space.n_jo):
            combo = space.combo_of_jid[jid]
            opts = [space.menus[i][combo[i]] for i in range(space.n_agents)]
            s_next, _flags = world_step(grid, s, opts)
            s2_code = space.state_code(s_next)
            mask = space.label_mask_at(s_next, s2_code)
            next_info.append((jid, s2_code, mask))
        for q in range(space.n_q):
            aug = space.aug_code(s_code, q)
            if space.terminal_q[q]:
                transitions[aug] = []
                continue
            row = []
            for jid, s2_code, mask in next_info:
                q2 = space.chosen_succ[q][mask]
                if q2 < 0:
                    has_rejected[aug] = True
                    continue
                row.append(
                    (jid, space.reward_table[q][q2], space.aug_code(s2_code, q2))
                )
            transitions[aug] = row

    values = [0.0] * n_aug
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        delta = 0.0
        for aug in range(n_aug):
            row = transitions[aug]
            if not row:
                continue
            best = 0.0 if has_rejected[aug] else None
            for _jid, r, to_aug in row:
                v = r + gamma * values[to_aug]
                if best is None or v > best:
                    best = v
            d = best - values[aug]
            if d < 0.0:
                d = -d
            if d > delta:
                delta = d
            values[aug] = best
        if delta < tol:
            break

    q_values: dict[tuple[int, int], float] = {}
    for aug in range(n_aug):
        for jid, r, to_aug in transitions[aug] or []:
            q_values[(aug, jid)] = r + gamma * values[to_aug]

    init_aug = space.aug_code(space.state_code(tuple(grid.agent_starts)), space.aut.initial)
    plan_len = _oracle_plan_len(space, q_values, init_aug, cap=4 * n_aug)
    return OracleResult(
        values=values,
        q_values=q_values,
        space=space,
        sweeps=sweeps,
        initial_value=values[init_aug],
        optimal_plan_len=plan_len,
    )


def _oracle_plan_len(space, q_values, init_aug, cap: int) -> int | None:
    aug = init_aug
    for t in range(cap):
        s_code, q = divmod(aug, space.n_q)
        if space.terminal_q[q]:
            return t
        best_jid = None
        best = None
        for jid in range(space.n_jo):
            v = q_values.get((aug, jid))
            if v is None:
                continue
            if best is None or v > best:
                best = v
                best_jid = jid
        if best_jid is None:
            return None
        s = space.decode_state(s_code)
        combo = space.combo_of_jid[best_jid]
        opts = [space.menus[i][combo[i]] for i in range(space.n_agents)]
        s_next, _ = world_step(space.grid, s, opts)
        s2_code = space.state_code(s_next)
        q2 = space.chosen_succ[q][space.label_mask_at(s_next, s2_code)]
        aug = space.aug_code(s2_code, q2)
    return None


# --- text interfaces ------------------------------------------------------------

METRICS_COLUMNS = (
    "episode",
    "env_steps",
    "cumulative_reward",
    "reached_accepting",
    "max_progress_level",
    "wall_ms",
)


def metrics_to_csv(episodes: Sequence[EpisodeMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_COLUMNS)
    for m in episodes:
        w.writerow(
            [
                m.episode,
                m.env_steps,
                f"{m.cumulative_reward:.6f}",
                int(m.reached_accepting),
                m.max_progress_level,
                f"{m.wall_ms:.3f}",
            ]
        )
    return buf.getvalue()


def qtable_to_text(qtable: QTable) -> str:
    """Rows `joint_state,automaton_state,joint_option,value`, sorted by key."""
    space = qtable.space
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["joint_state", "automaton_state", "joint_option", "value"])
    for key in sorted(qtable.data):
        s, q, combo = space.decode_qkey(key)
        jid = space.jid_of_combo(combo)
        w.writerow(
            [
                "|".join(f"{c[0]},{c[1]}" for c in s),
                q,
                "|".join(space.option_names(jid)),
                repr(qtable.data[key]),
            ]
        )
    return buf.getvalue()


def qtable_from_text(text: str, space: ProductSpace) -> QTable:
    qtable = QTable(space)
    name_to_idx = [
        {opt.name: i for i, opt in enumerate(menu)} for menu in space.menus
    ]
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != list(("joint_state", "automaton_state", "joint_option", "value")):
        raise ValueError("not a Q-table dump")
    for row in rows[1:]:
        if not row:
            continue
        s_txt, q_txt, opt_txt, val_txt = row
        s = tuple(
            (int(part.split(",")[0]), int(part.split(",")[1]))
            for part in s_txt.split("|")
        )
        names = opt_txt.split("|")
        combo = tuple(name_to_idx[i][names[i]] for i in range(space.n_agents))
        key = space.qkey(
            space.aug_code(space.state_code(s), int(q_txt)),
            space.jid_of_combo(combo),
        )
        qtable.data[key] = float(val_txt)
    return qtable
