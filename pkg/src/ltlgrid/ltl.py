"""Linear temporal logic formulas: syntax tree, parser, printer, NNF, lasso semantics."""

from __future__ import annotations

import re
from dataclasses import dataclass

PROP_RE = re.compile(r"[a-z][a-z0-9_]*")

RESERVED_WORDS = ("true", "false")


class Formula:
    """Base class for LTL syntax tree nodes. Nodes are immutable and hashable."""

    def __str__(self) -> str:
        return print_formula(self)


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Prop(Formula):
    name: str

    def __post_init__(self):
        if not PROP_RE.fullmatch(self.name) or self.name in RESERVED_WORDS:
            raise ValueError(f"invalid proposition name: {self.name!r}")


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    operand: Formula


@dataclass(frozen=True)
class Finally(Formula):
    operand: Formula


@dataclass(frozen=True)
class Globally(Formula):
    operand: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Release(Formula):
    """Dual of Until. Internal to normalization; not part of the input grammar."""

    left: Formula
    right: Formula


class LtlSyntaxError(ValueError):
    """Raised on malformed formula text; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


# --- parsing -----------------------------------------------------------------
#
# Precedence, tightest first: unary (!, X, F, G), U (right-assoc), &, |,
# -> (right-assoc). Whitespace-insensitive.

_TOKEN_RE = re.compile(r"\s*(->|[!&|()UXFG]|[a-z][a-z0-9_]*)")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise LtlSyntaxError(
                f"unexpected character {stripped[0]!r}", len(text) - len(stripped)
            )
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> str | None:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def offset(self) -> int:
        return self.tokens[self.i][1] if self.i < len(self.tokens) else len(self.text)

    def take(self) -> str:
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, tok: str):
        if self.peek() != tok:
            raise LtlSyntaxError(f"expected {tok!r}", self.offset())
        self.take()

    def parse(self) -> Formula:
        if not self.tokens:
            raise LtlSyntaxError("empty formula", 0)
        f = self.implies()
        if self.peek() is not None:
            raise LtlSyntaxError(f"unexpected token {self.peek()!r}", self.offset())
        return f

    def implies(self) -> Formula:
        left = self.disj()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.implies())
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.until()
        while self.peek() == "&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        left = self.unary()
        if self.peek() == "U":
            self.take()
            return Until(left, self.until())
        return left

    def unary(self) -> Formula:
        tok = self.peek()
        if tok == "!":
            self.take()
            return Not(self.unary())
        if tok == "X":
            self.take()
            return Next(self.unary())
        if tok == "F":
            self.take()
            return Finally(self.unary())
        if tok == "G":
            self.take()
            return Globally(self.unary())
        return self.atom()

    def atom(self) -> Formula:
        tok = self.peek()
        if tok is None:
            raise LtlSyntaxError("unexpected end of input", self.offset())
        if tok == "(":
            self.take()
            f = self.implies()
            self.expect(")")
            return f
        if tok == "true":
            self.take()
            return TrueF()
        if tok == "false":
            self.take()
            return FalseF()
        if PROP_RE.fullmatch(tok):
            self.take()
            return Prop(tok)
        raise LtlSyntaxError(f"unexpected token {tok!r}", self.offset())


def parse(text: str) -> Formula:
    """Parse formula text into a syntax tree.

    Raises LtlSyntaxError (with byte offset) on malformed or empty input.
    """
    return _Parser(text).parse()


def print_formula(f: Formula) -> str:
    """Fully parenthesized text form; parses back to the identical tree."""
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, FalseF):
        return "false"
    if isinstance(f, Prop):
        return f.name
    if isinstance(f, Not):
        return f"(! {print_formula(f.operand)})"
    if isinstance(f, Next):
        return f"(X {print_formula(f.operand)})"
    if isinstance(f, Finally):
        return f"(F {print_formula(f.operand)})"
    if isinstance(f, Globally):
        return f"(G {print_formula(f.operand)})"
    if isinstance(f, And):
        return f"({print_formula(f.left)} & {print_formula(f.right)})"
    if isinstance(f, Or):
        return f"({print_formula(f.left)} | {print_formula(f.right)})"
    if isinstance(f, Implies):
        return f"({print_formula(f.left)} -> {print_formula(f.right)})"
    if isinstance(f, Until):
        return f"({print_formula(f.left)} U {print_formula(f.right)})"
    if isinstance(f, Release):
        # Release is internal-only; printed for dumps, not accepted by parse().
        return f"({print_formula(f.left)} R {print_formula(f.right)})"
    raise TypeError(f"not a formula: {f!r}")


def props_of(f: Formula) -> set[str]:
    """All proposition names occurring in the formula."""
    if isinstance(f, Prop):
        return {f.name}
    if isinstance(f, (TrueF, FalseF)):
        return set()
    if isinstance(f, (Not, Next, Finally, Globally)):
        return props_of(f.operand)
    return props_of(f.left) | props_of(f.right)


# --- negation normal form ----------------------------------------------------


def to_nnf(f: Formula) -> Formula:
    """Equivalent formula with negation only on propositions.

    Implies is eliminated; negated F/G/U rewrite through the Until/Release
    duality (notably !F p becomes false R !p).
    """
    if isinstance(f, (TrueF, FalseF, Prop)):
        return f
    if isinstance(f, Not):
        return _neg(f.operand)
    if isinstance(f, And):
        return And(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Or):
        return Or(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Implies):
        return Or(_neg(f.left), to_nnf(f.right))
    if isinstance(f, Next):
        return Next(to_nnf(f.operand))
    if isinstance(f, Finally):
        return Finally(to_nnf(f.operand))
    if isinstance(f, Globally):
        return Globally(to_nnf(f.operand))
    if isinstance(f, Until):
        return Until(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Release):
        return Release(to_nnf(f.left), to_nnf(f.right))
    raise TypeError(f"not a formula: {f!r}")


def _neg(f: Formula) -> Formula:
    """NNF of the negation of f."""
    if isinstance(f, TrueF):
        return FalseF()
    if isinstance(f, FalseF):
        return TrueF()
    if isinstance(f, Prop):
        return Not(f)
    if isinstance(f, Not):
        return to_nnf(f.operand)
    if isinstance(f, And):
        return Or(_neg(f.left), _neg(f.right))
    if isinstance(f, Or):
        return And(_neg(f.left), _neg(f.right))
    if isinstance(f, Implies):
        return And(to_nnf(f.left), _neg(f.right))
    if isinstance(f, Next):
        return Next(_neg(f.operand))
    if isinstance(f, Finally):
        return Release(FalseF(), _neg(f.operand))
    if isinstance(f, Globally):
        return Finally(_neg(f.operand))
    if isinstance(f, Until):
        return Release(_neg(f.left), _neg(f.right))
    if isinstance(f, Release):
        return Until(_neg(f.left), _neg(f.right))
    raise TypeError(f"not a formula: {f!r}")


def is_nnf(f: Formula) -> bool:
    if isinstance(f, Not):
        return isinstance(f.operand, Prop)
    if isinstance(f, (TrueF, FalseF, Prop)):
        return True
    if isinstance(f, (Next, Finally, Globally)):
        return is_nnf(f.operand)
    if isinstance(f, (And, Or, Until, Release)):
        return is_nnf(f.left) and is_nnf(f.right)
    return False  # Implies never appears in NNF


# --- lasso-word semantics ----------------------------------------------------


@dataclass(frozen=True)
class LassoWord:
    """Ultimately periodic infinite word prefix . loop^omega over label sets."""

    prefix: tuple[frozenset[str], ...]
    loop: tuple[frozenset[str], ...]

    def __post_init__(self):
        if len(self.loop) < 1:
            raise ValueError("lasso loop must be nonempty")

    @staticmethod
    def make(prefix, loop) -> "LassoWord":
        return LassoWord(
            tuple(frozenset(s) for s in prefix), tuple(frozenset(s) for s in loop)
        )

    def positions(self) -> int:
        return len(self.prefix) + len(self.loop)

    def label(self, i: int) -> frozenset[str]:
        if i < len(self.prefix):
            return self.prefix[i]
        return self.loop[i - len(self.prefix)]

    def next_pos(self, i: int) -> int:
        return i + 1 if i + 1 < self.positions() else len(self.prefix)


def eval_lasso(f: Formula, w: LassoWord) -> bool:
    """Whether prefix.loop^omega satisfies f under standard LTL semantics.

    Works on the finite position set |prefix|+|loop|: temporal operators are
    solved by fixpoint iteration over the looped position graph (least fixpoint
    for U/F, greatest for R/G), so no automaton is involved. Serves as the
    independent oracle for the automaton translation.
    """
    n = w.positions()
    nxt = [w.next_pos(i) for i in range(n)]
    memo: dict[Formula, list[bool]] = {}

    def table(g: Formula) -> list[bool]:
        cached = memo.get(g)
        if cached is not None:
            return cached
        if isinstance(g, TrueF):
            t = [True] * n
        elif isinstance(g, FalseF):
            t = [False] * n
        elif isinstance(g, Prop):
            t = [g.name in w.label(i) for i in range(n)]
        elif isinstance(g, Not):
            t = [not v for v in table(g.operand)]
        elif isinstance(g, And):
            lt, rt = table(g.left), table(g.right)
            t = [a and b for a, b in zip(lt, rt)]
        elif isinstance(g, Or):
            lt, rt = table(g.left), table(g.right)
            t = [a or b for a, b in zip(lt, rt)]
        elif isinstance(g, Implies):
            lt, rt = table(g.left), table(g.right)
            t = [(not a) or b for a, b in zip(lt, rt)]
        elif isinstance(g, Next):
            ot = table(g.operand)
            t = [ot[nxt[i]] for i in range(n)]
        elif isinstance(g, Finally):
            t = _lfp(table(g.operand), None, nxt)
        elif isinstance(g, Globally):
            t = _gfp(table(g.operand), None, nxt)
        elif isinstance(g, Until):
            t = _lfp(table(g.right), table(g.left), nxt)
        elif isinstance(g, Release):
            t = _gfp(table(g.right), table(g.left), nxt)
        else:
            raise TypeError(f"not a formula: {g!r}")
        memo[g] = t
        return t

    return table(f)[0]


def _lfp(hold: list[bool], cont: list[bool] | None, nxt: list[int]) -> list[bool]:
    # least fixpoint of  x[i] = hold[i] or (cont[i] and x[next(i)])
    n = len(hold)
    x = [False] * n
    changed = True
    while changed:
        changed = False
        for i in range(n - 1, -1, -1):
            v = hold[i] or ((cont is None or cont[i]) and x[nxt[i]])
            if v and not x[i]:
                x[i] = True
                changed = True
    return x


def _gfp(hold: list[bool], release: list[bool] | None, nxt: list[int]) -> list[bool]:
    # greatest fixpoint of  x[i] = hold[i] and (release[i] or x[next(i)])
    n = len(hold)
    x = [True] * n
    changed = True
    while changed:
        changed = False
        for i in range(n - 1, -1, -1):
            v = hold[i] and ((release is not None and release[i]) or x[nxt[i]])
            if not v and x[i]:
                x[i] = False
                changed = True
    return x
