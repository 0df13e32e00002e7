"""Incremental recognizer for the logical-form token language, used to
mask illegal next tokens during beam search.

The state tracks a stack of open constructs plus a micro-slot saying
what the next token may be. Schema-name slots walk a prefix trie; a
complete name is exited implicitly by the first token that cannot
continue it (always unambiguous, because a complete name can only
continue with a separator token while follow sets never contain one).

Nested expression slots admit AND/JOIN and the comparatives; COUNT,
ARGMIN, and ARGMAX are root-only. Entity slots are restricted to the
linked entities supplied in the decode context; literal slots are
constrained syntactically (digits, one point, optional float/integer
tag) but not to values present in the KB.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from .trie import SchemaTrie, TrieNode
from .vocab import DIGITS, TYPE_TAGS, Vocabulary

NESTED_OPERATORS = ("AND", "JOIN", "lt", "le", "gt", "ge")
ROOT_OPERATORS = NESTED_OPERATORS + ("COUNT", "ARGMIN", "ARGMAX")

_ARITY = {"AND": 2, "JOIN": 2, "COUNT": 1, "ARGMIN": 2, "ARGMAX": 2,
          "lt": 2, "le": 2, "gt": 2, "ge": 2, "R": 1}

_SLOTS = {
    "AND": ("expr", "expr"),
    "JOIN": ("rel", "obj"),
    "COUNT": ("expr",),
    "ARGMIN": ("expr", "rel_bare"),
    "ARGMAX": ("expr", "rel_bare"),
    "lt": ("rel_bare", "lit_start"),
    "le": ("rel_bare", "lit_start"),
    "gt": ("rel_bare", "lit_start"),
    "ge": ("rel_bare", "lit_start"),
    "R": ("rel_bare",),
}


class DecodeContext:
    """Immutable bundle of vocabulary-resolved token sets, the two
    schema tries, and the linked-entity constraint."""

    def __init__(self, vocab: Vocabulary, class_trie: SchemaTrie,
                 rel_trie: SchemaTrie,
                 linked_entities: Sequence[str] = ()):
        self.vocab = vocab
        self.class_trie = class_trie
        self.rel_trie = rel_trie
        self.open_id = vocab.id("(")
        self.close_id = vocab.id(")")
        self.end_id = vocab.end_id
        self.r_id = vocab.id("R")
        self.dot_id = vocab.id(".")
        self.caret_id = vocab.id("^^")
        self.digit_ids = frozenset(vocab.id(d) for d in DIGITS)
        self.tag_ids = frozenset(vocab.id(t) for t in TYPE_TAGS)
        self.float_tag_ids = frozenset((vocab.id("float"),))
        self.root_op_ids = frozenset(vocab.id(op) for op in ROOT_OPERATORS)
        self.nested_op_ids = frozenset(vocab.id(op) for op in NESTED_OPERATORS)
        self.op_names = {vocab.id(op): op for op in ROOT_OPERATORS + ("R",)}
        self.linked = frozenset(vocab.id(e) for e in linked_entities)


@dataclass(frozen=True)
class GrammarState:
    slot: str = "root"
    stack: tuple[tuple[str, int], ...] = ()
    cursor: Optional[TrieNode] = None

    @property
    def finished(self) -> bool:
        return self.slot == "accepted"


def initial_state() -> GrammarState:
    return GrammarState()


def _completed_child(state: GrammarState) -> GrammarState:
    """State after the current child of the top frame has finished."""
    if not state.stack:
        return GrammarState("done", (), None)
    op, pos = state.stack[-1]
    pos += 1
    stack = state.stack[:-1] + ((op, pos),)
    if pos >= _ARITY[op]:
        return GrammarState("close", stack, None)
    return GrammarState(_SLOTS[op][pos], stack, None)


def advance(state: GrammarState, token: int,
            ctx: DecodeContext) -> Optional[GrammarState]:
    """Next state, or None when the token is illegal here."""
    slot = state.slot
    if slot == "root":
        return GrammarState("op", state.stack, None) if token == ctx.open_id else None
    if slot == "op":
        allowed = ctx.root_op_ids if not state.stack else ctx.nested_op_ids
        if token not in allowed:
            return None
        op = ctx.op_names[token]
        stack = state.stack + ((op, 0),)
        return GrammarState(_SLOTS[op][0], stack, None)
    if slot == "op_r":
        if token != ctx.r_id:
            return None
        stack = state.stack + (("R", 0),)
        return GrammarState("rel_bare", stack, None)
    if slot == "expr":
        if token == ctx.open_id:
            return GrammarState("op", state.stack, None)
        child = ctx.class_trie.root.children.get(token)
        if child is not None:
            return GrammarState("class", state.stack, child)
        return None
    if slot == "obj":
        if token == ctx.open_id:
            return GrammarState("op", state.stack, None)
        if token in ctx.linked:
            return _completed_child(state)
        if token in ctx.digit_ids:
            return GrammarState("lit_int", state.stack, None)
        return None
    if slot == "rel":
        if token == ctx.open_id:
            return GrammarState("op_r", state.stack, None)
        child = ctx.rel_trie.root.children.get(token)
        if child is not None:
            return GrammarState("relname", state.stack, child)
        return None
    if slot == "rel_bare":
        child = ctx.rel_trie.root.children.get(token)
        if child is not None:
            return GrammarState("relname", state.stack, child)
        return None
    if slot in ("class", "relname"):
        child = state.cursor.children.get(token)
        if child is not None:
            return GrammarState(slot, state.stack, child)
        if state.cursor.terminal:
            return advance(_completed_child(state), token, ctx)
        return None
    if slot == "lit_start":
        return GrammarState("lit_int", state.stack, None) if token in ctx.digit_ids else None
    if slot == "lit_int":
        if token in ctx.digit_ids:
            return state
        if token == ctx.dot_id:
            return GrammarState("lit_frac0", state.stack, None)
        if token == ctx.caret_id:
            return GrammarState("lit_tag", state.stack, None)
        return advance(_completed_child(state), token, ctx)
    if slot == "lit_frac0":
        return GrammarState("lit_frac", state.stack, None) if token in ctx.digit_ids else None
    if slot == "lit_frac":
        if token in ctx.digit_ids:
            return state
        if token == ctx.caret_id:
            # a fractional payload only parses under a float tag
            return GrammarState("lit_tag_frac", state.stack, None)
        return advance(_completed_child(state), token, ctx)
    if slot == "lit_tag":
        if token in ctx.tag_ids:
            return _completed_child(state)
        return None
    if slot == "lit_tag_frac":
        if token in ctx.float_tag_ids:
            return _completed_child(state)
        return None
    if slot == "close":
        if token != ctx.close_id:
            return None
        stack = state.stack[:-1]
        return _completed_child(GrammarState("close", stack, None))
    if slot == "done":
        return GrammarState("accepted", (), None) if token == ctx.end_id else None
    return None  # accepted: nothing may follow


def allowed_next(state: GrammarState, ctx: DecodeContext) -> frozenset[int]:
    """Exactly the token ids advance() accepts in this state."""
    slot = state.slot
    if slot == "root":
        return frozenset((ctx.open_id,))
    if slot == "op":
        return ctx.root_op_ids if not state.stack else ctx.nested_op_ids
    if slot == "op_r":
        return frozenset((ctx.r_id,))
    if slot == "expr":
        return frozenset(ctx.class_trie.root.children) | {ctx.open_id}
    if slot == "obj":
        return frozenset({ctx.open_id}) | ctx.linked | ctx.digit_ids
    if slot == "rel":
        return frozenset(ctx.rel_trie.root.children) | {ctx.open_id}
    if slot == "rel_bare":
        return frozenset(ctx.rel_trie.root.children)
    if slot in ("class", "relname"):
        allowed = frozenset(state.cursor.children)
        if state.cursor.terminal:
            allowed |= allowed_next(_completed_child(state), ctx)
        return allowed
    if slot == "lit_start":
        return ctx.digit_ids
    if slot == "lit_int":
        return (ctx.digit_ids | {ctx.dot_id, ctx.caret_id}
                | allowed_next(_completed_child(state), ctx))
    if slot == "lit_frac0":
        return ctx.digit_ids
    if slot == "lit_frac":
        return (ctx.digit_ids | {ctx.caret_id}
                | allowed_next(_completed_child(state), ctx))
    if slot == "lit_tag":
        return ctx.tag_ids
    if slot == "lit_tag_frac":
        return ctx.float_tag_ids
    if slot == "close":
        return frozenset((ctx.close_id,))
    if slot == "done":
        return frozenset((ctx.end_id,))
    return frozenset()


def continues_lexeme(state: GrammarState, token: int, ctx: DecodeContext) -> bool:
    """True when the token extends the schema name or literal currently
    being spelled (used to rebuild text without inserting spaces)."""
    slot = state.slot
    if slot in ("class", "relname"):
        return token in state.cursor.children
    if slot == "lit_int":
        return token in ctx.digit_ids or token in (ctx.dot_id, ctx.caret_id)
    if slot == "lit_frac0":
        return token in ctx.digit_ids
    if slot == "lit_frac":
        return token in ctx.digit_ids or token == ctx.caret_id
    if slot == "lit_tag":
        return token in ctx.tag_ids
    if slot == "lit_tag_frac":
        return token in ctx.float_tag_ids
    return False


def render_tokens(ids: Sequence[int], ctx: DecodeContext) -> Optional[str]:
    """Rebuild logical-form text from a token sequence by replaying the
    grammar; None when the sequence is not grammatical. A trailing end
    token is accepted (and required to sit in the done state)."""
    state = initial_state()
    lexemes: list[str] = []
    for token in ids:
        if token == ctx.end_id:
            return " ".join(_respace(lexemes)) if state.slot == "done" else None
        if continues_lexeme(state, token, ctx):
            lexemes[-1] += ctx.vocab.token(token)
        else:
            lexemes.append(ctx.vocab.token(token))
        state = advance(state, token, ctx)
        if state is None:
            return None
    if state.slot != "done":
        return None
    return " ".join(_respace(lexemes))


def _respace(lexemes: list[str]) -> list[str]:
    """Join lexemes with lisp spacing: no space after '(' or before ')'."""
    out: list[str] = []
    for lex in lexemes:
        if lex == ")":
            out[-1] += ")"
        elif out and out[-1].endswith("("):
            out[-1] += lex
        else:
            out.append(lex)
    return out
