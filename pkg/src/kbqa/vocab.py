"""Token vocabulary and the built-in deterministic tokenizer.

Tokenization rules (documented so external scorers can conform):
  * structural tokens "(" and ")" and the operator words are atomic;
  * schema names split on "." and "_", keeping the separators as
    their own tokens, so names rebuild losslessly by concatenation;
  * entity ids are atomic tokens;
  * numeric literals split into single digits, an optional ".", and an
    optional "^^" followed by a type-tag word;
  * free text (questions, labels) splits into lowercase word/number
    chunks; unknown words map to the <unk> token.

Ids are dense from 0. Specials come first so their ids are stable
across stores of the same build recipe.
"""

from __future__ import annotations

import re
from typing import Iterable, Optional, Sequence, Union

from .errors import TokenizeError
from .sexpr import (And, ArgMax, ArgMin, ClassRef, Compare, Count, EntityRef,
                    Join, LiteralRef, LogicalForm, Reverse, parse)
from .store import LiteralValue, TripleStore

BEGIN = "<s>"
END = "</s>"
UNK = "<unk>"
SECTION_ENTITIES = "<entities>"
SECTION_ELFS = "<elfs>"
SECTION_SCHEMA = "<schema>"
COMMA = ","

SPECIALS = (BEGIN, END, UNK, SECTION_ENTITIES, SECTION_ELFS, SECTION_SCHEMA, COMMA)
STRUCTURAL = ("(", ")")
OPERATOR_TOKENS = ("AND", "JOIN", "R", "COUNT", "ARGMIN", "ARGMAX",
                   "lt", "le", "gt", "ge")
SEPARATORS = (".", "_", "^^")
DIGITS = tuple("0123456789")
TYPE_TAGS = ("float", "integer")

_NAME_SEGMENT_RE = re.compile(r"[A-Za-z0-9]+")
_WORD_RE = re.compile(r"[a-z]+|\d+(?:\.\d+)?")
_NUMBER_WORD_RE = re.compile(r"\d+(?:\.\d+)?")


class Vocabulary:
    """Bidirectional token-id map; append-only until frozen."""

    def __init__(self):
        self._tok_to_id: dict[str, int] = {}
        self._id_to_tok: list[str] = []
        self.frozen = False
        for token in SPECIALS + STRUCTURAL + OPERATOR_TOKENS + SEPARATORS + DIGITS + TYPE_TAGS:
            self.add(token)

    def add(self, token: str) -> int:
        existing = self._tok_to_id.get(token)
        if existing is not None:
            return existing
        if self.frozen:
            raise TokenizeError(f"vocabulary is frozen; unknown token {token!r}")
        token_id = len(self._id_to_tok)
        self._tok_to_id[token] = token_id
        self._id_to_tok.append(token)
        return token_id

    def freeze(self) -> "Vocabulary":
        self.frozen = True
        return self

    def __len__(self) -> int:
        return len(self._id_to_tok)

    @property
    def size(self) -> int:
        return len(self._id_to_tok)

    def __contains__(self, token: str) -> bool:
        return token in self._tok_to_id

    def id(self, token: str) -> int:
        try:
            return self._tok_to_id[token]
        except KeyError:
            raise TokenizeError(f"token not in vocabulary: {token!r}") from None

    def id_or_unk(self, token: str) -> int:
        return self._tok_to_id.get(token, self._tok_to_id[UNK])

    def token(self, token_id: int) -> str:
        return self._id_to_tok[token_id]

    def tokens(self, ids: Iterable[int]) -> list[str]:
        return [self._id_to_tok[i] for i in ids]

    # Frequently used ids, resolved once.
    @property
    def begin_id(self) -> int:
        return self._tok_to_id[BEGIN]

    @property
    def end_id(self) -> int:
        return self._tok_to_id[END]

    @property
    def unk_id(self) -> int:
        return self._tok_to_id[UNK]


def tokenize_name(name: str) -> list[str]:
    """Split a schema name on "." and "_", keeping separators.

    The shape word(sep word)* is enforced: it is what makes trie
    terminals unambiguous during constrained decoding (a complete name
    can only continue with a separator token).
    """
    if not name:
        raise TokenizeError("empty schema name")
    tokens: list[str] = []
    i = 0
    expect_word = True
    while i < len(name):
        ch = name[i]
        if ch in "._":
            if expect_word:
                raise TokenizeError(f"schema name {name!r} has an empty segment")
            tokens.append(ch)
            expect_word = True
            i += 1
            continue
        match = _NAME_SEGMENT_RE.match(name, i)
        if not match or not expect_word:
            raise TokenizeError(f"schema name {name!r} is not tokenizable")
        tokens.append(match.group())
        expect_word = False
        i = match.end()
    if expect_word:
        raise TokenizeError(f"schema name {name!r} ends with a separator")
    return tokens


def tokenize_literal(lit: LiteralValue) -> list[str]:
    if lit.kind == "integer":
        text = str(int(lit.value))
    elif lit.kind == "float":
        text = repr(float(lit.value))
    else:
        raise TokenizeError(f"literal kind {lit.kind!r} is not decodable")
    if not re.fullmatch(r"\d+(?:\.\d+)?", text):
        raise TokenizeError(f"literal {text!r} is not decodable "
                            "(negative or non-positional notation)")
    tokens = list(text)
    if lit.type_tag:
        if lit.type_tag not in TYPE_TAGS:
            raise TokenizeError(f"literal tag {lit.type_tag!r} is not decodable")
        tokens.extend(["^^", lit.type_tag])
    return tokens


def text_words(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


def build_vocabulary(store: TripleStore,
                     extra_texts: Iterable[str] = ()) -> Vocabulary:
    """Vocabulary covering the store's catalog, entities, labels and
    aliases, plus any extra free text (e.g. a question corpus)."""
    vocab = Vocabulary()
    words: set[str] = set()
    for name in sorted(store.catalog):
        for token in tokenize_name(name):
            if token not in "._":
                words.add(token)
    for word in sorted(words):
        vocab.add(word)
    for entity in sorted(store.all_entities()):
        vocab.add(entity)
    text_vocab: set[str] = set()
    for entity in store.all_entities():
        meta = store.entity_meta(entity)
        text_vocab.update(text_words(meta.label))
        for alias in meta.aliases:
            text_vocab.update(text_words(alias))
    for text in extra_texts:
        text_vocab.update(text_words(text))
    for word in sorted(text_vocab):
        if _NUMBER_WORD_RE.fullmatch(word):
            continue  # numbers encode through digit tokens
        vocab.add(word)
    return vocab.freeze()


def encode_text(vocab: Vocabulary, text: str) -> list[int]:
    """Free-text encoding for context assembly; numbers become digit
    sequences, unknown words become <unk>."""
    ids: list[int] = []
    for word in text_words(text):
        if _NUMBER_WORD_RE.fullmatch(word):
            ids.extend(vocab.id(ch) for ch in word)
        else:
            ids.append(vocab.id_or_unk(word))
    return ids


def encode_logical_form(vocab: Vocabulary,
                        lf: Union[str, LogicalForm]) -> list[int]:
    """Exact token encoding of a logical form; raises TokenizeError when
    any name, entity, or literal is outside the vocabulary."""
    if isinstance(lf, str):
        lf = parse(lf)
    tokens: list[str] = []

    def emit(node: LogicalForm) -> None:
        if isinstance(node, EntityRef):
            tokens.append(node.entity)
        elif isinstance(node, ClassRef):
            tokens.extend(tokenize_name(node.name))
        elif isinstance(node, LiteralRef):
            tokens.extend(tokenize_literal(node.value))
        elif isinstance(node, And):
            tokens.append("(")
            tokens.append("AND")
            emit(node.left)
            emit(node.right)
            tokens.append(")")
        elif isinstance(node, Join):
            tokens.append("(")
            tokens.append("JOIN")
            if isinstance(node.relation, Reverse):
                tokens.extend(["(", "R"])
                tokens.extend(tokenize_name(node.relation.relation))
                tokens.append(")")
            else:
                tokens.extend(tokenize_name(node.relation))
            emit(node.sub)
            tokens.append(")")
        elif isinstance(node, Count):
            tokens.extend(["(", "COUNT"])
            emit(node.sub)
            tokens.append(")")
        elif isinstance(node, (ArgMin, ArgMax)):
            tokens.extend(["(", "ARGMIN" if isinstance(node, ArgMin) else "ARGMAX"])
            emit(node.sub)
            tokens.extend(tokenize_name(node.relation))
            tokens.append(")")
        elif isinstance(node, Compare):
            tokens.extend(["(", node.op])
            tokens.extend(tokenize_name(node.relation))
            tokens.extend(tokenize_literal(node.literal))
            tokens.append(")")
        else:
            raise TokenizeError(f"cannot encode node {node!r}")

    emit(lf)
    return [vocab.id(token) for token in tokens]


def raw_join(vocab: Vocabulary, ids: Sequence[int],
             skip: Optional[set[int]] = None) -> str:
    """Space-joined token strings: a debugging fallback, not guaranteed
    to parse."""
    skip = skip or set()
    return " ".join(vocab.token(i) for i in ids if i not in skip)
