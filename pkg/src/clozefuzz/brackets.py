"""Matched-bracket extraction.

Finds every matched pair of (), {}, [] and a conservative subset of
generic <> pairs in a program, then arranges the pairs into a forest
ordered by containment. Unmatched brackets are dropped silently; the
rest of the pipeline only ever sees well-formed spans.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .lexer import Token, TokenKind, lex, significant_tokens


class BracketKind(Enum):
    PAREN = "paren"
    BRACE = "brace"
    SQUARE = "square"
    ANGLE = "angle"


_OPEN_KIND = {"(": BracketKind.PAREN, "{": BracketKind.BRACE, "[": BracketKind.SQUARE}
_CLOSE_KIND = {")": BracketKind.PAREN, "}": BracketKind.BRACE, "]": BracketKind.SQUARE}


@dataclass
class BracketSpan:
    kind: BracketKind
    open_at: int
    close_at: int
    depth: int = 0
    children: list[BracketSpan] = field(default_factory=list)

    @property
    def interior(self) -> tuple[int, int]:
        """Half-open character range strictly between the delimiters."""
        return (self.open_at + 1, self.close_at)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "open_at": self.open_at,
            "close_at": self.close_at,
            "depth": self.depth,
            "children": [c.to_dict() for c in self.children],
        }


def _match_classical(tokens: list[Token]) -> list[tuple[BracketKind, int, int]]:
    pairs: list[tuple[BracketKind, int, int]] = []
    stack: list[tuple[BracketKind, int]] = []
    for t in tokens:
        if t.kind is TokenKind.OPEN_BRACKET:
            stack.append((_OPEN_KIND[t.text], t.start))
        elif t.kind is TokenKind.CLOSE_BRACKET:
            kind = _CLOSE_KIND[t.text]
            if stack and stack[-1][0] is kind:
                _, open_at = stack.pop()
                pairs.append((kind, open_at, t.start))
            # a closer that doesn't match the innermost opener is ignored
    return pairs


def _angle_opener_plausible(prev: Token | None) -> bool:
    # '<' can only start a generic argument list after a name, a path
    # separator, or a previous closing '>' (e.g. Foo<T>::Bar<U>)
    if prev is None:
        return False
    if prev.kind is TokenKind.IDENTIFIER:
        return True
    return prev.kind is TokenKind.PUNCT and prev.text in ("::", ">")


def _scan_angle_close(sig: list[Token], open_idx: int) -> int | None:
    """Walk forward from a candidate '<' looking for its '>'.

    Nested (), {}, [] groups are skipped whole. The scan gives up at
    any ';', at a closer that has no opener inside the scanned region,
    or at end of input: past any of those the '<' was a comparison.
    """
    depth = {BracketKind.PAREN: 0, BracketKind.BRACE: 0, BracketKind.SQUARE: 0}
    angle = 0
    for t in sig[open_idx + 1 :]:
        if t.kind is TokenKind.PUNCT and t.text == ";":
            return None
        if t.kind is TokenKind.OPEN_BRACKET:
            depth[_OPEN_KIND[t.text]] += 1
            continue
        if t.kind is TokenKind.CLOSE_BRACKET:
            kind = _CLOSE_KIND[t.text]
            if depth[kind] == 0:
                return None
            depth[kind] -= 1
            continue
        if any(depth.values()):
            continue
        if t.kind is TokenKind.PUNCT:
            if t.text == "<":
                angle += 1
            elif t.text == ">":
                if angle == 0:
                    return t.start
                angle -= 1
            # fused operators (<<, >>, <=, ...) are opaque here on purpose
    return None


def _match_angles(sig: list[Token]) -> list[tuple[BracketKind, int, int]]:
    pairs: list[tuple[BracketKind, int, int]] = []
    for idx, t in enumerate(sig):
        if t.kind is not TokenKind.PUNCT or t.text != "<":
            continue
        prev = sig[idx - 1] if idx > 0 else None
        if not _angle_opener_plausible(prev):
            continue
        close_at = _scan_angle_close(sig, idx)
        if close_at is not None:
            pairs.append((BracketKind.ANGLE, t.start, close_at))
    return pairs


def find_bracket_pairs(source: str) -> list[BracketSpan]:
    """All matched bracket spans of a program as a containment forest.

    Roots come back in textual order; each node's children are the
    spans nested directly inside it.
    """
    tokens = lex(source).tokens
    sig = significant_tokens(tokens)
    raw = _match_classical(tokens) + _match_angles(sig)

    spans = [BracketSpan(kind, open_at, close_at) for kind, open_at, close_at in raw]
    spans.sort(key=lambda s: (s.open_at, -s.close_at))

    roots: list[BracketSpan] = []
    stack: list[BracketSpan] = []
    for span in spans:
        while stack and stack[-1].close_at < span.open_at:
            stack.pop()
        if stack:
            span.depth = stack[-1].depth + 1
            stack[-1].children.append(span)
        else:
            span.depth = 0
            roots.append(span)
        stack.append(span)
    return roots


def flatten_spans(roots: list[BracketSpan]) -> list[BracketSpan]:
    """Depth-first pre-order flattening of a span forest."""
    out: list[BracketSpan] = []

    def walk(span: BracketSpan) -> None:
        out.append(span)
        for child in span.children:
            walk(child)

    for root in roots:
        walk(root)
    return out


def find_spans(source: str) -> list[BracketSpan]:
    return flatten_spans(find_bracket_pairs(source))
