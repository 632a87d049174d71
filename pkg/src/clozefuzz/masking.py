"""Cloze-style masking of bracket interiors.

Each matched bracket pair of a seed program yields one variant whose
interior is replaced by a backend-specific sentinel at render time.
The delimiters themselves always stay in the text, so the completion
model sees the syntactic scaffolding around the hole.
"""

from __future__ import annotations

from dataclasses import dataclass

from .brackets import BracketKind, BracketSpan, find_spans
from .lexer import TokenKind, lex, significant_tokens


@dataclass(frozen=True)
class MaskedVariant:
    seed_id: str
    span: BracketSpan
    prefix: str
    suffix: str
    original_interior: str
    special: bool

    @property
    def seed_text(self) -> str:
        return self.prefix + self.original_interior + self.suffix


def feature_attribute_ranges(source: str) -> list[tuple[int, int]]:
    """Character ranges of feature-gate attributes.

    Matches `#![feature(...)]` and `#[feature(...)]` modulo whitespace,
    from the '#' through the closing ']'. Ranges are half-open.
    """
    sig = significant_tokens(lex(source).tokens)
    square_close = {
        s.open_at: s.close_at
        for s in find_spans(source)
        if s.kind is BracketKind.SQUARE
    }

    def tok(i: int, kind: TokenKind, text: str) -> bool:
        return i < len(sig) and sig[i].kind is kind and sig[i].text == text

    ranges: list[tuple[int, int]] = []
    for i, t in enumerate(sig):
        if not (t.kind is TokenKind.PUNCT and t.text == "#"):
            continue
        j = i + 1
        if tok(j, TokenKind.PUNCT, "!"):
            j += 1
        if not tok(j, TokenKind.OPEN_BRACKET, "["):
            continue
        if not tok(j + 1, TokenKind.IDENTIFIER, "feature"):
            continue
        if not tok(j + 2, TokenKind.OPEN_BRACKET, "("):
            continue
        close_at = square_close.get(sig[j].start)
        if close_at is None:
            continue
        ranges.append((t.start, close_at + 1))
    return ranges


def cloze(source: str, seed_id: str = "") -> list[MaskedVariant]:
    """One variant per matched bracket pair, in span DFS order.

    Empty interiors are masked too; widening an empty pair is a
    legitimate mutation.
    """
    attr_ranges = feature_attribute_ranges(source)
    variants: list[MaskedVariant] = []
    for span in find_spans(source):
        lo, hi = span.interior
        special = any(
            a <= span.open_at and span.close_at < b for a, b in attr_ranges
        )
        variants.append(
            MaskedVariant(
                seed_id=seed_id,
                span=span,
                prefix=source[:lo],
                suffix=source[span.close_at :],
                original_interior=source[lo:hi],
                special=special,
            )
        )
    return variants


def is_special_masked(variant: MaskedVariant) -> bool:
    """Whether the masked span sits inside a feature-gate attribute.

    Recomputed from the reconstructed seed text; agrees with the flag
    stored on the variant.
    """
    for a, b in feature_attribute_ranges(variant.seed_text):
        if a <= variant.span.open_at and variant.span.close_at < b:
            return True
    return False


def render(variant: MaskedVariant, sentinel: str) -> str:
    """Substitute the sentinel for the masked interior."""
    if not sentinel:
        raise ValueError("sentinel must be non-empty")
    return variant.prefix + sentinel + variant.suffix
