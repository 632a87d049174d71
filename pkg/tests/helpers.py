"""Shared test utilities.

Holds an independent character-level bracket matcher used as an oracle
against the token-based implementation, a random source generator for
property tests, and a deterministic fixture corpus builder.
"""

from __future__ import annotations

import random

# --- independent bracket oracle ---------------------------------------------
#
# Works directly on characters: first blank out string literals and
# comments, then run a plain stack matcher. Deliberately shares no code
# with the package. The property-test generator below only emits
# sources this scanner understands (no escapes, no nested block
# comments, no raw strings), so both sides interpret every input the
# same way.

_OPEN = {"(": "paren", "{": "brace", "[": "square"}
_CLOSE = {")": "paren", "}": "brace", "]": "square"}


def blank_noncode(text: str) -> str:
    out = list(text)
    i, n = 0, len(text)
    while i < n:
        if text.startswith("//", i):
            j = text.find("\n", i)
            j = n if j == -1 else j
            for k in range(i, j):
                out[k] = " "
            i = j
        elif text.startswith("/*", i):
            j = text.find("*/", i + 2)
            j = n if j == -1 else j + 2
            for k in range(i, j):
                out[k] = " "
            i = j
        elif text[i] == '"':
            j = i + 1
            while j < n and text[j] != '"':
                j += 1
            j = min(j + 1, n)
            for k in range(i, j):
                out[k] = " "
            i = j
        else:
            i += 1
    return "".join(out)


def oracle_pairs(text: str) -> set[tuple[str, int, int]]:
    """(kind, open offset, close offset) per matched non-angle pair."""
    blanked = blank_noncode(text)
    stack: list[tuple[str, int]] = []
    pairs: set[tuple[str, int, int]] = set()
    for i, c in enumerate(blanked):
        if c in _OPEN:
            stack.append((_OPEN[c], i))
        elif c in _CLOSE:
            kind = _CLOSE[c]
            if stack and stack[-1][0] == kind:
                _, open_at = stack.pop()
                pairs.add((kind, open_at, i))
            # mismatched closer: dropped, opener stays pending
    return pairs


# letters avoid r and b so a generated quote never reads as a raw or
# byte string prefix to the real lexer
_LETTERS = "cdefghij"
_FILLER = _LETTERS + "()[]{} "


def gen_bracket_source(rng: random.Random) -> str:
    """Random bracket soup with strings and comments mixed in."""
    pieces: list[str] = []
    for _ in range(rng.randrange(5, 60)):
        roll = rng.random()
        if roll < 0.45:
            pieces.append(rng.choice("()[]{}"))
        elif roll < 0.60:
            pieces.append(
                "".join(rng.choice(_LETTERS) for _ in range(rng.randrange(1, 5)))
            )
        elif roll < 0.70:
            pieces.append(" " if rng.random() < 0.7 else "\n")
        elif roll < 0.80:
            body = "".join(rng.choice(_FILLER) for _ in range(rng.randrange(0, 8)))
            pieces.append(f'"{body}"')
        elif roll < 0.90:
            body = "".join(rng.choice(_FILLER) for _ in range(rng.randrange(0, 8)))
            pieces.append(f"//{body}\n")
        else:
            body = "".join(rng.choice(_FILLER) for _ in range(rng.randrange(0, 8)))
            pieces.append(f"/*{body}*/")
    return "".join(pieces)


# --- deterministic fixture corpus --------------------------------------------

_TEMPLATES = [
    'fn main() { let x@N@ = 1; println!("{}", x@N@); }',
    "#![feature(gate@N@, other_gate@N@)]\nfn main() { let v = vec![@N@]; }",
    "fn pair@N@<T: Clone>(a: T, b: T) -> (T, T) { (a.clone(), b) }",
    "struct S@N@ { field: [u8; 4] }\n"
    "impl S@N@ { fn get(&self) -> u8 { self.field[0] } }",
    "fn main() {\n"
    "    // comment with (brackets) [inside]\n"
    '    let s = "literal with } brace";\n'
    '    let r = r#"raw "quoted" text @N@"#;\n'
    "}",
    "fn apply@N@(f: impl Fn(i32) -> i32) -> i32 { f(@N@) }",
    "static ARR@N@: [i32; 3] = [1, 2, @N@];",
    "fn m@N@(x: Option<i32>) -> i32 { match x { Some(v) => v, None => @N@ } }",
    "mod inner@N@ { pub fn f() -> Vec<Vec<u8>> { vec![vec![@N@]] } }",
    "#[feature(custom@N@)]\nfn g@N@() { /* block (comment) */ let c = 'x'; }",
    "fn main() { let add = |a: i32, c: i32| (a + c); let _ = add(@N@, 2); }",
    "trait T@N@ { fn m(&self) -> u64; }\n"
    "impl T@N@ for u64 { fn m(&self) -> u64 { *self + @N@ } }",
]


def fixture_corpus_texts(count: int = 50) -> list[str]:
    return [
        _TEMPLATES[i % len(_TEMPLATES)].replace("@N@", str(i)) for i in range(count)
    ]
