"""MiniC lexer.

Coordinates are (line, byte column), both 1-based; a tab advances the
column by one like any other byte, and multi-byte UTF-8 characters
advance it by their encoded length, so columns are stable across editors.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..symtab import Coordinate
from .diagnostics import CompileError, Diagnostic

KEYWORDS = frozenset("""
    char short int unsigned float double void
    struct union enum typedef const volatile static
    if else while for return
""".split())

_PUNCT3 = ("<<=", ">>=")  # recognized only to reject with a clear message
_PUNCT2 = ("&&", "||", "==", "!=", "<=", ">=", "<<", ">>", "++", "--", "->",
           "+=", "-=", "*=", "/=")
_PUNCT1 = "+-*/%=<>!&|^~.,;:()[]{}"

_ESCAPES = {"n": 10, "t": 9, "r": 13, "0": 0, "\\": 92, "'": 39, '"': 34,
            "a": 7, "b": 8, "f": 12, "v": 11}


@dataclass(frozen=True)
class Token:
    kind: str       # 'ident', 'kw', 'int', 'float', 'char', 'string',
                    # 'punct', 'eof'
    text: str
    value: object   # numeric value or bytes for strings
    coord: Coordinate

    def is_punct(self, *texts: str) -> bool:
        return self.kind == "punct" and self.text in texts

    def is_kw(self, *names: str) -> bool:
        return self.kind == "kw" and self.text in names


class _Scanner:
    def __init__(self, text: str, file: str):
        self.text = text
        self.file = file
        self.pos = 0
        self.line = 1
        self.col = 1
        self.diags: list[Diagnostic] = []

    def coord(self) -> Coordinate:
        return Coordinate(self.file, self.col, self.line)

    def peek(self, off: int = 0) -> str:
        i = self.pos + off
        return self.text[i] if i < len(self.text) else ""

    def advance(self, n: int = 1) -> None:
        for _ in range(n):
            ch = self.text[self.pos]
            self.pos += 1
            if ch == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += len(ch.encode("utf-8"))

    def error(self, message: str, coord: Coordinate | None = None) -> None:
        self.diags.append(Diagnostic(coord or self.coord(), message))


def _scan_escape(s: _Scanner) -> int:
    s.advance()  # backslash
    ch = s.peek()
    if ch == "x":
        s.advance()
        digits = ""
        while s.peek() in "0123456789abcdefABCDEF":
            digits += s.peek()
            s.advance()
        if not digits:
            s.error("\\x escape needs hex digits")
            return 0
        return int(digits, 16) & 0xFF
    if ch in _ESCAPES:
        s.advance()
        return _ESCAPES[ch]
    s.error(f"unknown escape \\{ch or '<eof>'}")
    if ch:
        s.advance()
    return 0


def lex(text: str, file: str) -> list[Token]:
    """Tokenize; raises CompileError when any lexical error was seen."""
    s = _Scanner(text, file)
    tokens: list[Token] = []

    while s.pos < len(s.text):
        ch = s.peek()
        if ch in " \t\r\n":
            s.advance()
            continue
        if ch == "/" and s.peek(1) == "/":
            while s.pos < len(s.text) and s.peek() != "\n":
                s.advance()
            continue
        if ch == "/" and s.peek(1) == "*":
            start = s.coord()
            s.advance(2)
            while s.pos < len(s.text) and not (s.peek() == "*" and s.peek(1) == "/"):
                s.advance()
            if s.pos >= len(s.text):
                s.error("unterminated comment", start)
            else:
                s.advance(2)
            continue

        coord = s.coord()
        if ch.isalpha() or ch == "_":
            start = s.pos
            while s.peek().isalnum() or s.peek() == "_":
                s.advance()
            word = s.text[start:s.pos]
            kind = "kw" if word in KEYWORDS else "ident"
            tokens.append(Token(kind, word, word, coord))
            continue

        if ch.isdigit() or (ch == "." and s.peek(1).isdigit()):
            start = s.pos
            is_float = False
            if ch == "0" and s.peek(1) in "xX":
                s.advance(2)
                while s.peek() in "0123456789abcdefABCDEF":
                    s.advance()
                text_ = s.text[start:s.pos]
                tokens.append(Token("int", text_, int(text_, 16), coord))
                continue
            while s.peek().isdigit():
                s.advance()
            if s.peek() == "." and s.peek(1) != ".":
                is_float = True
                s.advance()
                while s.peek().isdigit():
                    s.advance()
            if s.peek() in "eE" and (s.peek(1).isdigit()
                                     or (s.peek(1) in "+-" and s.peek(2).isdigit())):
                is_float = True
                s.advance()
                if s.peek() in "+-":
                    s.advance()
                while s.peek().isdigit():
                    s.advance()
            text_ = s.text[start:s.pos]
            if is_float:
                single = False
                if s.peek() in "fF":
                    single = True
                    s.advance()
                tokens.append(Token("float", text_, (float(text_), single), coord))
            else:
                tokens.append(Token("int", text_, int(text_, 10), coord))
            continue

        if ch == "'":
            s.advance()
            if s.peek() == "\\":
                value = _scan_escape(s)
            elif s.peek() and s.peek() != "'":
                value = ord(s.peek()) & 0xFF if ord(s.peek()) < 256 else 0
                s.advance()
            else:
                s.error("empty character literal", coord)
                value = 0
            if s.peek() == "'":
                s.advance()
            else:
                s.error("unterminated character literal", coord)
            tokens.append(Token("char", "'...'", value, coord))
            continue

        if ch == '"':
            s.advance()
            data = bytearray()
            while True:
                c = s.peek()
                if not c or c == "\n":
                    s.error("unterminated string literal", coord)
                    break
                if c == '"':
                    s.advance()
                    break
                if c == "\\":
                    data.append(_scan_escape(s))
                else:
                    data.extend(c.encode("utf-8"))
                    s.advance()
            tokens.append(Token("string", '"..."', bytes(data), coord))
            continue

        three = s.text[s.pos:s.pos + 3]
        if three in _PUNCT3:
            s.error(f"operator {three!r} is not part of MiniC")
            s.advance(3)
            continue
        two = s.text[s.pos:s.pos + 2]
        if two in _PUNCT2:
            s.advance(2)
            tokens.append(Token("punct", two, two, coord))
            continue
        if ch in _PUNCT1:
            s.advance()
            tokens.append(Token("punct", ch, ch, coord))
            continue

        s.error(f"stray character {ch!r}")
        s.advance()

    tokens.append(Token("eof", "", None, s.coord()))
    if s.diags:
        raise CompileError(s.diags)
    return tokens
