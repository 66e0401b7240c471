"""Frontend for the supported Verilog subset.

Accepted inputs: a single `module` with a non-ANSI port list, `input` /
`output` / `wire` declarations with optional `[msb:lsb]` ranges, and
`assign` statements whose right-hand sides use identifiers, decimal or
based constants, parentheses, the 18 binary operators, and ternaries whose
condition is a single-bit select of the reserved key port `lock_key`.
Anything else is a hard error: silently dropping constructs would corrupt
every operation count downstream.

Emission is canonical and deterministic: declarations in order, one assign
per line, every compound expression fully parenthesized, and the key port
rendered as `input [k-1:0] lock_key` appended last.  `parse(emit(d))` is
structurally equal to `d` and `emit` is idempotent.
"""

from __future__ import annotations

import re
from typing import NamedTuple, Optional

from .errors import ParseError
from .ir import (
    Assign,
    BinOp,
    Const,
    Design,
    Expr,
    KeyMux,
    OpType,
    Port,
    Var,
    Wire,
    validate_design,
)

KEY_PORT = "lock_key"

OP_TOKEN = {
    OpType.ADD: "+",
    OpType.SUB: "-",
    OpType.MUL: "*",
    OpType.DIV: "/",
    OpType.MOD: "%",
    OpType.POW: "**",
    OpType.SHL: "<<",
    OpType.SHR: ">>",
    OpType.BIT_AND: "&",
    OpType.BIT_OR: "|",
    OpType.BIT_XOR: "^",
    OpType.BIT_XNOR: "~^",
    OpType.LT: "<",
    OpType.GT: ">",
    OpType.LE: "<=",
    OpType.GE: ">=",
    OpType.EQ: "==",
    OpType.NE: "!=",
}
TOKEN_OP = {v: k for k, v in OP_TOKEN.items()}
TOKEN_OP["^~"] = OpType.BIT_XNOR

# Binary precedence levels, loosest first; ** binds tightest and is
# right-associative, everything else is left-associative.
_LEVELS = (
    ("|",),
    ("^", "~^", "^~"),
    ("&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("<<", ">>"),
    ("+", "-"),
    ("*", "/", "%"),
    ("**",),
)

_KEYWORDS = {"module", "endmodule", "input", "output", "wire", "assign"}

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<lcomment>//[^\n]*)
      | (?P<bcomment>/\*.*?\*/)
      | (?P<based>\d*'[bBdDhHoO][0-9a-fA-F_xzXZ]+)
      | (?P<number>\d+)
      | (?P<id>[A-Za-z_][A-Za-z0-9_$]*)
      | (?P<punct>\*\*|<<|>>|<=|>=|==|!=|~\^|\^~|[()\[\]:;,?=+\-*/%&|^<>])
    """,
    re.VERBOSE | re.DOTALL,
)


class Token(NamedTuple):
    kind: str  # "id" | "keyword" | "number" | "based" | "punct" | "eof"
    text: str
    line: int
    column: int


class SourceSpan(NamedTuple):
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line = 1
    col = 1
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        lexeme = m.group()
        if kind not in ("ws", "lcomment", "bcomment"):
            if kind == "id" and lexeme in _KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, lexeme, line, col))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _KeyBit(NamedTuple):
    """Parsed `lock_key[i]`; only legal as a ternary condition."""

    index: int


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.signals: dict[str, tuple[str, int]] = {}  # name -> (kind, width)
        self.key_width = 0
        self.key_indices: list[int] = []

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message, tok: Optional[Token] = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.column)

    def expect(self, kind, text=None) -> Token:
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            got = tok.text or tok.kind
            self.error(f"expected {want!r}, found {got!r}")
        return self.next()

    # --- module structure ---

    def parse_module(self) -> Design:
        self.expect("keyword", "module")
        name = self.expect("id").text
        self.expect("punct", "(")
        header: list[str] = []
        if self.peek().text != ")":
            header.append(self.expect("id").text)
            while self.peek().text == ",":
                self.next()
                header.append(self.expect("id").text)
        self.expect("punct", ")")
        self.expect("punct", ";")

        ports: list[Port] = []
        wires: list[Wire] = []
        assigns: list[Assign] = []
        while True:
            tok = self.peek()
            if tok.kind == "keyword" and tok.text in ("input", "output", "wire"):
                self._parse_decl(tok.text, ports, wires)
            elif tok.kind == "keyword" and tok.text == "assign":
                assigns.append(self._parse_assign())
            elif tok.kind == "keyword" and tok.text == "endmodule":
                self.next()
                break
            else:
                self.error("expected a declaration, assign, or endmodule")
        if self.peek().kind != "eof":
            self.error("trailing input after endmodule")

        self._check_header(header, ports)
        design = Design(name, tuple(ports), tuple(wires), tuple(assigns), self.key_width)
        self._check_key_indices()
        validate_design(design)
        return design

    def _parse_decl(self, kind: str, ports, wires) -> None:
        self.next()
        width = 1
        if self.peek().text == "[":
            width = self._parse_range()
        while True:
            tok = self.expect("id")
            name = tok.text
            if name == KEY_PORT:
                if kind != "input":
                    self.error(f"{KEY_PORT} must be declared as an input", tok)
                if self.key_width:
                    self.error(f"duplicate declaration of {KEY_PORT}", tok)
                self.key_width = width
            else:
                if name in self.signals:
                    self.error(f"duplicate declaration of {name!r}", tok)
                self.signals[name] = (kind, width)
                if kind == "wire":
                    wires.append(Wire(name, width))
                else:
                    ports.append(Port(name, kind, width))
            if self.peek().text == ",":
                self.next()
                continue
            break
        self.expect("punct", ";")

    def _parse_range(self) -> int:
        self.expect("punct", "[")
        msb = int(self.expect("number").text)
        self.expect("punct", ":")
        lsb = int(self.expect("number").text)
        self.expect("punct", "]")
        if lsb > msb:
            self.error(f"descending range [{msb}:{lsb}] not supported")
        return msb - lsb + 1

    def _parse_assign(self) -> Assign:
        self.next()
        tok = self.expect("id")
        target = tok.text
        decl = self.signals.get(target)
        if decl is None:
            self.error(f"assignment to undeclared identifier {target!r}", tok)
        if decl[0] == "input":
            self.error(f"cannot assign to input {target!r}", tok)
        self.expect("punct", "=")
        rhs = self.parse_expr()
        if isinstance(rhs, _KeyBit):
            self.error("a key-bit select may only appear as a ternary condition")
        self.expect("punct", ";")
        return Assign(target, rhs)

    def _check_header(self, header, ports) -> None:
        declared = [p.name for p in ports]
        if self.key_width:
            declared.append(KEY_PORT)
        missing = [n for n in declared if n not in header]
        extra = [n for n in header if n not in declared]
        if missing:
            self.error(f"port {missing[0]!r} not listed in module header")
        if extra:
            self.error(f"header port {extra[0]!r} has no input/output declaration")
        if len(header) != len(set(header)):
            self.error("duplicate name in module header")

    def _check_key_indices(self) -> None:
        if sorted(self.key_indices) != list(range(self.key_width)):
            self.error(
                f"{KEY_PORT} is {self.key_width} bits wide but the design uses "
                f"bit indices {sorted(set(self.key_indices))}"
            )

    # --- expressions ---

    def parse_expr(self) -> Expr:
        cond = self._parse_binary(0)
        if self.peek().text != "?":
            return cond
        qtok = self.next()
        if not isinstance(cond, _KeyBit):
            raise ParseError(
                f"ternary condition must be a {KEY_PORT}[i] select (out of subset)",
                qtok.line,
                qtok.column,
            )
        when_one = self.parse_expr()
        self.expect("punct", ":")
        when_zero = self.parse_expr()
        for branch in (when_one, when_zero):
            if isinstance(branch, _KeyBit):
                self.error("a key-bit select may only appear as a ternary condition")
        self.key_indices.append(cond.index)
        return KeyMux(cond.index, when_one, when_zero)

    def _parse_binary(self, level: int) -> Expr:
        if level == len(_LEVELS):
            return self._parse_primary()
        ops = _LEVELS[level]
        right_assoc = ops == ("**",)
        left = self._parse_binary(level + 1)
        while self.peek().kind == "punct" and self.peek().text in ops:
            optok = self.next()
            if isinstance(left, _KeyBit):
                self.error("a key-bit select may only appear as a ternary condition", optok)
            if right_assoc:
                right = self._parse_binary(level)
            else:
                right = self._parse_binary(level + 1)
            if isinstance(right, _KeyBit):
                self.error("a key-bit select may only appear as a ternary condition", optok)
            left = BinOp(TOKEN_OP[optok.text], left, right)
            if right_assoc:
                break
        return left

    def _parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.text == "(":
            self.next()
            inner = self.parse_expr()
            self.expect("punct", ")")
            return inner
        if tok.kind == "number":
            self.next()
            return Const(int(tok.text), None)
        if tok.kind == "based":
            self.next()
            return self._parse_based(tok)
        if tok.kind == "id":
            self.next()
            if tok.text == KEY_PORT:
                self.expect("punct", "[")
                idx = int(self.expect("number").text)
                self.expect("punct", "]")
                return _KeyBit(idx)
            if self.peek().text == "[":
                self.error(f"bit select on {tok.text!r}: only {KEY_PORT}[i] is supported")
            if tok.text not in self.signals:
                self.error(f"reference to undeclared identifier {tok.text!r}", tok)
            return Var(tok.text)
        self.error(f"expected an expression, found {tok.text or tok.kind!r}")

    def _parse_based(self, tok: Token) -> Const:
        size_txt, rest = tok.text.split("'", 1)
        base_ch = rest[0].lower()
        digits = rest[1:].replace("_", "")
        if any(c in "xzXZ" for c in digits):
            self.error("x/z digits are out of subset", tok)
        base = {"b": 2, "d": 10, "h": 16, "o": 8}[base_ch]
        try:
            value = int(digits, base)
        except ValueError:
            self.error(f"invalid base-{base} constant {tok.text!r}", tok)
        width = int(size_txt) if size_txt else None
        return Const(value, width)


def parse(text: str) -> Design:
    """Parse source text into a Design, or raise ParseError with a position."""
    return _Parser(tokenize(text)).parse_module()


def parse_file(path) -> Design:
    with open(path, "r", encoding="utf-8") as fh:
        return parse(fh.read())


def _const_text(c: Const) -> str:
    if c.width is None:
        return str(c.value)
    return f"{c.width}'d{c.value}"


def render_expr(expr: Expr) -> str:
    parts: list[str] = []
    stack: list = [expr]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
        elif isinstance(item, Var):
            parts.append(item.name)
        elif isinstance(item, Const):
            parts.append(_const_text(item))
        elif isinstance(item, BinOp):
            # list order is reversed by pop(): renders "(lhs op rhs)"
            stack.extend((")", item.rhs, f" {OP_TOKEN[item.op]} ", item.lhs, "("))
        else:
            stack.extend(
                (")", item.when_zero, " : ", item.when_one, " ? ",
                 f"{KEY_PORT}[{item.index}]", "(")
            )
    return "".join(parts)


def _decl_line(kind: str, name: str, width: int) -> str:
    if width > 1:
        return f"  {kind} [{width - 1}:0] {name};"
    return f"  {kind} {name};"


def emit(design: Design) -> str:
    """Render a Design as canonical source text (UTF-8, LF newlines)."""
    header = [p.name for p in design.ports]
    if design.key_length > 0:
        header.append(KEY_PORT)
    lines = [f"module {design.name}({', '.join(header)});"]
    for p in design.ports:
        lines.append(_decl_line(p.direction, p.name, p.width))
    if design.key_length > 0:
        lines.append(f"  input [{design.key_length - 1}:0] {KEY_PORT};")
    for w in design.wires:
        lines.append(_decl_line("wire", w.name, w.width))
    for a in design.assigns:
        lines.append(f"  assign {a.target} = {render_expr(a.rhs)};")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def emit_file(design: Design, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(emit(design))
