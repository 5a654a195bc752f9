"""Reading Church source: tokens, data, and desugaring to the core forms.

The reader produces ordinary Church data (symbols, numbers, pairs), since
expressions are values.  Pairs that open a form carry their source position.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .values import (
    NIL,
    Char,
    ChurchError,
    Pair,
    Symbol,
    make_list,
    sym,
    to_pylist,
    to_str,
)

OPEN, CLOSE, QUOTE_MARK = "open-paren", "close-paren", "quote-mark"
SYMBOL, INTEGER, REAL = "symbol", "integer-literal", "real-literal"
BOOLEAN, CHARACTER = "boolean-literal", "character-literal"


class ReadError(ChurchError):
    """Lexing, parsing or desugaring failure, with a source position."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} at line {position[0]}, column {position[1]}"
        super().__init__(message)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: tuple[int, int]


_INT_RE = re.compile(r"[+-]?\d+\Z")
_REAL_RE = re.compile(r"[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?\Z")
_DELIMS = set("()'; \t\r\n\f\v")
_ILLEGAL = set('"`,[]{}|')
_BOOLEANS = {"true": True, "false": False, "#t": True, "#f": False}
_CHAR_NAMES = {"space": " ", "newline": "\n", "tab": "\t"}


def tokenize(source: str) -> list[Token]:
    tokens = []
    i, n = 0, len(source)
    line, line_start = 1, 0
    while i < n:
        c = source[i]
        pos = (line, i - line_start + 1)
        if c == "\n":
            line += 1
            line_start = i + 1
            i += 1
        elif c.isspace():
            i += 1
        elif c == ";":
            while i < n and source[i] != "\n":
                i += 1
        elif c == "(":
            tokens.append(Token(OPEN, c, pos))
            i += 1
        elif c == ")":
            tokens.append(Token(CLOSE, c, pos))
            i += 1
        elif c == "'":
            tokens.append(Token(QUOTE_MARK, c, pos))
            i += 1
        elif c in _ILLEGAL:
            raise ReadError(f"illegal character {c!r}", pos)
        elif source.startswith("#\\", i):
            j = i + 2
            if j >= n or source[j].isspace():
                raise ReadError("unterminated character literal", pos)
            j += 1
            while j < n and source[j] not in _DELIMS:
                j += 1
            text = source[i:j]
            name = text[2:]
            if len(name) > 1 and name not in _CHAR_NAMES:
                raise ReadError(f"unknown character name {name!r}", pos)
            tokens.append(Token(CHARACTER, text, pos))
            i = j
        else:
            j = i
            while j < n and source[j] not in _DELIMS:
                if source[j] in _ILLEGAL:
                    raise ReadError(
                        f"illegal character {source[j]!r}", (line, j - line_start + 1)
                    )
                j += 1
            text = source[i:j]
            if text in _BOOLEANS:
                kind = BOOLEAN
            elif _INT_RE.match(text):
                kind = INTEGER
            elif _REAL_RE.match(text):
                kind = REAL
            elif text.startswith("#"):
                raise ReadError(f"illegal token {text!r}", pos)
            else:
                kind = SYMBOL
            tokens.append(Token(kind, text, pos))
            i = j
    return tokens


def _atom(tok: Token):
    if tok.kind == INTEGER:
        return int(tok.text)
    if tok.kind == REAL:
        return float(tok.text)
    if tok.kind == BOOLEAN:
        return _BOOLEANS[tok.text]
    if tok.kind == CHARACTER:
        name = tok.text[2:]
        return Char(_CHAR_NAMES.get(name, name))
    return sym(tok.text)


_QUOTE = sym("quote")
_DOT = "."
_EMPTY_OK = (sym("lambda"), sym("let"), sym("let*"))


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def expr(self, quoted):
        if self.i >= len(self.tokens):
            raise ReadError("unexpected end of input")
        tok = self.tokens[self.i]
        self.i += 1
        if tok.kind == OPEN:
            return self.form(tok, quoted)
        if tok.kind == CLOSE:
            raise ReadError("unbalanced ')'", tok.position)
        if tok.kind == QUOTE_MARK:
            inner = self.expr(True)
            return Pair(_QUOTE, Pair(inner, NIL), tok.position)
        if tok.kind == SYMBOL and tok.text == _DOT:
            raise ReadError("unexpected '.'", tok.position)
        return _atom(tok)

    def form(self, open_tok, quoted):
        items = []
        tail = NIL
        while True:
            if self.i >= len(self.tokens):
                raise ReadError("unbalanced '('", open_tok.position)
            tok = self.tokens[self.i]
            if tok.kind == CLOSE:
                self.i += 1
                break
            if tok.kind == SYMBOL and tok.text == _DOT:
                if not items:
                    raise ReadError("unexpected '.'", tok.position)
                self.i += 1
                tail = self.expr(quoted)
                if self.i >= len(self.tokens) or self.tokens[self.i].kind != CLOSE:
                    raise ReadError("expected ')' after dotted tail", tok.position)
                self.i += 1
                break
            # Everything after a leading `quote` is data, where () is nil; so
            # are empty formals and binding lists.
            data = quoted or (
                len(items) == 1 and items[0] in _EMPTY_OK
            ) or (bool(items) and items[0] is _QUOTE)
            items.append(self.expr(data))
        if not items:
            if not quoted:
                raise ReadError("empty application '()'", open_tok.position)
            return NIL
        out = make_list(items, tail)
        out.pos = open_tok.position
        return out


def parse(tokens: list[Token]) -> list:
    """Parse tokens into one datum per top-level form."""
    p = _Parser(tokens)
    forms = []
    while p.i < len(p.tokens):
        forms.append(p.expr(False))
    return forms


def read(source: str) -> list:
    return parse(tokenize(source))


def read_program(source: str) -> list:
    """Tokenize, parse and desugar a whole program."""
    return [desugar(form) for form in read(source)]


# Desugaring -----------------------------------------------------------------

S = sym
_LAMBDA, _IF, _DEFINE = S("lambda"), S("if"), S("define")
_LET, _LETSTAR, _COND, _CASE = S("let"), S("let*"), S("cond"), S("case")
_AND, _OR, _ELSE = S("and"), S("or"), S("else")
_EQUAL, _ERROR = S("equal?"), S("error")
# Names the tokenizer cannot produce, so user code cannot capture them.
_OR_TMP = Symbol("#:or-tmp")
_CASE_KEY = Symbol("#:case-key")

CORE_FORMS = frozenset(["quote", "lambda", "if", "define"])


def _err(msg, node):
    return ReadError(msg, getattr(node, "pos", None))


def _items(node, what):
    try:
        return to_pylist(node)
    except ChurchError:
        raise _err(f"malformed {what}", node) from None


def _check_formals(formals, node):
    if type(formals) is Symbol:
        return
    seen = set()
    p = formals
    while type(p) is Pair:
        if type(p.first) is not Symbol:
            raise _err("lambda formals must be symbols", node)
        if p.first in seen:
            raise _err(f"duplicate formal {p.first}", node)
        seen.add(p.first)
        p = p.rest
    if p is not NIL and type(p) is not Symbol:
        raise _err("malformed lambda formals", node)


def _L(*items, pos=None):
    out = make_list(list(items))
    if pos is not None and type(out) is Pair:
        out.pos = pos
    return out


def desugar(node):
    """Rewrite derived forms (let, let*, cond, case, and, or, define sugar)."""
    if type(node) is not Pair:
        return node
    head = node.first
    pos = node.pos
    if type(head) is Symbol:
        if head is _QUOTE:
            items = _items(node, "quote")
            if len(items) != 2:
                raise _err("quote takes exactly one expression", node)
            return node
        if head is _LAMBDA:
            items = _items(node, "lambda")
            if len(items) != 3:
                raise _err("lambda takes formals and exactly one body expression", node)
            _check_formals(items[1], node)
            return _L(_LAMBDA, items[1], desugar(items[2]), pos=pos)
        if head is _IF:
            items = _items(node, "if")
            if len(items) != 4:
                raise _err("if takes exactly three expressions", node)
            return _L(_IF, *[desugar(x) for x in items[1:]], pos=pos)
        if head is _DEFINE:
            items = _items(node, "define")
            if len(items) != 3:
                raise _err("define takes a name and exactly one expression", node)
            target = items[1]
            if type(target) is Pair:
                name = target.first
                if type(name) is not Symbol:
                    raise _err("malformed define", node)
                lam = _L(_LAMBDA, target.rest, items[2], pos=pos)
                return _L(_DEFINE, name, desugar(lam), pos=pos)
            if type(target) is not Symbol:
                raise _err("define needs a symbol", node)
            return _L(_DEFINE, target, desugar(items[2]), pos=pos)
        if head is _LET:
            return desugar(_let(node))
        if head is _LETSTAR:
            return desugar(_let_star(node))
        if head is _COND:
            return desugar(_cond(node))
        if head is _CASE:
            return desugar(_case(node))
        if head is _AND:
            return desugar(_and(node))
        if head is _OR:
            return desugar(_or(node))
    items = _items(node, "application")
    return _L(*[desugar(x) for x in items], pos=pos)


def _bindings(node, what):
    items = _items(node, what)
    if len(items) != 3:
        raise _err(f"{what} takes bindings and exactly one body expression", node)
    names, defs = [], []
    for b in _items(items[1], f"{what} bindings"):
        parts = _items(b, f"{what} binding") if type(b) is Pair else None
        if not parts or len(parts) != 2 or type(parts[0]) is not Symbol:
            raise _err(f"malformed {what} binding", node)
        names.append(parts[0])
        defs.append(parts[1])
    return names, defs, items[2]


def _let(node):
    names, defs, body = _bindings(node, "let")
    if len(set(names)) != len(names):
        raise _err("duplicate let binding", node)
    lam = _L(_LAMBDA, make_list(names), body, pos=node.pos)
    return _L(lam, *defs, pos=node.pos)


def _let_star(node):
    names, defs, body = _bindings(node, "let*")
    for name, d in reversed(list(zip(names, defs))):
        body = _L(_LET, _L(_L(name, d)), body, pos=node.pos)
    return body


def _fallthrough(what, pos):
    return _L(_ERROR, _L(_QUOTE, sym(f"{what}-fell-through")), pos=pos)


def _cond(node):
    clauses = _items(node, "cond")[1:]
    out = _fallthrough("cond", node.pos)
    for clause in reversed(clauses):
        parts = _items(clause, "cond clause") if type(clause) is Pair else None
        if not parts or len(parts) != 2:
            raise _err("cond clauses take a test and one expression", node)
        test, expr = parts
        if test is _ELSE:
            out = expr
        else:
            out = _L(_IF, test, expr, out, pos=node.pos)
    return out


def _case_datum(d):
    # Tolerate quoted data inside case clauses, e.g. (('rain-str) 0.9).
    if type(d) is Pair and d.first is _QUOTE and type(d.rest) is Pair:
        return d.rest.first
    return d


def _case(node):
    items = _items(node, "case")
    if len(items) < 2:
        raise _err("case needs a key expression", node)
    key, clauses = items[1], items[2:]
    out = _fallthrough("case", node.pos)
    for clause in reversed(clauses):
        parts = _items(clause, "case clause") if type(clause) is Pair else None
        if not parts or len(parts) != 2:
            raise _err("case clauses take a datum list and one expression", node)
        data, expr = parts
        if data is _ELSE:
            out = expr
            continue
        tests = [
            _L(_EQUAL, _CASE_KEY, _L(_QUOTE, _case_datum(d)))
            for d in _items(data, "case datum list")
        ]
        out = _L(_IF, _L(_OR, *tests), expr, out, pos=node.pos)
    lam = _L(_LAMBDA, _L(_CASE_KEY), out, pos=node.pos)
    return _L(lam, key, pos=node.pos)


def _and(node):
    args = _items(node, "and")[1:]
    if not args:
        return True
    out = args[-1]
    for a in reversed(args[:-1]):
        out = _L(_IF, a, out, False, pos=node.pos)
    return out


def _or(node):
    args = _items(node, "or")[1:]
    if not args:
        return False
    out = args[-1]
    for a in reversed(args[:-1]):
        lam = _L(_LAMBDA, _L(_OR_TMP), _L(_IF, _OR_TMP, _OR_TMP, out), pos=node.pos)
        out = _L(lam, a, pos=node.pos)
    return out


def contains_form(node, name: str) -> bool:
    """Whether ``name`` appears in operator position outside quoted data."""
    stack = [node]
    while stack:
        n = stack.pop()
        if type(n) is not Pair:
            continue
        if n.first is _QUOTE:
            continue
        if type(n.first) is Symbol and n.first == name:
            return True
        p = n
        while type(p) is Pair:
            stack.append(p.first)
            p = p.rest
    return False


def to_source(node) -> str:
    return to_str(node)
