"""Reader, printer and validator for ``.dfoci`` influence files.

A file holds predicate/subtask declarations and influence statements::

    predicate taxi-at/1
    subtask pickup/1
    pickup(P): {taxi-at(L), at(P,L), A} -+1-> in-taxi(P)
    {A} -> R

``-+1->`` marks an influence from the current step onto the next one, ``->``
an influence inside a single step (only allowed into ``R`` or ``Ro``).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .logic import Atom, Literal, is_variable


class Special(str, Enum):
    ACTION = "A"
    TASK_REWARD = "R"
    OPTION_REWARD = "Ro"

    def __str__(self) -> str:
        return self.value


RESERVED = frozenset(s.value for s in Special)
Item = Union[Literal, Special]


@dataclass(frozen=True)
class DFociStatement:
    subtask: Optional[Atom]
    antecedent: frozenset
    consequent: Item
    next_step: bool = True

    def __str__(self) -> str:
        return print_statement(self)


@dataclass
class DomainDecl:
    predicates: dict = field(default_factory=dict)
    subtasks: dict = field(default_factory=dict)
    statements: list = field(default_factory=list)


@dataclass(frozen=True)
class Diagnostic:
    statement: int  # -1 for declaration-level problems
    reason: str

    def __str__(self) -> str:
        where = f"statement {self.statement}" if self.statement >= 0 else "declarations"
        return f"{where}: {self.reason}"


class DfociSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class DfociValidationError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


# -- tokenizer ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<next>-\+1->)
  | (?P<same>->)
  | (?P<ident>[A-Za-z0-9](?:[A-Za-z0-9_]|-(?=[A-Za-z0-9_]))*)
  | (?P<punct>[{}(),:/~])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    toks = []
    line, line_start, i = 1, 0, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise DfociSyntaxError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, i - line_start + 1))
        i = m.end()
    toks.append(_Tok("eof", "", line, i - line_start + 1))
    return toks


# -- parser ------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, msg: str, tok: Optional[_Tok] = None):
        tok = tok or self.tok
        found = tok.text or "end of input"
        raise DfociSyntaxError(f"{msg} (found {found!r})", tok.line, tok.col)

    def expect(self, text: str) -> _Tok:
        if self.tok.text != text or self.tok.kind not in ("punct", "next", "same"):
            self.fail(f"expected {text!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        if self.tok.kind != "ident":
            self.fail("expected identifier")
        t = self.tok.text
        self.i += 1
        return t

    def nat(self) -> int:
        if self.tok.kind != "ident" or not self.tok.text.isdigit():
            self.fail("expected natural number")
        n = int(self.tok.text)
        self.i += 1
        return n

    def file(self) -> DomainDecl:
        decl = DomainDecl()
        while self.tok.kind != "eof":
            t = self.tok
            if (
                t.kind == "ident"
                and t.text in ("predicate", "subtask")
                and self.peek().kind == "ident"
                and self.peek(2).text == "/"
            ):
                self.i += 1
                name = self.ident()
                self.expect("/")
                arity = self.nat()
                table = decl.predicates if t.text == "predicate" else decl.subtasks
                if name in table and table[name] != arity:
                    raise DfociSyntaxError(
                        f"{t.text} {name} redeclared with arity {arity} (was {table[name]})", t.line, t.col
                    )
                table[name] = arity
            else:
                decl.statements.append(self.statement())
        return decl

    def statement(self) -> DFociStatement:
        head = None
        if self.tok.kind == "ident":
            head = self.head()
            self.expect(":")
        self.expect("{")
        items = [self.item()]
        while self.tok.text == ",":
            self.i += 1
            items.append(self.item())
        self.expect("}")
        if self.tok.kind == "next":
            next_step = True
        elif self.tok.kind == "same":
            next_step = False
        else:
            self.fail("expected '->' or '-+1->'")
        self.i += 1
        consequent = self.item()
        return DFociStatement(head, frozenset(items), consequent, next_step)

    def head(self) -> Atom:
        name_tok = self.tok
        name = self.ident()
        if self.tok.text != "(":
            self.fail(f"subtask head {name!r} needs a parameter list")
        self.i += 1
        params = [self.var()]
        while self.tok.text == ",":
            self.i += 1
            params.append(self.var())
        self.expect(")")
        if len(set(params)) != len(params):
            self.fail(f"repeated parameter in subtask head {name}", name_tok)
        return Atom(name, tuple(params))

    def var(self) -> str:
        t = self.tok
        name = self.ident()
        if not is_variable(name):
            self.fail("expected a variable (uppercase identifier)", t)
        return name

    def item(self) -> Item:
        positive = True
        if self.tok.text == "~":
            positive = False
            self.i += 1
        name_tok = self.tok
        name = self.ident()
        args: tuple = ()
        if self.tok.text == "(":
            self.i += 1
            terms = [self.ident()]
            while self.tok.text == ",":
                self.i += 1
                terms.append(self.ident())
            self.expect(")")
            args = tuple(terms)
        if name in RESERVED and not args:
            if not positive:
                self.fail(f"reserved item {name} cannot be negated", name_tok)
            return Special(name)
        return Literal(Atom(name, args), positive)


def parse_file(text: str, validate_decl: bool = True) -> DomainDecl:
    """Parse a ``.dfoci`` document.

    Raises DfociSyntaxError (with line/column) on grammar violations and
    DfociValidationError when the parsed declarations are inconsistent.
    """
    decl = _Parser(text).file()
    if validate_decl:
        diags = validate(decl)
        if diags:
            raise DfociValidationError(diags)
    return decl


def parse_statement(text: str) -> DFociStatement:
    p = _Parser(text)
    stmt = p.statement()
    if p.tok.kind != "eof":
        p.fail("trailing input after statement")
    return stmt


def load(path) -> DomainDecl:
    with open(path, encoding="utf-8") as fh:
        return parse_file(fh.read())


# -- printer -----------------------------------------------------------------


def _item_key(item: Item):
    if isinstance(item, Special):
        return (1, list(Special).index(item), (), True)
    return (0, item.predicate, item.args, not item.positive)


def print_item(item: Item) -> str:
    return str(item)


def print_statement(stmt: DFociStatement) -> str:
    items = ", ".join(print_item(i) for i in sorted(stmt.antecedent, key=_item_key))
    arrow = "-+1->" if stmt.next_step else "->"
    prefix = f"{stmt.subtask}: " if stmt.subtask is not None else ""
    return f"{prefix}{{{items}}} {arrow} {print_item(stmt.consequent)}"


def print_file(decl: DomainDecl) -> str:
    lines = [f"predicate {p}/{n}" for p, n in decl.predicates.items()]
    lines += [f"subtask {s}/{n}" for s, n in decl.subtasks.items()]
    lines += [print_statement(s) for s in decl.statements]
    return "\n".join(lines) + "\n"


# -- validation ----------------------------------------------------------------


def validate(decl: DomainDecl) -> list:
    """Check declaration and statement invariants; never raises."""
    diags = []
    for name in sorted(set(decl.predicates) | set(decl.subtasks)):
        if name in RESERVED:
            diags.append(Diagnostic(-1, f"reserved name {name!r} declared as predicate or subtask"))
    for name in sorted(set(decl.predicates) & set(decl.subtasks)):
        diags.append(Diagnostic(-1, f"{name!r} declared both as predicate and subtask"))

    for idx, stmt in enumerate(decl.statements):
        if stmt.subtask is not None:
            name, arity = stmt.subtask.predicate, len(stmt.subtask.args)
            if name not in decl.subtasks:
                diags.append(Diagnostic(idx, f"undeclared subtask {name!r}"))
            elif decl.subtasks[name] != arity:
                diags.append(Diagnostic(idx, f"arity mismatch: subtask {name} used with {arity} args, declared {decl.subtasks[name]}"))
            for v in stmt.subtask.args:
                if not is_variable(v):
                    diags.append(Diagnostic(idx, f"subtask parameter {v!r} is not a variable"))
        if not stmt.antecedent:
            diags.append(Diagnostic(idx, "empty antecedent"))
        items = sorted(stmt.antecedent, key=_item_key) + [stmt.consequent]
        for item in items:
            if isinstance(item, Special):
                continue
            name, arity = item.predicate, len(item.args)
            if name in RESERVED:
                diags.append(Diagnostic(idx, f"reserved name {name!r} used as predicate"))
            elif name not in decl.predicates:
                diags.append(Diagnostic(idx, f"undeclared predicate {name!r}"))
            elif decl.predicates[name] != arity:
                diags.append(Diagnostic(idx, f"arity mismatch: {name} used with {arity} args, declared {decl.predicates[name]}"))
        if stmt.consequent is Special.ACTION:
            diags.append(Diagnostic(idx, "reserved consequent: the action A cannot be influenced"))
        elif not stmt.next_step and not isinstance(stmt.consequent, Special):
            diags.append(Diagnostic(idx, "same-step arrow '->' may only point at R or Ro"))
    return diags
