"""Surface syntax for PICL.

PICL is a first-order imperative language over heap objects: fields are
declared at top level, procedures take exactly one parameter and return
exactly one variable, and `main` is the entry block.  Values are references;
`null` is the only literal.  Procedure parameters and returns carry optional
nullness annotations: `@NonNull`, `@Nullable`, or `@?` (equivalently no
annotation at all) for "unknown, check at run time if needed".

Grammar (whitespace-insensitive, `//` line comments):

    program   := (fielddecl | procdecl)* "main" block
    fielddecl := "field" IDENT ";"
    procdecl  := "proc" IDENT annot? "(" IDENT annot? ")" block
    annot     := "@" ("NonNull" | "Nullable" | "?")
    block     := "{" stmt* "}"
    stmt      := "skip" ";"
               | "var" IDENT ";"
               | IDENT ":=" expr ";"
               | IDENT "." IDENT ":=" IDENT ";"
               | "if" "(" cond ")" block "else" block
               | "while" "(" cond ")" block
               | "return" IDENT ";"
    cond      := expr ("==" | "!=") "null"
    expr      := "null" | IDENT | expr "&&" expr | expr "||" expr
               | expr "." IDENT | "new" "{" IDENT ("," IDENT)* "}"
               | IDENT "(" expr ")"

`&&` binds tighter than `||`; both are left-associative; field access binds
tightest.  `main` must end with `return x;` and may not return anywhere
else; every path through a procedure body must end in a return, and no
statement may follow one (nor follow an if/else whose branches both return).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .lattice import GradAbst, precision_leq

KEYWORDS = frozenset(
    {
        "field",
        "proc",
        "main",
        "var",
        "skip",
        "if",
        "else",
        "while",
        "return",
        "new",
        "null",
    }
)

ANNOTATION_WORDS = {
    "NonNull": GradAbst.NONNULL,
    "Nullable": GradAbst.NULLABLE,
    "?": GradAbst.UNKNOWN,
}


class ParseError(Exception):
    """Syntax or structural error, with a 1-based source position."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Diagnostic:
    """A surface-check finding.  severity is 'error' or 'note'."""

    severity: str
    message: str
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.severity}: {self.message}"


def _pos_field() -> tuple[int, int]:
    # Positions never participate in structural equality: two parses of the
    # same program compare equal even if rendered with different layout.
    return field(default=(0, 0), compare=False, repr=False)  # type: ignore[return-value]


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ENull:
    pos: tuple[int, int] = _pos_field()


@dataclass(frozen=True)
class EVar:
    name: str
    pos: tuple[int, int] = _pos_field()


@dataclass(frozen=True)
class EAnd:
    left: "Expr"
    right: "Expr"
    pos: tuple[int, int] = _pos_field()


@dataclass(frozen=True)
class EOr:
    left: "Expr"
    right: "Expr"
    pos: tuple[int, int] = _pos_field()


@dataclass(frozen=True)
class EField:
    obj: "Expr"
    fieldname: str
    pos: tuple[int, int] = _pos_field()


@dataclass(frozen=True)
class ENew:
    fields: tuple[str, ...]
    pos: tuple[int, int] = _pos_field()


@dataclass(frozen=True)
class ECall:
    proc: str
    arg: "Expr"
    pos: tuple[int, int] = _pos_field()


Expr = Union[ENull, EVar, EAnd, EOr, EField, ENew, ECall]


@dataclass(frozen=True)
class SSkip:
    pos: tuple[int, int] = _pos_field()


@dataclass(frozen=True)
class SDecl:
    name: str
    pos: tuple[int, int] = _pos_field()


@dataclass(frozen=True)
class SAssign:
    target: str
    expr: Expr
    pos: tuple[int, int] = _pos_field()


@dataclass(frozen=True)
class SFieldAssign:
    obj: str
    fieldname: str
    source: str
    pos: tuple[int, int] = _pos_field()


@dataclass(frozen=True)
class SIf:
    op: str  # "==" or "!="
    cond: Expr
    then: tuple["Stmt", ...]
    els: tuple["Stmt", ...]
    pos: tuple[int, int] = _pos_field()


@dataclass(frozen=True)
class SWhile:
    op: str
    cond: Expr
    body: tuple["Stmt", ...]
    pos: tuple[int, int] = _pos_field()


@dataclass(frozen=True)
class SReturn:
    name: str
    pos: tuple[int, int] = _pos_field()


Stmt = Union[SSkip, SDecl, SAssign, SFieldAssign, SIf, SWhile, SReturn]
Block = tuple[Stmt, ...]


@dataclass(frozen=True)
class ProcDecl:
    name: str
    ret_ann: GradAbst
    param: str
    param_ann: GradAbst
    body: Block
    pos: tuple[int, int] = _pos_field()


@dataclass(frozen=True)
class FieldDecl:
    name: str
    pos: tuple[int, int] = _pos_field()


@dataclass(frozen=True)
class Program:
    fields: tuple[FieldDecl, ...]
    procs: tuple[ProcDecl, ...]
    main: Block
    main_pos: tuple[int, int] = _pos_field()

    @property
    def field_names(self) -> frozenset[str]:
        return frozenset(f.name for f in self.fields)

    @property
    def proc_map(self) -> dict[str, ProcDecl]:
        return {p.name: p for p in self.procs}


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # "ident", "keyword", "punct", "eof"
    text: str
    line: int
    col: int


_PUNCT2 = (":=", "==", "!=", "&&", "||")
_PUNCT1 = ".;,{}()@?"


def _lex(src: str) -> list[_Token]:
    toks: list[_Token] = []
    line, col, i = 1, 1, 0
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if src.startswith("//", i):
            while i < n and src[i] != "\n":
                i += 1
            continue
        two = src[i : i + 2]
        if two in _PUNCT2:
            toks.append(_Token("punct", two, line, col))
            i += 2
            col += 2
            continue
        if c in _PUNCT1:
            toks.append(_Token("punct", c, line, col))
            i += 1
            col += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            word = src[i:j]
            kind = "keyword" if word in KEYWORDS else "ident"
            toks.append(_Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    toks.append(_Token("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, toks: list[_Token]):
        self.toks = toks
        self.i = 0

    def peek(self, ahead: int = 0) -> _Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> _Token:
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, message: str, tok: Optional[_Token] = None) -> ParseError:
        t = tok or self.peek()
        return ParseError(message, t.line, t.col)

    def expect_punct(self, text: str) -> _Token:
        t = self.peek()
        if t.kind != "punct" or t.text != text:
            raise self.fail(f"expected {text!r}, found {t.text!r}" if t.text else f"expected {text!r}")
        return self.next()

    def expect_keyword(self, word: str) -> _Token:
        t = self.peek()
        if t.kind != "keyword" or t.text != word:
            raise self.fail(f"expected {word!r}, found {t.text!r}" if t.text else f"expected {word!r}")
        return self.next()

    def expect_ident(self, what: str) -> _Token:
        t = self.peek()
        if t.kind != "ident":
            raise self.fail(f"expected {what}, found {t.text!r}" if t.text else f"expected {what}")
        return self.next()

    def at_punct(self, text: str, ahead: int = 0) -> bool:
        t = self.peek(ahead)
        return t.kind == "punct" and t.text == text

    def at_keyword(self, word: str, ahead: int = 0) -> bool:
        t = self.peek(ahead)
        return t.kind == "keyword" and t.text == word

    # -- declarations ------------------------------------------------------

    def program(self) -> Program:
        fields: list[FieldDecl] = []
        procs: list[ProcDecl] = []
        seen_fields: dict[str, _Token] = {}
        seen_procs: dict[str, _Token] = {}
        while True:
            if self.at_keyword("field"):
                tok = self.next()
                name = self.expect_ident("field name")
                self.expect_punct(";")
                if name.text in seen_fields:
                    raise self.fail(f"duplicate field name {name.text!r}", name)
                seen_fields[name.text] = name
                fields.append(FieldDecl(name.text, pos=(tok.line, tok.col)))
            elif self.at_keyword("proc"):
                decl = self.procdecl()
                if decl.name in seen_procs:
                    raise self.fail(f"duplicate procedure name {decl.name!r}", self.toks[self.i - 1])
                seen_procs[decl.name] = self.toks[self.i - 1]
                procs.append(decl)
            else:
                break
        t = self.peek()
        if not self.at_keyword("main"):
            raise self.fail("expected 'field', 'proc', or 'main'")
        self.next()
        main = self.block()
        end = self.peek()
        if end.kind != "eof":
            raise self.fail(f"expected end of input, found {end.text!r}")
        self._check_main_returns(main, (t.line, t.col))
        return Program(tuple(fields), tuple(procs), main, main_pos=(t.line, t.col))

    def procdecl(self) -> ProcDecl:
        tok = self.expect_keyword("proc")
        name = self.expect_ident("procedure name")
        ret_ann = self.annotation_opt()
        self.expect_punct("(")
        param = self.expect_ident("parameter name")
        param_ann = self.annotation_opt()
        self.expect_punct(")")
        body = self.block()
        self._check_proc_returns(body, name)
        return ProcDecl(name.text, ret_ann, param.text, param_ann, body, pos=(tok.line, tok.col))

    def annotation_opt(self) -> GradAbst:
        if not self.at_punct("@"):
            return GradAbst.UNKNOWN
        self.next()
        t = self.peek()
        text = t.text
        if (t.kind in ("ident", "keyword") or (t.kind == "punct" and text == "?")) and text in ANNOTATION_WORDS:
            self.next()
            return ANNOTATION_WORDS[text]
        raise self.fail(f"unknown annotation {text!r}; expected NonNull, Nullable, or ?")

    # -- statements --------------------------------------------------------

    def block(self) -> Block:
        self.expect_punct("{")
        stmts: list[Stmt] = []
        while not self.at_punct("}"):
            if self.peek().kind == "eof":
                raise self.fail("unexpected end of input inside block")
            stmts.append(self.stmt())
        self.expect_punct("}")
        return tuple(stmts)

    def stmt(self) -> Stmt:
        t = self.peek()
        if self.at_keyword("skip"):
            self.next()
            self.expect_punct(";")
            return SSkip(pos=(t.line, t.col))
        if self.at_keyword("var"):
            self.next()
            name = self.expect_ident("variable name")
            self.expect_punct(";")
            return SDecl(name.text, pos=(t.line, t.col))
        if self.at_keyword("return"):
            self.next()
            name = self.expect_ident("variable name")
            self.expect_punct(";")
            return SReturn(name.text, pos=(t.line, t.col))
        if self.at_keyword("if"):
            self.next()
            op, cond = self.cond()
            then = self.block()
            self.expect_keyword("else")
            els = self.block()
            return SIf(op, cond, then, els, pos=(t.line, t.col))
        if self.at_keyword("while"):
            self.next()
            op, cond = self.cond()
            body = self.block()
            return SWhile(op, cond, body, pos=(t.line, t.col))
        if t.kind == "ident":
            if self.at_punct(".", 1):
                obj = self.next()
                self.expect_punct(".")
                fieldname = self.expect_ident("field name")
                self.expect_punct(":=")
                source = self.expect_ident("variable name")
                self.expect_punct(";")
                return SFieldAssign(obj.text, fieldname.text, source.text, pos=(t.line, t.col))
            if self.at_punct(":=", 1):
                target = self.next()
                self.expect_punct(":=")
                e = self.expr()
                self.expect_punct(";")
                return SAssign(target.text, e, pos=(t.line, t.col))
            raise self.fail("expected ':=' or '.' after variable name", self.peek(1))
        raise self.fail(f"expected a statement, found {t.text!r}" if t.text else "expected a statement")

    def cond(self) -> tuple[str, Expr]:
        self.expect_punct("(")
        e = self.expr()
        t = self.peek()
        if t.kind == "punct" and t.text in ("==", "!="):
            self.next()
        else:
            raise self.fail("expected '==' or '!=' in condition")
        self.expect_keyword("null")
        self.expect_punct(")")
        return t.text, e

    # -- expressions -------------------------------------------------------

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        e = self.and_expr()
        while self.at_punct("||"):
            t = self.next()
            rhs = self.and_expr()
            e = EOr(e, rhs, pos=(t.line, t.col))
        return e

    def and_expr(self) -> Expr:
        e = self.postfix_expr()
        while self.at_punct("&&"):
            t = self.next()
            rhs = self.postfix_expr()
            e = EAnd(e, rhs, pos=(t.line, t.col))
        return e

    def postfix_expr(self) -> Expr:
        e = self.primary_expr()
        while self.at_punct("."):
            t = self.next()
            name = self.expect_ident("field name")
            e = EField(e, name.text, pos=(t.line, t.col))
        return e

    def primary_expr(self) -> Expr:
        t = self.peek()
        if self.at_keyword("null"):
            self.next()
            return ENull(pos=(t.line, t.col))
        if self.at_keyword("new"):
            self.next()
            self.expect_punct("{")
            names = [self.expect_ident("field name").text]
            while self.at_punct(","):
                self.next()
                names.append(self.expect_ident("field name").text)
            self.expect_punct("}")
            return ENew(tuple(names), pos=(t.line, t.col))
        if t.kind == "ident":
            if self.at_punct("(", 1):
                self.next()
                self.expect_punct("(")
                arg = self.expr()
                self.expect_punct(")")
                return ECall(t.text, arg, pos=(t.line, t.col))
            self.next()
            return EVar(t.text, pos=(t.line, t.col))
        raise self.fail(f"expected an expression, found {t.text!r}" if t.text else "expected an expression")

    # -- return placement --------------------------------------------------

    def _check_main_returns(self, main: Block, main_pos: tuple[int, int]) -> None:
        # main returns exactly once, as its literal last top-level statement.
        def no_returns(block: Block) -> None:
            for s in block:
                if isinstance(s, SReturn):
                    raise ParseError("'return' must be the final statement of main", *s.pos)
                if isinstance(s, SIf):
                    no_returns(s.then)
                    no_returns(s.els)
                if isinstance(s, SWhile):
                    no_returns(s.body)

        if not main or not isinstance(main[-1], SReturn):
            raise ParseError("main must end with 'return x;'", *main_pos)
        no_returns(main[:-1])
        last = main[-1]
        assert isinstance(last, SReturn)

    def _check_proc_returns(self, body: Block, name: _Token) -> None:
        # Every path ends in a return; nothing follows a statement after
        # which control cannot fall through.
        def terminates(block: Block, where: str) -> bool:
            for k, s in enumerate(block):
                is_last = k == len(block) - 1
                done = False
                if isinstance(s, SReturn):
                    done = True
                elif isinstance(s, SIf):
                    t = terminates(s.then, where)
                    e = terminates(s.els, where)
                    done = t and e
                elif isinstance(s, SWhile):
                    terminates(s.body, where)
                if done and not is_last:
                    nxt = block[k + 1]
                    raise ParseError("unreachable statement: every path above already returned", *nxt.pos)
                if is_last:
                    return done
            return False

        if not terminates(body, name.text):
            raise ParseError(
                f"procedure {name.text!r}: some path through the body falls off the end without 'return'",
                name.line,
                name.col,
            )


def parse(source: str) -> Program:
    """Parse PICL source text.  Raises ParseError with a 1-based position."""
    return _Parser(_lex(source)).program()


# ---------------------------------------------------------------------------
# Surface checks
# ---------------------------------------------------------------------------


def _expr_reads(e: Expr) -> Iterator[EVar]:
    if isinstance(e, EVar):
        yield e
    elif isinstance(e, (EAnd, EOr)):
        yield from _expr_reads(e.left)
        yield from _expr_reads(e.right)
    elif isinstance(e, EField):
        yield from _expr_reads(e.obj)
    elif isinstance(e, ECall):
        yield from _expr_reads(e.arg)


def _walk_exprs(e: Expr) -> Iterator[Expr]:
    yield e
    if isinstance(e, (EAnd, EOr)):
        yield from _walk_exprs(e.left)
        yield from _walk_exprs(e.right)
    elif isinstance(e, EField):
        yield from _walk_exprs(e.obj)
    elif isinstance(e, ECall):
        yield from _walk_exprs(e.arg)


def check_surface(p: Program) -> list[Diagnostic]:
    """Name and initialization checks.

    Empty iff every variable is declared before use and assigned before it
    is read along every syntactic path, every called procedure exists, and
    every mentioned field is declared.
    """
    out: list[Diagnostic] = []
    fields = p.field_names
    procs = set(p.proc_map)

    def err(message: str, pos: tuple[int, int]) -> None:
        out.append(Diagnostic("error", message, pos[0], pos[1]))

    def check_expr(e: Expr, declared: set[str], assigned: set[str]) -> None:
        for node in _walk_exprs(e):
            if isinstance(node, EVar):
                if node.name not in declared:
                    err(f"undeclared variable {node.name!r}", node.pos)
                elif node.name not in assigned:
                    err(f"variable {node.name!r} may be read before initialization", node.pos)
            elif isinstance(node, ECall):
                if node.proc not in procs:
                    err(f"unknown procedure {node.proc!r}", node.pos)
            elif isinstance(node, EField):
                if node.fieldname not in fields:
                    err(f"unknown field {node.fieldname!r}", node.pos)
            elif isinstance(node, ENew):
                for f in node.fields:
                    if f not in fields:
                        err(f"unknown field {f!r}", node.pos)

    def check_var_use(name: str, pos: tuple[int, int], declared: set[str], assigned: set[str]) -> None:
        if name not in declared:
            err(f"undeclared variable {name!r}", pos)
        elif name not in assigned:
            err(f"variable {name!r} may be read before initialization", pos)

    def walk(block: Block, declared: set[str], assigned: set[str], ever_declared: set[str]) -> None:
        for s in block:
            if isinstance(s, SSkip):
                pass
            elif isinstance(s, SDecl):
                if s.name in ever_declared:
                    err(f"redeclaration of variable {s.name!r}", s.pos)
                ever_declared.add(s.name)
                declared.add(s.name)
            elif isinstance(s, SAssign):
                check_expr(s.expr, declared, assigned)
                if s.target not in declared:
                    err(f"undeclared variable {s.target!r}", s.pos)
                assigned.add(s.target)
            elif isinstance(s, SFieldAssign):
                check_var_use(s.obj, s.pos, declared, assigned)
                check_var_use(s.source, s.pos, declared, assigned)
                if s.fieldname not in fields:
                    err(f"unknown field {s.fieldname!r}", s.pos)
            elif isinstance(s, SReturn):
                check_var_use(s.name, s.pos, declared, assigned)
            elif isinstance(s, SIf):
                check_expr(s.cond, declared, assigned)
                d1, a1 = set(declared), set(assigned)
                d2, a2 = set(declared), set(assigned)
                walk(s.then, d1, a1, ever_declared)
                walk(s.els, d2, a2, ever_declared)
                declared |= d1 & d2
                assigned |= a1 & a2
            elif isinstance(s, SWhile):
                check_expr(s.cond, declared, assigned)
                # The body may run zero times: its effects do not survive it.
                walk(s.body, set(declared), set(assigned), ever_declared)

    for proc in p.procs:
        walk(proc.body, {proc.param}, {proc.param}, {proc.param})
    walk(p.main, set(), set(), set())
    return out


def lint_allocation_fields(p: Program) -> list[Diagnostic]:
    """Warn when an allocation omits a field the program reads or writes.

    Such an object, should it reach that access, is stuck at run time even
    though the receiver is non-null.  Advisory only; never blocks analysis.
    """
    accessed: set[str] = set()

    def scan_block(block: Block) -> None:
        for s in block:
            if isinstance(s, SAssign):
                for node in _walk_exprs(s.expr):
                    if isinstance(node, EField):
                        accessed.add(node.fieldname)
            elif isinstance(s, SFieldAssign):
                accessed.add(s.fieldname)
            elif isinstance(s, SIf):
                scan_block(s.then)
                scan_block(s.els)
            elif isinstance(s, SWhile):
                scan_block(s.body)

    for proc in p.procs:
        scan_block(proc.body)
    scan_block(p.main)

    out: list[Diagnostic] = []

    def scan_news(block: Block) -> None:
        for s in block:
            if isinstance(s, SAssign):
                for node in _walk_exprs(s.expr):
                    if isinstance(node, ENew):
                        for f in sorted(accessed - set(node.fields)):
                            out.append(
                                Diagnostic(
                                    "note",
                                    f"allocation omits field {f!r}, which the program dereferences elsewhere",
                                    node.pos[0],
                                    node.pos[1],
                                )
                            )
            elif isinstance(s, SIf):
                scan_news(s.then)
                scan_news(s.els)
            elif isinstance(s, SWhile):
                scan_news(s.body)

    for proc in p.procs:
        scan_news(proc.body)
    scan_news(p.main)
    return out


# ---------------------------------------------------------------------------
# Annotation sites, erasure, precision
# ---------------------------------------------------------------------------


def annotation_sites(p: Program) -> list[tuple[str, GradAbst]]:
    """Addressable annotation sites in declaration order.

    Site keys are 'proc.param' and 'proc.return'.  main's return is fixed
    Nullable and is not a site.
    """
    sites: list[tuple[str, GradAbst]] = []
    for proc in p.procs:
        sites.append((f"{proc.name}.param", proc.param_ann))
        sites.append((f"{proc.name}.return", proc.ret_ann))
    return sites


def erase_annotations(p: Program, sites: Optional[set[str]] = None) -> Program:
    """Replace annotations with ? at the given sites (all sites if None)."""
    if sites is not None:
        known = {key for key, _ in annotation_sites(p)}
        unknown = set(sites) - known
        if unknown:
            raise ValueError(f"unknown annotation site(s): {sorted(unknown)}")
    procs = []
    for proc in p.procs:
        param_ann = proc.param_ann
        ret_ann = proc.ret_ann
        if sites is None or f"{proc.name}.param" in sites:
            param_ann = GradAbst.UNKNOWN
        if sites is None or f"{proc.name}.return" in sites:
            ret_ann = GradAbst.UNKNOWN
        procs.append(dataclasses.replace(proc, param_ann=param_ann, ret_ann=ret_ann))
    return dataclasses.replace(p, procs=tuple(procs))


def fill_annotations(p: Program, default: GradAbst) -> Program:
    """Replace every ? annotation with a concrete default (NonNull/Nullable)."""
    if default not in (GradAbst.NONNULL, GradAbst.NULLABLE):
        raise ValueError("default annotation must be NonNull or Nullable")
    procs = []
    for proc in p.procs:
        param_ann = default if proc.param_ann is GradAbst.UNKNOWN else proc.param_ann
        ret_ann = default if proc.ret_ann is GradAbst.UNKNOWN else proc.ret_ann
        procs.append(dataclasses.replace(proc, param_ann=param_ann, ret_ann=ret_ann))
    return dataclasses.replace(p, procs=tuple(procs))


def is_fully_annotated(p: Program) -> bool:
    return all(ann is not GradAbst.UNKNOWN for _, ann in annotation_sites(p))


def precision_leq_prog(p1: Program, p2: Program) -> bool:
    """p1 is at least as annotated as p2 on an otherwise identical program."""
    if erase_annotations(p1) != erase_annotations(p2):
        return False
    sites1 = annotation_sites(p1)
    sites2 = annotation_sites(p2)
    return all(precision_leq(a1, a2) for (_, a1), (_, a2) in zip(sites1, sites2))


# ---------------------------------------------------------------------------
# Rendering (parse . render == identity up to positions)
# ---------------------------------------------------------------------------


_PREC_OR, _PREC_AND, _PREC_POSTFIX = 0, 1, 2


def _render_expr(e: Expr, prec: int = _PREC_OR) -> str:
    # The grammar has no parentheses, so a tree whose operand nesting needs
    # them (e.g. a right-nested &&) cannot be printed faithfully; refuse
    # rather than emit text that reparses to a different tree.
    if isinstance(e, ENull):
        return "null"
    if isinstance(e, EVar):
        return e.name
    if isinstance(e, ENew):
        return "new {" + ", ".join(e.fields) + "}"
    if isinstance(e, ECall):
        return f"{e.proc}({_render_expr(e.arg, _PREC_OR)})"
    if isinstance(e, EField):
        return f"{_render_expr(e.obj, _PREC_POSTFIX)}.{e.fieldname}"
    if isinstance(e, EAnd):
        if prec > _PREC_AND:
            raise ValueError("expression nesting not expressible in the surface grammar")
        return f"{_render_expr(e.left, _PREC_AND)} && {_render_expr(e.right, _PREC_POSTFIX)}"
    if isinstance(e, EOr):
        if prec > _PREC_OR:
            raise ValueError("expression nesting not expressible in the surface grammar")
        return f"{_render_expr(e.left, _PREC_OR)} || {_render_expr(e.right, _PREC_AND)}"
    raise AssertionError(f"unknown expression {e!r}")


def _render_ann(ann: GradAbst) -> str:
    if ann is GradAbst.UNKNOWN:
        return ""
    return f"@{ann}"


def _render_block(block: Block, indent: int) -> list[str]:
    pad = "    " * indent
    lines: list[str] = []
    for s in block:
        if isinstance(s, SSkip):
            lines.append(f"{pad}skip;")
        elif isinstance(s, SDecl):
            lines.append(f"{pad}var {s.name};")
        elif isinstance(s, SAssign):
            lines.append(f"{pad}{s.target} := {_render_expr(s.expr)};")
        elif isinstance(s, SFieldAssign):
            lines.append(f"{pad}{s.obj}.{s.fieldname} := {s.source};")
        elif isinstance(s, SReturn):
            lines.append(f"{pad}return {s.name};")
        elif isinstance(s, SIf):
            lines.append(f"{pad}if ({_render_expr(s.cond)} {s.op} null) {{")
            lines.extend(_render_block(s.then, indent + 1))
            lines.append(f"{pad}}} else {{")
            lines.extend(_render_block(s.els, indent + 1))
            lines.append(f"{pad}}}")
        elif isinstance(s, SWhile):
            lines.append(f"{pad}while ({_render_expr(s.cond)} {s.op} null) {{")
            lines.extend(_render_block(s.body, indent + 1))
            lines.append(f"{pad}}}")
        else:
            raise AssertionError(f"unknown statement {s!r}")
    return lines


def render_program(p: Program) -> str:
    lines: list[str] = []
    for f in p.fields:
        lines.append(f"field {f.name};")
    if p.fields:
        lines.append("")
    for proc in p.procs:
        head = f"proc {proc.name}{_render_ann(proc.ret_ann)}({proc.param}{_render_ann(proc.param_ann)}) {{"
        lines.append(head)
        lines.extend(_render_block(proc.body, 1))
        lines.append("}")
        lines.append("")
    lines.append("main {")
    lines.extend(_render_block(p.main, 1))
    lines.append("}")
    return "\n".join(lines) + "\n"
