"""Control-flow graphs: one instruction per vertex.

Lowering flattens surface programs into per-procedure graphs whose vertices
each hold exactly one primitive instruction.  Compound expressions run
through fresh temporaries ($0, $1, ... within each procedure); conditions
evaluate into a variable and branch on it.  `branch(x)` has exactly two
successors, `if(x)` (taken when x is non-null) and `else(x)` (taken when x
is null); `while (e == null)` therefore exits through its `if` arm.  When
the condition is already a bare variable no temporary is inserted and the
branch tests the variable directly.

There are no interprocedural edges: calls and returns meet only through
annotations, which lowering copies from the callee signature onto the call
instruction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

from .lattice import GradAbst
from .syntax import (
    EAnd,
    ECall,
    EField,
    ENew,
    ENull,
    EOr,
    EVar,
    Expr,
    Program,
    SAssign,
    SDecl,
    SFieldAssign,
    SIf,
    SReturn,
    SSkip,
    SWhile,
    Stmt,
)

MAIN = "main"


# ---------------------------------------------------------------------------
# Instructions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ICopy:
    target: str
    source: str


@dataclass(frozen=True)
class IConstNull:
    target: str


@dataclass(frozen=True)
class ICall:
    target: str
    proc: str
    ret_ann: GradAbst
    arg: str
    arg_ann: GradAbst


@dataclass(frozen=True)
class INew:
    target: str
    fields: tuple[str, ...]


@dataclass(frozen=True)
class IAnd:
    target: str
    left: str
    right: str


@dataclass(frozen=True)
class IOr:
    target: str
    left: str
    right: str


@dataclass(frozen=True)
class IFieldRead:
    target: str
    obj: str
    fieldname: str


@dataclass(frozen=True)
class IFieldWrite:
    obj: str
    fieldname: str
    source: str


@dataclass(frozen=True)
class IBranch:
    var: str


@dataclass(frozen=True)
class IIf:
    var: str


@dataclass(frozen=True)
class IElse:
    var: str


@dataclass(frozen=True)
class IReturn:
    var: str
    ann: GradAbst


@dataclass(frozen=True)
class IMain:
    pass


@dataclass(frozen=True)
class IProc:
    name: str
    ret_ann: GradAbst
    param: str
    param_ann: GradAbst


Instr = Union[
    ICopy,
    IConstNull,
    ICall,
    INew,
    IAnd,
    IOr,
    IFieldRead,
    IFieldWrite,
    IBranch,
    IIf,
    IElse,
    IReturn,
    IMain,
    IProc,
]


def _ann_text(ann: GradAbst) -> str:
    return f"@{ann}"


def render_instr(ins: Instr) -> str:
    if isinstance(ins, ICopy):
        return f"{ins.target} := {ins.source}"
    if isinstance(ins, IConstNull):
        return f"{ins.target} := null"
    if isinstance(ins, ICall):
        return f"{ins.target} := {ins.proc}{_ann_text(ins.ret_ann)}({ins.arg}{_ann_text(ins.arg_ann)})"
    if isinstance(ins, INew):
        return f"{ins.target} := new {{{', '.join(ins.fields)}}}"
    if isinstance(ins, IAnd):
        return f"{ins.target} := {ins.left} && {ins.right}"
    if isinstance(ins, IOr):
        return f"{ins.target} := {ins.left} || {ins.right}"
    if isinstance(ins, IFieldRead):
        return f"{ins.target} := {ins.obj}.{ins.fieldname}"
    if isinstance(ins, IFieldWrite):
        return f"{ins.obj}.{ins.fieldname} := {ins.source}"
    if isinstance(ins, IBranch):
        return f"branch({ins.var})"
    if isinstance(ins, IIf):
        return f"if({ins.var})"
    if isinstance(ins, IElse):
        return f"else({ins.var})"
    if isinstance(ins, IReturn):
        return f"return {ins.var}{_ann_text(ins.ann)}"
    if isinstance(ins, IMain):
        return "main"
    if isinstance(ins, IProc):
        return f"proc {ins.name}{_ann_text(ins.ret_ann)}({ins.param}{_ann_text(ins.param_ann)})"
    raise AssertionError(f"unknown instruction {ins!r}")


@dataclass(frozen=True)
class Vertex:
    id: int
    instr: Instr
    proc: str  # procedure name, or "main"
    pos: tuple[int, int] = field(default=(0, 0), compare=False, repr=False)


@dataclass
class ProgramCfg:
    vertices: list[Vertex]
    succ: list[tuple[int, ...]]
    entry: int
    proc_entry: dict[str, int]  # procedure name -> IProc vertex id
    universe: dict[str, frozenset[str]]  # per procedure (and "main")
    source: Program | None = None

    def instr(self, v: int) -> Instr:
        return self.vertices[v].instr

    def successors(self, v: int) -> tuple[int, ...]:
        return self.succ[v]

    def predecessors(self) -> dict[int, list[int]]:
        preds: dict[int, list[int]] = {v.id: [] for v in self.vertices}
        for v in self.vertices:
            for u in self.succ[v.id]:
                preds[u].append(v.id)
        return preds

    def descend(self, root: int) -> set[int]:
        """Vertices reachable from root, root included."""
        seen = {root}
        stack = [root]
        while stack:
            v = stack.pop()
            for u in self.succ[v]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return seen

    def branch_arms(self, branch: int) -> tuple[int, int]:
        """(if-vertex, else-vertex) successor pair of a branch vertex."""
        arms = self.succ[branch]
        if_v = next(u for u in arms if isinstance(self.vertices[u].instr, IIf))
        else_v = next(u for u in arms if isinstance(self.vertices[u].instr, IElse))
        return if_v, else_v


# ---------------------------------------------------------------------------
# Lowering
# ---------------------------------------------------------------------------


class _Lowerer:
    def __init__(self, program: Program):
        self.program = program
        self.procs = program.proc_map
        self.vertices: list[Vertex] = []
        self.succ: list[list[int]] = []
        self.vars: set[str] = set()
        self.temp_count = 0
        self.prockey = MAIN

    def emit(self, instr: Instr, pos: tuple[int, int], pending: list[int]) -> int:
        vid = len(self.vertices)
        self.vertices.append(Vertex(vid, instr, self.prockey, pos))
        self.succ.append([])
        for p in pending:
            self.succ[p].append(vid)
        return vid

    def fresh_temp(self) -> str:
        name = f"${self.temp_count}"
        self.temp_count += 1
        self.vars.add(name)
        return name

    def lower_operand(self, e: Expr, pending: list[int]) -> tuple[str, list[int]]:
        """Bring an expression into a variable, emitting evaluation vertices."""
        if isinstance(e, EVar):
            return e.name, pending
        temp = self.fresh_temp()
        pending = self.lower_assign(temp, e, pending)
        return temp, pending

    def lower_assign(self, target: str, e: Expr, pending: list[int]) -> list[int]:
        if isinstance(e, ENull):
            return [self.emit(IConstNull(target), e.pos, pending)]
        if isinstance(e, EVar):
            return [self.emit(ICopy(target, e.name), e.pos, pending)]
        if isinstance(e, ENew):
            return [self.emit(INew(target, e.fields), e.pos, pending)]
        if isinstance(e, (EAnd, EOr)):
            left, pending = self.lower_operand(e.left, pending)
            right, pending = self.lower_operand(e.right, pending)
            cls = IAnd if isinstance(e, EAnd) else IOr
            return [self.emit(cls(target, left, right), e.pos, pending)]
        if isinstance(e, EField):
            obj, pending = self.lower_operand(e.obj, pending)
            return [self.emit(IFieldRead(target, obj, e.fieldname), e.pos, pending)]
        if isinstance(e, ECall):
            arg, pending = self.lower_operand(e.arg, pending)
            callee = self.procs[e.proc]
            ins = ICall(target, e.proc, callee.ret_ann, arg, callee.param_ann)
            return [self.emit(ins, e.pos, pending)]
        raise AssertionError(f"unknown expression {e!r}")

    def lower_cond(self, e: Expr, pending: list[int]) -> tuple[str, list[int]]:
        # A bare variable branches directly; anything else evaluates into a
        # temporary first, and loops re-enter at that evaluation.
        return self.lower_operand(e, pending)

    def lower_stmts(self, stmts: Iterable[Stmt], pending: list[int], ret_ann: GradAbst) -> list[int]:
        for s in stmts:
            if isinstance(s, SSkip):
                continue
            if isinstance(s, SDecl):
                self.vars.add(s.name)
                continue
            if isinstance(s, SAssign):
                pending = self.lower_assign(s.target, s.expr, pending)
                continue
            if isinstance(s, SFieldAssign):
                pending = [self.emit(IFieldWrite(s.obj, s.fieldname, s.source), s.pos, pending)]
                continue
            if isinstance(s, SReturn):
                self.emit(IReturn(s.name, ret_ann), s.pos, pending)
                pending = []
                continue
            if isinstance(s, SIf):
                var, pending = self.lower_cond(s.cond, pending)
                b = self.emit(IBranch(var), s.pos, pending)
                if_v = self.emit(IIf(var), s.pos, [b])
                else_v = self.emit(IElse(var), s.pos, [b])
                nonnull_arm, null_arm = (s.then, s.els) if s.op == "!=" else (s.els, s.then)
                exits_nonnull = self.lower_stmts(nonnull_arm, [if_v], ret_ann)
                exits_null = self.lower_stmts(null_arm, [else_v], ret_ann)
                pending = exits_nonnull + exits_null
                continue
            if isinstance(s, SWhile):
                head_mark = len(self.vertices)
                var, cond_exits = self.lower_cond(s.cond, pending)
                b = self.emit(IBranch(var), s.pos, cond_exits)
                head = head_mark if head_mark < len(self.vertices) - 1 else b
                if_v = self.emit(IIf(var), s.pos, [b])
                else_v = self.emit(IElse(var), s.pos, [b])
                body_arm, exit_arm = (if_v, else_v) if s.op == "!=" else (else_v, if_v)
                body_exits = self.lower_stmts(s.body, [body_arm], ret_ann)
                for v in body_exits:
                    self.succ[v].append(head)
                pending = [exit_arm]
                continue
            raise AssertionError(f"unknown statement {s!r}")
        return pending


def lower(p: Program) -> ProgramCfg:
    """Lower a surface program to its control-flow graph.

    Assumes parse-level structure and clean surface checks; annotations at
    call sites are copied from the callee's declaration.
    """
    lw = _Lowerer(p)
    proc_entry: dict[str, int] = {}
    universe: dict[str, frozenset[str]] = {}

    for proc in p.procs:
        lw.prockey = proc.name
        lw.vars = {proc.param}
        lw.temp_count = 0
        entry = lw.emit(IProc(proc.name, proc.ret_ann, proc.param, proc.param_ann), proc.pos, [])
        proc_entry[proc.name] = entry
        leftover = lw.lower_stmts(proc.body, [entry], proc.ret_ann)
        assert not leftover, "parser guarantees every procedure path returns"
        universe[proc.name] = frozenset(lw.vars)

    lw.prockey = MAIN
    lw.vars = set()
    lw.temp_count = 0
    main_entry = lw.emit(IMain(), p.main_pos, [])
    leftover = lw.lower_stmts(p.main, [main_entry], GradAbst.NULLABLE)
    assert not leftover, "parser guarantees main ends with return"
    universe[MAIN] = frozenset(lw.vars)

    return ProgramCfg(
        vertices=lw.vertices,
        succ=[tuple(s) for s in lw.succ],
        entry=main_entry,
        proc_entry=proc_entry,
        universe=universe,
        source=p,
    )


# ---------------------------------------------------------------------------
# Well-formedness
# ---------------------------------------------------------------------------


def validate(cfg: ProgramCfg) -> list[str]:
    """Structural well-formedness.  Empty iff the graph is well-formed.

    1. Exactly one main vertex, with no predecessors.
    2. The regions reachable from main and from each procedure entry
       partition the vertex set.
    3. Every vertex reaches a return, and every return's annotation matches
       its region's declared return annotation (Nullable for main).
    4. Call-site annotations agree with the callee's entry vertex.
    5. A branch has exactly two successors, an if and an else on the same
       variable; a return has none; every other vertex has exactly one,
       which is not an if or else vertex.
    """
    out: list[str] = []
    mains = [v.id for v in cfg.vertices if isinstance(v.instr, IMain)]
    if len(mains) != 1:
        out.append(f"expected exactly one main vertex, found {len(mains)}")
    preds = cfg.predecessors()
    for m in mains:
        if preds[m]:
            out.append(f"main vertex v{m} has predecessors {sorted(preds[m])}")

    entries: list[tuple[str, int]] = []
    if len(mains) == 1:
        entries.append((MAIN, mains[0]))
    proc_ret: dict[str, GradAbst] = {}
    proc_param: dict[str, GradAbst] = {}
    for v in cfg.vertices:
        if isinstance(v.instr, IProc):
            entries.append((v.instr.name, v.id))
            proc_ret[v.instr.name] = v.instr.ret_ann
            proc_param[v.instr.name] = v.instr.param_ann

    regions: dict[str, set[int]] = {name: cfg.descend(root) for name, root in entries}
    covered: dict[int, str] = {}
    for name, region in regions.items():
        for vid in region:
            if vid in covered:
                out.append(f"vertex v{vid} reachable from both {covered[vid]!r} and {name!r}")
            else:
                covered[vid] = name
    for v in cfg.vertices:
        if v.id not in covered:
            out.append(f"vertex v{v.id} unreachable from every entry")

    for name, region in regions.items():
        want = proc_ret.get(name, GradAbst.NULLABLE)
        for vid in sorted(region):
            if not any(isinstance(cfg.instr(u), IReturn) for u in cfg.descend(vid)):
                out.append(f"vertex v{vid} cannot reach a return")
            ins = cfg.instr(vid)
            if isinstance(ins, IReturn) and ins.ann is not want:
                out.append(f"return at v{vid} annotated @{ins.ann}, region {name!r} declares @{want}")

    for v in cfg.vertices:
        ins = v.instr
        if isinstance(ins, ICall):
            if ins.proc not in proc_ret:
                out.append(f"call at v{v.id} targets unknown procedure {ins.proc!r}")
            else:
                if ins.ret_ann is not proc_ret[ins.proc] or ins.arg_ann is not proc_param[ins.proc]:
                    out.append(f"call at v{v.id} disagrees with {ins.proc!r}'s signature annotations")

    for v in cfg.vertices:
        ins = v.instr
        succs = cfg.succ[v.id]
        if isinstance(ins, IBranch):
            kinds = sorted(type(cfg.instr(u)).__name__ for u in succs)
            okvars = all(
                getattr(cfg.instr(u), "var", None) == ins.var for u in succs
            )
            if len(succs) != 2 or kinds != ["IElse", "IIf"] or not okvars:
                out.append(f"branch at v{v.id} lacks matching if/else successors")
        elif isinstance(ins, IReturn):
            if succs:
                out.append(f"return at v{v.id} has successors {sorted(succs)}")
        else:
            if len(succs) != 1:
                out.append(f"vertex v{v.id} has {len(succs)} successors, expected 1")
            elif isinstance(cfg.instr(succs[0]), (IIf, IElse)):
                out.append(f"vertex v{v.id} feeds an if/else arm without branching")
    return out


# ---------------------------------------------------------------------------
# Traversal order and DOT
# ---------------------------------------------------------------------------


def reverse_postorder(cfg: ProgramCfg) -> list[int]:
    """Reverse postorder per region, main region last, regions in entry order."""
    order: list[int] = []
    roots = [vid for _, vid in sorted(cfg.proc_entry.items(), key=lambda kv: kv[1])]
    roots.append(cfg.entry)
    seen: set[int] = set()
    for root in roots:
        post: list[int] = []
        stack: list[tuple[int, int]] = [(root, 0)]
        seen.add(root)
        while stack:
            v, k = stack[-1]
            succs = cfg.succ[v]
            if k < len(succs):
                stack[-1] = (v, k + 1)
                u = succs[k]
                if u not in seen:
                    seen.add(u)
                    stack.append((u, 0))
            else:
                stack.pop()
                post.append(v)
        order.extend(reversed(post))
    return order


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def emit_dot(cfg: ProgramCfg) -> str:
    """Deterministic DOT rendering, one cluster per procedure plus main."""
    lines = ["digraph picl {", '    node [shape=box, fontname="monospace"];']
    groups: dict[str, list[Vertex]] = {}
    for v in cfg.vertices:
        groups.setdefault(v.proc, []).append(v)
    for name in sorted(groups, key=lambda n: groups[n][0].id):
        lines.append(f'    subgraph "cluster_{_dot_escape(name)}" {{')
        title = name if name == MAIN else f"proc {name}"
        lines.append(f'        label="{_dot_escape(title)}";')
        for v in groups[name]:
            lines.append(f'        v{v.id} [label="{_dot_escape(render_instr(v.instr))}"];')
        lines.append("    }")
    for v in cfg.vertices:
        for u in cfg.succ[v.id]:
            lines.append(f"    v{v.id} -> v{u};")
    lines.append("}")
    return "\n".join(lines) + "\n"
