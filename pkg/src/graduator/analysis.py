"""Dataflow analysis: nullness facts per vertex, warnings, check sites.

The static analysis interprets each instruction as a transfer function over
partial maps from variables to base facts; the gradual analysis runs the
same machinery over the gradual domain.  A transfer rule that writes a
constant ignores its input; a rule that reads an operand drops its target
when the operand is not yet defined.  Entry instructions (main, proc) ignore
their input entirely and seed every variable of the procedure's universe
with Null, then bind the parameter to its annotation.

The only rules where gradualization needs more than "run the same rule on
gradual inputs" are the boolean operators: their case analysis branches on
exact base facts, so the gradual version enumerates the denotations of both
operand facts, pushes each pair through the base rule, and abstracts the
result set back.

Fixpoints come from a worklist iteration seeded with every vertex (initial
fact: the empty map, the bottom of the partial-map order).  The result is
order-independent; the default order is reverse postorder per procedure.

Validity splits per position into three verdicts: the fact is consistent
with the safety bound (fine), plausibly consistent but not provably so
(a run-time check site), or provably inconsistent (a static warning).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Literal, Optional, TypeVar, Union

from .cfg import (
    IAnd,
    IBranch,
    ICall,
    IConstNull,
    ICopy,
    IElse,
    IFieldRead,
    IFieldWrite,
    IIf,
    IMain,
    INew,
    IOr,
    IProc,
    IReturn,
    Instr,
    ProgramCfg,
    reverse_postorder,
)
from .lattice import (
    Abst,
    GradAbst,
    alpha,
    as_exact,
    base_join,
    base_leq,
    ceil,
    exact,
    gamma,
    lifted_join,
    lifted_leq,
)

BaseState = dict[str, Abst]
GradState = dict[str, GradAbst]

WARN_STATIC = "GRADUAL_STATIC"
WARN_CHECK = "GRADUAL_CHECK"
WARN_BOUNDARY = "GRADUAL_BOUNDARY"


def _exact_ann(ann: GradAbst) -> Abst:
    a = as_exact(ann)
    if a is None:
        raise ValueError("static analysis requires a fully annotated program (no '?')")
    return a


# ---------------------------------------------------------------------------
# Boolean case rules (base domain)
# ---------------------------------------------------------------------------


def _and_case(a: Abst, b: Abst) -> Abst:
    # null short-circuits: the result is null iff either side can only be
    # null; definite non-nullness needs both sides definite.
    if Abst.NULL in (a, b):
        return Abst.NULL
    if Abst.NULLABLE in (a, b):
        return Abst.NULLABLE
    return Abst.NONNULL


def _or_case(a: Abst, b: Abst) -> Abst:
    if Abst.NONNULL in (a, b):
        return Abst.NONNULL
    if Abst.NULLABLE in (a, b):
        return Abst.NULLABLE
    return Abst.NULL


def _lift_case(rule: Callable[[Abst, Abst], Abst], g1: GradAbst, g2: GradAbst) -> GradAbst:
    return alpha(rule(a, b) for a in gamma(g1) for b in gamma(g2))


# ---------------------------------------------------------------------------
# Transfer functions
# ---------------------------------------------------------------------------


def flow(ins: Instr, sigma: BaseState, universe: frozenset[str]) -> BaseState:
    """Base transfer function, on partial maps variable -> Abst."""
    if isinstance(ins, ICopy):
        out = dict(sigma)
        if ins.source in sigma:
            out[ins.target] = sigma[ins.source]
        else:
            out.pop(ins.target, None)
        return out
    if isinstance(ins, IConstNull):
        return {**sigma, ins.target: Abst.NULL}
    if isinstance(ins, ICall):
        return {**sigma, ins.target: _exact_ann(ins.ret_ann)}
    if isinstance(ins, INew):
        return {**sigma, ins.target: Abst.NONNULL}
    if isinstance(ins, (IAnd, IOr)):
        rule = _and_case if isinstance(ins, IAnd) else _or_case
        out = dict(sigma)
        if ins.left in sigma and ins.right in sigma:
            out[ins.target] = rule(sigma[ins.left], sigma[ins.right])
        else:
            out.pop(ins.target, None)
        return out
    if isinstance(ins, IFieldRead):
        # Reading narrows the receiver; when target and receiver coincide
        # the receiver fact wins (the write order below is load-bearing).
        out = dict(sigma)
        out[ins.target] = Abst.NULLABLE
        out[ins.obj] = Abst.NONNULL
        return out
    if isinstance(ins, IFieldWrite):
        return {**sigma, ins.obj: Abst.NONNULL}
    if isinstance(ins, IBranch):
        return dict(sigma)
    if isinstance(ins, IIf):
        return {**sigma, ins.var: Abst.NONNULL}
    if isinstance(ins, IElse):
        return {**sigma, ins.var: Abst.NULL}
    if isinstance(ins, IReturn):
        return dict(sigma)
    if isinstance(ins, IMain):
        return {x: Abst.NULL for x in sorted(universe)}
    if isinstance(ins, IProc):
        out = {x: Abst.NULL for x in sorted(universe)}
        out[ins.param] = _exact_ann(ins.param_ann)
        return out
    raise AssertionError(f"unknown instruction {ins!r}")


def lifted_flow(ins: Instr, sigma: GradState, universe: frozenset[str]) -> GradState:
    """Gradual transfer function; annotations flow through unconverted."""
    if isinstance(ins, ICopy):
        out = dict(sigma)
        if ins.source in sigma:
            out[ins.target] = sigma[ins.source]
        else:
            out.pop(ins.target, None)
        return out
    if isinstance(ins, IConstNull):
        return {**sigma, ins.target: GradAbst.NULL}
    if isinstance(ins, ICall):
        return {**sigma, ins.target: ins.ret_ann}
    if isinstance(ins, INew):
        return {**sigma, ins.target: GradAbst.NONNULL}
    if isinstance(ins, (IAnd, IOr)):
        rule = _and_case if isinstance(ins, IAnd) else _or_case
        out = dict(sigma)
        if ins.left in sigma and ins.right in sigma:
            out[ins.target] = _lift_case(rule, sigma[ins.left], sigma[ins.right])
        else:
            out.pop(ins.target, None)
        return out
    if isinstance(ins, IFieldRead):
        out = dict(sigma)
        out[ins.target] = GradAbst.NULLABLE
        out[ins.obj] = GradAbst.NONNULL
        return out
    if isinstance(ins, IFieldWrite):
        return {**sigma, ins.obj: GradAbst.NONNULL}
    if isinstance(ins, IBranch):
        return dict(sigma)
    if isinstance(ins, IIf):
        return {**sigma, ins.var: GradAbst.NONNULL}
    if isinstance(ins, IElse):
        return {**sigma, ins.var: GradAbst.NULL}
    if isinstance(ins, IReturn):
        return dict(sigma)
    if isinstance(ins, IMain):
        return {x: GradAbst.NULL for x in sorted(universe)}
    if isinstance(ins, IProc):
        out = {x: GradAbst.NULL for x in sorted(universe)}
        out[ins.param] = ins.param_ann
        return out
    raise AssertionError(f"unknown instruction {ins!r}")


# ---------------------------------------------------------------------------
# Safety bounds
# ---------------------------------------------------------------------------


def safe(ins: Instr, x: str) -> Abst:
    """Strongest fact x must satisfy for the instruction to be safe."""
    g = lifted_safe(ins, x)
    a = as_exact(g)
    if a is None:
        raise ValueError("static analysis requires a fully annotated program (no '?')")
    return a


def lifted_safe(ins: Instr, x: str) -> GradAbst:
    if isinstance(ins, ICall) and x == ins.arg:
        return ins.arg_ann
    if isinstance(ins, IReturn) and x == ins.var:
        return ins.ann
    if isinstance(ins, IFieldRead) and x == ins.obj:
        return GradAbst.NONNULL
    if isinstance(ins, IFieldWrite) and x == ins.obj:
        return GradAbst.NONNULL
    return GradAbst.NULLABLE


def constrained_vars(ins: Instr) -> tuple[str, ...]:
    """Variables whose safety bound at this instruction can be non-trivial."""
    if isinstance(ins, ICall):
        return (ins.arg,)
    if isinstance(ins, IReturn):
        return (ins.var,)
    if isinstance(ins, IFieldRead):
        return (ins.obj,)
    if isinstance(ins, IFieldWrite):
        return (ins.obj,)
    return ()


def site_category(ins: Instr) -> str:
    """Check category: dereferences get CHECK, procedure boundaries BOUNDARY."""
    if isinstance(ins, (IFieldRead, IFieldWrite)):
        return WARN_CHECK
    return WARN_BOUNDARY


# ---------------------------------------------------------------------------
# Fixpoint
# ---------------------------------------------------------------------------

V = TypeVar("V")


def _state_join(
    s1: dict[str, V], s2: dict[str, V], join: Callable[[V, V], V]
) -> dict[str, V]:
    # Union-join: a variable undefined on one side contributes the other
    # side's fact (the empty map is bottom).
    out = dict(s1)
    for x, v in s2.items():
        out[x] = join(out[x], v) if x in out else v
    return out


Mode = Literal["static", "gradual"]


@dataclass
class AnalysisResult:
    cfg: ProgramCfg
    mode: Mode
    pi: list[dict]  # vertex id -> partial map variable -> Abst | GradAbst

    def pi_as_grad(self) -> list[GradState]:
        """pi with base facts embedded as exact gradual facts."""
        if self.mode == "gradual":
            return [dict(s) for s in self.pi]
        return [{x: exact(a) for x, a in s.items()} for s in self.pi]


def kildall(
    cfg: ProgramCfg,
    mode: Mode = "gradual",
    seed_order: Optional[Iterable[int]] = None,
) -> AnalysisResult:
    """Worklist fixpoint of the (gradual) transfer functions.

    Every vertex starts at the empty map and is processed at least once;
    a successor re-enters the worklist whenever its fact grows.  The result
    does not depend on seed_order (that is a tested property, not a hope).
    """
    if mode == "static":
        transfer: Callable = flow
        join: Callable = base_join
    else:
        transfer = lifted_flow
        join = lifted_join

    pi: list[dict] = [{} for _ in cfg.vertices]
    order = list(seed_order) if seed_order is not None else reverse_postorder(cfg)
    assert sorted(order) == sorted(v.id for v in cfg.vertices), "seed order must cover every vertex"
    work = deque(order)
    queued = set(order)
    while work:
        v = work.popleft()
        queued.discard(v)
        out = transfer(cfg.instr(v), pi[v], cfg.universe[cfg.vertices[v].proc])
        for u in cfg.successors(v):
            grown = _state_join(pi[u], out, join)
            if grown != pi[u]:
                pi[u] = grown
                if u not in queued:
                    work.append(u)
                    queued.add(u)
    return AnalysisResult(cfg=cfg, mode=mode, pi=pi)


# ---------------------------------------------------------------------------
# Warnings and check sites
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    """A reportable position: static warning or run-time check placement."""

    category: str
    proc: str
    vertex: int
    line: int
    col: int
    variable: str
    required: str
    found: str

    def to_json(self) -> dict:
        return {
            "category": self.category,
            "proc": self.proc,
            "vertex": self.vertex,
            "line": self.line,
            "col": self.col,
            "variable": self.variable,
            "required": self.required,
            "found": self.found,
        }

    def render(self) -> str:
        return (
            f"{self.line}:{self.col}: {self.category}: {self.variable!r} is {self.found}, "
            f"position requires {self.required} ({self.proc}, v{self.vertex})"
        )


def _positions(result: AnalysisResult):
    """Constrained (vertex, variable, fact, bound) tuples in report order."""
    pi = result.pi_as_grad()
    for vertex in result.cfg.vertices:
        sigma = pi[vertex.id]
        ins = vertex.instr
        for x in sorted(set(constrained_vars(ins))):
            if x not in sigma:
                # Never reached with x defined; nothing to judge.
                continue
            yield vertex, x, sigma[x], lifted_safe(ins, x)


def static_warnings(result: AnalysisResult) -> list[Finding]:
    """Positions whose fact is inconsistent with the safety bound."""
    out = []
    for vertex, x, found, bound in _positions(result):
        if not lifted_leq(found, bound):
            out.append(
                Finding(
                    category=WARN_STATIC,
                    proc=vertex.proc,
                    vertex=vertex.id,
                    line=vertex.pos[0],
                    col=vertex.pos[1],
                    variable=x,
                    required=str(ceil(bound)),
                    found=str(found),
                )
            )
    return out


def check_sites(result: AnalysisResult) -> list[Finding]:
    """Positions that pass only optimistically and need a run-time check.

    The fact is consistent with the bound, but its pessimistic reading is
    not: some denoted base fact would violate the bound, so the gradual
    semantics guards the instruction.
    """
    out = []
    for vertex, x, found, bound in _positions(result):
        if lifted_leq(found, bound) and not base_leq(ceil(found), ceil(bound)):
            out.append(
                Finding(
                    category=site_category(vertex.instr),
                    proc=vertex.proc,
                    vertex=vertex.id,
                    line=vertex.pos[0],
                    col=vertex.pos[1],
                    variable=x,
                    required=str(ceil(bound)),
                    found=str(found),
                )
            )
    return out


def analyze(cfg: ProgramCfg, mode: Mode = "gradual") -> tuple[AnalysisResult, list[Finding], list[Finding]]:
    """Fixpoint plus derived findings: (result, warnings, checks)."""
    result = kildall(cfg, mode)
    return result, static_warnings(result), check_sites(result)
