"""Seeded program generation and independent oracles.

The generator builds surface- and CFG-valid programs by construction: reads
only touch assigned variables, allocations always list every declared field,
procedures only call earlier procedures (no recursion), and every body ends
in a reachable return.  Statically *valid* corpora (no warnings) come from
generate-and-filter over successive seeds, which keeps determinism: the
filter consumes a fixed seed stream and takes the first n survivors.

The oracles re-derive expected values independently of the shipped code
paths they judge:

- oracle_lattice re-states the gradual join in closed form by case analysis
  on element shapes (never via alpha), recomputes the induced order, its
  Hasse diagram and height, replays the Galois conditions per subset, and
  keeps the four-element-lifting associativity failure as a regression.
- oracle_local_soundness drives single instructions on hand-built micro
  graphs with random concrete states and random describing abstract states,
  and checks that stepping stays described by the pushed-through fact.
- oracle_propositions generates program corpora and checks the meta-level
  claims: annotated programs analyze and run identically in both modes,
  erasing annotations never introduces warnings, only grows denotations,
  and never changes behavior before the original's first error, and checked
  execution of valid programs never gets stuck and only errors at declared
  check sites while staying described by the fixpoint.
"""

from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .analysis import check_sites, kildall, lifted_flow, static_warnings
from .cfg import (
    MAIN,
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
    ProgramCfg,
    Vertex,
    lower,
    validate,
)
from .lattice import (
    ALL_ABST,
    ALL_GRAD,
    BASE_HEIGHT,
    Abst,
    GradAbst,
    alpha,
    as_exact,
    at_least,
    base_join,
    base_leq,
    ceil,
    exact,
    gamma,
    grad_conc_contains,
    lifted_join,
    lifted_leq,
    precision_leq,
)
from .runtime import (
    Errored,
    Final,
    Frame,
    MachineState,
    Stepped,
    Stuck,
    grad_step,
    initial_state,
    lifted_desc,
    step,
)
from .syntax import (
    EAnd,
    ECall,
    EField,
    ENew,
    ENull,
    EOr,
    EVar,
    FieldDecl,
    ProcDecl,
    Program,
    SAssign,
    SDecl,
    SFieldAssign,
    SIf,
    SReturn,
    SSkip,
    SWhile,
    Stmt,
    annotation_sites,
    check_surface,
    erase_annotations,
    precision_leq_prog,
)

# ---------------------------------------------------------------------------
# Generator
# ---------------------------------------------------------------------------

DEFAULT_WEIGHTS: tuple[tuple[str, float], ...] = (
    ("decl", 1.2),
    ("null", 1.0),
    ("copy", 1.0),
    ("new", 1.4),
    ("bool", 0.8),
    ("fieldread", 1.2),
    ("fieldwrite", 0.7),
    ("call", 1.3),
    ("if", 1.0),
    ("while", 0.6),
    ("skip", 0.2),
)


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    max_procs: int = 3
    max_stmts: int = 6
    max_depth: int = 2
    annotation_density: float = 0.5
    weights: tuple[tuple[str, float], ...] = DEFAULT_WEIGHTS


class _Scope:
    def __init__(self, declared: list[str], assigned: list[str]):
        self.declared = declared
        self.assigned = assigned

    def copy(self) -> "_Scope":
        return _Scope(list(self.declared), list(self.assigned))

    def assign(self, name: str) -> None:
        if name not in self.assigned:
            self.assigned.append(name)


class _Gen:
    def __init__(self, config: GenConfig):
        self.config = config
        self.rng = random.Random(f"picl-gen-{config.seed}")
        self.weights = dict(config.weights)
        self.fields: tuple[str, ...] = ()
        self.sigs: list[tuple[str, GradAbst, GradAbst]] = []
        self.counter = 0

    def fresh(self) -> str:
        name = f"v{self.counter}"
        self.counter += 1
        return name

    def pick_ann(self) -> GradAbst:
        if self.rng.random() < self.config.annotation_density:
            return GradAbst.NONNULL if self.rng.random() < 0.35 else GradAbst.NULLABLE
        return GradAbst.UNKNOWN

    def target(self, out: list[Stmt], scope: _Scope) -> str:
        if scope.declared and self.rng.random() < 0.7:
            return self.rng.choice(scope.declared)
        name = self.fresh()
        out.append(SDecl(name))
        scope.declared.append(name)
        return name

    # -- statements --------------------------------------------------------

    def gen_block(self, depth: int, scope: _Scope, avail: int) -> list[Stmt]:
        top = self.config.max_stmts if depth == 0 else max(1, self.config.max_stmts // 2)
        out: list[Stmt] = []
        for _ in range(self.rng.randint(1, top)):
            self.gen_stmt(out, depth, scope, avail)
        return out

    def gen_stmt(self, out: list[Stmt], depth: int, scope: _Scope, avail: int) -> None:
        kinds: list[str] = []
        weights: list[float] = []
        for kind, w in self.weights.items():
            if w <= 0:
                continue
            if kind in ("copy", "bool", "fieldread", "fieldwrite", "if", "while") and not scope.assigned:
                continue
            if kind == "call" and avail == 0:
                continue
            if kind in ("if", "while") and depth >= self.config.max_depth:
                continue
            kinds.append(kind)
            weights.append(w)
        kind = self.rng.choices(kinds, weights)[0]
        getattr(self, f"_stmt_{kind}")(out, depth, scope, avail)

    def _stmt_decl(self, out, depth, scope, avail) -> None:
        name = self.fresh()
        out.append(SDecl(name))
        scope.declared.append(name)
        if self.rng.random() < 0.7:
            out.append(SAssign(name, ENull()))
            scope.assign(name)

    def _stmt_skip(self, out, depth, scope, avail) -> None:
        out.append(SSkip())

    def _stmt_null(self, out, depth, scope, avail) -> None:
        x = self.target(out, scope)
        out.append(SAssign(x, ENull()))
        scope.assign(x)

    def _stmt_copy(self, out, depth, scope, avail) -> None:
        y = self.rng.choice(scope.assigned)
        x = self.target(out, scope)
        out.append(SAssign(x, EVar(y)))
        scope.assign(x)

    def _stmt_new(self, out, depth, scope, avail) -> None:
        x = self.target(out, scope)
        out.append(SAssign(x, ENew(self.fields)))
        scope.assign(x)

    def _stmt_bool(self, out, depth, scope, avail) -> None:
        a = self.rng.choice(scope.assigned)
        b = self.rng.choice(scope.assigned)
        x = self.target(out, scope)
        cls = EAnd if self.rng.random() < 0.5 else EOr
        out.append(SAssign(x, cls(EVar(a), EVar(b))))
        scope.assign(x)

    def _call_expr(self, scope: _Scope, avail: int) -> ECall:
        name, _, _ = self.sigs[self.rng.randrange(avail)]
        if scope.assigned and self.rng.random() < 0.7:
            arg: object = EVar(self.rng.choice(scope.assigned))
        else:
            arg = ENull()
        return ECall(name, arg)  # type: ignore[arg-type]

    def _stmt_call(self, out, depth, scope, avail) -> None:
        x = self.target(out, scope)
        out.append(SAssign(x, self._call_expr(scope, avail)))
        scope.assign(x)

    def _receiver(self, out: list[Stmt], scope: _Scope, avail: int) -> Optional[str]:
        """A variable to dereference, or None when the caller should guard."""
        r = self.rng.random()
        if r < 0.45 or (r < 0.92 and avail == 0):
            t = self.fresh()
            out.append(SDecl(t))
            out.append(SAssign(t, ENew(self.fields)))
            scope.declared.append(t)
            scope.assign(t)
            return t
        if r < 0.75:
            return None  # guard with a null test
        if r < 0.92:
            t = self.fresh()
            out.append(SDecl(t))
            out.append(SAssign(t, self._call_expr(scope, avail)))
            scope.declared.append(t)
            scope.assign(t)
            return t
        return self.rng.choice(scope.assigned)

    def _stmt_fieldread(self, out, depth, scope, avail) -> None:
        # The receiver is always distinct from the target: the transfer rule
        # for a field read narrows the receiver *name*, which only means
        # anything when the read does not overwrite it.
        f = self.rng.choice(self.fields)
        x = self.target(out, scope)
        others = [v for v in scope.assigned if v != x]
        recv = self._receiver(out, scope, avail) if others else None
        if recv == x:
            recv = None if others else recv
        if recv is None and not others:
            t = self.fresh()
            out.append(SDecl(t))
            out.append(SAssign(t, ENew(self.fields)))
            scope.declared.append(t)
            scope.assign(t)
            recv = t
        if recv is None:
            y = self.rng.choice(others)
            out.append(
                SIf(
                    "!=",
                    EVar(y),
                    (SAssign(x, EField(EVar(y), f)),),
                    (SAssign(x, ENull()),),
                )
            )
        else:
            out.append(SAssign(x, EField(EVar(recv), f)))
        scope.assign(x)

    def _stmt_fieldwrite(self, out, depth, scope, avail) -> None:
        f = self.rng.choice(self.fields)
        src = self.rng.choice(scope.assigned)
        recv = self._receiver(out, scope, avail)
        if recv is None:
            y = self.rng.choice(scope.assigned)
            out.append(SIf("!=", EVar(y), (SFieldAssign(y, f, src),), (SSkip(),)))
        else:
            out.append(SFieldAssign(recv, f, src))

    def _stmt_if(self, out, depth, scope, avail) -> None:
        y = self.rng.choice(scope.assigned)
        op = "!=" if self.rng.random() < 0.5 else "=="
        then_scope = scope.copy()
        els_scope = scope.copy()
        then = tuple(self.gen_block(depth + 1, then_scope, avail))
        els = tuple(self.gen_block(depth + 1, els_scope, avail))
        out.append(SIf(op, EVar(y), then, els))
        for v in then_scope.assigned:
            if v in els_scope.assigned and v in scope.declared:
                scope.assign(v)

    def _stmt_while(self, out, depth, scope, avail) -> None:
        if avail > 0 and self.rng.random() < 0.7:
            # The idiomatic retry loop: keep calling until non-null.
            x = self.rng.choice(scope.assigned)
            friendly = [i for i in range(avail) if self.sigs[i][1] is not GradAbst.NONNULL]
            idx = self.rng.choice(friendly) if friendly else self.rng.randrange(avail)
            name = self.sigs[idx][0]
            out.append(SWhile("==", EVar(x), (SAssign(x, ECall(name, EVar(x))),)))
            scope.assign(x)
            return
        y = self.rng.choice(scope.assigned)
        op = "!=" if self.rng.random() < 0.5 else "=="
        body_scope = scope.copy()
        body = self.gen_block(depth + 1, body_scope, avail)
        if self.rng.random() < 0.75:
            # Nudge the loop toward termination.
            body.append(SAssign(y, ENull() if op == "!=" else ENew(self.fields)))
        out.append(SWhile(op, EVar(y), tuple(body)))

    # -- program -----------------------------------------------------------

    def gen(self) -> Program:
        rng = self.rng
        pool = ["data", "next", "item"]
        self.fields = tuple(rng.sample(pool, rng.randint(1, 3)))
        fields = tuple(FieldDecl(n) for n in self.fields)

        nprocs = rng.randint(0, self.config.max_procs)
        procs: list[ProcDecl] = []
        for i in range(nprocs):
            name = f"proc{i}"
            param_ann = self.pick_ann()
            ret_ann = self.pick_ann()
            self.sigs.append((name, param_ann, ret_ann))
            scope = _Scope(declared=["p"], assigned=["p"])
            body = self.gen_block(0, scope, avail=i)
            if ret_ann is GradAbst.NONNULL and rng.random() < 0.85:
                r = self.fresh()
                body += [SDecl(r), SAssign(r, ENew(self.fields)), SReturn(r)]
            else:
                body.append(SReturn(rng.choice(scope.assigned)))
            procs.append(ProcDecl(name, ret_ann, "p", param_ann, tuple(body)))

        scope = _Scope(declared=[], assigned=[])
        main = self.gen_block(0, scope, avail=nprocs)
        if not scope.assigned:
            r = self.fresh()
            main += [SDecl(r), SAssign(r, ENull())]
            scope.declared.append(r)
            scope.assign(r)
        main.append(SReturn(rng.choice(scope.assigned)))
        return Program(fields, tuple(procs), tuple(main))


def gen_program(config: GenConfig) -> Program:
    """Deterministic program generation; always surface- and CFG-valid."""
    p = _Gen(config).gen()
    surface = check_surface(p)
    assert not surface, f"generator produced surface errors: {surface[:3]}"
    bad = validate(lower(p))
    assert not bad, f"generator produced a malformed graph: {bad[:3]}"
    return p


def gen_programs(config: GenConfig, n: int) -> list[Program]:
    return [gen_program(dataclasses.replace(config, seed=config.seed + i)) for i in range(n)]


def gen_valid_programs(config: GenConfig, n: int, fully_annotated: bool = False) -> list[Program]:
    """First n statically-valid programs along the config's seed stream."""
    found: list[Program] = []
    i = 0
    while len(found) < n:
        if i >= 200 * max(n, 1):
            raise RuntimeError(f"validity yield too low: {len(found)}/{n} after {i} seeds")
        c = dataclasses.replace(
            config,
            seed=config.seed + i,
            annotation_density=1.0 if fully_annotated else config.annotation_density,
        )
        i += 1
        p = gen_program(c)
        if not static_warnings(kildall(lower(p), "gradual")):
            found.append(p)
    return found


ALL_INSTRUCTION_KINDS = frozenset(
    {
        "ICopy",
        "IConstNull",
        "ICall",
        "INew",
        "IAnd",
        "IOr",
        "IFieldRead",
        "IFieldWrite",
        "IBranch",
        "IIf",
        "IElse",
        "IReturn",
        "IMain",
        "IProc",
    }
)


def instruction_kinds(cfg: ProgramCfg) -> set[str]:
    return {type(v.instr).__name__ for v in cfg.vertices}


def corpus_dir() -> Path:
    return Path(__file__).parent / "corpus"


def corpus_paths() -> list[Path]:
    return sorted(corpus_dir().glob("*.picl"))


# ---------------------------------------------------------------------------
# Oracle plumbing
# ---------------------------------------------------------------------------


@dataclass
class OracleReport:
    name: str
    passed: bool
    checks: int
    failures: list[str]


class _Checker:
    def __init__(self, name: str, cap: int = 25):
        self.name = name
        self.checks = 0
        self.failures: list[str] = []
        self.cap = cap

    def check(self, ok: bool, message: str) -> None:
        self.checks += 1
        if not ok:
            if len(self.failures) < self.cap:
                self.failures.append(message)
            elif len(self.failures) == self.cap:
                self.failures.append("... more failures suppressed")

    def report(self) -> OracleReport:
        return OracleReport(self.name, not self.failures, self.checks, self.failures)


# ---------------------------------------------------------------------------
# Lattice oracle
# ---------------------------------------------------------------------------

EXPECTED_HASSE: frozenset[tuple[GradAbst, GradAbst]] = frozenset(
    {
        (GradAbst.NULL, GradAbst.UNKNOWN_NULL),
        (GradAbst.UNKNOWN, GradAbst.UNKNOWN_NULL),
        (GradAbst.UNKNOWN, GradAbst.UNKNOWN_NONNULL),
        (GradAbst.NONNULL, GradAbst.UNKNOWN_NONNULL),
        (GradAbst.UNKNOWN_NULL, GradAbst.NULLABLE),
        (GradAbst.UNKNOWN_NONNULL, GradAbst.NULLABLE),
    }
)

EXPECTED_CEIL: dict[GradAbst, Abst] = {
    GradAbst.NULL: Abst.NULL,
    GradAbst.NONNULL: Abst.NONNULL,
    GradAbst.NULLABLE: Abst.NULLABLE,
    GradAbst.UNKNOWN: Abst.NULLABLE,
    GradAbst.UNKNOWN_NULL: Abst.NULLABLE,
    GradAbst.UNKNOWN_NONNULL: Abst.NULLABLE,
}


def _shape(g: GradAbst) -> tuple[str, Optional[Abst]]:
    a = as_exact(g)
    if a is not None:
        return "exact", a
    if g is GradAbst.UNKNOWN:
        return "unknown", None
    return "atleast", Abst.NULL if g is GradAbst.UNKNOWN_NULL else Abst.NONNULL


def closed_form_join(g1: GradAbst, g2: GradAbst) -> GradAbst:
    """The gradual join by case analysis on element shapes (no alpha)."""
    k1, a1 = _shape(g1)
    k2, a2 = _shape(g2)
    if k1 == "exact" and k2 == "exact":
        return exact(base_join(a1, a2))
    if k1 == "unknown" and k2 == "unknown":
        return GradAbst.UNKNOWN
    if k1 == "unknown":
        return g2 if k2 == "atleast" else at_least(a2)
    if k2 == "unknown":
        return g1 if k1 == "atleast" else at_least(a1)
    return at_least(base_join(a1, a2))


_FOUR = (GradAbst.NULL, GradAbst.NONNULL, GradAbst.NULLABLE, GradAbst.UNKNOWN)


def naive_alpha(baseset: frozenset[Abst]) -> GradAbst:
    """alpha restricted to a four-element lifting without ?Null/?NonNull."""
    if not baseset:
        raise ValueError("alpha of the empty set is undefined")
    meet = frozenset(ALL_ABST)
    for g in _FOUR:
        if baseset <= gamma(g):
            meet &= gamma(g)
    for g in _FOUR:
        if gamma(g) == meet:
            return g
    raise AssertionError("four-element alpha fell outside its image")


def naive_lifted_join(g1: GradAbst, g2: GradAbst) -> GradAbst:
    return naive_alpha(frozenset(base_join(a, b) for a in gamma(g1) for b in gamma(g2)))


def oracle_lattice(
    join_fn: Callable[[GradAbst, GradAbst], GradAbst] = lifted_join,
    leq_fn: Callable[[GradAbst, GradAbst], bool] = lifted_leq,
) -> OracleReport:
    ck = _Checker("lattice")

    # The base embedding: exact elements behave exactly like base elements.
    for a in ALL_ABST:
        for b in ALL_ABST:
            ck.check(
                join_fn(exact(a), exact(b)) is exact(base_join(a, b)),
                f"embedding: join({a}, {b}) != base join",
            )
            ck.check(
                leq_fn(exact(a), exact(b)) == base_leq(a, b),
                f"embedding: leq({a}, {b}) != base order",
            )

    # Semilattice laws.
    for a in ALL_GRAD:
        ck.check(join_fn(a, a) is a, f"idempotence fails at {a}")
        for b in ALL_GRAD:
            ck.check(join_fn(a, b) is join_fn(b, a), f"commutativity fails at ({a}, {b})")
            for c in ALL_GRAD:
                left = join_fn(a, join_fn(b, c))
                right = join_fn(join_fn(a, b), c)
                ck.check(left is right, f"associativity fails at ({a}, {b}, {c}): {left} != {right}")

    # Closed form vs. the shipped join, all 36 pairs.
    for a in ALL_GRAD:
        for b in ALL_GRAD:
            want = closed_form_join(a, b)
            got = join_fn(a, b)
            ck.check(got is want, f"join table: ({a}, {b}) -> {got}, closed form says {want}")

    # Galois conditions for every nonempty subset of base facts.
    subsets: list[frozenset[Abst]] = []
    for mask in range(1, 8):
        subsets.append(frozenset(a for i, a in enumerate(ALL_ABST) if mask & (1 << i)))
    for sub in subsets:
        ga = alpha(sub)
        ck.check(sub <= gamma(ga), f"alpha soundness fails on {set(sub)}")
        for g in ALL_GRAD:
            if sub <= gamma(g):
                ck.check(
                    precision_leq(ga, g),
                    f"alpha optimality fails on {set(sub)}: alpha={ga} not below {g}",
                )

    # gamma is injective and alpha inverts it.
    seen: dict[frozenset[Abst], GradAbst] = {}
    for g in ALL_GRAD:
        dup = seen.get(gamma(g))
        ck.check(dup is None, f"gamma not injective: {g} and {dup}")
        seen[gamma(g)] = g
        ck.check(alpha(gamma(g)) is g, f"alpha(gamma({g})) != {g}")

    # Consistent order is definitionally the existential one.
    for a in ALL_GRAD:
        for b in ALL_GRAD:
            want = any(base_leq(x, y) for x in gamma(a) for y in gamma(b))
            ck.check(leq_fn(a, b) == want, f"consistent order wrong at ({a}, {b})")

    # Induced order: Hasse diagram and height.
    strict = {
        (a, b)
        for a in ALL_GRAD
        for b in ALL_GRAD
        if a is not b and join_fn(a, b) is b
    }
    hasse = {
        (a, b)
        for (a, b) in strict
        if not any((a, c) in strict and (c, b) in strict for c in ALL_GRAD)
    }
    ck.check(
        hasse == set(EXPECTED_HASSE),
        f"Hasse diagram differs: unexpected {sorted(map(str, hasse - set(EXPECTED_HASSE)))}, "
        f"missing {sorted(map(str, set(EXPECTED_HASSE) - hasse))}",
    )

    def longest_from(g: GradAbst) -> int:
        return max((1 + longest_from(b) for (a, b) in hasse if a is g), default=0)

    height = max(longest_from(g) for g in ALL_GRAD)
    ck.check(height == BASE_HEIGHT + 1, f"height {height}, expected {BASE_HEIGHT + 1}")

    # Pessimistic reading.
    for g, want in EXPECTED_CEIL.items():
        ck.check(ceil(g) is want, f"ceil({g}) = {ceil(g)}, expected {want}")

    # Regression: the four-element lifting is not associative.
    left = naive_lifted_join(GradAbst.NULL, naive_lifted_join(GradAbst.NONNULL, GradAbst.UNKNOWN))
    right = naive_lifted_join(naive_lifted_join(GradAbst.NULL, GradAbst.NONNULL), GradAbst.UNKNOWN)
    ck.check(left is GradAbst.UNKNOWN, f"four-element left association gave {left}, expected ?")
    ck.check(right is GradAbst.NULLABLE, f"four-element right association gave {right}, expected Nullable")
    ck.check(left is not right, "four-element lifting unexpectedly associative on (Null, NonNull, ?)")

    return ck.report()


# ---------------------------------------------------------------------------
# Local soundness oracle
# ---------------------------------------------------------------------------

_ANNS = (GradAbst.NONNULL, GradAbst.NULLABLE, GradAbst.UNKNOWN)
_VARS = ("x", "y", "z")
_FIELDS = ("f", "g")


def _single_cfg(ins) -> ProgramCfg:
    universe = frozenset(_VARS)
    if isinstance(ins, IBranch):
        vertices = [
            Vertex(0, ins, MAIN),
            Vertex(1, IIf(ins.var), MAIN),
            Vertex(2, IElse(ins.var), MAIN),
            Vertex(3, IReturn("x", GradAbst.NULLABLE), MAIN),
        ]
        succ: list[tuple[int, ...]] = [(1, 2), (3,), (3,), ()]
    else:
        vertices = [Vertex(0, ins, MAIN), Vertex(1, IReturn("x", GradAbst.NULLABLE), MAIN)]
        succ = [(1,), ()]
    return ProgramCfg(vertices, succ, entry=0, proc_entry={}, universe={MAIN: universe})


def _call_cfg(ret_ann: GradAbst, param_ann: GradAbst) -> tuple[ProgramCfg, ICall, IProc]:
    call = ICall("x", "q", ret_ann, "y", param_ann)
    proc = IProc("q", ret_ann, "w", param_ann)
    vertices = [
        Vertex(0, IMain(), MAIN),
        Vertex(1, call, MAIN),
        Vertex(2, IReturn("x", GradAbst.NULLABLE), MAIN),
        Vertex(3, proc, "q"),
        Vertex(4, ICopy("r", "w"), "q"),
        Vertex(5, IReturn("r", ret_ann), "q"),
    ]
    succ: list[tuple[int, ...]] = [(1,), (2,), (), (4,), (5,), ()]
    cfg = ProgramCfg(
        vertices,
        succ,
        entry=0,
        proc_entry={"q": 3},
        universe={MAIN: frozenset({"x", "y"}), "q": frozenset({"w", "r"})},
    )
    return cfg, call, proc


def _random_env(rng: random.Random, names) -> dict[str, int]:
    return {x: rng.randint(0, 3) for x in names}


def _random_heap(rng: random.Random) -> dict[int, dict[str, int]]:
    heap: dict[int, dict[str, int]] = {}
    for loc in (1, 2, 3):
        if rng.random() < 0.85:
            heap[loc] = {f: rng.randint(0, 3) for f in _FIELDS if rng.random() < 0.8}
    return heap


def _describing_sigma(rng: random.Random, env: dict[str, int], names) -> dict[str, GradAbst]:
    sigma: dict[str, GradAbst] = {}
    for x in names:
        if rng.random() < 0.25:
            continue  # leave undefined: unconstrained
        while True:
            g = rng.choice(ALL_GRAD)
            if x not in env or grad_conc_contains(g, env[x]):
                sigma[x] = g
                break
    return sigma


def _random_instr(rng: random.Random):
    kind = rng.choice(
        (
            "copy",
            "null",
            "new",
            "and",
            "or",
            "fieldread",
            "fieldwrite",
            "branch",
            "if",
            "else",
            "main",
        )
    )
    v = lambda: rng.choice(_VARS)
    f = lambda: rng.choice(_FIELDS)
    if kind == "copy":
        return ICopy(v(), v())
    if kind == "null":
        return IConstNull(v())
    if kind == "new":
        n = rng.randint(1, len(_FIELDS))
        return INew(v(), tuple(rng.sample(_FIELDS, n)))
    if kind == "and":
        return IAnd(v(), v(), v())
    if kind == "or":
        return IOr(v(), v(), v())
    if kind == "fieldread":
        # Distinct names: the field-read transfer narrows the receiver, so
        # the local-soundness claim is about reads that keep it around.
        # The aliased corner (x := x.f) is pinned by its own regression test.
        target = v()
        obj = rng.choice([w for w in _VARS if w != target])
        return IFieldRead(target, obj, f())
    if kind == "fieldwrite":
        return IFieldWrite(v(), f(), v())
    if kind == "branch":
        return IBranch(v())
    if kind == "if":
        return IIf(v())
    if kind == "else":
        return IElse(v())
    return IMain()


def oracle_local_soundness(trials: int = 10_000, seed: int = 0) -> OracleReport:
    """Stepping a described state lands in the pushed-through description."""
    ck = _Checker("local-soundness")
    rng = random.Random(f"local-soundness-{seed}")
    for _ in range(trials):
        which = rng.random()
        if which < 0.7:
            ins = _random_instr(rng)
            cfg = _single_cfg(ins)
            env = _random_env(rng, _VARS)
            if isinstance(ins, IIf) and env[ins.var] == 0:
                env[ins.var] = rng.randint(1, 3)
            if isinstance(ins, IElse):
                env[ins.var] = 0
            state = MachineState((Frame(env, 0),), _random_heap(rng))
            sigma = _describing_sigma(rng, env, _VARS)
            assert lifted_desc(env, sigma)
            out = step(cfg, state)
            if not isinstance(out, Stepped):
                continue
            ck.check(
                lifted_desc(out.state.top.env, lifted_flow(ins, sigma, cfg.universe[MAIN])),
                f"local soundness fails: {ins!r} env={env} sigma={sigma}",
            )
        elif which < 0.85:
            # Procedure entry: binding the parameter under its annotation.
            cfg, call, proc = _call_cfg(rng.choice(_ANNS), rng.choice(_ANNS))
            caller_env = _random_env(rng, ("x", "y"))
            state = MachineState((Frame(caller_env, 1), Frame({}, 3)), _random_heap(rng))
            sigma = _describing_sigma(rng, {}, ("w", "r"))
            out = step(cfg, state)
            if not isinstance(out, Stepped):
                continue  # argument violated the annotation: no step to judge
            ck.check(
                lifted_desc(out.state.top.env, lifted_flow(proc, sigma, cfg.universe["q"])),
                f"local soundness fails at proc entry: {proc!r} arg={caller_env['y']} sigma={sigma}",
            )
        else:
            # Return: the caller's frame steps by the call's transfer rule.
            cfg, call, proc = _call_cfg(rng.choice(_ANNS), rng.choice(_ANNS))
            caller_env = _random_env(rng, ("x", "y"))
            callee_env = _random_env(rng, ("w", "r"))
            state = MachineState((Frame(caller_env, 1), Frame(callee_env, 5)), _random_heap(rng))
            sigma = _describing_sigma(rng, caller_env, ("x", "y"))
            assert lifted_desc(caller_env, sigma)
            out = step(cfg, state)
            if not isinstance(out, Stepped):
                continue  # return value violated the annotation
            ck.check(
                lifted_desc(out.state.top.env, lifted_flow(call, sigma, cfg.universe[MAIN])),
                f"local soundness fails at return: ret={callee_env['r']} sigma={sigma}",
            )
    return ck.report()


# ---------------------------------------------------------------------------
# Proposition checks (per program, reused by the test suite)
# ---------------------------------------------------------------------------


def lockstep_modes(cfg: ProgramCfg, fuel: int) -> Optional[str]:
    """Plain and checked execution agree step for step (annotated + valid)."""
    s_plain = initial_state(cfg)
    s_grad = initial_state(cfg)
    for k in range(fuel):
        o1 = step(cfg, s_plain)
        o2 = grad_step(cfg, s_grad)
        if type(o1) is not type(o2):
            return f"step {k}: plain {type(o1).__name__} vs checked {type(o2).__name__}"
        if isinstance(o1, Final):
            return None if o1.state == o2.state else f"step {k}: final states differ"
        if isinstance(o1, (Stuck, Errored)):
            return f"step {k}: unexpected {type(o1).__name__}"
        assert isinstance(o1, Stepped) and isinstance(o2, Stepped)
        if o1.state != o2.state:
            return f"step {k}: states diverge at v{o1.state.top.vertex}/v{o2.state.top.vertex}"
        s_plain, s_grad = o1.state, o2.state
    return None


def lockstep_precision(cfg1: ProgramCfg, cfg2: ProgramCfg, fuel: int) -> Optional[str]:
    """Erasing annotations cannot change behavior before the first error.

    cfg1 is the more annotated program, cfg2 its erasure; vertex ids align.
    Comparison stops at cfg1's first error (cfg2 is unconstrained after).
    """
    s1 = initial_state(cfg1)
    s2 = initial_state(cfg2)
    for k in range(fuel):
        o1 = grad_step(cfg1, s1)
        if isinstance(o1, Errored):
            return None
        o2 = grad_step(cfg2, s2)
        if isinstance(o1, Final):
            if isinstance(o2, Final) and o1.state == o2.state:
                return None
            return f"step {k}: precise program final, erased program {type(o2).__name__}"
        if isinstance(o1, Stuck):
            return f"step {k}: precise program stuck ({o1.reason})"
        if not isinstance(o2, Stepped):
            return f"step {k}: erased program stopped early with {type(o2).__name__}"
        assert isinstance(o1, Stepped)
        if o1.state != o2.state:
            return f"step {k}: states diverge at v{o1.state.top.vertex}/v{o2.state.top.vertex}"
        s1, s2 = o1.state, o2.state
    return None


def check_conservative_extension(p: Program, fuel: int = 2000) -> list[str]:
    """Fully annotated programs: both analyses and both executions agree."""
    failures: list[str] = []
    cfg = lower(p)
    rs = kildall(cfg, "static")
    rg = kildall(cfg, "gradual")
    static_pi = rs.pi_as_grad()
    for v in range(len(cfg.vertices)):
        if static_pi[v] != rg.pi[v]:
            failures.append(f"pi differs at v{v}: static {static_pi[v]} vs gradual {rg.pi[v]}")
    ws, wg = static_warnings(rs), static_warnings(rg)
    if ws != wg:
        failures.append(f"warnings differ: static {len(ws)} vs gradual {len(wg)}")
    sites = check_sites(rg)
    if sites:
        failures.append(f"fully annotated program has {len(sites)} check sites")
    if not wg:
        diverged = lockstep_modes(cfg, fuel)
        if diverged:
            failures.append(diverged)
    return failures


def check_erasure_guarantees(p: Program, subsets: list[set[str]], fuel: int = 2000) -> list[str]:
    """Statically valid p: erasing annotation subsets keeps every guarantee."""
    failures: list[str] = []
    cfg1 = lower(p)
    r1 = kildall(cfg1, "gradual")
    if static_warnings(r1):
        return ["precondition violated: program is not statically valid"]
    for subset in subsets:
        p2 = erase_annotations(p, subset)
        if not precision_leq_prog(p, p2):
            failures.append(f"erasure {sorted(subset)} not precision-related")
            continue
        cfg2 = lower(p2)
        r2 = kildall(cfg2, "gradual")
        w2 = static_warnings(r2)
        if w2:
            failures.append(f"erasure {sorted(subset)} introduced warnings: {w2[0].render()}")
        for v in range(len(cfg1.vertices)):
            for x, g1 in r1.pi[v].items():
                g2 = r2.pi[v].get(x)
                if g2 is None:
                    failures.append(f"erasure {sorted(subset)}: pi lost {x} at v{v}")
                elif not (gamma(g1) <= gamma(g2)):
                    failures.append(
                        f"erasure {sorted(subset)}: denotation shrank at v{v}[{x}]: {g1} vs {g2}"
                    )
        diverged = lockstep_precision(cfg1, cfg2, fuel)
        if diverged:
            failures.append(f"erasure {sorted(subset)}: {diverged}")
    return failures


def check_progress_and_sites(p: Program, fuel: int = 2000, check_described: bool = False) -> list[str]:
    """Valid p under checked execution: no Stuck, errors only at check sites,
    and (optionally) every frame stays described by the fixpoint."""
    failures: list[str] = []
    cfg = lower(p)
    r = kildall(cfg, "gradual")
    if static_warnings(r):
        return ["precondition violated: program is not statically valid"]
    sites = {(c.vertex, c.variable) for c in check_sites(r)}
    state = initial_state(cfg)
    for _ in range(fuel):
        if check_described:
            for fr in state.frames:
                if not lifted_desc(fr.env, r.pi[fr.vertex]):
                    failures.append(f"frame at v{fr.vertex} not described by fixpoint")
                    return failures
        out = grad_step(cfg, state)
        if isinstance(out, Final):
            return failures
        if isinstance(out, Stuck):
            failures.append(f"stuck at v{out.vertex}: {out.reason}")
            return failures
        if isinstance(out, Errored):
            if (out.vertex, out.variable) not in sites:
                failures.append(
                    f"error at v{out.vertex} on {out.variable!r} is not a declared check site"
                )
            return failures
        state = out.state
    return failures  # fuel exhausted: nothing to judge


def oracle_propositions(programs: int = 40, seed: int = 0, fuel: int = 1500) -> OracleReport:
    ck = _Checker("propositions")

    base = GenConfig(seed=seed, annotation_density=1.0)
    for p in gen_programs(base, programs):
        for msg in check_conservative_extension(p, fuel):
            ck.check(False, f"[annotated seed-batch] {msg}")
        ck.check(True, "conservative extension")

    rng = random.Random(f"erasure-{seed}")
    valid = gen_valid_programs(GenConfig(seed=seed + 100_000, annotation_density=0.6), programs)
    for p in valid:
        sites = [k for k, _ in annotation_sites(p)]
        subsets = [
            {s for s in sites if rng.random() < 0.5},
            set(sites),
        ]
        for msg in check_erasure_guarantees(p, subsets, fuel):
            ck.check(False, f"[erasure] {msg}")
        ck.check(True, "erasure guarantees")
        for msg in check_progress_and_sites(p, fuel, check_described=True):
            ck.check(False, f"[progress] {msg}")
        ck.check(True, "progress and check sites")

    return ck.report()
