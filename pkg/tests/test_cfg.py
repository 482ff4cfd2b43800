"""Lowering shapes, structural validation, and DOT output."""

import dataclasses

from conftest import LOOP_SRC
from graduator.cfg import (
    MAIN,
    IBranch,
    ICall,
    IConstNull,
    ICopy,
    IElse,
    IFieldRead,
    IIf,
    IMain,
    INew,
    IProc,
    IReturn,
    ProgramCfg,
    Vertex,
    emit_dot,
    lower,
    render_instr,
    reverse_postorder,
    validate,
)
from graduator.lattice import GradAbst
from graduator.syntax import parse
from graduator.testkit import GenConfig, gen_program


def lowered(src):
    cfg = lower(parse(src))
    assert validate(cfg) == []
    return cfg


def region(cfg, name):
    return [v for v in cfg.vertices if v.proc == name]


def test_retry_loop_region_is_the_six_vertex_shape():
    cfg = lowered(LOOP_SRC)
    foo = region(cfg, "foo")
    kinds = [type(v.instr).__name__ for v in foo]
    assert kinds == ["IProc", "IBranch", "IIf", "IElse", "ICall", "IReturn"]
    proc, branch, iff, els, call, ret = (v.id for v in foo)
    assert cfg.succ[proc] == (branch,)
    assert set(cfg.succ[branch]) == {iff, els}
    assert cfg.succ[iff] == (ret,)
    assert cfg.succ[els] == (call,)
    assert cfg.succ[call] == (branch,)  # loop back to the condition
    assert cfg.succ[ret] == ()


def test_bare_variable_condition_branches_directly():
    cfg = lowered("main { var x; x := null; if (x != null) { skip; } else { skip; } return x; }")
    assert not any(isinstance(v.instr, ICopy) for v in cfg.vertices)
    branch = next(v for v in cfg.vertices if isinstance(v.instr, IBranch))
    assert branch.instr.var == "x"


def test_null_test_polarity_swaps_the_arms():
    # body of `while (x == null)` hangs off the else arm; exit goes through if
    cfg = lowered("main { var x; x := null; while (x == null) { x := null; } return x; }")
    els = next(v for v in cfg.vertices if isinstance(v.instr, IElse))
    iff = next(v for v in cfg.vertices if isinstance(v.instr, IIf))
    body = cfg.succ[els.id][0]
    assert isinstance(cfg.instr(body), IConstNull)
    assert isinstance(cfg.instr(cfg.succ[iff.id][0]), IReturn)


def test_compound_condition_evaluates_into_a_temp():
    cfg = lowered(
        "main { var a; var b; a := null; b := null;"
        " if (a && b != null) { skip; } else { skip; } return a; }"
    )
    branch = next(v for v in cfg.vertices if isinstance(v.instr, IBranch))
    assert branch.instr.var == "$0"
    assert "$0 := a && b" in [render_instr(v.instr) for v in cfg.vertices]


def test_loop_reenters_at_the_condition_head():
    # compound condition: the back edge targets the first temp evaluation
    cfg = lowered(
        "main { var a; var b; a := null; b := null;"
        " while (a || b != null) { a := null; } return a; }"
    )
    tmp = next(v for v in cfg.vertices if render_instr(v.instr) == "$0 := a || b")
    bodies = [v for v in cfg.vertices if isinstance(v.instr, IConstNull) and v.instr.target == "a"]
    assert cfg.succ[bodies[-1].id] == (tmp.id,)


def test_call_vertices_copy_the_callee_signature():
    cfg = lowered(LOOP_SRC)
    call = next(v.instr for v in cfg.vertices if isinstance(v.instr, ICall))
    assert call.proc == "bar"
    assert call.ret_ann is GradAbst.NONNULL
    assert call.arg_ann is GradAbst.NULLABLE


def test_nested_call_arguments_lower_inside_out():
    cfg = lowered(
        "proc f(x) { return x; }"
        " main { var a; a := null; a := f(f(a)); return a; }"
    )
    calls = [v for v in cfg.vertices if isinstance(v.instr, ICall)]
    assert [c.instr.target for c in calls] == ["$0", "a"]
    assert calls[1].instr.arg == "$0"


def test_main_return_is_annotated_nullable():
    cfg = lowered("main { var x; x := null; return x; }")
    ret = next(v.instr for v in cfg.vertices if isinstance(v.instr, IReturn))
    assert ret.ann is GradAbst.NULLABLE


def test_universe_covers_params_locals_and_temps():
    cfg = lowered(
        "proc f(x) { var y; y := x && x; return y; }"
        " main { var a; a := null; a := f(a && a); return a; }"
    )
    assert cfg.universe["f"] == frozenset({"x", "y"})
    assert cfg.universe[MAIN] == frozenset({"a", "$0"})


def test_instruction_rendering():
    cfg = lowered(LOOP_SRC)
    texts = [render_instr(v.instr) for v in cfg.vertices]
    assert "proc foo@NonNull(x@Nullable)" in texts
    assert "x := bar@NonNull(x@Nullable)" in texts
    assert "branch(x)" in texts
    assert "return x@NonNull" in texts
    assert "t := new {f}" in texts


def hand_graph():
    """Minimal well-formed graph: main; x := null; return x."""
    vertices = [
        Vertex(0, IMain(), MAIN),
        Vertex(1, IConstNull("x"), MAIN),
        Vertex(2, IReturn("x", GradAbst.NULLABLE), MAIN),
    ]
    return ProgramCfg(
        vertices, [(1,), (2,), ()], entry=0, proc_entry={}, universe={MAIN: frozenset({"x"})}
    )


def test_validation_accepts_the_minimal_graph():
    assert validate(hand_graph()) == []


def test_validation_unique_entry():
    g = hand_graph()
    bad = dataclasses.replace(g, vertices=[g.vertices[0], Vertex(1, IMain(), MAIN), g.vertices[2]])
    assert any("one main" in m for m in validate(bad))
    looped = dataclasses.replace(g, succ=[(1,), (2,), (0,)])
    assert any("predecessors" in m for m in validate(looped))


def test_validation_partition():
    g = hand_graph()
    orphan = dataclasses.replace(
        g,
        vertices=g.vertices + [Vertex(3, IConstNull("x"), MAIN)],
        succ=[(1,), (2,), (), (2,)],
    )
    assert any("unreachable" in m for m in validate(orphan))


def test_validation_return_reachability_and_annotation():
    g = hand_graph()
    # v1 loops to itself instead of reaching the return
    stuck = dataclasses.replace(g, succ=[(1,), (1,), ()])
    msgs = validate(stuck)
    assert any("cannot reach a return" in m for m in msgs)

    wrong = dataclasses.replace(
        g, vertices=[g.vertices[0], g.vertices[1], Vertex(2, IReturn("x", GradAbst.NONNULL), MAIN)]
    )
    assert any("declares" in m for m in validate(wrong))


def test_validation_call_site_agreement():
    cfg = lowered(LOOP_SRC)
    call_vertex = next(v for v in cfg.vertices if isinstance(v.instr, ICall))
    busted = dataclasses.replace(call_vertex.instr, ret_ann=GradAbst.NULLABLE)
    vertices = [
        dataclasses.replace(v, instr=busted) if v.id == call_vertex.id else v
        for v in cfg.vertices
    ]
    bad = dataclasses.replace(cfg, vertices=vertices)
    assert any("disagrees" in m for m in validate(bad))


def test_validation_branch_successor_shape():
    vertices = [
        Vertex(0, IMain(), MAIN),
        Vertex(1, IConstNull("x"), MAIN),
        Vertex(2, IBranch("x"), MAIN),
        Vertex(3, IIf("x"), MAIN),
        Vertex(4, IElse("y"), MAIN),  # wrong variable
        Vertex(5, IReturn("x", GradAbst.NULLABLE), MAIN),
    ]
    g = ProgramCfg(
        vertices,
        [(1,), (2,), (3, 4), (5,), (5,), ()],
        entry=0,
        proc_entry={},
        universe={MAIN: frozenset({"x", "y"})},
    )
    assert any("matching if/else" in m for m in validate(g))


def test_reverse_postorder_covers_every_vertex_once():
    for seed in range(20):
        cfg = lower(gen_program(GenConfig(seed=seed)))
        order = reverse_postorder(cfg)
        assert sorted(order) == [v.id for v in cfg.vertices]


def test_dot_output_shape_and_determinism():
    cfg = lowered(LOOP_SRC)
    dot = emit_dot(cfg)
    assert dot == emit_dot(cfg)
    assert dot.startswith("digraph picl {")
    assert 'subgraph "cluster_foo"' in dot
    assert 'label="main"' in dot
    for v in cfg.vertices:
        assert f"v{v.id} [" in dot
    edges = [line for line in dot.splitlines() if "->" in line]
    assert len(edges) == sum(len(s) for s in cfg.succ)
