"""Shared program fixtures.

LOOP_SRC is the canonical retry loop: a procedure that keeps calling a
producer until it gets a non-null value.  Its region in the CFG is the
six-vertex shape (entry, branch, both arms, call, return) that the branch
narrowing rules were designed around, so several suites pin facts about it.

scenario_src builds the producer/consumer family used to exercise the
warning and check placement: a `reverse`-style procedure that is safe or
null-returning, with an optional return annotation, and a caller that
dereferences the result exactly once.
"""

from typing import Optional

# One line per acceptance criterion, printed as a summary section at the end
# of the run (see pytest_terminal_summary below); test_acceptance.py appends.
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


LOOP_SRC = """
field f;

proc bar@NonNull(y @Nullable) {
    var t;
    t := new {f};
    return t;
}

proc foo@NonNull(x @Nullable) {
    while (x == null) {
        x := bar(x);
    }
    return x;
}

main {
    var r;
    r := foo(null);
    return r;
}
"""


def scenario_src(ret_ann: Optional[str] = None, null_body: bool = False) -> str:
    ann = "@" + ret_ann if ret_ann else ""
    body = "out := null;" if null_body else "out := new {chars};"
    return f"""
field chars;

proc reverse{ann}(str) {{
    var out;
    if (str == null) {{
        {body}
    }} else {{
        out := new {{chars}};
    }}
    return out;
}}

main {{
    var tmp;
    var reversed;
    var frown;
    var both;
    reversed := reverse(null);
    tmp := new {{chars}};
    frown := reverse(tmp);
    both := reversed.chars;
    return both;
}}
"""


# The dereference `both := reversed.chars` in scenario_src, by vertex id.
SCENARIO_DEREF_VERTEX = 12
