from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import graph_from
from dirfuzz.callgraph import Kind, dump_cgf, load_cgf, reverse_view
from dirfuzz.errors import DirfuzzError, OverlapError, ParseError, ValidationError
from oracles import random_graph


def test_motivating_path_fragment():
    g = load_cgf(b"syscall inotify_init\nfunc do_inotify_init\nedge inotify_init do_inotify_init\n")
    assert len(g.syscalls) == 1 and len(g.internals) == 1 and len(g.edges) == 1
    assert g.info["inotify_init"].kind is Kind.SYSCALL


def test_empty_input():
    g = load_cgf(b"")
    assert not g.syscalls and not g.internals and not g.edges


def test_undeclared_endpoint():
    with pytest.raises(ValidationError):
        load_cgf("func b\nedge a b\n")


@pytest.mark.parametrize(
    "text",
    [
        "syscall a\nsyscall a\n",
        "syscall a\nfunc a\n",
        "func a\nedge a a\n",
        "func a\nfunc b\nedge a b\nedge a b\n",
        "func a\nfunc b\npc a 0 16\npc b 8 24\n",
        "func a\npc a 16 16\n",
        "func a\nfunc b\nedge a b\ngate a b a\n",  # prerequisite must be a syscall
        "syscall s\nfunc a\ngate s a s\n",  # gate on an undeclared edge
        "func a\ntemplate a\n",
    ],
)
def test_validation_errors(text):
    with pytest.raises(ValidationError):
        load_cgf(text)


def test_overlap_is_a_validation_error():
    with pytest.raises(OverlapError):
        load_cgf("func a\nfunc b\npc a 0x10 0x20\npc b 0x1f 0x30\n")


@pytest.mark.parametrize(
    "text, line",
    [
        ("syscall a\nbogus a\n", 2),
        ("syscall\n", 1),
        ("edge a\n", 1),
        ("func 9lives\n", 1),
        ("func a\npc a 0x1g 20\n", 2),
        ("func a\npc a -1 20\n", 2),
        ("func a\nsource a <<<\nint x;\n", 2),
        ("func a\nsource a\n", 2),
    ],
)
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ParseError) as exc:
        load_cgf(text)
    assert exc.value.line == line


def test_comments_hex_and_source_blocks():
    text = """
    # leading comment
    syscall s   # trailing comment
    func f
    edge s f
    pc s 0x100 0x110
    pc f 272 288
    source f <<<
    static void f(void)
    {
        /* # not a comment here */
    }
    >>>
    """
    g = load_cgf(text)
    assert g.info["s"].pc_range == (0x100, 0x110)
    assert g.info["f"].pc_range == (272, 288)
    assert "# not a comment here" in g.info["f"].source
    assert g.info["f"].source.count("\n") == 3


def test_motivating_fixture(motivating):
    assert motivating.syscalls == {"inotify_init", "inotify_init1"}
    assert ("mock_drm_getfile", "anon_inode_getfile") in motivating.edges
    assert motivating.names[0] == "inotify_init"


def test_reverse_view_examples():
    g = graph_from(["s1", "a", "t"], {"s1"}, [("s1", "a"), ("a", "t")])
    rev = reverse_view(g)
    assert rev["t"] == {"a"} and rev["a"] == {"s1"} and rev["s1"] == set()

    g = graph_from(["a", "b", "t"], set(), [("a", "t"), ("b", "t")])
    assert reverse_view(g)["t"] == {"a", "b"}

    g = graph_from(["a", "b"], set(), [])
    assert all(not callers for callers in reverse_view(g).values())


@pytest.mark.parametrize("seed", range(50))
def test_reverse_view_properties(seed):
    nodes, sys_, edges = random_graph(random.Random(seed))
    g = graph_from(nodes, set(sys_), edges)
    rev = reverse_view(g)
    assert sum(len(v) for v in rev.values()) == len(g.edges)
    for u, v in g.edges:
        assert u in rev[v]
    # reversing twice restores forward adjacency
    twice: dict[str, set[str]] = {n: set() for n in g.names}
    for callee, callers in rev.items():
        for caller in callers:
            twice[caller].add(callee)
    assert twice == {n: set(g.successors(n)) for n in g.names}


def test_roundtrip_motivating(motivating):
    assert load_cgf(dump_cgf(motivating)) == motivating


@st.composite
def graphs(draw):
    n = draw(st.integers(0, 15))
    nodes = [f"f{i}" for i in range(n)]
    syscalls = {x for x in nodes if draw(st.booleans())}
    pairs = [(u, v) for u in nodes for v in nodes if u != v]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=30)) if pairs else []
    sources = {x: draw(st.text(st.characters(blacklist_categories=("Cs",)), max_size=40)) for x in nodes if draw(st.booleans())}
    return nodes, syscalls, edges, sources


@given(graphs())
@settings(max_examples=150, deadline=None)
def test_roundtrip_random(spec):
    nodes, syscalls, edges, sources = spec
    lines = [f"{'syscall' if n in syscalls else 'func'} {n}" for n in nodes]
    lines += [f"edge {u} {v}" for u, v in edges]
    lines += [f"pc {n} {i * 16} {i * 16 + 16}" for i, n in enumerate(nodes)]
    for n, src in sources.items():
        if any(line.strip() == ">>>" for line in src.split("\n")):
            continue
        lines += [f"source {n} <<<", *src.split("\n"), ">>>"]
    g = load_cgf("\n".join(lines))
    again = load_cgf(dump_cgf(g))
    assert again == g
    assert again.syscalls == g.syscalls and again.edges == g.edges


@given(st.data())
@settings(max_examples=300, deadline=None)
def test_parser_fuzz_only_typed_errors(data):
    base = dump_cgf(graph_from(["s", "a", "b"], {"s"}, [("s", "a"), ("a", "b")]))
    raw = bytearray(base.encode())
    for _ in range(data.draw(st.integers(1, 8))):
        op = data.draw(st.sampled_from(["flip", "delete", "insert"]))
        pos = data.draw(st.integers(0, max(0, len(raw) - 1)))
        if op == "flip" and raw:
            raw[pos] = data.draw(st.integers(0, 255))
        elif op == "delete" and raw:
            del raw[pos]
        else:
            raw.insert(pos, data.draw(st.sampled_from(list(b" \n#<>xedgefuncsyscall0123"))))
    try:
        load_cgf(bytes(raw))
    except DirfuzzError:
        pass


@pytest.mark.parametrize("seed", range(200))
def test_validation_accepts_exactly_valid_graphs(seed):
    rng = random.Random(seed)
    nodes, sys_, edges = random_graph(rng, max_nodes=rng.randint(1, 200), max_edges=400)
    edges = list(edges)
    broken = rng.random() < 0.5
    if broken:
        kind = rng.choice(["self", "undeclared", "dup"])
        if kind == "self":
            edges.append((nodes[0], nodes[0]))
        elif kind == "undeclared":
            edges.append((nodes[0], "ghost"))
        else:
            nodes = nodes + [nodes[0]]
    text = "\n".join(
        [f"{'syscall' if n in sys_ else 'func'} {n}" for n in nodes]
        + [f"edge {u} {v}" for u, v in edges]
    )
    if broken:
        with pytest.raises(ValidationError):
            load_cgf(text)
    else:
        g = load_cgf(text)
        assert g.edges == set(edges)
