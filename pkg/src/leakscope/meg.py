"""Micro-event graph construction, path enumeration, and exports.

A micro-event graph has one node per declared signal plus one per
sub-instance. A directed edge (a, b) records that a change on `a` may
trigger a change on `b`: `a` is either an operand of an assignment to `b`
or a signal read by any branch condition guarding that assignment. Each
edge carries the disjunction of per-occurrence branch conjunctions and the
source lines that induced the dependency; parallel edges between the same
ordered pair are collapsed into that disjunction so path enumeration does
not explode with the number of guarding conditions.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

from .errors import PathNotInGraph
from .hdl_ast import (
    AlwaysBlock,
    AlwaysTrigger,
    Assign,
    Binary,
    Case,
    ContinuousAssign,
    Expr,
    If,
    ModuleAst,
    Ref,
    SignalKind,
    SourceLoc,
    expr_signals,
    render_expr,
)
from .parser import CLOCK_NAME


class NodeKind(Enum):
    INPUT = "input"
    OUTPUT = "output"
    SEQUENTIAL = "sequential"
    COMBINATIONAL = "combinational"
    INSTANCE = "instance"


@dataclass(frozen=True)
class MegNode:
    id: str
    kind: NodeKind
    loc: SourceLoc
    # True when the signal is assigned under a clock edge. Output regs are
    # clocked without being SEQUENTIAL-kind: port kinds dominate the node
    # classification, but timing semantics follow this flag.
    clocked: bool = False


@dataclass(frozen=True)
class ConditionTerm:
    expr: str
    loc: SourceLoc


# One clause = conjunction of branch terms guarding a single occurrence.
Clause = tuple[ConditionTerm, ...]


@dataclass(frozen=True)
class MegEdge:
    src: str
    dst: str
    clauses: tuple[Clause, ...]  # empty tuple means unconditional
    lines: frozenset[int]
    locs: tuple[SourceLoc, ...]

    @property
    def unconditional(self) -> bool:
        return not self.clauses


@dataclass
class Meg:
    module_name: str
    nodes: dict[str, MegNode] = field(default_factory=dict)
    edges: dict[tuple[str, str], MegEdge] = field(default_factory=dict)

    def out_edges(self, node_id: str) -> list[MegEdge]:
        return [e for (src, _), e in self.edges.items() if src == node_id]

    def in_edges(self, node_id: str) -> list[MegEdge]:
        return [e for (_, dst), e in self.edges.items() if dst == node_id]

    def nodes_of_kind(self, kind: NodeKind) -> list[MegNode]:
        return [n for n in self.nodes.values() if n.kind is kind]


def render_clause(clause: Clause) -> str:
    return " && ".join(f"({term.expr})" for term in clause)


def render_condition(edge: MegEdge) -> str | None:
    """Single re-parseable boolean for an edge, or None if unconditional."""
    if edge.unconditional:
        return None
    if len(edge.clauses) == 1:
        return render_clause(edge.clauses[0])
    return " || ".join(f"({render_clause(c)})" for c in edge.clauses)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def _negate(e: Expr) -> str:
    return f"!({render_expr(e)})"


def _clocked_signals(m: ModuleAst) -> set[str]:
    clocked: set[str] = set()
    for item in m.items:
        if isinstance(item, AlwaysBlock) and item.trigger is AlwaysTrigger.POSEDGE_CLOCK:
            from .hdl_ast import walk_stmts

            for stmt in walk_stmts(item.body):
                if isinstance(stmt, Assign):
                    clocked.add(stmt.dest)
    return clocked


def build_meg(m: ModuleAst) -> Meg:
    """Extract the micro-event graph of one parsed module."""
    g = Meg(module_name=m.name)
    clocked = _clocked_signals(m)

    for decl in m.all_signals():
        if decl.kind is SignalKind.INPUT:
            kind = NodeKind.INPUT
        elif decl.kind is SignalKind.OUTPUT:
            kind = NodeKind.OUTPUT
        elif decl.name in clocked:
            kind = NodeKind.SEQUENTIAL
        else:
            kind = NodeKind.COMBINATIONAL
        g.nodes[decl.name] = MegNode(decl.name, kind, decl.loc, decl.name in clocked)
    for inst in m.instances:
        g.nodes[inst.instance_name] = MegNode(
            inst.instance_name, NodeKind.INSTANCE, inst.loc, False
        )

    # occurrences[(src, dst)] = (clauses in first-seen order, locs)
    occurrences: dict[tuple[str, str], dict] = {}

    def note(src: str, dst: str, clause: Clause, loc: SourceLoc) -> None:
        if src == CLOCK_NAME:
            return
        slot = occurrences.setdefault(
            (src, dst), {"clauses": [], "unconditional": False, "locs": []}
        )
        if loc not in slot["locs"]:
            slot["locs"].append(loc)
        if not clause:
            slot["unconditional"] = True
            return
        key = tuple(term.expr for term in clause)
        if key not in {tuple(t.expr for t in c) for c in slot["clauses"]}:
            slot["clauses"].append(clause)

    # Branch stack entries pair the rendered guard (what the edge carries)
    # with the original expression (for operand extraction).
    def note_assignment(dest, rhs, stack, loc):
        clause = tuple(term for term, _ in stack)
        operands = list(expr_signals(rhs))
        for _, guard_expr in stack:
            for s in expr_signals(guard_expr):
                if s not in operands:
                    operands.append(s)
        for s in operands:
            note(s, dest, clause, loc)

    def walk(stmts, stack):
        for stmt in stmts:
            if isinstance(stmt, Assign):
                note_assignment(stmt.dest, stmt.expr, stack, stmt.loc)
            elif isinstance(stmt, If):
                term = ConditionTerm(render_expr(stmt.cond), stmt.cond.loc)
                walk(stmt.then, stack + [(term, stmt.cond)])
                if stmt.other:
                    neg = ConditionTerm(_negate(stmt.cond), stmt.cond.loc)
                    walk(stmt.other, stack + [(neg, stmt.cond)])
            elif isinstance(stmt, Case):
                for arm in stmt.arms:
                    cond = Binary("==", stmt.subject, arm.match, arm.loc)
                    term = ConditionTerm(render_expr(cond), arm.loc)
                    walk(arm.body, stack + [(term, cond)])
                if stmt.default:
                    negated = []
                    for arm in stmt.arms:
                        cond = Binary("==", stmt.subject, arm.match, arm.loc)
                        negated.append((ConditionTerm(_negate(cond), arm.loc), cond))
                    walk(stmt.default, stack + negated)

    for item in m.items:
        if isinstance(item, ContinuousAssign):
            note_assignment(item.dest, item.expr, [], item.loc)
        elif isinstance(item, AlwaysBlock):
            walk(item.body, [])

    # Sub-instance ports: inputs feed the instance node, outputs leave it.
    for inst in m.instances:
        for formal, actual in inst.port_map:
            if formal == CLOCK_NAME:
                continue
            # A plain-Ref actual naming a wire that nothing in this module
            # drives can only be an instance output; everything else feeds
            # the instance. The linker enforces the directions for real.
            if isinstance(actual, Ref) and _is_instance_output(m, actual.name):
                note(inst.instance_name, actual.name, (), inst.loc)
            else:
                for s in expr_signals(actual):
                    note(s, inst.instance_name, (), inst.loc)

    for (src, dst), slot in occurrences.items():
        clauses = () if slot["unconditional"] else tuple(slot["clauses"])
        lines = frozenset(loc.line for loc in slot["locs"])
        g.edges[(src, dst)] = MegEdge(src, dst, clauses, lines, tuple(slot["locs"]))
    return g


def _is_instance_output(m: ModuleAst, signal: str) -> bool:
    """True when `signal` is a wire with no driver inside this module.

    Port directions of the child module are not visible here (build_meg is
    per-module); an undriven wire bound as a plain actual is treated as
    instance-driven, which is exactly the legal use the linker enforces.
    """
    decl = m.signal(signal)
    if decl.is_reg or decl.kind is SignalKind.INPUT:
        return False
    for item in m.items:
        if isinstance(item, ContinuousAssign) and item.dest == signal:
            return False
    return True


def build_megs(modules: dict[str, ModuleAst]) -> dict[str, Meg]:
    return {name: build_meg(m) for name, m in sorted(modules.items())}


# ---------------------------------------------------------------------------
# Micro-event paths
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MicroEventPath:
    edges: tuple[MegEdge, ...]

    @property
    def node_ids(self) -> tuple[str, ...]:
        return (self.edges[0].src,) + tuple(e.dst for e in self.edges)

    @property
    def id(self) -> str:
        # Stable hash over the node sequence plus the chosen clause index per
        # edge; collapsed disjunctions always use the whole edge (-1).
        text = ">".join(self.node_ids) + "|" + ",".join("-1" for _ in self.edges)
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    def __str__(self) -> str:
        return " -> ".join(self.node_ids)


@dataclass
class MepResult:
    paths: list[MicroEventPath]
    truncated: bool

    def __iter__(self):
        return iter(self.paths)

    def __len__(self) -> int:
        return len(self.paths)


def enumerate_meps(g: Meg, max_paths: int = 10_000, max_len: int = 64) -> MepResult:
    """All simple input-to-output paths, DFS order with sorted adjacency.

    Self-edges are skipped. Enumeration stops after `max_paths` results
    (result flagged truncated); paths longer than `max_len` edges are not
    explored.
    """
    adjacency: dict[str, list[MegEdge]] = {}
    for (src, dst), edge in g.edges.items():
        if src == dst:
            continue
        adjacency.setdefault(src, []).append(edge)
    for edges in adjacency.values():
        edges.sort(key=lambda e: e.dst)

    inputs = sorted(n.id for n in g.nodes_of_kind(NodeKind.INPUT))
    result = MepResult(paths=[], truncated=False)
    path: list[MegEdge] = []
    visited: set[str] = set()

    def dfs(node: str) -> bool:
        if path and g.nodes[node].kind is NodeKind.OUTPUT:
            result.paths.append(MicroEventPath(tuple(path)))
            if len(result.paths) >= max_paths:
                result.truncated = True
                return False
        if len(path) >= max_len:
            return True
        for edge in adjacency.get(node, ()):
            if edge.dst in visited:
                continue
            visited.add(edge.dst)
            path.append(edge)
            alive = dfs(edge.dst)
            path.pop()
            visited.remove(edge.dst)
            if not alive:
                return False
        return True

    for start in inputs:
        visited = {start}
        if not dfs(start):
            break
    return result


def find_mep(g: Meg, node_ids: list[str] | tuple[str, ...]) -> MicroEventPath:
    """Build the path along the given node sequence, verifying every hop."""
    edges = []
    for a, b in zip(node_ids, node_ids[1:]):
        edge = g.edges.get((a, b))
        if edge is None:
            raise PathNotInGraph(f"no edge ({a} -> {b}) in MEG of {g.module_name!r}")
        edges.append(edge)
    if not edges:
        raise PathNotInGraph("a path needs at least one edge")
    return MicroEventPath(tuple(edges))


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

_DOT_SHAPE = {
    NodeKind.INPUT: ("ellipse", "bold"),
    NodeKind.OUTPUT: ("doublecircle", "solid"),
    NodeKind.SEQUENTIAL: ("box", "solid"),
    NodeKind.COMBINATIONAL: ("ellipse", "solid"),
    NodeKind.INSTANCE: ("box", "dashed"),
}


def export_dot(g: Meg) -> str:
    """Render the graph as DOT. Instance nodes dashed, outputs doubled."""
    lines = [f'digraph "{g.module_name}" {{', "  rankdir=LR;"]
    for node in g.nodes.values():
        shape, style = _DOT_SHAPE[node.kind]
        lines.append(f'  "{node.id}" [shape={shape}, style={style}];')
    for (src, dst), edge in sorted(g.edges.items()):
        label = "L" + ",".join(str(n) for n in sorted(edge.lines))
        if edge.clauses:
            label = f"{len(edge.clauses)}c {label}"
        lines.append(f'  "{src}" -> "{dst}" [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_json(g: Meg) -> dict:
    nodes = [
        {
            "id": n.id,
            "kind": n.kind.value,
            "loc": {"file": n.loc.file, "line": n.loc.line, "col": n.loc.col},
        }
        for n in g.nodes.values()
    ]
    edges = [
        {
            "from": src,
            "to": dst,
            "clauses": [
                [{"expr": term.expr, "line": term.loc.line} for term in clause]
                for clause in edge.clauses
            ],
            "lines": sorted(edge.lines),
        }
        for (src, dst), edge in sorted(g.edges.items())
    ]
    return {"module": g.module_name, "nodes": nodes, "edges": edges}
