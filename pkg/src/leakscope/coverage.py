"""Timing-behavior coverage: path conditions, cover properties, matching.

Each micro-event path becomes an ordered condition: per edge, a Branch step
for the (possibly disjunctive) edge guard, a OneCycle step when the edge
lands on a clocked element (the event completes on the next edge), and an
Eventually step when it leaves an input or a sub-instance (the event lands
whenever the outside world delivers it). The same condition drives two
evaluators: emission as an SVA-style cover property for external tools, and
the internal matcher that aligns steps against recorded traces with
earliest-match-plus-backtracking semantics for Eventually.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from enum import Enum

from .errors import ExpressionEvalError, PathNotInGraph
from .meg import Meg, MicroEventPath, NodeKind, render_condition
from .parser import parse_expression
from .simulator import TraceBundle
from .hdl_ast import Expr

log = logging.getLogger(__name__)


class StepKind(Enum):
    BRANCH = "branch"
    ONE_CYCLE = "one_cycle"
    EVENTUALLY = "eventually"


@dataclass(frozen=True)
class ConditionStep:
    kind: StepKind
    expr: str | None = None  # BRANCH only: re-parseable boolean
    line: int | None = None  # origin of the first clause


@dataclass(frozen=True)
class PathCondition:
    path_id: str
    module: str
    node_ids: tuple[str, ...]
    steps: tuple[ConditionStep, ...]


def path_condition(p: MicroEventPath, g: Meg) -> PathCondition:
    """Ordered condition steps for one path, per-edge case analysis."""
    steps: list[ConditionStep] = []
    for edge in p.edges:
        if g.edges.get((edge.src, edge.dst)) is not edge:
            known = g.edges.get((edge.src, edge.dst))
            if known is None or known != edge:
                raise PathNotInGraph(
                    f"edge ({edge.src} -> {edge.dst}) is not part of MEG "
                    f"{g.module_name!r}"
                )
        if edge.clauses:
            steps.append(
                ConditionStep(
                    StepKind.BRANCH,
                    expr=render_condition(edge),
                    line=min(edge.lines),
                )
            )
        if g.nodes[edge.dst].clocked:
            steps.append(ConditionStep(StepKind.ONE_CYCLE))
        if g.nodes[edge.src].kind in (NodeKind.INSTANCE, NodeKind.INPUT):
            steps.append(ConditionStep(StepKind.EVENTUALLY))
    return PathCondition(
        path_id=p.id, module=g.module_name, node_ids=p.node_ids, steps=tuple(steps)
    )


# ---------------------------------------------------------------------------
# SVA emission
# ---------------------------------------------------------------------------

def emit_sva(pc: PathCondition, module: str | None = None) -> str:
    """One `cover property` per path. ##1 for OneCycle, ##[0:$] for
    Eventually; consecutive delays are separated by a literal-true term so
    the output stays inside the SVA sequence grammar."""
    module = module or pc.module
    tokens: list[str] = []
    for step in pc.steps:
        if step.kind is StepKind.BRANCH:
            tokens.append(f"({step.expr})")
        elif step.kind is StepKind.ONE_CYCLE:
            tokens.append("##1")
        else:
            tokens.append("##[0:$]")
    if not tokens:
        log.warning(
            "path %s in %s has no condition steps; emitting an always-coverable "
            "property", pc.path_id, module,
        )
    seq: list[str] = []
    expect_bool = True
    for token in tokens:
        is_delay = token.startswith("##")
        if expect_bool and is_delay:
            seq.append("1'b1")
        if not expect_bool and not is_delay:
            # Two adjacent booleans fuse with a zero-delay; keep them apart.
            seq.append("##0")
        seq.append(token)
        expect_bool = is_delay
    if expect_bool:
        seq.append("1'b1")
    name = f"cp_{module}_{pc.path_id}"
    comment = " -> ".join(pc.node_ids)
    return (
        f"// {comment}\n"
        f"{name}: cover property (@(posedge clk) {' '.join(seq)});"
    )


def emit_sva_file(conditions: list[PathCondition], module: str) -> str:
    header = f"// cover properties for module {module}: {len(conditions)} paths\n"
    return header + "\n".join(emit_sva(pc, module) for pc in conditions) + "\n"


_SVA_RE = re.compile(
    r"^(?P<name>[A-Za-z_]\w*)\s*:\s*cover\s+property\s*\(\s*"
    r"@\(posedge\s+clk\)\s*(?P<seq>.*)\)\s*;\s*$"
)
_DELAY_RE = re.compile(r"##(\d+|\[0:\$\])")


def _split_sva_seq(seq: str) -> list[str]:
    """Tokenize a property sequence into booleans and delay operators."""
    tokens: list[str] = []
    i = 0
    n = len(seq)
    while i < n:
        ch = seq[i]
        if ch.isspace():
            i += 1
            continue
        m = _DELAY_RE.match(seq, i)
        if m:
            tokens.append(m.group(0))
            i = m.end()
            continue
        if ch == "(":
            depth = 0
            j = i
            while j < n:
                if seq[j] == "(":
                    depth += 1
                elif seq[j] == ")":
                    depth -= 1
                    if depth == 0:
                        break
                j += 1
            if depth != 0:
                raise ValueError("unbalanced parentheses in sequence")
            tokens.append(seq[i:j + 1])
            i = j + 1
            continue
        # Bare boolean term (literal like 1'b1).
        j = i
        while j < n and not seq[j].isspace() and seq[j] != "#":
            j += 1
        tokens.append(seq[i:j])
        i = j
    return tokens


def sva_lint(text: str) -> list[str]:
    """Check emitted properties against the supported SVA subset.

    Returns a list of problems; empty means the text lints clean.
    """
    problems: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("//"):
            continue
        m = _SVA_RE.match(stripped)
        if not m:
            problems.append(f"line {lineno}: not a cover property in the subset")
            continue
        try:
            tokens = _split_sva_seq(m.group("seq"))
        except ValueError as exc:
            problems.append(f"line {lineno}: {exc}")
            continue
        expect_bool = True
        for token in tokens:
            is_delay = token.startswith("##")
            if expect_bool and is_delay:
                problems.append(f"line {lineno}: delay {token} where a boolean is required")
                break
            if not expect_bool and not is_delay:
                problems.append(f"line {lineno}: adjacent booleans without a delay")
                break
            if not is_delay:
                try:
                    parse_expression(token)
                except Exception as exc:
                    problems.append(f"line {lineno}: unparseable boolean {token!r}: {exc}")
                    break
            expect_bool = is_delay
        else:
            if expect_bool and tokens:
                problems.append(f"line {lineno}: sequence ends on a delay")
    return problems


def parse_sva(text: str) -> list[tuple[str, tuple[ConditionStep, ...]]]:
    """Read emitted properties back into condition steps (reference route
    for the emission/evaluation agreement check)."""
    out = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("//"):
            continue
        m = _SVA_RE.match(stripped)
        if not m:
            raise ValueError(f"not a cover property in the subset: {stripped!r}")
        steps: list[ConditionStep] = []
        for token in _split_sva_seq(m.group("seq")):
            if token == "##1":
                steps.append(ConditionStep(StepKind.ONE_CYCLE))
            elif token == "##[0:$]":
                steps.append(ConditionStep(StepKind.EVENTUALLY))
            elif token.startswith("##"):
                for _ in range(int(token[2:])):
                    steps.append(ConditionStep(StepKind.ONE_CYCLE))
            else:
                expr = token[1:-1] if token.startswith("(") else token
                steps.append(ConditionStep(StepKind.BRANCH, expr=expr))
        out.append((m.group("name"), tuple(steps)))
    return out


# ---------------------------------------------------------------------------
# Matching against traces
# ---------------------------------------------------------------------------

# Compiled boolean evaluators keyed by (signal layout, expression); the
# compiled function takes the per-signal arrays explicitly so one compile
# serves every trace with the same layout.
_EXPR_CACHE: dict[tuple[tuple[tuple[str, int], ...], str], object] = {}


def compile_trace_expr(expr_text: str, layout: tuple[tuple[str, int], ...]):
    key = (layout, expr_text)
    fn = _EXPR_CACHE.get(key)
    if fn is not None:
        return fn
    from .hdl_ast import expr_signals
    from .simulator import _ExprCompiler

    try:
        tree: Expr = parse_expression(expr_text)
    except Exception as exc:
        raise ExpressionEvalError(expr_text, 0, f"parse failure: {exc}")
    scope = {
        name: (f"sv[{i}][t]", width) for i, (name, width) in enumerate(layout)
    }
    for name in expr_signals(tree):
        if name not in scope:
            raise ExpressionEvalError(expr_text, 0, f"unknown signal {name!r}")
    src, _ = _ExprCompiler(scope).compile(tree)
    namespace: dict = {}
    exec(f"def fn(sv, t):\n    return {src}", namespace)  # noqa: S102
    fn = namespace["fn"]
    _EXPR_CACHE[key] = fn
    return fn


class _TraceEval:
    """Bind one instance trace to the compiled-expression cache."""

    def __init__(self, bundle: TraceBundle, instance_path: str):
        trace = bundle.trace(instance_path)
        names = bundle.signal_names(instance_path)
        widths = bundle.signal_widths(instance_path)
        self.layout = tuple(zip(names, widths))
        self.sv = [trace.signal_values[name] for name in names]
        self.cycles = trace.cycles
        self._ever: dict[str, bool] = {}

    def evaluate(self, expr_text: str, cycle: int) -> int:
        fn = compile_trace_expr(expr_text, self.layout)
        try:
            return fn(self.sv, cycle)  # type: ignore[operator]
        except IndexError:
            raise ExpressionEvalError(expr_text, cycle, "cycle out of range")

    def ever_true(self, expr_text: str) -> bool:
        """Whether the boolean holds at any cycle; cached per trace.

        A Branch step whose expression is never true cannot be aligned, so
        this is a sound (and cheap) pre-filter for whole paths.
        """
        hit = self._ever.get(expr_text)
        if hit is None:
            fn = compile_trace_expr(expr_text, self.layout)
            sv = self.sv
            hit = any(fn(sv, t) for t in range(self.cycles))
            self._ever[expr_text] = hit
        return hit


def match_steps(
    steps: tuple[ConditionStep, ...], evaluator: _TraceEval
) -> bool:
    """True when some start cycle admits an alignment of all steps."""
    cycles = evaluator.cycles
    if not steps:
        return cycles > 0
    memo: dict[tuple[int, int], bool] = {}

    def match(idx: int, t: int) -> bool:
        # Every step, including a trailing OneCycle's landing cycle, must be
        # witnessed by a recorded cycle.
        if t >= cycles:
            return False
        if idx == len(steps):
            return True
        key = (idx, t)
        hit = memo.get(key)
        if hit is not None:
            return hit
        step = steps[idx]
        if step.kind is StepKind.BRANCH:
            ok = bool(evaluator.evaluate(step.expr, t)) and match(idx + 1, t)
        elif step.kind is StepKind.ONE_CYCLE:
            ok = match(idx + 1, t + 1)
        else:  # EVENTUALLY: earliest first, backtrack forward on failure
            ok = any(match(idx + 1, u) for u in range(t, cycles))
        memo[key] = ok
        return ok

    return any(match(0, t0) for t0 in range(cycles))


@dataclass
class ModuleCoverage:
    module: str
    total_paths: int
    covered: set[str] = field(default_factory=set)
    truncated: bool = False

    @property
    def covered_paths(self) -> int:
        return len(self.covered)


@dataclass
class CoverageReport:
    per_module: dict[str, ModuleCoverage] = field(default_factory=dict)

    def add(self, fragment: ModuleCoverage) -> None:
        existing = self.per_module.get(fragment.module)
        if existing is None:
            self.per_module[fragment.module] = ModuleCoverage(
                fragment.module,
                fragment.total_paths,
                set(fragment.covered),
                fragment.truncated,
            )
        else:
            existing.covered |= fragment.covered
            existing.truncated = existing.truncated or fragment.truncated
            existing.total_paths = max(existing.total_paths, fragment.total_paths)

    @property
    def overall_percent(self) -> float:
        total = sum(m.total_paths for m in self.per_module.values())
        covered = sum(m.covered_paths for m in self.per_module.values())
        return 100.0 * covered / total if total else 0.0


def match_coverage(
    bundle: TraceBundle,
    conditions: list[PathCondition],
    g: Meg,
    instance_path: str | None = None,
    *,
    truncated: bool = False,
    skip_ids: set[str] | None = None,
) -> ModuleCoverage:
    """Evaluate which paths this run covered on instances of g's module.

    `skip_ids` lets a caller omit paths it already knows are covered; they
    are reported as covered without re-evaluation.
    """
    if instance_path is not None:
        targets = [instance_path]
    else:
        wanted = {n.id for n in g.nodes.values() if n.kind is not NodeKind.INSTANCE}
        targets = [
            path for path in bundle.instances()
            if set(bundle.signal_names(path)) == wanted
        ]
    fragment = ModuleCoverage(g.module_name, len(conditions), truncated=truncated)
    evaluators = [_TraceEval(bundle, path) for path in targets]
    for pc in conditions:
        if skip_ids and pc.path_id in skip_ids:
            fragment.covered.add(pc.path_id)
            continue
        branch_exprs = [s.expr for s in pc.steps if s.kind is StepKind.BRANCH]
        for ev in evaluators:
            if not all(ev.ever_true(e) for e in branch_exprs):
                continue
            if match_steps(pc.steps, ev):
                fragment.covered.add(pc.path_id)
                break
    return fragment


def replay_sva(
    sva_text: str, bundle: TraceBundle, instance_path: str
) -> dict[str, bool]:
    """Evaluate emitted property text against a trace: the reference route.

    Returns property-name -> covered verdict.
    """
    evaluator = _TraceEval(bundle, instance_path)
    return {
        name: match_steps(steps, evaluator)
        for name, steps in parse_sva(sva_text)
    }
