"""Cycle-accurate two-state simulator over the flattened instance tree.

Each instance's combinational items and clocked blocks are compiled once
into Python functions over a flat value vector (signals get contiguous
global indices per instance), so repeated runs of the same design pay only
per-cycle costs. Per cycle the engine: commits the clock edge (non-blocking
writes buffered and applied atomically), drives stimulus inputs, settles
combinational logic to a fixpoint, and records a snapshot row.

Timeline convention: rst is held high for `reset_cycles` cycles, dropped for
one settle cycle, and the first stimulus step lands on the next cycle; that
cycle is the bundle's start_cycle and the origin all execution times are
measured from. The run ends once the stimulus is exhausted and no signal
has toggled for `quiescence_window` cycles, or at max_cycles (flagged).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .design import DesignHierarchy, Instance
from .errors import CombinationalLoop, UnknownInstance
from .hdl_ast import (
    AlwaysBlock,
    AlwaysTrigger,
    Assign,
    AssignStyle,
    Binary,
    BitSelect,
    Case,
    ContinuousAssign,
    Expr,
    If,
    ModuleAst,
    Num,
    PartSelect,
    Ref,
    SignalKind,
    Ternary,
    Unary,
    walk_stmts,
)
from .parser import CLOCK_NAME, RESET_NAME
from .stimulus import Stimulus, validate_stimulus

SETTLE_LIMIT = 1000
DEFAULT_QUIESCENCE = 8
DEFAULT_RESET_CYCLES = 2
DEFAULT_MAX_CYCLES = 10_000


@dataclass(frozen=True)
class InitPolicy:
    """Register initialization: all-zero, or seeded pseudo-random."""

    kind: str = "zero"
    seed: int = 0

    @staticmethod
    def zero() -> "InitPolicy":
        return InitPolicy("zero", 0)

    @staticmethod
    def random(seed: int) -> "InitPolicy":
        return InitPolicy("random", seed)


# ---------------------------------------------------------------------------
# Expression compilation
# ---------------------------------------------------------------------------

def _mask(width: int) -> int:
    return (1 << width) - 1


class _ExprCompiler:
    """Compile an expression to a Python source fragment plus its width.

    `scope` maps a signal name to (python-access-string, width). Values are
    nonnegative ints already confined to their widths, so only operators
    that can overflow re-mask.
    """

    def __init__(self, scope: dict[str, tuple[str, int]]):
        self.scope = scope

    def compile(self, e: Expr) -> tuple[str, int]:
        if isinstance(e, Num):
            return str(e.value), e.width
        if isinstance(e, Ref):
            return self.scope[e.name]
        if isinstance(e, BitSelect):
            base, _ = self.scope[e.base]
            idx, _ = self.compile(e.index)
            return f"(({base} >> {idx}) & 1)", 1
        if isinstance(e, PartSelect):
            base, _ = self.scope[e.base]
            width = e.msb - e.lsb + 1
            return f"(({base} >> {e.lsb}) & {_mask(width)})", width
        if isinstance(e, Unary):
            a, w = self.compile(e.operand)
            if e.op == "~":
                return f"({_mask(w)} ^ {a})", w
            if e.op == "!":
                return f"(0 if {a} else 1)", 1
            if e.op == "-":
                return f"((-{a}) & {_mask(w)})", w
            raise AssertionError(e.op)
        if isinstance(e, Binary):
            a, wa = self.compile(e.lhs)
            b, wb = self.compile(e.rhs)
            op = e.op
            if op in ("==", "!=", "<", "<=", ">", ">="):
                return f"(1 if {a} {op} {b} else 0)", 1
            if op == "&&":
                return f"(1 if {a} and {b} else 0)", 1
            if op == "||":
                return f"(1 if {a} or {b} else 0)", 1
            if op in ("+", "-"):
                w = max(wa, wb)
                return f"(({a} {op} {b}) & {_mask(w)})", w
            if op in ("&", "|", "^"):
                return f"({a} {op} {b})", max(wa, wb)
            if op == "<<":
                return f"(({a} << {b}) & {_mask(wa)})", wa
            if op == ">>":
                return f"({a} >> {b})", wa
            raise AssertionError(op)
        if isinstance(e, Ternary):
            c, _ = self.compile(e.cond)
            a, wa = self.compile(e.then)
            b, wb = self.compile(e.other)
            return f"({a} if {c} else {b})", max(wa, wb)
        raise TypeError(e)


# ---------------------------------------------------------------------------
# Design compilation
# ---------------------------------------------------------------------------

@dataclass
class InstanceLayout:
    path: str
    module: ModuleAst
    lo: int  # first global index
    hi: int  # one past last
    names: list[str]
    widths: list[int]
    index: dict[str, int]  # signal name -> global index


@dataclass
class CompiledDesign:
    hierarchy: DesignHierarchy
    layouts: dict[str, InstanceLayout]
    size: int
    comb_fns: list = field(default_factory=list)
    seq_fns: list = field(default_factory=list)
    # (instance path, dest names) per comb fn, for loop diagnostics
    comb_info: list[tuple[str, list[str]]] = field(default_factory=list)
    reg_indices: list[tuple[str, str, int, int]] = field(default_factory=list)
    clk_indices: list[int] = field(default_factory=list)
    top_inputs: dict[str, tuple[int, int]] = field(default_factory=dict)  # name -> (idx, width)
    rst_index: int | None = None


def compile_design(h: DesignHierarchy) -> CompiledDesign:
    cached = getattr(h, "_compiled", None)
    if cached is not None:
        return cached

    layouts: dict[str, InstanceLayout] = {}
    next_index = 0
    for inst in h.instances:
        m = h.modules[inst.module_name]
        decls = m.all_signals()
        names = [d.name for d in decls]
        widths = [d.width for d in decls]
        index = {name: next_index + i for i, name in enumerate(names)}
        layouts[inst.path] = InstanceLayout(
            inst.path, m, next_index, next_index + len(names), names, widths, index
        )
        next_index += len(names)

    design = CompiledDesign(hierarchy=h, layouts=layouts, size=next_index)

    top_layout = layouts[h.top]
    for port in h.modules[h.top].ports:
        if port.kind is SignalKind.INPUT:
            design.top_inputs[port.name] = (top_layout.index[port.name], port.width)
    design.rst_index = top_layout.index.get(RESET_NAME)

    for inst in h.instances:
        layout = layouts[inst.path]
        if CLOCK_NAME in layout.index:
            design.clk_indices.append(layout.index[CLOCK_NAME])
        for decl in layout.module.all_signals():
            if decl.is_reg:
                design.reg_indices.append(
                    (inst.path, decl.name, layout.index[decl.name], decl.width)
                )
        _compile_instance(design, layout)

    for inst in h.instances:
        if inst.decl is not None:
            _compile_connections(design, inst)

    h._compiled = design
    return design


def _scope_for(layout: InstanceLayout) -> dict[str, tuple[str, int]]:
    return {
        name: (f"v[{layout.index[name]}]", width)
        for name, width in zip(layout.names, layout.widths)
    }


_uid = 0


def _fresh(prefix: str) -> str:
    global _uid
    _uid += 1
    return f"{prefix}{_uid}"


def _compile_instance(design: CompiledDesign, layout: InstanceLayout) -> None:
    m = layout.module
    scope = _scope_for(layout)
    ec = _ExprCompiler(scope)

    def masked(expr: Expr, dest: str) -> str:
        src, width = ec.compile(expr)
        dest_width = layout.widths[layout.names.index(dest)]
        if width > dest_width:
            return f"({src}) & {_mask(dest_width)}"
        return src

    for item in m.items:
        if isinstance(item, ContinuousAssign):
            idx = layout.index[item.dest]
            body = [
                "def fn(v):",
                f"    t = {masked(item.expr, item.dest)}",
                f"    if v[{idx}] != t:",
                f"        v[{idx}] = t",
                "        return 1",
                "    return 0",
            ]
            design.comb_fns.append(_exec_fn(body))
            design.comb_info.append((layout.path, [item.dest]))
        elif isinstance(item, AlwaysBlock):
            if item.trigger is AlwaysTrigger.COMBINATIONAL:
                # The block executes to completion before anything observes
                # its writes: buffer them in locals and diff only the final
                # values, otherwise transient rewrites within one pass would
                # read as perpetual change and fail settling.
                dests = sorted(
                    {s.dest for s in walk_stmts(item.body) if isinstance(s, Assign)}
                )
                local_scope = dict(scope)
                for name in dests:
                    local_scope[name] = (f"b_{layout.index[name]}", scope[name][1])
                ec_comb = _ExprCompiler(local_scope)
                lines = ["def fn(v):"]
                for name in dests:
                    idx = layout.index[name]
                    lines.append(f"    b_{idx} = v[{idx}]")
                _emit_stmts(lines, item.body, 1, ec_comb, layout)
                lines.append("    ch = 0")
                for name in dests:
                    idx = layout.index[name]
                    lines.append(f"    if v[{idx}] != b_{idx}:")
                    lines.append(f"        v[{idx}] = b_{idx}")
                    lines.append("        ch = 1")
                lines.append("    return ch")
                design.comb_fns.append(_exec_fn(lines))
                design.comb_info.append((layout.path, dests))
            else:
                blocking = sorted(
                    {
                        s.dest
                        for s in walk_stmts(item.body)
                        if isinstance(s, Assign) and s.style is AssignStyle.BLOCKING
                    }
                )
                # Blocking targets live in locals during the block so later
                # reads observe the in-block update order.
                local_scope = dict(scope)
                for name in blocking:
                    local_scope[name] = (f"b_{layout.index[name]}", scope[name][1])
                ec_seq = _ExprCompiler(local_scope)
                lines = ["def fn(v, nb):"]
                for name in blocking:
                    idx = layout.index[name]
                    lines.append(f"    b_{idx} = v[{idx}]")
                _emit_stmts(lines, item.body, 1, ec_seq, layout)
                for name in blocking:
                    idx = layout.index[name]
                    lines.append(f"    v[{idx}] = b_{idx}")
                design.seq_fns.append(_exec_fn(lines))


def _emit_stmts(lines, stmts, depth, ec, layout: InstanceLayout) -> None:
    pad = "    " * depth

    def masked_src(expr: Expr, dest: str) -> str:
        src, width = ec.compile(expr)
        dest_width = layout.widths[layout.names.index(dest)]
        if width > dest_width:
            return f"({src}) & {_mask(dest_width)}"
        return src

    for stmt in stmts:
        if isinstance(stmt, Assign):
            idx = layout.index[stmt.dest]
            value = masked_src(stmt.expr, stmt.dest)
            if stmt.style is AssignStyle.NON_BLOCKING:
                lines.append(f"{pad}nb[{idx}] = {value}")
            else:
                target, _ = ec.scope[stmt.dest]
                lines.append(f"{pad}{target} = {value}")
        elif isinstance(stmt, If):
            cond, _ = ec.compile(stmt.cond)
            lines.append(f"{pad}if {cond}:")
            _emit_stmts(lines, stmt.then, depth + 1, ec, layout)
            if not stmt.then:
                lines.append(f"{pad}    pass")
            if stmt.other:
                lines.append(f"{pad}else:")
                _emit_stmts(lines, stmt.other, depth + 1, ec, layout)
        elif isinstance(stmt, Case):
            subject, _ = ec.compile(stmt.subject)
            tmp = _fresh("s")
            lines.append(f"{pad}{tmp} = {subject}")
            first = True
            for arm in stmt.arms:
                kw = "if" if first else "elif"
                first = False
                lines.append(f"{pad}{kw} {tmp} == {arm.match.value}:")
                _emit_stmts(lines, arm.body, depth + 1, ec, layout)
                if not arm.body:
                    lines.append(f"{pad}    pass")
            if stmt.default:
                lines.append(f"{pad}else:" if not first else f"{pad}if True:")
                _emit_stmts(lines, stmt.default, depth + 1, ec, layout)
        else:
            raise TypeError(stmt)


def _compile_connections(design: CompiledDesign, inst: Instance) -> None:
    """Port bindings become combinational transfer functions."""
    h = design.hierarchy
    child_layout = design.layouts[inst.path]
    parent_layout = design.layouts[inst.parent]
    child_ports = {p.name: p for p in child_layout.module.ports}
    ec = _ExprCompiler(_scope_for(parent_layout))

    for formal, actual in inst.decl.port_map:
        port = child_ports[formal]
        if formal == CLOCK_NAME:
            continue
        if port.kind is SignalKind.INPUT:
            src, width = ec.compile(actual)
            if width > port.width:
                src = f"({src}) & {_mask(port.width)}"
            dst = child_layout.index[formal]
            dests = [f"{inst.path}.{formal}"]
        else:
            src = f"v[{child_layout.index[formal]}]"
            dest_width = parent_layout.module.signal(actual.name).width
            if port.width > dest_width:
                src = f"({src}) & {_mask(dest_width)}"
            dst = parent_layout.index[actual.name]
            dests = [actual.name]
        body = [
            "def fn(v):",
            f"    t = {src}",
            f"    if v[{dst}] != t:",
            f"        v[{dst}] = t",
            "        return 1",
            "    return 0",
        ]
        design.comb_fns.append(_exec_fn(body))
        design.comb_info.append((inst.parent, dests))


def _exec_fn(lines: list[str]):
    namespace: dict = {}
    exec("\n".join(lines), namespace)  # noqa: S102 - compiling our own codegen
    return namespace["fn"]


# ---------------------------------------------------------------------------
# Traces
# ---------------------------------------------------------------------------

@dataclass
class SimulationTrace:
    instance_path: str
    signal_values: dict[str, list[int]]
    cycles: int


class TraceBundle:
    """Per-instance traces of one run, sampled once per clock cycle.

    Rows are stored design-wide and sliced per instance on demand; all
    per-instance arrays share the same cycle count.
    """

    def __init__(
        self,
        rows: list[list[int]],
        layouts: dict[str, tuple[int, int, list[str], list[int]]],
        start_cycle: int,
        stimulus: Stimulus | None,
        seed_id: str = "run",
        max_cycles_reached: bool = False,
        warnings: tuple[str, ...] = (),
    ):
        self._rows = rows
        self._layouts = layouts
        self._traces: dict[str, SimulationTrace] = {}
        self.start_cycle = start_cycle
        self.stimulus = stimulus
        self.seed_id = seed_id
        self.max_cycles_reached = max_cycles_reached
        self.warnings = warnings

    @property
    def cycles(self) -> int:
        return len(self._rows)

    def instances(self) -> list[str]:
        return list(self._layouts)

    def signal_names(self, path: str) -> list[str]:
        return list(self._require(path)[2])

    def signal_widths(self, path: str) -> list[int]:
        return list(self._require(path)[3])

    def _require(self, path: str) -> tuple[int, int, list[str], list[int]]:
        layout = self._layouts.get(path)
        if layout is None:
            raise UnknownInstance(f"no instance {path!r} in trace bundle")
        return layout

    def trace(self, path: str) -> SimulationTrace:
        cached = self._traces.get(path)
        if cached is not None:
            return cached
        lo, hi, names, _ = self._require(path)
        values = {name: [row[lo + i] for row in self._rows] for i, name in enumerate(names)}
        trace = SimulationTrace(path, values, len(self._rows))
        self._traces[path] = trace
        return trace

    @property
    def per_instance(self) -> dict[str, SimulationTrace]:
        return {path: self.trace(path) for path in self._layouts}

    def toggle_cycles(self, path: str) -> list[int]:
        """Cycles at which any signal of the instance differs from the
        previous cycle."""
        lo, hi, _, _ = self._require(path)
        rows = self._rows
        return [
            c for c in range(1, len(rows)) if rows[c][lo:hi] != rows[c - 1][lo:hi]
        ]

    def last_toggle_at_or_after(self, path: str, start: int) -> int | None:
        lo, hi, _, _ = self._require(path)
        rows = self._rows
        for c in range(len(rows) - 1, max(start, 1) - 1, -1):
            if rows[c][lo:hi] != rows[c - 1][lo:hi]:
                return c
        return None

    def rows_digest(self) -> str:
        """Content hash of the recorded rows; runs with identical behavior
        share a digest, which the fuzzer exploits to skip re-analysis."""
        cached = getattr(self, "_digest", None)
        if cached is None:
            import hashlib

            cached = hashlib.sha1(repr(self._rows).encode()).hexdigest()
            self._digest = cached
        return cached

    def equal_traces(self, other: "TraceBundle") -> bool:
        if self.instances() != other.instances() or self.cycles != other.cycles:
            return False
        if self.start_cycle != other.start_cycle:
            return False
        for path in self.instances():
            a, b = self._require(path), other._require(path)
            if a[2] != b[2]:
                return False
        return self._rows == other._rows

    @staticmethod
    def from_signal_values(
        per_instance: dict[str, dict[str, list[int]]],
        widths: dict[str, dict[str, int]],
        start_cycle: int,
        seed_id: str = "vcd",
        warnings: tuple[str, ...] = (),
    ) -> "TraceBundle":
        """Assemble a bundle from per-signal arrays (VCD ingestion path)."""
        layouts: dict[str, tuple[int, int, list[str], list[int]]] = {}
        order: list[tuple[str, str]] = []
        lo = 0
        cycles = 0
        for path, signals in per_instance.items():
            names = list(signals)
            wlist = [widths.get(path, {}).get(n, 1) for n in names]
            layouts[path] = (lo, lo + len(names), names, wlist)
            for name in names:
                order.append((path, name))
                cycles = max(cycles, len(signals[name]))
            lo += len(names)
        rows = []
        for c in range(cycles):
            row = []
            for path, name in order:
                arr = per_instance[path][name]
                row.append(arr[c] if c < len(arr) else 0)
            rows.append(row)
        return TraceBundle(
            rows, layouts, start_cycle, None, seed_id=seed_id, warnings=warnings
        )


# ---------------------------------------------------------------------------
# Simulation driver
# ---------------------------------------------------------------------------

def simulate(
    h: DesignHierarchy | CompiledDesign,
    stim: Stimulus,
    max_cycles: int = DEFAULT_MAX_CYCLES,
    init: InitPolicy = InitPolicy(),
    *,
    quiescence_window: int = DEFAULT_QUIESCENCE,
    reset_cycles: int = DEFAULT_RESET_CYCLES,
    seed_id: str = "run",
) -> TraceBundle:
    design = h if isinstance(h, CompiledDesign) else compile_design(h)
    hierarchy = design.hierarchy
    validate_stimulus(stim, hierarchy)

    v = [0] * design.size
    for idx in design.clk_indices:
        v[idx] = 1

    if init.kind == "random":
        rng = random.Random(init.seed)
        for _, _, idx, width in design.reg_indices:
            v[idx] = rng.randrange(1 << width)
    elif init.kind != "zero":
        raise ValueError(f"unknown init policy {init.kind!r}")

    # Input schedule: cycle -> list of (index, value).
    start_cycle = reset_cycles + 1
    schedule: dict[int, list[tuple[int, int]]] = {}
    if design.rst_index is not None:
        v[design.rst_index] = 1
        schedule.setdefault(reset_cycles, []).append((design.rst_index, 0))
    cycle_cursor = start_cycle
    for step in stim.steps:
        assigns = schedule.setdefault(cycle_cursor, [])
        for name, value in sorted(step.assignments().items()):
            assigns.append((design.top_inputs[name][0], value))
        cycle_cursor += step.hold
    stimulus_end = cycle_cursor

    comb_fns = design.comb_fns
    seq_fns = design.seq_fns
    rows: list[list[int]] = []
    nb: dict[int, int] = {}
    last_activity = 0
    max_reached = False

    cycle = 0
    while True:
        if cycle > 0:
            nb.clear()
            for fn in seq_fns:
                fn(v, nb)
            for idx, value in nb.items():
                v[idx] = value
        for idx, value in schedule.get(cycle, ()):
            v[idx] = value
        _settle(design, v)
        rows.append(v.copy())
        if cycle > 0 and rows[cycle] != rows[cycle - 1]:
            last_activity = cycle
        cycle += 1
        if cycle >= max_cycles:
            max_reached = True
            break
        if cycle >= stimulus_end and cycle - max(last_activity, stimulus_end - 1) > quiescence_window:
            break

    layouts = {
        path: (lay.lo, lay.hi, list(lay.names), list(lay.widths))
        for path, lay in design.layouts.items()
    }
    return TraceBundle(
        rows,
        layouts,
        start_cycle,
        stim,
        seed_id=seed_id,
        max_cycles_reached=max_reached,
    )


def _settle(design: CompiledDesign, v: list[int]) -> None:
    comb_fns = design.comb_fns
    for _ in range(SETTLE_LIMIT):
        changed = 0
        for fn in comb_fns:
            changed |= fn(v)
        if not changed:
            return
    # One more pass, tracking who still flips, purely for the error report.
    unstable: list[str] = []
    instance = design.hierarchy.top
    for i, fn in enumerate(comb_fns):
        if fn(v):
            instance, dests = design.comb_info[i]
            unstable.extend(dests)
    raise CombinationalLoop(instance, sorted(set(unstable)))
