from __future__ import annotations

import logging

import pytest

import leakscope as ls
from leakscope.coverage import StepKind, _TraceEval, match_steps, parse_sva
from leakscope.stimulus import Stimulus, StimulusStep
from oracles import oracle_match


def _stim(tag, data, hold=2):
    return Stimulus(steps=(StimulusStep(tag=tag, data=data, hold=hold),))


@pytest.fixture(scope="module")
def cacheset_paths(cacheset):
    g = ls.build_meg(cacheset.hierarchy.modules["cacheset"])
    hit = ls.find_mep(g, ("addr", "tag_addr", "way"))
    miss = ls.find_mep(
        g, ("addr", "tag_addr", "hit", "fetch", "mem_call", "complete", "way")
    )
    return g, hit, miss


def test_hit_path_condition_shape(cacheset_paths):
    g, hit, _ = cacheset_paths
    pc = ls.path_condition(hit, g)
    kinds = [s.kind for s in pc.steps]
    assert kinds == [StepKind.EVENTUALLY, StepKind.BRANCH, StepKind.ONE_CYCLE]
    assert "tag_addr == tag" in pc.steps[1].expr


def test_single_unconditional_comb_edge_is_eventually_only():
    h = ls.parse_design(
        [("t.hdl", "module t(input clk, input x, output y);\n  assign y = x;\nendmodule")]
    )
    g = ls.build_meg(h.modules["t"])
    pc = ls.path_condition(ls.find_mep(g, ("x", "y")), g)
    assert [s.kind for s in pc.steps] == [StepKind.EVENTUALLY]


def test_miss_path_has_instance_eventually(cacheset_paths):
    g, _, miss = cacheset_paths
    pc = ls.path_condition(miss, g)
    # the hop out of the memory instance contributes an Eventually
    kinds = [s.kind for s in pc.steps]
    assert kinds.count(StepKind.EVENTUALLY) >= 2  # input hop + instance hop
    assert kinds.count(StepKind.ONE_CYCLE) >= 3  # hit, fetch, way are clocked


def test_path_not_in_graph(cacheset_paths, serdiv):
    g, hit, _ = cacheset_paths
    other = ls.build_meg(serdiv.hierarchy.modules["divider"])
    with pytest.raises(ls.PathNotInGraph):
        ls.path_condition(hit, other)


def test_emit_sva_hit_path(cacheset_paths):
    g, hit, _ = cacheset_paths
    text = ls.emit_sva(ls.path_condition(hit, g))
    assert text.count("##1") == 1
    assert text.count("##[0:$]") == 1
    assert "cover property (@(posedge clk)" in text
    assert ls.sva_lint(text) == []


def test_emit_sva_empty_condition_warns(caplog):
    pc = ls.PathCondition(path_id="deadbeef", module="m", node_ids=("a", "b"), steps=())
    with caplog.at_level(logging.WARNING):
        text = ls.emit_sva(pc)
    assert "always-coverable" in caplog.text
    assert "1'b1" in text
    assert ls.sva_lint(text) == []


def test_all_bundled_properties_lint(cacheset, serdiv, ct_alu, cacheset_multiway):
    for dut in (cacheset, serdiv, ct_alu, cacheset_multiway):
        for name, m in dut.hierarchy.modules.items():
            g = ls.build_meg(m)
            paths = ls.enumerate_meps(g).paths
            conditions = [ls.path_condition(p, g) for p in paths]
            text = ls.emit_sva_file(conditions, name)
            assert ls.sva_lint(text) == [], name


def test_sva_lint_rejects_garbage():
    assert ls.sva_lint("cover property bad;") != []
    assert ls.sva_lint("x: cover property (@(posedge clk) ##1 ##1);") != []


def test_match_hit_covers_hit_not_replacement(cacheset_paths, cacheset_runs):
    g, hit, miss = cacheset_paths
    pcs = [ls.path_condition(hit, g), ls.path_condition(miss, g)]
    frag = ls.match_coverage(cacheset_runs["hit"], pcs, g, "cacheset")
    assert frag.covered == {pcs[0].path_id}
    frag_miss = ls.match_coverage(cacheset_runs["miss_free"], pcs, g, "cacheset")
    assert pcs[1].path_id in frag_miss.covered


def test_match_empty_trace_covers_nothing(cacheset_paths):
    from leakscope.simulator import TraceBundle

    g, hit, _ = cacheset_paths
    names = [n.id for n in g.nodes.values() if n.kind.value != "instance"]
    empty = TraceBundle.from_signal_values(
        {"cacheset": {n: [] for n in names}},
        {"cacheset": {n: 8 for n in names}},
        0,
    )
    pc = ls.path_condition(hit, g)
    frag = ls.match_coverage(empty, [pc], g, "cacheset")
    assert frag.covered == set()


def test_match_against_bruteforce_oracle_serdiv(serdiv):
    h = serdiv.hierarchy
    g = ls.build_megs(h.modules)["divider"]
    conditions = [ls.path_condition(p, g) for p in ls.enumerate_meps(g).paths]
    design = ls.compile_design(h)
    for dividend in range(0, 8):
        for divisor in range(0, 4):
            bundle = ls.simulate(
                design, _stim("start=1", {"dividend": dividend, "divisor": divisor})
            )
            ev = _TraceEval(bundle, "serdiv.div")
            for pc in conditions:
                got = match_steps(pc.steps, ev)
                want = oracle_match(pc.steps, ev.evaluate, ev.cycles)
                assert got == want, (pc.node_ids, dividend, divisor)


def test_monotonicity_adding_runs(cacheset, cacheset_runs):
    g = ls.build_meg(cacheset.hierarchy.modules["cacheset"])
    conditions = [ls.path_condition(p, g) for p in ls.enumerate_meps(g).paths]
    report = ls.CoverageReport()
    last = 0
    for bundle in cacheset_runs.values():
        report.add(ls.match_coverage(bundle, conditions, g, "cacheset"))
        now = report.per_module["cacheset"].covered_paths
        assert now >= last
        last = now
    assert 0 < last <= len(conditions)


def test_emission_evaluation_agreement(cacheset, cacheset_runs, serdiv, serdiv_runs):
    # Internal verdicts must equal replaying the emitted text through the
    # reference property evaluator.
    cases = [
        (cacheset, cacheset_runs, "cacheset", "cacheset"),
        (serdiv, serdiv_runs, "divider", "serdiv.div"),
    ]
    for dut, runs, module, instance in cases:
        g = ls.build_meg(dut.hierarchy.modules[module])
        conditions = [ls.path_condition(p, g) for p in ls.enumerate_meps(g).paths]
        text = ls.emit_sva_file(conditions, module)
        for bundle in runs.values():
            internal = ls.match_coverage(bundle, conditions, g, instance)
            replayed = ls.replay_sva(text, bundle, instance)
            for pc in conditions:
                name = f"cp_{module}_{pc.path_id}"
                assert replayed[name] == (pc.path_id in internal.covered)


def test_parse_sva_roundtrip(cacheset_paths):
    g, hit, miss = cacheset_paths
    pcs = [ls.path_condition(hit, g), ls.path_condition(miss, g)]
    text = ls.emit_sva_file(pcs, "cacheset")
    parsed = parse_sva(text)
    assert [name for name, _ in parsed] == [f"cp_cacheset_{pc.path_id}" for pc in pcs]


def test_expression_eval_error():
    from leakscope.simulator import TraceBundle

    bundle = TraceBundle.from_signal_values(
        {"u": {"a": [1, 2]}}, {"u": {"a": 8}}, 0
    )
    ev = _TraceEval(bundle, "u")
    with pytest.raises(ls.ExpressionEvalError):
        ev.evaluate("missing == 1", 0)


def test_overall_percent():
    report = ls.CoverageReport()
    report.add(ls.ModuleCoverage("a", 4, {"p1", "p2"}, False))
    report.add(ls.ModuleCoverage("b", 6, {"q1"}, False))
    assert report.overall_percent == pytest.approx(100.0 * 3 / 10)


def test_covered_branch_lines_agree_with_branch_activity(serdiv, serdiv_runs):
    # Every Branch step of a covered path must name a condition that the
    # branch-activity probes also saw true in the covering run.
    from leakscope.fuzz import CoverageProbes

    g = ls.build_megs(serdiv.hierarchy.modules)["divider"]
    conditions = [ls.path_condition(p, g) for p in ls.enumerate_meps(g).paths]
    probes = CoverageProbes("divider", g, "both")
    for bundle in serdiv_runs.values():
        covered = ls.match_coverage(bundle, conditions, g, "serdiv.div").covered
        ev = _TraceEval(bundle, "serdiv.div")
        for pc in conditions:
            if pc.path_id not in covered:
                continue
            for step in pc.steps:
                if step.kind is StepKind.BRANCH:
                    assert any(
                        ev.evaluate(step.expr, t) for t in range(ev.cycles)
                    ), step.expr
