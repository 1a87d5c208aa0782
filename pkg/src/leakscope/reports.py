"""Campaign rendering: JSON artifacts, CSV coverage, DOT graphs, text.

Rendering is a pure function of the CampaignResult: wall-clock fields are
kept out of every artifact so repeated campaigns with equal configs produce
byte-identical files. Culprit source lines are quoted in the text report by
re-reading the original files; if a file moved or changed (hash mismatch),
the report degrades to line numbers only.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .diagnose import Diagnosis
from .errors import LeakscopeError
from .fuzz import CampaignResult
from .leakage import LeakageFinding, TimingDistribution
from .meg import export_dot
from .stimulus import stimulus_to_json

SCHEMA_VERSION = 1


class Format(Enum):
    TEXT = "text"
    JSON = "json"
    CSV = "csv"
    DOT = "dot"


@dataclass
class TimingRow:
    vulnerability: str
    instance: str
    lines: tuple[int, ...]
    phase1_signals: tuple[str, ...]
    phase2_signals: tuple[str, ...]


@dataclass
class CampaignSummary:
    design_name: str
    seeds_count: int
    mutants_count: int
    findings_count: int
    diagnoses_count: int
    coverage_rows: tuple[tuple[str, int, int, bool], ...]  # module, total, covered, truncated
    timing_rows: tuple[TimingRow, ...]

    @property
    def overall_percent(self) -> float:
        total = sum(row[1] for row in self.coverage_rows)
        covered = sum(row[2] for row in self.coverage_rows)
        return 100.0 * covered / total if total else 0.0


def summarize(result: CampaignResult) -> CampaignSummary:
    coverage_rows = tuple(
        (name, m.total_paths, m.covered_paths, m.truncated)
        for name, m in sorted(result.coverage.per_module.items())
    )
    timing_rows = tuple(
        TimingRow(
            vulnerability=f"{run_a} vs {run_b}",
            instance=instance,
            lines=tuple(sorted(diag.culprit_lines)),
            phase1_signals=tuple(sorted(diag.instigators)),
            phase2_signals=tuple(sorted(diag.culprit_signals)),
        )
        for instance, run_a, run_b, diag in result.diagnoses
    )
    return CampaignSummary(
        design_name=result.design_name,
        seeds_count=len(result.seeds),
        mutants_count=result.mutant_sims,
        findings_count=len(result.findings),
        diagnoses_count=len(result.diagnoses),
        coverage_rows=coverage_rows,
        timing_rows=timing_rows,
    )


def summary_to_json(summary: CampaignSummary) -> str:
    doc = {
        "schemaVersion": SCHEMA_VERSION,
        "designName": summary.design_name,
        "seedsCount": summary.seeds_count,
        "mutantsCount": summary.mutants_count,
        "findingsCount": summary.findings_count,
        "diagnosesCount": summary.diagnoses_count,
        "coverageRows": [
            {"module": m, "totalPaths": t, "coveredPaths": c, "truncated": tr}
            for m, t, c, tr in summary.coverage_rows
        ],
        "timingRows": [
            {
                "vulnerability": row.vulnerability,
                "instance": row.instance,
                "lines": list(row.lines),
                "phase1Signals": list(row.phase1_signals),
                "phase2Signals": list(row.phase2_signals),
            }
            for row in summary.timing_rows
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def summary_from_json(text: str) -> CampaignSummary:
    doc = json.loads(text)
    return CampaignSummary(
        design_name=doc["designName"],
        seeds_count=doc["seedsCount"],
        mutants_count=doc["mutantsCount"],
        findings_count=doc["findingsCount"],
        diagnoses_count=doc["diagnosesCount"],
        coverage_rows=tuple(
            (r["module"], r["totalPaths"], r["coveredPaths"], r["truncated"])
            for r in doc["coverageRows"]
        ),
        timing_rows=tuple(
            TimingRow(
                vulnerability=r["vulnerability"],
                instance=r["instance"],
                lines=tuple(r["lines"]),
                phase1_signals=tuple(r["phase1Signals"]),
                phase2_signals=tuple(r["phase2Signals"]),
            )
            for r in doc["timingRows"]
        ),
    )


# ---------------------------------------------------------------------------
# Artifact serialization
# ---------------------------------------------------------------------------

def finding_to_json(f: LeakageFinding) -> dict:
    return {
        "instance": f.instance_path,
        "level": f.level,
        "runA": f.run_a,
        "runB": f.run_b,
        "timeA": f.time_a,
        "timeB": f.time_b,
        "delta": f.delta,
        "firstLeakyLevel": f.first_leaky_level,
    }


def diagnosis_to_json(instance: str, run_a: str, run_b: str, d: Diagnosis) -> dict:
    return {
        "instance": instance,
        "runA": run_a,
        "runB": run_b,
        "instigators": sorted(d.instigators),
        "divergenceCycle": d.divergence_cycle,
        "culprits": [
            {"signal": signal, "file": loc.file, "line": loc.line}
            for signal, loc in sorted(d.culprits, key=lambda c: (c[0], c[1].file, c[1].line))
        ],
        "frontier": [list(layer) for layer in d.frontier_trace],
    }


def findings_json(result: CampaignResult) -> str:
    doc = {
        "schemaVersion": SCHEMA_VERSION,
        "findings": [finding_to_json(f) for f in result.findings],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def diagnoses_json(result: CampaignResult) -> str:
    doc = {
        "schemaVersion": SCHEMA_VERSION,
        "diagnoses": [
            diagnosis_to_json(inst, ra, rb, d) for inst, ra, rb, d in result.diagnoses
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def coverage_json(result: CampaignResult) -> str:
    doc = {
        "schemaVersion": SCHEMA_VERSION,
        "perModule": {
            name: {
                "totalPaths": m.total_paths,
                "coveredPaths": m.covered_paths,
                "truncated": m.truncated,
            }
            for name, m in sorted(result.coverage.per_module.items())
        },
        "overallPercent": round(result.coverage.overall_percent, 4),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def campaign_json(result: CampaignResult) -> str:
    doc = {
        "schemaVersion": SCHEMA_VERSION,
        "designName": result.design_name,
        "config": {
            "mutantsPerSeed": result.config.mutants_per_seed,
            "rngSeed": result.config.rng_seed,
            "maxRounds": result.config.max_rounds,
            "stallRounds": result.config.stall_rounds,
            "structuralOps": list(result.config.structural_ops),
            "coverageMetric": result.config.coverage_metric,
            "minDelta": result.config.min_delta,
        },
        "rounds": result.rounds,
        "sims": result.sims,
        "mutantSims": result.mutant_sims,
        "stopReason": result.stop_reason,
        "abortedByWallclock": result.aborted_by_wallclock,
        "seeds": [
            {"id": s.id, "newCoverage": sorted(s.new_coverage)} for s in result.seeds
        ],
        "codeItemsCovered": len(result.code_items),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def coverage_report_csv(report) -> str:
    """Per-module CSV rows for any CoverageReport."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["module", "total_paths", "covered_paths", "percent", "truncated"])
    for name, m in sorted(report.per_module.items()):
        pct = 100.0 * m.covered_paths / m.total_paths if m.total_paths else 0.0
        writer.writerow([name, m.total_paths, m.covered_paths, f"{pct:.2f}", int(m.truncated)])
    return buf.getvalue()


def coverage_csv(result: CampaignResult) -> str:
    return coverage_report_csv(result.coverage)


def distributions_csv(dists: list[TimingDistribution]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["instance", "group", "samples", "median", "max_deviation"])
    for dist in dists:
        writer.writerow(
            [
                dist.instance_path,
                dist.group_key,
                len(dist.samples),
                dist.median,
                dist.max_deviation,
            ]
        )
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Source quoting
# ---------------------------------------------------------------------------

class _SourceQuoter:
    def __init__(self, source_refs: tuple[tuple[str, str], ...]):
        self._lines: dict[str, list[str]] = {}
        self._stale: set[str] = set()
        for path, digest in source_refs:
            p = Path(path)
            name = p.name
            try:
                text = p.read_text()
            except OSError:
                self._stale.add(name)
                continue
            if hashlib.sha256(text.encode()).hexdigest() != digest:
                self._stale.add(name)
                continue
            self._lines[name] = text.splitlines()

    def quote(self, file: str, line: int) -> str | None:
        name = Path(file).name
        lines = self._lines.get(name)
        if lines is None or not (1 <= line <= len(lines)):
            return None
        return lines[line - 1].strip()


def text_report(result: CampaignResult) -> str:
    summary = summarize(result)
    quoter = _SourceQuoter(result.source_refs)
    out: list[str] = []
    out.append(f"== campaign: {summary.design_name} ==")
    out.append(
        f"seeds {summary.seeds_count}  mutants {summary.mutants_count}  "
        f"findings {summary.findings_count}  diagnoses {summary.diagnoses_count}  "
        f"stop: {result.stop_reason}"
    )
    out.append("")
    out.append("-- timing findings --")
    if not result.findings:
        out.append("(none)")
    for f in result.findings:
        marker = "*" if f.first_leaky_level else " "
        out.append(
            f"{marker} {f.instance_path} (level {f.level}): "
            f"{f.time_a} vs {f.time_b} cycles (delta {f.delta}) "
            f"[{f.run_a} / {f.run_b}]"
        )
    out.append("")
    out.append("-- diagnoses --")
    if not result.diagnoses:
        out.append("(none)")
    for instance, run_a, run_b, diag in result.diagnoses:
        out.append(f"{instance}: {run_a} vs {run_b}")
        out.append(f"  divergence at cycle {diag.divergence_cycle}")
        out.append(f"  instigators: {', '.join(sorted(diag.instigators))}")
        for signal, loc in sorted(diag.culprits, key=lambda c: (c[1].file, c[1].line, c[0])):
            quoted = quoter.quote(loc.file, loc.line)
            suffix = f"    {quoted}" if quoted is not None else ""
            out.append(f"  culprit {signal} at {loc.file}:{loc.line}{suffix}")
    out.append("")
    out.append("-- timing coverage --")
    for module, total, covered, truncated in summary.coverage_rows:
        pct = 100.0 * covered / total if total else 0.0
        extra = " (truncated)" if truncated else ""
        out.append(f"{module}: {covered}/{total} paths ({pct:.2f}%){extra}")
    out.append(f"overall: {summary.overall_percent:.2f}%")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def render(result: CampaignResult, fmt: Format | str, outdir: str | Path) -> list[Path]:
    """Write the artifacts for one format; returns the files written."""
    if isinstance(fmt, str):
        fmt = Format(fmt)
    outdir = Path(outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        written: list[Path] = []

        def emit(name: str, text: str) -> None:
            path = outdir / name
            path.write_text(text)
            written.append(path)

        if fmt is Format.JSON:
            emit("campaign.json", campaign_json(result) + "\n")
            emit("findings.json", findings_json(result) + "\n")
            emit("diagnoses.json", diagnoses_json(result) + "\n")
            emit("coverage.json", coverage_json(result) + "\n")
            emit("summary.json", summary_to_json(summarize(result)) + "\n")
            seed_dir = outdir / "seeds"
            seed_dir.mkdir(exist_ok=True)
            for seed in result.seeds:
                path = seed_dir / f"{seed.id}.json"
                path.write_text(stimulus_to_json(seed.stimulus) + "\n")
                written.append(path)
        elif fmt is Format.CSV:
            emit("coverage.csv", coverage_csv(result))
        elif fmt is Format.DOT:
            for name, g in sorted(result.megs.items()):
                emit(f"{name}.dot", export_dot(g))
        elif fmt is Format.TEXT:
            emit("summary.txt", text_report(result))
        return written
    except OSError as exc:
        raise LeakscopeError(f"cannot write report: {exc}")
