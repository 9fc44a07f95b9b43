"""Execute a run configuration and emit per-run rows, aggregates and a text report."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .config import ConfigError, RunConfig, build_scenario, emit_config, load_config, parse_config
from .measurement import MeasurementOp
from .predictors import FrameBatch
from .scenarios import PerspectivalReport, Scenario, analyse, bohm_summary, check_runs, run_frames

__all__ = [
    "RunConfig",
    "RunResult",
    "ReplayMismatch",
    "parse_config",
    "emit_config",
    "load_config",
    "execute",
    "write_outputs",
    "replay",
    "RUNS_HEADER",
    "AGGREGATES_HEADER",
]

RUNS_HEADER = ("run_index", "frame_beta", "party", "op_kind", "outcome", "active_at_end")
AGGREGATES_HEADER = ("section", "frame_beta", "statistic", "estimate", "prediction", "n", "tolerance", "status")


class ReplayMismatch(RuntimeError):
    pass


def _num(v: float | None) -> str:
    return "" if v is None else repr(float(v))


@dataclass(frozen=True, eq=False)
class RunResult:
    config: RunConfig
    scenario: Scenario
    report: PerspectivalReport
    batches: tuple[FrameBatch, ...]
    bohm: tuple[dict, ...] | None = None

    @property
    def exit_code(self) -> int:
        return 0 if self.report.per_frame_consistent else 1

    def runs_csv(self) -> str:
        """One row per executed operation per run, runs in index order within each frame."""
        lines = [",".join(RUNS_HEADER)]
        protocol = self.scenario.protocol
        for batch in self.batches:
            beta = repr(batch.frame.beta)
            cols, prefixes = [], []
            for o in batch.ops:
                mid = o.id if isinstance(o.op, MeasurementOp) else o.op.undoes
                kind = "measure" if isinstance(o.op, MeasurementOp) else "reverse"
                active = "true" if kind == "measure" and batch.active_at_end[mid] else "false"
                cols.append(batch.column(mid))
                prefixes.append((f",{beta},{protocol.party_of(o)},{kind},", f",{active}"))
            labels = {1: "1", -1: "-1"}
            outcomes = np.stack(cols, axis=1)
            for r, row in enumerate(outcomes.tolist()):
                idx = str(batch.start + r)
                lines.extend(f"{idx}{pre}{labels[v]}{post}" for (pre, post), v in zip(prefixes, row))
        return "\n".join(lines) + "\n"

    def aggregate_rows(self) -> list[tuple[str, ...]]:
        rep = self.report
        tol = _num(rep.tolerance)
        rows = []
        for f in rep.frames:
            for st in f.stats:
                rows.append(("frame", _num(f.beta), st.name, _num(st.estimate), _num(st.prediction), str(st.n),
                             _num(st.tolerance), "ok" if st.ok else "FAIL"))
        for key, entry in sorted(rep.table.items()):
            for src in entry.get("by_frame", [entry]):
                rows.append(("table", _num(src["beta"]), f"E({key})", _num(src["value"]), "", str(src["n"]), tol, ""))
        if rep.chsh is not None:
            rows.append(("global", "", "CHSH", _num(rep.chsh), "", str(rep.runs), tol, "|S|>2" if abs(rep.chsh) > 2 else "|S|<=2"))
        rows.append(("global", "", "joint_feasible", "", "", str(rep.runs), tol,
                     "feasible" if rep.feasible else "infeasible"))
        if rep.feasible_range is not None:
            lo, hi = rep.feasible_range
            inside = rep.range_target_value is not None and lo - rep.tolerance <= rep.range_target_value <= hi + rep.tolerance
            rows.append(("global", "", f"range_min E({rep.range_target})", _num(lo), "", str(rep.runs), tol, ""))
            rows.append(("global", "", f"range_max E({rep.range_target})", _num(hi), "", str(rep.runs), tol, ""))
            rows.append(("global", "", f"observed E({rep.range_target})", _num(rep.range_target_value), "",
                         str(rep.runs), tol, "inside" if inside else "outside"))
        for b in self.bohm or ():
            for st in b.get("stats", []):
                rows.append(("bohm", _num(b["beta"]), st["name"], _num(st["estimate"]), "", str(st["n"]), "", ""))
        rows.append(("verdict", "", rep.verdict, "", "", str(rep.runs), tol, rep.verdict_line))
        return rows

    def aggregates_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(AGGREGATES_HEADER)
        w.writerows(self.aggregate_rows())
        return buf.getvalue()

    def text_report(self) -> str:
        rep = self.report
        out = [
            f"scenario: {rep.scenario}",
            f"runs per frame: {rep.runs}   seed: {rep.seed}   tolerance 3/sqrt(N): {rep.tolerance:.4f}",
            "",
        ]
        for f in rep.frames:
            out.append(f"frame beta={f.beta:g}  runs {f.first_run}..{f.first_run + f.runs - 1}")
            out.append("  order: " + ", ".join(f.order))
            for st in f.stats:
                out.append(
                    f"  {st.name:<26} estimate {st.estimate:+.4f}  predicted {st.prediction:+.4f}"
                    f"  n={st.n:<7d} {'ok' if st.ok else 'FAIL'}"
                )
            out.append("")
        out.append("correlation table (cross-frame)")
        for key, entry in sorted(rep.table.items()):
            for src in entry.get("by_frame", [entry]):
                out.append(f"  E({key}) = {src['value']:+.4f}  from beta={src['beta']:g}  n={src['n']}")
        for c in rep.conflicts:
            out.append(f"  conflict: {c}")
        if rep.chsh is not None:
            out.append(f"CHSH S = {rep.chsh:+.4f}  (|S| <= 2 for any joint distribution)")
        out.append(f"joint distribution: {'feasible' if rep.feasible else 'infeasible'}")
        if rep.witness is not None:
            atoms = [(i, w) for i, w in enumerate(rep.witness) if w > 1e-12]
            out.append(f"  witness: {len(atoms)} atoms with positive weight")
        if rep.feasible_range is not None:
            lo, hi = rep.feasible_range
            out.append(f"feasible range of E({rep.range_target}) given the other pairs: [{lo:+.4f}, {hi:+.4f}]")
            if rep.range_target_value is not None:
                out.append(f"  observed E({rep.range_target}) = {rep.range_target_value:+.4f}")
        for b in self.bohm or ():
            if "error" in b:
                out.append(f"bohm (preferred beta={b['beta']:g}): {b['error']}")
                continue
            out.append(f"bohm (preferred beta={b['beta']:g}): order " + ", ".join(b["order"]))
            for st in b["stats"]:
                out.append(f"  {st['name']:<26} estimate {st['estimate']:+.4f}  n={st['n']}")
        for note in rep.notes:
            out.append(f"note: {note}")
        out += ["", rep.verdict_line]
        return "\n".join(out) + "\n"

    def to_dict(self) -> dict:
        rep = self.report
        return {
            "config": self.config.to_dict(),
            "config_text": emit_config(self.config),
            "scenario": rep.scenario,
            "frames": [
                {
                    "beta": f.beta,
                    "order": list(f.order),
                    "first_run": f.first_run,
                    "runs": f.runs,
                    "stats": [asdict(st) for st in f.stats],
                }
                for f in rep.frames
            ],
            "table": rep.table,
            "conflicts": list(rep.conflicts),
            "chsh": rep.chsh,
            "feasible": rep.feasible,
            "witness": None if rep.witness is None else list(rep.witness),
            "feasible_range": None if rep.feasible_range is None else list(rep.feasible_range),
            "range_target": rep.range_target,
            "range_target_value": rep.range_target_value,
            "bohm": None if self.bohm is None else list(self.bohm),
            "runs": rep.runs,
            "seed": rep.seed,
            "tolerance": rep.tolerance,
            "verdict": rep.verdict,
            "verdict_line": rep.verdict_line,
            "aggregates_csv": self.aggregates_csv(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def execute(c: RunConfig) -> RunResult:
    """Run every frame of the configured scenario and analyse the results."""
    s = build_scenario(c)
    runs = s.default_runs if c.runs is None else c.runs
    check_runs(s, runs)
    batches = tuple(run_frames(s, runs, c.seed))
    report = analyse(s, batches, runs, c.seed)
    bohm = tuple(bohm_summary(s, runs, c.seed)) if s.name.startswith("gao") else None
    return RunResult(c, s, report, batches, bohm)


def write_outputs(result: RunResult, out: str, fmt: str | None = None) -> list[str]:
    """Write report.txt and result.json, plus runs.csv and aggregates.csv for csv format."""
    fmt = fmt or result.config.format
    os.makedirs(out, exist_ok=True)
    files = {"report.txt": result.text_report(), "result.json": result.to_json()}
    if fmt == "csv":
        files["runs.csv"] = result.runs_csv()
        files["aggregates.csv"] = result.aggregates_csv()
    written = []
    for name, text in files.items():
        path = os.path.join(out, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)
    return sorted(written)


def replay(stored: str) -> RunResult:
    """Re-execute the config echoed in a stored ``result.json`` and confirm identical output.

    ``stored`` is the JSON file or the directory containing it.
    """
    path = os.path.join(stored, "result.json") if os.path.isdir(stored) else stored
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
        config = parse_config(data["config_text"])
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{path}: not a stored run result ({exc})") from None
    result = execute(config)
    if result.to_json() != text:
        raise ReplayMismatch(f"{path}: re-execution does not reproduce the stored result")
    return result
