"""Manifest-driven training, transfer and verification runs.

A manifest is a flat ``key = value`` file; paths are relative to the
manifest's directory::

    dfoci = taxi.dfoci
    operators = taxi.ops
    instance = task1.taxi
    variants = reprel, hrl
    load = results/task1        # optional: initialise from saved tables (+T)
    out = results/task1
    total_env_steps = 150000    # any TrainConfig field
"""
from __future__ import annotations

import shutil
import statistics
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .agents import VARIANTS, QTable, TrainConfig, train
from .dfoci import load as load_dfoci
from .planner import load_operators
from .taxi import TaxiEnv, load_instance
from .verifier import EQUIV_TOL, format_report, verify_domain


class ManifestError(ValueError):
    pass


def parse_kv(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ManifestError(f"line {lineno}: expected key = value")
        out[key.strip()] = value.strip()
    return out


@dataclass
class ExperimentManifest:
    dfoci: Path
    operators: Path
    instance: Path
    variants: tuple = ("reprel", "hrl")
    config: TrainConfig = field(default_factory=TrainConfig)
    out: Optional[Path] = None
    load: Optional[Path] = None
    task: str = ""
    tol: float = EQUIV_TOL

    @classmethod
    def from_file(cls, path) -> "ExperimentManifest":
        path = Path(path)
        if not path.is_file():
            raise ManifestError(f"manifest {path} not found")
        values = parse_kv(path.read_text(encoding="utf-8"))
        base = path.parent

        def rel(key, required=True):
            if key not in values:
                if required:
                    raise ManifestError(f"manifest is missing {key!r}")
                return None
            return (base / values[key]).resolve()

        variants = tuple(v.strip() for v in values.get("variants", "reprel,hrl").split(",") if v.strip())
        for v in variants:
            if v not in VARIANTS:
                raise ManifestError(f"unknown variant {v!r}")
        try:
            config = TrainConfig.from_mapping(values)
        except ValueError as exc:
            raise ManifestError(str(exc)) from None
        m = cls(
            dfoci=rel("dfoci"),
            operators=rel("operators"),
            instance=rel("instance"),
            variants=variants,
            config=config,
            out=rel("out", required=False),
            load=rel("load", required=False),
            task=values.get("task", ""),
            tol=float(values.get("tol", EQUIV_TOL)),
        )
        if not m.task:
            m.task = m.instance.stem
        m.check_files()
        return m

    def check_files(self) -> None:
        for p in (self.dfoci, self.operators, self.instance):
            if not p.is_file():
                raise ManifestError(f"referenced file {p} does not exist")
        if self.load is not None and not self.load.is_dir():
            raise ManifestError(f"load directory {self.load} does not exist")

    def domain(self):
        """Parse and validate every referenced file."""
        decl = load_dfoci(self.dfoci)
        operators = load_operators(self.operators)
        env = TaxiEnv(load_instance(self.instance))
        missing = [op.name for op in operators if op.name not in decl.subtasks]
        if missing:
            raise ManifestError(f"operators without a declared subtask: {missing}")
        return decl, operators, env


def label(variant: str, transferred: bool) -> str:
    return f"{variant}+T" if transferred else variant


def load_tables(root: Path, variant: str, seed: int) -> dict:
    d = root / "tables" / variant / f"seed{seed}"
    if not d.is_dir():
        raise ManifestError(f"no saved tables at {d}")
    return {p.stem: QTable.load(p) for p in sorted(d.glob("*.qtable"))}


def _fmt_steps(s) -> str:
    return "none" if s is None else str(s)


def run_train(manifest: ExperimentManifest, out: Optional[Path] = None, seeds=None) -> dict:
    """Train every variant; write CSV curves, summary and Q-tables atomically.

    Returns ``{label: (runs, curve)}``. Outputs go to a temporary directory
    that replaces ``out`` contents only when every variant finished.
    """
    out = Path(out or manifest.out or Path.cwd() / "results")
    config = manifest.config if seeds is None else replace(manifest.config, seeds=tuple(seeds))
    decl, operators, env = manifest.domain()
    transferred = manifest.load is not None
    tables = {}
    if transferred:
        for v in manifest.variants:
            tables[v] = {s: load_tables(manifest.load, v, s) for s in config.seeds}

    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    results = {}
    try:
        summary = []
        for v in manifest.variants:
            runs, curve = train(v, env, decl, operators, config, tables.get(v))
            name = label(v, transferred)
            results[name] = (runs, curve)
            (tmp / f"{manifest.task}_{name}.csv").write_text(curve.to_csv(len(config.seeds)), encoding="utf-8")
            reached = [r.steps_to_optimal for r in runs]
            done = [s for s in reached if s is not None]
            med = statistics.median(done) if len(done) == len(reached) else None
            per_seed = ",".join(f"{r.seed}:{_fmt_steps(r.steps_to_optimal)}" for r in runs)
            summary.append(
                f"task={manifest.task} variant={name} steps_to_optimal={per_seed} median={_fmt_steps(med)}"
            )
            for r in runs:
                d = tmp / "tables" / name / f"seed{r.seed}"
                d.mkdir(parents=True, exist_ok=True)
                for sub, q in sorted(r.tables.items()):
                    q.save(d / f"{sub}.qtable")
        (tmp / "summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")
        out.mkdir(parents=True, exist_ok=True)
        for item in sorted(tmp.iterdir()):
            target = out / item.name
            if target.is_dir():
                shutil.rmtree(target)
            elif target.exists():
                target.unlink()
            shutil.move(str(item), str(target))
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return results


def run_verify(manifest: ExperimentManifest, tol: Optional[float] = None) -> tuple:
    """Run every exhaustive check; returns ``(all passed, report text)``."""
    decl, operators, env = manifest.domain()
    results = verify_domain(env, decl, operators, tol if tol is not None else manifest.tol)
    return all(r.passed for r in results), format_report(results)
