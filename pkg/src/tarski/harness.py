"""Scenario generation, experiment runs and trace export.

Seeds
-----
Every random stream derives from the master seed: stream ``k`` uses
``master ^ splitmix64(k)``.  Trial ``k`` draws its firing sequence from
stream ``k``; scenario construction uses the fixed streams below, so adding
trials never perturbs the graph, the model or a shared initial state.
"""
from __future__ import annotations

import csv
import dataclasses
import io as _io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from . import io
from .dynamics import (
    FiringSequence,
    FlowStatus,
    FlowTrace,
    default_step_cap,
    lyapunov_energy,
    make_firing_sequence,
    run_flow,
)
from .kripke import KripkeModel, check_frame_axioms, random_model, semantic_sheaf, threat_model
from .lattice import lattice_from_description, validate_lattice
from .sheaf import MODES, Graph, NetworkSheaf, constant_sheaf, is_section

MASK64 = (1 << 64) - 1
GRAPH_STREAM = 1 << 32
MODEL_STREAM = GRAPH_STREAM + 1
INITIAL_STREAM = GRAPH_STREAM + 2
PER_TRIAL_INITIAL_STREAM = 1 << 33

SCENARIOS = ("semantic", "constant", "sheaf-file", "threat")
CSV_COLUMNS = ("trial", "t", "energy", "changed_vertices", "fired_count")


class ConfigError(ValueError):
    pass


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, stream: int) -> int:
    return (int(master) ^ splitmix64(stream)) & MASK64


def format_energy(value: Fraction) -> str:
    """Decimal rendering with 12 significant digits."""
    with localcontext() as ctx:
        ctx.prec = 12
        d = Decimal(value.numerator) / Decimal(value.denominator)
    return f"{d:.12g}"


# -- generators -----------------------------------------------------------------


class GeometricGraph(Graph):
    """A :class:`Graph` that remembers the points it was built from."""

    def __init__(self, points: np.ndarray, radius: float):
        self.points = points
        self.radius = radius
        n = len(points)
        diff = points[:, None, :] - points[None, :, :]
        close = (diff**2).sum(axis=-1) <= radius * radius
        super().__init__(n, [(i, j) for i in range(n) for j in range(i + 1, n) if close[i, j]])


def generate_geometric_graph(n: int, radius: float, seed: int) -> GeometricGraph:
    """``n`` uniform points in the unit square joined when at most ``radius`` apart."""
    if int(n) < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    rng = np.random.default_rng(seed)
    return GeometricGraph(rng.random((int(n), 2)), float(radius))


def random_assignment(sheaf: NetworkSheaf, seed: int) -> tuple[int, ...]:
    """Powerset vertices include each ground element with probability 1/2;
    other lattices draw a uniform element."""
    rng = np.random.default_rng(seed)
    out = []
    for L in sheaf.vertex_lattices:
        if L.is_powerset:
            bits = np.flatnonzero(rng.random(L.ground) < 0.5)
            out.append(sum(1 << int(k) for k in bits))
        else:
            out.append(int(rng.integers(L.size)))
    return tuple(out)


# -- configuration ----------------------------------------------------------------


@dataclass
class ExperimentConfig:
    scenario: str = "semantic"
    graph: dict | None = field(default_factory=lambda: {"kind": "geometric", "n": 40, "radius": 0.08})
    model: dict | None = field(default_factory=lambda: {"states": 10, "p_diag": 0.9, "p_off": 0.1})
    lattice: dict | None = None
    sheaf_path: str | None = None
    threat: dict | None = None
    firing: dict = field(default_factory=lambda: {"kind": "bernoulli", "p": 0.5})
    mode: str = "dual"
    trials: int = 5
    step_cap: int | None = None
    seed: int = 0
    initial: str = "shared"
    initial_assignment: list | None = None
    metric: str = "auto"
    output: str | None = None
    jobs: int = 1

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        cfg = cls(**data)
        cfg.check()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def check(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.initial not in ("shared", "per-trial"):
            raise ConfigError("initial must be 'shared' or 'per-trial'")
        if int(self.trials) < 0:
            raise ConfigError("trials must be >= 0")
        if self.step_cap is not None and int(self.step_cap) < 1:
            raise ConfigError("step_cap must be >= 1")
        if int(self.jobs) < 1:
            raise ConfigError("jobs must be >= 1")
        if self.scenario == "constant" and self.lattice is None:
            raise ConfigError("constant scenario needs a 'lattice' description")
        if self.scenario == "sheaf-file" and not self.sheaf_path:
            raise ConfigError("sheaf-file scenario needs 'sheaf_path'")
        if self.scenario == "threat" and not self.threat:
            raise ConfigError("threat scenario needs a 'threat' section")
        if self.scenario != "sheaf-file" and not self.graph:
            raise ConfigError(f"{self.scenario} scenario needs a 'graph' section")


@dataclass
class Scenario:
    sheaf: NetworkSheaf
    graph: Graph
    model: KripkeModel | None = None

    def metadata(self) -> dict:
        out: dict[str, Any] = {
            "vertices": self.graph.n,
            "edges": len(self.graph.edges),
            "components": len(self.graph.components()),
        }
        if isinstance(self.graph, GeometricGraph):
            out["points"] = [[float(a), float(b)] for a, b in self.graph.points]
        return out


def _resolve(path: str, base_dir) -> Path:
    p = Path(path)
    return p if p.is_absolute() or base_dir is None else Path(base_dir) / p


def build_graph(spec: dict, master: int, base_dir=None) -> Graph:
    kind = spec.get("kind")
    try:
        if kind == "geometric":
            seed = spec.get("seed", derive_seed(master, GRAPH_STREAM))
            return generate_geometric_graph(spec["n"], spec["radius"], seed)
        if kind == "file":
            return io.read_edge_list(_resolve(spec["path"], base_dir))
        if kind == "complete":
            return Graph.complete(spec["n"])
        if kind == "path":
            return Graph.path(spec["n"])
        if kind == "cycle":
            return Graph.cycle(spec["n"])
        if kind == "edges":
            return Graph(spec["n"], spec.get("edges", []))
    except KeyError as exc:
        raise ConfigError(f"{kind} graph spec is missing field {exc}") from None
    raise ConfigError(f"unknown graph kind {kind!r}")


def _threat_valuation(spec: dict, sizes: list[int], seed: int):
    n_atoms = int(spec.get("atoms", 1))
    atoms = [f"A{k + 1}" for k in range(n_atoms)]
    val = spec.get("valuation", "random")
    if val == "random":
        rng = np.random.default_rng(seed)
        total = math.prod(sizes)
        draws = rng.random((total, n_atoms)) < 0.5
        return {s: [atoms[k] for k in np.flatnonzero(row)] for s, row in enumerate(draws)}, atoms
    if isinstance(val, dict):
        out = {}
        for key, props in val.items():
            out[tuple(int(v) for v in key.split(","))] = list(props)
        return out, atoms
    raise ConfigError("threat valuation must be 'random' or an object keyed by 'i,j,...'")


def build_scenario(cfg: ExperimentConfig, base_dir=None) -> Scenario:
    master = int(cfg.seed)
    if cfg.scenario == "sheaf-file":
        sheaf = io.sheaf_from_description(io.load_json(_resolve(cfg.sheaf_path, base_dir)))
        return Scenario(sheaf, sheaf.graph)
    graph = build_graph(cfg.graph, master, base_dir)
    if cfg.scenario == "constant":
        return Scenario(constant_sheaf(graph, lattice_from_description(cfg.lattice)), graph)
    if cfg.scenario == "semantic":
        spec = cfg.model or {}
        if "path" in spec:
            model = io.model_from_description(io.load_json(_resolve(spec["path"], base_dir)))
        else:
            model = random_model(
                graph.n,
                int(spec.get("states", 10)),
                float(spec.get("p_diag", 0.9)),
                float(spec.get("p_off", 0.1)),
                int(spec.get("atoms", 0)),
                seed=spec.get("seed", derive_seed(master, MODEL_STREAM)),
            )
        return Scenario(semantic_sheaf(graph, model), graph, model)
    spec = cfg.threat
    sizes = [int(v) for v in spec["local_sizes"]]
    if len(sizes) != graph.n:
        raise ConfigError(f"{len(sizes)} sensors for a graph with {graph.n} vertices")
    valuation, atoms = _threat_valuation(spec, sizes, spec.get("seed", derive_seed(master, MODEL_STREAM)))
    model = threat_model(sizes, valuation, atoms)
    return Scenario(semantic_sheaf(graph, model), graph, model)


def firing_for_trial(cfg: ExperimentConfig, n: int, trial: int) -> FiringSequence:
    spec = dict(cfg.firing)
    kind = spec.pop("kind", "bernoulli")
    base = spec.pop("seed", cfg.seed)
    return make_firing_sequence(
        kind, n, p=spec.get("p"), seed=derive_seed(base, trial), schedule=spec.get("schedule"))


def initial_for_trial(cfg: ExperimentConfig, sheaf: NetworkSheaf, trial: int) -> tuple[int, ...]:
    if cfg.initial_assignment is not None:
        return sheaf.check_assignment(cfg.initial_assignment)
    if cfg.initial == "shared":
        return random_assignment(sheaf, derive_seed(cfg.seed, INITIAL_STREAM))
    return random_assignment(sheaf, derive_seed(cfg.seed, PER_TRIAL_INITIAL_STREAM + trial))


# -- running ----------------------------------------------------------------------


@dataclass
class TrialResult:
    trial: int
    firing: FiringSequence
    trace: FlowTrace


@dataclass
class ExperimentResult:
    summary: dict
    csv_text: str
    trials: list[TrialResult]


_WORKER_CACHE: dict[str, Scenario] = {}


def _run_trial(cfg: ExperimentConfig, scenario: Scenario, trial: int, step_cap: int) -> TrialResult:
    sheaf = scenario.sheaf
    firing = firing_for_trial(cfg, sheaf.n, trial)
    x0 = initial_for_trial(cfg, sheaf, trial)
    trace = run_flow(sheaf, firing, x0, cfg.mode, step_cap, metric=cfg.metric)
    return TrialResult(trial, firing, trace)


def _worker(cfg_dict: dict, base_dir, trial: int, step_cap: int) -> TrialResult:
    key = json.dumps([cfg_dict, str(base_dir)], sort_keys=True)
    cfg = ExperimentConfig.from_dict(cfg_dict)
    if key not in _WORKER_CACHE:
        _WORKER_CACHE[key] = build_scenario(cfg, base_dir)
    return _run_trial(cfg, _WORKER_CACHE[key], trial, step_cap)


def trace_csv(trials: list[TrialResult]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for tr in trials:
        for rec in tr.trace.records:
            w.writerow([tr.trial, rec.t, format_energy(rec.energy), rec.changed, len(rec.fired)])
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, out_dir=None, base_dir=None) -> ExperimentResult:
    """Build the scenario, run every trial and (optionally) write
    ``trace.csv`` and ``summary.json`` into ``out_dir``."""
    cfg.check()
    scenario = build_scenario(cfg, base_dir)
    sheaf = scenario.sheaf
    step_cap = int(cfg.step_cap) if cfg.step_cap is not None else default_step_cap(sheaf)
    trial_ids = list(range(int(cfg.trials)))

    if int(cfg.jobs) > 1 and len(trial_ids) > 1:
        with ProcessPoolExecutor(max_workers=int(cfg.jobs)) as pool:
            futures = [pool.submit(_worker, cfg.to_dict(), base_dir, k, step_cap) for k in trial_ids]
            results = [f.result() for f in futures]
    else:
        results = [_run_trial(cfg, scenario, k, step_cap) for k in trial_ids]

    rows = []
    for tr in results:
        trace = tr.trace
        final = trace.final
        section = is_section(sheaf, final, cfg.mode)
        energy = lyapunov_energy(sheaf, final, cfg.metric, cfg.mode)
        if trace.status is FlowStatus.CONVERGED and not (section and energy == 0):
            raise RuntimeError(f"trial {tr.trial} reported convergence to a non-section")
        rows.append({
            "trial": tr.trial,
            "firing": tr.firing.describe(),
            "terminal_status": trace.status.value,
            "steps": trace.steps,
            "initial_energy": format_energy(trace.initial_energy),
            "terminal_energy": format_energy(energy),
            "section": section,
            "initial_assignment": list(trace.initial),
            "terminal_assignment": list(final),
        })

    summary = {
        "config": cfg.to_dict(),
        "scenario": scenario.metadata(),
        "step_cap": step_cap,
        "trials": rows,
    }
    csv_text = trace_csv(results)
    out_dir = out_dir if out_dir is not None else cfg.output
    if out_dir is not None:
        out = _resolve(str(out_dir), None)
        out.mkdir(parents=True, exist_ok=True)
        (out / "trace.csv").write_text(csv_text)
        io.dump_json(summary, out / "summary.json")
    return ExperimentResult(summary, csv_text, results)


# -- file checks ------------------------------------------------------------------


def validate_document(doc) -> tuple[bool, str]:
    """Validate a parsed lattice, sheaf or model file; returns ``(ok, report)``."""
    kind = io.file_kind(doc)
    if kind == "lattice":
        report = validate_lattice(lattice_from_description(doc))
        return report.ok, str(report)
    if kind == "sheaf":
        sheaf = io.sheaf_from_description(doc)
        lines, ok = [], True
        seen = []
        for L in list(sheaf.vertex_lattices) + list(sheaf.edge_lattices):
            if any(L is s for s in seen):
                continue
            seen.append(L)
            report = validate_lattice(L)
            ok &= report.ok
            lines.append(str(report))
        lines.append(f"sheaf: {sheaf.n} vertices, {len(sheaf.graph.edges)} edges, "
                     f"all structure maps join-preserving")
        return ok, "\n".join(lines)
    model = io.model_from_description(doc)
    lines = [f"model: {model.n_states} states, {model.n_agents} agents, {len(model.atoms)} atoms"]
    lines += [str(check_frame_axioms(model, i)) for i in range(model.n_agents)]
    return True, "\n".join(lines)
