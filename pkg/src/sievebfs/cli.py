"""Command-line driver: generate or load a graph, run BFS variants, emit reports.

Exit status: 0 when every run validates, 2 when any validation fails, 1 on
usage or I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .codecs import parse_codec
from .engine import AlgorithmKind, RunReport, run_bfs, validate
from .errors import SieveBfsError
from .fabric import CostModelParams, Fabric
from .graphgen import (
    CsrMatrix,
    EdgeList,
    GraphConfig,
    build_csr,
    generate_kronecker,
    partition_rows,
    read_edge_list,
    write_edge_list,
)

log = logging.getLogger("sievebfs")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
DEFAULT_SOURCES = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 by default; 2 is reserved here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunSpec:
    scale: int | None = None
    edgefactor: int = 16
    seed: int = 0
    relabel: bool = False
    graph: Path | None = None
    ranks: list[int] = field(default_factory=lambda: [1])
    scale_per_rank: int | None = None
    algorithms: list[AlgorithmKind] = field(default_factory=lambda: list(AlgorithmKind))
    codec: str = "wah:64"
    source: str = f"random:{DEFAULT_SOURCES}"
    alpha: float = CostModelParams.alpha
    beta: float = CostModelParams.beta
    out: Path | None = None
    fmt: str = "json"
    reps: int = 1
    export_graph: Path | None = None

    def check(self) -> None:
        if not self.algorithms:
            raise UsageError("at least one algorithm is required")
        if self.reps < 1:
            raise UsageError("--reps must be >= 1")
        if any(p < 1 for p in self.ranks):
            raise UsageError("--ranks values must be >= 1")
        sources = [self.graph is not None, self.scale is not None, self.scale_per_rank is not None]
        if sum(sources) != 1:
            raise UsageError("give exactly one of --graph, --scale, --scale-per-rank")
        if self.scale_per_rank is not None:
            for p in self.ranks:
                if p & (p - 1):
                    raise UsageError(f"--scale-per-rank needs power-of-two rank counts, got {p}")
        parse_codec(self.codec)
        CostModelParams(self.alpha, self.beta)


# --- tables ------------------------------------------------------------------


def frontier_table(report: RunReport) -> list[dict[str, Any]]:
    """Per-level frontier sizes as bitmap, sparse list and WAH, plus a totals row."""
    rows = [
        {
            "level": r.level,
            "vertices": r.frontier_count,
            "bitmap_bytes": r.raw_bytes,
            "sparse_bytes": r.sparse_bytes,
            "wah_bytes": r.wah_bytes,
        }
        for r in report.levels
    ]
    rows.append(
        {
            "level": "total",
            "vertices": sum(r["vertices"] for r in rows),
            "bitmap_bytes": sum(r["bitmap_bytes"] for r in rows),
            "sparse_bytes": sum(r["sparse_bytes"] for r in rows),
            "wah_bytes": sum(r["wah_bytes"] for r in rows),
        }
    )
    return rows


def weak_scaling_table(runs: Sequence[tuple[int, RunReport]]) -> list[dict[str, Any]]:
    """One row per (ranks, algorithm): byte totals averaged over sources and reps."""
    groups: dict[tuple[int, str], list[RunReport]] = {}
    scales: dict[int, int] = {}
    for scale, rep in runs:
        groups.setdefault((rep.p, rep.algorithm.value), []).append(rep)
        scales[rep.p] = scale
    rows = []
    for (p, alg), reps in sorted(groups.items()):
        per_rank = np.mean([r.volume_per_rank for r in reps], axis=0)
        rows.append(
            {
                "ranks": p,
                "scale": scales[p],
                "algorithm": alg,
                "level_comm_bytes": float(np.mean([r.level_comm_bytes for r in reps])),
                "volume_max_rank": float(np.mean([r.volume for r in reps])),
                "bytes_per_rank_mean": float(per_rank.mean()),
                "bytes_per_rank_min": float(per_rank.min()),
                "sim_time_s": float(np.mean([r.sim_time_s for r in reps])),
            }
        )
    return rows


def render_table(rows: Sequence[dict[str, Any]]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    cells = [[str(c) for c in cols]] + [[_fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(row[k]) for row in cells) for k in range(len(cols))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells)


def _fmt(v: Any) -> str:
    return f"{v:.4g}" if isinstance(v, float) else str(v)


# --- orchestration -----------------------------------------------------------


def _load_graph(spec: RunSpec, scale: int | None) -> tuple[EdgeList, dict[str, Any]]:
    if spec.graph is not None:
        edges = read_edge_list(spec.graph)
        return edges, {"graph": str(spec.graph)}
    cfg = GraphConfig(scale, spec.edgefactor, spec.seed, relabel=spec.relabel)
    edges = generate_kronecker(cfg)
    return edges, {"scale": scale, "edgefactor": spec.edgefactor, "seed": spec.seed, "relabel": spec.relabel}


def choose_sources(policy: str, csr: CsrMatrix, seed: int) -> list[int]:
    """``<id>`` or ``random:<k>``: k distinct vertices of nonzero degree."""
    policy = policy.strip()
    if policy.startswith("random"):
        _, _, k = policy.partition(":")
        try:
            count = int(k) if k else DEFAULT_SOURCES
        except ValueError:
            raise UsageError(f"bad source policy {policy!r}") from None
        if count < 1:
            raise UsageError("random source count must be >= 1")
        candidates = np.flatnonzero(csr.degrees() > 0)
        if candidates.size == 0:
            return [0]
        rng = np.random.default_rng(seed)
        picked = rng.choice(candidates, size=min(count, candidates.size), replace=False)
        return [int(v) for v in picked]
    try:
        s = int(policy)
    except ValueError:
        raise UsageError(f"bad source policy {policy!r}") from None
    if not 0 <= s < csr.n:
        raise UsageError(f"source {s} outside [0, {csr.n})")
    return [s]


@dataclass
class Outcome:
    reports: list[dict[str, Any]]
    timing: list[dict[str, Any]]
    frontier_tables: list[dict[str, Any]]
    weak_scaling: list[dict[str, Any]]
    all_valid: bool


def execute(spec: RunSpec) -> Outcome:
    spec.check()
    cost = CostModelParams(spec.alpha, spec.beta)
    codec = parse_codec(spec.codec)
    reports, timing, tables, sweep = [], [], [], []
    all_valid = True
    graph_cache: dict[int | None, tuple[EdgeList, CsrMatrix, dict[str, Any]]] = {}

    for p in spec.ranks:
        scale = spec.scale
        if spec.scale_per_rank is not None:
            scale = spec.scale_per_rank + int(math.log2(p))
        if scale not in graph_cache:
            edges, gconf = _load_graph(spec, scale)
            graph_cache.clear()
            graph_cache[scale] = (edges, build_csr(edges), gconf)
            if spec.export_graph is not None:
                write_edge_list(spec.export_graph, edges)
        edges, csr, gconf = graph_cache[scale]
        if p > csr.n:
            raise UsageError(f"{p} ranks exceed {csr.n} vertices")
        parts = partition_rows(csr, p)
        sources = choose_sources(spec.source, csr, spec.seed)
        for kind in spec.algorithms:
            for s in sources:
                for rep_idx in range(spec.reps):
                    result, report = run_bfs(
                        kind, parts, Fabric(p), s, None if kind is AlgorithmKind.BIT else codec,
                        edges=edges, cost=cost,
                    )
                    check = validate(result, csr)
                    all_valid &= check.ok
                    report.validation = check.to_dict()
                    report.extra_config = {**gconf, "rep": rep_idx, "edges_in_file": len(edges)}
                    reports.append(report.to_dict(include_wall=False))
                    timing.append(
                        {
                            "algorithm": kind.value,
                            "ranks": p,
                            "source": s,
                            "rep": rep_idx,
                            "wall_time_s": report.wall_time_s,
                            "teps": report.teps,
                            "phase_wall_s": [r.phase_wall_s for r in report.levels],
                        }
                    )
                    if rep_idx == 0:
                        tables.append(
                            {"algorithm": kind.value, "ranks": p, "source": s, "rows": frontier_table(report)}
                        )
                        sweep.append((scale, report))
                    log.info(
                        "%s p=%d s=%d: %d levels, %d level bytes, valid=%s",
                        kind.value, p, s, report.d, report.level_comm_bytes, check.ok,
                    )
    weak = weak_scaling_table(sweep) if len(spec.ranks) > 1 else []
    return Outcome(reports, timing, tables, weak, all_valid)


CSV_FIELDS = [
    "algorithm", "codec", "ranks", "source", "rep", "level", "frontier_count",
    "raw", "sparse", "wah", "sent_total", "reduce_total", "uncompressed", "compressed",
    "sim_reducing_s", "sim_communication_s",
]


def to_csv(reports: Sequence[dict[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for rep in reports:
        cfg = rep["config"]
        for lvl in rep["per_level"]:
            b = lvl["bytes"]
            w.writerow(
                {
                    "algorithm": cfg["algorithm"],
                    "codec": cfg["codec"] or "",
                    "ranks": cfg["ranks"],
                    "source": cfg["source"],
                    "rep": cfg.get("rep", 0),
                    "level": lvl["level"],
                    "frontier_count": lvl["frontier_count"],
                    "raw": b["raw"],
                    "sparse": b["sparse"],
                    "wah": b["wah"],
                    "sent_total": b["sent_total"],
                    "reduce_total": b["reduce_total"],
                    "uncompressed": b["uncompressed"],
                    "compressed": b["compressed"],
                    "sim_reducing_s": repr(lvl["phase_sim_s"]["reducing"]),
                    "sim_communication_s": repr(lvl["phase_sim_s"]["communication"]),
                }
            )
    return buf.getvalue()


def render(outcome: Outcome, fmt: str) -> str:
    if fmt == "csv":
        return to_csv(outcome.reports)
    doc = {
        "version": __version__,
        "reports": outcome.reports,
        "frontier_tables": outcome.frontier_tables,
        "weak_scaling": outcome.weak_scaling,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def timing_path(out: Path) -> Path:
    return out.with_name(out.stem + ".timing.json")


# --- argument parsing --------------------------------------------------------


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _alg_list(text: str) -> list[AlgorithmKind]:
    try:
        return [AlgorithmKind.parse(t) for t in text.split(",") if t.strip()]
    except SieveBfsError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sievebfs", description="Distributed BFS variants over a simulated fabric.")
    g = ap.add_argument_group("graph")
    g.add_argument("--scale", type=int, help="Kronecker scale (n = 2^scale)")
    g.add_argument("--edgefactor", type=int, default=16)
    g.add_argument("--seed", type=int, default=0, help="graph and source-sampling seed")
    g.add_argument("--relabel", action="store_true", help="randomly permute vertex labels")
    g.add_argument("--graph", type=Path, help="read an edge-list file instead of generating")
    g.add_argument("--export-graph", type=Path, help="write the generated edge list here")
    r = ap.add_argument_group("run")
    r.add_argument("--ranks", type=_int_list, default=[1], help="rank count, or a comma list for a sweep")
    r.add_argument("--scale-per-rank", type=int, help="weak scaling: scale = this + log2(ranks)")
    r.add_argument("--alg", type=_alg_list, default=list(AlgorithmKind), help="bit,wah,dir-wah")
    r.add_argument("--codec", default="wah:64", help="raw | wah:W | sparse | rle")
    r.add_argument("--source", default=f"random:{DEFAULT_SOURCES}", help="vertex id or random:k")
    r.add_argument("--alpha", type=float, default=CostModelParams.alpha, help="seconds per message")
    r.add_argument("--beta", type=float, default=CostModelParams.beta, help="seconds per byte")
    r.add_argument("--reps", type=int, default=1)
    o = ap.add_argument_group("output")
    o.add_argument("--out", type=Path, help="report path (stdout if omitted)")
    o.add_argument("--format", choices=["json", "csv"], default="json")
    o.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return ap


def spec_from_args(ns: argparse.Namespace) -> RunSpec:
    return RunSpec(
        scale=ns.scale,
        edgefactor=ns.edgefactor,
        seed=ns.seed,
        relabel=ns.relabel,
        graph=ns.graph,
        ranks=ns.ranks,
        scale_per_rank=ns.scale_per_rank,
        algorithms=ns.alg,
        codec=ns.codec,
        source=ns.source,
        alpha=ns.alpha,
        beta=ns.beta,
        out=ns.out,
        fmt=ns.format,
        reps=ns.reps,
        export_graph=ns.export_graph,
    )


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if ns.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    spec = spec_from_args(ns)
    try:
        outcome = execute(spec)
        text = render(outcome, spec.fmt)
        if spec.out is None:
            sys.stdout.write(text)
        else:
            spec.out.write_text(text)
            timing_path(spec.out).write_text(json.dumps(outcome.timing, indent=2) + "\n")
    except (UsageError, SieveBfsError, OSError) as exc:
        print(f"sievebfs: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    for t in outcome.frontier_tables[:1]:
        print(f"frontier sizes ({t['algorithm']}, ranks={t['ranks']}, source={t['source']}):", file=sys.stderr)
        print(render_table(t["rows"]), file=sys.stderr)
    if outcome.weak_scaling:
        print("weak scaling:", file=sys.stderr)
        print(render_table(outcome.weak_scaling), file=sys.stderr)
    if not outcome.all_valid:
        print("sievebfs: BFS validation failed", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
