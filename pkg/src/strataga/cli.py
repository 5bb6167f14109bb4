"""Command line pipeline: frame in, per-domain designs out.

One run loads the frame, splits it by domain, builds each domain's atomic
strata and searches for a stratification with either genetic engine or,
on small instances, the exhaustive oracle. Domains are independent, so
their totals simply add up. Each domain emits its stratum assignment,
allocation and convergence log; a machine-readable summary covers the
whole run. Emitted files carry no timestamps, so a rerun with the same
configuration and seed reproduces them byte for byte.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import sys
import time
from dataclasses import dataclass, replace
from statistics import median
from typing import IO

import numpy as np
import pandas as pd

from .allocation import (
    AllocationSettings,
    CostModel,
    PrecisionConstraints,
    bethel_allocate,
    variance_bounds,
)
from .errors import StratagaError
from .evolve import GaConfig, RunResult, evolve_domain
from .frame import FrameSchema, load_frame, split_domains
from .oracle import bell_number, brute_force_optimum
from .strata import (
    AtomicStrataSet,
    Stratification,
    build_atomic_strata,
    decode_partition,
    export_atomic_strata,
)
from .evaluate import expected_cv

ALGORITHMS = ("ga", "gga", "bruteforce")


@dataclass(frozen=True)
class RunConfig:
    """Everything one pipeline run needs."""

    frame_path: str
    schema: FrameSchema
    constraints: PrecisionConstraints
    ga: GaConfig = GaConfig()
    alloc: AllocationSettings = AllocationSettings()
    cost: CostModel = CostModel()
    algorithm: str = "gga"
    out_dir: str = "out"
    seed: int = 0
    jobs: int = 1
    delimiter: str = ","
    eval_reps: int = 0  # draw this many validation samples per domain if > 0
    bench_reps: int = 0  # time the allocation kernel this many times if > 0
    plot: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")


@dataclass
class DomainSummary:
    domain: object
    n_atomic: int
    best_fitness: float
    n_strata: int
    total_n: int
    realized_cv: list[float]
    chromosomes_generated: int
    iterations_run: int
    wall_time: float  # kept out of emitted files


@dataclass
class RunSummary:
    domains: list[DomainSummary]
    algorithm: str
    seed: int
    config_echo: dict
    bethel_timing_us: float | None = None  # median per-call, in-memory only

    @property
    def total_fitness(self) -> float:
        return sum(d.best_fitness for d in self.domains)

    @property
    def total_n(self) -> int:
        return sum(d.total_n for d in self.domains)

    @property
    def total_strata(self) -> int:
        return sum(d.n_strata for d in self.domains)


def _domain_result(args) -> tuple[RunResult, AtomicStrataSet, float]:
    atoms, limits, cost, alloc_settings, ga_config, seed, algorithm = args
    started = time.perf_counter()
    if algorithm == "bruteforce":
        best, alloc = brute_force_optimum(atoms, limits, cost, alloc_settings)
        result = RunResult(
            best=best,
            best_allocation=alloc,
            convergence=[(best.fitness, best.fitness)],
            chromosomes_generated=bell_number(atoms.size),
            iterations_run=1,
        )
    else:
        engine = "grouping" if algorithm == "gga" else "classical"
        config = replace(ga_config, engine=engine, seed=seed)
        result = evolve_domain(atoms, limits, cost, alloc_settings, config)
    return result, atoms, time.perf_counter() - started


def run(config: RunConfig) -> RunSummary:
    """Execute the full pipeline and emit per-domain files plus a summary."""
    frame = load_frame(config.frame_path, config.schema, delimiter=config.delimiter)
    domains = split_domains(frame)
    seeds = np.random.SeedSequence(config.seed).spawn(len(domains))
    tasks = []
    for i, df in enumerate(domains):
        atoms = build_atomic_strata(df)
        limits = config.constraints.row_for(df.domain)
        if limits.shape != (frame.n_targets,):
            raise ValueError("constraint row length must equal the target count")
        # per-domain integer seed derived from the root seed
        seed = int(seeds[i].generate_state(1)[0])
        tasks.append((atoms, limits, config.cost, config.alloc, config.ga, seed, config.algorithm))

    if config.jobs > 1 and len(tasks) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_domain_result, tasks))
    else:
        results = [_domain_result(t) for t in tasks]

    os.makedirs(config.out_dir, exist_ok=True)
    summaries = []
    for df, (result, atoms, elapsed) in zip(domains, results):
        summaries.append(_emit_domain(config, df, atoms, result, elapsed))

    timing = None
    if config.bench_reps > 0:
        times = []
        for (result, atoms, _), (_, limits, *_rest) in zip(results, tasks):
            strat = decode_partition(result.best.labels, atoms)
            stats = bench_allocation(
                atoms, strat, config.bench_reps, config.cost, config.alloc, limits
            )
            times.append(stats["median_us"])
        timing = median(times)

    summary = RunSummary(
        domains=summaries,
        algorithm=config.algorithm,
        seed=config.seed,
        config_echo=_config_echo(config),
        bethel_timing_us=timing,
    )
    _atomic_write(
        os.path.join(config.out_dir, "SUMMARY.json"),
        json.dumps(_summary_payload(summary), indent=2, sort_keys=True) + "\n",
    )
    return summary


def _emit_domain(config, df, atoms, result: RunResult, elapsed: float) -> DomainSummary:
    out = os.path.join(config.out_dir, f"domain_{_slug(df.domain)}")
    os.makedirs(out, exist_ok=True)

    strat = decode_partition(result.best.labels, atoms)
    alloc = result.best_allocation

    lines = ["STRATUM_KEY,STRATUM_ID\n"]
    stratum_of_atom = np.empty(atoms.size, dtype=np.int64)
    for h, members in enumerate(strat.members):
        stratum_of_atom[list(members)] = h + 1
    for k in range(atoms.size):
        lines.append(f"{atoms.keys[k]},{stratum_of_atom[k]}\n")
    _atomic_write(os.path.join(out, "STRATA.csv"), "".join(lines))

    with open(os.path.join(out, "ATOMIC.csv.tmp"), "w", encoding="utf-8") as f:
        export_atomic_strata(atoms, f)
    os.replace(os.path.join(out, "ATOMIC.csv.tmp"), os.path.join(out, "ATOMIC.csv"))

    if alloc is not None:
        lines = ["STRATUM_ID,N_h,n_h\n"]
        for h in range(strat.n_strata):
            lines.append(f"{h + 1},{int(strat.pop_sizes[h])},{int(alloc.n[h])}\n")
        cvs = ";".join(repr(float(v)) for v in alloc.realized_cv)
        lines.append(f"# realized_cv,{cvs}\n")
        _atomic_write(os.path.join(out, "ALLOC.csv"), "".join(lines))

    with open(os.path.join(out, "CONVERGENCE.csv.tmp"), "w", encoding="utf-8") as f:
        emit_convergence(result, f)
    os.replace(
        os.path.join(out, "CONVERGENCE.csv.tmp"), os.path.join(out, "CONVERGENCE.csv")
    )
    if config.plot:
        _plot_convergence(result, os.path.join(out, "CONVERGENCE.png"))

    if config.eval_reps > 0 and alloc is not None:
        rng = np.random.default_rng(config.seed)
        ev = expected_cv(df, strat, alloc, reps=config.eval_reps, rng=rng)
        lines = ["TARGET,EXPECTED_CV\n"]
        for g, cv in enumerate(ev.mean_cv):
            lines.append(f"{config.schema.target_columns[g]},{repr(float(cv))}\n")
        _atomic_write(os.path.join(out, "EVALUATION.csv"), "".join(lines))

    return DomainSummary(
        domain=df.domain,
        n_atomic=atoms.size,
        best_fitness=result.best.fitness,
        n_strata=strat.n_strata,
        total_n=int(alloc.total_n) if alloc is not None else 0,
        realized_cv=[float(v) for v in alloc.realized_cv] if alloc is not None else [],
        chromosomes_generated=result.chromosomes_generated,
        iterations_run=result.iterations_run,
        wall_time=elapsed,
    )


def emit_convergence(result: RunResult, sink: IO[str]) -> None:
    """Write the per-iteration best/mean fitness log as CSV."""
    sink.write("iteration,best,mean\n")
    for i, (best, mean) in enumerate(result.convergence, start=1):
        sink.write(f"{i},{repr(float(best))},{repr(float(mean))}\n")


def _plot_convergence(result: RunResult, path: str) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not available; skipping plot", file=sys.stderr)
        return
    best = [b for b, _ in result.convergence]
    mean = [m for _, m in result.convergence]
    fig, ax = plt.subplots(figsize=(6, 4))
    it = range(1, len(best) + 1)
    ax.plot(it, best, color="black", label="best")
    ax.plot(it, mean, color="red", label="mean")
    ax.set_xlabel("iteration")
    ax.set_ylabel("sample size")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def bench_allocation(
    atoms: AtomicStrataSet,
    strat: Stratification,
    reps: int,
    cost: CostModel = CostModel(),
    settings: AllocationSettings = AllocationSettings(),
    cv_limits=None,
) -> dict:
    """Median wall time of one allocation call on the given instance."""
    if reps < 1:
        raise ValueError("at least one repetition is required")
    if cv_limits is None:
        cv_limits = np.full(atoms.n_targets, 0.05)
    bounds = variance_bounds(strat, cv_limits)
    times = []
    for _ in range(reps):
        start = time.perf_counter()
        bethel_allocate(strat, bounds, cost, settings)
        times.append(time.perf_counter() - start)
    return {
        "reps": reps,
        "median_us": median(times) * 1e6,
        "total_us": sum(times) * 1e6,
    }


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------


def _slug(value) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in str(value))


def _atomic_write(path: str, content: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(content)
    os.replace(tmp, path)


def _config_echo(config: RunConfig) -> dict:
    return {
        "frame": config.frame_path,
        "targets": list(config.schema.target_columns),
        "aux": list(config.schema.aux_columns),
        "domain_col": config.schema.domain_column,
        "algorithm": config.algorithm,
        "pop": config.ga.pop_size,
        "iters": config.ga.iterations,
        "elitism": config.ga.elitism_rate,
        "mutation": config.ga.mutation_prob,
        "inversion": config.ga.inversion_prob,
        "min_units": config.alloc.min_units,
        "seed": config.seed,
        "cv": np.asarray(config.constraints.limits).tolist(),
        "stop_at": config.ga.stop_at,
    }


def _summary_payload(summary: RunSummary) -> dict:
    return {
        "algorithm": summary.algorithm,
        "seed": summary.seed,
        "config": summary.config_echo,
        "domains": [
            {
                "domain": str(d.domain),
                "atomic_strata": d.n_atomic,
                "best_fitness": d.best_fitness,
                "strata": d.n_strata,
                "total_n": d.total_n,
                "realized_cv": d.realized_cv,
                "chromosomes_generated": d.chromosomes_generated,
                "iterations_run": d.iterations_run,
            }
            for d in summary.domains
        ],
        "totals": {
            "fitness": summary.total_fitness,
            "total_n": summary.total_n,
            "strata": summary.total_strata,
        },
    }


def print_summary(summary: RunSummary, sink: IO[str] | None = None) -> None:
    """Human-readable run table, timing included."""
    sink = sink if sink is not None else sys.stdout
    sink.write(f"algorithm={summary.algorithm} seed={summary.seed}\n")
    sink.write("domain        cells   n      strata  chromosomes  iters   time_s\n")
    for d in summary.domains:
        sink.write(
            f"{str(d.domain):<12}  {d.n_atomic:<6}  {d.total_n:<5}  {d.n_strata:<6}  "
            f"{d.chromosomes_generated:<11}  {d.iterations_run:<6}  {d.wall_time:.2f}\n"
        )
    sink.write(
        f"TOTAL n={summary.total_n} strata={summary.total_strata} "
        f"fitness={summary.total_fitness}\n"
    )
    if summary.bethel_timing_us is not None:
        sink.write(f"allocation kernel: median {summary.bethel_timing_us:.1f} us/call\n")


_FLAG_TYPES = {
    "frame": str, "targets": str, "aux": str, "domain-col": str, "id-col": str,
    "constraints": str, "cv": str, "algorithm": str, "pop": int, "iters": int,
    "elitism": float, "mutation": float, "inversion": float, "min-units": int,
    "seed": int, "jobs": int, "stop-at": float, "out": str, "delimiter": str,
    "eval-reps": int, "bench": int, "plot": bool,
}


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` file mirroring the CLI flags."""
    values = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in _FLAG_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            caster = _FLAG_TYPES[key]
            if caster is bool:
                values[key] = value.strip().lower() in ("1", "true", "yes")
            else:
                values[key] = caster(value.strip())
    return values


def _split_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="strataga",
        description="Joint stratification and minimum sample allocation search.",
    )
    p.add_argument("--config", help="flat key=value config file; flags override it")
    p.add_argument("--frame", help="input frame CSV path")
    p.add_argument("--targets", help="comma-separated target columns")
    p.add_argument("--aux", help="comma-separated auxiliary columns")
    p.add_argument("--domain-col", help="domain column name")
    p.add_argument("--id-col", help="optional id column name")
    p.add_argument("--constraints", help="CSV of per-domain CV limits (DOMAIN,CV1..CVG)")
    p.add_argument("--cv", action="append", type=float,
                   help="CV limit; repeat per target, or give once for all targets")
    p.add_argument("--algorithm", choices=ALGORITHMS)
    p.add_argument("--pop", type=int, help="population size")
    p.add_argument("--iters", type=int, help="number of generations")
    p.add_argument("--elitism", type=float, help="elitism rate in [0,1)")
    p.add_argument("--mutation", type=float, help="per-gene mutation probability")
    p.add_argument("--inversion", type=float, help="per-individual inversion probability")
    p.add_argument("--min-units", type=int, help="minimum sample per stratum")
    p.add_argument("--seed", type=int, help="root RNG seed")
    p.add_argument("--jobs", type=int, help="parallel domains")
    p.add_argument("--stop-at", type=float, help="stop once best fitness reaches this")
    p.add_argument("--out", help="output directory")
    p.add_argument("--delimiter", help="field separator, e.g. ',' or 'tab'")
    p.add_argument("--eval-reps", type=int,
                   help="validate each design with this many repeated samples")
    p.add_argument("--bench", type=int, dest="bench",
                   help="time the allocation kernel this many times per domain")
    p.add_argument("--plot", action="store_true", default=None,
                   help="also render convergence plots (requires matplotlib)")
    return p


_DEFAULTS = {
    "algorithm": "gga", "pop": 20, "iters": 400, "elitism": 0.2,
    "mutation": 0.05, "inversion": 0.05, "min-units": 2, "seed": 0,
    "jobs": 1, "out": "out", "delimiter": ",", "eval-reps": 0, "bench": 0,
    "plot": False,
}


def config_from_args(argv) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    merged = dict(_DEFAULTS)
    if args.get("config"):
        merged.update(read_config_file(args["config"]))
    for key, value in args.items():
        if key == "config" or value is None:
            continue
        merged[key.replace("_", "-")] = value

    for required in ("frame", "targets", "aux", "domain-col"):
        if required not in merged or not merged[required]:
            raise ValueError(f"missing required option --{required}")

    schema = FrameSchema(
        target_columns=tuple(_split_list(merged["targets"])),
        aux_columns=tuple(_split_list(merged["aux"])),
        domain_column=merged["domain-col"],
        id_column=merged.get("id-col"),
    )
    n_targets = len(schema.target_columns)

    if merged.get("constraints"):
        table = pd.read_csv(merged["constraints"], dtype={0: str})
        limits = table.iloc[:, 1:].to_numpy(dtype=float)
        constraints = PrecisionConstraints(
            limits=limits, domains=tuple(table.iloc[:, 0].tolist())
        )
    else:
        cvs = merged.get("cv")
        if isinstance(cvs, str):
            cvs = [float(v) for v in _split_list(cvs)]
        if not cvs:
            raise ValueError("give --cv or --constraints")
        if len(cvs) == 1:
            cvs = cvs * n_targets
        if len(cvs) != n_targets:
            raise ValueError("--cv must be given once or once per target")
        constraints = PrecisionConstraints(limits=np.array([cvs]))

    delimiter = merged["delimiter"]
    if delimiter == "tab":
        delimiter = "\t"

    ga = GaConfig(
        pop_size=merged["pop"],
        iterations=merged["iters"],
        elitism_rate=merged["elitism"],
        mutation_prob=merged["mutation"],
        inversion_prob=merged["inversion"],
        stop_at=merged.get("stop-at"),
    )
    return RunConfig(
        frame_path=merged["frame"],
        schema=schema,
        constraints=constraints,
        ga=ga,
        alloc=AllocationSettings(min_units=merged["min-units"]),
        algorithm=merged["algorithm"],
        out_dir=merged["out"],
        seed=merged["seed"],
        jobs=merged["jobs"],
        delimiter=delimiter,
        eval_reps=merged["eval-reps"],
        bench_reps=merged["bench"],
        plot=bool(merged["plot"]),
    )


def main(argv=None) -> int:
    try:
        config = config_from_args(argv if argv is not None else sys.argv[1:])
        summary = run(config)
    except (StratagaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print_summary(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
