"""Command-line interface: grid generation, chain runs, oracles, analysis.

Exit codes: 0 success, 1 validation/guard failure, 2 usage error, 3 I/O error.
All randomness derives from a single 64-bit seed through a counter-based
Philox stream; chain i uses the stream jumped i times, so multi-chain runs
are reproducible regardless of scheduling.
"""

from __future__ import annotations

import json
import sys
from fractions import Fraction

import click
import numpy as np

from .chains import MEASURE_KINDS, CHAIN_KINDS, MeasureSpec, run_chain
from .diagnostics import (
    DEFAULT_SHARE_BIN_WIDTH,
    Histogram,
    autocorrelation,
    effective_sample_size,
    tv_distance,
)
from .graph import BalanceSpec, GraphError, WeightedGraph, load_graph, make_grid
from .marking import SamplerConfig


def _chain_rng(seed: int, chain_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed).jumped(chain_index))


def _load(path: str) -> WeightedGraph:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return load_graph(fh)
    except OSError as exc:
        raise click.ClickException(f"cannot read {path}: {exc}") from exc


def _spec(graph: WeightedGraph, k: int, epsilon, lower, upper) -> BalanceSpec:
    if epsilon is not None and (lower is not None or upper is not None):
        raise click.UsageError("give either --epsilon or --lower/--upper, not both")
    if epsilon is not None:
        spec = BalanceSpec.from_epsilon(k, Fraction(epsilon), graph.total_population)
    elif lower is not None and upper is not None:
        spec = BalanceSpec(k, Fraction(lower), Fraction(upper))
    else:
        raise click.UsageError("need --epsilon or both --lower and --upper")
    return spec.validate_for(graph)


@click.group()
def main():
    """Balanced spanning-tree walks for graph partition sampling."""


@main.command("grid")
@click.option("--rows", type=click.IntRange(min=1), required=True)
@click.option("--cols", type=click.IntRange(min=1), required=True)
@click.option("--pop", type=click.IntRange(min=1), default=1, show_default=True,
              help="population per vertex")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="output path (default stdout)")
def cmd_grid(rows, cols, pop, out):
    """Write a rows x cols lattice graph as JSON."""
    doc = make_grid(rows, cols, pop).to_json()
    if out is None:
        click.echo(doc)
        return
    try:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(doc + "\n")
    except OSError as exc:
        click.echo(f"error: cannot write {out}: {exc}", err=True)
        sys.exit(3)


@main.command("run")
@click.option("--graph", "graph_path", type=click.Path(dir_okay=False), required=True)
@click.option("--k", type=click.IntRange(min=1), required=True)
@click.option("--epsilon", default=None, help="symmetric tolerance (fraction of total)")
@click.option("--lower", default=None, help="lower district weight bound")
@click.option("--upper", default=None, help="upper district weight bound")
@click.option("--chain", type=click.Choice(CHAIN_KINDS), default="bud-marked",
              show_default=True)
@click.option("--measure", type=click.Choice([m for m in MEASURE_KINDS if m != "custom"]),
              default="uniform-splittable", show_default=True)
@click.option("--steps", type=click.IntRange(min=0), required=True)
@click.option("--record-every", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--d", type=click.IntRange(min=0), default=0, show_default=True,
              help="re-marking neighborhood radius")
@click.option("--p", type=float, default=0.25, show_default=True,
              help="branch-contraction probability")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--init", type=click.Choice(["rejection", "bisection"]),
              default="rejection", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True,
              help="trace output path (JSON lines); chain i>0 appends .chainI")
@click.option("--chains", "n_chains", type=click.IntRange(min=1), default=1,
              show_default=True)
@click.option("--assignment/--no-assignment", default=False,
              help="include the district assignment in every record")
def cmd_run(graph_path, k, epsilon, lower, upper, chain, measure, steps,
            record_every, d, p, seed, init, out, n_chains, assignment):
    """Run one or more chains and write trace files plus a summary."""
    graph = _load(graph_path)
    try:
        spec = _spec(graph, k, epsilon, lower, upper)
        config = SamplerConfig(p=Fraction(p).limit_denominator(10**6))
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc

    jobs = []
    for i in range(n_chains):
        path = out if i == 0 else f"{out}.chain{i}"
        jobs.append((i, path))
    summaries = []
    try:
        if n_chains == 1:
            summaries.append(_run_one(graph, spec, measure, steps, record_every,
                                      d, config, seed, 0, out, chain, init,
                                      assignment))
        else:
            import concurrent.futures as cf

            with cf.ProcessPoolExecutor(max_workers=n_chains) as pool:
                futures = [
                    pool.submit(_run_one, graph, spec, measure, steps,
                                record_every, d, config, seed, i, path, chain,
                                init, assignment)
                    for i, path in jobs
                ]
                summaries = [f.result() for f in futures]
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    click.echo(json.dumps({"chains": summaries}, indent=2))


def _run_one(graph, spec, measure, steps, record_every, d, config, seed,
             chain_index, path, chain, init, assignment):
    rng = _chain_rng(seed, chain_index)
    with open(path, "w", encoding="utf-8") as fh:
        summary = run_chain(graph, spec, MeasureSpec(measure), steps,
                            record_every=record_every, d=d, config=config,
                            rng=rng, sink=fh, chain=chain, init=init,
                            include_assignment=assignment)
    summary["chain_index"] = chain_index
    summary["trace"] = path
    return summary


@main.command("enumerate")
@click.option("--graph", "graph_path", type=click.Path(dir_okay=False), required=True)
@click.option("--k", type=click.IntRange(min=1), required=True)
@click.option("--epsilon", default=None)
@click.option("--lower", default=None)
@click.option("--upper", default=None)
@click.option("--what", type=click.Choice(["partitions", "splittable-count",
                                           "marked-sets"]), required=True)
@click.option("--full", is_flag=True, help="include full state lists")
def cmd_enumerate(graph_path, k, epsilon, lower, upper, what, full):
    """Exact enumeration on small instances (hard size guards)."""
    from .oracle import (
        OracleGuardError,
        count_splittable_trees,
        enumerate_marked_sets,
        enumerate_partitions,
        splittable_spanning_trees,
    )
    from .trees import count_spanning_trees_subgraph

    graph = _load(graph_path)
    try:
        spec = _spec(graph, k, epsilon, lower, upper)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    try:
        if what == "partitions":
            parts = enumerate_partitions(graph, spec)
            doc = {"partitions": len(parts)}
            if full:
                doc["list"] = [
                    [[graph.ids[v] for v in members] for members in p.districts()]
                    for p in parts
                ]
        elif what == "splittable-count":
            doc = {
                "splittable_trees": str(count_splittable_trees(graph, spec)),
                "spanning_trees": str(
                    count_spanning_trees_subgraph(graph, range(graph.n))
                ),
            }
        else:
            trees = splittable_spanning_trees(graph, spec)
            total = 0
            listing = []
            for t in trees:
                sets = enumerate_marked_sets(t, spec, spec.k)
                total += len(sets)
                if full:
                    listing.append({
                        "tree": [[graph.ids[a], graph.ids[b]] for a, b in t.edges],
                        "marked_sets": [
                            [[graph.ids[a], graph.ids[b]] for a, b in sorted(m)]
                            for m in sets
                        ],
                    })
            doc = {"splittable_trees": str(len(trees)), "marked_trees": str(total)}
            if full:
                doc["list"] = listing
    except OracleGuardError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(json.dumps(doc, indent=2))


@main.command("analyze")
@click.argument("traces", nargs=-1, required=True,
                type=click.Path(dir_okay=False, exists=True))
@click.option("--observable", default="cut_edges", show_default=True,
              help="cut_edges | tree_diameter | iso:<rank> | share:<attr>:<rank>")
@click.option("--max-lag", type=click.IntRange(min=1), default=100, show_default=True)
@click.option("--bin-width", type=float, default=None,
              help="histogram bin width (default 1.0; 0.002 for shares)")
def cmd_analyze(traces, observable, max_lag, bin_width):
    """Summarize JSONL traces: autocorrelation, ESS, pairwise TV."""
    series = []
    try:
        for path in traces:
            values = []
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        values.append(_extract(json.loads(line), observable))
            series.append(values)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)
    except (KeyError, ValueError) as exc:
        raise click.UsageError(f"cannot extract {observable!r}: {exc}") from exc

    if bin_width is None:
        bin_width = DEFAULT_SHARE_BIN_WIDTH if observable.startswith("share:") else 1.0
    report = {"observable": observable, "traces": []}
    hists = []
    for path, values in zip(traces, series):
        lag = min(max_lag, len(values) - 1)
        rho = autocorrelation(values, lag)
        try:
            ess = effective_sample_size(values)
        except Exception:
            ess = None
        report["traces"].append({
            "path": path,
            "count": len(values),
            "autocorrelation": [round(float(r), 6) for r in rho],
            "ess": ess,
        })
        hists.append(Histogram.from_values(values, bin_width))
    tv = {}
    for i in range(len(traces)):
        for j in range(i + 1, len(traces)):
            tv[f"{i},{j}"] = tv_distance(hists[i], hists[j])
    report["pairwise_tv"] = tv
    click.echo(json.dumps(report, indent=2))


def _extract(record: dict, observable: str):
    obs = record["obs"]
    if observable in ("cut_edges", "tree_diameter"):
        value = obs[observable]
        if value is None:
            raise ValueError(f"{observable} not recorded for this chain kind")
        return value
    if observable.startswith("iso:"):
        return obs["iso"][int(observable.split(":")[1])]
    if observable.startswith("share:"):
        _, attr, rank = observable.split(":")
        return obs["shares"][attr][int(rank)]
    raise ValueError(f"unknown observable {observable!r}")


@main.command("validate")
@click.option("--level", type=click.Choice(["fast", "full"]), default="fast",
              show_default=True)
def cmd_validate(level):
    """Run the tiered self-checks; nonzero exit on any failure."""
    from .validation import run_checks

    results = run_checks(level)
    failed = False
    for r in results:
        click.echo(r.line())
        failed = failed or not r.passed
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
