"""Command-line entry points for experiments, diagnostics, and verification.

Subcommands:

* ``run``     execute an experiment config and write CSV artifacts
* ``graphs``  print dependency sets and coupling-condition reports as JSON
* ``bounds``  print the sample-complexity calculators as JSON
* ``verify``  run the brute-force oracle suite, one pass/fail line per check
* ``bench``   per-iteration timing across agent counts

The output root defaults to $MALSPI_OUTPUT_ROOT, then the config's
``output_dir``, then ``./results``.
"""
from __future__ import annotations

import json
import logging
import os
from pathlib import Path

import click

from .bounds import bound_inputs_from_subsystem, sample_bound_direct, sample_bound_indirect
from .config import ExperimentConfig, load_config, parse_config
from .graphs import check_graphical_conditions, dependency_sets
from .policy_iteration import Architecture
from .runner import run_experiment, timing_benchmark, write_bench_csv
from .system import zero_policy
from .verify import run_all_checks

ENV_OUTPUT_ROOT = "MALSPI_OUTPUT_ROOT"


def _resolve_output(config: ExperimentConfig, override: str | None) -> Path:
    if override:
        return Path(override)
    if config.output_dir:
        return Path(config.output_dir)
    env = os.environ.get(ENV_OUTPUT_ROOT)
    return Path(env) if env else Path("results")


def _apply_overrides(config: ExperimentConfig, seeds, archs, n_agents) -> ExperimentConfig:
    data = config.to_json_dict()
    if seeds:
        data["seeds"] = [int(s) for s in seeds]
    if archs:
        data["architectures"] = list(archs)
    if n_agents is not None:
        data["n_agents"] = int(n_agents)
        if data["graphs"] is not None:
            raise click.ClickException(
                "--n-agents cannot override a config with explicit graphs"
            )
    return parse_config(data)


@click.group()
@click.option("--verbose", is_flag=True, help="Log per-run progress.")
def main(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(message)s",
    )


_seed_opt = click.option("--seed", "seeds", multiple=True, type=int, help="Override config seeds.")
_arch_opt = click.option(
    "--arch",
    "archs",
    multiple=True,
    type=click.Choice([a.value for a in Architecture]),
    help="Override config architectures.",
)
_n_opt = click.option("--n-agents", type=int, default=None, help="Override agent count.")


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", type=click.Path(file_okay=False), default=None)
@_seed_opt
@_arch_opt
@_n_opt
def run(config_path: str, output: str | None, seeds, archs, n_agents) -> None:
    """Run the experiment described by CONFIG_PATH."""
    config = _apply_overrides(load_config(config_path), seeds, archs, n_agents)
    out_dir = _resolve_output(config, output)
    table = run_experiment(config, out_dir)
    click.echo(f"wrote {len(table.curves)} curve rows to {out_dir}")
    for row in table.timing:
        mean = "NA" if row.mean_iteration_s is None else f"{row.mean_iteration_s:.4f}s"
        click.echo(f"  {row.architecture:>20}: mean iteration {mean}")


@main.command("graphs")
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--agent", type=int, default=None, help="Restrict the report to one agent.")
@_n_opt
def graphs_cmd(config_path: str, agent: int | None, n_agents) -> None:
    """Print dependency sets and coupling-condition reports as JSON."""
    config = _apply_overrides(load_config(config_path), (), (), n_agents)
    graphs = config.build_graphs()
    deps = dependency_sets(graphs)
    agents = [agent] if agent is not None else list(graphs.agents)
    report = {"n_agents": graphs.n_agents, "agents": {}}
    for i in agents:
        cond = check_graphical_conditions(graphs, i)
        partner_reports = {}
        for j in deps.gradient[i]:
            rep = check_graphical_conditions(graphs, i, j)
            partner_reports[str(j)] = {
                "cond_b": rep.cond_b,
                "value_set_strictly_contained": rep.value_set_strictly_contained,
            }
        report["agents"][str(i)] = {
            "reachability": list(deps.reach[i]),
            "value_set": list(deps.value[i]),
            "gradient_set": list(deps.gradient[i]),
            "direct_set": list(deps.direct[i]),
            "cond_a": cond.cond_a,
            "direct_set_proper": cond.direct_set_proper,
            "partners": partner_reports,
        }
    click.echo(json.dumps(report, indent=2))


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--agent", type=int, default=None, help="Restrict the report to one agent.")
@click.option("--epsilon", type=float, default=None, help="Target accuracy for sample counts.")
@click.option("--o-tilde", type=float, default=1.0, show_default=True,
              help="Multiplier standing in for the unidentified absolute constant.")
@_n_opt
def bounds(config_path: str, agent: int | None, epsilon: float | None, o_tilde: float, n_agents) -> None:
    """Print the direct/indirect sample-complexity calculators as JSON."""
    config = _apply_overrides(load_config(config_path), (), (), n_agents)
    system = config.build_system()
    graphs = system.graphs
    deps = dependency_sets(graphs)
    policy = zero_policy(graphs, system.n_x, system.n_u)
    agents = [agent] if agent is not None else list(graphs.agents)
    report = {}
    for i in agents:
        grad_set = deps.gradient[i]
        if not grad_set:
            report[str(i)] = {"note": "empty gradient set; nothing to estimate"}
            continue
        direct_inputs = bound_inputs_from_subsystem(
            system, policy, policy, deps.direct[i], grad_set,
            sigma_eta=config.sigma_eta, norm_sigma0=config.sigma0, o_tilde=o_tilde,
        )
        member_inputs = [
            bound_inputs_from_subsystem(
                system, policy, policy, deps.value[j], (j,),
                sigma_eta=config.sigma_eta, norm_sigma0=config.sigma0, o_tilde=o_tilde,
            )
            for j in grad_set
        ]
        report[str(i)] = {
            "direct_set": list(deps.direct[i]),
            "gradient_set": list(grad_set),
            "direct": sample_bound_direct(direct_inputs, epsilon=epsilon).to_dict(),
            "indirect": sample_bound_indirect(member_inputs, epsilon=epsilon).to_dict(),
        }
    click.echo(json.dumps(report, indent=2))


@main.command()
def verify() -> None:
    """Run the brute-force oracle suite; exits non-zero on any failure."""
    results = run_all_checks()
    failed = 0
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        if not result.passed:
            failed += 1
        click.echo(f"[{status}] {result.name}: {result.detail}")
    if failed:
        raise SystemExit(1)
    click.echo(f"all {len(results)} checks passed")


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--n-agents", "n_list", multiple=True, type=int, required=True,
              help="Agent counts to benchmark (repeatable).")
@_arch_opt
@click.option("--warmup", type=int, default=1, show_default=True)
@click.option("--measured", type=int, default=2, show_default=True)
@click.option("--t-mode", type=click.Choice(["fixed", "auto"]), default="fixed", show_default=True,
              help="'auto' raises the rollout length so full-set regressions stay determined.")
@click.option("--centralized-max-n", type=int, default=20, show_default=True)
@click.option("--output", type=click.Path(file_okay=False), default=None)
def bench(config_path: str, n_list, archs, warmup: int, measured: int, t_mode: str,
          centralized_max_n: int, output: str | None) -> None:
    """Measure per-iteration wall time across agent counts."""
    config = load_config(config_path)
    cells = timing_benchmark(
        config,
        list(n_list),
        architectures=list(archs) or None,
        warmup=warmup,
        measured=measured,
        t_mode=t_mode,
        centralized_max_n=centralized_max_n,
    )
    out_dir = _resolve_output(config, output)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_bench_csv(out_dir / "bench.csv", cells)
    for cell in cells:
        if cell.skipped:
            click.echo(f"  {cell.architecture:>20} N={cell.n_agents}: NA (skipped)")
        else:
            ratio = (
                "" if cell.ratio_vs_indirect is None
                else f" ratio_vs_indirect {cell.ratio_vs_indirect:.2f}"
            )
            click.echo(
                f"  {cell.architecture:>20} N={cell.n_agents}: "
                f"mean {cell.mean_iteration_s:.4f}s median {cell.median_iteration_s:.4f}s "
                f"(T={cell.t_rollout}){ratio}"
            )
    click.echo(f"wrote {out_dir / 'bench.csv'}")


if __name__ == "__main__":
    main()
