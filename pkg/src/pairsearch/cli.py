"""Command-line front end.

Batch experiment suites run in-process; `serve` starts the HTTP service
that the browser UI (or any client) talks to. Every command accepts
--seed and, where it makes sense, --config pointing at a JSON file whose
keys mirror the experiment spec (command-line flags win on conflict).
"""
from __future__ import annotations

import dataclasses
import json

import click
import numpy as np

from .catalog import ObjectSet
from .embed import GaussianEmbedding
from .harness import (
    ExperimentSpec,
    gen_hypercube,
    pca_project,
    run_blind_suite,
    run_convergence_suite,
    run_embed_eval,
    run_scaling_suite,
    sample_triplets,
    standardize,
)
from .oracle import calibrate_sigma, measured_flip_rate


def _spec_from(config, **overrides) -> ExperimentSpec:
    spec = ExperimentSpec.from_json(config) if config else ExperimentSpec()
    valid = {f.name for f in dataclasses.fields(ExperimentSpec)}
    updates = {k: v for k, v in overrides.items() if v is not None and k in valid}
    return dataclasses.replace(spec, **updates)


@click.group()
def main():
    """Comparison-based search toolkit."""


@main.command()
@click.option("--n", type=int, required=True, help="number of objects")
@click.option("--d", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="output CSV path")
def gen(n, d, seed, out):
    """Generate a uniform-hypercube dataset CSV."""
    objects = gen_hypercube(n, d, seed=seed)
    objects.to_csv(out)
    click.echo(f"wrote {n} objects (d={d}) to {out}")


@main.command()
@click.option("--dataset", type=click.Path(exists=True), required=True)
@click.option("--flip-rate", type=float, default=0.10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--standardize/--no-standardize", "do_std", default=False,
              help="z-score feature columns before calibrating")
def calibrate(dataset, flip_rate, seed, do_std):
    """Find the answer-noise level hitting a target flip rate."""
    objects = ObjectSet.from_csv(dataset)
    if do_std:
        objects = standardize(objects)
    sigma = calibrate_sigma(objects.vectors, flip_rate, seed=seed)
    measured = measured_flip_rate(objects.vectors, sigma, seed=seed + 1)
    click.echo(f"sigma_eps = {sigma!r}")
    click.echo(f"measured flip rate = {measured:.4f} (target {flip_rate})")


@main.command("search-bench")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--n-grid", default=None, help="comma-separated object counts")
@click.option("--d", type=int, default=None)
@click.option("--strategies", default=None, help="comma list: gauss,ig,ec2,random")
@click.option("--episodes", type=int, default=None)
@click.option("--flip-rate", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
def search_bench(config, n_grid, d, strategies, episodes, flip_rate, seed, out):
    """Query/compute-complexity benchmark across strategies and sizes."""
    spec = _spec_from(
        config,
        n_grid=tuple(int(x) for x in n_grid.split(",")) if n_grid else None,
        d=d,
        strategies=tuple(strategies.split(",")) if strategies else None,
        episodes=episodes, flip_rate=flip_rate, seed=seed, out=out)
    _, summary = run_scaling_suite(spec)
    for (strategy, n), agg in sorted(summary.items()):
        click.echo(f"{strategy:>7} n={n:<7} mean queries {agg['mean_queries']:7.2f}  "
                   f"select {agg['mean_select_us']:9.1f} us  "
                   f"update {agg['mean_update_us']:7.1f} us")


@main.command("blind-bench")
@click.option("--config", type=click.Path(exists=True), default=None)
@click.option("--dataset", type=click.Path(exists=True), default=None)
@click.option("--n", "blind_n", type=int, default=None)
@click.option("--d", type=int, default=None)
@click.option("--episodes", "blind_episodes", type=int, default=None)
@click.option("--dim", "embed_dim", type=int, default=None)
@click.option("--modes", default=None, help="comma list of embedding modes")
@click.option("--schedule", default=None, help="comma-separated retrain episodes")
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(), default=None)
def blind_bench(config, dataset, blind_n, d, blind_episodes, embed_dim, modes,
                schedule, seed, out):
    """Blind-setting benchmark: search while learning the embedding."""
    spec = _spec_from(
        config, dataset=dataset, blind_n=blind_n, d=d,
        blind_episodes=blind_episodes, embed_dim=embed_dim,
        modes=tuple(modes.split(",")) if modes else None,
        schedule=tuple(int(x) for x in schedule.split(",")) if schedule else None,
        seed=seed, out=out)
    results = run_blind_suite(spec)
    for mode, res in results.items():
        final = res.window_means[-1]
        click.echo(f"{mode:>14}: final window mean {final:7.2f} queries "
                   f"({res.queries.size} episodes)")


@main.command()
@click.option("--x-t", type=float, default=3.0, show_default=True)
@click.option("--mu0", type=float, default=0.0, show_default=True)
@click.option("--sigma0sq", type=float, default=1.0, show_default=True)
@click.option("--steps", type=int, default=10000, show_default=True)
@click.option("--seeds", default="0,1,2,3,4", show_default=True)
@click.option("--stride", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def convergence(x_t, mu0, sigma0sq, steps, seeds, stride, out):
    """1-D dense-space recurrence trajectories."""
    seed_list = [int(s) for s in seeds.split(",")]
    trajectories = run_convergence_suite(x_t, mu0, sigma0sq, steps, seed_list,
                                         out=out, stride=stride)
    for seed, traj in trajectories.items():
        click.echo(f"seed {seed}: mu_final {traj.mu[-1]:.4f} "
                   f"sigma2_final {traj.sigma2[-1]:.3e}")


@main.command("embed-eval")
@click.option("--dataset", type=click.Path(exists=True), default=None,
              help="object CSV; triplets are sampled from it")
@click.option("--triplet-count", type=int, default=10000, show_default=True)
@click.option("--flip-rate", type=float, default=0.10, show_default=True)
@click.option("--dims", default="2,5,10", show_default=True)
@click.option("--folds", type=int, default=10, show_default=True)
@click.option("--epochs", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None)
def embed_eval(dataset, triplet_count, flip_rate, dims, folds, epochs, seed, out):
    """Cross-validated triplet accuracy of the embedding per dimension."""
    if dataset is None:
        raise click.UsageError("--dataset is required")
    objects = standardize(ObjectSet.from_csv(dataset))
    sigma = calibrate_sigma(objects.vectors, flip_rate, seed=seed)
    triplets = sample_triplets(objects, triplet_count, sigma, seed=seed)
    dim_list = [int(x) for x in dims.split(",")]
    rows = run_embed_eval(triplets, objects.n, dim_list, folds=folds,
                          epochs=epochs, seed=seed, out=out)
    by_dim: dict = {}
    for dim, _, acc in rows:
        by_dim.setdefault(dim, []).append(acc)
    for dim, accs in by_dim.items():
        click.echo(f"D={dim:<4} holdout accuracy {np.mean(accs):.4f} "
                   f"+/- {np.std(accs):.4f} over {folds} folds")


@main.command()
@click.option("--snapshot", type=click.Path(exists=True), required=True,
              help="embedding snapshot file")
@click.option("--k", type=int, default=2, show_default=True)
@click.option("--out", type=click.Path(), required=True)
def pca(snapshot, k, out):
    """Project embedding means onto their top-k principal components."""
    embedding = GaussianEmbedding.load(snapshot)
    coords = pca_project(embedding.nu, k=k)
    with open(out, "w") as fh:
        fh.write(",".join(["id"] + [f"pc{c + 1}" for c in range(k)]) + "\n")
        for i in range(coords.shape[0]):
            fh.write(",".join([str(i)] + [repr(float(x)) for x in coords[i]]) + "\n")
    click.echo(f"wrote {coords.shape[0]} x {k} projection to {out}")


@main.command()
@click.option("--dataset", type=click.Path(exists=True), required=True)
@click.option("--state-dir", type=click.Path(), default=None,
              help="directory for triplet log / embedding snapshots")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--k", type=int, default=4, show_default=True)
@click.option("--sigma-eps", type=float, default=1.0, show_default=True)
@click.option("--dim", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def serve(dataset, state_dir, host, port, k, sigma_eps, dim, seed):
    """Run the interactive search HTTP service."""
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(dataset=dataset, state_dir=state_dir, k=k,
                           sigma_eps=sigma_eps, embed_dim=dim, seed=seed)
    uvicorn.run(create_app(config), host=host, port=port)


if __name__ == "__main__":
    main()
