"""Command-line interface.

Subcommands: generate, propagate, detect, experiment, validate, plot.
Every artifact gets a sibling metadata record (resolved config, config
digest, seed, version) sufficient to reproduce it byte-for-byte.  Exit
codes: 0 success, 1 usage error, 2 numerical failure, 3 validation failure.
"""

from __future__ import annotations

import json
import logging
import secrets
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .errors import ConvergenceError, EigenSolverError, ThreatPropagationError, ValidationFailure
from .evaluation import RocCurve
from .experiment import (
    ExperimentConfig,
    hmmb_detection_config,
    run_experiment,
    sbm_detection_config,
)
from .generators import HmmbParams, SbmParams, default_hmmb_params, generate_hmmb, generate_sbm
from .io import (
    read_edges,
    read_observations,
    write_edges,
    write_meta,
    write_roc,
    write_scores,
    write_spacetime_scores,
    write_truth,
)
from .priors import PRIOR_KINDS, PriorSpec, compute_prior
from .spacetime import MODES, TimeGrid, assemble_spacetime, default_rate, reduce_to_vertex_scores, solve_spacetime
from .spatial import build_absorbing_chain, monte_carlo_threat, solve_harmonic
from .spectral import localized_modularity_scores, spectral_scores
from .svgplot import plot_roc
from .validate import run_suite

logger = logging.getLogger("threatprop")


@click.group()
@click.option("--log-level", default="warning", show_default=True,
              type=click.Choice(["debug", "info", "warning", "error"]))
def cli(log_level):
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, log_level.upper()),
                        format="%(levelname)s %(name)s: %(message)s")


def _resolve_seed(seed: int | None) -> int:
    if seed is None:
        seed = secrets.randbits(32)
        click.echo(f"derived seed {seed}", err=True)
    return seed


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read config {path}: {exc}") from exc


def _config_override(ctx, config_path, values: dict, keymap: dict[str, str]) -> dict:
    """Merge a JSON config under explicit command-line flags.

    ``keymap`` maps parameter names to (possibly dotted) config keys; a value
    from the file is used only where the flag was left at its default.
    """
    if not config_path:
        return values
    raw = _load_json(config_path)

    def lookup(key):
        node = raw
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return None
            node = node[part]
        return node

    merged = dict(values)
    for param, key in keymap.items():
        file_val = lookup(key)
        if file_val is None:
            continue
        src = ctx.get_parameter_source(param)
        if src is not None and src.name != "COMMANDLINE":
            merged[param] = file_val
    return merged


@cli.group()
def generate():
    """Draw a synthetic covert network."""


def _emit_network(net, out_dir: Path, config: dict, seed: int):
    out_dir.mkdir(parents=True, exist_ok=True)
    write_edges(out_dir / "edges.csv", net.graph)
    write_truth(out_dir / "truth.csv", net.graph, net.truth)
    write_meta(out_dir / "meta.json", config, seed, __version__)
    click.echo(f"wrote {out_dir}/edges.csv ({net.graph.size} interactions, "
               f"{int(net.truth.sum())} foreground of {net.graph.n})")


@generate.command("sbm")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON with sizes, block_probs, foreground, horizon.")
@click.option("--activity", type=float, default=2.0, show_default=True,
              help="Foreground density multiplier for the benchmark shape (ignored with --config).")
@click.option("--temporal", default="coordinated", show_default=True,
              type=click.Choice(["coordinated", "uniform", "none"]))
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def generate_sbm_cmd(config_path, activity, temporal, seed, out_dir):
    seed = _resolve_seed(seed)
    if config_path:
        raw = _load_json(config_path)
        params = SbmParams(
            sizes=tuple(raw["sizes"]),
            block_probs=np.asarray(raw["block_probs"], dtype=float),
            foreground=raw.get("foreground"),
            horizon=float(raw.get("horizon", 24.0)),
            shuffle=bool(raw.get("shuffle", True)),
        )
    else:
        params = sbm_detection_config(activity=activity).params
    net = generate_sbm(params, temporal=temporal, seed=seed)
    config = {"generator": "sbm", "sizes": list(params.sizes), "block_probs": params.block_probs,
              "foreground": params.foreground, "horizon": params.horizon, "temporal": temporal}
    _emit_network(net, Path(out_dir), config, seed)


@generate.command("hmmb")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON with the full parameter set.")
@click.option("--gamma-fg", type=float, default=1.0, show_default=True,
              help="Foreground coordination level for the default shape (ignored with --config).")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def generate_hmmb_cmd(config_path, gamma_fg, seed, out_dir):
    seed = _resolve_seed(seed)
    if config_path:
        raw = _load_json(config_path)
        params = HmmbParams(
            n=int(raw["n"]),
            communities=int(raw["communities"]),
            lifestyles=int(raw["lifestyles"]),
            phi=np.asarray(raw["phi"], dtype=float),
            concentration=np.asarray(raw["concentration"], dtype=float),
            block_support=np.asarray(raw["block_support"], dtype=float),
            block_strength=np.asarray(raw["block_strength"], dtype=float),
            gamma=np.asarray(raw["gamma"], dtype=float),
            alpha=float(raw.get("alpha", 2.8)),
            lam_min=float(raw.get("lam_min", 1.0)),
            horizon=float(raw.get("horizon", 24.0)),
            foreground_lifestyles=tuple(raw.get("foreground_lifestyles", ())),
        )
    else:
        params = default_hmmb_params(gamma_fg=gamma_fg)
    net = generate_hmmb(params, seed=seed)
    config = {"generator": "hmmb", "params": params}
    _emit_network(net, Path(out_dir), config, seed)


@cli.group()
def propagate():
    """Propagate observed threat through a graph."""


@propagate.command("spatial")
@click.option("--graph", "graph_path", type=click.Path(exists=True), required=True)
@click.option("--obs", "obs_path", type=click.Path(exists=True), required=True,
              help="CSV vertex,p")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON defaults (prior.kind, prior.psi0, tol, method, walks, seed); flags win.")
@click.option("--prior", default="dwtp", show_default=True, type=click.Choice(PRIOR_KINDS))
@click.option("--psi0", type=float, default=1.0, show_default=True, help="Uniform prior value.")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--method", default="harmonic", show_default=True,
              type=click.Choice(["harmonic", "mc", "direct", "bicgstab"]))
@click.option("--walks", type=int, default=10_000, show_default=True, help="Walks per vertex for --method mc.")
@click.option("--seed", type=int, default=None, help="Required for --method mc.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.pass_context
def propagate_spatial(ctx, graph_path, obs_path, config_path, prior, psi0, tol, method, walks, seed, out_path):
    cfg = _config_override(
        ctx, config_path,
        {"prior": prior, "psi0": psi0, "tol": tol, "method": method, "walks": walks, "seed": seed},
        {"prior": "prior.kind", "psi0": "prior.psi0", "tol": "tol", "method": "method",
         "walks": "walks", "seed": "seed"},
    )
    prior, psi0, tol = cfg["prior"], float(cfg["psi0"]), float(cfg["tol"])
    method, walks, seed = cfg["method"], int(cfg["walks"]), cfg["seed"]
    g = read_edges(graph_path)
    obs = read_observations(obs_path, g)
    psi = compute_prior(g, PriorSpec(prior, psi0=psi0), obs)
    if method == "mc":
        seed = _resolve_seed(seed)
        chain = build_absorbing_chain(g, psi, obs)
        theta = monte_carlo_threat(chain, walks, seed=seed).theta
    else:
        solver = "iterative" if method == "harmonic" else method
        theta = solve_harmonic(g, psi, obs, tol=tol, method=solver)
    write_scores(out_path, g, theta)
    write_meta(str(out_path) + ".meta.json",
               {"command": "propagate-spatial", "graph": str(graph_path), "obs": str(obs_path),
                "prior": prior, "psi0": psi0, "tol": tol, "method": method,
                "walks": walks if method == "mc" else None},
               seed, __version__)
    click.echo(f"wrote {out_path}")


@propagate.command("spacetime")
@click.option("--graph", "graph_path", type=click.Path(exists=True), required=True)
@click.option("--obs", "obs_path", type=click.Path(exists=True), required=True,
              help="CSV vertex,t,p (empty t broadcasts the cue)")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON defaults (dt, bins, lambda, variant, mode_default, prior.kind, tol); flags win.")
@click.option("--dt", type=float, default=None, help="Bin width; default from kernel accuracy.")
@click.option("--bins", type=int, default=None, help="Bin count override.")
@click.option("--lambda", "lam", type=float, default=None,
              help="Kernel decay rate; default ln2 / median interaction gap.")
@click.option("--variant", default="coordinated", show_default=True,
              type=click.Choice(["weighted", "coord", "coord-prior"]))
@click.option("--mode-default", default="clique", show_default=True, type=click.Choice(MODES),
              help="Temporal block for untimed edges.")
@click.option("--prior", default="dwtp", show_default=True, type=click.Choice(PRIOR_KINDS),
              help="Spatial prior for --variant coord-prior.")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--reduce", "reducer", default=None, type=click.Choice(["max", "mean"]),
              help="Also write per-vertex scores with this reducer.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.pass_context
def propagate_spacetime(ctx, graph_path, obs_path, config_path, dt, bins, lam, variant, mode_default,
                        prior, tol, reducer, out_path):
    cfg = _config_override(
        ctx, config_path,
        {"dt": dt, "bins": bins, "lam": lam, "variant": variant, "mode_default": mode_default,
         "prior": prior, "tol": tol, "reducer": reducer},
        {"dt": "dt", "bins": "bins", "lam": "lambda", "variant": "variant",
         "mode_default": "mode_default", "prior": "prior.kind", "tol": "tol", "reducer": "reduce"},
    )
    dt, bins, lam = cfg["dt"], cfg["bins"], cfg["lam"]
    variant, mode_default, prior = cfg["variant"], cfg["mode_default"], cfg["prior"]
    tol, reducer = float(cfg["tol"]), cfg["reducer"]
    g = read_edges(graph_path)
    obs = read_observations(obs_path, g)
    times = np.array([t for e in g.interactions if e.timestamped for t in (e.t_u, e.t_v)])
    obs_times = np.array([e.t for e in obs.entries if e.t is not None])
    all_times = np.concatenate([times, obs_times]) if obs_times.size else times
    if all_times.size == 0:
        raise click.UsageError("no timestamps anywhere: space-time propagation needs times")
    if lam is None:
        lam = default_rate(g, horizon=float(all_times.max() - all_times.min() or 1.0))
        click.echo(f"kernel rate {lam:.6g}", err=True)
    grid = TimeGrid.cover(all_times, dt=dt, lam=lam, nt=bins)
    sys_ = assemble_spacetime(g, grid, rates=lam, mode_default=mode_default)
    names = {"weighted": "weighted", "coord": "coordinated", "coord-prior": "coordinated-spatial"}
    variant_name = names.get(variant, variant)  # config files may use long names
    spatial_psi = compute_prior(g, PriorSpec(prior), obs) if variant == "coord-prior" else None
    theta = solve_spacetime(sys_, obs, variant=variant_name, spatial_psi=spatial_psi, tol=tol)
    write_spacetime_scores(out_path, g, theta, grid)
    if reducer:
        write_scores(Path(out_path).with_suffix(".vertex.csv"), g, reduce_to_vertex_scores(theta, reducer),
                     column="score")
    write_meta(str(out_path) + ".meta.json",
               {"command": "propagate-spacetime", "graph": str(graph_path), "obs": str(obs_path),
                "dt": grid.dt, "bins": grid.nt, "t0": grid.t0, "lambda": lam, "variant": variant,
                "mode_default": mode_default, "tol": tol, "reduce": reducer},
               None, __version__)
    click.echo(f"wrote {out_path}")


@cli.group()
def detect():
    """Uncued detection baselines."""


@detect.command("spec")
@click.option("--graph", "graph_path", type=click.Path(exists=True), required=True)
@click.option("--eigenvector", default="principal", show_default=True,
              help="principal | localized | integer index of the modularity eigenvector")
@click.option("--out", "out_path", type=click.Path(), required=True)
def detect_spec(graph_path, eigenvector, out_path):
    g = read_edges(graph_path)
    if eigenvector == "principal":
        scores = spectral_scores(g, "modularity")
    elif eigenvector == "localized":
        scores = localized_modularity_scores(g)
    else:
        try:
            idx = int(eigenvector)
        except ValueError:
            raise click.UsageError(f"bad eigenvector choice {eigenvector!r}") from None
        scores = spectral_scores(g, "modularity", index=idx)
    write_scores(out_path, g, scores, column="score")
    write_meta(str(out_path) + ".meta.json",
               {"command": "detect-spec", "graph": str(graph_path), "eigenvector": eigenvector},
               None, __version__)
    click.echo(f"wrote {out_path}")


def _experiment_config(raw: dict, trials, seed, threads) -> ExperimentConfig:
    kind = raw.get("kind", "sbm")
    kwargs = {}
    for key in ("trials", "seed", "time_bins", "rate", "variant", "reducer", "tol", "cue_value", "aggregate"):
        if key in raw:
            kwargs[key] = raw[key]
    if "detectors" in raw:
        kwargs["detectors"] = tuple(raw["detectors"])
    if kind == "sbm":
        cfg = sbm_detection_config(activity=float(raw.get("activity", 2.0)))
    elif kind == "hmmb":
        cfg = hmmb_detection_config(gamma_fg=float(raw.get("gamma_fg", 1.0)))
    else:
        raise click.UsageError(f"unknown experiment kind {kind!r}")
    from dataclasses import replace

    cfg = replace(cfg, **kwargs)
    if trials is not None:
        cfg = replace(cfg, trials=trials)
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if threads is not None:
        cfg = replace(cfg, threads=threads)
    return cfg


@cli.command("experiment")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True)
@click.option("--trials", type=int, default=None, help="Override trial count.")
@click.option("--seed", type=int, default=None)
@click.option("--threads", type=int, default=None, help="Worker threads (results are schedule-invariant).")
@click.option("--out", "out_dir", type=click.Path(), required=True)
def experiment_cmd(config_path, trials, seed, threads, out_dir):
    raw = _load_json(config_path)
    if seed is None and "seed" not in raw:
        seed = _resolve_seed(None)
    cfg = _experiment_config(raw, trials, seed, threads)
    result = run_experiment(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, curve in result.curves.items():
        write_roc(out / f"roc_{name}.csv", curve)
    summary = result.summary()
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    plot_roc(sorted(result.curves.items()), out / "roc.svg")
    # threads excluded: it must not change any artifact byte
    meta_cfg = {k: v for k, v in raw.items()}
    meta_cfg.update({"kind": cfg.kind, "trials": cfg.trials})
    write_meta(out / "meta.json", meta_cfg, cfg.seed, __version__)
    for name, stats in sorted(summary["detectors"].items()):
        click.echo(f"{name}: auc={stats['auc']:.4f} (se {stats['auc_se']:.4f})")
    click.echo(f"wrote {out_dir}")


@cli.command("validate")
@click.option("--level", default="fast", show_default=True, type=click.Choice(["fast", "full"]))
@click.option("--out", "out_path", type=click.Path(), default=None)
def validate_cmd(level, out_path):
    report = run_suite(level)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    click.echo(text, nl=False)
    if not report["passed"]:
        failed = [c["name"] for c in report["checks"] if not c["passed"]]
        raise ValidationFailure(f"checks failed: {', '.join(failed)}")


@cli.command("plot")
@click.argument("curves", nargs=-1, type=click.Path(exists=True), required=True)
@click.option("--labels", default=None, help="Comma-separated labels, one per curve file.")
@click.option("--out", "out_path", type=click.Path(), required=True)
def plot_cmd(curves, labels, out_path):
    names = labels.split(",") if labels else [Path(c).stem.removeprefix("roc_") for c in curves]
    if len(names) != len(curves):
        raise click.UsageError("label count does not match curve count")
    loaded = []
    for name, path in zip(names, curves):
        rows = np.genfromtxt(path, delimiter=",", skip_header=1)
        if rows.ndim != 2 or rows.shape[1] < 4:
            raise click.UsageError(f"{path}: expected threshold,pfa,pd,se rows")
        curve = RocCurve(
            thresholds=rows[:, 0], pfa=rows[:, 1], pd=rows[:, 2], se_pd=rows[:, 3],
            auc=float(np.trapezoid(rows[:, 2], rows[:, 1])),
            n_fg=1, n_bg=1,
        )
        loaded.append((name, curve))
    plot_roc(loaded, out_path)
    click.echo(f"wrote {out_path}")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except ValidationFailure as exc:
        click.echo(f"validation failure: {exc}", err=True)
        return 3
    except (ConvergenceError, EigenSolverError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return 2
    except ThreatPropagationError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
