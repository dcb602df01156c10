"""Experiment driver: parse a JSON config, run a solver, write artifacts.

Every run writes its numerical artifacts atomically (temp file + rename)
plus a manifest recording the config hash, seed, library versions, and
wall time. Identical config and seed reproduce byte-identical CSV/JSON
artifacts.

Exit codes: 0 success, 2 config error, 3 solver failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .apps import (action_assignment, average_linkage_cluster,
                   bimodal_clustering_scene, dissimilarity_matrix,
                   euclidean_assignment, euclidean_transport_cost,
                   ring_matching_scene, rotation_truth_accuracy, subsample,
                   transport_matching)
from .chebyshev import path_state
from .configs import (ConfigError, Section, build_density,
                      build_pairwise_config, build_transport_config,
                      point, point_list)
from .density import StandardGaussian
from .errors import ActionOTError
from .pairwise import solve_pairwise
from .quadrature import gauss_legendre
from .seeding import rng_for
from .shooting import shoot_bvp
from .transport import solve_transport

COMMANDS = ("pairwise", "validate", "transport", "cluster", "match",
            "density-grid")


def _fmt(value) -> str:
    # repr of a float is its shortest round-trip form: deterministic.
    return repr(float(value))


def _csv_bytes(header, rows) -> bytes:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v)
                              for v in row))
    return ("\n".join(lines) + "\n").encode("utf-8")


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def _set_override(config: dict, dotted: str, raw: str) -> None:
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    keys = dotted.split(".")
    node = config
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError("override path crosses a non-object", dotted)
    node[keys[-1]] = value


def _sample_rows(path, n):
    ts = np.linspace(0.0, 1.0, n)
    w, _ = path_state(path, ts)
    return [[float(t), float(x), float(y)] for t, (x, y) in zip(ts, w)]


def _transport_artifacts(result, x0, x1, prefix, path_samples):
    endpoints_rows = []
    for j, p in enumerate(result.paths):
        endpoints_rows.append([j, float(x0[j, 0]), float(x0[j, 1]),
                               float(x1[j, 0]), float(x1[j, 1]),
                               float(p.w0[0]), float(p.w0[1]),
                               float(p.w1[0]), float(p.w1[1])])
    trace_rows = [[int(r[0]), float(r[1]), float(r[2]), float(r[3]), float(r[4])]
                  for r in result.trace]
    paths_obj = {
        "paths": [p.to_json() for p in result.paths],
        "sampled": [_sample_rows(p, path_samples) for p in result.paths],
    }
    summary = {
        "total_cost": result.total_cost,
        "objective": result.objective,
        "penalty0": result.penalty0,
        "penalty1": result.penalty1,
        "iterations": result.iterations,
        "final_grad_norm": result.final_grad_norm,
        "lambda0": result.lambda0,
        "lambda1": result.lambda1,
    }
    return {
        f"{prefix}_endpoints.csv": _csv_bytes(
            ["j", "x0", "y0", "x1", "y1", "w0x", "w0y", "w1x", "w1y"],
            endpoints_rows),
        f"{prefix}_trace.csv": _csv_bytes(
            ["iter", "S_dist", "penalty0", "penalty1", "J"], trace_rows),
        f"{prefix}_paths.json": _json_bytes(paths_obj),
        f"{prefix}_summary.json": _json_bytes(summary),
    }


def run_pairwise(root: Section, seed: int) -> dict:
    model = build_density(root.section("density"))
    cfg = build_pairwise_config(root.section("solver", default_empty=True))
    x0 = point(root.get("x0", list), "x0")
    x1 = point(root.get("x1", list), "x1")
    n_samples = root.get("sample_points", int, 201, positive=True)
    root.finish()

    res = solve_pairwise(x0, x1, model, cfg)
    payload = {
        "action": res.action,
        "objective": res.objective,
        "iterations": res.iterations,
        "final_grad_norm": res.final_grad_norm,
        "path": res.path.to_json(),
        "sampled_points": _sample_rows(res.path, n_samples),
    }
    return {"pairwise_result.json": _json_bytes(payload)}


def run_validate(root: Section, seed: int) -> dict:
    dsec = root.section("density", default_empty=True)
    if dsec.has("kind"):
        model = build_density(dsec)
        if not isinstance(model, StandardGaussian):
            raise ConfigError("the validation oracle covers the standard "
                              "Gaussian background only", "density.kind")
    else:
        dsec.finish()
        model = build_density(Section({"kind": "gaussian"}, "density"))
    cfg = build_pairwise_config(root.section("solver", default_empty=True))
    if cfg.alpha != 1.0:
        raise ConfigError("the validation oracle is derived for alpha = 1",
                          "solver.alpha")
    ssec = root.section("shooting", default_empty=True)
    eps = ssec.get("eps", float, 1e-8, positive=True)
    rtol = ssec.get("rtol", float, 1e-10, positive=True)
    atol = ssec.get("atol", float, 1e-10, positive=True)
    max_evals = ssec.get("max_evals", int, 10000, positive=True)
    ssec.finish()
    pairs_raw = root.get("pairs", list)
    n_samples = root.get("sample_points", int, 401, positive=True)
    root.finish()

    rule = gauss_legendre(200, 0.0, 1.0)
    artifacts = {}
    summary = []
    for idx, pair in enumerate(pairs_raw):
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ConfigError("each pair must be [x0, x1]", f"pairs[{idx}]")
        x0 = point(pair[0], f"pairs[{idx}][0]")
        x1 = point(pair[1], f"pairs[{idx}][1]")
        res = solve_pairwise(x0, x1, model, cfg)
        shot = shoot_bvp(x0, x1, eps=eps, max_evals=max_evals,
                         rtol=rtol, atol=atol)
        ts = np.linspace(0.0, 1.0, n_samples)
        w_cheb, _ = path_state(res.path, ts)
        w_el = shot.trajectory.sample(ts)
        sup = float(np.max(np.linalg.norm(w_cheb - w_el, axis=1)))

        ys = shot.trajectory.sol(rule.nodes)
        w = ys[:2].T
        wd = ys[2:].T
        lvals = 0.5 * np.sum(wd * wd, axis=1) * np.exp(0.5 * np.sum(w * w, axis=1))
        action_el = float(rule.weights @ lvals)

        rows = [[float(t), float(c[0]), float(c[1]), float(e[0]), float(e[1])]
                for t, c, e in zip(ts, w_cheb, w_el)]
        artifacts[f"validate_pair_{idx:02d}.csv"] = _csv_bytes(
            ["t", "x_cheb", "y_cheb", "x_el", "y_el"], rows)
        summary.append({
            "pair": idx,
            "sup_deviation": sup,
            "action_chebyshev": res.action,
            "action_euler_lagrange": action_el,
            "action_rel_difference": abs(res.action - action_el) / abs(action_el),
            "terminal_mismatch": shot.terminal_mismatch,
            "search_evals": shot.search_evals,
        })
    artifacts["validate_summary.json"] = _json_bytes({"pairs": summary})
    return artifacts


def _load_transport_data(root: Section, seed: int):
    dsec = root.section("data")
    kind = dsec.get("kind", str)
    if kind == "inline":
        x0 = point_list(dsec.get("x0", list), "data.x0")
        x1 = point_list(dsec.get("x1", list), "data.x1")
    elif kind == "ring-pair":
        m = dsec.get("m", int, 30, positive=True)
        sigma = dsec.get("sigma", float, 0.15, positive=True)
        z0 = dsec.get("z0", float, 0.0)
        z1 = dsec.get("z1", float, 2.0 * np.pi / 3.0)
        rng0 = rng_for(seed, "data-x0")
        rng1 = rng_for(seed, "data-x1")
        x0 = np.array([np.cos(z0), np.sin(z0)]) + sigma * rng0.standard_normal((m, 2))
        x1 = np.array([np.cos(z1), np.sin(z1)]) + sigma * rng1.standard_normal((m, 2))
    else:
        raise ConfigError(f"unknown data kind {kind!r}", "data.kind")
    dsec.finish()
    if x0.shape != x1.shape:
        raise ConfigError("x0 and x1 must have the same shape", "data")
    return x0, x1


def run_transport(root: Section, seed: int) -> dict:
    model = build_density(root.section("density"))
    cfg = build_transport_config(root.section("transport", default_empty=True), seed)
    x0, x1 = _load_transport_data(root, seed)
    init_pairing = root.get("init_pairing", str, "index")
    path_samples = root.get("path_samples", int, 101, positive=True)
    root.finish()
    if init_pairing not in ("index", "chord-action", "action"):
        raise ConfigError("init_pairing must be index, chord-action or action",
                          "init_pairing")

    if init_pairing == "index":
        x1_work = x1
    else:
        kwargs = {"n_cheb": 2, "max_iters": 0} if init_pairing == "chord-action" else {}
        perm = action_assignment(x0, x1, model, alpha=cfg.alpha, **kwargs)
        x1_work = x1[perm]
    result = solve_transport(x0, x1_work, model, cfg)
    return _transport_artifacts(result, x0, x1_work, "transport", path_samples)


def run_cluster(root: Section, seed: int) -> dict:
    ssec = root.section("scene")
    kind = ssec.get("kind", str)
    intended = None
    if kind == "bimodal":
        model, clouds, intended = bimodal_clustering_scene(
            seed=seed,
            n_per_cloud=ssec.get("n_per_cloud", int, 30, positive=True),
            mode_x=ssec.get("mode_x", float, 0.8, positive=True),
            mode_sigma=ssec.get("mode_sigma", float, 0.5, positive=True),
            cloud_dy=ssec.get("cloud_dy", float, 0.9, positive=True),
            cloud_sigma=ssec.get("cloud_sigma", float, 0.15, positive=True))
        ssec.finish()
    elif kind == "inline":
        model = build_density(ssec.section("density"))
        clouds = [point_list(c, f"scene.clouds[{i}]")
                  for i, c in enumerate(ssec.get("clouds", list))]
        ssec.finish()
    else:
        raise ConfigError(f"unknown scene kind {kind!r}", "scene.kind")
    cfg = build_transport_config(root.section("transport", default_empty=True), seed)
    k = root.get("k", int, 20, positive=True)
    n_clusters = root.get("n_clusters", int, 2, positive=True)
    root.finish()

    dm = dissimilarity_matrix(clouds, model, cfg, k)
    labels_action = average_linkage_cluster(dm.d_sym, n_clusters)

    subs = [subsample(c, k, rng_for(cfg.seed, f"dissimilarity-sub:{g}"))
            for g, c in enumerate(clouds)]
    n = len(clouds)
    d_euc = np.zeros((n, n))
    for g in range(n):
        for h in range(n):
            if g != h:
                d_euc[g, h] = euclidean_transport_cost(subs[g], subs[h])
    d_euc = 0.5 * (d_euc + d_euc.T)
    labels_euclidean = average_linkage_cluster(d_euc, n_clusters)

    d_rows = [[g, h, float(dm.d[g, h]), float(dm.d_sym[g, h]), float(d_euc[g, h])]
              for g in range(n) for h in range(n)]
    labels_obj = {
        "action_labels": labels_action.tolist(),
        "euclidean_labels": labels_euclidean.tolist(),
    }
    if intended is not None:
        labels_obj["intended_labels"] = intended.tolist()
    return {
        "cluster_dissimilarity.csv": _csv_bytes(
            ["g", "h", "D", "D_sym", "D_euclidean"], d_rows),
        "cluster_labels.json": _json_bytes(labels_obj),
        "cluster_summary.json": _json_bytes({
            "provenance": dm.provenance,
            "k": k,
            "n_clusters": n_clusters}),
    }


def run_match(root: Section, seed: int) -> dict:
    ssec = root.section("scene")
    kind = ssec.get("kind", str)
    if kind != "ring-rotation":
        raise ConfigError(f"unknown scene kind {kind!r}", "scene.kind")
    m = ssec.get("m", int, 30, positive=True)
    sigma = ssec.get("sigma", float, 0.15, positive=True)
    z0 = ssec.get("z0", float, 0.0)
    delta_z = ssec.get("delta_z", float, 2.0 * np.pi / 3.0)
    shuffle = ssec.get("shuffle", bool, True)
    ssec.finish()
    model = build_density(root.section("density"))
    cfg = build_transport_config(root.section("transport", default_empty=True), seed)
    init_pairing = root.get("init_pairing", str, "chord-action")
    tol_angle = root.get("tol_angle", float, 0.05)
    root.finish()

    x0, x1, truth = ring_matching_scene(seed=seed, m=m, sigma=sigma, z0=z0,
                                        delta_z=delta_z, shuffle=shuffle)
    report = transport_matching(x0, x1, model, cfg, delta_z=delta_z,
                                init_pairing=init_pairing)
    rows = [[i, int(report.pairs[i]), int(report.baseline_pairs[i]), int(truth[i])]
            for i in range(m)]
    summary = {
        "accuracy": report.accuracy_vs_truth,
        "baseline_accuracy": report.baseline_accuracy,
        "accuracy_tol_angle": rotation_truth_accuracy(
            x0, x1, delta_z, report.pairs, tol_angle=tol_angle),
        "baseline_accuracy_tol_angle": rotation_truth_accuracy(
            x0, x1, delta_z, report.baseline_pairs, tol_angle=tol_angle),
        "tol_angle": tol_angle,
        "collisions": report.collisions,
        "penalty0": report.result.penalty0,
        "penalty1": report.result.penalty1,
        "total_cost": report.result.total_cost,
        "iterations": report.result.iterations,
    }
    return {
        "match_pairing.csv": _csv_bytes(["i", "j_method", "j_baseline", "j_truth"], rows),
        "match_summary.json": _json_bytes(summary),
    }


def run_density_grid(root: Section, seed: int) -> dict:
    model = build_density(root.section("density"))
    gsec = root.section("grid", default_empty=True)
    x_min = gsec.get("x_min", float, -1.6)
    x_max = gsec.get("x_max", float, 1.6)
    y_min = gsec.get("y_min", float, -1.6)
    y_max = gsec.get("y_max", float, 1.6)
    n = gsec.get("n", int, 200, positive=True)
    gsec.finish()
    root.finish()
    if not (x_min < x_max and y_min < y_max):
        raise ConfigError("grid bounds must satisfy min < max", "grid")

    xs = np.linspace(x_min, x_max, n)
    ys = np.linspace(y_min, y_max, n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    rho = model.density(pts)
    rows = [[float(p[0]), float(p[1]), float(r), float(r ** 0.2)]
            for p, r in zip(pts, rho)]
    return {"density_grid.csv": _csv_bytes(["x", "y", "rho", "rho_pow_0.2"], rows)}


_RUNNERS = {
    "pairwise": run_pairwise,
    "validate": run_validate,
    "transport": run_transport,
    "cluster": run_cluster,
    "match": run_match,
    "density-grid": run_density_grid,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="action-ot",
        description="Density-weighted minimal-action optimal transport driver")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON config file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config's seed")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (dotted path, JSON value)")
    args = parser.parse_args(argv)

    started = time.time()
    config_path = Path(args.config)
    try:
        raw_bytes = config_path.read_bytes()
    except OSError as exc:
        print(f"config error: cannot read {config_path}: {exc}", file=sys.stderr)
        return 2

    try:
        try:
            config = json.loads(raw_bytes.decode("utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON (line {exc.lineno}, column {exc.colno}): "
                              f"{exc.msg}")
        if not isinstance(config, dict):
            raise ConfigError("top level must be an object")
        for override in args.set:
            if "=" not in override:
                raise ConfigError(f"--set needs KEY=VALUE, got {override!r}")
            dotted, raw = override.split("=", 1)
            _set_override(config, dotted, raw)

        root = Section(config)
        seed = root.get("seed", int, 0)
        if args.seed is not None:
            seed = args.seed
        artifacts = _RUNNERS[args.command](root, seed)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except ActionOTError as exc:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        snapshot_path = out_dir / "failure_snapshot.json"
        snapshot = {"error": str(exc),
                    "snapshot": getattr(exc, "snapshot", {}) or {}}
        _write_atomic(snapshot_path, _json_bytes(snapshot))
        print(f"solver failure: {exc} (snapshot: {snapshot_path})", file=sys.stderr)
        return 3

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    digests = {}
    for name, data in artifacts.items():
        _write_atomic(out_dir / name, data)
        digests[name] = hashlib.sha256(data).hexdigest()
    manifest = {
        "command": args.command,
        "config_sha256": hashlib.sha256(raw_bytes).hexdigest(),
        "overrides": list(args.set),
        "seed": seed,
        "versions": {
            "action_ot": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
        },
        "artifacts": digests,
        "wall_time_s": time.time() - started,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    _write_atomic(out_dir / "manifest.json", _json_bytes(manifest))
    return 0


if __name__ == "__main__":
    sys.exit(main())
