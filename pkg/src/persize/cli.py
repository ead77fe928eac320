"""Command-line pipeline: prepare -> train -> calibrate -> recommend ->
evaluate, plus cross-domain allocate.

Every stage reads its inputs from the working directory, validates its
configuration (unknown keys are rejected), writes outputs atomically, and
echoes the configuration in a header comment for provenance. Reruns with
identical inputs and configuration produce byte-identical files; thread
count never changes output bytes because per-user results are ordered
before writing.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import calibrate as cal
from . import dataset, multidomain, scorer, selection, utility
from .util import atomic_write, parallel_map

_TOP_KEYS = {
    "data", "workdir", "seed", "K", "M", "measures", "mode", "kcore", "ratios",
    "threads", "exclude_val", "scores", "bpr", "calibration", "baselines",
    "dump_curves", "allocate", "exact_cap",
}
_BPR_KEYS = {"d", "epochs", "learning_rate", "weight_decay", "negatives_per_positive"}
_CAL_KEYS = {"max_iters", "tolerance", "divergence_bound", "subsample_negatives"}
_ALLOC_KEYS = {"budget", "domains", "allow_zero", "measure"}

_DEFAULTS = {
    "seed": 0,
    "K": selection.DEFAULT_K,
    "M": utility.DEFAULT_M,
    "measures": [m.value for m in utility.Measure],
    "mode": "approx",
    "kcore": 20,
    "ratios": list(dataset.SPLIT_RATIOS),
    "threads": 1,
    "exclude_val": True,
    "bpr": {},
    "calibration": {},
    "dump_curves": False,
    "exact_cap": utility.EXACT_MODE_CAP,
}

# Keys that must not influence output bytes (runtime knobs only).
_NO_ECHO = {"threads"}


class ConfigError(ValueError):
    pass


def _check_keys(given: dict, allowed: set, where: str) -> None:
    unknown = set(given) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(sorted(unknown))}")


def _load_config(args) -> dict:
    cfg = dict(_DEFAULTS)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        _check_keys(loaded, _TOP_KEYS, "config")
        cfg.update(loaded)
    for flag in ("workdir", "threads", "seed", "mode", "K", "M"):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[flag] = value
    if getattr(args, "measure", None):
        cfg["measures"] = args.measure
    _check_keys(cfg.get("bpr", {}), _BPR_KEYS, "bpr")
    _check_keys(cfg.get("calibration", {}), _CAL_KEYS, "calibration")
    if "allocate" in cfg:
        _check_keys(cfg["allocate"], _ALLOC_KEYS, "allocate")
    if "workdir" not in cfg:
        raise ConfigError("a working directory is required (--workdir or config)")
    if cfg["K"] < 1 or cfg["M"] < 1:
        raise ConfigError("K and M must be >= 1")
    if int(cfg["seed"]) != cfg["seed"]:
        raise ConfigError("seed must be an integer")
    if cfg["mode"] not in ("approx", "exact"):
        raise ConfigError(f"mode must be approx or exact, got {cfg['mode']!r}")
    bad = [m for m in cfg["measures"] if m not in {x.value for x in utility.Measure}]
    if bad:
        raise ConfigError(f"unknown measures: {', '.join(bad)}")
    return cfg


def _echo(cfg: dict, stage: str) -> str:
    shown = {k: v for k, v in cfg.items() if k not in _NO_ECHO}
    return f"# persize {stage} config={json.dumps(shown, sort_keys=True)}"


def _measures(cfg) -> list[utility.Measure]:
    return [utility.Measure(m) for m in cfg["measures"]]


def cmd_prepare(cfg: dict) -> int:
    workdir = Path(cfg["workdir"])
    if "data" not in cfg:
        raise ConfigError("prepare needs a 'data' path in the config")
    iset, id_map = dataset.load_interactions(cfg["data"])
    filtered = dataset.kcore_filter(iset, cfg["kcore"])
    if filtered.n_interactions == 0:
        raise ConfigError(f"{cfg['kcore']}-core filtering left no interactions")
    dense, kept_users, kept_items = dataset.compact(filtered)
    kept_user_set = set(kept_users.tolist())
    kept_item_set = set(kept_items.tolist())
    user_map = {orig: int(np.searchsorted(kept_users, idx))
                for orig, idx in id_map["users"].items() if idx in kept_user_set}
    item_map = {orig: int(np.searchsorted(kept_items, idx))
                for orig, idx in id_map["items"].items() if idx in kept_item_set}
    split_ds = dataset.split(dense, tuple(cfg["ratios"]), seed=cfg["seed"])
    dataset.save_split(
        split_ds, workdir, {"users": user_map, "items": item_map},
        header=_echo(cfg, "prepare"),
    )
    print(f"prepare: {len(dense.users)} users, {len(dense.items)} items, "
          f"{dense.n_interactions} interactions -> {workdir}")
    return 0


def cmd_train(cfg: dict) -> int:
    workdir = Path(cfg["workdir"])
    split_ds = dataset.load_split(workdir)
    if cfg.get("scores"):
        table = scorer.import_scores(cfg["scores"])
    else:
        bpr_cfg = scorer.BPRConfig(seed=cfg["seed"], **cfg["bpr"])
        model = scorer.train_bpr(split_ds.train, bpr_cfg)
        scorer.save_model(model, workdir / "model.bin")
        cands = (dataset.candidate_items(u, split_ds, exclude_val=False)
                 for u in sorted(split_ds.users.tolist()))
        table = scorer.build_score_table(model, cands)
    scorer.export_scores(table, workdir / "scores.tsv", header=_echo(cfg, "train"))
    print(f"train: scored {len(table)} users -> {workdir / 'scores.tsv'}")
    return 0


def _read_platt(path) -> tuple[dict, cal.PlattParams]:
    per_user = {}
    global_params = None
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            who, a, b, status = line.split("\t")
            if who == cal.GLOBAL_SCOPE:
                global_params = cal.PlattParams(float(a), float(b), cal.GLOBAL_SCOPE, status)
            else:
                per_user[int(who)] = cal.PlattParams(float(a), float(b), int(who), status)
    if global_params is None:
        raise ConfigError(f"{path}: missing {cal.GLOBAL_SCOPE} row")
    return per_user, global_params


def cmd_calibrate(cfg: dict) -> int:
    workdir = Path(cfg["workdir"])
    split_ds = dataset.load_split(workdir)
    table = scorer.import_scores(workdir / "scores.tsv")
    cal_cfg_in = dict(cfg["calibration"])
    subsample = cal_cfg_in.pop("subsample_negatives", None)
    fit_cfg = cal.FitConfig(**cal_cfg_in)
    calsets = []
    for u in table.users():
        items, _ = table.get(u)
        if len(items) == 0:
            continue
        calsets.append(cal.build_calibration_set(u, split_ds, table, subsample, cfg["seed"]))
    per_user, global_params = cal.fit_all_users(calsets, fit_cfg)

    lines = [_echo(cfg, "calibrate")]
    lines.append(f"{cal.GLOBAL_SCOPE}\t{global_params.a!r}\t{global_params.b!r}\t{global_params.fit_status}")
    for u in sorted(per_user):
        p = per_user[u]
        lines.append(f"{u}\t{p.a!r}\t{p.b!r}\t{p.fit_status}")
    atomic_write(workdir / "platt.tsv", "\n".join(lines) + "\n")

    pooled_user, pooled_global, pooled_labels = [], [], []
    for cs in calsets:
        pooled_user.append(cal.apply(per_user[cs.user], cs.scores))
        pooled_global.append(cal.apply(global_params, cs.scores))
        pooled_labels.append(cs.labels)
    labels = np.concatenate(pooled_labels)
    report_user = cal.ece_report(np.concatenate(pooled_user), labels)
    report_global = cal.ece_report(np.concatenate(pooled_global), labels)
    atomic_write(workdir / "ece_user.json", json.dumps(report_user, sort_keys=True, indent=1) + "\n")
    atomic_write(workdir / "ece_global.json", json.dumps(report_global, sort_keys=True, indent=1) + "\n")
    n_fallback = sum(1 for p in per_user.values() if p.fit_status == cal.FIT_FALLBACK)
    print(f"calibrate: {len(per_user)} users ({n_fallback} fell back to global), "
          f"ECE user-wise={report_user['ece']:.6f} global={report_global['ece']:.6f}")
    return 0


def _eval_table(cfg, split_ds, table):
    """Restrict each user's scored entries to the evaluation candidates."""
    if not cfg["exclude_val"]:
        return table
    entries = {}
    for u in table.users():
        items, vals = table.get(u)
        val_items = split_ds.val.items_of(u)
        keep = ~np.isin(items, val_items)
        entries[u] = (items[keep], vals[keep])
    return scorer.ScoreTable(entries)


def cmd_recommend(cfg: dict) -> int:
    workdir = Path(cfg["workdir"])
    split_ds = dataset.load_split(workdir)
    table = scorer.import_scores(workdir / "scores.tsv")
    per_user, _ = _read_platt(workdir / "platt.tsv")
    measures = _measures(cfg)
    eval_table = _eval_table(cfg, split_ds, table)
    users = [u for u in eval_table.users() if u in per_user]

    def worker(u):
        items, vals = eval_table.get(u)
        if len(items) == 0:
            return ("skip", u, "no candidates")
        order = np.lexsort((items, -vals))
        ranked_items = items[order]
        probs = cal.apply(per_user[u], vals[order])
        try:
            curves = utility.expected_curves(
                probs[: min(cfg["K"], len(probs))], probs, measures,
                M=cfg["M"], K=cfg["K"], mode=cfg["mode"], exact_cap=cfg["exact_cap"],
            )
        except ValueError as exc:
            return ("error", u, str(exc))
        recs = []
        for m in measures:
            k = selection.perk_select(curves[m])
            val = float(curves[m].values[k - 1])
            recs.append((u, m.value, k, val, ranked_items[:k]))
        return ("ok", u, recs, curves)

    results = parallel_map(worker, users, cfg["threads"])

    rec_lines = [_echo(cfg, "recommend")]
    curve_lines = [_echo(cfg, "recommend")]
    n_err = 0
    for res in results:
        if res[0] == "skip":
            rec_lines.append(f"# skipped user={res[1]}: {res[2]}")
        elif res[0] == "error":
            rec_lines.append(f"# error user={res[1]}: {res[2]}")
            n_err += 1
        else:
            _, u, recs, curves = res
            for user, mval, k, val, items in recs:
                joined = ",".join(str(i) for i in items)
                rec_lines.append(f"{user}\t{mval}\t{k}\t{val!r}\t{joined}")
            if cfg["dump_curves"]:
                for m in measures:
                    for kk, v in enumerate(curves[m].values, start=1):
                        curve_lines.append(f"{u}\t{m.value}\t{kk}\t{float(v)!r}")
    atomic_write(workdir / "recs.tsv", "\n".join(rec_lines) + "\n")
    if cfg["dump_curves"]:
        atomic_write(workdir / "curves.tsv", "\n".join(curve_lines) + "\n")
    print(f"recommend: wrote sizes for {len(users) - n_err} users -> {workdir / 'recs.tsv'}")
    if n_err:
        print(f"recommend: {n_err} users failed (see '# error' rows)", file=sys.stderr)
        return 2
    return 0


def cmd_evaluate(cfg: dict) -> int:
    workdir = Path(cfg["workdir"])
    split_ds = dataset.load_split(workdir)
    table = scorer.import_scores(workdir / "scores.tsv")
    per_user, _ = _read_platt(workdir / "platt.tsv")
    params = {u: p for u, p in per_user.items() if np.isfinite(p.a)}
    methods = cfg.get("baselines") or selection.default_methods(cfg["K"])
    report = selection.evaluate(
        split_ds, table, params,
        measures=_measures(cfg), methods=methods,
        K=cfg["K"], M=cfg["M"], mode=cfg["mode"], seed=cfg["seed"],
        exclude_val=cfg["exclude_val"], exact_cap=cfg["exact_cap"],
        threads=cfg["threads"],
    )
    lines = [_echo(cfg, "evaluate")]
    lines.extend(
        f"{u}\t{method}\t{measure}\t{k}\t{value!r}"
        for u, method, measure, k, value in report.per_user
    )
    atomic_write(workdir / "eval_per_user.tsv", "\n".join(lines) + "\n")
    payload = {
        "averages": report.averages,
        "n_users": report.n_users,
        "config": report.config,
    }
    atomic_write(workdir / "eval_report.json", json.dumps(payload, sort_keys=True, indent=1) + "\n")
    print(f"evaluate: {report.n_users} users x {len(methods)} methods -> "
          f"{workdir / 'eval_report.json'}")
    return 0


def _read_curves(path, measure: utility.Measure) -> dict:
    """Curve dump rows (user, measure, k, value) -> per-user value arrays."""
    rows: dict[int, dict[int, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            u, m, k, v = line.split("\t")
            if m != measure.value:
                continue
            rows.setdefault(int(u), {})[int(k)] = float(v)
    out = {}
    for u, by_k in rows.items():
        kmax = max(by_k)
        if sorted(by_k) != list(range(1, kmax + 1)):
            raise ConfigError(f"{path}: user {u} has gaps in its curve")
        out[u] = np.array([by_k[k] for k in range(1, kmax + 1)])
    return out


def cmd_allocate(cfg: dict) -> int:
    workdir = Path(cfg["workdir"])
    if "allocate" not in cfg:
        raise ConfigError("allocate needs an 'allocate' section in the config")
    acfg = cfg["allocate"]
    for key in ("budget", "domains"):
        if key not in acfg:
            raise ConfigError(f"allocate config needs '{key}'")
    measure = utility.Measure(acfg.get("measure", cfg["measures"][0]))
    allow_zero = bool(acfg.get("allow_zero", True))
    budget = int(acfg["budget"])
    domains = {d["id"]: _read_curves(d["curves"], measure) for d in acfg["domains"]}

    shared = sorted(set.intersection(*(set(v) for v in domains.values())))
    if not shared:
        raise ConfigError("no user appears in every domain's curve file")
    lines = [_echo(cfg, "allocate")]
    objective_sum = 0.0
    for u in shared:
        curves = multidomain.DomainCurves(
            user=u, measure=measure, curves={d: domains[d][u] for d in domains}
        )
        K = min(len(v) for v in curves.curves.values())
        result = multidomain.allocate(curves, N=budget, K=K, allow_zero=allow_zero)
        objective_sum += result.objective
        for dom in sorted(result.sizes):
            lines.append(f"{u}\t{dom}\t{result.sizes[dom]}")
    atomic_write(workdir / "allocations.tsv", "\n".join(lines) + "\n")
    payload = {
        "budget": budget,
        "allow_zero": allow_zero,
        "measure": measure.value,
        "n_users": len(shared),
        "objective_sum": objective_sum,
    }
    atomic_write(workdir / "allocation_report.json",
                 json.dumps(payload, sort_keys=True, indent=1) + "\n")
    print(f"allocate: {len(shared)} users over {len(domains)} domains -> "
          f"{workdir / 'allocations.tsv'}")
    return 0


_COMMANDS = {
    "prepare": cmd_prepare,
    "train": cmd_train,
    "calibrate": cmd_calibrate,
    "recommend": cmd_recommend,
    "evaluate": cmd_evaluate,
    "allocate": cmd_allocate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="persize",
        description="Personalized recommendation-list sizing pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--workdir", help="working directory for stage inputs/outputs")
        p.add_argument("--threads", type=int, help="per-user parallelism")
        p.add_argument("--seed", type=int, help="base random seed")
        p.add_argument("--measure", action="append",
                       help="utility measure (repeatable): ndcg|pdcg|f1|tp")
        p.add_argument("--mode", choices=["approx", "exact"], help="curve estimator")
        p.add_argument("--K", type=int, help="maximum recommendation size")
        p.add_argument("--M", type=int, help="count-sum truncation bound")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return _COMMANDS[args.command](cfg)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"persize {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
