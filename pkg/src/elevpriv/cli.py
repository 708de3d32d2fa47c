"""Command-line entry point.

Every command resolves its options as flag > ``ELEVPRIV_<OPTION>``
environment variable > ``--config`` JSON document > built-in default, writes
its outputs plus a ``run_manifest.json`` into ``--out``, and exits with

* 0 on success,
* 2 on a usage or configuration error,
* 3 on a data error,
* 4 on a runtime or numeric error.

Failures print one JSON line ``{"error": ..., "kind": ..., "exit_code": ...}``
to stderr.
"""
from __future__ import annotations

import argparse
import csv
import glob
import hashlib
import json
import os
import sys
import time

import numpy as np

from . import __version__
from ._seeding import derive_seed
from .core import Dataset, assign_region, load_dataset, save_dataset, tight_rect
from .errors import DataError, NumericError

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4
ENV_PREFIX = "ELEVPRIV_"
MANIFEST_NAME = "run_manifest.json"
TM1_LABELS = ("WDC", "ORL", "NYC", "SD")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# --- option table ---------------------------------------------------------
# dest -> (type, default, help). Flags default to None so that "not given"
# can fall through to the environment and the config file.

_BOOL = "bool"


def _as_bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {v!r}")


OPTIONS = {
    "seed": (int, 0, "root seed; every random draw derives from it"),
    "jobs": (int, 1, "parallel folds"),
    "kind": (str, "city", "synthetic dataset kind: city, borough or history"),
    "cities": (int, 5, "number of synthetic cities (or history regions)"),
    "routes": (int, 200, "routes per class"),
    "route_len": (int, 96, "samples per route"),
    "boroughs": (int, 3, "boroughs per city"),
    "threshold": (float, 0.5, "region matching distance threshold in degrees"),
    "mode": (str, "floor_whole", "discretization: floor_whole or floor_milli"),
    "alphabet": (int, 26, "alphabet size for word encoding"),
    "rep": (str, "ngrams", "representation: raw, ngrams, tfidf, image or aggregate"),
    "model": (str, "rf", "model: svm, rf or mlp"),
    "model_config": (json.loads, None, "JSON object of model hyper-parameter overrides"),
    "n_max": (int, 5, "largest n-gram order"),
    "target_dim": (int, 5000, "number of n-gram features kept"),
    "chunk_len": (int, 32, "raw chunk length"),
    "folds": (int, 10, "cross-validation folds"),
    "tm": (int, 0, "threat model sweep: 0 (single run), 1, 2 or 3"),
    "classes": (str, "", "comma-separated class counts for sweeps, or labels for a single run"),
    "balance": (_BOOL, True, "balance classes before and inside CV"),
    "permutation_control": (_BOOL, False, "also run with permuted labels"),
    "ratio": (float, 0.35, "target parent/derived overlap ratio"),
    "per_parent": (int, 1, "derived routes per original route"),
    "defense": (str, "perturb", "defense: perturb or aggregate"),
    "fraction": (float, 0.10, "fraction of samples perturbed"),
    "epoch_len": (int, 10, "samples per perturbation epoch"),
    "clip_window": (int, 30, "moving-statistics window for clipping"),
    "quantum": (float, 10.0, "aggregation rounding quantum in feet"),
    "apply_to": (str, "all", "perturb all profiles, or only held-out ones ('test')"),
    "metric": (str, "accuracy", "metric plotted by report"),
    "png": (_BOOL, False, "also write PNG rasters (image representation)"),
}

CHOICES = {
    "kind": ("city", "borough", "history"),
    "mode": ("floor_whole", "floor_milli"),
    "rep": ("raw", "ngrams", "tfidf", "image", "aggregate"),
    "model": ("svm", "rf", "mlp"),
    "tm": (0, 1, 2, 3),
    "defense": ("perturb", "aggregate"),
    "apply_to": ("all", "test"),
    "metric": ("accuracy", "recall", "specificity", "f1"),
}

COMMAND_OPTIONS = {
    "synth": ["seed", "kind", "cities", "routes", "route_len", "boroughs"],
    "ingest": ["threshold"],
    "encode": ["mode", "alphabet"],
    "featurize": ["rep", "mode", "alphabet", "n_max", "target_dim", "chunk_len", "quantum", "png"],
    "train": ["seed", "rep", "model", "model_config", "mode", "alphabet", "n_max", "target_dim",
              "chunk_len", "balance"],
    "eval": ["seed", "jobs", "rep", "model", "model_config", "mode", "alphabet", "n_max",
             "target_dim", "chunk_len", "folds", "tm", "classes", "balance", "permutation_control"],
    "simulate": ["seed", "jobs", "ratio", "per_parent", "rep", "model", "model_config", "mode",
                 "alphabet", "n_max", "target_dim", "chunk_len", "folds", "balance"],
    "defend": ["seed", "jobs", "defense", "fraction", "epoch_len", "clip_window", "quantum",
               "apply_to", "rep", "model", "model_config", "mode", "alphabet", "n_max",
               "target_dim", "chunk_len", "folds", "balance"],
    "report": ["metric"],
}

# inputs: name -> (flag, nargs, help)
COMMAND_INPUTS = {
    "synth": [],
    "ingest": [("gpx", None, "directory of .gpx files")],
    "encode": [("data", None, "dataset directory")],
    "featurize": [("data", None, "dataset directory")],
    "train": [("data", None, "dataset directory")],
    "eval": [("data", None, "dataset directory (TM-2: directory of per-city datasets)")],
    "simulate": [("data", None, "dataset directory")],
    "defend": [("data", None, "dataset directory")],
    "report": [("inputs", "+", "report CSVs written by eval, simulate or defend")],
}


def build_parser():
    parser = _Parser(prog="elevpriv", description="Elevation-profile location inference toolkit.")
    parser.add_argument("--version", action="version", version=f"elevpriv {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    for cmd, opts in COMMAND_OPTIONS.items():
        p = sub.add_parser(cmd, help=(COMMANDS[cmd].__doc__ or "").strip().splitlines()[0])
        for name, nargs, hlp in COMMAND_INPUTS[cmd]:
            p.add_argument(f"--{name}", nargs=nargs, required=True, help=hlp)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--config", help="JSON config file with option defaults")
        for dest in opts:
            typ, default, hlp = OPTIONS[dest]
            flag = "--" + dest.replace("_", "-")
            if typ is _BOOL:
                p.add_argument(flag, dest=dest, action="store_true", default=None, help=hlp)
                p.add_argument("--no-" + dest.replace("_", "-"), dest=dest, action="store_false")
            else:
                p.add_argument(flag, dest=dest, type=str, default=None,
                               help=f"{hlp} (default: {default})")
    return parser


def _convert(dest, value):
    typ = OPTIONS[dest][0]
    if value is None:
        return None
    try:
        if typ is _BOOL:
            return _as_bool(value)
        if typ is json.loads:
            return json.loads(value) if isinstance(value, str) else value
        return typ(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value for {dest}: {value!r}") from exc


def resolve_config(args, environ=None):
    """Resolve every option of ``args.command`` with flag > env > config file > default."""
    environ = os.environ if environ is None else environ
    file_cfg = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(file_cfg) - set(COMMAND_OPTIONS[args.command])
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {sorted(unknown)}")
    out = {}
    for dest in COMMAND_OPTIONS[args.command]:
        flag = getattr(args, dest)
        env = environ.get(ENV_PREFIX + dest.upper())
        if flag is not None:
            out[dest] = _convert(dest, flag)
        elif env is not None:
            out[dest] = _convert(dest, env)
        elif dest in file_cfg:
            out[dest] = _convert(dest, file_cfg[dest])
        else:
            out[dest] = OPTIONS[dest][1]
        if dest in CHOICES and out[dest] not in CHOICES[dest]:
            raise UsageError(f"{dest} must be one of {list(CHOICES[dest])}, got {out[dest]!r}")
        if dest == "model_config" and out[dest] is not None and not isinstance(out[dest], dict):
            raise UsageError("model_config must be a JSON object")
    return out


# --- manifests ------------------------------------------------------------


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _input_hashes(paths):
    out = {}
    for p in paths:
        if os.path.isdir(p):
            for f in sorted(glob.glob(os.path.join(p, "**", "*"), recursive=True)):
                if os.path.isfile(f) and os.path.basename(f) != MANIFEST_NAME:
                    out[os.path.relpath(f, os.path.dirname(os.path.abspath(p)))] = _sha256(f)
        elif os.path.isfile(p):
            out[os.path.basename(p)] = _sha256(p)
    return out


def write_run_manifest(out_dir, command, config, inputs, started):
    """Write ``run_manifest.json`` describing one command invocation.

    ``manifest_hash`` covers the command, resolved config, input and output
    file hashes; it excludes wall-clock time and the output location, so two
    runs with equal hashes produced identical outputs.
    """
    outputs = {}
    for f in sorted(glob.glob(os.path.join(out_dir, "**", "*"), recursive=True)):
        if os.path.isfile(f) and os.path.basename(f) != MANIFEST_NAME:
            outputs[os.path.relpath(f, out_dir)] = _sha256(f)
    body = {"command": command, "config": config, "seed": config.get("seed"),
            "inputs": _input_hashes(inputs), "outputs": outputs, "version": __version__}
    digest = hashlib.sha256(json.dumps(body, sort_keys=True, default=str).encode()).hexdigest()
    manifest = {**body, "manifest_hash": digest, "output_dir": os.path.abspath(out_dir),
                "wall_clock_seconds": round(time.time() - started, 3)}
    with open(os.path.join(out_dir, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2, default=str)
        fh.write("\n")
    return manifest


# --- shared helpers -------------------------------------------------------


def _spec(cfg, **extra):
    from .harness import ChunkSpec, ExperimentSpec, PAD_EDGE

    return ExperimentSpec(representation=cfg["rep"], model=cfg["model"],
                          model_config=cfg.get("model_config") or {}, folds=cfg.get("folds", 10),
                          seed=cfg["seed"], chunk=ChunkSpec(cfg["chunk_len"], PAD_EDGE),
                          discretization=cfg["mode"], alphabet_len=cfg["alphabet"],
                          n_max=cfg["n_max"], target_dim=cfg["target_dim"],
                          balance=cfg.get("balance", True), **extra)


def _write_reports(out, reports, stem="reports"):
    from .harness import write_confusion_csv, write_reports_csv, write_reports_json

    write_reports_csv(os.path.join(out, f"{stem}.csv"), reports)
    write_reports_json(os.path.join(out, f"{stem}.json"), reports)
    for i, r in enumerate(reports):
        cell = str(r.meta.get("cell", i)).replace(os.sep, "_")
        write_confusion_csv(os.path.join(out, f"confusion_{i:02d}_{cell}.csv"), r)


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc


# --- commands -------------------------------------------------------------


def cmd_synth(args, cfg):
    """Generate synthetic city, borough or user-history datasets."""
    from .ingest import synth_borough_datasets, synth_city_dataset, synth_user_history

    kind = cfg["kind"]
    if kind == "city":
        ds = synth_city_dataset(cfg["cities"], cfg["routes"], cfg["route_len"], cfg["seed"],
                                provenance="city_level")
        save_dataset(ds, args.out)
    elif kind == "borough":
        per_city = synth_borough_datasets(cfg["cities"], cfg["boroughs"], cfg["routes"],
                                          cfg["route_len"], cfg["seed"])
        for city, ds in per_city.items():
            save_dataset(ds, os.path.join(args.out, city))
    elif kind == "history":
        labels = list(TM1_LABELS[:cfg["cities"]]) + [f"R{i + 1}" for i in range(len(TM1_LABELS), cfg["cities"])]
        ds = synth_user_history(tuple(labels), activities=cfg["routes"], route_len=cfg["route_len"],
                                seed=cfg["seed"])
        save_dataset(ds, args.out)
    else:
        raise UsageError(f"unknown synth kind {kind!r}")
    return []


def cmd_ingest(args, cfg):
    """Parse a directory of GPX tracks and label them by region matching."""
    from .ingest import parse_gpx

    files = sorted(glob.glob(os.path.join(args.gpx, "*.gpx")))
    if not files:
        raise DataError(f"no .gpx files in {args.gpx}")
    regions = []
    samples = []
    for f in files:
        with open(f, "rb") as fh:
            profile = parse_gpx(fh.read(), os.path.splitext(os.path.basename(f))[0])
        rid = assign_region(tight_rect(profile), regions, cfg["threshold"])
        name = next(r.name for r in regions if r.id == rid)
        samples.append(profile.replace(label=name))
    labels = tuple(r.name for r in regions)
    region_info = [{"id": r.id, "name": r.name, "center": list(r.center),
                    "member_count": r.member_count} for r in regions]
    save_dataset(Dataset(samples, labels, "user_specific"), args.out, {"regions": region_info})
    return [args.gpx]


def cmd_encode(args, cfg):
    """Encode a dataset as a word corpus with its codebook."""
    from .textrep import encode

    ds = load_dataset(args.data)
    corpus, codebook = encode(ds.samples, cfg["mode"], cfg["alphabet"])
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "corpus.txt"), "w", encoding="utf-8") as fh:
        for lab, line in zip(ds.y.tolist(), corpus.lines):
            fh.write(f"{lab}\t{' '.join(line)}\n")
    with open(os.path.join(args.out, "codebook.json"), "w", encoding="utf-8") as fh:
        fh.write(codebook.to_json() + "\n")
    return [args.data]


def cmd_featurize(args, cfg):
    """Fit a representation on a dataset and export its feature matrix."""
    from .harness import ChunkSpec, PAD_EDGE, make_representation

    ds = load_dataset(args.data)
    rep = make_representation(cfg["rep"], chunk=ChunkSpec(cfg["chunk_len"], PAD_EDGE), mode=cfg["mode"],
                              alphabet_len=cfg["alphabet"], n_max=cfg["n_max"],
                              target_dim=cfg["target_dim"], quantum=cfg["quantum"])
    rep.fit(ds.samples)
    X, groups = rep.transform(ds.samples)
    X = X.toarray() if hasattr(X, "toarray") else np.asarray(X)
    if cfg["rep"] in ("ngrams", "tfidf"):
        names = list(rep.vocabulary.entries)
    else:
        names = [f"f{i}" for i in range(X.shape[1])]
    os.makedirs(args.out, exist_ok=True)
    labels = ds.y[groups].tolist()
    with open(os.path.join(args.out, "features.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "profile"] + names)
        for lab, g, row in zip(labels, groups.tolist(), X):
            w.writerow([lab, g] + [repr(float(v)) for v in row])
    with open(os.path.join(args.out, "representation.json"), "w", encoding="utf-8") as fh:
        json.dump({"name": rep.name, "state": rep.state()}, fh, sort_keys=True)
    if cfg["png"] and cfg["rep"] == "image":
        img_dir = os.path.join(args.out, "images")
        os.makedirs(img_dir, exist_ok=True)
        for s, img in zip(ds.samples, rep.images(ds.samples)):
            img.save_png(os.path.join(img_dir, f"{s.source_id or 'profile'}.png"))
    return [args.data]


def cmd_train(args, cfg):
    """Train one model on a whole dataset and save it with its preprocessing."""
    from .core import balance
    from .harness import fit_fold

    ds = load_dataset(args.data)
    spec = _spec(cfg)
    if spec.balance:
        ds = balance(ds, derive_seed(spec.seed, "balance"))
    rep, model = fit_fold(spec, ds, 0)
    os.makedirs(args.out, exist_ok=True)
    model.save(os.path.join(args.out, "model.json"))
    with open(os.path.join(args.out, "representation.json"), "w", encoding="utf-8") as fh:
        json.dump({"name": rep.name, "state": rep.state()}, fh, sort_keys=True)
    return [args.data]


def cmd_eval(args, cfg):
    """Cross-validated evaluation: a single run or a TM-1/2/3 sweep."""
    from .harness import chance_interval, permute_labels, run_cv, run_tm1, run_tm2, run_tm3

    tm = cfg["tm"]
    if tm not in (0, 1, 2, 3):
        raise UsageError("--tm must be 0, 1, 2 or 3")
    spec = _spec(cfg)
    jobs = cfg["jobs"]
    reports = []
    if tm == 2:
        dirs = sorted(d for d in glob.glob(os.path.join(args.data, "*"))
                      if os.path.isfile(os.path.join(d, "manifest.json")))
        if not dirs:
            raise DataError(f"{args.data} holds no per-city datasets")
        cities = {os.path.basename(d): load_dataset(d) for d in dirs}
        reports = list(run_tm2(cities, spec, jobs).values())
    else:
        ds = load_dataset(args.data)
        if tm == 0:
            if cfg["classes"]:
                spec = spec.replace(classes=tuple(c.strip() for c in cfg["classes"].split(",")))
            reports = [run_cv(spec, ds, jobs)]
        else:
            counts = _int_list(cfg["classes"]) if cfg["classes"] else None
            sweep = run_tm1 if tm == 1 else run_tm3
            reports = sweep(ds, spec, counts, jobs) if counts else sweep(ds, spec, jobs=jobs)
        if cfg["permutation_control"]:
            base = reports[0]
            sub = ds.subset(labels=base.labels)
            control = run_cv(spec.replace(classes=None), permute_labels(sub, derive_seed(spec.seed, "permute")), jobs)
            n = int(control.confusion.sum())
            lo, hi = chance_interval(n, len(control.labels))
            control.meta.update({"cell": "permuted", "chance_interval": [lo, hi],
                                 "inside_interval": lo <= control.accuracy <= hi})
            reports.append(control)
    os.makedirs(args.out, exist_ok=True)
    _write_reports(args.out, reports)
    return [args.data]


def cmd_simulate(args, cfg):
    """Build an overlapped dataset and compare attack accuracy with the original."""
    from .harness import mean_signal_overlap, parent_derived_overlap, run_cv, simulate_overlap

    ds = load_dataset(args.data)
    overlapped = simulate_overlap(ds, cfg["ratio"], derive_seed(cfg["seed"], "overlap"), cfg["per_parent"])
    spec = _spec(cfg)
    base = run_cv(spec, ds, cfg["jobs"])
    over = run_cv(spec, overlapped, cfg["jobs"])
    base.meta["cell"] = "baseline"
    over.meta["cell"] = f"overlap-{cfg['ratio']:g}"
    over.meta["measured_ratio"] = parent_derived_overlap(overlapped)
    base.meta["mean_signal_overlap"] = mean_signal_overlap(ds, 2000, cfg["seed"])
    over.meta["mean_signal_overlap"] = mean_signal_overlap(overlapped, 2000, cfg["seed"])
    save_dataset(overlapped, os.path.join(args.out, "dataset"),
                 {"overlap": {"target_ratio": cfg["ratio"], "measured_ratio": over.meta["measured_ratio"],
                              "per_parent": cfg["per_parent"]}})
    _write_reports(args.out, [base, over], "comparison")
    return [args.data]


def cmd_defend(args, cfg):
    """Apply a defense and report attack accuracy before and after."""
    from .defense import AggregateDefense, PerturbSpec, aggregate, evaluate_defense, perturb_dataset

    ds = load_dataset(args.data)
    spec = _spec(cfg)
    os.makedirs(args.out, exist_ok=True)
    if cfg["defense"] == "perturb":
        defense = PerturbSpec(cfg["fraction"], cfg["epoch_len"], cfg["clip_window"],
                              derive_seed(cfg["seed"], "perturb"))
        block = {"type": "perturb", "fraction_perturbed": defense.fraction_perturbed,
                 "epoch_len": defense.epoch_len, "clip_window": defense.clip_window,
                 "seed": defense.seed, "apply_to": cfg["apply_to"]}
        save_dataset(perturb_dataset(ds, defense), os.path.join(args.out, "dataset"), {"defense": block})
    elif cfg["defense"] == "aggregate":
        defense = AggregateDefense(cfg["quantum"])
        with open(os.path.join(args.out, "aggregates.jsonl"), "w", encoding="utf-8") as fh:
            for s in ds.samples:
                rec = {"source_id": s.source_id, "label": s.label,
                       **aggregate(s.values, cfg["quantum"]).to_dict()}
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        block = {"type": "aggregate", "quantum": cfg["quantum"]}
    else:
        raise UsageError(f"unknown defense {cfg['defense']!r}")
    result = evaluate_defense(ds, defense, spec, cfg["apply_to"], cfg["jobs"])
    result.clean.meta["cell"] = "clean"
    result.defended.meta["cell"] = "defended"
    result.defended.meta["delta"] = result.delta
    _write_reports(args.out, [result.clean, result.defended], "degradation")
    with open(os.path.join(args.out, "defense.json"), "w", encoding="utf-8") as fh:
        json.dump({"defense": block, "clean_accuracy": result.clean.accuracy,
                   "defended_accuracy": result.defended.accuracy, "delta": result.delta},
                  fh, sort_keys=True, indent=2)
    return [args.data]


def cmd_report(args, cfg):
    """Draw grouped bar charts (SVG) from report CSVs."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .harness import read_reports_csv

    metric = cfg["metric"]
    if metric not in ("accuracy", "recall", "specificity", "f1"):
        raise UsageError(f"unknown metric {metric!r}")
    rows = []
    for path in args.inputs:
        try:
            rows.extend(read_reports_csv(path))
        except (KeyError, ValueError) as exc:
            raise DataError(f"{path} is not a report CSV: {exc}") from exc
    if not rows:
        raise DataError("no report rows to plot")
    cells = list(dict.fromkeys(r["cell"] for r in rows))
    series = list(dict.fromkeys(f"{r['representation']}+{r['model']}" for r in rows))
    width = 0.8 / len(series)
    matplotlib.rcParams["svg.hashsalt"] = "elevpriv"
    fig, ax = plt.subplots(figsize=(max(4, 1.2 * len(cells) + 2), 3.5))
    for si, name in enumerate(series):
        vals = []
        for c in cells:
            match = [r[metric] for r in rows if r["cell"] == c and f"{r['representation']}+{r['model']}" == name]
            vals.append(match[-1] if match else 0.0)
        ax.bar(np.arange(len(cells)) + si * width - 0.4 + width / 2, vals, width, label=name)
    ax.set_xticks(np.arange(len(cells)))
    ax.set_xticklabels(cells)
    ax.set_ylim(0, 1)
    ax.set_ylabel(metric)
    ax.legend(fontsize="small")
    fig.tight_layout()
    os.makedirs(args.out, exist_ok=True)
    fig.savefig(os.path.join(args.out, f"{metric}.svg"), format="svg", metadata={"Date": None})
    plt.close(fig)
    return list(args.inputs)


COMMANDS = {"synth": cmd_synth, "ingest": cmd_ingest, "encode": cmd_encode, "featurize": cmd_featurize,
            "train": cmd_train, "eval": cmd_eval, "simulate": cmd_simulate, "defend": cmd_defend,
            "report": cmd_report}


def _fail(exc, code):
    kind = "usage" if code == EXIT_USAGE else "data" if code == EXIT_DATA else "runtime"
    msg = str(exc).replace("\n", " ")
    sys.stderr.write(json.dumps({"error": msg, "kind": kind, "type": type(exc).__name__,
                                 "exit_code": code}) + "\n")
    return code


def main(argv=None, environ=None):
    started = time.time()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = resolve_config(args, environ)
    except UsageError as exc:
        return _fail(exc, EXIT_USAGE)
    try:
        inputs = COMMANDS[args.command](args, cfg)
        os.makedirs(args.out, exist_ok=True)
        write_run_manifest(args.out, args.command, cfg, inputs, started)
    except UsageError as exc:
        return _fail(exc, EXIT_USAGE)
    except NumericError as exc:
        return _fail(exc, EXIT_RUNTIME)
    except (DataError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        return _fail(exc, EXIT_DATA)
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        return _fail(exc, EXIT_RUNTIME)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
