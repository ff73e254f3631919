"""Command-line front end: ``synth``, ``preprocess``, ``run`` and ``report``.

All subcommands take ``--config <json>``, ``--out <dir>`` and ``--seed``
(the flag overrides the config). ``run`` preprocesses every dataset,
splits blocks, random-searches every pipeline, scores the held-out blocks
and writes ``report.json``, ``results.csv``, ``erp_diff.csv`` and the
figures.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import evaluation as ev
from . import io as rio
from . import preprocess as pp
from .classifiers import KINDS
from .errors import ConfigError, RsvpError
from .synth import EOG_CHANNELS, SynthConfig, synth_rsvp

log = logging.getLogger("rsvpipe")

REPORT_FORMAT = "rsvpipe-report"
REPORT_VERSION = 1
ALL_PIPELINES = [(f, c) for f in ev.FILTERS for c in KINDS]

DEFAULT_PREPROCESS = {
    "reference": "car",
    "car_first": True,
    "band": [0.1, 30.0],
    "rate": 250.0,
    "window": [0.0, 1.0],
    "eog_channels": list(EOG_CHANNELS),
    "reject_uv": 100.0,
    "drop_eog": True,
}
DEFAULT_SEARCH = {"budget": 100, "k": 10}


class StageError(RsvpError):
    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {exc}")
        self.stage = stage


@dataclass
class RunConfig:
    seed: int
    datasets: list
    preprocess: dict = field(default_factory=lambda: dict(DEFAULT_PREPROCESS))
    pipelines: list = field(default_factory=lambda: list(ALL_PIPELINES))
    budget: int = 100
    k: int = 10
    test_blocks_per_task: int = 3
    space: ev.SearchSpace = field(default_factory=ev.SearchSpace)

    @classmethod
    def from_dict(cls, d, seed=None):
        d = copy.deepcopy(d)
        if seed is None:
            seed = d.get("seed")
        if seed is None:
            raise ConfigError("a seed is required (config 'seed' or --seed)")
        datasets = d.get("datasets") or [{"name": "synthetic", "synth": {}}]
        for i, ds in enumerate(datasets):
            if "synth" not in ds and "recording" not in ds:
                raise ConfigError(f"dataset {i} needs 'synth' or 'recording'")
            ds.setdefault("name", f"dataset{i + 1}")
        names = [ds["name"] for ds in datasets]
        if len(set(names)) != len(names):
            raise ConfigError("dataset names must be unique")
        prep = dict(DEFAULT_PREPROCESS)
        prep.update(d.get("preprocess", {}))
        raw = d.get("pipelines", "all")
        if raw == "all":
            pipes = list(ALL_PIPELINES)
        else:
            pipes = [tuple(p.split("_", 1)) if isinstance(p, str) else tuple(p) for p in raw]
        if not pipes:
            raise ConfigError("at least one pipeline is required")
        for p in pipes:
            if p not in ev.HYPERPARAMETERS:
                raise ConfigError(f"unknown pipeline {p}")
        search = dict(DEFAULT_SEARCH)
        search.update(d.get("search", {}))
        return cls(
            seed=int(seed),
            datasets=datasets,
            preprocess=prep,
            pipelines=pipes,
            budget=int(search["budget"]),
            k=int(search["k"]),
            test_blocks_per_task=int(d.get("split", {}).get("test_blocks_per_task", 3)),
            space=ev.SearchSpace.from_dict(search.get("space", {})),
        )

    def to_dict(self):
        return {
            "seed": self.seed,
            "datasets": self.datasets,
            "preprocess": self.preprocess,
            "pipelines": [f"{f}_{c}" for f, c in self.pipelines],
            "search": {"budget": self.budget, "k": self.k, "space": self.space.to_dict()},
            "split": {"test_blocks_per_task": self.test_blocks_per_task},
        }


# ---------------------------------------------------------------------------
# stages


def load_dataset(ds, seed, base=Path(".")):
    if "synth" in ds:
        cfg = dict(ds["synth"])
        cfg.setdefault("seed", seed)
        rec, _ = synth_rsvp(SynthConfig.from_dict(cfg))
        return rec
    path = Path(ds["recording"])
    return rio.read_recording(path if path.is_absolute() else base / path)


def preprocess_recording(rec, prep):
    eog = [c for c in prep["eog_channels"] if c in rec.channels]

    def car(r):
        return pp.common_average_reference(r, exclude=eog) if prep["reference"] == "car" else r

    def band(r):
        return pp.bandpass(r, *prep["band"])

    steps = [car, band] if prep["car_first"] else [band, car]
    for step in steps:
        rec = step(rec)
    if prep["rate"] and prep["rate"] != rec.rate:
        rec = pp.resample(rec, prep["rate"])
    epochs = pp.epoch(rec, tuple(prep["window"]))
    if eog and prep["reject_uv"] is not None:
        epochs = pp.reject_trials(epochs, eog, prep["reject_uv"])
    if prep["drop_eog"] and eog:
        meta = epochs.meta
        epochs = epochs.drop_channels(eog)
        epochs.meta = meta
    return epochs


def _pattern_record(bank, pipeline):
    return {
        "pipeline": pipeline,
        "channels": list(bank.channels),
        "patterns": bank.patterns.T.tolist(),
        "filters": bank.filters.T.tolist(),
        "scores": bank.scores.tolist(),
        "windows": [list(w) for w in bank.windows] if bank.windows else None,
    }


def evaluate_dataset(cfg, ds, n_jobs=1, base=Path(".")):
    name = ds["name"]
    try:
        rec = load_dataset(ds, cfg.seed, base)
    except Exception as exc:
        raise StageError(f"load:{name}", exc) from exc
    try:
        epochs = preprocess_recording(rec, cfg.preprocess)
        del rec
        diff = pp.difference_erp(epochs)
    except Exception as exc:
        raise StageError(f"preprocess:{name}", exc) from exc
    try:
        train, test = ev.block_split(epochs, cfg.test_blocks_per_task, cfg.seed)
        train.require_both_classes()
        test.require_both_classes()
    except Exception as exc:
        raise StageError(f"split:{name}", exc) from exc

    cache = ev.FeatureCache()
    pipelines, patterns = {}, {}
    best_cv = {}
    for f, c in cfg.pipelines:
        pname = f"{f}_{c}"
        try:
            res = ev.random_search(cfg.space, f, c, train, cfg.budget, cfg.k, cfg.seed, n_jobs=n_jobs, cache=cache)
            spec = res.best
            stage = cache.get(("full",) + spec.filter_key, lambda: ev.FeatureStage.fit(f, spec.params.get("n_filters"), train))
            fitted = ev.fit_pipeline(spec, train, stage=stage)
            test_auc = ev.auc(fitted.decision(test), test.labels)
        except Exception as exc:
            raise StageError(f"search:{name}:{pname}", exc) from exc
        cv_auc = res.table[res.best_index]["mean_auc"]
        pipelines[pname] = {
            "filter": f,
            "classifier": c,
            "best_hyper": spec.params,
            "best_index": res.best_index,
            "cv_auc": cv_auc,
            "test_auc": test_auc,
            "candidates": res.table,
            "model": fitted.model.to_dict(),
        }
        if stage.bank is not None and (f not in best_cv or cv_auc > best_cv[f]):
            best_cv[f] = cv_auc
            patterns[f] = _pattern_record(stage.bank, pname)
    counts = np.bincount(epochs.labels, minlength=2)
    summary = {
        "name": name,
        "n_epochs": len(epochs),
        "class_counts": {"standard": int(counts[0]), "target": int(counts[1])},
        "n_train": len(train),
        "n_test": len(test),
        "test_blocks": sorted({(int(t), int(b)) for t, b in zip(test.tasks, test.blocks)}),
        "dropped": int(epochs.meta.get("dropped", 0)),
        "rejected": epochs.meta.get("rejected", {}),
        "pipelines": pipelines,
        "patterns": patterns,
    }
    erp = {"times": epochs.times.tolist(), "channels": list(epochs.channels), "diff": diff}
    return summary, erp


def anova_section(datasets, pipelines):
    methods = [f for f in ev.FILTERS if f != "NONE" and any(p[0] == f for p in pipelines)]
    if len(methods) < 2:
        return {"skipped": "fewer than two spatial filter methods"}
    groups = []
    if len(datasets) >= 2:
        grouping = "per-dataset mean over classifiers"
        for m in methods:
            groups.append([
                float(np.mean([v["test_auc"] for v in d["pipelines"].values() if v["filter"] == m])) for d in datasets
            ])
    else:
        grouping = "per-classifier test AUC"
        for m in methods:
            groups.append([v["test_auc"] for v in datasets[0]["pipelines"].values() if v["filter"] == m])
    try:
        res = ev.one_way_anova(groups)
    except RsvpError as exc:
        return {"skipped": str(exc), "groups": methods}
    return {"groups": methods, "grouping": grouping, "values": groups, "F": res.F, "p": res.p,
            "df": [res.df_between, res.df_within]}


def run(cfg: RunConfig, out, n_jobs=1, base=Path(".")):
    """Execute the full evaluation and write all artifacts; returns the report dict."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / "INCOMPLETE"
    marker.write_text("run in progress\n")
    datasets, erps = [], {}
    for ds in cfg.datasets:
        summary, erp = evaluate_dataset(cfg, ds, n_jobs=n_jobs, base=base)
        datasets.append(summary)
        erps[ds["name"]] = erp
    names = [d["name"] for d in datasets]
    table = {}
    for f, c in cfg.pipelines:
        pname = f"{f}_{c}"
        row = {d["name"]: d["pipelines"][pname]["test_auc"] for d in datasets}
        row["mean"] = float(np.mean([row[n] for n in names]))
        table[pname] = row
    report = {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "config": cfg.to_dict(),
        "datasets": datasets,
        "results": {"columns": names + ["mean"], "auc": table},
        "anova": anova_section(datasets, cfg.pipelines),
    }
    try:
        write_erp_csv(erps, out / "erp_diff.csv")
        render(report, out)
    except Exception as exc:
        marker.write_text(f"[report] {exc}\n")
        raise StageError("report", exc) from exc
    tmp = out / "report.json.tmp"
    tmp.write_text(json.dumps(report, indent=1, default=_json_default) + "\n")
    os.replace(tmp, out / "report.json")
    marker.unlink()
    return report


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o)}")


# ---------------------------------------------------------------------------
# artifacts


def write_erp_csv(erps, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = None
        for name, erp in erps.items():
            if header is None:
                header = ["dataset", "time_s"] + erp["channels"]
                w.writerow(header)
            for t, col in zip(erp["times"], np.asarray(erp["diff"]).T):
                w.writerow([name, repr(float(t))] + [repr(float(v)) for v in col])


def read_erp_csv(path):
    erps = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        channels = header[2:]
        for row in reader:
            e = erps.setdefault(row[0], {"times": [], "channels": channels, "cols": []})
            e["times"].append(float(row[1]))
            e["cols"].append([float(v) for v in row[2:]])
    for e in erps.values():
        e["diff"] = np.array(e.pop("cols")).T
    return erps


def write_results_csv(report, path):
    cols = report["results"]["columns"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pipeline"] + cols)
        for pname, row in report["results"]["auc"].items():
            w.writerow([pname] + [repr(float(row[c])) for c in cols])


def topomap_name(method, k, window=None):
    if window is not None:
        lo, hi = (int(round(1000 * x)) for x in window)
        return f"topomap_{method}_{k}_{lo}-{hi}ms.svg"
    return f"topomap_{method}_{k}.svg"


def render(report, out):
    """Write ``results.csv``, topomaps and the difference-ERP figure for a report."""
    from .plotting import emit_topomap, plot_difference_erp

    out = Path(out)
    write_results_csv(report, out / "results.csv")
    multi = len(report["datasets"]) > 1
    erp_path = out / "erp_diff.csv"
    erps = read_erp_csv(erp_path) if erp_path.exists() else {}
    written = []
    for d in report["datasets"]:
        fig_dir = out / d["name"] if multi else out
        fig_dir.mkdir(parents=True, exist_ok=True)
        for method, rec in d["patterns"].items():
            windows = rec["windows"] or [None] * len(rec["patterns"])
            for k, (pat, win) in enumerate(zip(rec["patterns"], windows), start=1):
                path = fig_dir / topomap_name(method, k, win)
                title = f"{method} {k}" + (f" ({win[0]:.2f}-{win[1]:.2f} s)" if win else "")
                emit_topomap(np.array(pat), rec["channels"], path, title=title)
                written.append(path)
        if d["name"] in erps:
            e = erps[d["name"]]
            plot_difference_erp(np.array(e["times"]), e["diff"], e["channels"], fig_dir / "erp_diff.svg")
    return written


# ---------------------------------------------------------------------------
# entry point


def _load_json(path):
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def cmd_synth(args):
    d = _load_json(args.config)
    d = d.get("synth", d)
    if args.seed is not None:
        d["seed"] = args.seed
    if "seed" not in d:
        raise ConfigError("a seed is required (config 'seed' or --seed)")
    rec, truth = synth_rsvp(SynthConfig.from_dict(d))
    out = Path(args.out)
    path = rio.write_recording(rec, out / args.name)
    print(path)


def cmd_preprocess(args):
    d = _load_json(args.config)
    cfg = RunConfig.from_dict(d, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = Path(args.config).parent if args.config else Path(".")
    erps = {}
    for ds in cfg.datasets:
        try:
            epochs = preprocess_recording(load_dataset(ds, cfg.seed, base), cfg.preprocess)
        except Exception as exc:
            raise StageError(f"preprocess:{ds['name']}", exc) from exc
        rio.write_epochs(epochs, out / f"{ds['name']}.epochs")
        erps[ds["name"]] = {"times": epochs.times.tolist(), "channels": epochs.channels, "diff": pp.difference_erp(epochs)}
        print(f"{ds['name']}: {len(epochs)} epochs, dropped={epochs.meta.get('dropped', 0)}, rejected={epochs.meta.get('rejected', {})}")
    write_erp_csv(erps, out / "erp_diff.csv")


def cmd_run(args):
    d = _load_json(args.config)
    cfg = RunConfig.from_dict(d, seed=args.seed)
    base = Path(args.config).parent if args.config else Path(".")
    report = run(cfg, args.out, n_jobs=args.jobs, base=base)
    for pname, row in report["results"]["auc"].items():
        print(f"{pname:12s} {row['mean']:.4f}")


def cmd_report(args):
    out = Path(args.out)
    report = json.loads((out / "report.json").read_text())
    for path in render(report, out):
        log.info("wrote %s", path)
    print(out / "results.csv")


def build_parser():
    parser = argparse.ArgumentParser(prog="rsvpipe", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (
        ("synth", cmd_synth, "generate a synthetic RSVP recording"),
        ("preprocess", cmd_preprocess, "preprocess datasets into epoch files"),
        ("run", cmd_run, "search, evaluate and report all pipelines"),
        ("report", cmd_report, "re-render tables and figures from report.json"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.set_defaults(func=fn)
        if name == "synth":
            p.add_argument("--name", default="synthetic", help="recording file stem")
        if name == "run":
            p.add_argument("--jobs", type=int, default=1, help="parallel candidate evaluations")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (RsvpError, OSError) as exc:
        print(f"rsvpipe {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
