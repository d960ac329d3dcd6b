"""
``entangle-ssl`` command line: generate datasets, train SL / SLK / SSL,
evaluate, and sweep the learned separability bound.

Layout of an output directory::

    manifest.json                 config echo and sha256 of every deterministic file
    summary-<method>.json         mean / std over seeds (eval)
    bound-summary-<method>.json   bound estimates over seeds (sweep-bound)
    seed-<s>/labeled.txt ...      datasets, models, run reports, metrics, ROC and bound files

Every file written for a seed carries the experiment digest; ``eval`` and
``sweep-bound`` refuse models or datasets from another configuration unless
``--force`` is given. Wall-clock timings go to ``timing-<method>.json`` and
are left out of the manifest so reruns stay byte-identical.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 non-finite training.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import datagen as dg
from . import evaluate as ev
from . import nn
from . import ssl
from .presets import resolve

log = logging.getLogger("entangle_ssl")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
METHODS = ("sl", "slk", "ssl")


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(code, message)
        self.code = code
        self.message = message

    def __str__(self):
        return self.message


# --- datasets ---------------------------------------------------------------------

def _ghz_task(exp):
    if exp.family == "ghz3":
        return dg.GhzTask(3, "three-class")
    if exp.family == "ghz":
        return dg.GhzTask(exp.n, "binary", exp.k)
    return dg.GhzTask(exp.n, "fuzzy", 3, exp.a)


def build_sets(exp, seed):
    """Named datasets for one seed of an experiment."""
    scheme = exp.train.feature_scheme
    if exp.family == "2q":
        return {
            "labeled": dg.gen_labeled_2q(exp.l, scheme, seed),
            "unlabeled": dg.gen_unlabeled_2q(exp.u, scheme, seed),
            "validation": dg.gen_labeled_2q(exp.validation_size, scheme, seed, tag="validation"),
            "test": dg.gen_labeled_2q(exp.test_size, scheme, seed, tag="test"),
        }
    if exp.family == "rho-s":
        return {
            "labeled": dg.gen_labeled_2q(exp.l, scheme, seed),
            "unlabeled": dg.gen_rho_s_set(exp.u, scheme, seed, tag="unlabeled", labeled=False),
            "validation": dg.gen_rho_s_set(exp.validation_size, scheme, seed, tag="validation"),
            "test": dg.gen_rho_s_set(exp.test_size, scheme, seed, tag="test"),
        }
    task = _ghz_task(exp)
    labeled, unlabeled = dg.gen_ghz_sets(task, exp.l, exp.u, seed)
    validation = dg.gen_ghz_labeled(task, exp.validation_size, seed, tag="validation")
    test = dg.gen_ghz_labeled(task, exp.test_size, seed, tag="test")
    if exp.family == "ghz3":
        return {"labeled": labeled, "unlabeled": unlabeled, "validation": validation, "test": test,
                "test-lu": dg.ghz_class_test_set(exp.test_size, seed)}
    # n-qubit tasks are scored on states conjugated once by a random Pauli string
    return {"labeled": labeled, "unlabeled": unlabeled,
            "validation": dg.augment_once(validation, seed, tag="view-validation"),
            "test": dg.augment_once(test, seed, tag="view-test")}


def _seed_dir(out, seed):
    return Path(out) / f"seed-{seed}"


def _read_text(path):
    try:
        return Path(path).read_text(encoding="ascii")
    except FileNotFoundError:
        raise CliError(EXIT_DATA, f"missing file {path} (run the earlier command first)") from None


def _check_digest(path, found, exp, force):
    want = exp.digest()
    if found != want and not force:
        raise CliError(EXIT_DATA, f"{path} was written for config {found}, current config is {want} "
                                  "(use --force to override)")


def load_set(exp, out, seed, name, force=False):
    path = _seed_dir(out, seed) / f"{name}.txt"
    text = _read_text(path)
    try:
        head = dg._header_fields(text.split("\n", 1)[0], "dataset-v1")
        ds = dg.loads_dataset(text)
    except dg.DatasetParseError as exc:
        raise CliError(EXIT_DATA, f"{path}: {exc}") from None
    _check_digest(path, head.get("config"), exp, force)
    return ds


def load_trained(exp, out, seed, method, force=False):
    path = _seed_dir(out, seed) / f"model-{method}.txt"
    text = _read_text(path)
    try:
        head = nn.model_header(text)
        model = nn.loads_model(text)
    except nn.ModelParseError as exc:
        raise CliError(EXIT_DATA, f"{path}: {exc}") from None
    _check_digest(path, head.get("config"), exp, force)
    return model


# --- per-seed work (top-level so process pools can pickle it) ------------------------

def generate_seed(exp, out, seed):
    d = _seed_dir(out, seed)
    d.mkdir(parents=True, exist_ok=True)
    for name, ds in build_sets(exp, seed).items():
        dg.save_dataset(ds, d / f"{name}.txt", {"config": exp.digest(), "set": name})
    return seed


def train_seed(exp, out, seed, method, force=False):
    cfg = exp.train_config(seed)
    labeled = load_set(exp, out, seed, "labeled", force)
    clock = time.perf_counter()
    record = {"method": method, "seed": seed, "config": cfg.to_dict(), "config_digest": exp.digest(),
              "train_digest": cfg.digest()}
    timing = {"method": method, "seed": seed}
    if method == "ssl":
        unlabeled = load_set(exp, out, seed, "unlabeled", force)
        validation = load_set(exp, out, seed, "validation", force)
        run = ssl.ssl_train(labeled, unlabeled, validation, cfg)
        model = run.model
        record = run.record(cfg, {k: v for k, v in record.items() if k != "config"})
        timing["step_seconds"] = run.step_seconds
    else:
        model = ssl.slk_train(labeled, cfg) if method == "slk" else ssl.sl_train(labeled, cfg)
        record["epochs"] = cfg.total_epochs
    timing["seconds"] = time.perf_counter() - clock
    d = _seed_dir(out, seed)
    nn.save_model(model, d / f"model-{method}.txt", {"config": exp.digest(), "method": method, "seed": seed})
    ev.write_json(d / f"run-{method}.json", record)
    ev.write_json(d / f"timing-{method}.json", timing)
    return timing["seconds"]


def _score(model, test, d, stem):
    if model.input_dim != test.feature_dim:
        raise CliError(EXIT_DATA, f"model expects feature dimension {model.input_dim}, "
                                  f"test set has feature dimension {test.feature_dim}")
    if model.class_count != test.class_count:
        raise CliError(EXIT_DATA, f"model has {model.class_count} classes, test set has {test.class_count}")
    overall, per_class = ev.accuracy(model, test)
    micro = ev.micro_roc(model, test)
    ev.write_roc_csv(d / f"{stem}.csv", micro)
    out = {"accuracy": overall, "per_class_accuracy": per_class, "auc": micro.auc, "samples": len(test)}
    if test.class_count > 2:
        curves = ev.class_rocs(model, test)
        for c, curve in enumerate(curves):
            ev.write_roc_csv(d / f"{stem}-class{c}.csv", curve)
        out["class_auc"] = [c.auc for c in curves]
    return out


def eval_seed(exp, out, seed, method, force=False):
    d = _seed_dir(out, seed)
    model = load_trained(exp, out, seed, method, force)
    metrics = {"method": method, "seed": seed, "config_digest": exp.digest()}
    metrics["test"] = _score(model, load_set(exp, out, seed, "test", force), d, f"roc-{method}")
    if exp.family == "ghz3":
        metrics["test-lu"] = _score(model, load_set(exp, out, seed, "test-lu", force), d, f"roc-{method}-lu")
    ev.write_json(d / f"metrics-{method}.json", metrics)
    return metrics


def sweep_seed(exp, out, seed, method, force=False):
    d = _seed_dir(out, seed)
    model = load_trained(exp, out, seed, method, force)
    if model.input_dim != dg.SCHEME_DIMS["GHZ"]:
        raise CliError(EXIT_DATA, f"model expects feature dimension {model.input_dim}, "
                                  f"sweep states have feature dimension {dg.SCHEME_DIMS['GHZ']}")
    result = {"method": method, "seed": seed, "config_digest": exp.digest(), "n": exp.n}
    try:
        est = ev.estimate_bound(model, exp.n, seed=seed)
    except ev.NoBoundFound as exc:
        result.update(b_hat=None, error=str(exc))
    else:
        ev.write_bound_csv(d / f"bound-{method}.csv", est)
        result.update(b_hat=est.b_hat, n1=est.n1, h=est.h, reference=est.reference,
                      relative_error=est.relative_error)
    ev.write_json(d / f"bound-{method}.json", result)
    return result


# --- summaries and manifest ------------------------------------------------------------

def _stats(values):
    a = np.asarray(values, dtype=float)
    return {"mean": float(np.mean(a)), "std": float(np.std(a)), "values": [float(v) for v in a]}


def summarize(exp, method, metrics):
    out = {"method": method, "config_digest": exp.digest(), "seeds": [m["seed"] for m in metrics]}
    for key in ("test", "test-lu"):
        if key not in metrics[0]:
            continue
        rows = [m[key] for m in metrics]
        block = {"accuracy": _stats([r["accuracy"] for r in rows]), "auc": _stats([r["auc"] for r in rows])}
        per = np.array([r["per_class_accuracy"] for r in rows])
        block["per_class_accuracy_mean"] = [float(v) for v in per.mean(axis=0)]
        out[key] = block
    return out


def summarize_bounds(exp, method, results):
    found = [r for r in results if r["b_hat"] is not None]
    out = {"method": method, "config_digest": exp.digest(), "n": exp.n, "a": exp.a,
           "seeds": [r["seed"] for r in results], "b_hat": [r["b_hat"] for r in results],
           "found": len(found)}
    if found:
        ref = found[0]["reference"]
        mean = float(np.mean([r["b_hat"] for r in found]))
        out["mean_b_hat"] = mean
        out["reference"] = ref
        if ref is not None:
            # both readings of the relative-error statistic
            out["relative_error_of_mean"] = ev.relative_error(mean, ref)
            out["mean_relative_error"] = float(np.mean([r["relative_error"] for r in found]))
    return out


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(exp, out):
    out = Path(out)
    files = {}
    for p in sorted(out.rglob("*")):
        rel = p.relative_to(out).as_posix()
        if p.is_file() and rel != "manifest.json" and not p.name.startswith("timing-"):
            files[rel] = _sha256(p)
    ev.write_json(out / "manifest.json", {"config": exp.to_dict(), "config_digest": exp.digest(),
                                          "files": files})


def _check_out(exp, out, force):
    path = Path(out) / "manifest.json"
    if not path.exists() or force:
        return
    try:
        found = json.loads(path.read_text()).get("config_digest")
    except (OSError, ValueError):
        raise CliError(EXIT_DATA, f"{path} is unreadable") from None
    if found != exp.digest():
        raise CliError(EXIT_USAGE, f"{out} holds experiment {found}, current config is {exp.digest()} "
                                   "(use --force or another --out)")


# --- driver ------------------------------------------------------------------------

def _map(fn, args, jobs):
    if jobs <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=min(jobs, len(args))) as pool:
        futures = [pool.submit(fn, *a) for a in args]
        return [f.result() for f in futures]


def _methods(arg):
    return METHODS if arg in (None, "all") else (arg,)


def cmd_generate(exp, args):
    _map(generate_seed, [(exp, args.out, s) for s in exp.seeds], args.jobs)
    log.info("wrote datasets for %d seed(s) to %s", len(exp.seeds), args.out)


def cmd_train(exp, args):
    for method in _methods(args.method):
        secs = _map(train_seed, [(exp, args.out, s, method, args.force) for s in exp.seeds], args.jobs)
        log.info("%s: trained %d seed(s) in %.1f s", method, len(secs), sum(secs))


def _present(exp, out, method):
    return all((_seed_dir(out, s) / f"model-{method}.txt").exists() for s in exp.seeds)


def _eval_methods(exp, args):
    methods = [m for m in _methods(args.method) if args.method not in (None, "all") or _present(exp, args.out, m)]
    if not methods:
        raise CliError(EXIT_DATA, f"no trained models in {args.out} (run train first)")
    return methods


def cmd_eval(exp, args):
    for method in _eval_methods(exp, args):
        metrics = _map(eval_seed, [(exp, args.out, s, method, args.force) for s in exp.seeds], args.jobs)
        summary = summarize(exp, method, metrics)
        ev.write_json(Path(args.out) / f"summary-{method}.json", summary)
        acc = summary["test"]["accuracy"]
        log.info("%s: accuracy %.4f +- %.4f, auc %.4f", method, acc["mean"], acc["std"],
                 summary["test"]["auc"]["mean"])


def cmd_sweep_bound(exp, args):
    if exp.family != "bound":
        raise CliError(EXIT_USAGE, "sweep-bound needs a bound-* experiment")
    for method in _eval_methods(exp, args):
        results = _map(sweep_seed, [(exp, args.out, s, method, args.force) for s in exp.seeds], args.jobs)
        summary = summarize_bounds(exp, method, results)
        ev.write_json(Path(args.out) / f"bound-summary-{method}.json", summary)
        log.info("%s: b_hat %s", method, summary["b_hat"])


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "eval": cmd_eval, "sweep-bound": cmd_sweep_bound}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(EXIT_USAGE, f"{self.prog}: error: {message}")


def _seed_list(text):
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def build_parser():
    p = _Parser(prog="entangle-ssl", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON experiment config (may name a preset and override fields)")
    p.add_argument("--preset", help="named experiment preset")
    p.add_argument("--method", choices=(*METHODS, "all"), help="training method (default: all)")
    p.add_argument("--seed-list", type=_seed_list, help="comma-separated seeds, e.g. 0,1,2")
    p.add_argument("--jobs", type=int, default=None, help="parallel seeds (default $ENTANGLE_SSL_THREADS or 1)")
    p.add_argument("--out", help="output directory (default runs/<name>)")
    p.add_argument("--force", action="store_true", help="ignore config-digest mismatches")
    p.add_argument("--quiet", action="store_true")
    return p


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CliError(EXIT_USAGE, f"cannot read config {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise CliError(EXIT_USAGE, f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise CliError(EXIT_USAGE, f"config {path} must hold a JSON object")
    return data


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    overrides = _load_config(args.config)
    if args.config is None and args.preset is None:
        raise CliError(EXIT_USAGE, "give --config or --preset")
    if args.jobs is None:
        try:
            args.jobs = int(os.environ.get("ENTANGLE_SSL_THREADS", "1"))
        except ValueError:
            raise CliError(EXIT_USAGE, "ENTANGLE_SSL_THREADS must be an integer") from None
    if args.jobs < 1:
        raise CliError(EXIT_USAGE, "--jobs must be >= 1")
    try:
        exp = resolve(args.preset, overrides, args.seed_list)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, f"invalid config: {exc}") from None
    args.out = args.out or overrides.get("out") or os.path.join("runs", exp.name)
    _check_out(exp, args.out, args.force)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    COMMANDS[args.command](exp, args)
    write_manifest(exp, args.out)


def main(argv=None):
    try:
        run(argv)
    except CliError as exc:
        print(f"entangle-ssl: {exc.message}", file=sys.stderr)
        return exc.code
    except nn.NonFiniteError as exc:
        print(f"entangle-ssl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"entangle-ssl: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
