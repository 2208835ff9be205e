"""``brt`` command line: verification suites, toy training, evaluation and sweeps.

Exit status is 0 on success, 1 on a runtime failure and 2 on a usage error.
Every command accepts ``--config FILE`` (see :mod:`brt.config`); explicit
flags override the file, which overrides the built-in defaults. CSV outputs
start with ``#`` lines echoing the resolved configuration.
"""

import argparse
import math
import sys
import time
from pathlib import Path

from . import config as cfgmod
from ._validation import ContractViolation
from .decoder import EarlyStopConfig
from .io import load_dataset, load_model, save_dataset, save_model
from .metrics import REPORT_COLUMNS, format_value, write_report
from .risk import Variant
from .toy import BRTTransducer, TrainingDiverged, evaluate, generate_dataset
from .verify import SUITES

EXTRA_COLUMNS = ("mean_last_emission_frame", "stopped_early_rate", "decode_seconds")
SWEEP_COLUMNS = REPORT_COLUMNS + EXTRA_COLUMNS + ("status",)

DATA_KEYS = ("n_utts", "eval_utts", "noise", "vocab", "eval_seed_offset", "seed")
MODEL_KEYS = ("variant", "lambda", "m", "hidden", "left_context", "right_context", "context_mode",
              "epochs", "lr", "momentum", "clip")
DECODE_KEYS = ("beam", "early_stop", "threshold_d", "stable_k", "stable_f", "frame_ms", "dcl_ms")


class UsageError(Exception):
    pass


def _float_list(values):
    out = []
    for v in values:
        out.extend(float(x) for x in str(v).split(",") if x.strip())
    return out


def _int_list(values):
    return [int(x) for x in _float_list(values)]


# ---------------------------------------------------------------------------
# experiment plumbing shared with the acceptance tests

def train_set(cfg, seed):
    return generate_dataset(cfg["n_utts"], V=cfg["vocab"], noise_std=cfg["noise"], seed=seed)


def eval_set(cfg, seed):
    return generate_dataset(cfg["eval_utts"], V=cfg["vocab"], noise_std=cfg["noise"],
                            seed=seed + cfg["eval_seed_offset"])


def build_estimator(cfg, variant=None, lam=None, seed=None):
    """A :class:`BRTTransducer` configured from resolved settings."""
    variant = Variant.parse(variant or cfg["variant"]).value
    return BRTTransducer(
        variant=variant, lam=float(cfg["lambda"] if lam is None else lam), m=cfg["m"],
        hidden=cfg["hidden"], left_context=cfg["left_context"], right_context=cfg["right_context"],
        context_mode=cfg["context_mode"], epochs=cfg["epochs"], lr=cfg["lr"],
        momentum=cfg["momentum"], clip=cfg["clip"], vocab_size=cfg["vocab"],
        seed=cfg["seed"] if seed is None else seed,
        beam=cfg.get("beam", 10), early_stop=cfg.get("early_stop", "on") == "on",
        threshold_d=cfg.get("threshold_d", -10.0), stable_k=cfg.get("stable_k", 3),
        stable_f=cfg.get("stable_f", 5))


def fit(estimator, utts):
    return estimator.fit([u.features for u in utts], [u.labels for u in utts])


def decode_config(cfg):
    return EarlyStopConfig(cfg["early_stop"] == "on", cfg["threshold_d"], cfg["stable_k"], cfg["stable_f"])


def metric_rows(model, utts, cfg, experiment_id):
    """One report row per DCL value for ``model`` evaluated on ``utts``."""
    start = time.perf_counter()
    rep = evaluate(model, utts, beam=cfg["beam"], early_stop=decode_config(cfg), frame_ms=cfg["frame_ms"])
    seconds = time.perf_counter() - start
    rows = []
    for dcl in cfg["dcl_ms"]:
        rows.append({
            "experiment_id": experiment_id, "variant": Variant.parse(model.variant).value,
            "lambda": float(model.lam), "seed": model.seed, "wer": rep["wer"],
            "mean_df": rep["mean_df"], "mean_dl_frames": rep["mean_dl"], "dcl_ms": float(dcl),
            "overall_latency_ms": float(dcl) + rep["mean_dl"] * cfg["frame_ms"],
            "mean_last_emission_frame": rep["mean_last_emission_frame"],
            "stopped_early_rate": rep["stopped_early_rate"], "decode_seconds": seconds,
        })
    return rows


def _write_csv(path, resolved, rows, columns):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in cfgmod.echo_lines(resolved):
            fh.write(line + "\n")
        write_report(fh, rows, columns)


# ---------------------------------------------------------------------------
# commands

def cmd_verify(args, cfg_file):
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(sorted(SUITES))}")
    n_default = 50 if args.suite == "gradient" else 100
    resolved = {"suite": args.suite, "seed": cfgmod.resolve(["seed"], cfg_file, {"seed": args.seed})["seed"],
                "n_cases": args.n_cases or n_default}
    for line in cfgmod.echo_lines(resolved):
        print(line)
    rep = SUITES[args.suite](resolved["seed"], resolved["n_cases"])
    for name, (err, tol) in sorted(rep.checks.items()):
        print(f"{name}: worst={format_value(float(err))} tol={tol:g} {'PASS' if err <= tol else 'FAIL'}")
    print(f"suite={rep.name} cases={rep.n_cases} worst={format_value(float(rep.worst))} "
          f"{'PASS' if rep.passed else 'FAIL'}")
    return 0 if rep.passed else 1


def cmd_data(args, cfg_file):
    resolved = cfgmod.resolve(DATA_KEYS, cfg_file, vars(args))
    split = args.split
    utts = train_set(resolved, resolved["seed"]) if split == "train" else eval_set(resolved, resolved["seed"])
    with open(args.out, "wb") as fh:
        save_dataset(fh, utts, dict(resolved, split=split))
    print(f"wrote {len(utts)} utterances to {args.out}")
    return 0


def _load_utts(path):
    with open(path, "rb") as fh:
        return load_dataset(fh)[0]


def cmd_train(args, cfg_file):
    resolved = cfgmod.resolve(DATA_KEYS + MODEL_KEYS, cfg_file, vars(args))
    Variant.parse(resolved["variant"])
    utts = _load_utts(args.data) if args.data else train_set(resolved, resolved["seed"])
    model = fit(build_estimator(resolved), utts)
    out = Path(args.out)
    with open(out, "wb") as fh:
        save_model(fh, model)
    trace_path = Path(args.trace) if args.trace else out.with_suffix(".trace.csv")
    _write_csv(trace_path, resolved, [{"epoch": i, "loss": float(v)} for i, v in enumerate(model.loss_trace_)],
               ("epoch", "loss"))
    final = model.loss_trace_[-1]
    print(f"final loss {format_value(float(final))}; wrote {out} and {trace_path}")
    return 0 if math.isfinite(final) else 1


def cmd_eval(args, cfg_file):
    resolved = cfgmod.resolve(DATA_KEYS + DECODE_KEYS, cfg_file, vars(args))
    rows, seeds = [], []
    for path in args.model:
        if not Path(path).is_file():
            raise FileNotFoundError(f"checkpoint {path} not found")
        with open(path, "rb") as fh:
            model = load_model(fh)
        # without --seed each checkpoint is scored on the eval split of its own training seed
        seed = args.seed if args.seed is not None else model.seed
        seeds.append(seed)
        utts = _load_utts(args.data) if args.data else eval_set(resolved, seed)
        rows.extend(metric_rows(model, utts, resolved, Path(path).stem))
    resolved["model"] = ",".join(args.model)
    resolved["seed"] = seeds
    resolved["data"] = args.data or "generated"
    _write_csv(args.out, resolved, rows, REPORT_COLUMNS + EXTRA_COLUMNS)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_sweep(args, cfg_file):
    keys = DATA_KEYS + MODEL_KEYS + DECODE_KEYS + ("lambdas", "seeds")
    resolved = cfgmod.resolve(keys, cfg_file, vars(args))
    variant = Variant.parse(resolved["variant"]).value
    rows = []
    for lam in sorted(resolved["lambdas"]):
        for seed in sorted(resolved["seeds"]):
            exp_id = f"{variant}-lam{lam:g}-seed{seed}"
            try:
                model = fit(build_estimator(resolved, variant, lam, seed), train_set(resolved, seed))
                rows.extend(dict(r, status="ok") for r in metric_rows(model, eval_set(resolved, seed),
                                                                     resolved, exp_id))
            except (TrainingDiverged, ContractViolation, FloatingPointError) as exc:
                print(f"leg {exp_id} failed: {exc}", file=sys.stderr)
                for dcl in resolved["dcl_ms"]:
                    row = {c: float("nan") for c in SWEEP_COLUMNS}
                    row.update({"experiment_id": exp_id, "variant": variant, "lambda": float(lam),
                                "seed": seed, "dcl_ms": float(dcl), "status": "failed"})
                    rows.append(row)
    rows.sort(key=lambda r: (r["lambda"], r["seed"], r["dcl_ms"]))
    _write_csv(args.out, resolved, rows, SWEEP_COLUMNS)
    n_failed = sum(r["status"] != "ok" for r in rows)
    print(f"wrote {len(rows)} rows to {args.out} ({n_failed} failed)")
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")

    def data_opts(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--n-utts", dest="n_utts", type=int)
        p.add_argument("--eval-utts", dest="eval_utts", type=int)
        p.add_argument("--noise", type=float)
        p.add_argument("--vocab", type=int)

    def model_opts(p):
        p.add_argument("--variant", choices=["vanilla", "offline", "streaming"])
        p.add_argument("--lambda", dest="lambda", type=float)
        p.add_argument("--m", type=int)
        p.add_argument("--epochs", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--momentum", type=float)
        p.add_argument("--clip", type=float)
        p.add_argument("--hidden", type=int)
        p.add_argument("--left-context", dest="left_context", type=int)
        p.add_argument("--right-context", dest="right_context", type=int)

    def decode_opts(p):
        p.add_argument("--beam", type=int)
        p.add_argument("--early-stop", dest="early_stop", choices=["on", "off"])
        p.add_argument("--threshold-d", dest="threshold_d", type=float)
        p.add_argument("--stable-k", dest="stable_k", type=int)
        p.add_argument("--stable-f", dest="stable_f", type=int)
        p.add_argument("--frame-ms", dest="frame_ms", type=float)
        p.add_argument("--dcl-ms", dest="dcl_ms", nargs="+", help="comma or space separated list")

    parser = argparse.ArgumentParser(prog="brt", description="Bayes-risk transducer toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="run a seeded verification suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-cases", dest="n_cases", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("data", parents=[common], help="write a toy dataset (BRTD)")
    data_opts(p)
    p.add_argument("--split", choices=["train", "eval"], default="train")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_data)

    p = sub.add_parser("train", parents=[common], help="train a toy transducer (BRTM checkpoint)")
    data_opts(p)
    model_opts(p)
    p.add_argument("--data", help="BRTD training set; generated from --seed when omitted")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="loss trace CSV (default: next to the checkpoint)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="decode and score checkpoints")
    p.add_argument("--model", nargs="+", required=True)
    data_opts(p)
    decode_opts(p)
    p.add_argument("--data", help="BRTD evaluation set; generated from the seed when omitted")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", parents=[common], help="factorial lambda x DCL x seed trade-off sweep")
    data_opts(p)
    model_opts(p)
    decode_opts(p)
    p.add_argument("--lambdas", nargs="+")
    p.add_argument("--seeds", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    for key, conv in (("dcl_ms", _float_list), ("lambdas", _float_list), ("seeds", _int_list)):
        if getattr(args, key, None) is not None:
            try:
                setattr(args, key, conv(getattr(args, key)))
            except ValueError:
                parser.error(f"--{key.replace('_', '-')} expects numbers")
    try:
        cfg_file = cfgmod.load_config(args.config) if args.config else {}
        return args.func(args, cfg_file)
    except (UsageError, cfgmod.ConfigError) as exc:
        print(f"brt: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ContractViolation, TrainingDiverged) as exc:
        print(f"brt: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
