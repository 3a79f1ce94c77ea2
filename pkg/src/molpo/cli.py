"""Command-line pipeline: data generation through training, fusion, and reports.

Commands: ``gen-data``, ``split``, ``build-triples``, ``train``,
``translate``, ``merge``, ``eval``, ``report``. Every command that writes an
artifact also writes a ``*.manifest.json`` next to it (atomically) recording
the resolved configuration, the package version, SHA-256 digests of all
inputs, and wall-clock time — checkpoints, records, and reports themselves
are byte-reproducible given a seed; manifests are not compared because of
the timing field.

Options may come from a ``--config`` file of ``key = value`` lines (keys are
the option names with underscores); explicit flags win over file values.

Exit codes: 0 success, 2 configuration errors, 3 data/file-format errors,
4 checkpoint-compatibility errors, 5 training divergence, 1 anything else.

The ``eval`` and ``report`` commands render PNG figures next to their CSV
and JSON outputs by default; pass ``--no-figures`` for a figure-free run.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shlex
import sys
import tempfile
import time

from . import __version__
from . import data as datamod
from . import evaluation as evalmod
from . import losses as lossmod
from . import merge as mergemod
from . import nli as nlimod
from . import policy as polmod
from . import training as trainmod
from .errors import (
    CompatibilityError,
    ConfigError,
    DataError,
    MolpoError,
    TrainingDivergedError,
)

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_GENERIC = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_COMPAT = 4
EXIT_DIVERGED = 5

_PRED_FIELDS = ("id", "direction", "source", "prediction")


# --------------------------------------------------------------------------
# manifests
# --------------------------------------------------------------------------

def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _config_echo(args: argparse.Namespace) -> dict:
    skip = {"func", "config"}
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip or callable(value):
            continue
        if isinstance(value, (list, tuple)):
            out[key] = [str(v) if not isinstance(v, (int, float, bool)) else v
                        for v in value]
        elif value is None or isinstance(value, (int, float, bool, str)):
            out[key] = value
        else:
            out[key] = str(value)
    return out


def _atomic_write_json(path, payload: dict) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_manifest(artifact, args, inputs, started: float, **extra) -> None:
    """Reproducibility record next to ``artifact`` (a file or directory)."""
    manifest = {
        "artifact": os.path.basename(str(artifact)),
        "command": args.command,
        "config": _config_echo(args),
        "version": __version__,
        "inputs": {str(p): _sha256_file(p) for p in inputs},
        "wall_clock_seconds": round(time.monotonic() - started, 6),
    }
    manifest.update(extra)
    if os.path.isdir(artifact):
        path = os.path.join(artifact, "manifest.json")
    else:
        path = f"{artifact}.manifest.json"
    _atomic_write_json(path, manifest)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_gen_data(args) -> int:
    started = time.monotonic()
    pairs = datamod.gen_toy_corpus(args.n, args.seed)
    datamod.write_pairs(args.out, pairs)
    _write_manifest(args.out, args, [], started)
    print(f"wrote {len(pairs)} pairs to {args.out}")
    return EXIT_OK


def cmd_split(args) -> int:
    started = time.monotonic()
    if len(args.fractions) != 3:
        raise ConfigError("--fractions takes exactly three values (train val test)")
    pairs = datamod.read_pairs(args.data)
    splits = datamod.split_dataset(pairs, args.fractions, args.seed)
    for name, split in zip(("train", "val", "test"), splits):
        out = f"{args.out_prefix}.{name}.jsonl"
        datamod.write_pairs(out, split)
        _write_manifest(out, args, [args.data], started)
        print(f"wrote {len(split)} pairs to {out}")
    return EXIT_OK


def cmd_build_triples(args) -> int:
    started = time.monotonic()
    pairs = datamod.read_pairs(args.data)
    generator = datamod.corruption_generator(args.strength)
    triples = datamod.build_triples(pairs, generator, args.seed)
    datamod.write_triples(args.out, triples)
    _write_manifest(args.out, args, [args.data], started)
    print(f"wrote {len(triples)} triples to {args.out}")
    return EXIT_OK


def _sniff_kto_records(path) -> list:
    """Accept either labeled examples or preference triples (expanded 2-per)."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                first = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: invalid JSON: {exc}") from exc
            if isinstance(first, dict) and "output" in first:
                return datamod.read_kto(path)
            return datamod.triples_to_kto(datamod.read_triples(path))
    raise DataError(f"{path}: no records")


def cmd_train(args) -> int:
    started = time.monotonic()
    method = args.method
    if method in ("dpo", "kto") and args.ref is None:
        raise ConfigError(f"--method {method} requires --ref: the objective "
                          "is defined against a frozen reference policy")
    if method in ("sft", "cpo") and args.ref is not None:
        raise ConfigError(f"--method {method} takes no reference model"
                          + (" (the contrastive objective is reference-free)"
                             if method == "cpo" else ""))
    loss_config = lossmod.LossConfig(beta=args.beta, lambda_p=args.lambda_p,
                                     lambda_d=args.lambda_d)
    train_config = trainmod.TrainConfig(
        method=method, epochs=args.epochs, batch_size=args.batch_size,
        lr=args.lr, seed=args.seed, loss=loss_config,
    )

    if method == "sft":
        records = datamod.read_pairs(args.data)
    elif method in ("dpo", "cpo"):
        records = datamod.read_triples(args.data)
    else:
        records = _sniff_kto_records(args.data)

    if args.init is not None:
        params = mergemod.load_checkpoint(args.init)
    else:
        chars = datamod.corpus_alphabet()
        model_config = polmod.ModelConfig(
            vocab_size=len(polmod.SPECIAL_NAMES) + len(chars),
            dim=args.dim, blocks=args.blocks, heads=args.heads,
            max_seq=args.max_seq, seed=args.seed, chars=chars,
        )
        params = polmod.init_params(model_config)

    ref = None
    if args.ref is not None:
        ref = mergemod.load_checkpoint(args.ref)
        if ref.config.fingerprint() != params.config.fingerprint():
            raise CompatibilityError("reference and policy checkpoints have "
                                     "different architecture fingerprints")

    result = trainmod.train(params, records, train_config, ref=ref,
                            log_path=args.log)
    mergemod.save_checkpoint(result.params, args.out)
    inputs = [args.data] + [p for p in (args.init, args.ref) if p is not None]
    _write_manifest(args.out, args, inputs, started, loss_curve=result.curve)
    print(f"trained {method} for {len(result.curve)} steps; "
          f"final loss {result.curve[-1]:.6f}; wrote {args.out}")
    return EXIT_OK


def cmd_translate(args) -> int:
    started = time.monotonic()
    params = mergemod.load_checkpoint(args.model)
    pairs = datamod.read_pairs(args.data)
    rows = trainmod.translate_pairs(params, pairs, max_new=args.max_new)
    with open(args.out, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
    _write_manifest(args.out, args, [args.model, args.data], started)
    print(f"wrote {len(rows)} predictions to {args.out}")
    return EXIT_OK


def cmd_merge(args) -> int:
    started = time.monotonic()
    if len(args.weights) != len(args.models):
        raise ConfigError(f"{len(args.models)} model(s) but "
                          f"{len(args.weights)} weight(s)")
    if any(w <= 0 for w in args.weights):
        raise ConfigError("merge weights must be positive")
    merge_config = mergemod.MergeConfig(density=args.density, lam=args.lam)
    checkpoints = [mergemod.Checkpoint.load(p) for p in args.models]

    if args.algo in ("slerp", "lerp"):
        if len(checkpoints) != 2:
            raise ConfigError(f"{args.algo} merges exactly two models")
        if args.base is not None:
            raise ConfigError(f"{args.algo} takes no --base")
        t = mergemod.ratio_to_t(args.weights[0], args.weights[1])
        if args.algo == "slerp":
            merged = mergemod.slerp_merge(checkpoints[0], checkpoints[1], t,
                                          merge_config)
        else:
            merged = mergemod.lerp_merge(checkpoints[0], checkpoints[1], t)
    else:
        if args.base is None:
            raise ConfigError("ties requires --base (deltas are taken "
                              "against a shared starting point)")
        base = mergemod.Checkpoint.load(args.base)
        merged = mergemod.ties_merge(base, checkpoints, args.weights,
                                     merge_config)

    merged.save(args.out)
    inputs = list(args.models) + ([args.base] if args.base else [])
    _write_manifest(args.out, args, inputs, started)
    print(f"merged {len(checkpoints)} checkpoint(s) with {args.algo}; "
          f"wrote {args.out}")
    return EXIT_OK


def _read_predictions(path) -> dict[str, dict]:
    rows: dict[str, dict] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict) or set(obj) != set(_PRED_FIELDS):
                raise DataError(f"{path}:{lineno}: expected exactly fields "
                                f"{list(_PRED_FIELDS)}")
            if obj["id"] in rows:
                raise DataError(f"{path}:{lineno}: duplicate id {obj['id']!r}")
            rows[obj["id"]] = obj
    return rows


def _build_scorer(spec: str | None, timeout: float):
    if spec is None:
        return None
    if spec == "lexical":
        return nlimod.LexicalOverlapScorer()
    if spec.startswith(("http://", "https://")):
        return nlimod.HttpScorer(spec, timeout=timeout)
    if spec.startswith("cmd:"):
        cmd = shlex.split(spec[len("cmd:"):])
        if not cmd:
            raise ConfigError("--nli-scorer cmd: needs a command line")
        return nlimod.SubprocessScorer(cmd, timeout=timeout)
    raise ConfigError("--nli-scorer must be 'lexical', 'cmd:<command line>', "
                      "or an http(s) URL")


def _align_predictions(preds: dict[str, dict], refs) -> list[evalmod.PairRecord]:
    ref_ids = [p.id for p in refs]
    missing_pred = [i for i in ref_ids if i not in preds]
    extra_pred = sorted(set(preds) - set(ref_ids))
    if missing_pred or extra_pred:
        def head(ids):
            return ", ".join(ids[:10]) + (" …" if len(ids) > 10 else "")
        parts = []
        if missing_pred:
            parts.append(f"ids missing from predictions: {head(missing_pred)}")
        if extra_pred:
            parts.append(f"ids missing from references: {head(extra_pred)}")
        raise DataError("prediction/reference files are not aligned: "
                        + "; ".join(parts))
    records = []
    for pair in refs:
        row = preds[pair.id]
        if row["direction"] != pair.direction:
            raise DataError(f"id {pair.id!r}: direction mismatch "
                            f"({row['direction']!r} vs {pair.direction!r})")
        records.append(evalmod.PairRecord(
            id=pair.id, direction=pair.direction, prediction=row["prediction"],
            reference=pair.target, source=pair.source,
        ))
    return records


def cmd_eval(args) -> int:
    started = time.monotonic()
    preds = _read_predictions(args.pred)
    refs = datamod.read_pairs(args.ref)
    pair_records = _align_predictions(preds, refs)
    scorer = _build_scorer(args.nli_scorer, args.nli_timeout)
    records = evalmod.evaluate_records(pair_records, scorer=scorer)

    os.makedirs(args.outdir, exist_ok=True)
    evalmod.write_metric_records(os.path.join(args.outdir, "records.jsonl"), records)

    report_payload = {}
    for direction in evalmod.DIRECTIONS:
        subset = [r for r in records if r.direction == direction]
        if not subset:
            continue
        report = evalmod.aggregate_report(subset)
        report_payload[direction] = report.to_json_dict()
        for name, summary in sorted(report.metrics.items()):
            csv_path = os.path.join(args.outdir, f"hist_{direction}_{name}.csv")
            evalmod.write_histogram_csv(csv_path, summary.histogram)
        if not args.no_figures:
            from . import figures
            figures.render_report_figures(args.outdir, report,
                                          prefix=f"fig_{direction}")
        print(f"{direction}: {report.count} pairs, win rate {report.win_rate:.4f}"
              + (f", {report.nli_excluded} not scored for entailment"
                 if report.nli_excluded else ""))
    _atomic_write_json(os.path.join(args.outdir, "report.json"), report_payload)
    _write_manifest(args.outdir, args, [args.pred, args.ref], started)
    return EXIT_OK


def cmd_report(args) -> int:
    started = time.monotonic()
    names = args.names if args.names else [os.path.basename(os.path.normpath(p))
                                           for p in args.inputs]
    if len(names) != len(args.inputs):
        raise ConfigError(f"{len(args.inputs)} input(s) but {len(names)} name(s)")
    if len(set(names)) != len(names):
        raise ConfigError("model names must be unique")

    reports = {}
    report_files = []
    for name, indir in zip(names, args.inputs):
        path = os.path.join(indir, "report.json")
        if not os.path.exists(path):
            raise DataError(f"{indir}: no report.json (expected an eval output "
                            "directory)")
        with open(path, "r", encoding="utf-8") as fh:
            try:
                reports[name] = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: invalid JSON: {exc}") from exc
        report_files.append(path)

    os.makedirs(args.outdir, exist_ok=True)
    _atomic_write_json(os.path.join(args.outdir, "summary.json"), reports)

    directions = sorted({d for r in reports.values() for d in r})
    mean_keys = sorted({f"mean_{metric}"
                        for r in reports.values() for d in r.values()
                        for metric in d.get("metrics", {})})
    rate_keys = sorted({f"rate_{k}"
                        for r in reports.values() for d in r.values()
                        for k in d.get("rates", {})})
    header = (["model", "direction", "count", "wins", "win_rate",
               "nli_excluded"] + rate_keys + mean_keys)
    lines = [",".join(header)]
    for name in names:
        for direction in directions:
            d = reports[name].get(direction)
            if d is None:
                continue
            row = [name, direction, str(d["count"]), str(d["wins"]),
                   repr(d["win_rate"]), str(d["nli_excluded"])]
            for key in rate_keys:
                value = d.get("rates", {}).get(key[len("rate_"):])
                row.append("" if value is None else repr(value))
            for key in mean_keys:
                entry = d.get("metrics", {}).get(key[len("mean_"):])
                row.append("" if entry is None else repr(entry["mean"]))
            lines.append(",".join(row))
    csv_path = os.path.join(args.outdir, "summary.csv")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")

    if not args.no_figures:
        from . import figures
        series = {}
        for direction in directions:
            series[direction] = [reports[n].get(direction, {}).get("win_rate", 0.0)
                                 for n in names]
        if series:
            figures.render_comparison_png(
                os.path.join(args.outdir, "fig_win_rate.png"),
                names, series, title="win rate by model", ylabel="win rate")
    _write_manifest(args.outdir, args, report_files, started)
    print(f"summarized {len(names)} model(s) into {csv_path}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="molpo",
        description="Preference-optimization toolkit for bidirectional "
                    "language-molecule translation at desk scale.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None,
                        help="key = value file; explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common],
                       help="generate the deterministic toy corpus")
    p.add_argument("--n", type=int, required=True, help="number of pairs")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("split", parents=[common],
                       help="split a pair file into train/val/test")
    p.add_argument("--data", required=True)
    p.add_argument("--fractions", type=float, nargs="+", default=[0.8, 0.1, 0.1])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("build-triples", parents=[common],
                       help="derive preference triples by corrupting gold targets")
    p.add_argument("--data", required=True)
    p.add_argument("--strength", type=float, default=0.4,
                   help="corruption strength in (0, 1]")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_triples)

    p = sub.add_parser("train", parents=[common],
                       help="train with sft, dpo, cpo, or kto")
    p.add_argument("--method", choices=trainmod.METHODS, required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--init", default=None, help="checkpoint to start from")
    p.add_argument("--ref", default=None,
                   help="frozen reference checkpoint (dpo/kto only)")
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--lambda-p", type=float, default=1.0)
    p.add_argument("--lambda-d", type=float, default=1.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dim", type=int, default=48)
    p.add_argument("--blocks", type=int, default=1)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--max-seq", type=int, default=640)
    p.add_argument("--log", default=None, help="per-step JSONL training log")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("translate", parents=[common],
                       help="greedy-decode predictions for a pair file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--max-new", type=int, default=trainmod.MAX_NEW_TOKENS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("merge", parents=[common],
                       help="fuse checkpoints with ties, slerp, or lerp")
    p.add_argument("--algo", choices=("ties", "slerp", "lerp"), required=True)
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--weights", type=float, nargs="+", required=True)
    p.add_argument("--base", default=None,
                   help="shared starting checkpoint (ties only)")
    p.add_argument("--density", type=float, default=0.2)
    p.add_argument("--lam", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("eval", parents=[common],
                       help="score predictions against references")
    p.add_argument("--pred", required=True, help="translate output JSONL")
    p.add_argument("--ref", required=True, help="gold pair JSONL")
    p.add_argument("--nli-scorer", default=None,
                   help="'lexical', 'cmd:<command>', or an http(s) URL")
    p.add_argument("--nli-timeout", type=float, default=nlimod.DEFAULT_TIMEOUT)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", parents=[common],
                       help="summarize several eval directories side by side")
    p.add_argument("--inputs", nargs="+", required=True,
                   help="eval output directories")
    p.add_argument("--names", nargs="+", default=None)
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


# --------------------------------------------------------------------------
# config file support
# --------------------------------------------------------------------------

def _load_config_file(path) -> dict[str, str]:
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key = value")
                key, _, raw = line.partition("=")
                values[key.strip().replace("-", "_")] = raw.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def _coerce(action: argparse.Action, raw: str):
    if isinstance(action, argparse._StoreTrueAction):
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"option {action.dest!r}: expected a boolean, got {raw!r}")
    convert = action.type if action.type is not None else str
    try:
        if action.nargs in ("+", "*") or isinstance(action.nargs, int):
            return [convert(part) for part in raw.split()]
        return convert(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"option {action.dest!r}: bad value {raw!r}: {exc}") from exc


def _subparser_for(parser: argparse.ArgumentParser, command: str):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)  # pragma: no cover - parser always has subcommands


def _prescan(argv) -> tuple[str | None, str | None]:
    """Find the subcommand and any --config value without full parsing.

    The config file may supply required options, so it must be applied
    before argparse enforces them.
    """
    command = config_path = None
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok == "--config" and i + 1 < len(argv):
            config_path = argv[i + 1]
            i += 2
            continue
        if tok.startswith("--config="):
            config_path = tok.split("=", 1)[1]
        elif command is None and not tok.startswith("-"):
            command = tok
        i += 1
    return command, config_path


def _parse_args(argv) -> argparse.Namespace:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    command, config_path = _prescan(argv)
    if config_path is not None and command is not None:
        values = _load_config_file(config_path)
        try:
            subparser = _subparser_for(parser, command)
        except KeyError:
            subparser = None  # let argparse report the unknown command
        if subparser is not None:
            known = {}
            for action in subparser._actions:
                if action.dest in values:
                    known[action.dest] = _coerce(action, values.pop(action.dest))
            if values:
                raise ConfigError(f"unknown option(s) in {config_path}: "
                                  f"{', '.join(sorted(values))}")
            subparser.set_defaults(**known)
            for action in subparser._actions:
                if action.dest in known:
                    action.required = False
    return parser.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = _parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CompatibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPAT
    except mergemod.CheckpointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except MolpoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GENERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GENERIC


if __name__ == "__main__":
    sys.exit(main())
