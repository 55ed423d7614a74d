"""Command line entry point.

Subcommands::

    phylolex simulate --out DIR --seed N
    phylolex train    --wordlist W --out DIR --seed N
    phylolex build    --method {cc,pmi,msa} --wordlist W [--model M] --out DIR
    phylolex nj       --matrix matrix.phy --out tree.nwk
    phylolex eval     --inferred T --gold G [--mode exact|sampled|auto] --out report.tsv

Every option can also come from an INI file given with ``--config`` (section
``[pipeline]``, keys are option names with dashes or underscores); flags on
the command line win. Each run writes the resolved configuration as
``config.ini`` (or ``<out>.config.ini`` for single-file outputs) so that
``--config`` on the snapshot reproduces the run byte for byte.

Exit codes: 0 success, 1 input or configuration error, 2 numerical or domain
failure (including training errors such as a wordlist without related
language pairs).
"""
from __future__ import annotations

import argparse
import configparser
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import charmatrix as cm
from . import pairing, phmm
from .errors import ConfigError, DomainError, PhyloLexError, TrainingError
from .msa import MsaConfig, write_msa
from .tree import gqd, neighbor_joining, read_newick
from .wordlist import DEFAULT_COLUMNS, Alphabet, filter_doculects, read_wordlist, select_top_concepts, write_wordlist

log = logging.getLogger("phylolex")

SECTION = "pipeline"
# runtime-only settings: they never change outputs, so they stay out of snapshots
RUNTIME_KEYS = {"config", "out", "threads", "command", "func", "verbose"}


# ---------------------------------------------------------------------------
# configuration


def read_config(path) -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not cp.has_section(SECTION):
        raise ConfigError(f"config {path} has no [{SECTION}] section")
    return {k.replace("-", "_"): v for k, v in cp.items(SECTION)}


def write_snapshot(args: argparse.Namespace, path: Path):
    cp = configparser.ConfigParser(interpolation=None)
    cp[SECTION] = {}
    for key in sorted(vars(args)):
        value = getattr(args, key)
        if key in RUNTIME_KEYS or value is None:
            continue
        cp[SECTION][key] = str(value)
    with open(path, "w", encoding="utf-8") as fh:
        cp.write(fh)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    val = str(text).strip().lower()
    if val in ("1", "true", "yes", "on"):
        return True
    if val in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ConfigError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _column_map(spec: str | None) -> dict[str, str]:
    cols = dict(DEFAULT_COLUMNS)
    if spec:
        for item in spec.split(","):
            if "=" not in item:
                raise ConfigError(f"bad column mapping {item!r}; expected role=name")
            role, name = item.split("=", 1)
            cols[role.strip()] = name.strip()
    return cols


def _alphabet(args) -> Alphabet:
    extra = args.extra_symbols or ""
    if args.alphabet:
        return Alphabet.from_file(args.alphabet, extra)
    return Alphabet(extra=extra)


def _load_wordlist(args, path, diag_path: Path | None = None):
    res = read_wordlist(path, _column_map(args.columns), _alphabet(args))
    if diag_path is not None:
        with open(diag_path, "w", encoding="utf-8") as fh:
            res.write_diagnostics(fh)
    elif res.diagnostics:
        res.write_diagnostics(sys.stderr)
    log.info("%s: %d rows, %d forms, %d rejected", path, res.rows_read, len(res.wordlist), res.rejected)
    wl = res.wordlist
    # doculect filtering first, then concept selection
    if args.keep_doculects:
        keep = [ln.strip() for ln in Path(args.keep_doculects).read_text(encoding="utf-8").splitlines() if ln.strip()]
        wl = filter_doculects(wl, keep)
    if args.top_concepts:
        wl = select_top_concepts(wl, args.top_concepts)
    return wl, res


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args):
    from .simulate import SimConfig, simulate

    _require(args, "out", "seed")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wl, tree = simulate(SimConfig(languages=args.languages, concepts=args.concepts, seed=args.seed))
    with open(out / "wordlist.tsv", "w", encoding="utf-8", newline="") as fh:
        write_wordlist(wl, fh)
    (out / "tree.nwk").write_text(tree.to_newick() + "\n", encoding="utf-8")
    write_snapshot(args, out / "config.ini")
    return 0


def cmd_train(args):
    _require(args, "wordlist", "out", "seed")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mining_path = args.mining_wordlist or args.wordlist
    wl, _ = _load_wordlist(args, mining_path, out / "rejected.tsv")

    distances = pairing.all_distances(wl, args.seed, args.calibration_size, args.threads)
    related = pairing.related_pairs(wl, args.threshold, distances=distances)
    with open(out / "related.tsv", "w", encoding="utf-8") as fh:
        pairing.write_related(related, fh)
    if not related:
        raise TrainingError("no probably-related language pairs; nothing to train on")
    pairs = list(pairing.sample_training_pairs(wl, related, args.seed))
    with open(out / "pairs.tsv", "w", encoding="utf-8") as fh:
        pairing.write_training_pairs(pairs, fh)

    n_hold = int(round(args.holdout * len(pairs)))
    train_pairs = [tuple(p) for p in pairs[: len(pairs) - n_hold]]
    held = [tuple(p) for p in pairs[len(pairs) - n_hold :]]
    config = phmm.TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        null_pseudocount=args.null_pseudocount,
    )
    model, report = phmm.train(train_pairs, config, alphabet=wl.alphabet)
    phmm.save_model(model, out / "model.json")
    lines = report.lines()
    if held:
        left, right, ys = zip(*held)
        prob = np.atleast_1d(model.probability(left, right))
        ys = np.asarray(ys)
        lines.append(f"# holdout_pairs\t{len(held)}")
        lines.append(f"# holdout_mean_positive\t{float(prob[ys == 1].mean())!r}")
        lines.append(f"# holdout_mean_negative\t{float(prob[ys == 0].mean())!r}")
    (out / "report.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if args.figures:
        from .plotting import plot_losses

        plot_losses(report.losses, out / "loss.png")
    write_snapshot(args, out / "config.ini")
    print(f"trained on {len(train_pairs)} pairs; final loss {report.losses[-1] if report.losses else float('nan'):.4f}; "
          f"accuracy {report.accuracy:.4f}")
    return 0


def _safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", label)


def cmd_build(args):
    _require(args, "wordlist", "out", "method")
    if args.method in ("pmi", "msa"):
        if not args.model:
            raise ConfigError(f"method {args.method} needs --model")
    if args.method == "pmi":
        _require(args, "seed")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    wl, res = _load_wordlist(args, args.wordlist, out / "rejected.tsv")

    msas = []
    if args.method == "cc":
        raw = cm.build_cc(wl)
    else:
        model = phmm.load_model(args.model)
        if model.params.alphabet != wl.alphabet:
            missing = sorted(set(wl.alphabet.symbols) - set(model.params.alphabet.symbols))
            if missing:
                raise ConfigError(f"model alphabet lacks symbols {''.join(missing)!r}")
            wl = type(wl)(wl.forms, model.params.alphabet)
        if args.method == "pmi":
            raw = cm.build_pmi(wl, model, cm.PmiConfig(threshold=args.cluster_threshold, seed=args.seed))
        else:
            msa_cfg = MsaConfig(identity_floor=args.identity_floor, extension_rounds=args.extension_rounds)
            raw, msas = cm.build_msa_matrix(wl, model, msa_cfg, args.threads)
    matrix, report = cm.prune(raw)
    matrix.validate()

    cm.export_phylip(matrix, out / "matrix.phy")
    with open(out / "matrix.csv", "w", encoding="utf-8", newline="") as fh:
        cm.write_csv(matrix, fh)
    with open(out / "labels.tsv", "w", encoding="utf-8") as fh:
        cm.write_labels(matrix, fh)
    diag = [
        f"method\t{args.method}",
        f"rows_read\t{res.rows_read}",
        f"rows_rejected\t{res.rejected}",
        f"forms\t{len(wl)}",
        f"taxa\t{len(matrix.taxa)}",
        f"concepts\t{len(wl.concepts)}",
        *report.lines(),
    ]
    (out / "diagnostics.tsv").write_text("\n".join(diag) + "\n", encoding="utf-8")
    if msas:
        mdir = out / "msa"
        mdir.mkdir(exist_ok=True)
        for k, msa in enumerate(msas, start=1):
            with open(mdir / f"{k:04d}_{_safe_name(msa.concept)}.msa", "w", encoding="utf-8") as fh:
                write_msa(msa, fh)
    if args.figures:
        from .plotting import plot_matrix

        plot_matrix(matrix, out / "matrix.png", title=f"{args.method} characters")
    write_snapshot(args, out / "config.ini")
    print(f"{args.method}: {len(matrix.taxa)} taxa x {len(matrix.labels)} characters ({report.raw} before pruning)")
    return 0


def cmd_nj(args):
    _require(args, "matrix", "out")
    labels = args.labels
    if labels is None:
        guess = Path(args.matrix).with_name("labels.tsv")
        labels = guess if guess.exists() else None
    matrix = cm.load_matrix(args.matrix, labels)
    tree = neighbor_joining(matrix)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(tree.to_newick() + "\n", encoding="utf-8")
    write_snapshot(args, out.with_name(out.name + ".config.ini"))
    return 0


def cmd_eval(args):
    _require(args, "inferred", "gold")
    gold = read_newick(args.gold)
    inferred = read_newick(args.inferred)
    shared = set(gold.leaf_labels()) & set(inferred.leaf_labels())
    mode = args.mode
    if mode == "auto":
        mode = "exact" if len(shared) <= args.exact_max_leaves else "sampled"
    if mode == "sampled":
        _require(args, "seed")
    result = gqd(gold, inferred, mode, args.samples, args.seed or 0, args.threads)
    line = result.line()
    print(line)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(line + "\n", encoding="utf-8")
        write_snapshot(args, out.with_name(out.name + ".config.ini"))
    return 0


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="INI file with a [pipeline] section")
    p.add_argument("--seed", type=int, help="random seed (required for stochastic stages)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; never changes outputs")
    p.add_argument("--out", help="output directory or file")
    p.add_argument("--figures", type=_bool, default=True, help="write PNG figures next to the outputs (true/false)")
    p.add_argument("-v", "--verbose", action="store_true")


def _wordlist_opts(p: argparse.ArgumentParser):
    p.add_argument("--wordlist", help="delimited wordlist with a header row")
    p.add_argument("--columns", help="role=column mapping, e.g. doculect=Glottocode,form=ASJP")
    p.add_argument("--alphabet", help="sound-class file, one symbol per line")
    p.add_argument("--extra-symbols", default="", help="symbols added to the alphabet, e.g. 'I1'")
    p.add_argument("--keep-doculects", help="file of doculect ids to keep, one per line")
    p.add_argument("--top-concepts", type=int, default=110, help="keep the N best-covered concepts (0 = all)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phylolex", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("simulate", help="write a synthetic wordlist and its generating tree")
    _common(p)
    p.add_argument("--languages", type=int, default=12)
    p.add_argument("--concepts", type=int, default=40)
    p.set_defaults(func=cmd_simulate)
    subs["simulate"] = p

    p = sub.add_parser("train", help="mine training pairs and train the pair-HMM classifier")
    _common(p)
    _wordlist_opts(p)
    p.add_argument("--mining-wordlist", help="separate wordlist for pair mining (default: --wordlist)")
    p.add_argument("--threshold", type=float, default=pairing.DEFAULT_THRESHOLD)
    p.add_argument("--calibration-size", type=int, default=pairing.DEFAULT_CALIBRATION)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=256)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--null-pseudocount", type=float, default=0.5)
    p.add_argument("--holdout", type=float, default=0.0, help="fraction of pairs held out for evaluation")
    p.set_defaults(func=cmd_train)
    subs["train"] = p

    p = sub.add_parser("build", help="build a binary character matrix")
    _common(p)
    _wordlist_opts(p)
    p.add_argument("--method", choices=("cc", "pmi", "msa"))
    p.add_argument("--model", help="model.json written by 'train'")
    p.add_argument("--cluster-threshold", type=float, default=0.5)
    p.add_argument("--identity-floor", type=float, default=0.1)
    p.add_argument("--extension-rounds", type=int, default=1)
    p.set_defaults(func=cmd_build)
    subs["build"] = p

    p = sub.add_parser("nj", help="neighbour-joining tree from a PHYLIP matrix")
    _common(p)
    p.add_argument("--matrix")
    p.add_argument("--labels", help="labels.tsv sidecar (default: next to the matrix)")
    p.set_defaults(func=cmd_nj)
    subs["nj"] = p

    p = sub.add_parser("eval", help="generalised quartet distance to a gold tree")
    _common(p)
    p.add_argument("--inferred")
    p.add_argument("--gold")
    p.add_argument("--mode", choices=("exact", "sampled", "auto"), default="auto")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--exact-max-leaves", type=int, default=200)
    p.set_defaults(func=cmd_eval)
    subs["eval"] = p

    parser._subcommands = subs  # type: ignore[attr-defined]
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        values = read_config(args.config)
        sub = parser._subcommands[args.command]  # type: ignore[attr-defined]
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    args.figures = _bool(args.figures)
    return args


def main(argv=None) -> int:
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))
    try:
        args = parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        return args.func(args)
    except PhyloLexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DomainError.exit_code


if __name__ == "__main__":
    sys.exit(main())
