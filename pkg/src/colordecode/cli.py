"""Command line interface.

Subcommands:

    decode      one logits file -> colored transcript
    eval        score a manifest with one fusion method
    gridsearch  pick hyperparameters on a validation manifest
    merge-lm    color-rename and union several ARPA models
    synth       generate a synthetic corpus with lexicons and models
    verify      cross-check the search against the exhaustive oracle

Exit codes: 0 success, 1 data problems (unreadable or malformed inputs,
failed verification), 2 usage errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .corpus import (
    SynthesisSpec,
    default_alphabet,
    format_colored,
    language_models,
    read_lexicon,
    read_logits,
    read_manifest,
    synthesize_corpus,
    write_colored_transcript,
)
from .decoder import DecoderConfig, decode
from .evaluation import (
    GridSpec,
    build_runtime,
    calibration_pairs,
    evaluate,
    run_grid_search,
)
from .lexicon import ColoredAlphabet, UnknownChar
from .ngram_lm import load_arpa, merge_colored, save_arpa
from .oracle import InstanceTooLarge, run_verification
from .scorers import SCORER_KINDS, ScorerConfig, fit_bin_table, make_scorer

DEFAULT_BEAM_WIDTH = 64
JOBS_ENV = "COLOR_DECODE_JOBS"


class UsageError(Exception):
    """Flag combinations argparse cannot catch on its own."""


def _default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _csv_floats(raw: str) -> list[float]:
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma list of numbers: {raw!r}")


def _csv_ints(raw: str) -> list[int]:
    try:
        return [int(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma list of integers: {raw!r}")


def _add_alphabet_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--alphabet",
        default="abcdefghijklmnopqrstuvwxyz ",
        help="base characters in column order, blank is implicit last "
        "(default: lowercase letters and space)",
    )
    p.add_argument(
        "--separator",
        default=None,
        help="word separator character; defaults to space when the "
        "alphabet contains one, use --separator '' for none",
    )


def _add_scorer_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--fusion",
        choices=SCORER_KINDS,
        default="none",
        help="fusion method (default: none)",
    )
    p.add_argument("--lm", action="append", default=[], metavar="ARPA",
                   help="language model, repeatable; order matters "
                   "(general first, then jargon)")
    p.add_argument("--alpha", type=float, default=1.0, help="LM weight")
    p.add_argument("--beta", type=float, default=0.0, help="word bonus")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5,
                   help="jargon weight for linear/loglinear fusion")
    p.add_argument(
        "--unk-word-penalty",
        type=_csv_floats,
        default=[-10.0, -10.0],
        metavar="P[,P...]",
        help="per-model log10 penalty for unknown words (default -10,-10)",
    )
    p.add_argument(
        "--unk-subword-penalty",
        type=float,
        default=None,
        metavar="P",
        help="log10 penalty per off-lexicon character; omit to forbid "
        "off-lexicon spellings",
    )
    p.add_argument("--bins", type=int, default=53,
                   help="bin count for the bins method (default 53)")
    p.add_argument(
        "--calibration-manifest",
        metavar="PATH",
        help="manifest whose references calibrate the bins method",
    )
    p.add_argument("--calibration-seed", type=int, default=0)


def _alphabet_from_args(args) -> ColoredAlphabet:
    chars = tuple(args.alphabet)
    sep = args.separator
    if sep is None:
        sep = " " if " " in chars else None
    elif sep == "":
        sep = None
    return ColoredAlphabet(chars, 1, sep)


def _scorer_config_from_args(args) -> ScorerConfig:
    return ScorerConfig(
        alpha=args.alpha,
        beta=args.beta,
        unknown_word_penalty=tuple(args.unk_word_penalty),
        unknown_subword_penalty=args.unk_subword_penalty,
        lam=args.lam,
    )


def _bin_table_from_args(args, models):
    if args.fusion != "bins":
        return None
    if not args.calibration_manifest:
        raise UsageError("--fusion bins needs --calibration-manifest")
    utts = read_manifest(args.calibration_manifest)
    pairs = calibration_pairs(utts, models, seed=args.calibration_seed)
    return fit_bin_table(pairs, args.bins)


def _load_models(args) -> list:
    models = [load_arpa(path) for path in args.lm]
    kind = args.fusion
    if kind in ("linear", "loglinear", "bins", "bayes") and len(models) != 2:
        raise UsageError(f"--fusion {kind} needs exactly two --lm files")
    if kind in ("general", "jargon") and len(models) != 1:
        raise UsageError(f"--fusion {kind} needs exactly one --lm file")
    if kind == "coloring" and not models:
        raise UsageError("--fusion coloring needs one --lm per lexicon")
    return models


def cmd_decode(args) -> int:
    template = _alphabet_from_args(args)
    models = _load_models(args)
    config = _scorer_config_from_args(args)
    bin_table = _bin_table_from_args(args, models)

    if args.lexicon:
        lexicons = [read_lexicon(p) for p in args.lexicon]
        if args.fusion == "coloring" and len(models) != len(lexicons):
            raise UsageError(
                "--fusion coloring needs as many --lm files as --lexicon files"
            )
        runtime = build_runtime(
            args.fusion, lexicons, models, config, template,
            args.beam_width, bin_table,
        )
        alphabet, tries, scorer = runtime.alphabet, runtime.tries, runtime.scorer
    else:
        if args.fusion == "coloring":
            raise UsageError("--fusion coloring needs --lexicon files")
        alphabet = template
        tries = None
        scorer = make_scorer(args.fusion, models, config, bin_table=bin_table)

    matrix = read_logits(args.logits)
    transcript = decode(
        matrix,
        DecoderConfig(alphabet, tries, scorer, beam_width=args.beam_width),
    )
    print(format_colored(transcript.words, alphabet.num_colors))
    print(f"score {transcript.score:.9f}")
    if args.out:
        write_colored_transcript(transcript, args.out, alphabet.num_colors)
    return 0


def cmd_eval(args) -> int:
    template = _alphabet_from_args(args)
    models = _load_models(args)
    config = _scorer_config_from_args(args)
    bin_table = _bin_table_from_args(args, models)
    if not args.lexicon:
        raise UsageError("eval needs at least one --lexicon file")
    lexicons = [read_lexicon(p) for p in args.lexicon]
    runtime = build_runtime(
        args.fusion, lexicons, models, config, template,
        args.beam_width, bin_table,
    )
    utterances = read_manifest(args.manifest)
    report = evaluate(
        args.manifest, utterances, [(args.fusion, runtime)], jobs=args.jobs
    )
    sys.stdout.write(report.as_json() if args.json else report.as_text())
    return 0


def cmd_gridsearch(args) -> int:
    template = _alphabet_from_args(args)
    models = _load_models(args)
    if not args.lexicon:
        raise UsageError("gridsearch needs at least one --lexicon file")
    lexicons = [read_lexicon(p) for p in args.lexicon]
    utterances = read_manifest(args.manifest)

    overrides = {}
    if args.alphas:
        overrides["alphas"] = tuple(args.alphas)
    if args.betas:
        overrides["betas"] = tuple(args.betas)
    if args.lambdas:
        overrides["lams"] = tuple(args.lambdas)
    if args.word_penalties:
        overrides["word_penalties"] = tuple(args.word_penalties)
    if args.subword_penalties:
        overrides["subword_penalties"] = tuple(args.subword_penalties)
    if args.bin_counts:
        overrides["bin_counts"] = tuple(args.bin_counts)
    grid = GridSpec(**overrides)

    calibration = None
    if args.fusion == "bins":
        source = args.calibration_manifest or args.manifest
        calibration = calibration_pairs(
            read_manifest(source), models, seed=args.calibration_seed
        )

    result = run_grid_search(
        args.fusion,
        utterances,
        lexicons,
        models,
        grid,
        template,
        beam_width=args.beam_width,
        jobs=args.jobs,
        calibration=calibration,
    )
    print(f"method {args.fusion}: searched {len(result.rows)} configurations")
    print(f"best {result.best.describe(args.fusion)}")
    jw = f"{result.jargon_wer:.2f}" if result.jargon_wer is not None else "n/a"
    print(f"wer {result.wer:.2f}  cer {result.cer:.2f}  jargon-wer {jw}")
    if args.all:
        for point, w, c, j in result.rows:
            js = f"{j:.2f}" if j is not None else "n/a"
            print(f"  {point.describe(args.fusion)} wer={w:.2f} cer={c:.2f} jargon={js}")
    return 0


def cmd_merge_lm(args) -> int:
    models = [load_arpa(path) for path in args.lm]
    if not models:
        raise UsageError("merge-lm needs at least one --lm file")
    merged = merge_colored((m, c) for c, m in enumerate(models))
    save_arpa(merged, args.out)
    print(f"merged {len(models)} models ({len(merged.entries)} entries) -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    spec = SynthesisSpec(
        num_sentences=args.sentences,
        jargon_insertion_rate=args.rate,
        noise_level=args.noise,
        frames_per_char=args.frames_per_char,
        rng_seed=args.seed,
        min_words=args.min_words,
        max_words=args.max_words,
        language_seed=args.language_seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    utterances, lang = synthesize_corpus(spec, out, default_alphabet(2))

    (out / "general.txt").write_text(
        "\n".join(lang.lexicons.general) + "\n", encoding="utf-8"
    )
    (out / "jargon.txt").write_text(
        "\n".join(lang.lexicons.jargon) + "\n", encoding="utf-8"
    )
    general, jargon = language_models(lang)
    save_arpa(general, out / "general.arpa")
    save_arpa(jargon, out / "jargon.arpa")
    print(
        f"wrote {len(utterances)} utterances, 2 lexicons and 2 models to {out}"
    )
    return 0


def cmd_verify(args) -> int:
    report = run_verification(
        args.instances,
        args.seed,
        max_frames=args.max_frames,
        max_chars=args.max_chars,
    )
    print(
        f"{report.instances} instances, {len(report.mismatches)} mismatches, "
        f"max score divergence {report.max_score_divergence:.3e}"
    )
    if not report.ok:
        for m in report.mismatches[:10]:
            print(f"  instance {m['instance']}: expected {m['expected']}, "
                  f"got {m['got']}")
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="colordecode",
        description="CTC beam search with lexicon-colored language model fusion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="decode one logits file")
    p.add_argument("logits", help="CTCL1 or JSON logits file")
    p.add_argument("--lexicon", action="append", default=[], metavar="PATH",
                   help="lexicon word list, repeatable; omit for "
                   "unconstrained decoding")
    p.add_argument("--beam-width", type=int, default=DEFAULT_BEAM_WIDTH)
    p.add_argument("--out", help="write markup plus JSON sidecar here")
    _add_alphabet_flags(p)
    _add_scorer_flags(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="evaluate one method on a manifest")
    p.add_argument("manifest")
    p.add_argument("--lexicon", action="append", default=[], metavar="PATH",
                   required=False)
    p.add_argument("--beam-width", type=int, default=DEFAULT_BEAM_WIDTH)
    p.add_argument("--jobs", type=int, default=_default_jobs(),
                   help=f"worker processes (default ${JOBS_ENV} or 1)")
    p.add_argument("--json", action="store_true", help="JSON report")
    _add_alphabet_flags(p)
    _add_scorer_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gridsearch", help="search hyperparameters on a manifest")
    p.add_argument("manifest")
    p.add_argument("--lexicon", action="append", default=[], metavar="PATH")
    p.add_argument("--beam-width", type=int, default=DEFAULT_BEAM_WIDTH)
    p.add_argument("--jobs", type=int, default=_default_jobs())
    p.add_argument("--alphas", type=_csv_floats, default=None)
    p.add_argument("--betas", type=_csv_floats, default=None)
    p.add_argument("--lambdas", type=_csv_floats, default=None)
    p.add_argument("--word-penalties", type=_csv_floats, default=None)
    p.add_argument("--subword-penalties", type=_csv_floats, default=None)
    p.add_argument("--bin-counts", type=_csv_ints, default=None)
    p.add_argument("--all", action="store_true", help="print every grid row")
    _add_alphabet_flags(p)
    _add_scorer_flags(p)
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("merge-lm", help="merge models into one colored ARPA")
    p.add_argument("--lm", action="append", default=[], metavar="ARPA",
                   help="input model, repeatable; list order sets the color")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge_lm)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--sentences", type=int, default=100)
    p.add_argument("--rate", type=float, default=0.3,
                   help="jargon insertion rate (default 0.3)")
    p.add_argument("--noise", type=float, default=0.25)
    p.add_argument("--frames-per-char", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--language-seed", type=int, default=None)
    p.add_argument("--min-words", type=int, default=3)
    p.add_argument("--max-words", type=int, default=7)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("verify", help="cross-check decoder against the oracle")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-frames", type=int, default=4)
    p.add_argument("--max-chars", type=int, default=3)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, UnknownChar, OSError, InstanceTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
