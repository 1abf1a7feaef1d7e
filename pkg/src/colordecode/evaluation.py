"""Evaluation harness: method runtimes, corpus decoding, grid search.

A method is a fusion kind plus hyperparameters. ``build_runtime`` turns
that into everything the decoder needs: the coloring method gets one
trie per lexicon and a color-merged model, every baseline gets a single
union lexicon and its fusion scorer over uncolored histories. Corpora
decode utterance-by-utterance, optionally across worker processes, and
grid search picks hyperparameters by validation WER (CER breaks ties,
then grid order, so results are deterministic).
"""

from __future__ import annotations

import random
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

from .corpus import (
    EmptyLexicon,
    SynthesisSpec,
    Utterance,
    default_alphabet,
    language_models,
    read_logits,
    synthesize_corpus,
)
from .decoder import ColoredTranscript, DecoderConfig, decode
from .lexicon import ColoredAlphabet, LexiconTrie, build_trie
from .metrics import EvalReport, MethodResult, cer, jargon_wer, wer
from .ngram_lm import EMPTY_STATE, NGramModel
from .scorers import (
    BinTable,
    MissingBinTable,
    Scorer,
    ScorerConfig,
    fit_bin_table,
    make_scorer,
)

__all__ = [
    "ALPHA_GRID",
    "BETA_GRID",
    "LAMBDA_GRID",
    "WORD_PENALTY_GRID",
    "SUBWORD_PENALTY_GRID",
    "BIN_COUNT_GRID",
    "COMPARISON_GRID",
    "GridSpec",
    "GridPoint",
    "MethodRuntime",
    "build_runtime",
    "decode_utterances",
    "evaluate",
    "GridSearchResult",
    "run_grid_search",
    "calibration_pairs",
    "run_method_comparison",
]

ALPHA_GRID = (0.5, 0.75, 1.0, 1.25, 1.5)
BETA_GRID = (0.5, 0.75, 1.0, 1.25, 1.5)
LAMBDA_GRID = (0.25, 0.5, 0.75)
WORD_PENALTY_GRID = (-10.0, -50.0)
SUBWORD_PENALTY_GRID = (-7.0, -5.0, -3.0, -1.0, 0.0)
BIN_COUNT_GRID = (53, 100)


@dataclass(frozen=True)
class GridPoint:
    """One hyperparameter assignment: a scorer config plus, for the bin
    method, the bin count the table was fitted with."""

    config: ScorerConfig
    num_bins: int | None = None

    def describe(self, kind: str) -> dict:
        c = self.config
        out: dict = {"alpha": c.alpha, "beta": c.beta}
        if kind in ("linear", "loglinear"):
            out["lambda"] = c.lam
        if kind != "none":
            out["unknown_word_penalty"] = list(c.unknown_word_penalty)
        if kind == "coloring":
            out["unknown_subword_penalty"] = c.unknown_subword_penalty
        if kind == "bins":
            out["num_bins"] = self.num_bins
        return out


@dataclass(frozen=True)
class GridSpec:
    """Hyperparameter grids; defaults cover the full search space.

    ``points`` enumerates only the dimensions a method actually reads:
    lambda for the two interpolations, subword penalties for coloring,
    bin counts for the bin method, per-model word penalties wherever a
    model can meet an unknown word.
    """

    alphas: tuple[float, ...] = ALPHA_GRID
    betas: tuple[float, ...] = BETA_GRID
    lams: tuple[float, ...] = LAMBDA_GRID
    word_penalties: tuple[float, ...] = WORD_PENALTY_GRID
    subword_penalties: tuple[float, ...] = SUBWORD_PENALTY_GRID
    bin_counts: tuple[int, ...] = BIN_COUNT_GRID

    def points(self, kind: str) -> Iterator[GridPoint]:
        if kind == "none":
            for beta in self.betas:
                yield GridPoint(ScorerConfig(alpha=1.0, beta=beta))
            return

        if kind in ("general", "jargon"):
            penalty_pairs = [(p, p) for p in self.word_penalties]
        else:
            penalty_pairs = [
                (pg, pj)
                for pg in self.word_penalties
                for pj in self.word_penalties
            ]

        lams = self.lams if kind in ("linear", "loglinear") else (0.5,)
        subwords: tuple[float | None, ...] = (
            self.subword_penalties if kind == "coloring" else (None,)
        )
        bins: tuple[int | None, ...] = (
            self.bin_counts if kind == "bins" else (None,)
        )

        for alpha in self.alphas:
            for beta in self.betas:
                for pens in penalty_pairs:
                    for lam in lams:
                        for sub in subwords:
                            for nb in bins:
                                yield GridPoint(
                                    ScorerConfig(
                                        alpha=alpha,
                                        beta=beta,
                                        unknown_word_penalty=pens,
                                        unknown_subword_penalty=sub,
                                        lam=lam,
                                    ),
                                    num_bins=nb,
                                )

    def size(self, kind: str) -> int:
        return sum(1 for _ in self.points(kind))


@dataclass
class MethodRuntime:
    """Prebuilt decoding setup for one method; safe to ship to workers."""

    alphabet: ColoredAlphabet
    tries: list[LexiconTrie] | None
    scorer: Scorer
    beam_width: int = 64

    def decoder_config(self) -> DecoderConfig:
        return DecoderConfig(
            alphabet=self.alphabet,
            tries=self.tries,
            scorer=self.scorer,
            beam_width=self.beam_width,
        )


def build_runtime(
    kind: str,
    lexicons: Sequence[Sequence[str]],
    models: Sequence[NGramModel],
    config: ScorerConfig,
    alphabet: ColoredAlphabet,
    beam_width: int = 64,
    bin_table: BinTable | None = None,
) -> MethodRuntime:
    """Assemble tries, scorer and alphabet for one method.

    Coloring keeps one trie per lexicon (colors in list order) and
    scores against the colored merge of ``models``. Every other kind
    decodes over the union of all lexicon words in a single color, with
    uncolored model histories. ``alphabet`` is a template; its color
    count is replaced by what the method needs.
    """
    if not lexicons or any(not lex for lex in lexicons):
        raise EmptyLexicon("every lexicon needs at least one word")

    if kind == "coloring":
        num_colors = len(lexicons)
        ab = ColoredAlphabet(
            alphabet.base_chars, num_colors, alphabet.word_separator
        )
        tries = [build_trie(ab, c, lex) for c, lex in enumerate(lexicons)]
        scorer = make_scorer(kind, models, config, num_colors=num_colors)
        return MethodRuntime(ab, tries, scorer, beam_width)

    union = tuple(dict.fromkeys(w for lex in lexicons for w in lex))
    ab = ColoredAlphabet(alphabet.base_chars, 1, alphabet.word_separator)
    tries = [build_trie(ab, 0, union)]
    scorer = make_scorer(kind, models, config, bin_table=bin_table)
    return MethodRuntime(ab, tries, scorer, beam_width)


_WORKER_RUNTIME: MethodRuntime | None = None


def _init_worker(runtime: MethodRuntime) -> None:
    global _WORKER_RUNTIME
    _WORKER_RUNTIME = runtime


def _decode_path(path: str) -> ColoredTranscript:
    runtime = _WORKER_RUNTIME
    assert runtime is not None
    return decode(read_logits(path), runtime.decoder_config())


def decode_utterances(
    utterances: Sequence[Utterance],
    runtime: MethodRuntime,
    jobs: int = 1,
) -> list[ColoredTranscript]:
    """Decode a corpus in manifest order, fanning out over processes
    when ``jobs`` exceeds one."""
    paths = [str(u.logits_path) for u in utterances]
    if jobs > 1 and len(paths) > 1:
        workers = min(jobs, len(paths))
        chunk = max(1, len(paths) // (workers * 4))
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(runtime,),
        ) as pool:
            return list(pool.map(_decode_path, paths, chunksize=chunk))
    cfg = runtime.decoder_config()
    return [decode(read_logits(p), cfg) for p in paths]


def _rates(
    utterances: Sequence[Utterance],
    transcripts: Sequence[ColoredTranscript],
) -> tuple[float, float, float | None]:
    refs = []
    masks = []
    hyps = []
    for utt, t in zip(utterances, transcripts):
        if utt.reference is None:
            raise ValueError(f"utterance {utt.id!r} has no reference")
        refs.append(list(utt.reference))
        masks.append(
            list(utt.jargon_mask)
            if utt.jargon_mask is not None
            else [False] * len(utt.reference)
        )
        hyps.append([w for w, _ in t.words])
    return wer(refs, hyps), cer(refs, hyps), jargon_wer(refs, masks, hyps)


def evaluate(
    corpus_name: str,
    utterances: Sequence[Utterance],
    methods: Sequence[tuple[str, MethodRuntime]],
    jobs: int = 1,
    configs: Sequence[dict | None] | None = None,
) -> EvalReport:
    """Decode the corpus once per method and tabulate error rates."""
    results = []
    for i, (name, runtime) in enumerate(methods):
        transcripts = decode_utterances(utterances, runtime, jobs)
        w, c, jw = _rates(utterances, transcripts)
        results.append(
            MethodResult(
                method=name,
                wer=w,
                cer=c,
                jargon_wer=jw,
                utterances=len(utterances),
                config=configs[i] if configs else None,
            )
        )
    return EvalReport(corpus=corpus_name, results=results)


@dataclass
class GridSearchResult:
    kind: str
    best: GridPoint
    wer: float
    cer: float
    jargon_wer: float | None
    rows: list[tuple[GridPoint, float, float, float | None]]

    def best_runtime(
        self,
        lexicons: Sequence[Sequence[str]],
        models: Sequence[NGramModel],
        alphabet: ColoredAlphabet,
        beam_width: int = 64,
        bin_table: BinTable | None = None,
    ) -> MethodRuntime:
        return build_runtime(
            self.kind,
            lexicons,
            models,
            self.best.config,
            alphabet,
            beam_width,
            bin_table,
        )


def run_grid_search(
    kind: str,
    utterances: Sequence[Utterance],
    lexicons: Sequence[Sequence[str]],
    models: Sequence[NGramModel],
    grid: GridSpec,
    alphabet: ColoredAlphabet,
    beam_width: int = 64,
    jobs: int = 1,
    calibration: Sequence[tuple[float, float, bool]] | None = None,
) -> GridSearchResult:
    """Try every grid point on a validation corpus and keep the best.

    Ranking is (WER, CER, enumeration order). The bin method fits one
    table per bin count from ``calibration``.
    """
    tables: dict[int, BinTable] = {}
    best: tuple[float, float, int] | None = None
    best_point: GridPoint | None = None
    best_jw: float | None = None
    rows: list[tuple[GridPoint, float, float, float | None]] = []

    for index, point in enumerate(grid.points(kind)):
        bin_table = None
        if kind == "bins":
            if calibration is None:
                raise MissingBinTable("bin grid search needs calibration pairs")
            nb = point.num_bins
            assert nb is not None
            if nb not in tables:
                tables[nb] = fit_bin_table(calibration, nb)
            bin_table = tables[nb]
        runtime = build_runtime(
            kind, lexicons, models, point.config, alphabet, beam_width, bin_table
        )
        transcripts = decode_utterances(utterances, runtime, jobs)
        w, c, jw = _rates(utterances, transcripts)
        rows.append((point, w, c, jw))
        key = (w, c, index)
        if best is None or key < best:
            best = key
            best_point = point
            best_jw = jw

    assert best is not None and best_point is not None
    return GridSearchResult(
        kind=kind,
        best=best_point,
        wer=best[0],
        cer=best[1],
        jargon_wer=best_jw,
        rows=rows,
    )


# reduced grid for quick method comparisons; the full defaults above are
# what a real tuning run would sweep
COMPARISON_GRID = GridSpec(
    alphas=(0.5, 1.0),
    betas=(0.0,),
    lams=(0.25, 0.5, 0.75),
    word_penalties=(-10.0,),
    subword_penalties=(0.0, -3.0),
    bin_counts=(53,),
)


def _method_models(kind: str, general: NGramModel, jargon: NGramModel):
    if kind == "none":
        return []
    if kind == "general":
        return [general]
    if kind == "jargon":
        return [jargon]
    return [general, jargon]


def run_method_comparison(
    language_seed: int,
    kinds: Sequence[str] = ("coloring", "linear", "loglinear", "general"),
    num_test: int = 200,
    num_validation: int = 40,
    jargon_rate: float = 0.3,
    noise_level: float = 0.25,
    frames_per_char: int = 1,
    grid: GridSpec | None = None,
    beam_width: int = 16,
    jobs: int = 1,
    workdir=None,
) -> tuple[EvalReport, dict[str, GridSearchResult]]:
    """Synthesize one language, tune each method on a validation split,
    score the tuned methods on a held-out test split.

    Validation and test share the language (lexicons, chain, true
    models) but sample disjoint sentences. Returns the test report plus
    each method's grid search outcome.
    """
    if grid is None:
        grid = COMPARISON_GRID

    def _splits(root: Path):
        val_spec = SynthesisSpec(
            num_sentences=num_validation,
            jargon_insertion_rate=jargon_rate,
            noise_level=noise_level,
            frames_per_char=frames_per_char,
            rng_seed=language_seed + 1_000_000,
            language_seed=language_seed,
        )
        test_spec = SynthesisSpec(
            num_sentences=num_test,
            jargon_insertion_rate=jargon_rate,
            noise_level=noise_level,
            frames_per_char=frames_per_char,
            rng_seed=language_seed + 2_000_000,
            language_seed=language_seed,
        )
        val_utts, lang = synthesize_corpus(val_spec, root / "validation")
        test_utts, _ = synthesize_corpus(test_spec, root / "test")
        return val_utts, test_utts, lang

    if workdir is None:
        with tempfile.TemporaryDirectory(prefix="colordecode-") as tmp:
            val_utts, test_utts, lang = _splits(Path(tmp))
            return _compare(
                kinds, val_utts, test_utts, lang, grid, beam_width, jobs,
                language_seed,
            )
    root = Path(workdir)
    root.mkdir(parents=True, exist_ok=True)
    val_utts, test_utts, lang = _splits(root)
    return _compare(
        kinds, val_utts, test_utts, lang, grid, beam_width, jobs, language_seed
    )


def _compare(
    kinds, val_utts, test_utts, lang, grid, beam_width, jobs, language_seed
) -> tuple[EvalReport, dict[str, GridSearchResult]]:
    general, jargon = language_models(lang)
    lexicons = [lang.lexicons.general, lang.lexicons.jargon]
    alphabet = default_alphabet(2)

    searches: dict[str, GridSearchResult] = {}
    methods: list[tuple[str, MethodRuntime]] = []
    configs: list[dict | None] = []
    for kind in kinds:
        models = _method_models(kind, general, jargon)
        calibration = None
        bin_table = None
        if kind == "bins":
            calibration = calibration_pairs(val_utts, models, seed=language_seed)
        search = run_grid_search(
            kind,
            val_utts,
            lexicons,
            models,
            grid,
            alphabet,
            beam_width=beam_width,
            jobs=jobs,
            calibration=calibration,
        )
        searches[kind] = search
        if kind == "bins":
            assert search.best.num_bins is not None
            bin_table = fit_bin_table(calibration, search.best.num_bins)
        methods.append(
            (
                kind,
                build_runtime(
                    kind,
                    lexicons,
                    models,
                    search.best.config,
                    alphabet,
                    beam_width,
                    bin_table,
                ),
            )
        )
        configs.append(search.best.describe(kind))

    report = evaluate(
        f"synthetic(language_seed={language_seed})",
        test_utts,
        methods,
        jobs=jobs,
        configs=configs,
    )
    return report, searches


def calibration_pairs(
    utterances: Sequence[Utterance],
    models: Sequence[NGramModel],
    seed: int = 0,
    negatives_per_word: int = 3,
) -> list[tuple[float, float, bool]]:
    """Linear-probability pairs for fitting a bin table.

    Walks each reference through both models: the true next word gives a
    positive pair, a few sampled vocabulary words give negatives under
    the same histories. Unknown words contribute probability zero rather
    than a penalty, since calibration should see raw model beliefs.
    """
    if len(models) != 2:
        raise ValueError("calibration needs exactly two models")
    general, domain = models
    vocab = sorted(general.vocabulary | domain.vocabulary)
    rng = random.Random(f"calibration:{seed}")
    neg_inf = float("-inf")

    pairs: list[tuple[float, float, bool]] = []
    for utt in utterances:
        if utt.reference is None:
            continue
        st_g = EMPTY_STATE
        st_j = EMPTY_STATE
        for word in utt.reference:
            lg, ng = general.score_word(st_g, word, oov_log10=neg_inf)
            lj, nj = domain.score_word(st_j, word, oov_log10=neg_inf)
            pairs.append((10.0 ** lg, 10.0 ** lj, True))
            for _ in range(negatives_per_word):
                other = rng.choice(vocab)
                if other == word:
                    continue
                og, _ = general.score_word(st_g, other, oov_log10=neg_inf)
                oj, _ = domain.score_word(st_j, other, oov_log10=neg_inf)
                pairs.append((10.0 ** og, 10.0 ** oj, False))
            st_g, st_j = ng, nj
    return pairs
