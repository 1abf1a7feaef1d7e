"""Word-level fusion scorers.

A scorer turns each completed word into a log10 score increment for the
decoder's text term, threading whatever per-hypothesis state it needs
(language model contexts, accumulated history masses). All scorers share
the interface:

    state = scorer.initial_state()
    delta, state = scorer.word_delta(state, word, color)

``delta`` already includes the word insertion bonus beta and, except for
the coloring scorer's prior, is alpha-scaled. Colors are advisory for
scorers that ignore provenance.

Two language models (a general one and a domain one) can be fused four
ways here: linear interpolation, log-linear interpolation, a calibrated
bin table, or per-history Bayesian posterior weighting. The coloring
scorer instead scores against a single color-merged model, letting the
decoder's colored prefixes pick the source lexicon per word.

Unknown words never zero out a hypothesis: each model substitutes its
configured penalty (as a probability, 10**penalty) before any
combination, so an interpolation endpoint reproduces the corresponding
single-model scorer exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .logmath import NEG_INF, logaddexp10, logsumexp10
from .ngram_lm import EMPTY_STATE, LmState, NGramModel, color_token, merge_colored

__all__ = [
    "MissingModel",
    "MissingBinTable",
    "EmptyCalibration",
    "ScorerConfig",
    "interp_linear",
    "interp_loglinear",
    "bayes_posterior_log10",
    "interp_bayes",
    "BinTable",
    "fit_bin_table",
    "Scorer",
    "NullScorer",
    "SingleLmScorer",
    "ColoringScorer",
    "InterpolationScorer",
    "BayesScorer",
    "make_scorer",
    "SCORER_KINDS",
]

SCORER_KINDS = (
    "coloring",
    "linear",
    "loglinear",
    "bins",
    "bayes",
    "general",
    "jargon",
    "none",
)


class MissingModel(ValueError):
    """A scorer kind was requested without the models it needs."""


class MissingBinTable(ValueError):
    """Bin interpolation was requested without a calibrated table."""


class EmptyCalibration(ValueError):
    """No usable pairs were provided to fit a bin table."""


@dataclass(frozen=True)
class ScorerConfig:
    """Shared fusion hyperparameters.

    alpha scales language model evidence, beta is a flat per-word bonus,
    lam weights the domain model in two-model interpolation (0 = general
    only, 1 = domain only). ``unknown_word_penalty`` holds one log10
    penalty per model/color; a shorter tuple broadcasts its last value.
    ``unknown_subword_penalty`` (log10, unscaled) prices characters that
    leave every lexicon; None forbids them. ``color_prior`` overrides the
    uniform prior over colors in the coloring scorer.
    """

    alpha: float = 1.0
    beta: float = 0.0
    unknown_word_penalty: tuple[float, ...] = (-10.0, -10.0)
    unknown_subword_penalty: float | None = None
    lam: float = 0.5
    color_prior: tuple[float, ...] | None = None

    def __post_init__(self):
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if not math.isfinite(self.beta):
            raise ValueError("beta must be finite")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if not self.unknown_word_penalty:
            raise ValueError("need at least one unknown-word penalty")
        if self.color_prior is not None:
            if any(p < 0.0 for p in self.color_prior):
                raise ValueError("color prior entries must be nonnegative")
            if abs(sum(self.color_prior) - 1.0) > 1e-12:
                raise ValueError("color prior must sum to 1")

    def penalty(self, color: int) -> float:
        pens = self.unknown_word_penalty
        return pens[color] if color < len(pens) else pens[-1]


def interp_linear(pg: float, pj: float, lam: float) -> float:
    """(1-lam) * pg + lam * pj on linear-domain probabilities."""
    return (1.0 - lam) * pg + lam * pj


def interp_loglinear(pg: float, pj: float, lam: float) -> float:
    """pg**(1-lam) * pj**lam on linear-domain probabilities.

    Endpoints are exact even when the zero-weighted probability is 0, so
    lam=0 never poisons a score with the domain model's zeros.
    """
    if lam == 0.0:
        return pg
    if lam == 1.0:
        return pj
    if pg == 0.0 or pj == 0.0:
        return 0.0
    return pg ** (1.0 - lam) * pj ** lam


def _combine_linear_log10(lg: float, lj: float, lam: float) -> float:
    if lam == 0.0:
        return lg
    if lam == 1.0:
        return lj
    return logaddexp10(math.log10(1.0 - lam) + lg, math.log10(lam) + lj)


def _combine_loglinear_log10(lg: float, lj: float, lam: float) -> float:
    if lam == 0.0:
        return lg
    if lam == 1.0:
        return lj
    if lg == NEG_INF or lj == NEG_INF:
        return NEG_INF
    return (1.0 - lam) * lg + lam * lj


def bayes_posterior_log10(
    log_priors: Sequence[float], log_histories: Sequence[float]
) -> list[float]:
    """Normalized log10 posterior weights prior_i * 10**history_i.

    When every history has zero mass the priors are returned unchanged;
    there is no evidence to reweight with.
    """
    joint = [p + h for p, h in zip(log_priors, log_histories)]
    total = logsumexp10(joint)
    if total == NEG_INF:
        joint = list(log_priors)
        total = logsumexp10(joint)
    return [j - total for j in joint]


def interp_bayes(
    lg_hist: float,
    lj_hist: float,
    lg_next: float,
    lj_next: float,
    prior: tuple[float, float] = (0.5, 0.5),
) -> float:
    """One Bayes-weighted combination step, all arguments log10.

    The history masses select the mixture weights; the next-word
    probabilities are then mixed under those weights.
    """
    log_priors = [
        math.log10(prior[0]) if prior[0] > 0 else NEG_INF,
        math.log10(prior[1]) if prior[1] > 0 else NEG_INF,
    ]
    wg, wj = bayes_posterior_log10(log_priors, [lg_hist, lj_hist])
    return logaddexp10(wg + lg_next, wj + lj_next)


@dataclass(frozen=True)
class BinTable:
    """Calibrated map from (general prob, domain prob) to a fused log10 prob.

    Axes are equal-width bins over log10 probability ranges observed at
    fit time; queries clamp into range. ``cells[gi][ji]`` is the fused
    log10 probability, or None where calibration saw nothing, in which
    case the lookup falls back to an even linear mix of the query's own
    probabilities.
    """

    num_bins: int
    g_range: tuple[float, float]
    j_range: tuple[float, float]
    cells: tuple[tuple[float | None, ...], ...]

    def _index(self, value: float, lo: float, hi: float) -> int:
        if hi <= lo:
            return 0
        if value <= lo:
            return 0
        if value >= hi:
            return self.num_bins - 1
        idx = int((value - lo) / (hi - lo) * self.num_bins)
        return min(idx, self.num_bins - 1)

    def lookup(self, lg: float, lj: float) -> float:
        gi = self._index(lg, *self.g_range)
        ji = self._index(lj, *self.j_range)
        cell = self.cells[gi][ji]
        if cell is not None:
            return cell
        return _combine_linear_log10(lg, lj, 0.5)


_ZERO_FLOOR = -99.0


def _log10_floor(p: float) -> float:
    return math.log10(p) if p > 0.0 else _ZERO_FLOOR


def fit_bin_table(
    pairs: Sequence[tuple[float, float, bool]], num_bins: int
) -> BinTable:
    """Fit a BinTable from (general prob, domain prob, word-was-correct).

    Probabilities arrive linear and are floored at 1e-99 before the log10
    transform so zero-probability words land in the lowest bin. Each cell
    stores log10((hits + 1) / (count + 2)), an add-one estimate of the
    probability a word with such model scores is correct.
    """
    if num_bins < 1:
        raise ValueError("need at least one bin")
    if not pairs:
        raise EmptyCalibration("no calibration pairs")
    logs = [(_log10_floor(pg), _log10_floor(pj), hit) for pg, pj, hit in pairs]
    g_vals = [g for g, _, _ in logs]
    j_vals = [j for _, j, _ in logs]
    g_range = (min(g_vals), max(g_vals))
    j_range = (min(j_vals), max(j_vals))

    counts = [[0] * num_bins for _ in range(num_bins)]
    hits = [[0] * num_bins for _ in range(num_bins)]
    probe = BinTable(num_bins, g_range, j_range, ())
    for g, j, hit in logs:
        gi = probe._index(g, *g_range)
        ji = probe._index(j, *j_range)
        counts[gi][ji] += 1
        if hit:
            hits[gi][ji] += 1

    cells = tuple(
        tuple(
            math.log10((hits[gi][ji] + 1) / (counts[gi][ji] + 2))
            if counts[gi][ji] > 0
            else None
            for ji in range(num_bins)
        )
        for gi in range(num_bins)
    )
    return BinTable(num_bins, g_range, j_range, cells)


class Scorer:
    """Base class wiring the config; subclasses define the state shape."""

    def __init__(self, config: ScorerConfig):
        self.config = config

    def initial_state(self):
        raise NotImplementedError

    def word_delta(self, state, word: str, color: int):
        """Return (log10 delta, next state) for one completed word."""
        raise NotImplementedError


class NullScorer(Scorer):
    """No language model: every word costs exactly beta."""

    def initial_state(self):
        return None

    def word_delta(self, state, word: str, color: int):
        return self.config.beta, None


class SingleLmScorer(Scorer):
    """One model scores everything, whatever the word's color.

    ``model_color`` selects which penalty slot prices this model's OOVs.
    """

    def __init__(self, config: ScorerConfig, model: NGramModel, model_color: int = 0):
        super().__init__(config)
        self.model = model
        self.model_color = model_color

    def initial_state(self) -> LmState:
        return EMPTY_STATE

    def word_delta(self, state: LmState, word: str, color: int):
        lp, nxt = self.model.score_word(
            state, word, oov_log10=self.config.penalty(self.model_color)
        )
        return self.config.alpha * lp + self.config.beta, nxt


class ColoringScorer(Scorer):
    """Score colored words against a color-merged model.

    Each word contributes alpha * (log10 prior(color) + log10 P(colored
    word | colored history)) + beta. The history is colored too, so
    cross-color n-grams only fire if the merged model has them (it does
    not, by construction: colors never mix inside one source model, so a
    color switch pays the backoff path down to unigrams).
    """

    def __init__(self, config: ScorerConfig, merged: NGramModel, num_colors: int):
        super().__init__(config)
        if num_colors < 1:
            raise ValueError("need at least one color")
        self.merged = merged
        self.num_colors = num_colors
        prior = config.color_prior
        if prior is None:
            prior = tuple(1.0 / num_colors for _ in range(num_colors))
        if len(prior) != num_colors:
            raise ValueError("color prior length must match the color count")
        self.log_prior = tuple(
            math.log10(p) if p > 0.0 else NEG_INF for p in prior
        )

    def initial_state(self) -> LmState:
        return EMPTY_STATE

    def word_delta(self, state: LmState, word: str, color: int):
        if not 0 <= color < self.num_colors:
            raise ValueError(f"color {color} out of range")
        token = color_token(word, color)
        lp, nxt = self.merged.score_word(
            state, token, oov_log10=self.config.penalty(color)
        )
        delta = self.config.alpha * (self.log_prior[color] + lp) + self.config.beta
        return delta, nxt


class InterpolationScorer(Scorer):
    """Two-model fusion: linear, log-linear, or calibrated bins.

    Both models track the same uncolored word history; only the per-word
    probabilities are combined. State is the pair of model contexts.
    """

    def __init__(
        self,
        config: ScorerConfig,
        general: NGramModel,
        domain: NGramModel,
        kind: str,
        bin_table: BinTable | None = None,
    ):
        super().__init__(config)
        if kind not in ("linear", "loglinear", "bins"):
            raise ValueError(f"unknown interpolation kind {kind!r}")
        if kind == "bins" and bin_table is None:
            raise MissingBinTable("bins interpolation needs a fitted table")
        self.general = general
        self.domain = domain
        self.kind = kind
        self.bin_table = bin_table

    def initial_state(self) -> tuple[LmState, LmState]:
        return (EMPTY_STATE, EMPTY_STATE)

    def word_delta(self, state: tuple[LmState, LmState], word: str, color: int):
        st_g, st_j = state
        lg, ng = self.general.score_word(st_g, word, oov_log10=self.config.penalty(0))
        lj, nj = self.domain.score_word(st_j, word, oov_log10=self.config.penalty(1))
        if self.kind == "linear":
            combined = _combine_linear_log10(lg, lj, self.config.lam)
        elif self.kind == "loglinear":
            combined = _combine_loglinear_log10(lg, lj, self.config.lam)
        else:
            combined = self.bin_table.lookup(lg, lj)
        return self.config.alpha * combined + self.config.beta, (ng, nj)


class BayesScorer(Scorer):
    """Two-model fusion with per-hypothesis posterior weights.

    State carries both model contexts plus each model's cumulative log10
    mass over the words seen so far; the next word is mixed under weights
    proportional to prior * 10**history. Histories include the same
    penalty substitution as everything else, so an OOV run shifts weight
    toward whichever model is less surprised.
    """

    def __init__(
        self,
        config: ScorerConfig,
        general: NGramModel,
        domain: NGramModel,
        prior: tuple[float, float] = (0.5, 0.5),
    ):
        super().__init__(config)
        self.general = general
        self.domain = domain
        self.prior = prior

    def initial_state(self) -> tuple[LmState, LmState, float, float]:
        return (EMPTY_STATE, EMPTY_STATE, 0.0, 0.0)

    def word_delta(self, state, word: str, color: int):
        st_g, st_j, h_g, h_j = state
        lg, ng = self.general.score_word(st_g, word, oov_log10=self.config.penalty(0))
        lj, nj = self.domain.score_word(st_j, word, oov_log10=self.config.penalty(1))
        combined = interp_bayes(h_g, h_j, lg, lj, self.prior)
        delta = self.config.alpha * combined + self.config.beta
        return delta, (ng, nj, h_g + lg, h_j + lj)


def make_scorer(
    kind: str,
    models: Sequence[NGramModel],
    config: ScorerConfig,
    bin_table: BinTable | None = None,
    num_colors: int | None = None,
) -> Scorer:
    """Build a scorer by kind name.

    ``coloring`` merges the given models (one per color) internally;
    ``linear``/``loglinear``/``bins``/``bayes`` take exactly (general,
    domain); ``general``/``jargon`` take the respective single model
    first; ``none`` uses no model at all.
    """
    if kind not in SCORER_KINDS:
        raise ValueError(f"unknown scorer kind {kind!r}")
    if kind == "none":
        return NullScorer(config)
    if not models:
        raise MissingModel(f"scorer kind {kind!r} needs language models")
    if kind == "coloring":
        n = num_colors if num_colors is not None else len(models)
        if n != len(models):
            raise MissingModel(
                f"coloring needs one model per color ({n} colors, {len(models)} models)"
            )
        merged = merge_colored((m, c) for c, m in enumerate(models))
        return ColoringScorer(config, merged, n)
    if kind in ("linear", "loglinear", "bins", "bayes"):
        if len(models) != 2:
            raise MissingModel(f"{kind} fusion needs exactly two models")
        general, domain = models
        if kind == "bayes":
            return BayesScorer(config, general, domain)
        return InterpolationScorer(config, general, domain, kind, bin_table)
    # single-model kinds
    if kind == "general":
        return SingleLmScorer(config, models[0], model_color=0)
    return SingleLmScorer(config, models[0], model_color=1)
