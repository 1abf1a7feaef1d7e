"""Backoff n-gram language models with ARPA serialization.

Models score one word at a time against a bounded history, backing off to
shorter contexts when the full context is unseen. Scores are log10
probabilities throughout, matching the on-disk ARPA convention.

The module also implements the "colored token" scheme used to combine a
general model with one or more domain models inside a single vocabulary:
every surface word is renamed to ``<colorId>:<word>`` with the color
identifying the source model, and the renamed entry sets are unioned. A
merged model can then score colored histories directly, keeping each
source model's statistics intact because the renamed vocabularies never
overlap across colors.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

__all__ = [
    "MalformedArpa",
    "DuplicateColoredToken",
    "LmState",
    "EMPTY_STATE",
    "NGramModel",
    "DEFAULT_OOV_LOG10",
    "color_token",
    "token_color",
    "strip_color",
    "parse_arpa",
    "serialize_arpa",
    "load_arpa",
    "save_arpa",
    "merge_colored",
]

DEFAULT_OOV_LOG10 = -10.0

_COLORED_TOKEN = re.compile(r"^(\d+):")


class MalformedArpa(ValueError):
    """Raised when ARPA text violates the format or its n-gram entries are
    inconsistent (counts wrong, non-contiguous orders, missing prefixes)."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicateColoredToken(ValueError):
    """Raised when merging colored models would assign the same colored
    n-gram two different entries."""


def color_token(word: str, color: int) -> str:
    """Rename a surface word into color space: ``clozaril`` + 1 -> ``1:clozaril``."""
    return f"{color}:{word}"


def token_color(token: str) -> int | None:
    """Color id of a colored token, or None if the token is uncolored."""
    m = _COLORED_TOKEN.match(token)
    return int(m.group(1)) if m else None


def strip_color(token: str) -> str:
    """Surface form of a colored token; uncolored tokens pass through."""
    return _COLORED_TOKEN.sub("", token, count=1)


class LmState(NamedTuple):
    """Scoring context: the most recent words, oldest first.

    The tuple never exceeds ``max_order - 1`` words for the model that
    produced it. States are plain values so they can be shared freely
    between decoder hypotheses.
    """

    context: tuple[str, ...]


EMPTY_STATE = LmState(())


@dataclass
class NGramModel:
    """A backoff n-gram model over string tokens.

    ``entries`` maps each n-gram (a tuple of tokens, length 1..max_order)
    to ``(log10_prob, backoff_weight_or_None)``. Backoff weights are None
    exactly on entries that cannot be extended (in valid ARPA files, all
    entries of the highest order). Lookups use the standard longest-match
    rule: score with the longest known suffix of (context + word),
    accumulating backoff weights for every context that had to be
    shortened. A context that is missing entirely contributes backoff 0.
    """

    max_order: int
    entries: dict[tuple[str, ...], tuple[float, float | None]] = field(
        default_factory=dict
    )

    @property
    def vocabulary(self) -> set[str]:
        """All tokens with a unigram entry."""
        return {key[0] for key in self.entries if len(key) == 1}

    def advance(self, state: LmState, word: str) -> LmState:
        """Append a word to the context, truncating to what the model can use."""
        context = state.context + (word,)
        keep = self.max_order - 1
        if keep <= 0:
            return EMPTY_STATE
        return LmState(context[-keep:])

    def score_word(
        self,
        state: LmState,
        word: str,
        oov_log10: float = DEFAULT_OOV_LOG10,
    ) -> tuple[float, LmState]:
        """Score one word after ``state`` and return (log10 prob, next state).

        Unknown words (no unigram entry) receive ``oov_log10`` with no
        backoff charges; the word still enters the returned context so a
        following word sees the true history.
        """
        next_state = self.advance(state, word)
        if (word,) not in self.entries:
            return oov_log10, next_state

        context = state.context
        if len(context) > self.max_order - 1:
            context = context[len(context) - (self.max_order - 1):]
        penalty = 0.0
        while True:
            hit = self.entries.get(context + (word,))
            if hit is not None:
                return penalty + hit[0], next_state
            if not context:
                # unreachable: the unigram entry exists
                return oov_log10, next_state
            back = self.entries.get(context)
            if back is not None and back[1] is not None:
                penalty += back[1]
            context = context[1:]

    def sentence_logprob(
        self,
        words: Iterable[str],
        oov_log10: float = DEFAULT_OOV_LOG10,
    ) -> float:
        """Sum of per-word scores starting from the empty context."""
        total = 0.0
        state = EMPTY_STATE
        for word in words:
            lp, state = self.score_word(state, word, oov_log10)
            total += lp
        return total


def _check_prefixes(model: NGramModel) -> None:
    # Every proper prefix of an entry must itself be an entry, otherwise
    # the backoff walk would silently skip a level.
    for key in model.entries:
        for cut in range(1, len(key)):
            if key[:cut] not in model.entries:
                raise MalformedArpa(
                    f"{len(key)}-gram {' '.join(key)!r} lacks prefix entry "
                    f"{' '.join(key[:cut])!r}"
                )


def parse_arpa(text: str) -> NGramModel:
    """Parse ARPA text into an NGramModel.

    Enforces: a ``\\data\\`` header with contiguous orders 1..N, section
    counts matching the header, one entry per line shaped as
    ``logprob tok1..tokN [backoff]``, finite or -inf log probabilities
    (never positive, never NaN), no backoff on the highest order, no
    duplicate entries, a closing ``\\end\\``, and prefix-closedness of the
    final entry set. Violations raise MalformedArpa with a 1-based line
    number where one applies.
    """
    lines = text.splitlines()
    counts: dict[int, int] = {}
    entries: dict[tuple[str, ...], tuple[float, float | None]] = {}

    i = 0
    n_lines = len(lines)

    def skip_blank(j: int) -> int:
        while j < n_lines and not lines[j].strip():
            j += 1
        return j

    i = skip_blank(i)
    if i >= n_lines or lines[i].strip() != "\\data\\":
        raise MalformedArpa("expected \\data\\ header", i + 1 if i < n_lines else None)
    i += 1

    count_re = re.compile(r"^ngram\s+(\d+)\s*=\s*(\d+)$")
    while i < n_lines:
        stripped = lines[i].strip()
        if not stripped:
            i += 1
            continue
        m = count_re.match(stripped)
        if not m:
            break
        order = int(m.group(1))
        if order in counts:
            raise MalformedArpa(f"repeated count for order {order}", i + 1)
        counts[order] = int(m.group(2))
        i += 1

    if not counts:
        raise MalformedArpa("no ngram count lines after \\data\\")
    max_order = max(counts)
    for order in range(1, max_order + 1):
        if order not in counts:
            raise MalformedArpa(f"non-contiguous orders: missing ngram {order}= line")

    def parse_float(tok: str, what: str, line_no: int) -> float:
        try:
            val = float(tok)
        except ValueError:
            raise MalformedArpa(f"bad {what} {tok!r}", line_no) from None
        if val != val:
            raise MalformedArpa(f"{what} is NaN", line_no)
        return val

    seen_sections: set[int] = set()
    section_re = re.compile(r"^\\(\d+)-grams:$")
    while True:
        i = skip_blank(i)
        if i >= n_lines:
            raise MalformedArpa("missing \\end\\")
        stripped = lines[i].strip()
        if stripped == "\\end\\":
            break
        m = section_re.match(stripped)
        if not m:
            raise MalformedArpa(f"unexpected content {stripped!r}", i + 1)
        order = int(m.group(1))
        if order not in counts:
            raise MalformedArpa(f"section for undeclared order {order}", i + 1)
        if order in seen_sections:
            raise MalformedArpa(f"duplicate \\{order}-grams: section", i + 1)
        seen_sections.add(order)
        i += 1

        section_count = 0
        while i < n_lines:
            raw = lines[i]
            stripped = raw.strip()
            if not stripped:
                i += 1
                continue
            if stripped.startswith("\\"):
                break
            fields = stripped.split()
            if len(fields) == order + 1:
                has_backoff = False
            elif len(fields) == order + 2:
                has_backoff = True
            else:
                raise MalformedArpa(
                    f"expected {order + 1} or {order + 2} fields, got {len(fields)}",
                    i + 1,
                )
            logprob = parse_float(fields[0], "log probability", i + 1)
            if logprob > 0.0:
                raise MalformedArpa(f"positive log probability {logprob!r}", i + 1)
            if logprob == float("inf"):
                raise MalformedArpa("infinite log probability", i + 1)
            key = tuple(fields[1:order + 1])
            backoff: float | None = None
            if has_backoff:
                if order == max_order:
                    raise MalformedArpa(
                        "backoff weight on highest-order entry", i + 1
                    )
                backoff = parse_float(fields[order + 1], "backoff weight", i + 1)
                if backoff in (float("inf"), float("-inf")):
                    raise MalformedArpa("infinite backoff weight", i + 1)
            if key in entries:
                raise MalformedArpa(f"duplicate entry {' '.join(key)!r}", i + 1)
            entries[key] = (logprob, backoff)
            section_count += 1
            i += 1

        if section_count != counts[order]:
            raise MalformedArpa(
                f"\\{order}-grams: section has {section_count} entries, "
                f"header declared {counts[order]}"
            )

    for order in counts:
        if counts[order] > 0 and order not in seen_sections:
            raise MalformedArpa(f"missing \\{order}-grams: section")

    model = NGramModel(max_order=max_order, entries=entries)
    _check_prefixes(model)
    return model


def serialize_arpa(model: NGramModel) -> str:
    """Render a model as ARPA text.

    Entries are sorted per order for a canonical layout, and floats use
    repr() so parse(serialize(m)) reproduces every bit of m.
    """
    by_order: dict[int, list[tuple[tuple[str, ...], tuple[float, float | None]]]] = {
        order: [] for order in range(1, model.max_order + 1)
    }
    for key, value in model.entries.items():
        by_order[len(key)].append((key, value))

    out: list[str] = ["\\data\\"]
    for order in range(1, model.max_order + 1):
        out.append(f"ngram {order}={len(by_order[order])}")
    for order in range(1, model.max_order + 1):
        out.append("")
        out.append(f"\\{order}-grams:")
        for key, (logprob, backoff) in sorted(by_order[order]):
            parts = [repr(logprob), " ".join(key)]
            if backoff is not None:
                parts.append(repr(backoff))
            out.append("\t".join(parts))
    out.append("")
    out.append("\\end\\")
    return "\n".join(out) + "\n"


def load_arpa(path) -> NGramModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_arpa(fh.read())


def save_arpa(model: NGramModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_arpa(model))


def merge_colored(models: Iterable[tuple[NGramModel, int]]) -> NGramModel:
    """Union color-renamed copies of several models into one model.

    Each (model, color) pair contributes its entries with every token
    renamed by ``color_token``. Orders may differ; the merged model's
    order is the maximum. Colliding colored n-grams raise
    DuplicateColoredToken since the merge would have to drop statistics.
    """
    merged: dict[tuple[str, ...], tuple[float, float | None]] = {}
    max_order = 0
    for model, color in models:
        max_order = max(max_order, model.max_order)
        for key, value in model.entries.items():
            colored_key = tuple(color_token(tok, color) for tok in key)
            if colored_key in merged:
                raise DuplicateColoredToken(
                    f"colored n-gram {' '.join(colored_key)!r} appears twice"
                )
            merged[colored_key] = value
    if max_order == 0:
        raise ValueError("merge_colored needs at least one model")
    return NGramModel(max_order=max_order, entries=merged)
