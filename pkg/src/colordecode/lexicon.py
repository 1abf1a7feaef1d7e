"""Colored lexicons: alphabets, per-color spelling tries, and the word
grammar the decoder walks.

A "color" identifies which lexicon a word came from. Every color shares
the same base character set; the decoder distinguishes ``(character,
color)`` pairs so a finished transcript carries word provenance. The word
separator, when configured, belongs to no lexicon: it takes the color of
the character before it (color 0 at the very start of an utterance).
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

__all__ = [
    "UnknownChar",
    "InvalidWordChar",
    "ColoredAlphabet",
    "TrieNode",
    "LexiconTrie",
    "build_trie",
    "WordState",
    "WORD_START",
    "Extension",
    "word_successors",
    "finish_word",
    "get_next_chars",
]


class UnknownChar(KeyError):
    """A character outside the alphabet was looked up."""


class InvalidWordChar(ValueError):
    """A lexicon word contains a character it may not (outside the
    alphabet, or the separator itself)."""


class ColoredAlphabet:
    """Base characters shared by all colors, plus the blank.

    Acoustic model columns are laid out as the base characters in order
    followed by blank, so ``blank_index == len(base_chars)`` and a logits
    row has ``num_columns`` entries. ``word_separator`` must be one of the
    base characters, or None when word boundaries are implicit (single
    words per utterance, or unsegmented text).
    """

    __slots__ = ("base_chars", "num_colors", "word_separator", "_index")

    def __init__(
        self,
        base_chars: Sequence[str],
        num_colors: int,
        word_separator: str | None,
    ):
        chars = tuple(base_chars)
        if not chars:
            raise ValueError("alphabet needs at least one character")
        if any(len(c) != 1 for c in chars):
            raise ValueError("alphabet entries must be single characters")
        if len(set(chars)) != len(chars):
            raise ValueError("alphabet has repeated characters")
        if num_colors < 1:
            raise ValueError("need at least one color")
        if word_separator is not None and word_separator not in chars:
            raise ValueError("word separator must be in the alphabet")
        self.base_chars = chars
        self.num_colors = num_colors
        self.word_separator = word_separator
        self._index = {c: i for i, c in enumerate(chars)}

    @property
    def size(self) -> int:
        return len(self.base_chars)

    @property
    def blank_index(self) -> int:
        return len(self.base_chars)

    @property
    def num_columns(self) -> int:
        return len(self.base_chars) + 1

    @property
    def separator_column(self) -> int | None:
        if self.word_separator is None:
            return None
        return self._index[self.word_separator]

    def char_column(self, char: str) -> int:
        try:
            return self._index[char]
        except KeyError:
            raise UnknownChar(char) from None


class TrieNode:
    __slots__ = ("children", "word")

    def __init__(self):
        self.children: dict[int, TrieNode] = {}
        self.word: str | None = None


class LexiconTrie:
    """Spellings of one color's lexicon, keyed by alphabet column."""

    __slots__ = ("color", "root", "words")

    def __init__(self, color: int):
        self.color = color
        self.root = TrieNode()
        self.words: set[str] = set()

    def walk(self, cols: Sequence[int]) -> TrieNode | None:
        node = self.root
        for col in cols:
            node = node.children.get(col)
            if node is None:
                return None
        return node

    def __contains__(self, word: str) -> bool:
        return word in self.words


def build_trie(
    alphabet: ColoredAlphabet, color: int, words: Sequence[str]
) -> LexiconTrie:
    """Build a trie from lowercase spellings.

    Words are lowercased on the way in. Empty words, words containing the
    separator, and words with out-of-alphabet characters are rejected.
    """
    trie = LexiconTrie(color)
    sep = alphabet.word_separator
    for raw in words:
        word = raw.lower()
        if not word:
            raise InvalidWordChar("empty word")
        if sep is not None and sep in word:
            raise InvalidWordChar(f"word {word!r} contains the separator")
        node = trie.root
        for char in word:
            if char not in alphabet._index:
                raise InvalidWordChar(
                    f"word {word!r} contains {char!r} outside the alphabet"
                )
            col = alphabet.char_column(char)
            node = node.children.setdefault(col, TrieNode())
        node.word = word
        trie.words.add(word)
    return trie


class WordState(NamedTuple):
    """Position inside the word currently being spelled.

    ``chars`` is the column sequence of the partial word; empty means we
    sit at a word boundary. ``color`` is the color being spelled (at a
    boundary: the color of the previous character, for separator
    inheritance; None only at the utterance start). ``node`` is the trie
    position, or None when spelling off-lexicon or in unconstrained mode.
    """

    color: int | None
    node: TrieNode | None
    chars: tuple[int, ...]


WORD_START = WordState(None, None, ())


class Extension(NamedTuple):
    """One legal next character from a WordState.

    ``completes`` is the word ended by this character (always via the
    separator), or None. ``off_lexicon`` flags completions of words no
    trie contains.
    """

    col: int
    color: int
    state: WordState
    completes: str | None
    off_lexicon: bool


def _spell(alphabet: ColoredAlphabet, cols: tuple[int, ...]) -> str:
    return "".join(alphabet.base_chars[c] for c in cols)


def word_successors(
    alphabet: ColoredAlphabet,
    tries: Sequence[LexiconTrie] | None,
    state: WordState,
    allow_off_lexicon: bool = False,
) -> list[Extension]:
    """Every character extension the word grammar permits from ``state``.

    With tries, mid-word successors follow trie edges (plus the separator
    when the node spells a complete word); boundary successors open every
    color's first characters. ``allow_off_lexicon`` additionally permits
    any same-color character mid-word, with the separator then completing
    an out-of-lexicon word. Boundaries never start an off-lexicon word:
    the first character must be on some trie, which keeps the color
    assignment grounded.

    With ``tries=None`` the grammar is unconstrained: one color (0), any
    character anywhere, the separator delimiting words.
    """
    sep_col = alphabet.separator_column
    out: list[Extension] = []

    if tries is None:
        prev_color = state.color if state.color is not None else 0
        for col in range(alphabet.size):
            if col == sep_col:
                # a separator completes the pending word; at a boundary it
                # is just consumed (its color inherited from the left)
                completes = _spell(alphabet, state.chars) if state.chars else None
                out.append(
                    Extension(
                        col,
                        prev_color,
                        WordState(prev_color, None, ()),
                        completes,
                        False,
                    )
                )
                continue
            out.append(
                Extension(col, 0, WordState(0, None, state.chars + (col,)), None, False)
            )
        return out

    if not state.chars:
        # word boundary: any lexicon may start a word, and the separator
        # may repeat (colored like the previous character, 0 at the start)
        for trie in tries:
            for col, node in trie.root.children.items():
                out.append(
                    Extension(
                        col,
                        trie.color,
                        WordState(trie.color, node, (col,)),
                        None,
                        False,
                    )
                )
        if sep_col is not None:
            color = state.color if state.color is not None else 0
            out.append(
                Extension(sep_col, color, WordState(color, None, ()), None, False)
            )
        return out

    color = state.color
    assert color is not None
    node = state.node

    if node is not None:
        for col, child in node.children.items():
            out.append(
                Extension(
                    col, color, WordState(color, child, state.chars + (col,)), None, False
                )
            )
        if sep_col is not None and node.word is not None:
            out.append(
                Extension(
                    sep_col, color, WordState(color, None, ()), node.word, False
                )
            )

    if allow_off_lexicon:
        on_trie = set()
        if node is not None:
            on_trie = set(node.children)
            if sep_col is not None and node.word is not None:
                on_trie.add(sep_col)
        for col in range(alphabet.size):
            if col in on_trie:
                continue
            if col == sep_col:
                out.append(
                    Extension(
                        sep_col,
                        color,
                        WordState(color, None, ()),
                        _spell(alphabet, state.chars),
                        True,
                    )
                )
            else:
                out.append(
                    Extension(
                        col,
                        color,
                        WordState(color, None, state.chars + (col,)),
                        None,
                        False,
                    )
                )
    return out


def finish_word(
    alphabet: ColoredAlphabet,
    tries: Sequence[LexiconTrie] | None,
    state: WordState,
    allow_off_lexicon: bool = False,
) -> tuple[str, int, bool] | None:
    """Resolve a partial word at the end of the utterance.

    Returns (word, color, off_lexicon) when the partial spells something
    reportable: a word-final trie node, an unconstrained-mode string, or
    (with ``allow_off_lexicon``) any leftover spelling. Returns None when
    there is nothing pending or the spelling must be dropped.
    """
    if not state.chars:
        return None
    if tries is None:
        return _spell(alphabet, state.chars), 0, False
    color = state.color
    assert color is not None
    if state.node is not None and state.node.word is not None:
        return state.node.word, color, False
    if allow_off_lexicon:
        return _spell(alphabet, state.chars), color, True
    return None


def get_next_chars(
    alphabet: ColoredAlphabet,
    tries: Sequence[LexiconTrie] | None,
    beam_tail: tuple[str, int | None],
    allow_off_lexicon: bool = False,
) -> set[tuple[str, int]]:
    """Legal (character, color) continuations after a partial word.

    ``beam_tail`` is (partial word text, color of that partial or None at
    a fresh boundary). Convenience wrapper over ``word_successors`` for
    callers that think in characters rather than columns.
    """
    partial, color = beam_tail
    cols = tuple(alphabet.char_column(c) for c in partial)
    if tries is None or not cols:
        state = WordState(color, None, cols) if cols else WordState(color, None, ())
    else:
        assert color is not None
        node = tries[color].walk(cols)
        state = WordState(color, node, cols)
        if node is None and not allow_off_lexicon:
            return set()
    exts = word_successors(alphabet, tries, state, allow_off_lexicon)
    return {(alphabet.base_chars[e.col], e.color) for e in exts}
