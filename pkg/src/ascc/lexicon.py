"""Vocabulary, substitution lexicon, and corpus file handling.

File formats (all UTF-8 text):

* vocab: one word per line; line number is the word id.
* lexicon: ``headword<TAB>comma-separated substitutes``; ``#`` starts a
  comment line. Words never listed get the singleton set {self}.
* corpus: ``label<TAB>space-separated tokens``, one example per line.
"""

from __future__ import annotations

from dataclasses import dataclass

NULL_TOKEN = "NULL"


class ParseError(ValueError):
    """Malformed input file; message carries the path and line number."""


@dataclass(frozen=True)
class Example:
    """One tokenized sentence with its class id."""

    tokens: tuple[int, ...]
    label: int

    def __post_init__(self):
        if len(self.tokens) < 1:
            raise ValueError("an example needs at least one token")


class Vocab:
    """Bijection between token strings and dense ids in [0, V).

    The unknown-word token NULL is always present; words absent from the
    vocabulary resolve to its id.
    """

    def __init__(self, words):
        self.words: list[str] = list(words)
        if NULL_TOKEN not in self.words:
            self.words.append(NULL_TOKEN)
        self.index: dict[str, int] = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise ValueError("vocabulary contains duplicate words")
        self.null_id: int = self.index[NULL_TOKEN]

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index

    def id_of(self, word: str) -> int:
        return self.index.get(word, self.null_id)

    def word_of(self, wid: int) -> str:
        return self.words[wid]

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.words == other.words


class SubstitutionLexicon:
    """Per word-id substitution sets.

    Every set contains the word itself at index 0 (discretization and tie
    breaks favor the original word), has no duplicates, and only valid ids.
    """

    def __init__(self, subs: list[list[int]]):
        vocab_size = len(subs)
        normalized = []
        for wid, lst in enumerate(subs):
            seen = {wid}
            row = [wid]
            for s in lst:
                s = int(s)
                if not 0 <= s < vocab_size:
                    raise ValueError(f"substitution id {s} out of range")
                if s not in seen:
                    seen.add(s)
                    row.append(s)
            normalized.append(row)
        self.subs: list[list[int]] = normalized

    def __len__(self) -> int:
        return len(self.subs)

    def set_for(self, wid: int) -> list[int]:
        return self.subs[wid]

    def set_size(self, wid: int) -> int:
        return len(self.subs[wid])

    @property
    def max_set_size(self) -> int:
        return max(len(s) for s in self.subs)

    def attackable_positions(self, tokens) -> list[int]:
        return [i for i, t in enumerate(tokens) if len(self.subs[t]) > 1]


def load_vocab(path) -> Vocab:
    words = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            w = line.strip()
            if w:
                words.append(w)
    if not words:
        raise ParseError(f"{path}: empty vocabulary file")
    return Vocab(words)


def save_vocab(vocab: Vocab, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for w in vocab.words:
            f.write(w + "\n")


def load_lexicon(path, vocab: Vocab) -> SubstitutionLexicon:
    """Read a substitution lexicon against a fixed vocabulary.

    Headwords not in the vocabulary are skipped (they cannot be attached to
    an id); unknown substitutes map to NULL. Repeated headword lines merge.
    Words never mentioned get the singleton set {self}.
    """
    subs: list[list[int]] = [[] for _ in range(len(vocab))]
    saw_content = False
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            saw_content = True
            parts = line.split("\t")
            head = parts[0].strip()
            if not head:
                raise ParseError(f"{path}:{lineno}: empty headword")
            if len(parts) > 2:
                raise ParseError(f"{path}:{lineno}: expected at most one tab")
            if head not in vocab:
                continue
            hid = vocab.index[head]
            if len(parts) == 2 and parts[1].strip():
                for w in parts[1].split(","):
                    w = w.strip()
                    if not w:
                        raise ParseError(f"{path}:{lineno}: empty substitute")
                    subs[hid].append(vocab.id_of(w))
    if not saw_content:
        raise ParseError(f"{path}: empty lexicon file")
    return SubstitutionLexicon(subs)


def save_lexicon(lexicon: SubstitutionLexicon, vocab: Vocab, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for wid, lst in enumerate(lexicon.subs):
            others = [vocab.word_of(s) for s in lst if s != wid]
            if others:
                f.write(f"{vocab.word_of(wid)}\t{','.join(others)}\n")


def load_corpus(path, vocab: Vocab, max_len: int = 32) -> list[Example]:
    examples = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected label<TAB>tokens")
            try:
                label = int(parts[0])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer label {parts[0]!r}")
            words = parts[1].split()
            if not words:
                raise ParseError(f"{path}:{lineno}: empty token list")
            tokens = tuple(vocab.id_of(w) for w in words[:max_len])
            examples.append(Example(tokens, label))
    if not examples:
        raise ParseError(f"{path}: empty corpus file")
    return examples


def save_corpus(examples, vocab: Vocab, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            words = " ".join(vocab.word_of(t) for t in ex.tokens)
            f.write(f"{ex.label}\t{words}\n")
