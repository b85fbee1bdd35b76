"""Word-vector table and its text-format load/export round trip."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor
from .lexicon import ParseError, Vocab


class EmbeddingMatrix:
    """V x d vector table; the rows are the trainable word parameters.

    ``frozen=True`` turns gradient tracking off so updates are never applied
    to the rows. The flag itself is runtime state and is not serialized by
    the text export.
    """

    def __init__(self, matrix: Tensor, frozen: bool = False):
        if matrix.values.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-d, got {matrix.shape}")
        self.matrix = matrix
        self.frozen = bool(frozen)
        self.matrix.requires_grad = not self.frozen

    @property
    def vocab_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def row(self, wid: int) -> np.ndarray:
        return self.matrix.values[wid]

    @classmethod
    def random(cls, vocab_size: int, dim: int, rng: np.random.Generator,
               scale: float = 0.1, frozen: bool = False) -> "EmbeddingMatrix":
        values = rng.uniform(-scale, scale, size=(vocab_size, dim))
        return cls(Tensor(values), frozen=frozen)


def load_embeddings(path, vocab: Vocab, dim: int, rng: np.random.Generator,
                    frozen: bool = False) -> EmbeddingMatrix:
    """Fill rows from a ``word v1 ... vd`` text file.

    Rows for words missing from the file are drawn uniform in [-0.1, 0.1]
    from ``rng``, so the result is reproducible under a fixed seed.
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    values = rng.uniform(-0.1, 0.1, size=(len(vocab), dim))
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != dim + 1:
                raise ParseError(
                    f"{path}:{lineno}: expected 1 word + {dim} floats, "
                    f"got {len(parts)} fields"
                )
            word = parts[0]
            if word not in vocab:
                continue
            try:
                row = [float(x) for x in parts[1:]]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric vector component")
            values[vocab.index[word]] = row
    return EmbeddingMatrix(Tensor(values), frozen=frozen)


def export_embeddings(emb: EmbeddingMatrix, vocab: Vocab, path) -> None:
    """Write ``word v1 ... vd`` lines; 17 significant digits round-trip
    64-bit values exactly."""
    if emb.vocab_size != len(vocab):
        raise ValueError(
            f"embedding rows ({emb.vocab_size}) differ from vocab size ({len(vocab)})"
        )
    with open(path, "w", encoding="utf-8") as f:
        for wid, word in enumerate(vocab.words):
            comps = " ".join(f"{x:.17g}" for x in emb.matrix.values[wid])
            f.write(f"{word} {comps}\n")
