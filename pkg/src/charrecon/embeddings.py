import numpy as np

from .errors import DimensionError


class EmbeddingTable:
    """Ordered word -> vector map backed by one ``(n, d)`` float64 matrix.

    Word order is insertion order; rows are never shared between words.
    """

    def __init__(self, words, vectors):
        words = list(words)
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim != 2 or vectors.shape[0] != len(words):
            raise DimensionError(f"{len(words)} words but vectors of shape {vectors.shape}")
        index = {}
        for i, w in enumerate(words):
            if w in index:
                raise ValueError(f"duplicate word {w!r}")
            index[w] = i
        self.words = words
        self.vectors = vectors
        self._index = index

    @classmethod
    def from_dict(cls, mapping):
        words = list(mapping)
        if not words:
            raise ValueError("empty embedding table")
        return cls(words, np.vstack([np.asarray(mapping[w], dtype=float) for w in words]))

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self._index

    def __getitem__(self, word):
        return self.vectors[self._index[word]]

    def __iter__(self):
        return iter(self.words)

    def index(self, word):
        return self._index[word]

    def items(self):
        return zip(self.words, self.vectors)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return self.words == other.words and np.array_equal(self.vectors, other.vectors)

    def __repr__(self):
        return f"EmbeddingTable({len(self)} words, dim={self.dim})"
