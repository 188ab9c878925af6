"""Error types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class DegenerateInputError(ValueError):
    """Input is structurally valid but has no usable content (e.g. a fully
    masked attention row, a zero-norm embedding)."""


class ContractError(ValueError):
    """An API precondition was violated (e.g. non-scalar loss)."""


class NonFiniteError(ArithmeticError):
    """A kernel op produced NaN or Inf; the computation is in an error state."""


class CorpusError(ValueError):
    """A data file (corpus or checkpoint) failed to load or validate."""


class EmbeddingKeyError(KeyError):
    """A required embedding-table key is missing."""

    def __init__(self, key: str):
        super().__init__(key)
        self.key = key

    def __str__(self) -> str:
        return f"embedding table has no entry for key {self.key!r}"
