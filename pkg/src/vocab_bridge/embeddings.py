"""Token vocabularies and dense embedding matrices, with text I/O.

The on-disk embedding format is the plain text interchange layout used by
word2vec and fastText: a header line ``<count> <dim>`` followed by one row per
token, fields separated by single spaces.  Values are written with 9
significant digits, which round-trips float64 data to within 1e-8 relative
error.  Vocabulary files hold one token per line; the 0-based line number is
the token id.

Tokens are compared byte-wise.  No Unicode normalization or case folding is
performed anywhere in this package.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence

import numpy as np

from .errors import (
    CountMismatch,
    MalformedHeader,
    MissingToken,
    NonFiniteValue,
    ParseError,
    RowArityMismatch,
    TokenNotFound,
    ValidationError,
    ZeroRow,
)

# Norm below which a row counts as zero and cannot be normalized.
ZERO_NORM_TOL = 1e-12
# Tolerance for the unit-norm check on matrices flagged as normalized.
UNIT_NORM_TOL = 1e-9


class Vocabulary:
    """An ordered set of unique subword tokens.

    Token ids are positions in the original ordering.  Tokens must be
    non-empty and free of whitespace.  ``continuation_prefix`` marks
    word-internal pieces in the WordPiece convention (``"##"`` by default).
    """

    __slots__ = ("tokens", "index", "continuation_prefix")

    def __init__(self, tokens: Iterable[str], continuation_prefix: str = "##"):
        toks = tuple(tokens)
        index: dict[str, int] = {}
        for i, tok in enumerate(toks):
            if not isinstance(tok, str) or not tok:
                raise ValidationError(f"empty or non-string token at position {i}")
            if any(ch.isspace() for ch in tok):
                raise ValidationError(f"token {tok!r} at position {i} contains whitespace")
            if tok in index:
                raise ValidationError(f"duplicate token {tok!r} at position {i}")
            index[tok] = i
        self.tokens = toks
        self.index = index
        self.continuation_prefix = continuation_prefix

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self.index

    def __iter__(self):
        return iter(self.tokens)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return (
            self.tokens == other.tokens
            and self.continuation_prefix == other.continuation_prefix
        )

    def __repr__(self) -> str:
        return f"Vocabulary({len(self.tokens)} tokens)"

    def id(self, token: str) -> int:
        try:
            return self.index[token]
        except KeyError:
            raise TokenNotFound(token) from None

    def token(self, token_id: int) -> str:
        return self.tokens[token_id]


class EmbeddingMatrix:
    """A float64 matrix with one row per vocabulary token.

    Instances are immutable: the row array is copied on construction and its
    write flag is cleared.  ``normalized`` asserts that every row has unit L2
    norm (checked to within ``UNIT_NORM_TOL``).  ``duplicate_count`` records
    how many duplicate rows were dropped while parsing, if the matrix came
    from :func:`load_embeddings`.
    """

    __slots__ = ("vocab", "rows", "normalized", "duplicate_count")

    def __init__(
        self,
        vocab: Vocabulary,
        rows,
        *,
        normalized: bool = False,
        duplicate_count: int = 0,
    ):
        arr = np.array(rows, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise ValidationError(f"rows must be 2-D, got shape {arr.shape}")
        if arr.shape[0] != len(vocab):
            raise ValidationError(
                f"row count {arr.shape[0]} does not match vocabulary size {len(vocab)}"
            )
        if arr.shape[1] < 1:
            raise ValidationError("embedding dimension must be at least 1")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("embedding rows contain non-finite values")
        if normalized and arr.shape[0]:
            norms = np.linalg.norm(arr, axis=1)
            if np.max(np.abs(norms - 1.0)) > UNIT_NORM_TOL:
                raise ValidationError("matrix flagged normalized but rows are not unit norm")
        arr.setflags(write=False)
        self.vocab = vocab
        self.rows = arr
        self.normalized = normalized
        self.duplicate_count = duplicate_count

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]

    def row(self, token: str) -> np.ndarray:
        """Return the embedding row for ``token`` (read-only view)."""
        return self.rows[self.vocab.id(token)]


def load_embeddings(path) -> EmbeddingMatrix:
    """Parse a text embedding file.

    Duplicate tokens keep the first occurrence; the number of dropped rows is
    available as ``duplicate_count`` on the result.  Parse problems raise
    errors naming the offending 1-based line number: ``MalformedHeader``,
    ``RowArityMismatch``, ``NonFiniteValue`` and ``CountMismatch``.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MalformedHeader("empty file", line=1)
    head = lines[0].split(" ")
    if len(head) != 2:
        raise MalformedHeader(f"expected '<count> <dim>', got {lines[0]!r}", line=1)
    try:
        count, dim = int(head[0]), int(head[1])
    except ValueError:
        raise MalformedHeader(f"non-integer header fields in {lines[0]!r}", line=1) from None
    if count < 0 or dim < 1:
        raise MalformedHeader(f"invalid header values {lines[0]!r}", line=1)

    body = lines[1:]
    if len(body) != count:
        bad = min(len(body), count) + 2  # first missing or first extra line
        raise CountMismatch(
            f"header declares {count} rows but file has {len(body)}", line=bad
        )

    tokens: list[str] = []
    seen: dict[str, int] = {}
    vectors: list[np.ndarray] = []
    duplicates = 0
    for offset, line in enumerate(body):
        lineno = offset + 2
        parts = line.split(" ")
        if len(parts) != dim + 1:
            raise RowArityMismatch(
                f"expected token plus {dim} values, got {len(parts)} fields", line=lineno
            )
        token = parts[0]
        if not token or any(ch.isspace() for ch in token):
            raise ParseError(f"invalid token {token!r}", line=lineno)
        try:
            vec = np.array(parts[1:], dtype=np.float64)
        except ValueError:
            raise ParseError(f"unparseable numeric value in row for {token!r}", line=lineno) from None
        if not np.all(np.isfinite(vec)):
            raise NonFiniteValue(f"non-finite value in row for {token!r}", line=lineno)
        if token in seen:
            duplicates += 1
            continue
        seen[token] = len(tokens)
        tokens.append(token)
        vectors.append(vec)

    rows = np.vstack(vectors) if vectors else np.zeros((0, dim))
    return EmbeddingMatrix(Vocabulary(tokens), rows, duplicate_count=duplicates)


def save_embeddings(emb: EmbeddingMatrix, path) -> None:
    """Write ``emb`` in the text interchange format (9 significant digits)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(emb)} {emb.dim}\n")
        for token, row in zip(emb.vocab.tokens, emb.rows):
            values = " ".join(format(v, ".9g") for v in row)
            fh.write(f"{token} {values}\n")


def normalize_rows(emb: EmbeddingMatrix) -> EmbeddingMatrix:
    """Return a copy of ``emb`` with unit L2 rows.

    Raises ``ZeroRow`` naming the first token whose norm is below
    ``ZERO_NORM_TOL``.  Applying this to an already normalized matrix changes
    nothing beyond 1e-12.
    """
    if not len(emb):
        return EmbeddingMatrix(emb.vocab, emb.rows, normalized=True)
    norms = np.linalg.norm(emb.rows, axis=1)
    small = np.flatnonzero(norms < ZERO_NORM_TOL)
    if small.size:
        raise ZeroRow(emb.vocab.token(int(small[0])))
    return EmbeddingMatrix(emb.vocab, emb.rows / norms[:, None], normalized=True)


def subset(emb: EmbeddingMatrix, tokens: Sequence[str]) -> EmbeddingMatrix:
    """Restrict ``emb`` to ``tokens``, in the order requested.

    Raises ``MissingToken`` naming the first absent token and its position in
    the request.
    """
    ids = []
    for pos, tok in enumerate(tokens):
        idx = emb.vocab.index.get(tok)
        if idx is None:
            raise MissingToken(tok, pos)
        ids.append(idx)
    rows = emb.rows[ids] if ids else np.zeros((0, emb.dim))
    return EmbeddingMatrix(
        Vocabulary(tokens, emb.vocab.continuation_prefix),
        rows,
        normalized=emb.normalized,
    )


def load_vocabulary(path, continuation_prefix: str = "##") -> Vocabulary:
    """Read a one-token-per-line vocabulary file; line number = token id."""
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().splitlines()
    return Vocabulary(tokens, continuation_prefix)


def save_vocabulary(vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for token in vocab.tokens:
            fh.write(token + "\n")
