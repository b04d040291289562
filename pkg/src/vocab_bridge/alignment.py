"""Orthogonal alignment between embedding spaces and CSLS retrieval.

The central primitive is the orthogonal Procrustes solve: given paired rows
X (n x d1) and Y (n x d2), the semi-orthogonal M minimizing ||X M - Y||_F is
M = U V^T where U S V^T is the thin SVD of X^T Y.

Retrieval uses cross-domain similarity local scaling (CSLS), which penalizes
hub vectors:

    csls(x, y) = 2 cos(x, y) - r_tgt(x) - r_src(y)

where r_tgt(x) is the mean cosine from x to its k nearest neighbors in the
target set and r_src(y) the mean cosine from y to its k nearest in the
source set.  Ranking ties are broken by ascending target token id so that
every retrieval is deterministic.

All similarity computation happens on L2-normalized copies; raw matrices are
never modified.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .dictionary import BilingualDictionary
from .embeddings import (
    EmbeddingMatrix,
    Vocabulary,
    normalize_rows,
)
from .errors import (
    CountMismatch,
    DegenerateInput,
    DimMismatch,
    EmptyEvalDict,
    EmptyIntersection,
    EmptyStage1Dict,
    EmptyStage2Anchors,
    KTooLarge,
    LowRankWarning,
    MalformedHeader,
    NonFiniteValue,
    ParseError,
    RowArityMismatch,
    ValidationError,
)

log = logging.getLogger(__name__)

# Maximum entrywise deviation of M^T M (or M M^T) from identity.
ORTHOGONALITY_TOL = 1e-6


@dataclass(frozen=True)
class AlignConfig:
    """Retrieval hyperparameters.

    ``csls_k`` is the neighborhood size for the CSLS r-terms, ``top_m`` the
    anchor count used by mixture construction, ``eval_k`` the retrieval depth
    for precision evaluation.
    """

    csls_k: int = 10
    top_m: int = 5
    eval_k: int = 1

    def __post_init__(self):
        for name in ("csls_k", "top_m", "eval_k"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")


class LinearMap:
    """A semi-orthogonal linear map between embedding spaces.

    The matrix has shape (src_dim, tgt_dim) and is applied to row vectors as
    ``x @ matrix``.  Construction verifies semi-orthogonality: M^T M is the
    identity when src_dim >= tgt_dim, otherwise M M^T is.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        arr = np.array(matrix, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise ValidationError(f"map matrix must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("map matrix contains non-finite values")
        d1, d2 = arr.shape
        gram = arr.T @ arr - np.eye(d2) if d1 >= d2 else arr @ arr.T - np.eye(d1)
        dev = float(np.max(np.abs(gram)))
        if dev > ORTHOGONALITY_TOL:
            raise ValidationError(
                f"matrix is not semi-orthogonal (max deviation {dev:.3e})"
            )
        arr.setflags(write=False)
        self.matrix = arr

    @property
    def src_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def tgt_dim(self) -> int:
        return self.matrix.shape[1]

    def __repr__(self) -> str:
        return f"LinearMap({self.src_dim} -> {self.tgt_dim})"


@dataclass(frozen=True)
class NeighborList:
    """Retrieved neighbors for one query: (token, score), best first."""

    query: str
    entries: tuple[tuple[str, float], ...]


@dataclass(frozen=True)
class IndependentFit:
    """A direct source-to-model map with its training statistics."""

    map: LinearMap
    pair_count: int
    mean_residual: float


@dataclass(frozen=True)
class JointFit:
    """The two maps of the two-stage route, with per-stage statistics.

    ``to_english`` carries the source language into the English anchor space;
    ``to_model`` carries the result into the pretrained model space.
    """

    to_english: LinearMap
    to_model: LinearMap
    stage1_pair_count: int
    stage2_pair_count: int
    stage1_residual: float
    stage2_residual: float


def procrustes_solve(x, y) -> LinearMap:
    """Return the semi-orthogonal least-squares map from rows of x to y.

    Raises ``DegenerateInput`` when x^T y is exactly zero (every orientation
    is then equally good) and ``DimMismatch`` when the row counts differ.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 2 or ya.ndim != 2:
        raise ValidationError("inputs must be 2-D arrays of paired rows")
    if xa.shape[0] != ya.shape[0]:
        raise DimMismatch(f"paired row counts differ: {xa.shape[0]} vs {ya.shape[0]}")
    if xa.shape[0] < 1:
        raise ValidationError("need at least one paired row")
    if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(ya))):
        raise ValidationError("inputs contain non-finite values")
    cross = xa.T @ ya
    if not cross.any():
        raise DegenerateInput("x^T y is the zero matrix; the map is unconstrained")
    u, _, vh = np.linalg.svd(cross, full_matrices=False)
    return LinearMap(u @ vh)


def apply_map(linear_map: LinearMap, emb: EmbeddingMatrix) -> EmbeddingMatrix:
    """Map every row of ``emb``; re-normalize when the input was normalized."""
    if emb.dim != linear_map.src_dim:
        raise DimMismatch(
            f"embedding dim {emb.dim} does not match map source dim {linear_map.src_dim}"
        )
    rows = emb.rows @ linear_map.matrix
    out = EmbeddingMatrix(emb.vocab, rows)
    if emb.normalized:
        out = normalize_rows(out)
    return out


def compose_maps(first: LinearMap, second: LinearMap) -> LinearMap:
    """The map applying ``first`` then ``second``."""
    if first.tgt_dim != second.src_dim:
        raise DimMismatch(
            f"cannot compose {first.tgt_dim}-dim output with {second.src_dim}-dim input"
        )
    return LinearMap(first.matrix @ second.matrix)


def _unit(emb: EmbeddingMatrix) -> EmbeddingMatrix:
    return emb if emb.normalized else normalize_rows(emb)


def _topk_mean(sims: np.ndarray, k: int) -> np.ndarray:
    """Row-wise mean of the k largest entries."""
    return np.partition(sims, -k, axis=1)[:, -k:].mean(axis=1)


def _csls_matrix(
    queries: np.ndarray,
    targets: np.ndarray,
    src_rset: np.ndarray,
    tgt_rset: np.ndarray,
    k: int,
) -> np.ndarray:
    """CSLS scores for unit rows; r-terms over the given reference sets."""
    sim = queries @ targets.T
    r_q = _topk_mean(queries @ tgt_rset.T, k)
    r_t = _topk_mean(targets @ src_rset.T, k)
    return 2.0 * sim - r_q[:, None] - r_t[None, :]


def _ranked_ids(scores_row: np.ndarray, top: int) -> np.ndarray:
    """Indices of the ``top`` best scores, ties by ascending index."""
    order = np.lexsort((np.arange(scores_row.size), -scores_row))
    return order[:top]


def csls_score(x, y, src_set: EmbeddingMatrix, tgt_set: EmbeddingMatrix, k: int) -> float:
    """CSLS between two single vectors given their domain sets.

    ``k`` must not exceed the size of either set (``KTooLarge``).  Vectors
    and sets are normalized internally, so scale does not matter.
    """
    xv = np.asarray(x, dtype=np.float64).reshape(-1)
    yv = np.asarray(y, dtype=np.float64).reshape(-1)
    if xv.shape[0] != src_set.dim or yv.shape[0] != tgt_set.dim or xv.shape[0] != yv.shape[0]:
        raise DimMismatch("vector and set dimensions do not all agree")
    if k > len(src_set) or k > len(tgt_set):
        raise KTooLarge(f"k={k} exceeds a set size ({len(src_set)}, {len(tgt_set)})")
    if k < 1:
        raise ValidationError("k must be positive")
    xn = np.linalg.norm(xv)
    yn = np.linalg.norm(yv)
    if xn < 1e-12 or yn < 1e-12:
        raise ValidationError("cannot score a zero vector")
    xu = xv / xn
    yu = yv / yn
    score = _csls_matrix(
        xu[None, :], yu[None, :], _unit(src_set).rows, _unit(tgt_set).rows, k
    )
    return float(score[0, 0])


def csls_knn(
    queries: EmbeddingMatrix,
    targets: EmbeddingMatrix,
    cfg: AlignConfig,
    top: int,
) -> list[NeighborList]:
    """Top CSLS neighbors in ``targets`` for every query row.

    The r-terms use the full query and target matrices.  Results are sorted
    by descending score, ties by ascending target id.
    """
    if queries.dim != targets.dim:
        raise DimMismatch(f"query dim {queries.dim} != target dim {targets.dim}")
    if top < 1 or top > len(targets):
        raise ValidationError(f"top={top} outside [1, {len(targets)}]")
    if cfg.csls_k > len(targets) or cfg.csls_k > len(queries):
        raise KTooLarge(
            f"csls_k={cfg.csls_k} exceeds a matrix size ({len(queries)}, {len(targets)})"
        )
    q = _unit(queries)
    t = _unit(targets)
    scores = _csls_matrix(q.rows, t.rows, q.rows, t.rows, cfg.csls_k)
    out = []
    for i, token in enumerate(q.vocab.tokens):
        ids = _ranked_ids(scores[i], top)
        entries = tuple((t.vocab.token(int(j)), float(scores[i, j])) for j in ids)
        out.append(NeighborList(query=token, entries=entries))
    return out


def eval_precision_at_k(
    linear_map: LinearMap,
    src: EmbeddingMatrix,
    tgt: EmbeddingMatrix,
    eval_dict: BilingualDictionary,
    cfg: AlignConfig,
) -> float:
    """Precision at ``cfg.eval_k`` over unique evaluated source tokens.

    A source scores a hit when any of its listed targets appears in the top
    ``eval_k`` CSLS retrieval of its mapped vector.  Sources missing from the
    source matrix, and sources none of whose targets are in the target
    matrix, are skipped and counted.  Raises ``EmptyEvalDict`` when nothing
    remains.
    """
    mapped = apply_map(linear_map, _unit(src))
    t = _unit(tgt)
    if cfg.csls_k > len(t) or cfg.csls_k > len(mapped):
        raise KTooLarge(f"csls_k={cfg.csls_k} exceeds a matrix size")
    by_source = eval_dict.targets_by_source()
    evaluated: list[tuple[int, set[str]]] = []
    skipped = 0
    for source in eval_dict.sources():
        targets = {t_ for t_ in by_source[source] if t_ in t.vocab}
        if source not in mapped.vocab or not targets:
            skipped += 1
            continue
        evaluated.append((mapped.vocab.id(source), targets))
    if not evaluated:
        raise EmptyEvalDict(f"no usable evaluation pairs ({skipped} sources skipped)")
    if skipped:
        log.info("precision eval skipped %d of %d sources", skipped, skipped + len(evaluated))
    q_rows = mapped.rows[[i for i, _ in evaluated]]
    # r_src over the full mapped source space, not just the evaluated rows
    scores = _csls_matrix(q_rows, t.rows, mapped.rows, t.rows, cfg.csls_k)
    hits = 0
    for row, (_, targets) in enumerate(evaluated):
        ids = _ranked_ids(scores[row], min(cfg.eval_k, len(t)))
        if any(t.vocab.token(int(j)) in targets for j in ids):
            hits += 1
    return hits / len(evaluated)


def unsupervised_score(
    linear_map: LinearMap,
    src: EmbeddingMatrix,
    tgt: EmbeddingMatrix,
    cfg: AlignConfig,
    sample: int = 10000,
) -> float:
    """Mean cosine between sampled mapped sources and their CSLS best match.

    The sample is the first ``min(sample, len(src))`` rows, which follows the
    vocabulary's frequency order for frequency-sorted embedding files.  No
    dictionary is needed, so this serves as a sanity filter for mappings.
    """
    if sample < 1:
        raise ValidationError("sample must be positive")
    mapped = apply_map(linear_map, _unit(src))
    t = _unit(tgt)
    n = min(sample, len(mapped))
    if n < 1:
        raise ValidationError("source matrix is empty")
    q_rows = mapped.rows[:n]
    if cfg.csls_k > len(t) or cfg.csls_k > n:
        raise KTooLarge(f"csls_k={cfg.csls_k} exceeds sample or target size")
    scores = _csls_matrix(q_rows, t.rows, q_rows, t.rows, cfg.csls_k)
    total = 0.0
    for i in range(n):
        j = int(_ranked_ids(scores[i], 1)[0])
        total += float(q_rows[i] @ t.rows[j])
    return total / n


def _fit_pairs(x_rows: np.ndarray, y_rows: np.ndarray, label: str) -> tuple[LinearMap, float]:
    n = x_rows.shape[0]
    d = min(x_rows.shape[1], y_rows.shape[1])
    if n < d:
        warnings.warn(
            f"{label}: {n} training pairs for {d} dimensions; map is underdetermined",
            LowRankWarning,
            stacklevel=3,
        )
    solved = procrustes_solve(x_rows, y_rows)
    residual = float(np.mean(np.linalg.norm(x_rows @ solved.matrix - y_rows, axis=1)))
    return solved, residual


def fit_independent_mapping(
    src: EmbeddingMatrix, model_emb: EmbeddingMatrix
) -> IndependentFit:
    """Fit a single map from the source space straight into the model space.

    Training pairs are the tokens the two vocabularies share, matched
    byte-wise.  Raises ``EmptyIntersection`` when there are none; emits a
    ``LowRankWarning`` when there are fewer pairs than dimensions.
    """
    shared = [tok for tok in src.vocab.tokens if tok in model_emb.vocab]
    if not shared:
        raise EmptyIntersection("source and model vocabularies share no tokens")
    s = _unit(src)
    m = _unit(model_emb)
    x_rows = s.rows[[s.vocab.id(t) for t in shared]]
    y_rows = m.rows[[m.vocab.id(t) for t in shared]]
    solved, residual = _fit_pairs(x_rows, y_rows, "independent fit")
    log.info("independent fit: %d pairs, mean residual %.6f", len(shared), residual)
    return IndependentFit(map=solved, pair_count=len(shared), mean_residual=residual)


def fit_joint_mapping(
    src: EmbeddingMatrix,
    english: EmbeddingMatrix,
    model_emb: EmbeddingMatrix,
    dictionary: BilingualDictionary,
    model_vocab: Vocabulary | None = None,
) -> JointFit:
    """Fit the two-stage route: source -> English -> model space.

    Stage 1 fits ``to_english`` on every dictionary pair whose source has a
    source-space row and whose target has an English row (all pairs of a
    multi-target source are used).  Stage 2 maps the source rows through
    ``to_english`` and fits ``to_model`` on every dictionary pair whose
    target is a model token with an embedding row.

    ``model_vocab`` optionally restricts which targets count as model tokens;
    by default the model embedding's own vocabulary is used.

    Raises ``EmptyStage1Dict`` or ``EmptyStage2Anchors`` when a stage has no
    usable pairs.
    """
    s = _unit(src)
    e = _unit(english)
    m = _unit(model_emb)

    stage1 = [
        (w, t) for w, t in dictionary.pairs if w in s.vocab and t in e.vocab
    ]
    if not stage1:
        raise EmptyStage1Dict("no dictionary pair joins the source and English spaces")
    x1 = s.rows[[s.vocab.id(w) for w, _ in stage1]]
    y1 = e.rows[[e.vocab.id(t) for _, t in stage1]]
    to_english, res1 = _fit_pairs(x1, y1, "joint fit stage 1")

    mapped = apply_map(to_english, s)
    stage2 = [
        (w, t)
        for w, t in dictionary.pairs
        if w in s.vocab
        and t in m.vocab
        and (model_vocab is None or t in model_vocab)
    ]
    if not stage2:
        raise EmptyStage2Anchors("no dictionary target is a model token with a row")
    x2 = mapped.rows[[mapped.vocab.id(w) for w, _ in stage2]]
    y2 = m.rows[[m.vocab.id(t) for _, t in stage2]]
    to_model, res2 = _fit_pairs(x2, y2, "joint fit stage 2")
    log.info(
        "joint fit: stage1 %d pairs (residual %.6f), stage2 %d pairs (residual %.6f)",
        len(stage1), res1, len(stage2), res2,
    )
    return JointFit(
        to_english=to_english,
        to_model=to_model,
        stage1_pair_count=len(stage1),
        stage2_pair_count=len(stage2),
        stage1_residual=res1,
        stage2_residual=res2,
    )


def save_map(linear_map: LinearMap, path) -> None:
    """Write a map as a ``d1 d2`` header plus d1 rows of 9-digit values."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{linear_map.src_dim} {linear_map.tgt_dim}\n")
        for row in linear_map.matrix:
            fh.write(" ".join(format(v, ".9g") for v in row) + "\n")


def load_map(path) -> LinearMap:
    """Read a map written by :func:`save_map`."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MalformedHeader("empty file", line=1)
    head = lines[0].split(" ")
    if len(head) != 2:
        raise MalformedHeader(f"expected 'd1 d2', got {lines[0]!r}", line=1)
    try:
        d1, d2 = int(head[0]), int(head[1])
    except ValueError:
        raise MalformedHeader(f"non-integer header fields in {lines[0]!r}", line=1) from None
    if d1 < 1 or d2 < 1:
        raise MalformedHeader(f"invalid dimensions {lines[0]!r}", line=1)
    body = lines[1:]
    if len(body) != d1:
        raise CountMismatch(f"header declares {d1} rows but file has {len(body)}",
                            line=min(len(body), d1) + 2)
    rows = []
    for offset, line in enumerate(body):
        lineno = offset + 2
        parts = line.split(" ")
        if len(parts) != d2:
            raise RowArityMismatch(f"expected {d2} values, got {len(parts)}", line=lineno)
        try:
            row = np.array(parts, dtype=np.float64)
        except ValueError:
            raise ParseError("unparseable numeric value", line=lineno) from None
        if not np.all(np.isfinite(row)):
            raise NonFiniteValue("non-finite value in map row", line=lineno)
        rows.append(row)
    return LinearMap(np.vstack(rows))


def audit_lines(
    neighbor_lists: list[NeighborList],
    source_lang: str,
    *,
    softmax: bool = False,
):
    """Yield retrieval audit TSV lines, sorted by source token then rank.

    Columns are source_lang, source, target, score; with ``softmax`` a fifth
    column holds the softmax of each query's displayed scores.
    """
    for nl in sorted(neighbor_lists, key=lambda n: n.query):
        probs = None
        if softmax and nl.entries:
            scores = np.array([s for _, s in nl.entries])
            exp = np.exp(scores - scores.max())
            probs = exp / exp.sum()
        for rank, (target, score) in enumerate(nl.entries):
            line = f"{source_lang}\t{nl.query}\t{target}\t{score:.6f}"
            if probs is not None:
                line += f"\t{probs[rank]:.6f}"
            yield line


def write_audit(
    neighbor_lists: list[NeighborList],
    source_lang: str,
    path,
    *,
    softmax: bool = False,
) -> None:
    """Write :func:`audit_lines` output to ``path``."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in audit_lines(neighbor_lists, source_lang, softmax=softmax):
            fh.write(line + "\n")
