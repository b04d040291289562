"""Mixture construction: new tokens as convex combinations of model rows.

A new subword token w with a mapped source-space vector is described by its
top-m CSLS anchor candidates from the anchor pool (English tokens that also
exist in the model vocabulary).  A max-shifted softmax over the candidate
scores gives mixture weights, and the token's model-space embedding is the
weighted sum of the anchors' raw model rows:

    e(w) = sum_u p(u | w) * model_row(u)

Weights therefore sum to one and the mixed vector lies in the convex hull of
its anchor rows.  All ranking happens on normalized copies; the raw model
rows are only combined, never rescaled.
"""

from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .alignment import AlignConfig, LinearMap, _csls_matrix, apply_map, _unit
from .embeddings import EmbeddingMatrix, Vocabulary
from .errors import (
    DimMismatch,
    EmptyAnchorPool,
    MalformedLine,
    MissingAnchor,
    TokenNotFound,
    ValidationError,
)

WEIGHT_DECIMALS = 6


@dataclass(frozen=True, eq=False)
class MixtureAssignment:
    """Anchors, weights and the resulting vector for one new token.

    ``anchors`` is sorted by descending weight, ties by ascending anchor id
    in the English vocabulary; weights sum to 1 within 1e-9.
    """

    source_token: str
    anchors: tuple[tuple[str, float], ...]
    mixed_vector: np.ndarray = field(repr=False)


def _pool_ids(english: EmbeddingMatrix, anchor_tokens: Sequence[str]) -> list[int]:
    ids = []
    for tok in anchor_tokens:
        idx = english.vocab.index.get(tok)
        if idx is None:
            raise TokenNotFound(tok)
        ids.append(idx)
    return ids


def _rank_candidates(
    scores_row: np.ndarray, pool_tokens: Sequence[str], english_ids: np.ndarray, top_m: int
) -> list[tuple[str, float]]:
    order = np.lexsort((english_ids, -scores_row))
    return [(pool_tokens[int(j)], float(scores_row[int(j)])) for j in order[:top_m]]


def candidate_set(
    token: str,
    mapped_src: EmbeddingMatrix,
    english: EmbeddingMatrix,
    anchor_tokens: Sequence[str],
    cfg: AlignConfig,
) -> list[tuple[str, float]]:
    """Top ``cfg.top_m`` anchor candidates for one mapped source token.

    Scores are CSLS with the source r-term over all mapped source rows and
    the target r-term over the anchor-pool rows only.  The neighborhood size
    is clamped to the pool and source sizes, so small pools stay usable.
    Returns ``min(top_m, len(pool))`` (token, score) pairs, best first, ties
    by ascending anchor id in the English vocabulary.
    """
    pool = list(anchor_tokens)
    if not pool:
        raise EmptyAnchorPool("anchor pool is empty")
    if token not in mapped_src.vocab:
        raise TokenNotFound(token)
    if mapped_src.dim != english.dim:
        raise DimMismatch(f"mapped dim {mapped_src.dim} != English dim {english.dim}")
    ids = _pool_ids(english, pool)
    src_u = _unit(mapped_src)
    eng_u = _unit(english)
    pool_rows = eng_u.rows[ids]
    k = min(cfg.csls_k, len(pool), len(src_u))
    q = src_u.rows[src_u.vocab.id(token)][None, :]
    scores = _csls_matrix(q, pool_rows, src_u.rows, pool_rows, k)[0]
    return _rank_candidates(scores, pool, np.array(ids), cfg.top_m)


def mixture_weights(candidates: Sequence[tuple[str, float]]) -> list[tuple[str, float]]:
    """Softmax the candidate scores into weights (max-shifted for stability).

    Preserves candidate order.  Equal scores get equal weights; a lone
    candidate gets weight 1.0.
    """
    if not candidates:
        raise ValidationError("cannot weight an empty candidate list")
    scores = np.array([s for _, s in candidates], dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValidationError("candidate scores contain non-finite values")
    exp = np.exp(scores - scores.max())
    weights = exp / exp.sum()
    return [(tok, float(w)) for (tok, _), w in zip(candidates, weights)]


def mixture_embedding(
    weights: Sequence[tuple[str, float]], model_emb: EmbeddingMatrix
) -> np.ndarray:
    """Weighted sum of raw model rows; raises ``MissingAnchor`` on absence."""
    if not weights:
        raise ValidationError("cannot mix an empty weight list")
    out = np.zeros(model_emb.dim)
    for anchor, weight in weights:
        idx = model_emb.vocab.index.get(anchor)
        if idx is None:
            raise MissingAnchor(anchor)
        out += weight * model_emb.rows[idx]
    return out


def build_all_assignments(
    new_tokens: Sequence[str],
    src: EmbeddingMatrix,
    to_english: LinearMap,
    english: EmbeddingMatrix,
    model_emb: EmbeddingMatrix,
    model_vocab: Vocabulary,
    cfg: AlignConfig,
) -> list[MixtureAssignment]:
    """Mixture assignments for every new token, in input order.

    The anchor pool is computed once as the English tokens also present in
    ``model_vocab`` (English vocabulary order).  Each new token must have a
    source-space row; rows are mapped through ``to_english`` before scoring.
    """
    pool = [t for t in english.vocab.tokens if t in model_vocab and t in model_emb.vocab]
    if not pool:
        raise EmptyAnchorPool("no English token is present in the model vocabulary")
    mapped = apply_map(to_english, _unit(src))
    eng_u = _unit(english)
    if mapped.dim != eng_u.dim:
        raise DimMismatch(f"mapped dim {mapped.dim} != English dim {eng_u.dim}")
    ids = _pool_ids(eng_u, pool)
    pool_rows = eng_u.rows[ids]
    id_arr = np.array(ids)
    k = min(cfg.csls_k, len(pool), len(mapped))

    q_ids = []
    for tok in new_tokens:
        if tok not in mapped.vocab:
            raise TokenNotFound(tok)
        q_ids.append(mapped.vocab.id(tok))
    if not q_ids:
        return []
    scores = _csls_matrix(mapped.rows[q_ids], pool_rows, mapped.rows, pool_rows, k)

    out = []
    for row, tok in enumerate(new_tokens):
        candidates = _rank_candidates(scores[row], pool, id_arr, cfg.top_m)
        weighted = mixture_weights(candidates)
        # softmax preserves the score order, so the weight sort is already
        # descending with ties on ascending English id
        mixed = mixture_embedding(weighted, model_emb)
        out.append(
            MixtureAssignment(
                source_token=tok, anchors=tuple(weighted), mixed_vector=mixed
            )
        )
    return out


def format_anchors(anchors: Sequence[tuple[str, float]]) -> str:
    return ",".join(f"{tok}:{weight:.{WEIGHT_DECIMALS}f}" for tok, weight in anchors)


_WEIGHT_TAIL = re.compile(r":\d+\.\d{6}$")


def save_assignments(assignments: Sequence[MixtureAssignment], path) -> None:
    """Write one ``token<TAB>anchor:weight,...`` line per assignment."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for a in assignments:
            fh.write(f"{a.source_token}\t{format_anchors(a.anchors)}\n")


def load_assignments(path) -> list[tuple[str, list[tuple[str, float]]]]:
    """Parse an assignment file back into (token, weights) records.

    Weights were rounded to 6 decimals on save, so they are renormalized to
    sum exactly to one.  Anchor tokens containing a comma are recovered by
    re-joining split fragments until a ``:weight`` tail appears.
    """
    out: list[tuple[str, list[tuple[str, float]]]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise MalformedLine(f"expected 'token<TAB>anchors', got {line!r}", line=lineno)
            token, anchor_field = parts
            anchors: list[tuple[str, float]] = []
            buf: str | None = None
            for fragment in anchor_field.split(","):
                buf = fragment if buf is None else buf + "," + fragment
                if _WEIGHT_TAIL.search(buf):
                    tok, weight_text = buf.rsplit(":", 1)
                    if not tok:
                        raise MalformedLine(f"empty anchor token in {buf!r}", line=lineno)
                    anchors.append((tok, float(weight_text)))
                    buf = None
            if buf is not None or not anchors:
                raise MalformedLine(f"unparseable anchor list {anchor_field!r}", line=lineno)
            total = sum(w for _, w in anchors)
            if total <= 0:
                raise MalformedLine("anchor weights sum to zero", line=lineno)
            anchors = [(t, w / total) for t, w in anchors]
            out.append((token, anchors))
    return out
