"""Retrieval support: reference exemplars, case snapshots, and segment scoring.

The relevance scorer is deterministic lexical overlap (term frequency with
inverse-document-frequency weighting) behind a small interface, so an
embedding-based scorer can be substituted without touching callers.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

from .foamdict import FlowRegime, FoamDict
from .knowledge import KnowledgeBase, TutorialCase

DEFAULT_REFERENCE_COUNT = 3
DEFAULT_SEGMENT_THRESHOLD = 0.15

_WORD = re.compile(r"[a-z0-9]+")


class EmptyInputError(ValueError):
    """Query or segment is empty after normalization."""


class NoCandidatesError(LookupError):
    """No knowledge-base case contains the requested file."""


class IoError(OSError):
    """Case directory could not be read."""


def _normalize(text: str) -> str:
    return " ".join(_WORD.findall(text.lower()))


def _tokens(text: str) -> List[str]:
    return _WORD.findall(text.lower())


class RelevanceScorer(Protocol):
    def score(self, query: str, segment: str) -> float: ...


class LexicalScorer:
    """TF overlap weighted by IDF; identical texts score 1.0, disjoint 0.0."""

    def __init__(self, corpus: Sequence[str] = ()) -> None:
        self._doc_count = len(corpus)
        df: Counter = Counter()
        for doc in corpus:
            df.update(set(_tokens(doc)))
        self._df = df

    def _idf(self, term: str) -> float:
        if not self._doc_count:
            return 1.0
        return math.log(1.0 + self._doc_count / (1.0 + self._df.get(term, 0)))

    def score(self, query: str, segment: str) -> float:
        q_norm = _normalize(query)
        s_norm = _normalize(segment)
        if not q_norm or not s_norm:
            raise EmptyInputError("query and segment must be nonempty after normalization")
        if q_norm == s_norm:
            return 1.0
        q_tf = Counter(_tokens(query))
        s_tf = Counter(_tokens(segment))
        total = sum(self._idf(t) * n for t, n in q_tf.items())
        overlap = sum(self._idf(t) * min(n, s_tf[t]) for t, n in q_tf.items() if t in s_tf)
        return overlap / total if total else 0.0


@dataclass(frozen=True)
class Segment:
    label: str
    text: str


@dataclass(frozen=True)
class SegmentScore:
    segment: Segment
    score: float


def score_relevance(query: str, segment: str, scorer: Optional[RelevanceScorer] = None) -> float:
    return (scorer or LexicalScorer()).score(query, segment)


def spec_query(spec) -> str:
    """Query text synthesized from a case specification."""
    parts = [spec.solver or ""]
    if spec.turbulence_model:
        parts.append(spec.turbulence_model)
    if spec.thermo_model:
        parts.append(spec.thermo_model)
    if spec.flow_regime is not FlowRegime.UNKNOWN:
        parts.append(spec.flow_regime.value)
    parts.extend(spec.boundaries)
    return " ".join(p for p in parts if p)


def filter_segments(
    document: Sequence[Segment],
    spec,
    threshold: float = DEFAULT_SEGMENT_THRESHOLD,
    scorer: Optional[RelevanceScorer] = None,
) -> List[Segment]:
    """Keep segments scoring >= threshold against the spec query, in order."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0,1), got {threshold}")
    if scorer is None:
        scorer = LexicalScorer([seg.text for seg in document])
    query = spec_query(spec)
    kept = []
    for seg in document:
        if not _normalize(seg.text):
            continue
        if scorer.score(query, seg.text) >= threshold:
            kept.append(seg)
    return kept


@dataclass(frozen=True)
class ReferenceItem:
    case_id: str
    path: str
    tree: FoamDict
    match_score: float


@dataclass(frozen=True)
class ReferenceBundle:
    items: Tuple[ReferenceItem, ...]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


def _case_metadata_text(case: TutorialCase) -> str:
    return " ".join(
        filter(
            None,
            [case.id.replace("/", " "), case.solver, case.turbulence_model, case.thermo_model,
             case.flow_regime.value],
        )
    )


def retrieve_references(
    kb: KnowledgeBase,
    spec,
    target_path: str,
    k: int = DEFAULT_REFERENCE_COUNT,
) -> ReferenceBundle:
    """Rank tutorial exemplars of target_path for this spec, best first.

    Ranking: exact solver, exact turbulence model, flow-regime agreement,
    then lexical similarity of case metadata; ties break on case id. A
    compressible exemplar is never offered to an incompressible spec while
    any regime-matching candidate exists.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    candidates = [c for c in kb.cases if target_path in c.files]
    if not candidates:
        raise NoCandidatesError(f"no knowledge-base case contains {target_path!r}")

    scorer = LexicalScorer([_case_metadata_text(c) for c in candidates])
    query = spec_query(spec)

    if spec.flow_regime is FlowRegime.INCOMPRESSIBLE and any(
        c.flow_regime is FlowRegime.INCOMPRESSIBLE for c in candidates
    ):
        candidates = [c for c in candidates if c.flow_regime is not FlowRegime.COMPRESSIBLE]

    def components(case: TutorialCase) -> Tuple[float, float, float, float]:
        solver = 1.0 if case.solver == spec.solver else 0.0
        model = 1.0 if case.turbulence_model and case.turbulence_model == spec.turbulence_model else 0.0
        regime = 1.0 if (
            spec.flow_regime is not FlowRegime.UNKNOWN and case.flow_regime is spec.flow_regime
        ) else 0.0
        lexical = scorer.score(query, _case_metadata_text(case)) if query.strip() else 0.0
        return solver, model, regime, lexical

    # each weight dominates the sum of the lower-ranked ones, so score order
    # equals (solver, model, regime, lexical) precedence order
    scored = []
    for case in candidates:
        solver, model, regime, lexical = components(case)
        match_score = 0.55 * solver + 0.25 * model + 0.12 * regime + 0.08 * lexical
        scored.append((case, match_score))

    scored.sort(key=lambda row: (-row[1], row[0].id))
    items = tuple(
        ReferenceItem(case.id, target_path, case.files[target_path], round(score, 6))
        for case, score in scored[:k]
    )
    return ReferenceBundle(items)


@dataclass(frozen=True)
class CaseContext:
    """Snapshot of the live case: 0/, constant/ (minus polyMesh), system/."""

    snapshot: Dict[str, str] = field(default_factory=dict)

    def paths(self) -> Tuple[str, ...]:
        return tuple(sorted(self.snapshot))

    def to_json(self) -> str:
        return json.dumps(dict(sorted(self.snapshot.items())), indent=1)


def build_context(case_dir) -> CaseContext:
    case_dir = Path(case_dir)
    if not case_dir.is_dir():
        raise IoError(f"case directory {case_dir} is not readable")
    snapshot: Dict[str, str] = {}
    for top in ("0", "constant", "system"):
        base = case_dir / top
        if not base.is_dir():
            continue
        for path in sorted(base.rglob("*")):
            if not path.is_file():
                continue
            rel = path.relative_to(case_dir).as_posix()
            if rel.startswith("constant/polyMesh/"):
                continue
            if path.suffix == ".log" or path.name.startswith("log."):
                continue
            snapshot[rel] = path.read_text(errors="replace")
    return CaseContext(snapshot)
