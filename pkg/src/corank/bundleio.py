"""Bit-exact persistence: representation bundles, manifests, answers, reports.

Bundles are binary (magic ``SIND``, format version 1, little-endian header and
float32 payload); manifests and reports are deterministic JSON documents.  The
exact layouts are documented in ``docs/formats.md`` with versioned examples.
Payloads are stored as 32-bit floats; downstream computation upcasts to 64-bit.
"""

from __future__ import annotations

import json
import re
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .scoring import CandidateScore, TEMPLATE_ORDERS
from .voting import Candidate, VoteResult

MAGIC = b"SIND"
FORMAT_VERSION = 1
_ORDER_TO_CODE = {"QA": 0, "AQ": 1}
_CODE_TO_ORDER = {code: order for order, code in _ORDER_TO_CODE.items()}

CANDIDATE_MANIFEST_SCHEMA = "corank-candidates-v1"
PAIR_MANIFEST_SCHEMA = "corank-pairs-v1"
SCORE_REPORT_SCHEMA = "corank-score-report-v1"


# ---------------------------------------------------------------------------
# errors


class BundleFormatError(ValueError):
    """Malformed bundle file; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class BadMagicError(BundleFormatError):
    pass


class VersionMismatchError(BundleFormatError):
    pass


class TruncatedPayloadError(BundleFormatError):
    pass


class NonFinitePayloadError(BundleFormatError):
    pass


class ManifestError(ValueError):
    """Malformed or inconsistent manifest document."""


class AnswerExtractionError(ValueError):
    """No canonical answer could be extracted from the raw text."""


# ---------------------------------------------------------------------------
# representation bundles


@dataclass(eq=False)
class RepresentationBundle:
    """Token representations for one (candidate, template order) forward pass.

    ``problem_reps`` is N x d and ``solution_reps`` M x d, scaffolding tokens
    excluded from both.  Arrays are kept in the on-disk float32 precision;
    scoring upcasts to float64.
    """

    candidate_id: str
    template_order: str
    representation_model: str
    layer: int
    problem_reps: np.ndarray
    solution_reps: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, RepresentationBundle):
            return NotImplemented
        return (
            self.candidate_id == other.candidate_id
            and self.template_order == other.template_order
            and self.representation_model == other.representation_model
            and self.layer == other.layer
            and np.array_equal(self.problem_reps, other.problem_reps)
            and np.array_equal(self.solution_reps, other.solution_reps)
        )

    def __post_init__(self) -> None:
        if not self.candidate_id:
            raise ValueError("candidate_id must be non-empty")
        if self.template_order not in TEMPLATE_ORDERS:
            raise ValueError(
                f"template_order must be one of {TEMPLATE_ORDERS}, got {self.template_order!r}"
            )
        if self.layer < 0:
            raise ValueError(f"layer must be >= 0, got {self.layer}")
        self.problem_reps = np.ascontiguousarray(self.problem_reps, dtype=np.float32)
        self.solution_reps = np.ascontiguousarray(self.solution_reps, dtype=np.float32)
        for name, arr in (("problem_reps", self.problem_reps), ("solution_reps", self.solution_reps)):
            if arr.ndim != 2 or 0 in arr.shape:
                raise ValueError(f"{name} must be 2-D and non-empty, got shape {arr.shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite values")
        if self.problem_reps.shape[1] != self.solution_reps.shape[1]:
            raise ValueError(
                "problem and solution representations disagree on dimensionality: "
                f"{self.problem_reps.shape[1]} vs {self.solution_reps.shape[1]}"
            )

    @property
    def n(self) -> int:
        return self.problem_reps.shape[0]

    @property
    def m(self) -> int:
        return self.solution_reps.shape[0]

    @property
    def dim(self) -> int:
        return self.problem_reps.shape[1]


@dataclass(frozen=True)
class BundleHeader:
    """Parsed bundle header; ``payload_offset`` is where the float32 rows begin."""

    template_order: str
    layer: int
    n: int
    m: int
    dim: int
    representation_model: str
    candidate_id: str
    payload_offset: int


def _read_exact(data: bytes, offset: int, count: int, what: str) -> bytes:
    if offset + count > len(data):
        raise TruncatedPayloadError(
            f"file truncated while reading {what}: expected {offset + count} bytes, found {len(data)}",
            offset=len(data),
        )
    return data[offset : offset + count]


def _parse_header(data: bytes) -> BundleHeader:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}", offset=0)
    (version,) = struct.unpack_from("<I", _read_exact(data, 4, 4, "format version"), 0)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"unsupported format version {version}, expected {FORMAT_VERSION}", offset=4
        )
    fixed = _read_exact(data, 8, 21, "header fields")
    order_code, layer, n, m, dim, tag_len = struct.unpack("<BIIIII", fixed)
    if order_code not in _CODE_TO_ORDER:
        raise BundleFormatError(f"unknown template-order code {order_code}", offset=8)
    pos = 29
    tag = _read_exact(data, pos, tag_len, "model tag").decode("utf-8")
    pos += tag_len
    (cid_len,) = struct.unpack("<I", _read_exact(data, pos, 4, "candidate-id length"))
    pos += 4
    cid = _read_exact(data, pos, cid_len, "candidate id").decode("utf-8")
    pos += cid_len
    return BundleHeader(
        template_order=_CODE_TO_ORDER[order_code],
        layer=layer,
        n=n,
        m=m,
        dim=dim,
        representation_model=tag,
        candidate_id=cid,
        payload_offset=pos,
    )


def read_bundle_header(path) -> BundleHeader:
    """Parse just the header of a bundle file (cheap: no payload validation)."""
    with open(path, "rb") as fh:
        # header is small; 64 KiB covers any sane tag/id
        return _parse_header(fh.read(65536))


def write_bundle(bundle: RepresentationBundle, path) -> None:
    """Serialize a bundle; see docs/formats.md for the exact byte layout."""
    tag = bundle.representation_model.encode("utf-8")
    cid = bundle.candidate_id.encode("utf-8")
    header = MAGIC + struct.pack(
        "<IBIIIII",
        FORMAT_VERSION,
        _ORDER_TO_CODE[bundle.template_order],
        bundle.layer,
        bundle.n,
        bundle.m,
        bundle.dim,
        len(tag),
    )
    payload = np.vstack([bundle.problem_reps, bundle.solution_reps]).astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + tag + struct.pack("<I", len(cid)) + cid + payload)


def read_bundle(path) -> RepresentationBundle:
    """Read and fully validate a bundle file.

    Raises a distinct error (with byte offset) for bad magic, version
    mismatch, truncated or oversized payload, and non-finite floats.
    """
    data = Path(path).read_bytes()
    header = _parse_header(data)
    expected = (header.n + header.m) * header.dim * 4
    actual = len(data) - header.payload_offset
    if actual != expected:
        raise TruncatedPayloadError(
            f"payload size mismatch: expected {expected} bytes "
            f"({header.n}+{header.m} rows x {header.dim} cols x 4), found {actual}",
            offset=header.payload_offset + min(actual, expected),
        )
    flat = np.frombuffer(data, dtype="<f4", offset=header.payload_offset)
    finite = np.isfinite(flat)
    if not finite.all():
        bad = int(np.flatnonzero(~finite)[0])
        raise NonFinitePayloadError(
            f"non-finite float at payload index {bad}",
            offset=header.payload_offset + bad * 4,
        )
    rows = flat.reshape(header.n + header.m, header.dim)
    return RepresentationBundle(
        candidate_id=header.candidate_id,
        template_order=header.template_order,
        representation_model=header.representation_model,
        layer=header.layer,
        problem_reps=rows[: header.n],
        solution_reps=rows[header.n :],
    )


# ---------------------------------------------------------------------------
# answer canonicalization

_BOXED = "\\boxed{"
_NUMBER_TOKEN = re.compile(r"[+-]?\d{1,3}(?:,\d{3})+(?:\.\d+)?|[+-]?\d+(?:\.\d+)?")
_GROUPED_NUMBER = re.compile(r"[+-]?\d{1,3}(?:,\d{3})+(?:\.\d+)?")


def _hygiene(text: str) -> str:
    text = re.sub(r"\s+", " ", text)
    prev = None
    while prev != text:
        prev = text
        text = text.strip().rstrip(".")
    if _GROUPED_NUMBER.fullmatch(text):
        text = text.replace(",", "")
    return text


def _innermost_boxed(text: str) -> str | None:
    start = text.rfind(_BOXED)
    if start == -1:
        return None
    pos = start + len(_BOXED)
    depth = 1
    for i in range(pos, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                return text[pos:i]
    return text[pos:]  # unbalanced braces: take the rest


def normalize_answer(raw: str) -> str:
    """Canonicalize a raw answer string.

    A ``\\boxed{...}`` marker wins (innermost content, internal whitespace
    removed); otherwise a string that is already a single token passes through
    cleaned up; otherwise the last numeric token is taken.  Cleanup trims
    whitespace, strips trailing periods, collapses internal whitespace, and
    removes thousands separators from pure numbers.  The result is idempotent
    under re-normalization.
    """
    if not raw or not raw.strip():
        raise AnswerExtractionError("empty answer text")
    boxed = _innermost_boxed(raw)
    if boxed is not None:
        out = _hygiene(re.sub(r"\s+", "", boxed))
        if not out:
            raise AnswerExtractionError("boxed marker with empty content")
        return out
    cleaned = _hygiene(raw)
    if cleaned and " " not in cleaned:
        return cleaned
    tokens = _NUMBER_TOKEN.findall(raw)
    if not tokens:
        raise AnswerExtractionError(f"no boxed marker and no numeric token in {raw!r}")
    return _hygiene(tokens[-1])


# ---------------------------------------------------------------------------
# manifests


@dataclass(frozen=True)
class CandidateEntry:
    candidate_id: str
    answer_raw: str
    bundle_qa: Path
    bundle_aq: Path


@dataclass(frozen=True)
class CandidateManifest:
    problem_id: str
    problem_text: str
    candidates: tuple[CandidateEntry, ...]
    ground_truth: str | None = None

    @property
    def k(self) -> int:
        return len(self.candidates)


@dataclass(frozen=True)
class PairSide:
    candidate_id: str
    bundle_qa: Path
    bundle_aq: Path


@dataclass(frozen=True)
class PairEntry:
    problem_id: str
    correct: PairSide
    incorrect: PairSide
    len_correct: int
    len_incorrect: int


@dataclass(frozen=True)
class PairManifest:
    pairs: tuple[PairEntry, ...]


def _load_json_document(path, expected_schema: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ManifestError(f"manifest not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError(f"manifest {path} must be a JSON object")
    schema = doc.get("schema")
    if schema != expected_schema:
        raise ManifestError(f"manifest {path} has schema {schema!r}, expected {expected_schema!r}")
    return doc


def _require(doc: dict, key: str, where: str, kind=str):
    if key not in doc:
        raise ManifestError(f"missing field {where}.{key}")
    value = doc[key]
    if kind is str and (not isinstance(value, str) or not value):
        raise ManifestError(f"field {where}.{key} must be a non-empty string")
    if kind is int and (isinstance(value, bool) or not isinstance(value, int)):
        raise ManifestError(f"field {where}.{key} must be an integer")
    if kind is list and not isinstance(value, list):
        raise ManifestError(f"field {where}.{key} must be an array")
    return value


def _resolve_bundle_path(base: Path, raw: str, where: str) -> Path:
    path = Path(raw)
    if not path.is_absolute():
        path = base / path
    if not path.is_file():
        raise ManifestError(f"{where} references a missing bundle file: {path}")
    return path


def load_candidate_manifest(path) -> CandidateManifest:
    """Load and validate a candidate manifest; bundle paths resolve against its directory."""
    path = Path(path)
    doc = _load_json_document(path, CANDIDATE_MANIFEST_SCHEMA)
    problem_id = _require(doc, "problem_id", "manifest")
    problem_text = _require(doc, "problem_text", "manifest")
    raw_candidates = _require(doc, "candidates", "manifest", list)
    if not raw_candidates:
        raise ManifestError("manifest.candidates must contain at least one candidate")
    base = path.parent
    entries = []
    seen: set[str] = set()
    for i, rc in enumerate(raw_candidates):
        where = f"manifest.candidates[{i}]"
        if not isinstance(rc, dict):
            raise ManifestError(f"{where} must be an object")
        cid = _require(rc, "candidate_id", where)
        if cid in seen:
            raise ManifestError(f"duplicate candidate_id {cid!r} at {where}")
        seen.add(cid)
        entries.append(
            CandidateEntry(
                candidate_id=cid,
                answer_raw=_require(rc, "answer_raw", where),
                bundle_qa=_resolve_bundle_path(base, _require(rc, "bundle_qa", where), where),
                bundle_aq=_resolve_bundle_path(base, _require(rc, "bundle_aq", where), where),
            )
        )
    ground_truth = doc.get("ground_truth")
    if ground_truth is not None and (not isinstance(ground_truth, str) or not ground_truth):
        raise ManifestError("field manifest.ground_truth must be a non-empty string when present")
    return CandidateManifest(
        problem_id=problem_id,
        problem_text=problem_text,
        candidates=tuple(entries),
        ground_truth=ground_truth,
    )


def _load_pair_side(doc: dict, where: str, base: Path) -> PairSide:
    if not isinstance(doc, dict):
        raise ManifestError(f"{where} must be an object")
    return PairSide(
        candidate_id=_require(doc, "candidate_id", where),
        bundle_qa=_resolve_bundle_path(base, _require(doc, "bundle_qa", where), where),
        bundle_aq=_resolve_bundle_path(base, _require(doc, "bundle_aq", where), where),
    )


def load_pair_manifest(path) -> PairManifest:
    """Load a pair manifest.

    Token lengths come from the QA bundles' solution-row counts (the
    representation model's tokenization); when the manifest also declares
    them, the declaration must agree.
    """
    path = Path(path)
    doc = _load_json_document(path, PAIR_MANIFEST_SCHEMA)
    raw_pairs = _require(doc, "pairs", "manifest", list)
    if not raw_pairs:
        raise ManifestError("manifest.pairs must contain at least one pair")
    base = path.parent
    pairs = []
    for i, rp in enumerate(raw_pairs):
        where = f"manifest.pairs[{i}]"
        if not isinstance(rp, dict):
            raise ManifestError(f"{where} must be an object")
        problem_id = _require(rp, "problem_id", where)
        correct = _load_pair_side(_require(rp, "correct", where, dict), f"{where}.correct", base)
        incorrect = _load_pair_side(_require(rp, "incorrect", where, dict), f"{where}.incorrect", base)
        lengths = {}
        for label, side in (("correct", correct), ("incorrect", incorrect)):
            measured = read_bundle_header(side.bundle_qa).m
            declared = rp.get(f"len_{label}")
            if declared is not None:
                if isinstance(declared, bool) or not isinstance(declared, int) or declared < 1:
                    raise ManifestError(f"field {where}.len_{label} must be a positive integer")
                if declared != measured:
                    raise ManifestError(
                        f"{where}.len_{label} declares {declared} tokens but the QA bundle "
                        f"has {measured} solution rows"
                    )
            lengths[label] = measured
        pairs.append(
            PairEntry(
                problem_id=problem_id,
                correct=correct,
                incorrect=incorrect,
                len_correct=lengths["correct"],
                len_incorrect=lengths["incorrect"],
            )
        )
    return PairManifest(pairs=tuple(pairs))


def candidates_from_manifest(manifest: CandidateManifest) -> tuple[list[Candidate], list[dict]]:
    """Canonicalize manifest answers into votable candidates.

    Candidates whose raw answer yields nothing extractable are excluded with a
    warning and reported in the second return value, never dropped silently.
    """
    votable: list[Candidate] = []
    excluded: list[dict] = []
    for entry in manifest.candidates:
        try:
            answer = normalize_answer(entry.answer_raw)
        except AnswerExtractionError as exc:
            warnings.warn(
                f"candidate {entry.candidate_id!r} excluded from voting: {exc}", stacklevel=2
            )
            excluded.append({"candidate_id": entry.candidate_id, "reason": str(exc)})
            continue
        votable.append(Candidate(candidate_id=entry.candidate_id, answer=answer))
    return votable, excluded


# ---------------------------------------------------------------------------
# score reports


@dataclass(frozen=True)
class ScoreConfig:
    """Configuration echo; complete enough to reproduce the run."""

    delta: float
    combine: str
    normalization_mode: str
    layer: int
    representation_model: str
    k: int | None = None


@dataclass(frozen=True)
class ScoreReport:
    config: ScoreConfig
    problem_id: str
    candidates: tuple[Candidate, ...]
    vote: VoteResult | None = None
    excluded: tuple[dict, ...] = ()
    timing_seconds: float | None = None


def dump_json_document(doc: dict, path) -> None:
    """Write a deterministic JSON document (sorted keys, two-space indent)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _score_to_dict(candidate: Candidate) -> dict:
    s = candidate.score
    entry = {"candidate_id": candidate.candidate_id, "answer": candidate.answer}
    if s is not None:
        entry.update(
            rank_qa=s.rank_qa,
            rank_aq=s.rank_aq,
            raw_rank_qa=s.raw_rank_qa,
            raw_rank_aq=s.raw_rank_aq,
            score=s.score,
        )
    return entry


def report_to_dict(report: ScoreReport) -> dict:
    cfg = report.config
    doc = {
        "schema": SCORE_REPORT_SCHEMA,
        "config": {
            "delta": cfg.delta,
            "combine": cfg.combine,
            "normalization_mode": cfg.normalization_mode,
            "layer": cfg.layer,
            "representation_model": cfg.representation_model,
            "k": cfg.k,
        },
        "problem_id": report.problem_id,
        "candidates": [_score_to_dict(c) for c in report.candidates],
        "excluded": list(report.excluded),
        "timing_seconds": report.timing_seconds,
    }
    if report.vote is not None:
        doc["vote"] = {
            "winner": report.vote.winner,
            "tally": report.vote.tally,
            "positions": report.vote.positions,
            "weights": report.vote.weights,
        }
    return doc


def write_scores(report: ScoreReport, path) -> None:
    """Write a score report; rejects reports with an incomplete configuration echo."""
    cfg = report.config
    for name in ("delta", "combine", "normalization_mode", "layer", "representation_model"):
        if getattr(cfg, name) is None:
            raise ValueError(f"score report rejected: configuration echo lacks {name!r}")
    if not report.candidates:
        raise ValueError("score report rejected: no scored candidates")
    dump_json_document(report_to_dict(report), path)


def read_scores(path) -> ScoreReport:
    """Read a score report back into structured form (inverse of write_scores)."""
    doc = _load_json_document(path, SCORE_REPORT_SCHEMA)
    cfg = doc["config"]
    config = ScoreConfig(
        delta=cfg["delta"],
        combine=cfg["combine"],
        normalization_mode=cfg["normalization_mode"],
        layer=cfg["layer"],
        representation_model=cfg["representation_model"],
        k=cfg.get("k"),
    )
    candidates = []
    for entry in doc["candidates"]:
        score = None
        if "score" in entry:
            score = CandidateScore(
                candidate_id=entry["candidate_id"],
                rank_qa=entry["rank_qa"],
                rank_aq=entry["rank_aq"],
                score=entry["score"],
                combine_mode=config.combine,
                delta=config.delta,
                normalization_mode=config.normalization_mode,
                raw_rank_qa=entry["raw_rank_qa"],
                raw_rank_aq=entry["raw_rank_aq"],
            )
        candidates.append(
            Candidate(candidate_id=entry["candidate_id"], answer=entry["answer"], score=score)
        )
    vote = None
    if "vote" in doc:
        v = doc["vote"]
        vote = VoteResult(
            winner=v["winner"],
            tally=dict(v["tally"]),
            positions=dict(v["positions"]),
            weights=dict(v["weights"]),
        )
    return ScoreReport(
        config=config,
        problem_id=doc["problem_id"],
        candidates=tuple(candidates),
        vote=vote,
        excluded=tuple(doc.get("excluded", [])),
        timing_seconds=doc.get("timing_seconds"),
    )
