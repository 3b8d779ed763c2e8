"""Evidence tagging: sequence units, span decoding, and gold supervision.

The input sequence for a question is the question's words, the table
flattened row by row (each cell split into words), then the paragraphs
in order.  Taggers assign each unit a probability of being evidence;
decoding turns positive units into candidates: a cell is a candidate if
any of its units is positive, and maximal runs of consecutive positive
paragraph words form one span each.

Two deterministic taggers are provided: an oracle that realizes the
gold tag labels exactly, and a lexical-overlap baseline that needs no
gold annotation.  Both are stateless and safe to share across threads.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Union

from .corpus import (
    AnswerSource,
    AnswerType,
    Dataset,
    HybridContext,
    QuestionRecord,
    iter_questions,
)
from .derivation import (
    ORDER_SENSITIVE,
    BinaryOp,
    ItemSet,
    Operator,
    classify_operator,
    operand_sequence,
    parse_derivation,
)
from .errors import DerivationParseError, UnlocatableEvidenceError
from .numerics import ParsedNumber, Scale, extract_numbers, parse_number

# ---------------------------------------------------------------------------
# Sequence units and origins
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuestionWord:
    index: int


@dataclass(frozen=True)
class CellWord:
    row: int
    col: int
    word: int


@dataclass(frozen=True)
class ParagraphWord:
    paragraph_id: str
    word: int


UnitOrigin = Union[QuestionWord, CellWord, ParagraphWord]


@dataclass(frozen=True)
class TagUnit:
    text: str
    origin: UnitOrigin
    probability: float


@dataclass(frozen=True)
class TaggedSequence:
    units: tuple[TagUnit, ...]

    def __post_init__(self) -> None:
        for unit in self.units:
            if not 0.0 <= unit.probability <= 1.0:
                raise ValueError(
                    f"probability {unit.probability} out of [0, 1] for {unit.origin}"
                )


@dataclass(frozen=True)
class CellOrigin:
    row: int
    col: int


@dataclass(frozen=True)
class SpanOrigin:
    """A word range [start, stop) within one paragraph."""

    paragraph_id: str
    start: int
    stop: int


CandidateOrigin = Union[CellOrigin, SpanOrigin]


@dataclass(frozen=True)
class EvidenceCandidate:
    text: str
    probability: float
    origin: CandidateOrigin
    numeric: ParsedNumber | None
    position: int  # index of the first constituent unit in the input sequence


@dataclass(frozen=True)
class SupervisionLabels:
    g_tag: frozenset
    g_op: str
    g_scale: Scale
    g_order: int | None


def _words(text: str) -> list[str]:
    return text.split()


def _word_spans(text: str) -> list[tuple[int, int]]:
    return [match.span() for match in re.finditer(r"\S+", text)]


def context_units(question_text: str, context: HybridContext) -> list[tuple[str, UnitOrigin]]:
    """Skeleton of the input sequence: (unit text, origin) in order."""
    units: list[tuple[str, UnitOrigin]] = []
    for index, word in enumerate(_words(question_text)):
        units.append((word, QuestionWord(index)))
    for cell in context.table.iter_cells():
        for word_index, word in enumerate(_words(cell.text)):
            units.append((word, CellWord(cell.row, cell.col, word_index)))
    for paragraph in context.paragraphs:
        for word_index, word in enumerate(_words(paragraph.text)):
            units.append((word, ParagraphWord(paragraph.paragraph_id, word_index)))
    return units


def decode_evidence(
    tags: TaggedSequence, threshold: float = 0.5
) -> list[EvidenceCandidate]:
    """Turn tagged units into evidence candidates, in input-sequence order.

    A cell is a candidate when any of its units exceeds the threshold;
    consecutive positive paragraph words merge into one span.  Candidate
    probability is the maximum over its positive units, and the numeric
    field is filled when the candidate text parses as a single number.
    """
    candidates: list[EvidenceCandidate] = []

    cell_key: tuple[int, int] | None = None
    cell_words: list[str] = []
    cell_best = 0.0
    cell_position = 0

    span_key: tuple[str, int] | None = None  # (paragraph, expected next word)
    span_start = 0
    span_words: list[str] = []
    span_best = 0.0
    span_position = 0

    def flush_cell() -> None:
        nonlocal cell_key
        if cell_key is not None and cell_best > threshold:
            text = " ".join(cell_words)
            candidates.append(
                EvidenceCandidate(
                    text=text,
                    probability=cell_best,
                    origin=CellOrigin(*cell_key),
                    numeric=parse_number(text),
                    position=cell_position,
                )
            )
        cell_key = None

    def flush_span() -> None:
        nonlocal span_key
        if span_key is not None:
            text = " ".join(span_words)
            candidates.append(
                EvidenceCandidate(
                    text=text,
                    probability=span_best,
                    origin=SpanOrigin(span_key[0], span_start, span_key[1]),
                    numeric=parse_number(text),
                    position=span_position,
                )
            )
        span_key = None

    for index, unit in enumerate(tags.units):
        origin = unit.origin
        if isinstance(origin, QuestionWord):
            continue
        if isinstance(origin, CellWord):
            key = (origin.row, origin.col)
            if key != cell_key:
                flush_cell()
                cell_key = key
                cell_words = []
                cell_best = 0.0
                cell_position = index
            cell_words.append(unit.text)
            if unit.probability > threshold:
                cell_best = max(cell_best, unit.probability)
            continue
        # paragraph word
        flush_cell()
        positive = unit.probability > threshold
        continues = (
            span_key is not None
            and span_key[0] == origin.paragraph_id
            and span_key[1] == origin.word
        )
        if positive and continues:
            span_key = (origin.paragraph_id, origin.word + 1)
            span_words.append(unit.text)
            span_best = max(span_best, unit.probability)
        elif positive:
            flush_span()
            span_key = (origin.paragraph_id, origin.word + 1)
            span_start = origin.word
            span_words = [unit.text]
            span_best = unit.probability
            span_position = index
        else:
            flush_span()
    flush_cell()
    flush_span()
    return candidates


# ---------------------------------------------------------------------------
# Gold supervision
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _EvidenceItem:
    """One gold evidence string: surface text plus its numeric value if any."""

    surface: str
    value: Fraction | None


def _answer_spans(answer) -> list[str]:
    if isinstance(answer, list):
        return [str(item) for item in answer]
    if isinstance(answer, Fraction):
        return []
    return [str(answer)]


def _text_item(surface: str) -> _EvidenceItem:
    # strings that are themselves numbers match by value, so "5134"
    # still locates a cell printed as "5,134"
    parsed = parse_number(surface)
    return _EvidenceItem(surface, parsed.value if parsed else None)


def _evidence_items(question: QuestionRecord) -> list[_EvidenceItem]:
    """Evidence strings for a question: answer spans, item-set items, or
    derivation operands (deduplicated; the structural divisor of an
    average is not evidence)."""
    if question.answer_type in (AnswerType.SPAN, AnswerType.SPANS):
        return [
            _text_item(span)
            for span in _answer_spans(question.answer)
            if span.strip()
        ]

    ast = parse_derivation(question.derivation, question.answer_type)
    if isinstance(ast, ItemSet):
        return [_text_item(item) for item in ast.items]

    operator = classify_operator(ast, question.answer_type, question.answer_source)
    if operator == Operator.AVERAGE and isinstance(ast, BinaryOp):
        operands = operand_sequence(ast.left)
    else:
        operands = operand_sequence(ast)

    items: list[_EvidenceItem] = []
    seen: set[Fraction] = set()
    for operand in operands:
        if operand.value in seen:
            continue
        seen.add(operand.value)
        items.append(_EvidenceItem(operand.source_text.strip(), operand.value))
    return items


def _find_in_table(
    context: HybridContext, item: _EvidenceItem, loose: bool
) -> CellOrigin | None:
    needle = item.surface.casefold()
    for cell in context.table.iter_cells():
        if item.value is not None:
            if cell.numeric is None:
                continue
            if cell.numeric.value == item.value:
                return CellOrigin(cell.row, cell.col)
            if loose and abs(cell.numeric.value) == abs(item.value):
                return CellOrigin(cell.row, cell.col)
        else:
            hay = cell.text.strip().casefold()
            if hay == needle or (loose and needle and needle in hay):
                return CellOrigin(cell.row, cell.col)
    return None


def _char_to_word_range(
    spans: list[tuple[int, int]], start: int, end: int
) -> tuple[int, int] | None:
    covered = [
        index for index, (ws, we) in enumerate(spans) if ws < end and we > start
    ]
    if not covered:
        return None
    return covered[0], covered[-1] + 1


def _find_in_paragraphs(
    context: HybridContext, item: _EvidenceItem, loose: bool
) -> SpanOrigin | None:
    for paragraph in context.paragraphs:
        spans = _word_spans(paragraph.text)
        if item.value is not None:
            for parsed, (start, end) in extract_numbers(paragraph.text):
                if parsed.value == item.value or (
                    loose and abs(parsed.value) == abs(item.value)
                ):
                    word_range = _char_to_word_range(spans, start, end)
                    if word_range:
                        return SpanOrigin(paragraph.paragraph_id, *word_range)
        else:
            haystack = paragraph.text.casefold()
            index = haystack.find(item.surface.casefold())
            if index >= 0:
                word_range = _char_to_word_range(
                    spans, index, index + len(item.surface)
                )
                if word_range:
                    return SpanOrigin(paragraph.paragraph_id, *word_range)
    return None


def _locate(
    context: HybridContext, item: _EvidenceItem, table_first: bool
) -> CandidateOrigin | None:
    """First occurrence in input-sequence order, preferring the table for
    table-sourced answers.  Within each region an exact pass runs before
    a loose one (absolute-value match for numbers, cell-substring match
    for text), so the preferred region is exhausted before falling back."""
    finders = (
        (_find_in_table, _find_in_paragraphs)
        if table_first
        else (_find_in_paragraphs, _find_in_table)
    )
    for finder in finders:
        for loose in (False, True):
            origin = finder(context, item, loose)
            if origin is not None:
                return origin
    return None


def _merge_spans(origins: list[SpanOrigin]) -> list[SpanOrigin]:
    """Merge overlapping or adjacent spans per paragraph, mirroring what
    decoding contiguous positive words would produce."""
    by_paragraph: dict[str, list[SpanOrigin]] = {}
    for origin in origins:
        by_paragraph.setdefault(origin.paragraph_id, []).append(origin)
    merged: list[SpanOrigin] = []
    for paragraph_id, spans in by_paragraph.items():
        spans.sort(key=lambda s: (s.start, s.stop))
        current = spans[0]
        for span in spans[1:]:
            if span.start <= current.stop:
                current = SpanOrigin(
                    paragraph_id, current.start, max(current.stop, span.stop)
                )
            else:
                merged.append(current)
                current = span
        merged.append(current)
    return merged


def _origin_position(
    units: list[tuple[str, UnitOrigin]], origin: CandidateOrigin
) -> int:
    for index, (_, unit_origin) in enumerate(units):
        if isinstance(origin, CellOrigin) and isinstance(unit_origin, CellWord):
            if (unit_origin.row, unit_origin.col) == (origin.row, origin.col):
                return index
        elif isinstance(origin, SpanOrigin) and isinstance(unit_origin, ParagraphWord):
            if (
                unit_origin.paragraph_id == origin.paragraph_id
                and unit_origin.word == origin.start
            ):
                return index
    raise ValueError(f"origin {origin} not present in the input sequence")


def build_supervision(
    question: QuestionRecord, context: HybridContext
) -> SupervisionLabels:
    """Derive the gold labels for one question from its annotations.

    Each evidence string is searched in the table first when the table
    is among the answer sources, otherwise in the paragraphs; only the
    first occurrence is kept when an evidence appears multiple times.
    The order flag is present only for the order-sensitive operators: 0
    when the two operands appear in derivation order within the input
    sequence, 1 when reversed.
    """
    items = _evidence_items(question)
    table_first = question.answer_source in (AnswerSource.TABLE, AnswerSource.TABLE_TEXT)

    located: dict[_EvidenceItem, CandidateOrigin] = {}
    missing: list[str] = []
    for item in items:
        origin = _locate(context, item, table_first)
        if origin is None:
            missing.append(item.surface)
        else:
            located[item] = origin
    if missing:
        raise UnlocatableEvidenceError(question.question_id, missing)

    operator = classify_operator(
        _try_parse(question), question.answer_type, question.answer_source
    )

    def origin_for_value(value: Fraction) -> CandidateOrigin:
        for item, origin in located.items():
            if item.value == value:
                return origin
        raise ValueError(f"no located evidence with value {value}")

    g_order: int | None = None
    if operator in ORDER_SENSITIVE:
        units = context_units(question.text, context)
        operands = operand_sequence(parse_derivation(question.derivation, question.answer_type))
        first, second = operands[0], operands[1]
        position_first = _origin_position(units, origin_for_value(first.value))
        position_second = _origin_position(units, origin_for_value(second.value))
        g_order = 0 if position_first <= position_second else 1

    cells = [o for o in located.values() if isinstance(o, CellOrigin)]
    spans = [o for o in located.values() if isinstance(o, SpanOrigin)]
    g_tag = frozenset(cells) | frozenset(_merge_spans(spans))
    return SupervisionLabels(
        g_tag=g_tag,
        g_op=operator,
        g_scale=question.gold_scale,
        g_order=g_order,
    )


def _try_parse(question: QuestionRecord):
    if question.answer_type not in (AnswerType.COUNTING, AnswerType.ARITHMETIC):
        return None
    try:
        return parse_derivation(question.derivation, question.answer_type)
    except DerivationParseError:
        return None


# ---------------------------------------------------------------------------
# Taggers
# ---------------------------------------------------------------------------


class OracleTagger:
    """Perfect realization of the gold tag labels: probability 1.0 on
    gold-positive origins and 0.0 elsewhere."""

    def tag(self, question: QuestionRecord, context: HybridContext) -> TaggedSequence:
        labels = build_supervision(question, context)
        cell_set = {
            (o.row, o.col) for o in labels.g_tag if isinstance(o, CellOrigin)
        }
        span_list = [o for o in labels.g_tag if isinstance(o, SpanOrigin)]

        units = []
        for text, origin in context_units(question.text, context):
            probability = 0.0
            if isinstance(origin, CellWord) and (origin.row, origin.col) in cell_set:
                probability = 1.0
            elif isinstance(origin, ParagraphWord):
                for span in span_list:
                    if (
                        span.paragraph_id == origin.paragraph_id
                        and span.start <= origin.word < span.stop
                    ):
                        probability = 1.0
                        break
            units.append(TagUnit(text, origin, probability))
        return TaggedSequence(tuple(units))


_STOPWORDS = frozenset(
    """a an the of in on at to for from by with as is are was were be been being
    do does did done what which when where who whom whose how why much many and
    or not than that this these those it its their there between during per each
    have has had having will would can could should may might must s""".split()
)

_TOKEN_CLEAN_RE = re.compile(r"^\W+|\W+$")


def _content_words(text: str) -> frozenset[str]:
    words = set()
    for token in text.lower().split():
        token = _TOKEN_CLEAN_RE.sub("", token).replace(",", "")
        if token and token not in _STOPWORDS:
            words.add(token)
    return frozenset(words)


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a or not b:
        return 0.0
    union = len(a | b)
    return len(a & b) / union if union else 0.0


class LexicalTagger:
    """Deterministic lexical-overlap tagger.

    Each unit scores the content-word Jaccard overlap between the
    question and the unit's enclosing cell or sentence; numeric cells
    are boosted by the overlap of their row/column headers with the
    question.  Scores are smoothed onto [floor, 1] so a zero-overlap
    context still yields (uniformly tiny) probabilities.
    """

    def __init__(self, floor: float = 0.01):
        self.floor = floor

    def _smooth(self, score: float) -> float:
        return self.floor + (1.0 - self.floor) * score

    def tag(self, question: QuestionRecord, context: HybridContext) -> TaggedSequence:
        question_words = _content_words(question.text)
        table = context.table

        cell_scores: dict[tuple[int, int], float] = {}
        for cell in table.iter_cells():
            score = _jaccard(question_words, _content_words(cell.text))
            if cell.numeric is not None:
                header_words: set[str] = set()
                if cell.row > 0:
                    header_words |= _content_words(table.cell(0, cell.col).text)
                if cell.col > 0:
                    header_words |= _content_words(table.cell(cell.row, 0).text)
                score = max(score, _jaccard(question_words, frozenset(header_words)))
            cell_scores[(cell.row, cell.col)] = score

        sentence_scores: dict[str, list[tuple[int, float]]] = {}
        for paragraph in context.paragraphs:
            boundaries: list[tuple[int, float]] = []
            start = 0
            for match in re.finditer(r"[.!?;]\s+|\Z", paragraph.text):
                sentence = paragraph.text[start : match.end()]
                if sentence.strip():
                    boundaries.append(
                        (match.end(), _jaccard(question_words, _content_words(sentence)))
                    )
                start = match.end()
            sentence_scores[paragraph.paragraph_id] = boundaries

        paragraph_spans = {
            p.paragraph_id: _word_spans(p.text) for p in context.paragraphs
        }

        units = []
        for text, origin in context_units(question.text, context):
            if isinstance(origin, QuestionWord):
                probability = 0.0
            elif isinstance(origin, CellWord):
                probability = self._smooth(cell_scores[(origin.row, origin.col)])
            else:
                spans = paragraph_spans[origin.paragraph_id]
                word_start = spans[origin.word][0]
                score = 0.0
                for boundary, sentence_score in sentence_scores[origin.paragraph_id]:
                    if word_start < boundary:
                        score = sentence_score
                        break
                probability = self._smooth(score)
            units.append(TagUnit(text, origin, probability))
        return TaggedSequence(tuple(units))


# ---------------------------------------------------------------------------
# Supervision export
# ---------------------------------------------------------------------------


def origin_to_json(origin: CandidateOrigin) -> dict:
    if isinstance(origin, CellOrigin):
        return {"kind": "cell", "row": origin.row, "col": origin.col}
    return {
        "kind": "span",
        "paragraph_id": origin.paragraph_id,
        "start": origin.start,
        "stop": origin.stop,
    }


@dataclass
class SupervisionExport:
    n_written: int
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def unlocatable_rate(self) -> float:
        total = self.n_written + len(self.failures)
        return len(self.failures) / total if total else 0.0


def export_supervision(dataset: Dataset, path: str | Path) -> SupervisionExport:
    """Write gold labels to a line-delimited file for external training.

    Questions whose evidence cannot be located (or whose derivation does
    not parse) are skipped and reported, not fatal.
    """
    export = SupervisionExport(n_written=0)
    with Path(path).open("w", encoding="utf-8") as handle:
        for context, question in iter_questions(dataset):
            try:
                labels = build_supervision(question, context)
            except (UnlocatableEvidenceError, DerivationParseError) as exc:
                export.failures.append((question.question_id, str(exc)))
                continue
            record = {
                "question_id": question.question_id,
                "g_op": labels.g_op,
                "g_scale": labels.g_scale.word,
                "g_order": labels.g_order,
                "g_tag": sorted(
                    (origin_to_json(origin) for origin in labels.g_tag),
                    key=lambda o: (o["kind"], str(o)),
                ),
            }
            handle.write(json.dumps(record) + "\n")
            export.n_written += 1
    return export
