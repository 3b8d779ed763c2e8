"""Exact Match and numeracy-focused F1, with per-category reports.

The token-bag metric follows the published DROP evaluator: lowercase,
split on spaces and hyphens, strip punctuation from non-numeric tokens,
normalize numbers through their float rendering, drop articles, then
score bags with an optimal one-to-one span alignment (gold spans that
contain numbers only match predictions sharing one).  Two deliberate
departures make the metric finance-safe: a leading minus on a number is
preserved (so "-1,657" and "1,657" differ), and a gold numeric answer
scores 1 only when the predicted number times the predicted scale
equals the gold number times the gold scale under the rounding policy.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import AnswerSource, AnswerType, Dataset, QuestionRecord, iter_questions
from .errors import ScoringError
from .numerics import Scale, parse_number, render_decimal, round_fraction

# ---------------------------------------------------------------------------
# Rounding policy and numeric comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundingPolicy:
    """Both sides of a numeric comparison are rounded to ``places``
    decimal places after scale application (ties to even)."""

    places: int = 4


DEFAULT_POLICY = RoundingPolicy()


def numbers_match(
    pred_value: Fraction,
    pred_scale: Scale,
    gold_value: Fraction,
    gold_scale: Scale,
    policy: RoundingPolicy = DEFAULT_POLICY,
) -> bool:
    pred = round_fraction(pred_value * pred_scale.factor, policy.places)
    gold = round_fraction(gold_value * gold_scale.factor, policy.places)
    return pred == gold


# ---------------------------------------------------------------------------
# Token normalization (DROP-compatible, sign-preserving)
# ---------------------------------------------------------------------------

_PUNCT = set(string.punctuation)
_ARTICLES = {"a", "an", "the"}


def _is_float(text: str) -> bool:
    try:
        float(text)
    except (ValueError, OverflowError):
        return False
    return True


def _numeric_form(token: str) -> str | None:
    """Float rendering of a numeric token, tolerating currency symbols,
    thousands separators, and a trailing percent sign."""
    t = token.lstrip("$£€¥").replace(",", "")
    if t.endswith("%"):
        t = t[:-1]
    if t and _is_float(t):
        return str(float(t))
    return None


def _split_token(piece: str) -> list[str]:
    # a leading minus stays attached to its number; all other hyphens
    # split tokens exactly like the reference tokenizer
    if piece.startswith(("-", "−")) and _numeric_form(piece[1:]) is not None:
        return [piece]
    return piece.split("-")


def normalize_answer(text: str) -> list[str]:
    """Normalized token sequence of one answer span."""
    tokens: list[str] = []
    for piece in str(text).lower().split():
        for token in _split_token(piece):
            if not token:
                continue
            if token.startswith("−"):
                token = "-" + token[1:]
            numeric = _numeric_form(token.lstrip("-")) if token.startswith("-") else _numeric_form(token)
            if numeric is not None:
                token = "-" + numeric if token.startswith("-") and float(numeric) != 0 else numeric
            else:
                token = "".join(ch for ch in token if ch not in _PUNCT)
            if token and token not in _ARTICLES:
                tokens.append(token)
    return tokens


def _span_string(tokens: list[str]) -> str:
    return " ".join(tokens)


def _bag(tokens: list[str]) -> frozenset[str]:
    return frozenset(tokens)


def _bag_f1(pred_bag: frozenset[str], gold_bag: frozenset[str]) -> float:
    intersection = len(pred_bag & gold_bag)
    if not pred_bag and not gold_bag:
        return 1.0
    precision = intersection / len(pred_bag) if pred_bag else 1.0
    recall = intersection / len(gold_bag) if gold_bag else 1.0
    if precision == 0.0 and recall == 0.0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _numbers_in_bag(bag: frozenset[str]) -> frozenset[str]:
    return frozenset(token for token in bag if _is_float(token))


def _gated_f1(pred_bag: frozenset[str], gold_bag: frozenset[str]) -> float:
    gold_numbers = _numbers_in_bag(gold_bag)
    if gold_numbers and not (gold_numbers & _numbers_in_bag(pred_bag)):
        return 0.0
    return _bag_f1(pred_bag, gold_bag)


def align_spans_f1(pred_spans: list[str], gold_spans: list[str]) -> float:
    """Mean F1 under the optimal one-to-one span alignment.

    Solved exactly as an assignment problem; unmatched spans on either
    side score 0.  Equal to brute-force enumeration over alignments.
    """
    pred_bags = [_bag(normalize_answer(span)) for span in pred_spans]
    gold_bags = [_bag(normalize_answer(span)) for span in gold_spans]
    if not pred_bags or not gold_bags:
        return float(not pred_bags and not gold_bags)
    scores = np.zeros((len(gold_bags), len(pred_bags)))
    for g, gold_bag in enumerate(gold_bags):
        for p, pred_bag in enumerate(pred_bags):
            scores[g, p] = _gated_f1(pred_bag, gold_bag)
    rows, cols = linear_sum_assignment(-scores)
    per_span = np.zeros(max(len(gold_bags), len(pred_bags)))
    for row, col in zip(rows, cols):
        per_span[row] = scores[row, col]
    return float(np.mean(per_span))


def drop_em_f1(pred_spans: list[str], gold_spans: list[str]) -> tuple[float, float]:
    """Span-bag EM and F1 exactly as the published numeracy-focused
    evaluator computes them (per-question F1 rounded to 2 decimals)."""
    pred_strings = [_span_string(normalize_answer(span)) for span in pred_spans]
    gold_strings = [_span_string(normalize_answer(span)) for span in gold_spans]
    em = float(
        set(pred_strings) == set(gold_strings)
        and len(pred_strings) == len(gold_strings)
    )
    f1 = round(align_spans_f1(pred_spans, gold_spans), 2)
    return em, f1


# ---------------------------------------------------------------------------
# Question scoring
# ---------------------------------------------------------------------------


def _single_answer(value) -> object:
    if isinstance(value, list) and len(value) == 1:
        return value[0]
    return value


def _as_fraction(value) -> Fraction | None:
    value = _single_answer(value)
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        parsed = parse_number(value)
        return parsed.value if parsed else None
    return None


def _as_spans(value, scale: Scale) -> list[str]:
    if isinstance(value, (Fraction, int)):
        spans = [render_decimal(value)]
    elif isinstance(value, list):
        spans = [str(item) for item in value]
    else:
        spans = [str(value)] if str(value) else []
    if scale is not Scale.NONE:
        spans = [f"{span} {scale.word}" for span in spans]
    return spans


def score_question(
    pred_value,
    pred_scale: Scale,
    gold: QuestionRecord,
    policy: RoundingPolicy = DEFAULT_POLICY,
) -> tuple[float, float]:
    """(EM, F1) for one question, each in [0, 1].

    A gold answer that is a single number is compared numerically with
    scale factors applied (all-or-nothing); everything else goes through
    the span-bag metric with scale words concatenated onto both sides.
    """
    gold_answer = _single_answer(gold.answer)
    if not isinstance(gold_answer, list):
        gold_numeric = _as_fraction(gold_answer)
        if gold_numeric is not None:
            pred_numeric = _as_fraction(pred_value)
            if pred_numeric is None:
                return 0.0, 0.0
            hit = numbers_match(
                pred_numeric, pred_scale, gold_numeric, gold.gold_scale, policy
            )
            return (1.0, 1.0) if hit else (0.0, 0.0)

    pred_spans = _as_spans(pred_value, pred_scale)
    gold_spans = _as_spans(gold.answer, gold.gold_scale)
    if not pred_spans:
        return 0.0, 0.0
    return drop_em_f1(pred_spans, gold_spans)


# ---------------------------------------------------------------------------
# Dataset-level evaluation
# ---------------------------------------------------------------------------


@dataclass
class CellScore:
    n: int = 0
    em_sum: float = 0.0
    f1_sum: float = 0.0

    @property
    def em(self) -> float:
        return 100.0 * self.em_sum / self.n if self.n else 0.0

    @property
    def f1(self) -> float:
        return 100.0 * self.f1_sum / self.n if self.n else 0.0


@dataclass
class EvalReport:
    overall: CellScore
    cells: dict  # (answer_type, answer_source) -> CellScore
    questions: list  # (question_id, em, f1)
    missing: list[str] = field(default_factory=list)

    @property
    def em(self) -> float:
        return self.overall.em

    @property
    def f1(self) -> float:
        return self.overall.f1


Predictions = Mapping[str, tuple[object, Scale]]


def evaluate(
    predictions: Predictions,
    dataset: Dataset,
    policy: RoundingPolicy = DEFAULT_POLICY,
) -> EvalReport:
    """Micro-averaged EM/F1 overall and per (answer type, answer source).

    Gold questions with no prediction score (0, 0) and are listed in
    ``missing``; prediction ids not present in the gold set are an error.
    """
    gold_ids = {q.question_id for _, q in iter_questions(dataset)}
    unknown = sorted(set(predictions) - gold_ids)
    if unknown:
        shown = ", ".join(unknown[:5])
        raise ScoringError(
            f"{len(unknown)} prediction id(s) not in the gold dataset: {shown}"
        )

    overall = CellScore()
    cells = {
        (t, s): CellScore() for t in AnswerType.ALL for s in AnswerSource.ALL
    }
    questions = []
    missing = []
    for _, gold in iter_questions(dataset):
        if gold.question_id in predictions:
            value, scale = predictions[gold.question_id]
            em, f1 = score_question(value, scale, gold, policy)
        else:
            missing.append(gold.question_id)
            em, f1 = 0.0, 0.0
        for bucket in (overall, cells[(gold.answer_type, gold.answer_source)]):
            bucket.n += 1
            bucket.em_sum += em
            bucket.f1_sum += f1
        questions.append((gold.question_id, em, f1))
    return EvalReport(overall=overall, cells=cells, questions=questions, missing=missing)


def format_report(report: EvalReport) -> str:
    """Render the per-type/source EM/F1 grid as a fixed-width table."""
    headers = [AnswerSource.LABELS[s] for s in AnswerSource.ALL] + ["Total"]
    lines = [f"{'':<12}" + "".join(f"{h:>16}" for h in headers)]
    for answer_type in AnswerType.ALL:
        row = [AnswerType.LABELS[answer_type].ljust(12)]
        type_bucket = CellScore()
        for source in AnswerSource.ALL:
            cell = report.cells[(answer_type, source)]
            row.append(_fmt_cell(cell))
            type_bucket.n += cell.n
            type_bucket.em_sum += cell.em_sum
            type_bucket.f1_sum += cell.f1_sum
        row.append(_fmt_cell(type_bucket))
        lines.append("".join(row))
    totals = ["Total".ljust(12)]
    for source in AnswerSource.ALL:
        source_bucket = CellScore()
        for answer_type in AnswerType.ALL:
            cell = report.cells[(answer_type, source)]
            source_bucket.n += cell.n
            source_bucket.em_sum += cell.em_sum
            source_bucket.f1_sum += cell.f1_sum
        totals.append(_fmt_cell(source_bucket))
    totals.append(_fmt_cell(report.overall))
    lines.append("".join(totals))
    return "\n".join(lines)


def _fmt_cell(cell: CellScore) -> str:
    if cell.n == 0:
        return f"{'-/-':>16}"
    return f"{cell.em:7.1f}/{cell.f1:<8.1f}"


# ---------------------------------------------------------------------------
# Prediction file format: {question_id: [answer, scale word]}
# ---------------------------------------------------------------------------


def prediction_file_entry(value, scale: Scale) -> list:
    if isinstance(value, Fraction):
        entry_value: object = render_decimal(value)
    elif isinstance(value, int):
        entry_value = render_decimal(Fraction(value))
    elif isinstance(value, list):
        entry_value = [str(item) for item in value]
    else:
        entry_value = str(value)
    return [entry_value, scale.word]


def write_predictions(predictions: Mapping[str, tuple[object, Scale]], path: str | Path) -> None:
    payload = {
        question_id: prediction_file_entry(value, scale)
        for question_id, (value, scale) in predictions.items()
    }
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def read_predictions(path: str | Path) -> dict[str, tuple[object, Scale]]:
    def reject_duplicates(pairs):
        seen = {}
        for key, value in pairs:
            if key in seen:
                raise ScoringError(f"duplicate prediction id: {key}")
            seen[key] = value
        return seen

    with Path(path).open("r", encoding="utf-8") as handle:
        raw = json.load(handle, object_pairs_hook=reject_duplicates)
    predictions: dict[str, tuple[object, Scale]] = {}
    for question_id, entry in raw.items():
        if not isinstance(entry, list) or len(entry) != 2:
            raise ScoringError(
                f"prediction for {question_id} must be [answer, scale word]"
            )
        value, scale_word = entry
        predictions[question_id] = (value, Scale.from_word(str(scale_word)))
    return predictions
