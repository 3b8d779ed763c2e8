"""Published reference statistics for the public dataset release.

The stats command prints computed values next to these so a freshly
downloaded copy of the corpus can be checked at a glance.  Counts are
exact; averages were published rounded to one decimal.
"""

from __future__ import annotations

from .corpus import AnswerSource, AnswerType
from .derivation import Operator
from .numerics import Scale

# Per-split corpus shape: counts and one-decimal averages.
SPLIT_STATS = {
    "train": {
        "n_contexts": 2201,
        "n_questions": 13215,
        "avg_rows": 9.4,
        "avg_cols": 4.0,
        "avg_paragraphs": 4.8,
        "avg_paragraph_len": 43.6,
        "avg_question_len": 12.5,
        "avg_answer_len": 4.1,
    },
    "dev": {
        "n_contexts": 278,
        "n_questions": 1668,
        "avg_rows": 9.7,
        "avg_cols": 3.9,
        "avg_paragraphs": 4.9,
        "avg_paragraph_len": 44.8,
        "avg_question_len": 12.4,
        "avg_answer_len": 4.1,
    },
    "test": {
        "n_contexts": 278,
        "n_questions": 1669,
        "avg_rows": 9.3,
        "avg_cols": 4.0,
        "avg_paragraphs": 4.6,
        "avg_paragraph_len": 42.6,
        "avg_question_len": 12.4,
        "avg_answer_len": 4.3,
    },
}

# Question counts per (answer type, answer source) over all three splits.
TYPE_SOURCE_COUNTS = {
    (AnswerType.SPAN, AnswerSource.TABLE): 1801,
    (AnswerType.SPAN, AnswerSource.TEXT): 3496,
    (AnswerType.SPAN, AnswerSource.TABLE_TEXT): 1842,
    (AnswerType.SPANS, AnswerSource.TABLE): 777,
    (AnswerType.SPANS, AnswerSource.TEXT): 258,
    (AnswerType.SPANS, AnswerSource.TABLE_TEXT): 1037,
    (AnswerType.COUNTING, AnswerSource.TABLE): 106,
    (AnswerType.COUNTING, AnswerSource.TEXT): 5,
    (AnswerType.COUNTING, AnswerSource.TABLE_TEXT): 266,
    (AnswerType.ARITHMETIC, AnswerSource.TABLE): 4747,
    (AnswerType.ARITHMETIC, AnswerSource.TEXT): 143,
    (AnswerType.ARITHMETIC, AnswerSource.TABLE_TEXT): 2074,
}
TOTAL_QUESTIONS = 16552

# Gold-operator proportions (percent of questions) on dev and test.
OPERATOR_PROPORTIONS = {
    "dev": {
        Operator.SPAN_IN_TEXT: 20.9,
        Operator.CELL_IN_TABLE: 21.1,
        Operator.SPANS: 13.0,
        Operator.SUM: 3.4,
        Operator.COUNT: 1.9,
        Operator.AVERAGE: 8.5,
        Operator.MULTIPLICATION: 0.2,
        Operator.DIVISION: 1.0,
        Operator.DIFFERENCE: 14.1,
        Operator.CHANGE_RATIO: 9.3,
        Operator.OTHER: 6.6,
    },
    "test": {
        Operator.SPAN_IN_TEXT: 21.3,
        Operator.CELL_IN_TABLE: 21.6,
        Operator.SPANS: 12.6,
        Operator.SUM: 2.5,
        Operator.COUNT: 2.4,
        Operator.AVERAGE: 5.9,
        Operator.MULTIPLICATION: 0.1,
        Operator.DIVISION: 1.0,
        Operator.DIFFERENCE: 15.9,
        Operator.CHANGE_RATIO: 10.2,
        Operator.OTHER: 6.6,
    },
}

# Gold-scale proportions (percent of questions) on dev and test.
SCALE_PROPORTIONS = {
    "dev": {
        Scale.NONE: 47.6,
        Scale.THOUSAND: 20.7,
        Scale.MILLION: 15.2,
        Scale.BILLION: 0.4,
        Scale.PERCENT: 16.1,
    },
    "test": {
        Scale.NONE: 50.3,
        Scale.THOUSAND: 19.2,
        Scale.MILLION: 12.9,
        Scale.BILLION: 0.0,
        Scale.PERCENT: 17.7,
    },
}

# Published dev scores of the learned tag-and-aggregate baseline on this
# dataset; an all-oracle run should upper-bound them.
LEARNED_DEV_EM = 55.2
LEARNED_DEV_F1 = 62.7
