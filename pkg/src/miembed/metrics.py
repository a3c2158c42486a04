"""Multi-label evaluation: per-class and overall precision/recall, the
recalled-label percentage N+, the randomized upper-bound protocol, and
MAP@k for single-label zero-shot test sets.

Counting is plain-integer work, so everything here is stdlib Python.
"""

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MetricsReport:
    """Five fixed-k annotation metrics, as percentages in [0, 100].

    Labels with a zero denominator (no ground truth for recall, never
    predicted for precision) are skipped by the per-class means; the
    skip counts are reported alongside.
    """

    k: int
    per_class_recall: float
    per_class_precision: float
    overall_recall: float
    overall_precision: float
    n_plus: float
    recall_labels_skipped: int
    precision_labels_skipped: int


def evaluate_annotations(
    predictions: Mapping[str, object],
    truths: Mapping[str, object],
    vocabulary: Sequence[str],
    k: int,
) -> MetricsReport:
    """Score top-k prediction sets against ground-truth label sets.

    Per label i over images: correct count / ground-truth count gives
    recall, correct / predicted gives precision; per-class metrics
    average these ratios over labels, overall metrics divide the summed
    counts. N+ is the percentage of vocabulary labels correctly
    predicted for at least one image.
    """
    if not vocabulary:
        raise ValueError("vocabulary is empty")
    vocab = list(dict.fromkeys(vocabulary))
    if len(vocab) != len(vocabulary):
        raise ValueError("vocabulary contains duplicates")
    vocab_set = set(vocab)
    if set(predictions) != set(truths):
        missing = set(truths) ^ set(predictions)
        raise ValueError(f"prediction and truth bags do not align: {sorted(missing)[:5]}")
    if not predictions:
        raise ValueError("no bags to evaluate")

    n_correct = {name: 0 for name in vocab}
    n_truth = {name: 0 for name in vocab}
    n_pred = {name: 0 for name in vocab}
    for bag_id, predicted in predictions.items():
        pred_set = set(predicted)
        if len(pred_set) != k:
            raise ValueError(
                f"bag {bag_id!r} has {len(pred_set)} predicted labels, expected exactly {k}"
            )
        truth_set = set(truths[bag_id])
        for name in pred_set:
            if name not in vocab_set:
                raise ValueError(f"bag {bag_id!r} predicts unknown label {name!r}")
        for name in truth_set:
            if name not in vocab_set:
                raise ValueError(f"bag {bag_id!r} has unknown truth label {name!r}")
        for name in pred_set:
            n_pred[name] += 1
            if name in truth_set:
                n_correct[name] += 1
        for name in truth_set:
            n_truth[name] += 1

    recall_terms = []
    precision_terms = []
    for name in vocab:
        if n_truth[name] > 0:
            recall_terms.append(n_correct[name] / n_truth[name])
        if n_pred[name] > 0:
            precision_terms.append(n_correct[name] / n_pred[name])
    total_correct = sum(n_correct.values())
    total_truth = sum(n_truth.values())
    total_pred = sum(n_pred.values())
    recalled = sum(1 for name in vocab if n_correct[name] > 0)

    return MetricsReport(
        k=k,
        per_class_recall=100.0 * sum(recall_terms) / len(recall_terms) if recall_terms else 0.0,
        per_class_precision=(
            100.0 * sum(precision_terms) / len(precision_terms) if precision_terms else 0.0
        ),
        overall_recall=100.0 * total_correct / total_truth if total_truth else 0.0,
        overall_precision=100.0 * total_correct / total_pred if total_pred else 0.0,
        n_plus=100.0 * recalled / len(vocab),
        recall_labels_skipped=len(vocab) - len(recall_terms),
        precision_labels_skipped=len(vocab) - len(precision_terms),
    )


def upper_bound_assignments(
    truths: Mapping[str, object],
    vocabulary: Sequence[str],
    k: int,
    seed: int,
) -> dict[str, list[str]]:
    """The randomized oracle assignment defining the metric ceiling.

    Per bag: with at least k ground-truth labels, a uniform random
    k-subset of them; otherwise all ground-truth labels padded with
    uniform random fillers from the rest of the vocabulary. Seeded and
    deterministic (bags processed in mapping order, labels in
    vocabulary order).
    """
    vocab = list(dict.fromkeys(vocabulary))
    if k > len(vocab):
        raise ValueError(f"k={k} exceeds vocabulary size {len(vocab)}")
    index = {name: i for i, name in enumerate(vocab)}
    rng = np.random.default_rng(seed)
    out: dict[str, list[str]] = {}
    for bag_id, truth in truths.items():
        truth_list = sorted(set(truth), key=lambda n: index[n])
        if len(truth_list) >= k:
            chosen = [truth_list[i] for i in rng.choice(len(truth_list), size=k, replace=False)]
        else:
            pool = [name for name in vocab if name not in set(truth_list)]
            fill = rng.choice(len(pool), size=k - len(truth_list), replace=False)
            chosen = truth_list + [pool[i] for i in fill]
        out[bag_id] = sorted(chosen, key=lambda n: index[n])
    return out


def map_at_k(
    predicted_rankings: Mapping[str, Sequence[str]],
    truths: Mapping[str, str],
    k: int,
    *,
    micro: bool = False,
) -> float:
    """Percentage of single-label images whose true label ranks in the top k.

    Macro by default: hit rates are averaged per class first (classes in
    sorted name order), then across classes. micro=True averages over
    images directly.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if set(predicted_rankings) != set(truths):
        missing = set(truths) ^ set(predicted_rankings)
        raise ValueError(f"ranking and truth bags do not align: {sorted(missing)[:5]}")
    if not truths:
        raise ValueError("no images to evaluate")
    hits: dict[str, list[int]] = {}
    for bag_id, truth in truths.items():
        ranking = predicted_rankings[bag_id]
        if len(ranking) < k:
            raise ValueError(
                f"bag {bag_id!r} ranking has {len(ranking)} entries, fewer than k={k}"
            )
        hits.setdefault(truth, []).append(1 if truth in list(ranking)[:k] else 0)
    if micro:
        flat = [h for class_hits in hits.values() for h in class_hits]
        return 100.0 * sum(flat) / len(flat)
    class_rates = [sum(hits[name]) / len(hits[name]) for name in sorted(hits)]
    return 100.0 * sum(class_rates) / len(class_rates)


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "k": report.k,
        "per_class_recall": report.per_class_recall,
        "per_class_precision": report.per_class_precision,
        "overall_recall": report.overall_recall,
        "overall_precision": report.overall_precision,
        "n_plus": report.n_plus,
        "recall_labels_skipped": report.recall_labels_skipped,
        "precision_labels_skipped": report.precision_labels_skipped,
    }


def render_report(report: MetricsReport) -> str:
    """Aligned plain-text table, metrics at two decimal places."""
    rows = [
        ("per-class recall", report.per_class_recall),
        ("per-class precision", report.per_class_precision),
        ("overall recall", report.overall_recall),
        ("overall precision", report.overall_precision),
        ("N+", report.n_plus),
    ]
    width = max(len(name) for name, _ in rows)
    lines = [f"metrics at k={report.k}"]
    lines += [f"  {name.ljust(width)}  {value:7.2f}" for name, value in rows]
    if report.recall_labels_skipped or report.precision_labels_skipped:
        lines.append(
            f"  (skipped labels: recall {report.recall_labels_skipped}, "
            f"precision {report.precision_labels_skipped})"
        )
    return "\n".join(lines)
