"""Trained decision heads and their evaluation metrics.

One network per task (discard 34-way, pon 2-way, chi 4-way, riichi
2-way), each an independent copy of the shared convolutional trunk.
Training is plain cross-entropy on extracted samples; evaluation
reduces everything to a confusion matrix (rows = truth, columns =
prediction) so every published number can be recomputed from the
matrix alone.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from mjlab import dataset, features, nncore


@dataclass(frozen=True, eq=False)
class PolicyHead:
    task: str
    model: nncore.Model
    record: dict


@dataclass(frozen=True, eq=False)
class Metrics:
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None
    per_class: tuple


@dataclass(frozen=True, eq=False)
class EvalReport:
    task: str
    count: int
    matrix: np.ndarray
    accuracy: float
    precision: float | None
    recall: float | None
    f1: float | None
    per_class: tuple
    legality: float | None


def metrics_from_matrix(matrix, *, positive=1) -> Metrics:
    """Accuracy plus per-class precision/recall from a confusion matrix
    (rows = truth, columns = prediction). The headline precision,
    recall, and f1 belong to the `positive` class, the "action taken"
    column. Zero-denominator metrics come back as None, never as 0."""
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValueError(f"confusion matrix must be square, got {m.shape}")
    if not np.issubdtype(m.dtype, np.integer):
        raise ValueError("confusion matrix entries must be integers")
    if (m < 0).any():
        raise ValueError("confusion matrix entries must be non-negative")
    total = int(m.sum())
    if total == 0:
        raise ValueError("confusion matrix is all zeros")
    k = m.shape[0]
    if not 0 <= positive < k:
        raise ValueError(f"positive class {positive} outside [0, {k})")
    per_class = []
    for c in range(k):
        hits = int(m[c, c])
        col = int(m[:, c].sum())
        row = int(m[c].sum())
        per_class.append((hits / col if col else None,
                          hits / row if row else None))
    precision, recall = per_class[positive]
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return Metrics(accuracy=int(np.trace(m)) / total, precision=precision,
                   recall=recall, f1=f1, per_class=tuple(per_class))


def call_type_accuracy(matrix) -> float:
    """Among decisions that truly called and were predicted to call,
    the fraction where the predicted call variant is the right one.
    Class 0 is the pass row/column."""
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
        raise ValueError(f"confusion matrix must be square, got {m.shape}")
    sub = m[1:, 1:]
    total = int(sub.sum())
    if total == 0:
        raise ValueError("no called samples were predicted as calls")
    return int(np.trace(sub)) / total


def new_head(task, *, seed=0, dtype=np.float32) -> PolicyHead:
    if task not in dataset.LABEL_CLASSES:
        raise ValueError(f"unknown task {task!r}")
    model = nncore.policy_network(
        dataset.LABEL_CLASSES[task], seed=seed, dtype=dtype,
        meta={"layout": features.LAYOUT, "task": task},
    )
    return PolicyHead(task=task, model=model, record={"seed": seed})


def _check_samples(task, samples, classes, which):
    if not samples:
        raise ValueError(f"no {which} samples")
    for s in samples:
        if s.task != task:
            raise ValueError(
                f"{which} sample for task {s.task!r} mixed into "
                f"{task!r} training"
            )
        if s.stack.layout != features.LAYOUT:
            raise ValueError(
                f"{which} samples use plane layout {s.stack.layout!r}, "
                f"this encoder is {features.LAYOUT!r}"
            )
        if not 0 <= s.label < classes:
            raise ValueError(f"label {s.label} outside [0, {classes})")


def _batched(model, bits, labels, batch_size):
    """Inference-mode loss and agreement over a whole sample set."""
    total = 0.0
    hits = 0
    for lo in range(0, len(bits), batch_size):
        chunk = slice(lo, lo + batch_size)
        logits = nncore.forward(model, bits[chunk])
        total += nncore.cross_entropy(logits, labels[chunk]) \
            * logits.shape[0]
        hits += int((logits.argmax(axis=1) == labels[chunk]).sum())
    return total / len(bits), hits / len(bits)


def _snapshot(model):
    return [arr.copy() for layer in model.layers
            for group in (layer.params(), layer.state())
            for arr in group.values()]


def _restore(model, snap):
    arrays = [arr for layer in model.layers
              for group in (layer.params(), layer.state())
              for arr in group.values()]
    for arr, saved in zip(arrays, snap):
        arr[...] = saved


def train_head(task, train_samples, val_samples, *, epochs=10,
               batch_size=256, lr=1e-3, seed=0, optimizer="adam",
               class_weights=None, early_stop_agreement=None,
               dtype=np.float32, model=None):
    """Fit one decision head; returns (PolicyHead, per-epoch curves).

    The returned model is the checkpoint with the best validation
    agreement, not the last epoch. Pass `model` to resume training or
    to substitute a smaller trunk; by default the full three-block
    architecture is built. `class_weights` (one weight per label class)
    reweights the loss; reported curve losses stay unweighted so runs
    with different weights remain comparable."""
    classes = dataset.LABEL_CLASSES.get(task)
    if classes is None:
        raise ValueError(f"unknown task {task!r}")
    _check_samples(task, train_samples, classes, "training")
    _check_samples(task, val_samples, classes, "validation")
    if model is None:
        model = nncore.policy_network(
            classes, seed=seed, dtype=dtype,
            meta={"layout": features.LAYOUT, "task": task},
        )
    if optimizer == "adam":
        optim = nncore.Adam(lr=lr)
    elif optimizer == "sgd":
        optim = nncore.SGD(lr=lr, momentum=0.9)
    else:
        raise ValueError(f"unknown optimizer {optimizer!r}")

    x = np.stack([s.stack.bits for s in train_samples])
    y = np.array([s.label for s in train_samples])
    vx = np.stack([s.stack.bits for s in val_samples])
    vy = np.array([s.label for s in val_samples])
    per_sample = None
    if class_weights is not None:
        class_weights = np.asarray(class_weights, dtype=np.float64)
        if class_weights.shape != (classes,):
            raise ValueError(
                f"need one class weight per label, got "
                f"{class_weights.shape} for {classes} classes"
            )
        per_sample = class_weights[y]

    rng = np.random.default_rng(seed)
    curves = []
    best = _snapshot(model)
    best_agreement = -1.0
    best_epoch = -1
    for epoch in range(epochs):
        order = rng.permutation(len(x))
        for lo in range(0, len(order), batch_size):
            idx = order[lo:lo + batch_size]
            w = None if per_sample is None else per_sample[idx]
            nncore.train_step(model, optim, x[idx], y[idx], rng=rng,
                              weights=w)
        train_loss, train_agreement = _batched(model, x, y, batch_size)
        val_loss, val_agreement = _batched(model, vx, vy, batch_size)
        curves.append({
            "epoch": epoch,
            "train_loss": train_loss,
            "train_agreement": train_agreement,
            "val_loss": val_loss,
            "val_agreement": val_agreement,
        })
        if val_agreement > best_agreement:
            best_agreement = val_agreement
            best_epoch = epoch
            best = _snapshot(model)
        if early_stop_agreement is not None \
                and train_agreement >= early_stop_agreement:
            break
    _restore(model, best)
    record = {
        "task": task, "seed": seed, "epochs": len(curves),
        "best_epoch": best_epoch, "batch_size": batch_size, "lr": lr,
        "optimizer": optimizer, "train_samples": len(train_samples),
        "val_samples": len(val_samples),
        "best_val_agreement": best_agreement,
    }
    return PolicyHead(task=task, model=model, record=record), curves


def write_curves(curves, path) -> None:
    fields = ["epoch", "train_loss", "train_agreement", "val_loss",
              "val_agreement"]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(curves)


def save_head(head: PolicyHead, path) -> None:
    head.model.meta.update({
        "layout": features.LAYOUT,
        "task": head.task,
        "record": head.record,
    })
    nncore.save_model(head.model, path)


def load_head(path) -> PolicyHead:
    model = nncore.load_model(path)
    task = model.meta.get("task")
    classes = dataset.LABEL_CLASSES.get(task)
    if classes is None:
        raise ValueError(f"model file carries unknown task {task!r}")
    layout = model.meta.get("layout")
    if layout != features.LAYOUT:
        raise ValueError(
            f"model was trained on plane layout {layout!r}, this "
            f"encoder is {features.LAYOUT!r}"
        )
    if model.layers[-1].out_features != classes:
        raise ValueError(
            f"{task} head should be {classes}-way, file has "
            f"{model.layers[-1].out_features}"
        )
    return PolicyHead(task=task, model=model,
                      record=dict(model.meta.get("record", {})))


def _stack_of(view):
    if isinstance(view, features.PlaneStack):
        return view
    return features.encode(view)


def predict(head: PolicyHead, view):
    """Probability vector and argmax for one observation (a table view
    or an already-encoded plane stack)."""
    stack = _stack_of(view)
    probs = predict_batch(head, [stack])[0]
    return probs, int(probs.argmax())


def predict_batch(head: PolicyHead, stacks):
    expect = head.model.meta.get("layout", features.LAYOUT)
    stacks = [_stack_of(s) for s in stacks]
    for stack in stacks:
        if stack.layout != expect:
            raise ValueError(
                f"samples use plane layout {stack.layout!r}, model was "
                f"trained on {expect!r}"
            )
    return nncore.predict(head.model, np.stack([s.bits for s in stacks]))


def evaluate(head: PolicyHead, samples, *, batch_size=512) -> EvalReport:
    """Confusion matrix and derived metrics on labelled samples. For
    the discard task the report also carries the legality rate: the
    fraction of raw argmax predictions (no masking) naming a tile kind
    actually present in the hand."""
    classes = dataset.LABEL_CLASSES[head.task]
    _check_samples(head.task, samples, classes, "evaluation")
    bits = np.stack([s.stack.bits for s in samples])
    labels = np.array([s.label for s in samples])
    matrix = np.zeros((classes, classes), dtype=np.int64)
    legal_hits = 0
    for lo in range(0, len(bits), batch_size):
        chunk = slice(lo, lo + batch_size)
        logits = nncore.forward(head.model, bits[chunk])
        pred = logits.argmax(axis=1)
        np.add.at(matrix, (labels[chunk], pred), 1)
        if head.task == "discard":
            in_hand = bits[chunk][:, features.HAND].any(axis=2)
            legal_hits += int(in_hand[np.arange(len(pred)), pred].sum())
    m = metrics_from_matrix(matrix, positive=1 if classes == 2 else 0)
    binary = classes == 2
    return EvalReport(
        task=head.task, count=len(samples), matrix=matrix,
        accuracy=m.accuracy,
        precision=m.precision if binary else None,
        recall=m.recall if binary else None,
        f1=m.f1 if binary else None,
        per_class=m.per_class,
        legality=legal_hits / len(samples) if head.task == "discard"
        else None,
    )


def write_report(report: EvalReport, path) -> None:
    """One JSON object per line: a header, then each metric."""
    def line(obj):
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))

    lines = [line({"task": report.task, "count": report.count, "v": 1})]
    for name in ("accuracy", "precision", "recall", "f1", "legality"):
        lines.append(line({"metric": name, "value": getattr(report, name)}))
    for c, (prec, rec) in enumerate(report.per_class):
        lines.append(line({"class": c, "metric": "precision",
                           "value": prec}))
        lines.append(line({"class": c, "metric": "recall", "value": rec}))
    lines.append(line({"metric": "matrix",
                       "value": report.matrix.tolist()}))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def format_report(report: EvalReport) -> str:
    """Human-readable table: the matrix, then the derived metrics."""
    def fmt(value):
        return "undefined" if value is None else f"{value:.4f}"

    width = max(len(str(int(report.matrix.max()))), 5)
    out = [f"{report.task}: {report.count} samples "
           f"(rows = truth, columns = prediction)"]
    for row in report.matrix:
        out.append("  " + " ".join(f"{int(v):>{width}}" for v in row))
    out.append(f"  accuracy  {fmt(report.accuracy)}")
    if report.precision is not None or report.task in ("pon", "riichi"):
        out.append(f"  precision {fmt(report.precision)}")
        out.append(f"  recall    {fmt(report.recall)}")
        out.append(f"  f1        {fmt(report.f1)}")
    if report.legality is not None:
        out.append(f"  legality  {fmt(report.legality)}")
    return "\n".join(out)
