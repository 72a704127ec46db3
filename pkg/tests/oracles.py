"""Slow, literal reference implementations used as test oracles."""

import numpy as np


def auroc_pairs(id_s, ood_s):
    total = 0.0
    for a in id_s:
        for b in ood_s:
            total += 1.0 if a > b else 0.5 if a == b else 0.0
    return total / (len(id_s) * len(ood_s))


def aupr_sweep(id_s, ood_s):
    scores = list(id_s) + list(ood_s)
    ap, prev_recall = 0.0, 0.0
    for t in sorted(set(scores), reverse=True):
        tp = sum(1 for s in id_s if s >= t)
        fp = sum(1 for s in ood_s if s >= t)
        recall = tp / len(id_s)
        ap += (recall - prev_recall) * tp / (tp + fp)
        prev_recall = recall
    return ap


def tnr_sweep(id_s, ood_s):
    best = None
    for t in sorted(set(id_s)):
        if sum(1 for s in id_s if s >= t) / len(id_s) >= 0.95:
            best = t
    return sum(1 for s in ood_s if s < best) / len(ood_s)


def dtacc_sweep(id_s, ood_s):
    uniq = sorted(set(id_s) | set(ood_s))
    deltas = [-np.inf, np.inf] + [(a + b) / 2 for a, b in zip(uniq[:-1], uniq[1:])]
    worst = 1.0
    for d in deltas:
        p_in = sum(1 for s in id_s if s <= d) / len(id_s)
        p_out = sum(1 for s in ood_s if s > d) / len(ood_s)
        worst = min(worst, 0.5 * (p_in + p_out))
    return 1.0 - worst


def ece_loop(probs, labels, bins):
    edges = np.linspace(0.0, 1.0, bins + 1)
    total = 0.0
    n = len(labels)
    for b in range(bins):
        members = []
        for row, y in zip(probs, labels):
            c = row.max()
            if (edges[b] < c <= edges[b + 1]) or (b == 0 and c <= edges[0]):
                members.append((c, int(np.argmax(row)) == y))
        if members:
            acc = sum(ok for _, ok in members) / len(members)
            conf = sum(c for c, _ in members) / len(members)
            total += len(members) / n * abs(acc - conf)
    return total
