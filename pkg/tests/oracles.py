"""Independent reference implementations the tests compare against.

Everything here is deliberately written the slow, obvious way (or delegated
to an unrelated geometry library) and must not import the production metric
code paths it checks.
"""

from shapely.geometry import box as _shapely_box


def iou_oracle(a, b) -> float:
    """IoU via shapely polygon geometry."""
    pa = _shapely_box(*a)
    pb = _shapely_box(*b)
    union = pa.union(pb).area
    return pa.intersection(pb).area / union


def qualifies_oracle(pred_box, gold_boxes, threshold) -> bool:
    for gb in gold_boxes:
        value = iou_oracle(pred_box, gb)
        if value > 0 and value >= threshold:
            return True
    return False


def accuracy_oracle(predictions, gold, threshold) -> tuple[float, int, int]:
    """Grounding accuracy recomputed from scratch: (percentage, evaluated, excluded)."""
    table = {}
    for record in gold:
        table[(record.frame_id, record.entity)] = record
    hits = 0
    evaluated = 0
    excluded = 0
    for pred in predictions:
        record = table[(pred.frame_id, pred.entity)]
        if len(record.boxes) == 0:
            excluded += 1
            continue
        evaluated += 1
        if qualifies_oracle(pred.box, record.boxes, threshold):
            hits += 1
    pct = 100.0 * hits / evaluated if evaluated else 0.0
    return pct, evaluated, excluded


def upper_bound_oracle(frames, gold, threshold) -> float:
    """Proposal ceiling via shapely, exhaustive loops."""
    by_id = {}
    for frame in frames:
        by_id[frame.frame_id] = frame
    hits = 0
    total = 0
    for record in gold:
        if len(record.boxes) == 0:
            continue
        total += 1
        frame = by_id[record.frame_id]
        if any(qualifies_oracle(p.box, record.boxes, threshold) for p in frame.proposals):
            hits += 1
    return 100.0 * hits / total


def ap_at_k_oracle(ranked, gold_set, k) -> float:
    """Average precision by the definition: precision at each relevant rank."""
    names = [item if isinstance(item, str) else item[0] for item in ranked][:k]
    total = 0.0
    for rank in range(1, len(names) + 1):
        if names[rank - 1] in gold_set:
            prefix = names[:rank]
            precision = sum(1 for n in prefix if n in gold_set) / rank
            total += precision
    return total / min(len(gold_set), k)


def scan_oracle(words, eligible, match_set, canon):
    """Reference for the greedy transcript scan, written recursively.

    ``words`` is the token text list, ``eligible`` parallel booleans,
    ``canon`` the candidate normaliser.  Returns (entity, last token index)
    matches in order.
    """
    def walk(i):
        if i >= len(words):
            return []
        if i + 1 < len(words) and eligible[i] and eligible[i + 1]:
            cand = canon(words[i] + " " + words[i + 1])
            if cand in match_set:
                return [(cand, i + 1)] + walk(i + 2)
        if eligible[i]:
            cand = canon(words[i])
            if cand in match_set:
                return [(cand, i)] + walk(i + 1)
        return walk(i + 1)

    return walk(0)
