"""Empirical membership-inference attacks on recorded losses or outputs."""

from dataclasses import dataclass, field
import logging

import numpy as np

from ..errors import InvalidArgumentError

log = logging.getLogger(__name__)


@dataclass
class AttackReport:
    attack_kind: str
    advantage: float
    tpr_points: list  # (fpr, tpr) pairs
    thresholds: object
    trials: dict = field(default_factory=dict)
    tpr_at_1pct: float = float("nan")


def _as_array(values, name):
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise InvalidArgumentError(f"{name} is empty")
    return arr


def _roc_below(member, nonmember):
    """ROC of the rule 'member iff loss <= t' over every distinct loss value t."""
    cuts = np.unique(np.concatenate([member, nonmember]))
    tpr = np.searchsorted(np.sort(member), cuts, side="right") / member.size
    fpr = np.searchsorted(np.sort(nonmember), cuts, side="right") / nonmember.size
    return cuts, np.concatenate([[0.0], fpr]), np.concatenate([[0.0], tpr])


def tpr_at_fpr(member_losses, nonmember_losses, fpr_budget):
    """Largest TPR of a loss threshold whose empirical FPR stays within the budget."""
    if not 0 < fpr_budget < 1:
        raise InvalidArgumentError("fpr_budget must lie in (0, 1)")
    member = _as_array(member_losses, "member_losses")
    nonmember = _as_array(nonmember_losses, "nonmember_losses")
    _, fpr, tpr = _roc_below(member, nonmember)
    ok = fpr <= fpr_budget + 1e-15
    return float(tpr[ok].max())


def attack_global_threshold(member_losses, nonmember_losses):
    """One loss threshold for every point, chosen to maximise TPR - FPR."""
    member = _as_array(member_losses, "member_losses")
    nonmember = _as_array(nonmember_losses, "nonmember_losses")
    cuts, fpr, tpr = _roc_below(member, nonmember)
    gain = tpr - fpr
    best = int(np.argmax(gain))
    # index 0 is the empty rule; otherwise cut best-1 is the flagged maximum
    threshold = -np.inf if best == 0 else float(cuts[best - 1])
    return AttackReport(
        "global-threshold", float(gain[best]), list(zip(fpr.tolist(), tpr.tolist())), threshold,
        {"members": member.size, "nonmembers": nonmember.size},
        tpr_at_fpr(member, nonmember, 0.01))


def midpoint_threshold(member, nonmember):
    """Per-point threshold: the midpoint of the best-separating adjacent shadow losses.

    Returns -inf when no cut beats flagging nothing.
    """
    vals = np.concatenate([member, nonmember])
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    is_member = np.concatenate([np.ones(member.size), np.zeros(nonmember.size)])[order]
    gain = np.cumsum(is_member) / member.size - np.cumsum(1 - is_member) / nonmember.size
    # only cut between distinct values
    valid = np.append(vals[1:] > vals[:-1], True)
    gain = np.where(valid, gain, -np.inf)
    k = int(np.argmax(gain))
    if gain[k] <= 0:
        return -np.inf
    upper = vals[k + 1] if k + 1 < vals.size else vals[k] + abs(vals[k]) + 1.0
    return 0.5 * (vals[k] + upper)


def attack_sample_threshold(shadow_losses_by_point, target_losses):
    """Shadow-calibrated per-point loss thresholds.

    ``shadow_losses_by_point``: sequence of (member_losses, nonmember_losses)
    per attacked point. ``target_losses``: per point, a sequence of
    (loss, is_member) pairs from target models.
    """
    thresholds = []
    tp = fp = pos = neg = 0
    skipped = 0
    for (sm, sn), targets in zip(shadow_losses_by_point, target_losses):
        sm = np.asarray(sm, dtype=float)
        sn = np.asarray(sn, dtype=float)
        if sm.size == 0 or sn.size == 0:
            skipped += 1
            thresholds.append(float("nan"))
            continue
        thr = midpoint_threshold(sm, sn)
        thresholds.append(thr)
        t = np.asarray(targets, dtype=float).reshape(-1, 2)
        flagged = t[:, 0] < thr
        mem = t[:, 1] > 0.5
        tp += int(np.sum(flagged & mem))
        fp += int(np.sum(flagged & ~mem))
        pos += int(mem.sum())
        neg += int((~mem).sum())
    if skipped:
        log.warning("%d points lacked shadows in one arm and were skipped", skipped)
    if pos == 0 or neg == 0:
        raise InvalidArgumentError("targets need both members and non-members")
    tpr, fpr = tp / pos, fp / neg
    return AttackReport(
        "sample-threshold", tpr - fpr, [(0.0, 0.0), (fpr, tpr), (1.0, 1.0)], np.array(thresholds),
        {"points": len(thresholds) - skipped, "skipped": skipped, "members": pos, "nonmembers": neg})


def sample_threshold_from_matrix(losses, membership, n_shadow):
    """Run the per-point attack on a (models x points) loss matrix.

    The first ``n_shadow`` rows calibrate, the remaining rows are attacked.
    """
    losses = np.asarray(losses, dtype=float)
    membership = np.asarray(membership, dtype=bool)
    sl, sm = losses[:n_shadow], membership[:n_shadow]
    tl, tm = losses[n_shadow:], membership[n_shadow:]
    shadows = [(sl[sm[:, j], j], sl[~sm[:, j], j]) for j in range(losses.shape[1])]
    targets = [np.column_stack([tl[:, j], tm[:, j]]) for j in range(losses.shape[1])]
    return attack_sample_threshold(shadows, targets)


def attack_lrt_histogram(outputs_member, outputs_nonmember, bin_width):
    """Histogram likelihood-ratio attack: flag bins where members are more frequent."""
    if not bin_width > 0:
        raise InvalidArgumentError("bin_width must be positive")
    a = _as_array(outputs_member, "outputs_member")
    b = _as_array(outputs_nonmember, "outputs_nonmember")
    ia = np.floor(a / bin_width).astype(np.int64)
    ib = np.floor(b / bin_width).astype(np.int64)
    bins, inv = np.unique(np.concatenate([ia, ib]), return_inverse=True)
    q1 = np.bincount(inv[:a.size], minlength=bins.size) / a.size
    q0 = np.bincount(inv[a.size:], minlength=bins.size) / b.size
    adv = float(np.maximum(q1 - q0, 0.0).sum())
    # ROC of the likelihood-ratio ordering of bins
    ratio = np.where(q0 > 0, q1 / np.where(q0 > 0, q0, 1.0), np.inf)
    order = np.argsort(-ratio, kind="stable")
    tpr = np.concatenate([[0.0], np.cumsum(q1[order])])
    fpr = np.concatenate([[0.0], np.cumsum(q0[order])])
    flagged = bins[q1 > q0] * bin_width
    return AttackReport(
        "lrt-histogram", min(adv, 1.0), list(zip(np.clip(fpr, 0, 1).tolist(), np.clip(tpr, 0, 1).tolist())),
        flagged, {"members": a.size, "nonmembers": b.size, "bins": int(bins.size)})
