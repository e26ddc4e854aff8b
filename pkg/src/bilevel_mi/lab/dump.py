"""CSV output helpers shared by the lab and the command line."""

import csv

from .. import __version__


def header_lines(config, seed=None):
    lines = [f"# bilevel_mi {__version__}"]
    if seed is not None:
        lines.append(f"# seed={seed}")
    lines.extend(f"# {k}={v}" for k, v in sorted(config.items()))
    return lines


def write_csv(path, columns, rows, config, seed=None):
    """Write ``rows`` under a comment header holding the resolved configuration."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines(config, seed):
            fh.write(line + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else v


def loo_rows(result, seed):
    """Raw leave-one-out dump: (trial, arm, output, loss, seed) per probe."""
    from ..scalar import logistic_loss

    rows = []
    for j, probe in enumerate(result.setup.probes):
        for arm, outs in (("train", result.train_outputs[j]), ("test", result.test_outputs[j])):
            losses = logistic_loss(probe.y, outs)
            for t, o, l in zip(result.trial_ids, outs, losses):
                rows.append((int(t), f"{arm}:{j}", float(o), float(l), seed))
    return rows
