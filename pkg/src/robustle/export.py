"""Trace and verdict export: CSV for per-round rows, JSON for summaries."""
from __future__ import annotations

import csv
import io
import json
from fractions import Fraction

from .core import Absorbed, Periodic, PlayTrace, summarize


def trace_rows(trace: PlayTrace):
    n = trace.game.n
    yield (["round"] + [f"bid_{i}" for i in range(1, n + 1)] + ["winning_bid", "winner_count"]
           + [f"payoff_{i}" for i in range(1, n + 1)])
    numeric = trace.game.kind == "auction"
    for t, (profile, payoffs) in enumerate(zip(trace.profiles, trace.payoffs), 1):
        if numeric:
            top = max(profile)
            extra = [top, profile.count(top)]
        else:
            extra = ["", ""]
        yield [t, *profile, *extra, *map(str, payoffs)]


def write_trace_csv(trace: PlayTrace, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerows(trace_rows(trace))


def trace_csv(trace: PlayTrace) -> str:
    buf = io.StringIO()
    write_trace_csv(trace, buf)
    return buf.getvalue()


def read_trace_csv(fh) -> list:
    """Bid profiles of a trace written by ``write_trace_csv`` (auction traces)."""
    reader = csv.reader(fh)
    header = next(reader)
    n = sum(1 for h in header if h.startswith("bid_"))
    return [tuple(int(x) for x in row[1:1 + n]) for row in reader]


def classification_dict(c) -> dict:
    if isinstance(c, Absorbed):
        return {"kind": "absorbed", "profile": list(c.profile), "since_round": c.since_round,
                "certified": c.certified}
    if isinstance(c, Periodic):
        return {"kind": "periodic", "cycle": [list(p) for p in c.cycle],
                "entry_round": c.entry_round, "certified": c.certified}
    return {"kind": "undetermined"}


def summary_dict(trace: PlayTrace, **extra) -> dict:
    out = {
        "state": trace.game.label,
        "horizon": trace.horizon,
        "classification": classification_dict(trace.classification),
        "players": [
            {
                "player": s.player + 1,
                "average": str(s.running_average),
                "longrun": str(s.longrun),
                "exact_longrun": s.exact_longrun,
            }
            for s in summarize(trace)
        ],
    }
    out.update(extra)
    return out


def _default(o):
    if isinstance(o, Fraction):
        return str(o)
    raise TypeError(f"not serialisable: {type(o).__name__}")


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, default=_default) + "\n"
