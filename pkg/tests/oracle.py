"""Independent, deliberately naive reference implementations used as test
oracles. Nothing here shares code with the engine's incremental paths."""
from fractions import Fraction


def window_length(kind, k, table, t):
    if kind == "full":
        return t - 1
    if kind == "half":
        return -(-t // 2)
    if kind == "constant":
        return min(k, t - 1)
    return table[t - 2] if t - 2 < len(table) else table[-1]


def naive_maxbid_bid(v, window, floor, t, own, signals):
    """Bid at round t from the full own-bid and signal history (lists of t-1)."""
    if t == 1 or v == 1:
        return 1
    phi = window_length(window.kind, window.k, window.table, t)
    lo = max(1, t - phi)
    qualifying = [signals[j - 1][0] for j in range(lo, t)
                  if own[j - 1] < signals[j - 1][0] or signals[j - 1][1] > 1]
    if not qualifying:
        return min(max(own[-1] - 1, floor), v - 1)
    return min(max(qualifying) + 1, v - 1)


def naive_play(values, players, horizon, corrupt=None):
    """Play of MaxBid / sequence players under the winning-bid monitor.

    ``players[i]`` is ("maxbid", window, floor) or ("seq", prefix, cycle).
    ``corrupt`` maps (round, player) to a replacement signal.
    """
    n = len(values)
    profiles = []
    seen = [[] for _ in range(n)]  # signals per player
    for t in range(1, horizon + 1):
        bids = []
        for i, spec in enumerate(players):
            if spec[0] == "maxbid":
                own = [p[i] for p in profiles]
                bids.append(naive_maxbid_bid(values[i], spec[1], spec[2], t, own, seen[i]))
            else:
                prefix, cycle = spec[1], spec[2]
                k = t - 1
                bids.append(prefix[k] if k < len(prefix) else cycle[(k - len(prefix)) % len(cycle)])
        profiles.append(tuple(bids))
        top = max(bids)
        for i in range(n):
            sig = (top, bids.count(top))
            if corrupt and (t, i) in corrupt:
                sig = corrupt[(t, i)]
            seen[i].append(sig)
    return profiles


def payoffs(values, profile):
    top = max(profile)
    count = profile.count(top)
    return tuple(Fraction(v - top, count) if b == top else Fraction(0) for v, b in zip(values, profile))
