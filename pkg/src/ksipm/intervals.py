"""Good and bad intervals of the L2 trajectory.

A trace ``y(t) = ||rho - rho_M||^2`` is cut at dyadic levels. Starting from an
anchor time where ``y = 2^N``, the next anchor is the first later time at
which ``y`` reaches ``2^(N+1)`` (a good interval of level ``N``) or ``2^(N-1)``
(a bad interval of level ``N-1``). The first anchor is the last time
``y = 2^N0`` before ``y`` first reaches ``2^(N0+1)``. Reaching a level means
touching it: a sample exactly on the level counts.

The trace is the piecewise-linear interpolant of the samples. When it drops
to ``2^(N0-1)`` the classifier goes back to looking for a first anchor.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass, field

GOOD = "good"
BAD = "bad"
UP = "up"
DOWN = "down"

INTERVAL_COLUMNS = ("level", "kind", "t_start", "t_end", "l2_start", "l2_end", "length")


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class ClassifierConfig:
    N0: int = 4
    c1_g_over_N: float | None = None
    C1_budget: float | None = None

    def __post_init__(self):
        if int(self.N0) != self.N0 or self.N0 < 1:
            raise ValueError(f"N0 must be an integer >= 1, got {self.N0}")


@dataclass(frozen=True)
class LevelCrossing:
    t: float
    value: float
    direction: str


@dataclass(frozen=True)
class Interval:
    level: int
    kind: str
    t_start: float
    t_end: float
    l2_start: float
    l2_end: float
    tilde_integral: float | None = None

    @property
    def length(self) -> float:
        return self.t_end - self.t_start


def _hit(ta, ya, tb, yb, level):
    """First time in ``(ta, tb]`` where the segment reaches ``level``, or None."""
    if ya < level <= yb or ya > level >= yb:
        if yb == level:
            return tb
        return ta + (level - ya) / (yb - ya) * (tb - ta)
    return None


def _last_at(ta, ya, tb, yb, level):
    """Last time in ``[ta, tb]`` where the segment equals ``level``, or None."""
    if yb == level:
        return tb
    if (ya - level) * (yb - level) < 0:
        return ta + (level - ya) / (yb - ya) * (tb - ta)
    if ya == level:
        return ta
    return None


def _interp(ta, ya, tb, yb, t):
    if t == tb:
        return yb
    if t == ta:
        return ya
    return ya + (yb - ya) * (t - ta) / (tb - ta)


class IntervalClassifier:
    """Streaming classifier; feed samples with ``ingest``."""

    def __init__(self, config: ClassifierConfig = ClassifierConfig()):
        self.config = config
        self.N0 = int(config.N0)
        self.intervals: list[Interval] = []
        self.crossings: list[LevelCrossing] = []
        self.level: int | None = None  # anchor level, None before the first anchor
        self.t_anchor: float | None = None
        self._anchor_cum = 0.0
        self._last_at: float | None = None
        self._last_at_cum = 0.0
        self._prev = None  # (t, y, tilde, cumulative tilde integral)

    @property
    def anchored(self) -> bool:
        return self.level is not None

    def ingest(self, t: float, l2sq: float, l2sq_tilde: float | None = None) -> list[Interval]:
        t = float(t)
        y = float(l2sq)
        if not (math.isfinite(t) and math.isfinite(y)):
            raise TraceError(f"non-finite sample ({t}, {y})")
        tilde = None if l2sq_tilde is None else float(l2sq_tilde)
        if self._prev is None:
            self._prev = (t, y, tilde, 0.0)
            # a first sample exactly on the base level is an attainment
            if y == 2.0**self.N0:
                self._last_at, self._last_at_cum = t, 0.0
            return []
        ta, ya, za, ca = self._prev
        if not t > ta:
            raise TraceError(f"times must increase strictly: {t} after {ta}")

        def cum(s):
            if za is None or tilde is None:
                return 0.0
            zs = _interp(ta, za, t, tilde, s)
            return ca + 0.5 * (za + zs) * (s - ta)

        has_tilde = za is not None and tilde is not None
        out = []
        cur = ta
        while True:
            ycur = _interp(ta, ya, t, y, cur)
            if self.level is None:
                base, top = 2.0**self.N0, 2.0 ** (self.N0 + 1)
                hit = _hit(cur, ycur, t, y, top)
                if hit is None:
                    at = _last_at(cur, ycur, t, y, base)
                    if at is not None:
                        self._last_at, self._last_at_cum = at, cum(at)
                    break
                # the segment is monotone, so a base attainment on it precedes the hit
                at = _last_at(cur, ycur, hit, top, base)
                if at is not None:
                    self._last_at, self._last_at_cum = at, cum(at)
                cur = hit
                if self._last_at is None:
                    # reached the top without sitting on the base level first;
                    # a monotone segment cannot return to either level
                    break
                anchor = self._last_at
                self.crossings.append(LevelCrossing(anchor, base, UP))
                self.crossings.append(LevelCrossing(hit, top, UP))
                out.append(self._emit(self.N0, GOOD, anchor, hit, base, top, self._last_at_cum, cum(hit), has_tilde))
                self.level = self.N0 + 1
                self.t_anchor, self._anchor_cum = hit, cum(hit)
                self._last_at = None
                continue
            N = self.level
            up, down = 2.0 ** (N + 1), 2.0 ** (N - 1)
            hu = _hit(cur, ycur, t, y, up)
            hd = _hit(cur, ycur, t, y, down)
            if hu is None and hd is None:
                break
            if hd is None or (hu is not None and hu <= hd):
                out.append(self._emit(N, GOOD, self.t_anchor, hu, 2.0**N, up, self._anchor_cum, cum(hu), has_tilde))
                self.crossings.append(LevelCrossing(hu, up, UP))
                self.level = N + 1
                self.t_anchor, self._anchor_cum = hu, cum(hu)
                cur = hu
            else:
                out.append(self._emit(N - 1, BAD, self.t_anchor, hd, 2.0**N, down, self._anchor_cum, cum(hd), has_tilde))
                self.crossings.append(LevelCrossing(hd, down, DOWN))
                cur = hd
                if N - 1 < self.N0:
                    self.level = None
                    self.t_anchor = None
                    self._last_at = None
                else:
                    self.level = N - 1
                    self.t_anchor, self._anchor_cum = hd, cum(hd)
        self._prev = (t, y, tilde, cum(t))
        return out

    def _emit(self, level, kind, t0, t1, y0, y1, c0, c1, has_tilde):
        iv = Interval(level, kind, t0, t1, y0, y1, (c1 - c0) if has_tilde else None)
        self.intervals.append(iv)
        return iv

    @property
    def end_level(self) -> int:
        """Anchor level at the end of the trace (``N0 - 1`` before any anchor)."""
        return self.level if self.level is not None else self.N0 - 1


def classify(times, values, config: ClassifierConfig = ClassifierConfig(), tilde=None) -> IntervalClassifier:
    clf = IntervalClassifier(config)
    if tilde is None:
        for t, y in zip(times, values):
            clf.ingest(t, y)
    else:
        for t, y, z in zip(times, values, tilde):
            clf.ingest(t, y, z)
    return clf


# -- brute-force reference ----------------------------------------------------------


def _roots(times, values, level):
    """All times where the piecewise-linear trace equals ``level``, sorted."""
    out = []
    for i in range(len(times) - 1):
        ta, ya, tb, yb = times[i], values[i], times[i + 1], values[i + 1]
        if ya == level:
            out.append(ta)
        if (ya - level) * (yb - level) < 0:
            out.append(ta + (level - ya) / (yb - ya) * (tb - ta))
    if values and values[-1] == level:
        out.append(times[-1])
    return sorted(set(out))


def brute_force_intervals(times, values, N0: int) -> list[tuple]:
    """Direct evaluation of the inductive definition from global level-set roots.

    Returns ``(level, kind, t_start, t_end)`` tuples.
    """
    times = [float(t) for t in times]
    values = [float(v) for v in values]
    cache = {}

    def roots(m):
        if m not in cache:
            cache[m] = _roots(times, values, 2.0**m)
        return cache[m]

    def first_after(m, t, strict=True):
        for r in roots(m):
            if r > t or (not strict and r >= t):
                return r
        return None

    out = []
    t_reset = -math.inf
    N = None
    t = None
    while True:
        if N is None:
            start = first_after(N0, t_reset, strict=False)
            if start is None:
                return out
            top = first_after(N0 + 1, start)
            if top is None:
                return out
            anchor = max(r for r in roots(N0) if r < top)
            out.append((N0, GOOD, anchor, top))
            N, t = N0 + 1, top
            continue
        tu = first_after(N + 1, t)
        td = first_after(N - 1, t)
        if tu is None and td is None:
            return out
        if td is None or (tu is not None and tu <= td):
            out.append((N, GOOD, t, tu))
            N, t = N + 1, tu
        else:
            out.append((N - 1, BAD, t, td))
            if N - 1 < N0:
                N, t_reset = None, td
            else:
                N, t = N - 1, td


# -- summaries -----------------------------------------------------------------------


def summarize(intervals, trace_end_level: int | None = None, N0: int | None = None) -> dict:
    """Per-level counts, the exceed-by-one and alternation checks, shortest good intervals.

    ``trace_end_level`` is the anchor level at the end of the trace; levels
    from ``N0`` up to one below it must satisfy ``goods = bads + 1``. When it
    is omitted it is inferred from the last interval.
    """
    intervals = list(intervals)
    by_level = defaultdict(list)
    for iv in intervals:
        by_level[iv.level].append(iv.kind)
    if N0 is None:
        goods = [iv.level for iv in intervals if iv.kind == GOOD]
        N0 = min(goods) if goods else 0
    if trace_end_level is None:
        if not intervals:
            trace_end_level = N0 - 1
        else:
            last = intervals[-1]
            trace_end_level = last.level + 1 if last.kind == GOOD else last.level
            if last.kind == BAD and last.level < N0:
                trace_end_level = N0 - 1
    counts = {}
    ok = True
    failures = []
    for level in sorted(by_level):
        seq = by_level[level]
        g = seq.count(GOOD)
        b = seq.count(BAD)
        counts[level] = {"good": g, "bad": b}
        if level < N0:
            continue
        alternates = all(k == (GOOD if i % 2 == 0 else BAD) for i, k in enumerate(seq))
        if not alternates:
            ok = False
            failures.append((level, "alternation"))
        if level < trace_end_level and g != b + 1:
            ok = False
            failures.append((level, "count"))
    for level in range(N0, trace_end_level):
        if level not in by_level:
            ok = False
            failures.append((level, "missing"))
    min_good = {}
    for iv in intervals:
        if iv.kind == GOOD:
            min_good[iv.level] = min(min_good.get(iv.level, math.inf), iv.length)
    return {
        "counts": counts,
        "intertwining_ok": ok,
        "failures": failures,
        "min_good_length": min_good,
        "trace_end_level": trace_end_level,
    }


def budget_ledger(intervals, g: float, config: ClassifierConfig, mass: float | None = None) -> dict:
    """Charge ``-c1 g / N`` per good and ``+C1 2^(-N/3)`` per bad interval of level ``N``."""
    c1 = config.c1_g_over_N or 0.0
    C1 = config.C1_budget or 0.0
    per_level = defaultdict(float)
    total = 0.0
    for iv in intervals:
        if iv.kind == GOOD:
            d = -c1 * g / iv.level
        else:
            d = C1 * 2.0 ** (-iv.level / 3.0)
        per_level[iv.level] += d
        total += d
    out = {"cumulative_drop": total, "per_level": dict(per_level)}
    if mass is not None:
        cap = math.pi * mass
        out["budget_cap"] = cap
        out["exceeds_cap"] = -total > cap
    return out


def write_intervals_csv(intervals, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(INTERVAL_COLUMNS)
        for iv in intervals:
            w.writerow([iv.level, iv.kind, repr(iv.t_start), repr(iv.t_end),
                        repr(iv.l2_start), repr(iv.l2_end), repr(iv.length)])


def read_intervals_csv(path) -> list[Interval]:
    out = []
    with open(path, newline="") as fh:
        r = csv.DictReader(fh)
        for row in r:
            out.append(Interval(int(row["level"]), row["kind"], float(row["t_start"]), float(row["t_end"]),
                                float(row["l2_start"]), float(row["l2_end"])))
    return out
