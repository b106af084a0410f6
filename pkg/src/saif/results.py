"""Solver outputs and the timestamped event trace."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

EVENT_KINDS = ("EPOCH", "ADD", "DEL", "DELTA", "CERT")
TRACE_COLUMNS = ("t_s", "iter", "p_t", "gap", "dual_value", "event")


@dataclass
class TraceRecord:
    t_s: float
    iter: int
    p_t: int
    gap: float
    dual_value: float
    event: str


class Trace:
    """Append-only event log with strictly increasing timestamps."""

    def __init__(self, start=None):
        self.start = time.perf_counter() if start is None else start
        self.records: list[TraceRecord] = []

    def log(self, event, iteration, p_t, gap, dual_value):
        t = time.perf_counter() - self.start
        if self.records and t <= self.records[-1].t_s:
            t = math.nextafter(self.records[-1].t_s, math.inf)
        self.records.append(TraceRecord(t, int(iteration), int(p_t), float(gap),
                                        float(dual_value), event))

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_rows(self):
        return [asdict(r) for r in self.records]


@dataclass
class Counters:
    """Machine-independent work counts.

    ``base_ops`` counts coordinate updates; ``screen_ops`` counts the
    feature inner products spent on dual scaling and screening tests;
    ``weighted_ops`` is their sum, i.e. every length-n column pass.
    """

    base_ops: int = 0
    screen_ops: int = 0
    epochs: int = 0
    outer_iter: int = 0
    n_added: int = 0
    n_deleted: int = 0
    peak_active: int = 0

    @property
    def weighted_ops(self) -> int:
        return self.base_ops + self.screen_ops

    def as_dict(self):
        d = asdict(self)
        d["weighted_ops"] = self.weighted_ops
        return d


@dataclass
class SolveResult:
    """Outcome of one solve.

    Attributes
    ----------
    beta : ndarray of shape (p,)
        Coefficients over the full feature set.
    gap : float
        Final duality gap ``P(beta) - D(theta)``.
    certificate : bool
        Whether the terminal screen of every excluded feature passed with
        the unscaled gap-ball radius.
    theta, radius : final dual point and gap-ball radius used by that screen.
    """

    beta: np.ndarray
    gap: float
    certificate: bool
    primal: float
    dual: float
    theta: np.ndarray
    radius: float
    lam: float
    method: str
    active: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))
    offset_coef: float = 0.0
    counters: Counters = field(default_factory=Counters)
    trace: Trace | None = None
    time_s: float = 0.0
    cum_time_s: float | None = None
    info: dict = field(default_factory=dict)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta)

    def summary(self) -> dict:
        """JSON-ready scalar summary."""
        out = {
            "method": self.method,
            "lambda": self.lam,
            "objective": self.primal,
            "dual_objective": self.dual,
            "gap": self.gap,
            "certificate": bool(self.certificate),
            "support_size": int(self.support.size),
            "active_size": int(self.active.size),
            "offset_coef": self.offset_coef,
            "time_s": self.time_s,
            "counters": self.counters.as_dict(),
        }
        if self.cum_time_s is not None:
            out["cum_time_s"] = self.cum_time_s
        out.update(self.info)
        return out
