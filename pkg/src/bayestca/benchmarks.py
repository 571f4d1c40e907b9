"""Execution benchmarks in basis points, data filters and benchmark correlations.

Benchmarks for one parent order (all signed so that negative = cost to the
trader, with S = +1 for buys and -1 for sells):

    IS     = (arrival - Pbar) / Pbar * S * 1e4
    VWAP   = (P_vwap_interval - Pbar) / Pbar * S * 1e4
    PWP20  = (P_pwp - Pbar) / Pbar * S * 1e4
    Rev5m  = (P_vwap_5min_after_last_fill - P_last_fill) / P_last_fill * S * 1e4

Pbar is the quantity-weighted average fill price.  The PWP window runs from
order start until the tape has printed size / (rate/100) shares, with the
crossing trade included pro-rata.  The reversion window is the 5 minutes
strictly after the last fill, inclusive of the +300 s endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BucketTooSmall, EmptyFills, InvalidPrice, NoTapeData

KINDS = ("IS", "VWAP", "PWP20", "Rev5m")

#: Participation-rate buckets used for the benchmark correlation matrices.
DEFAULT_BUCKETS = ((1.0, 7.0), (7.0, 15.0), (15.0, 25.0), (25.0, 40.0))

REV5M_WINDOW_MS = 300_000


@dataclass(frozen=True)
class Fill:
    """One execution print: epoch-ms timestamp, price per share, share count."""

    timestamp: int
    price: float
    quantity: float

    def __post_init__(self):
        if self.price <= 0:
            raise InvalidPrice(f"fill price must be > 0, got {self.price}")
        if self.quantity <= 0:
            raise ValueError(f"fill quantity must be > 0, got {self.quantity}")


@dataclass(frozen=True)
class TapeTrade:
    """One market trade on the consolidated tape."""

    timestamp: int
    price: float
    volume: float

    def __post_init__(self):
        if self.price <= 0:
            raise InvalidPrice(f"tape price must be > 0, got {self.price}")
        if self.volume <= 0:
            raise ValueError(f"tape volume must be > 0, got {self.volume}")


@dataclass(frozen=True)
class ExecutionRecord:
    """One fully completed parent placement with its fills and covariates.

    ``side`` is +1 for buys, -1 for sells.  Covariates: ``size_shares`` /
    ``adv_shares`` give X1 (fraction), ``participation_rate_pct`` is X2,
    ``volatility_pct`` (30-day annualized) is X3 and ``spread_bps`` (5-day
    average) is X4.
    """

    order_id: str
    algo_id: str
    side: int
    arrival_price: float
    start_time: int
    end_time: int
    fills: tuple[Fill, ...]
    size_shares: float
    adv_shares: float
    participation_rate_pct: float
    volatility_pct: float
    spread_bps: float

    def __post_init__(self):
        if self.side not in (1, -1):
            raise ValueError(f"side must be +1 (buy) or -1 (sell), got {self.side}")
        if self.arrival_price <= 0:
            raise InvalidPrice("arrival_price must be > 0")
        if self.end_time <= self.start_time:
            raise ValueError("end_time must be after start_time")
        object.__setattr__(self, "fills", tuple(self.fills))
        if not self.fills:
            raise EmptyFills(f"order {self.order_id} has no fills")
        filled = sum(f.quantity for f in self.fills)
        if not np.isclose(filled, self.size_shares, rtol=1e-9, atol=0.0):
            raise ValueError(
                f"order {self.order_id}: fills sum to {filled}, size is {self.size_shares}"
            )
        for name in ("size_shares", "adv_shares", "participation_rate_pct",
                     "volatility_pct", "spread_bps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def duration_ms(self) -> int:
        return self.end_time - self.start_time

    @property
    def x1(self) -> float:
        """Order size as a fraction of ADV."""
        return self.size_shares / self.adv_shares

    @property
    def last_fill(self) -> Fill:
        return max(enumerate(self.fills), key=lambda it: (it[1].timestamp, it[0]))[1]


@dataclass(frozen=True)
class BenchmarkObservation:
    """One regression row: benchmark value y (bps) plus covariates.

    ``duration_ms`` keeps the order duration around for filtering; it is not
    part of the serialized row and may be None for synthetic data.
    """

    y: float
    kind: str
    x1: float
    x2: float
    x3: float
    x4: float
    algo_id: str
    duration_ms: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown benchmark kind {self.kind!r}")


@dataclass(frozen=True)
class FilterConfig:
    """Row filters; defaults are the standard desk cutoffs, all overridable.

    A row survives when its order ran longer than ``min_duration_ms``
    (strictly; unknown durations pass), x1 and x2 sit inside their closed
    ranges, and |y| < cutoff for its kind (strict).
    """

    min_duration_ms: float = 300_000.0
    x1_range: tuple[float, float] = (0.001, 0.2)
    x2_range: tuple[float, float] = (1.0, 40.0)
    cutoffs_bps: dict[str, float] = field(
        default_factory=lambda: {"IS": 500.0, "VWAP": 150.0, "PWP20": 150.0, "Rev5m": 200.0}
    )

    def to_dict(self) -> dict:
        return {
            "min_duration_ms": self.min_duration_ms,
            "x1_range": list(self.x1_range),
            "x2_range": list(self.x2_range),
            "cutoffs_bps": dict(self.cutoffs_bps),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterConfig":
        kw = {}
        if "min_duration_ms" in d:
            kw["min_duration_ms"] = float(d["min_duration_ms"])
        if "x1_range" in d:
            kw["x1_range"] = tuple(float(v) for v in d["x1_range"])
        if "x2_range" in d:
            kw["x2_range"] = tuple(float(v) for v in d["x2_range"])
        if "cutoffs_bps" in d:
            kw["cutoffs_bps"] = {k: float(v) for k, v in d["cutoffs_bps"].items()}
        return cls(**kw)


@dataclass(frozen=True)
class PwpResult:
    """Participation-weighted-price benchmark plus window bookkeeping.

    ``partial`` flags a window cut short because the tape ran out before the
    participation volume target was reached.
    """

    bps: float
    window_price: float
    window_volume: float
    partial: bool


def average_execution_price(fills) -> float:
    """Quantity-weighted mean fill price Pbar."""
    fills = list(fills)
    if not fills:
        raise EmptyFills("cannot average an empty fill list")
    qty = np.array([f.quantity for f in fills], dtype=float)
    px = np.array([f.price for f in fills], dtype=float)
    return float(np.dot(px, qty) / qty.sum())


def is_bps(record: ExecutionRecord) -> float:
    """Implementation shortfall vs the arrival price, signed bps."""
    pbar = average_execution_price(record.fills)
    if pbar <= 0:
        raise InvalidPrice("average execution price must be > 0")
    return (record.arrival_price - pbar) / pbar * record.side * 1e4


def _tape_arrays(tape):
    ts = np.array([t.timestamp for t in tape], dtype=np.int64)
    if np.any(np.diff(ts) < 0):
        raise ValueError("tape must be sorted non-decreasing by timestamp")
    px = np.array([t.price for t in tape], dtype=float)
    vol = np.array([t.volume for t in tape], dtype=float)
    return ts, px, vol


def vwap_bps(record: ExecutionRecord, tape) -> float:
    """Execution vs tape VWAP over [start_time, end_time], signed bps."""
    ts, px, vol = _tape_arrays(tape)
    lo = np.searchsorted(ts, record.start_time, side="left")
    hi = np.searchsorted(ts, record.end_time, side="right")
    if hi <= lo:
        raise NoTapeData(f"no tape trades in the order interval of {record.order_id}")
    w = vol[lo:hi]
    p_vwap = float(np.dot(px[lo:hi], w) / w.sum())
    pbar = average_execution_price(record.fills)
    return (p_vwap - pbar) / pbar * record.side * 1e4


def pwp_bps(record: ExecutionRecord, tape, target_rate: float = 20.0) -> PwpResult:
    """Participation-weighted price benchmark at ``target_rate`` percent.

    The window starts at ``start_time`` and closes once cumulative tape
    volume reaches size / (rate/100); the crossing trade contributes only the
    shares needed to reach the target.  If the tape is exhausted first, the
    value is computed over what is available and flagged ``partial``.
    """
    if not 0 < target_rate <= 100:
        raise ValueError("target_rate must be in (0, 100]")
    ts, px, vol = _tape_arrays(tape)
    lo = np.searchsorted(ts, record.start_time, side="left")
    if lo >= len(ts):
        raise NoTapeData(f"no tape trades after order start of {record.order_id}")
    px, vol = px[lo:], vol[lo:]
    target = record.size_shares / (target_rate / 100.0)
    cum = np.cumsum(vol)
    used = vol.copy()
    if cum[-1] >= target:
        cross = int(np.searchsorted(cum, target, side="left"))
        used = used[: cross + 1]
        used[cross] = target - (cum[cross - 1] if cross else 0.0)
        px = px[: cross + 1]
        partial = False
    else:
        partial = True
    wvol = float(used.sum())
    wprice = float(np.dot(px, used) / wvol)
    pbar = average_execution_price(record.fills)
    value = (wprice - pbar) / pbar * record.side * 1e4
    return PwpResult(bps=value, window_price=wprice, window_volume=wvol, partial=partial)


def rev5m_bps(record: ExecutionRecord, tape) -> float:
    """Post-trade reversion: tape VWAP over the 5 minutes after the last fill.

    The window is (t_last_fill, t_last_fill + 300000] in epoch-ms.  For a buy,
    price decay after the order finishes makes this negative.
    """
    last = record.last_fill
    ts, px, vol = _tape_arrays(tape)
    lo = np.searchsorted(ts, last.timestamp, side="right")
    hi = np.searchsorted(ts, last.timestamp + REV5M_WINDOW_MS, side="right")
    if hi <= lo:
        raise NoTapeData(f"no tape trades in the reversion window of {record.order_id}")
    w = vol[lo:hi]
    p5 = float(np.dot(px[lo:hi], w) / w.sum())
    return (p5 - last.price) / last.price * record.side * 1e4


def observations_from_record(record: ExecutionRecord, tape) -> dict[str, BenchmarkObservation]:
    """All benchmarks available for one record, keyed by kind.

    Benchmarks whose tape window is empty are silently omitted: an order may
    have an IS value but no reversion, and that is not a record rejection.
    """
    out: dict[str, BenchmarkObservation] = {}

    def _obs(kind: str, y: float) -> BenchmarkObservation:
        return BenchmarkObservation(
            y=y, kind=kind, x1=record.x1, x2=record.participation_rate_pct,
            x3=record.volatility_pct, x4=record.spread_bps,
            algo_id=record.algo_id, duration_ms=float(record.duration_ms),
        )

    out["IS"] = _obs("IS", is_bps(record))
    try:
        out["VWAP"] = _obs("VWAP", vwap_bps(record, tape))
    except NoTapeData:
        pass
    try:
        out["PWP20"] = _obs("PWP20", pwp_bps(record, tape).bps)
    except NoTapeData:
        pass
    try:
        out["Rev5m"] = _obs("Rev5m", rev5m_bps(record, tape))
    except NoTapeData:
        pass
    return out


def apply_filters(observations, rules: FilterConfig | None = None) -> list[BenchmarkObservation]:
    """Keep rows passing the duration, covariate-range and cutoff filters."""
    rules = rules or FilterConfig()
    out = []
    for obs in observations:
        if obs.duration_ms is not None and obs.duration_ms <= rules.min_duration_ms:
            continue
        if not rules.x1_range[0] <= obs.x1 <= rules.x1_range[1]:
            continue
        if not rules.x2_range[0] <= obs.x2 <= rules.x2_range[1]:
            continue
        cutoff = rules.cutoffs_bps.get(obs.kind)
        if cutoff is not None and not abs(obs.y) < cutoff:
            continue
        out.append(obs)
    return out


@dataclass(frozen=True)
class BucketCorrelation:
    """Pearson correlation matrix of the four benchmarks in one rate bucket."""

    lo: float
    hi: float
    n_orders: int
    kinds: tuple[str, ...]
    matrix: np.ndarray


def correlation_matrices(order_groups, buckets=DEFAULT_BUCKETS, on_small: str = "raise"):
    """Per-bucket Pearson correlation of (IS, VWAP, PWP20, Rev5m) across orders.

    ``order_groups`` is an iterable of per-order observation lists; only
    orders carrying all four kinds contribute (complete-case).  Buckets are
    [lo, hi) on the participation rate, closed on the right for the last one.
    Buckets with fewer than 3 complete orders raise ``BucketTooSmall`` unless
    ``on_small="skip"``.
    """
    if on_small not in ("raise", "skip"):
        raise ValueError("on_small must be 'raise' or 'skip'")
    rows = []
    for group in order_groups:
        by_kind = {obs.kind: obs for obs in group}
        if set(by_kind) != set(KINDS):
            continue
        rows.append((by_kind["IS"].x2, [by_kind[k].y for k in KINDS]))

    out = []
    last = len(buckets) - 1
    for i, (lo, hi) in enumerate(buckets):
        members = [ys for x2, ys in rows if lo <= x2 < hi or (i == last and x2 == hi)]
        if len(members) < 3:
            if on_small == "raise":
                raise BucketTooSmall(
                    f"bucket [{lo}, {hi}] has {len(members)} complete orders, need >= 3"
                )
            continue
        data = np.array(members, dtype=float)  # orders x 4
        out.append(BucketCorrelation(lo=lo, hi=hi, n_orders=len(members),
                                     kinds=KINDS, matrix=_pearson(data)))
    return out


def _pearson(data: np.ndarray) -> np.ndarray:
    """Pearson matrix with degenerate (zero-variance) columns mapped to 0."""
    centered = data - data.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    ncols = data.shape[1]
    mat = np.eye(ncols)
    for i in range(ncols):
        for j in range(i + 1, ncols):
            if norms[i] == 0.0 or norms[j] == 0.0:
                c = 0.0
            else:
                c = float(np.dot(centered[:, i], centered[:, j]) / (norms[i] * norms[j]))
            mat[i, j] = mat[j, i] = min(1.0, max(-1.0, c))
    return mat
