"""Data-driven tightening of parameter bounds and of the unknown-drift bounds.

For one control channel the plant reads

    y = xdot_c - f_c(x) - g_c(x) u = f_u,c(x) + theta^T phi(x) + lambda^T (psi(x) u)

so every sample gives an interval equation that is swept entry by entry.
A first pass over all samples tightens ``theta`` and the pointwise ``f_u``
intervals; a second pass tightens ``lambda`` using the final ``theta`` box.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .interval import EMPTY, Interval, IntervalRowVector, intersect, interval_sum
from .model import ConfigurationError, UncertainSystem, UncertaintyPrior

# bridge gaps of this size between intervals that agree up to round-off
INTERSECT_TOL = 1e-9


class DataInconsistent(ValueError):
    """An intersection came out empty: the data contradict the priors or ``L``."""

    def __init__(self, index: int, stage: str, channel: int = 0):
        super().__init__(f"data inconsistent at sample {index} (channel {channel}): empty {stage}")
        self.index = index
        self.stage = stage
        self.channel = channel


@dataclass
class Dataset:
    """Samples ``(x, xdot, u)`` with optional time stamps, one row each."""

    x: np.ndarray
    xdot: np.ndarray
    u: np.ndarray
    t: np.ndarray | None = None

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=float))
        self.xdot = np.atleast_2d(np.asarray(self.xdot, dtype=float))
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))
        n = len(self.x) if self.x.size else 0
        if self.t is None:
            self.t = np.arange(n, dtype=float)
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        if not (len(self.xdot) == len(self.u) == len(self.t) == n) and n:
            raise ConfigurationError("dataset columns have different lengths")

    def __len__(self) -> int:
        return 0 if self.x.size == 0 else len(self.x)

    @classmethod
    def empty(cls, dim: int, n: int) -> Dataset:
        return cls(np.zeros((0, dim)), np.zeros((0, dim)), np.zeros((0, n)), np.zeros(0))

    def check_dims(self, system: UncertainSystem) -> None:
        if len(self) == 0:
            return
        if self.x.shape[1] != system.dim or self.xdot.shape[1] != system.dim or self.u.shape[1] != system.n:
            raise ConfigurationError(
                f"dataset has x{self.x.shape[1]}/xdot{self.xdot.shape[1]}/u{self.u.shape[1]} columns; "
                f"scenario needs x{system.dim}/xdot{system.dim}/u{system.n}")

    def prefix(self, k: int) -> Dataset:
        return Dataset(self.x[:k], self.xdot[:k], self.u[:k], self.t[:k])

    def reordered(self, order: Sequence[int]) -> Dataset:
        idx = np.asarray(order, dtype=int)
        return Dataset(self.x[idx], self.xdot[idx], self.u[idx], self.t[idx])


def write_dataset_csv(dataset: Dataset, path) -> None:
    dim = dataset.x.shape[1]
    n = dataset.u.shape[1]
    header = (["t"] + [f"x_{k + 1}" for k in range(dim)] + [f"xdot_{k + 1}" for k in range(dim)]
              + [f"u_{k + 1}" for k in range(n)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(dataset)):
            row = [dataset.t[k], *dataset.x[k], *dataset.xdot[k], *dataset.u[k]]
            w.writerow([repr(float(v)) for v in row])


def read_dataset_csv(path, dim: int, n: int) -> Dataset:
    """Read a dataset file; columns are matched by header name."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigurationError(f"{path}: empty dataset file (no header)")
    header = [c.strip() for c in rows[0]]
    want_x = [f"x_{k + 1}" for k in range(dim)]
    want_xd = [f"xdot_{k + 1}" for k in range(dim)]
    want_u = [f"u_{k + 1}" for k in range(n)]
    missing = [c for c in want_x + want_xd + want_u if c not in header]
    extra = [c for c in header if c not in want_x + want_xd + want_u + ["t"]]
    if missing or extra:
        raise ConfigurationError(f"{path}: dataset columns do not match the scenario "
                                 f"(missing {missing}, unexpected {extra})")
    col = {name: k for k, name in enumerate(header)}
    body = [r for r in rows[1:] if r]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    except ValueError as exc:
        raise ConfigurationError(f"{path}: non-numeric entry ({exc})") from None
    if not np.all(np.isfinite(data)):
        raise ConfigurationError(f"{path}: non-finite entry")
    t = data[:, col["t"]] if "t" in col else None
    return Dataset(data[:, [col[c] for c in want_x]], data[:, [col[c] for c in want_xd]],
                   data[:, [col[c] for c in want_u]], t)


# ----------------------------------------------------------------------------
# scalar-channel recursion
# ----------------------------------------------------------------------------

@dataclass
class ChannelBounds:
    """Result of the recursion for one channel."""

    channel: int
    P0: IntervalRowVector
    Q0: IntervalRowVector
    P: IntervalRowVector
    Q: IntervalRowVector
    F_records: list            # (state, Interval) for x^0 .. x^N
    lipschitz: float
    fu_lo: Callable | None = None
    fu_hi: Callable | None = None
    P_history: list = field(default_factory=list)
    Q_history: list = field(default_factory=list)

    def __post_init__(self):
        self._xs = np.array([np.asarray(r[0], dtype=float).reshape(-1) for r in self.F_records]) \
            if self.F_records else np.zeros((0, 0))
        self._flo = np.array([r[1].lo for r in self.F_records])
        self._fhi = np.array([r[1].hi for r in self.F_records])

    def envelope(self, x) -> Interval:
        """Interval containing the unknown drift of this channel at ``x``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        lo, hi = -math.inf, math.inf
        if self.fu_lo is not None:
            lo, hi = float(self.fu_lo(x)), float(self.fu_hi(x))
        if len(self._flo):
            d = np.sqrt(np.sum((self._xs - x) ** 2, axis=1)) * self.lipschitz
            lo = max(lo, float(np.max(self._flo - d)))
            hi = min(hi, float(np.min(self._fhi + d)))
        if lo <= hi:
            return Interval(lo, hi)
        if lo - hi <= INTERSECT_TOL:
            m = 0.5 * (lo + hi)
            return Interval(m, m)
        raise DataInconsistent(-1, f"f_u envelope at x={x.tolist()}", self.channel)


def _cap(a, b, index, stage, channel):
    out = intersect(a, b, INTERSECT_TOL)
    if out is EMPTY:
        raise DataInconsistent(index, stage, channel)
    return out


def _row_dot(row: Sequence[Interval], v: Sequence[float], start: int = 0) -> Interval:
    return interval_sum(row[k] * float(v[k]) for k in range(start, len(row)))


def refine_channel(xs, ys, phi_rows, psiu_rows, P0: IntervalRowVector, Q0: IntervalRowVector,
                   fu_lo: Callable, fu_hi: Callable, lipschitz: float, channel: int = 0) -> ChannelBounds:
    """Tighten one channel from ``N`` samples.

    ``ys[i]`` is the residual ``xdot - f - g u`` of the channel,
    ``phi_rows[i]`` the drift regressor and ``psiu_rows[i]`` the entrywise
    product of the input regressor with the input. ``fu_lo/fu_hi`` return
    the prior bounds of this channel's unknown drift. The first sample also
    seeds ``x^0``.
    """
    N = len(ys)
    L = float(lipschitz)
    if L < 0:
        raise ConfigurationError("Lipschitz constant must be nonnegative")
    P = list(P0)
    Q = list(Q0)
    P_hist, Q_hist = [IntervalRowVector(P)], [IntervalRowVector(Q)]
    if N == 0:
        return ChannelBounds(channel, P0, Q0, P0, Q0, [], L, fu_lo, fu_hi, P_hist, Q_hist)

    xs = [np.asarray(x, dtype=float).reshape(-1) for x in xs]
    phis = [np.asarray(v, dtype=float).reshape(-1) for v in phi_rows]
    psius = [np.asarray(v, dtype=float).reshape(-1) for v in psiu_rows]
    for v in phis:
        if v.size != len(P0):
            raise ConfigurationError(f"regressor length {v.size} does not match {len(P0)} theta bounds")
    for v in psius:
        if v.size != len(Q0):
            raise ConfigurationError(f"input regressor length {v.size} does not match {len(Q0)} lambda bounds")

    F = [Interval(float(fu_lo(xs[0])), float(fu_hi(xs[0])))]
    Fx = [xs[0]]

    # first pass: f_u intervals and theta
    for i in range(N):
        x, y, phi, psiu = xs[i], float(ys[i]), phis[i], psius[i]
        Fi = _cap(Interval(float(fu_lo(x)), float(fu_hi(x))),
                  y - _row_dot(P0, phi) - _row_dot(Q0, psiu), i, "f_u bound", channel)
        for xj, Fj in zip(Fx, F):
            r = L * math.sqrt(float(np.sum((x - xj) ** 2)))
            Fi = _cap(Fi, Interval(Fj.lo - r, Fj.hi + r), i, "f_u Lipschitz bound", channel)
        F.append(Fi)
        Fx.append(x)

        prev = P
        v = _cap(y - Fi - _row_dot(Q0, psiu), _row_dot(prev, phi), i, "theta residual", channel)
        new = list(prev)
        p = len(prev)
        for r in range(p):
            tail = _row_dot(prev, phi, r + 1) if r + 1 < p else Interval(0.0, 0.0)
            term = prev[r] * float(phi[r])
            if phi[r] != 0.0:
                cand = _cap(v - tail, term, i, f"theta[{r}] update", channel) / float(phi[r])
                new[r] = _cap(cand, prev[r], i, f"theta[{r}] update", channel)
            v = _cap(v - term, tail, i, f"theta sweep step {r}", channel)
        P = new
        P_hist.append(IntervalRowVector(P))

    # second pass: lambda, with the final theta box
    PN = list(P)
    for i in range(N):
        y, phi, psiu = float(ys[i]), phis[i], psius[i]
        Fi = F[i + 1]
        prev = Q
        w = _cap(y - Fi - _row_dot(PN, phi), _row_dot(prev, psiu), i, "lambda residual", channel)
        new = list(prev)
        q = len(prev)
        for s in range(q):
            tail = _row_dot(prev, psiu, s + 1) if s + 1 < q else Interval(0.0, 0.0)
            if psiu[s] != 0.0:
                cand = _cap(w - tail, prev[s] * float(psiu[s]), i, f"lambda[{s}] update", channel) / float(psiu[s])
                new[s] = _cap(cand, prev[s], i, f"lambda[{s}] update", channel)
            w = _cap(w - new[s] * float(psiu[s]), tail, i, f"lambda sweep step {s}", channel)
        Q = new
        Q_hist.append(IntervalRowVector(Q))

    records = list(zip(Fx, F))
    return ChannelBounds(channel, P0, Q0, IntervalRowVector(P), IntervalRowVector(Q), records, L,
                         fu_lo, fu_hi, P_hist, Q_hist)


# ----------------------------------------------------------------------------
# system-level wrappers
# ----------------------------------------------------------------------------

def channel_rows(system: UncertainSystem, dataset: Dataset, channel: int):
    """Residuals, drift regressors and input-regressor products of one channel."""
    c = system.m + channel
    ys, phis, psius = [], [], []
    for x, xd, u in zip(dataset.x, dataset.xdot, dataset.u):
        gx = np.asarray(system.g(x), dtype=float)
        psis = system.psi(x)
        if system.diagonal:
            ys.append(xd[c] - system.f(x)[c] - gx[channel] * u[channel])
            psius.append(np.asarray(psis[channel], dtype=float) * u[channel])
        else:
            gx = gx.reshape(system.n, system.n)
            ys.append(xd[c] - system.f(x)[c] - float(gx[channel] @ u))
            psius.append(np.concatenate([np.asarray(psis[channel][j], dtype=float) * u[j]
                                         for j in range(system.n)]))
        phis.append(np.asarray(system.phi(x)[channel], dtype=float))
    return ys, phis, psius


def prior_rows(system: UncertainSystem, prior: UncertaintyPrior, channel: int):
    P0 = IntervalRowVector.from_bounds(prior.theta_lo[channel], prior.theta_hi[channel])
    if system.diagonal:
        Q0 = IntervalRowVector.from_bounds(prior.lambda_lo[channel], prior.lambda_hi[channel])
    else:
        lo = np.concatenate([prior.lambda_lo[channel][j] for j in range(system.n)])
        hi = np.concatenate([prior.lambda_hi[channel][j] for j in range(system.n)])
        Q0 = IntervalRowVector.from_bounds(lo, hi)
    return P0, Q0


def refine(dataset: Dataset, system: UncertainSystem, prior: UncertaintyPrior,
           channel: int = 0) -> ChannelBounds:
    """Run the recursion for one channel of a system."""
    dataset.check_dims(system)
    c = system.m + channel
    P0, Q0 = prior_rows(system, prior, channel)
    ys, phis, psius = channel_rows(system, dataset, channel)
    return refine_channel(dataset.x, ys, phis, psius, P0, Q0,
                          lambda x: prior.f_u_lo(x)[c], lambda x: prior.f_u_hi(x)[c],
                          prior.lipschitz_for(channel), channel)


def refine_all(dataset: Dataset, system: UncertainSystem, prior: UncertaintyPrior) -> list[ChannelBounds]:
    return [refine(dataset, system, prior, i) for i in range(system.n)]


def f_u_envelope(bounds: ChannelBounds, x) -> Interval:
    """Envelope of the unknown drift at ``x``: the Lipschitz cones around the
    sample intervals, intersected with the prior bounds."""
    return bounds.envelope(x)


class _EnvelopeBounds:
    """Prior f_u bounds with the controlled-channel entries replaced by envelopes."""

    def __init__(self, system: UncertainSystem, prior: UncertaintyPrior, channels: list[ChannelBounds]):
        self.m = system.m
        self.prior = prior
        self.channels = channels
        self._key = None
        self._val = None

    def _eval(self, x):
        x = np.asarray(x, dtype=float)
        key = x.tobytes()
        if key != self._key:
            lo = np.array(self.prior.f_u_lo(x), dtype=float)
            hi = np.array(self.prior.f_u_hi(x), dtype=float)
            for cb in self.channels:
                iv = cb.envelope(x)
                lo[self.m + cb.channel] = iv.lo
                hi[self.m + cb.channel] = iv.hi
            self._key, self._val = key, (lo, hi)
        return self._val

    def lo(self, x):
        return self._eval(x)[0]

    def hi(self, x):
        return self._eval(x)[1]


def tightened_prior(system: UncertainSystem, prior: UncertaintyPrior,
                    channels: list[ChannelBounds]) -> UncertaintyPrior:
    theta_lo = [np.array(cb.P.lo) for cb in channels]
    theta_hi = [np.array(cb.P.hi) for cb in channels]
    if system.diagonal:
        lam_lo = [np.array(cb.Q.lo) for cb in channels]
        lam_hi = [np.array(cb.Q.hi) for cb in channels]
    else:
        lam_lo, lam_hi = [], []
        for i, cb in enumerate(channels):
            sizes = [system.q[i][j] for j in range(system.n)]
            cuts = np.cumsum(sizes)[:-1]
            lam_lo.append(np.split(np.array(cb.Q.lo), cuts))
            lam_hi.append(np.split(np.array(cb.Q.hi), cuts))
    env = _EnvelopeBounds(system, prior, channels)
    return UncertaintyPrior(theta_lo, theta_hi, lam_lo, lam_hi, env.lo, env.hi, prior.lipschitz)


def _midpoints(lo, hi):
    return [np.asarray(0.5 * (np.asarray(a) + np.asarray(b)), dtype=float) for a, b in zip(lo, hi)]


def rebuild_scenario(scenario, channels: list[ChannelBounds], gain_overrides: dict | None = None):
    """Scenario whose controller uses the tightened bounds.

    Nominal values move to the interval midpoints, ``mu_bar``/``nu_bar``
    are recomputed from the new boxes (earlier overrides are dropped) and
    the unknown-drift bounds become the data envelope.
    """
    from .controller import GainConfig, NominalSelection  # local: avoids import cycle

    system = scenario.system
    if system.diagonal:
        for cb in channels:
            for s, iv in enumerate(cb.Q):
                if len(cb.Q) == 1 and iv.lo <= 0.0 <= iv.hi:
                    raise ConfigurationError(
                        f"tightened lambda interval of channel {cb.channel} is [{iv.lo:g}, {iv.hi:g}], "
                        "which contains 0: the input gain lower bound b is no longer certifiable")
    prior = tightened_prior(system, scenario.prior, channels)
    theta0 = _midpoints(prior.theta_lo, prior.theta_hi)
    if system.diagonal:
        lambda0 = _midpoints(prior.lambda_lo, prior.lambda_hi)
    else:
        lambda0 = [_midpoints(lo_row, hi_row) for lo_row, hi_row in zip(prior.lambda_lo, prior.lambda_hi)]
    nominal = NominalSelection(theta0, lambda0)
    gains = scenario.gains
    if gain_overrides:
        fields = {f.name: getattr(gains, f.name) for f in dataclasses.fields(gains)}
        unknown = set(gain_overrides) - set(fields)
        if unknown:
            raise ConfigurationError(f"unknown gain override(s): {sorted(unknown)}")
        fields.update(gain_overrides)
        gains = GainConfig(**fields)
    return dataclasses.replace(scenario, prior=prior, nominal=nominal, gains=gains,
                               name=scenario.name + "+data")


def bounds_report(channels: list[ChannelBounds]) -> dict:
    """Structured summary: per-entry prior and tightened bounds, the sample
    intervals of the unknown drift and ``L``."""
    out = []
    for cb in channels:
        def rows(prior_row, row, label):
            items = []
            for k, (a, b) in enumerate(zip(prior_row, row)):
                ratio = b.width / a.width if a.width > 0 else 0.0
                items.append({"entry": f"{label}[{k}]", "prior_lo": a.lo, "prior_hi": a.hi,
                              "lo": b.lo, "hi": b.hi, "width_ratio": ratio})
            return items
        out.append({
            "channel": cb.channel,
            "lipschitz": cb.lipschitz,
            "theta": rows(cb.P0, cb.P, "theta"),
            "lambda": rows(cb.Q0, cb.Q, "lambda"),
            "f_u_samples": [{"x": [float(v) for v in np.atleast_1d(x)], "lo": iv.lo, "hi": iv.hi}
                            for x, iv in cb.F_records],
        })
    return {"channels": out}


def write_bounds_report(channels: list[ChannelBounds], path) -> None:
    with open(path, "w") as fh:
        json.dump(bounds_report(channels), fh, indent=2)
        fh.write("\n")
