"""Coupled exclusion-process simulation.

The reference engine (`evolve`) replays materialized clock streams event by
event against any collection of states sharing those clocks -- the basic
coupling.  It is exact and instrumentable (per-event callbacks, trajectory
logs) and meant for moderate sizes; the Monte Carlo drivers at the bottom
call the numba kernels instead and are what the experiment layer uses.

Multi-species states on a window approximate the infinite lattice.  A run is
certified by its guard bands: if no swap relevant to the tracked projections
lands in a band, the windowed trajectory restricted to the core coincides
with the infinite-lattice one (discrepancies would have to cross the band,
and the first crossing is itself a relevant in-band swap).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from asepmix.clocks import RATE_1, RATE_Q, ClockStream
from asepmix.configs import (
    FINITE_BOUNDARY,
    BinaryConfig,
    BoundaryMode,
    Fill,
    Interval,
    Permutation,
)
from asepmix.errors import InvalidInputError, UnsupportedWindowError
from asepmix.mallows import MallowsMeasure, sample_mallows
from asepmix.rng import AUX_STREAM_KEY, mix64

MULTI = "multi"
SINGLE = "single"


@dataclass(frozen=True)
class ProcessState:
    """One coupled process: its kind, current configuration, and clock time.

    ``lattice`` records whether the state lives on its own finite interval
    (boundary edges inert) or is a windowed approximation of the full line;
    the distinction fixes the height-function anchoring of projections.
    """

    kind: str
    state: Permutation | BinaryConfig
    time: float = 0.0
    lattice: str = "interval"

    def __post_init__(self) -> None:
        if self.kind not in (MULTI, SINGLE):
            raise InvalidInputError(f"unknown process kind {self.kind!r}")
        if self.kind == MULTI and not isinstance(self.state, Permutation):
            raise InvalidInputError("multi-species state must be a Permutation")
        if self.kind == SINGLE and not isinstance(self.state, BinaryConfig):
            raise InvalidInputError("single-species state must be a BinaryConfig")

    @property
    def interval(self) -> Interval:
        return self.state.interval


@dataclass(frozen=True)
class WindowSpec:
    """Finite approximation of the line: a core interval plus guard padding."""

    core: Interval
    guard: int

    def __post_init__(self) -> None:
        if self.guard < 0:
            raise InvalidInputError("guard band must be nonnegative")

    @property
    def window(self) -> Interval:
        return Interval(self.core.m - self.guard, self.core.n + self.guard)


def plan_window(activity: Interval, t_end: float, q: float, eps: float = 0.5) -> WindowSpec:
    """Default window policy for line dynamics run to ``t_end``.

    The core pads the initially active region by the hydrodynamic fan
    (1-q) * t plus a fluctuation margin; the guard band is (1+eps) * t + 20,
    beyond the unit-speed bound on disturbance propagation.
    """
    fan = math.ceil((1.0 - q) * t_end)
    margin = 20 + math.ceil(4.0 * math.sqrt((1.0 + q) * t_end))
    core = Interval(activity.m - fan - margin, activity.n + fan + margin)
    guard = math.ceil((1.0 + eps) * t_end) + 20
    return WindowSpec(core, guard)


@dataclass
class GuardMonitor:
    """Flags swaps landing in the guard bands of a windowed state.

    For single-species states every in-band swap counts; for multi-species
    states only swaps that change a projection k in [[species_lo,
    species_hi]] count (the identity tails churn harmlessly otherwise).
    """

    spec: WindowSpec
    species: tuple[int, int] | None = None
    violated: bool = False
    first_time: float | None = None

    def note_swap(self, t: float, x: int, a: int, b: int) -> None:
        w = self.spec.window
        in_band = x < w.m + self.spec.guard or x + 1 > w.n - self.spec.guard
        if not in_band:
            return
        if self.species is not None:
            lo, hi = self.species
            if not (min(a, b) <= hi and max(a, b) >= lo + 1):
                return
        if not self.violated:
            self.violated = True
            self.first_time = t


class StopTime(NamedTuple):
    """A hitting/coupling/absorbing time; ``censored`` when the horizon ran out."""

    time: float
    censored: bool


# ---------------------------------------------------------------------------
# Named initial states
# ---------------------------------------------------------------------------


def make_initial(kind: str, **params) -> ProcessState:
    """Construct one of the named initial states.

    Tags: ``identity`` (interval card shuffling), ``identity-window`` (line
    multi-species), ``permutation``, ``mallows`` (stationary start),
    ``ground-state`` (k particles packed right), ``eta-nm`` (size-m block
    displaced m sites left of its step position), ``eta-star`` (alternating
    block of length 2N between filled and empty tails), ``step``
    (particles at sites <= c).
    """
    try:
        if kind == "identity":
            return ProcessState(MULTI, Permutation.identity(params["interval"]))
        if kind == "identity-window":
            return ProcessState(MULTI, Permutation.identity(params["window"]), lattice="line")
        if kind == "permutation":
            return ProcessState(MULTI, params["permutation"], lattice=params.get("lattice", "interval"))
        if kind == "mallows":
            rng = params.get("rng") or random.Random(params["seed"])
            w = sample_mallows(MallowsMeasure(params["interval"], params["q"]), rng)
            return ProcessState(MULTI, w)
        if kind == "ground-state":
            iv, k = params["interval"], params["k"]
            if not 0 <= k <= iv.size:
                raise InvalidInputError(f"particle count {k} outside [0, {iv.size}]")
            bits = tuple(1 if x >= iv.n - k + 1 else 0 for x in iv.sites())
            return ProcessState(SINGLE, BinaryConfig(iv, bits, FINITE_BOUNDARY))
        if kind == "eta-nm":
            n, m, w = params["n"], params["m"], params["window"]
            if m < 1:
                raise InvalidInputError("eta-nm needs m >= 1")
            if w.m > n - m or w.n < n + m:
                raise UnsupportedWindowError("window does not contain the displaced block")
            bits = tuple(
                1 if (n - m + 1 <= x <= n or x >= n + m + 1) else 0 for x in w.sites()
            )
            return ProcessState(
                SINGLE,
                BinaryConfig(w, bits, BoundaryMode(Fill.ZEROS, Fill.ONES)),
                lattice="line",
            )
        if kind == "eta-star":
            N, w = params["N"], params["window"]
            if w.m > -N or w.n < N:
                raise UnsupportedWindowError("window does not contain the alternating block")
            bits = tuple(
                1 if (x <= -N or (x <= N and (x + N) % 2 == 0)) else 0 for x in w.sites()
            )
            return ProcessState(
                SINGLE,
                BinaryConfig(w, bits, BoundaryMode(Fill.ONES, Fill.ZEROS)),
                lattice="line",
            )
        if kind == "step":
            c, w = params["c"], params["window"]
            bits = tuple(1 if x <= c else 0 for x in w.sites())
            return ProcessState(
                SINGLE,
                BinaryConfig(w, bits, BoundaryMode(Fill.ONES, Fill.ZEROS)),
                lattice="line",
            )
    except KeyError as exc:
        raise InvalidInputError(f"missing parameter {exc} for initial state {kind!r}") from exc
    raise InvalidInputError(f"unknown initial-state tag {kind!r}")


# ---------------------------------------------------------------------------
# Reference engine
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryLog:
    """Replayable event log: header plus (time, edge, tag, applied flags)."""

    seed: int
    q: float
    edges: Interval
    horizon: float
    events: list[tuple[float, int, int, tuple[bool, ...]]] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [
            "# asepmix-trajectory v1",
            f"# seed={self.seed} q={self.q!r} edges={self.edges.m},{self.edges.n} "
            f"horizon={self.horizon!r}",
        ]
        for t, x, tag, applied in self.events:
            flags = "".join("1" if a else "0" for a in applied)
            lines.append(f"{t!r} {x} {tag} {flags}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TrajectoryLog":
        lines = text.strip().splitlines()
        if len(lines) < 2 or not lines[0].startswith("# asepmix-trajectory"):
            raise InvalidInputError("not a trajectory dump")
        header = dict(part.split("=", 1) for part in lines[1].lstrip("# ").split())
        em, en = header["edges"].split(",")
        log = cls(
            seed=int(header["seed"]),
            q=float(header["q"]),
            edges=Interval(int(em), int(en)),
            horizon=float(header["horizon"]),
        )
        for line in lines[2:]:
            t, x, tag, flags = line.split()
            log.events.append((float(t), int(x), int(tag), tuple(c == "1" for c in flags)))
        return log


def _swap_applies(kind: str, tag: int, a: int, b: int) -> bool:
    # Single-species uses bits; particle=1 jumps right at rate 1, left at rate q.
    if kind == MULTI:
        return a < b if tag == RATE_1 else a > b
    return (a, b) == (1, 0) if tag == RATE_1 else (a, b) == (0, 1)


def evolve(
    states: Sequence[ProcessState],
    clocks: ClockStream,
    t_end: float,
    *,
    log: TrajectoryLog | None = None,
    guard: GuardMonitor | None = None,
    guard_state: int = 0,
    on_event: Callable | None = None,
) -> list[ProcessState]:
    """Advance every state to ``t_end`` under the shared clocks.

    States restricted to an interval ignore events outside it.  ``on_event``
    is called after each event as ``on_event(t, x, tag, applied, work)``
    where ``work`` maps state index -> (interval, kind, values list);
    single-species values are bits.
    """
    if not states:
        raise InvalidInputError("no states to evolve")
    t0 = states[0].time
    if any(s.time != t0 for s in states):
        raise InvalidInputError("coupled states must share their current time")
    if t_end < t0:
        raise InvalidInputError("t_end before current time")
    if t_end > clocks.horizon:
        raise InvalidInputError(f"t_end {t_end} exceeds clock horizon {clocks.horizon}")

    work: dict[int, tuple[Interval, str, list[int]]] = {}
    for idx, s in enumerate(states):
        vals = list(s.state.values) if s.kind == MULTI else list(s.state.bits)
        work[idx] = (s.interval, s.kind, vals)

    for t, x, tag in clocks.merged():
        if t <= t0:
            continue
        if t > t_end:
            break
        applied = []
        for idx in range(len(states)):
            iv, kind, vals = work[idx]
            if x < iv.m or x + 1 > iv.n:
                applied.append(False)
                continue
            i = x - iv.m
            a, b = vals[i], vals[i + 1]
            if _swap_applies(kind, tag, a, b):
                vals[i], vals[i + 1] = b, a
                applied.append(True)
                if guard is not None and idx == guard_state:
                    guard.note_swap(t, x, a, b)
            else:
                applied.append(False)
        if log is not None:
            log.events.append((t, x, tag, tuple(applied)))
        if on_event is not None:
            on_event(t, x, tag, applied, work)

    out = []
    for idx, s in enumerate(states):
        iv, kind, vals = work[idx]
        if kind == MULTI:
            new_state: Permutation | BinaryConfig = Permutation(iv, tuple(vals))
        else:
            new_state = BinaryConfig(iv, tuple(vals), s.state.boundary)
        out.append(ProcessState(s.kind, new_state, t_end, s.lattice))
    return out


def replay(states: Sequence[ProcessState], log: TrajectoryLog, t_end: float) -> list[ProcessState]:
    """Re-apply a trajectory dump, verifying the recorded applied flags."""
    work = []
    for s in states:
        vals = list(s.state.values) if s.kind == MULTI else list(s.state.bits)
        work.append((s.interval, s.kind, vals))
    for t, x, tag, flags in log.events:
        if t > t_end:
            break
        for idx, (iv, kind, vals) in enumerate(work):
            inside = iv.m <= x and x + 1 <= iv.n
            did = False
            if inside:
                i = x - iv.m
                a, b = vals[i], vals[i + 1]
                if _swap_applies(kind, tag, a, b):
                    vals[i], vals[i + 1] = b, a
                    did = True
            if did != flags[idx]:
                raise InvalidInputError(
                    f"replay diverged at t={t} edge={x}: flag {flags[idx]} vs {did}"
                )
    out = []
    for s, (iv, kind, vals) in zip(states, work):
        if kind == MULTI:
            st: Permutation | BinaryConfig = Permutation(iv, tuple(vals))
        else:
            st = BinaryConfig(iv, tuple(vals), s.state.boundary)
        out.append(ProcessState(s.kind, st, t_end, s.lattice))
    return out


# ---------------------------------------------------------------------------
# Heights of projections, and the paper's events
# ---------------------------------------------------------------------------


def projection_heights(state: ProcessState, n_species: int) -> tuple[Interval, np.ndarray]:
    """Heights h{projection k}(x) for k = 0..n_species, x over the state's sites.

    Interval states anchor like finite configurations (holes left, particles
    right); line states anchor with filled left tails.
    """
    if state.kind != MULTI:
        raise InvalidInputError("projection_heights expects a multi-species state")
    iv = state.interval
    vals = np.asarray(state.state.values)
    ks = np.arange(n_species + 1)[:, None]
    bits = (vals[None, :] <= ks).astype(np.int64)
    increments = 1 - 2 * bits
    if state.lattice == "interval":
        anchor = iv.m - 1
    else:
        anchor = -(iv.m - 1)
    heights = anchor + np.cumsum(increments, axis=1)
    return iv, heights


def _height_at(state: ProcessState, k: int, x: int) -> int:
    iv, H = projection_heights(state, k)
    if x < iv.m or x > iv.n:
        raise UnsupportedWindowError(f"position {x} outside the state's window")
    return int(H[k, x - iv.m])


def event_D(zeta: ProcessState, n_species: int, b: float) -> bool:
    """h{projection k}(N-k) > N-k+b for every k in [[0, N]]."""
    iv = zeta.interval
    if zeta.lattice != "line" or iv.m > -1 or iv.n < n_species + 1:
        raise UnsupportedWindowError("need a line window containing [[-1, N+1]]")
    _, H = projection_heights(zeta, n_species)
    ks = np.arange(n_species + 1)
    vals = H[ks, n_species - ks - iv.m]
    return bool(np.all(vals > (n_species - ks) + b))


def event_A(
    zeta: ProcessState, xi: ProcessState, n_species: int, k: int, a: int, b: float
) -> bool:
    """The comparison event: line height high at N-k while an interval side
    height is low at N-k-a or N-k+a."""
    N = n_species
    hz = _height_at(zeta, k, N - k)
    if not hz > N - k + b:
        return False
    h_minus = _height_at(xi, k, N - k - a)
    h_plus = _height_at(xi, k, N - k + a)
    return h_minus < N - k - a or h_plus < N - k - a


def event_B(
    xi_start: ProcessState, log: TrajectoryLog, n_species: int, k: int, a: int, r: int
) -> bool:
    """Freezing event over [t, t+r]: both side heights pinned to N-k-a at all
    integer offsets while the centre height stays strictly below N-k."""
    N = n_species
    t0 = xi_start.time
    iv = xi_start.interval
    p1, pc, p2 = N - k - a, N - k, N - k + a
    vals = list(xi_start.state.values)

    def count_le(p: int) -> int:
        return sum(1 for y in range(iv.m, min(p, iv.n) + 1) if vals[y - iv.m] <= k)

    c1, cc, c2 = count_le(p1), count_le(pc), count_le(p2)
    next_check = t0
    checks_left = r + 1
    ok = True

    def run_checks(now: float) -> None:
        nonlocal next_check, checks_left, ok
        while checks_left > 0 and now > next_check:
            if p1 - 2 * c1 != N - k - a or p2 - 2 * c2 != N - k - a:
                ok = False
            checks_left -= 1
            next_check += 1.0

    for t, x, tag, _flags in log.events:
        if t <= t0:
            continue
        if t > t0 + r:
            break
        run_checks(t)
        if pc - 2 * cc >= N - k:
            ok = False
        if not ok:
            return False
        i = x - iv.m
        if 0 <= i < len(vals) - 1:
            a_val, b_val = vals[i], vals[i + 1]
            if _swap_applies(MULTI, tag, a_val, b_val):
                vals[i], vals[i + 1] = b_val, a_val
                for p, bump in ((p1, "c1"), (pc, "cc"), (p2, "c2")):
                    if x == p:
                        delta = (b_val <= k) - (a_val <= k)
                        if bump == "c1":
                            c1 += delta
                        elif bump == "cc":
                            cc += delta
                        else:
                            c2 += delta
    run_checks(t0 + r + 0.5)
    if pc - 2 * cc >= N - k:
        ok = False
    return ok


# ---------------------------------------------------------------------------
# Kernel-backed stopping-time drivers
# ---------------------------------------------------------------------------


def _default_coupling_horizon(N: int, q: float) -> float:
    return (2.0 / (1.0 - q)) * (N + 20.0 * N ** (1.0 / 3.0) + 20.0)


def coupling_time(
    N: int,
    q: float,
    lam0: Permutation | None,
    seed: int,
    horizon: float | None = None,
) -> StopTime:
    """First meeting time of the card shuffling started at ``lam0`` with a
    stationary copy, under the basic coupling."""
    from asepmix import _kernels as K

    iv = Interval(1, N)
    if lam0 is None:
        lam0 = Permutation.identity(iv)
    if lam0.interval != iv:
        raise InvalidInputError("lam0 must live on [[1, N]]")
    if horizon is None:
        horizon = _default_coupling_horizon(N, q)
    trial_seed = mix64(seed, 0)
    partner = sample_mallows(
        MallowsMeasure(iv, _as_fraction(q)), random.Random(mix64(trial_seed, AUX_STREAM_KEY))
    )
    lam_arr = np.asarray(lam0.values, dtype=np.int64)
    partners = np.asarray(partner.values, dtype=np.int64)[None, :]
    out = np.empty(1, np.float64)
    K.sim_coupling_pair(
        np.uint64(seed), 0, 1, lam_arr, partners, float(q), float(horizon),
        K.calendar_buckets(N - 1), out,
    )
    if out[0] < 0:
        return StopTime(float(horizon), True)
    return StopTime(float(out[0]), False)


def _as_fraction(q: float):
    from fractions import Fraction

    return q if isinstance(q, Fraction) else Fraction(q).limit_denominator(10**9)


def hitting_time_H(
    n: int,
    m: int,
    q: float,
    seed: int,
    horizon: float | None = None,
) -> StopTime:
    """First time the displaced-block configuration reaches its step ground
    state, simulated on a certified window."""
    from asepmix import _kernels as K

    if m < 1:
        raise InvalidInputError("need m >= 1")
    if horizon is None:
        horizon = 20.0 * m
    attempt = 0
    scale = 1.0
    while True:
        spec = plan_window(Interval(n - m, n + m), horizon * scale, q)
        w = spec.window
        init = make_initial("eta-nm", n=n, m=m, window=w)
        vals0 = np.asarray([1 - b for b in init.state.bits], dtype=np.int64)
        target = np.asarray([0 if x >= n + 1 else 1 for x in w.sites()], dtype=np.int64)
        out_t = np.empty(1, np.float64)
        out_ok = np.empty(1, np.bool_)
        K.sim_hitting(
            np.uint64(mix64(seed, attempt * 7919)), 0, 1, w.m, vals0, target,
            float(q), float(horizon), spec.guard, K.calendar_buckets(w.size - 1),
            out_t, out_ok,
        )
        if out_ok[0]:
            if out_t[0] < 0:
                return StopTime(float(horizon), True)
            return StopTime(float(out_t[0]), False)
        attempt += 1
        scale *= 1.5
        if attempt > 4:
            raise UnsupportedWindowError("guard band kept failing; window growth exhausted")


def audit_coupled_run(
    N: int,
    q: float,
    t_end: float,
    seed: int,
    lam0: Permutation | None = None,
) -> dict[str, int]:
    """Evolve the full coupled family and verify the structural laws at every
    event: projection/evolution commutation (exact) and the pointwise height
    orderings of the identity-started chain below its general-start,
    stationary, and line companions.

    Returns event and violation counts; a correct engine reports zeros.
    """
    from asepmix.clocks import gen_clocks

    iv = Interval(1, N)
    if lam0 is None:
        vals = list(iv.sites())
        random.Random(mix64(seed, AUX_STREAM_KEY)).shuffle(vals)
        lam0 = Permutation(iv, tuple(vals))
    spec = plan_window(Interval(0, N), t_end, q)
    window = spec.window
    xi = make_initial("identity", interval=iv)
    lam = ProcessState(MULTI, lam0)
    xibar = make_initial("mallows", interval=iv, q=_as_fraction(q), seed=mix64(seed, 3))
    zeta = make_initial("identity-window", window=window)
    states = [xi, lam, xibar, zeta]
    # independently evolved single-species projections of xi, for commutation
    for k in range(N + 1):
        bits = tuple(1 if v <= k else 0 for v in xi.state.values)
        states.append(ProcessState(SINGLE, BinaryConfig(iv, bits, FINITE_BOUNDARY)))

    clocks = gen_clocks(Interval(window.m, window.n - 1), q, t_end + 1e-9, seed)
    counters = {"events": 0, "commutation_violations": 0, "ordering_violations": 0}
    ks = np.arange(N + 1)[:, None]
    xs_win = np.arange(window.m, window.n + 1)[None, :]

    def heights_interval(vals: list[int]) -> np.ndarray:
        bits = (np.asarray(vals)[None, :] <= ks).astype(np.int64)
        return (iv.m - 1) + np.cumsum(1 - 2 * bits, axis=1)

    def on_event(t, x, tag, applied, work) -> None:
        counters["events"] += 1
        xi_vals = work[0][2]
        for k in range(N + 1):
            bits = work[4 + k][2]
            if any((1 if v <= k else 0) != b for v, b in zip(xi_vals, bits)):
                counters["commutation_violations"] += 1
                break
        h_xi = heights_interval(xi_vals)
        h_lam = heights_interval(work[1][2])
        h_bar = heights_interval(work[2][2])
        if np.any(h_xi > h_lam) or np.any(h_xi > h_bar):
            counters["ordering_violations"] += 1
        # compare against the line process on the whole window
        zeta_bits = (np.asarray(work[3][2])[None, :] <= ks).astype(np.int64)
        h_zeta = -(window.m - 1) + np.cumsum(1 - 2 * zeta_bits, axis=1)
        # xi heights on the window via its fills: x for x < 1, tail slope -1 past N
        h_xi_full = np.empty((N + 1, window.size), dtype=np.int64)
        left = xs_win[0] < iv.m
        right = xs_win[0] > iv.n
        mid = ~left & ~right
        h_xi_full[:, left] = xs_win[:, left]
        h_xi_full[:, mid] = h_xi
        h_right = h_xi[:, -1:] - (xs_win[:, right] - iv.n)
        h_xi_full[:, right] = h_right
        if np.any(h_xi_full > h_zeta):
            counters["ordering_violations"] += 1

    monitor = GuardMonitor(spec, species=(0, N))
    evolve(states, clocks, t_end, on_event=on_event, guard=monitor, guard_state=3)
    if monitor.violated:
        raise UnsupportedWindowError("guard-band violation during audit run")
    return counters


def osp_absorbing_time(N: int, seed: int, horizon: float | None = None) -> StopTime:
    """Absorbing time of the q=0 shuffling (oriented swap process) on [[1, N]]."""
    from asepmix import _kernels as K

    if N < 1:
        raise InvalidInputError("need N >= 1")
    if N == 1:
        return StopTime(0.0, False)
    if horizon is None:
        horizon = 2.0 * N + 40.0 * N ** (1.0 / 3.0) + 60.0
    vals0 = np.arange(1, N + 1, dtype=np.int64)
    target = np.arange(N, 0, -1, dtype=np.int64)
    out_t = np.empty(1, np.float64)
    out_ok = np.empty(1, np.bool_)
    K.sim_hitting(
        np.uint64(seed), 0, 1, 1, vals0, target, 0.0, float(horizon), 0,
        K.calendar_buckets(N - 1), out_t, out_ok,
    )
    if out_t[0] < 0:
        return StopTime(float(horizon), True)
    return StopTime(float(out_t[0]), False)
