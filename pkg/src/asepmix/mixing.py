"""Total-variation mixing and cutoff-profile experiments.

Exact total variation for tiny systems comes from uniformization of the
explicit generator.  At experiment scale two Monte Carlo estimators bracket
the distance: the coupling estimator P[coupling time > t] from above, and a
distinguishing-statistic estimator from below (the statistic is
max_k [N - k - h{projection k}(N-k)], large until the projections reach
their ground states).  The profile experiments evaluate both on the cutoff
time scale t = 2 (1-q)^{-1} (N + tau N^{1/3}).
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, NamedTuple, Sequence

import numpy as np

from asepmix.configs import Interval, Permutation
from asepmix.errors import InvalidInputError, UnsupportedSizeError, UnsupportedWindowError
from asepmix.mallows import (
    MallowsMeasure,
    enumerate_permutations,
    mallows_prob,
    sample_mallows,
)
from asepmix.rng import AUX_STREAM_KEY, mix64
from asepmix.simulate import make_initial, plan_window

_MAX_EXACT = 7


def t_of_tau(N: int, q: float, tau: float) -> float:
    """Cutoff time parameterization 2 (1-q)^{-1} (N + tau N^{1/3})."""
    return 2.0 / (1.0 - q) * (N + tau * N ** (1.0 / 3.0))


def default_theta(N: int) -> int:
    """Distinguishing-statistic threshold, ceil(log(N)^2)."""
    return math.ceil(math.log(N) ** 2)


# ---------------------------------------------------------------------------
# Exact total variation via uniformization
# ---------------------------------------------------------------------------


def exact_generator(N: int, q: Fraction):
    """Permutations of [[1, N]] and the exact jump rates of the shuffling.

    Returns (perms, transitions) where transitions[i] is a list of
    (target index, rate as Fraction).
    """
    iv = Interval(1, N)
    perms = [w.values for w in enumerate_permutations(iv)]
    index = {w: i for i, w in enumerate(perms)}
    q = Fraction(q)
    transitions: list[list[tuple[int, Fraction]]] = []
    for w in perms:
        row = []
        for i in range(N - 1):
            sw = w[:i] + (w[i + 1], w[i]) + w[i + 2 :]
            rate = Fraction(1) if w[i] < w[i + 1] else q
            if rate:
                row.append((index[sw], rate))
        transitions.append(row)
    return perms, transitions


def stationary_flow_residual(N: int, q: Fraction) -> Fraction:
    """max_w' |sum_w M(w) Q[w, w']| computed exactly; zero iff M is stationary."""
    if N > 5:
        raise UnsupportedSizeError("exact stationarity check capped at N=5")
    iv = Interval(1, N)
    measure = MallowsMeasure(iv, Fraction(q))
    perms, transitions = exact_generator(N, q)
    probs = [mallows_prob(measure, Permutation(iv, w)) for w in perms]
    flow = [Fraction(0)] * len(perms)
    for i, row in enumerate(transitions):
        out_rate = sum((r for _, r in row), Fraction(0))
        flow[i] -= probs[i] * out_rate
        for j, r in row:
            flow[j] += probs[i] * r
    return max(abs(f) for f in flow)


def exact_tv(N: int, q: float, t: float, lam0: Permutation | None = None) -> float:
    """TV distance between the time-t law started at lam0 and the Mallows law.

    Uniformization with rate bound (N-1)(1+q); Poisson series truncated at
    tail mass 1e-14.
    """
    if N > _MAX_EXACT:
        raise UnsupportedSizeError(f"exact TV capped at N={_MAX_EXACT}")
    iv = Interval(1, N)
    if lam0 is None:
        lam0 = Permutation.identity(iv)
    if lam0.interval != iv:
        raise InvalidInputError("lam0 must live on [[1, N]]")
    qf = Fraction(q) if not isinstance(q, Fraction) else q
    perms, transitions = exact_generator(N, qf)
    index = {w: i for i, w in enumerate(perms)}
    n = len(perms)
    measure = MallowsMeasure(iv, qf)
    target = np.array(
        [float(mallows_prob(measure, Permutation(iv, w))) for w in perms]
    )
    if t == 0:
        vec = np.zeros(n)
        vec[index[lam0.values]] = 1.0
        return 0.5 * float(np.abs(vec - target).sum())

    from scipy import sparse

    lam_unif = (N - 1) * (1.0 + float(qf))
    rows, cols, data = [], [], []
    for i, row in enumerate(transitions):
        out_rate = 0.0
        for j, r in row:
            rows.append(i)
            cols.append(j)
            data.append(float(r) / lam_unif)
            out_rate += float(r)
        rows.append(i)
        cols.append(i)
        data.append(1.0 - out_rate / lam_unif)
    P = sparse.csr_matrix((data, (rows, cols)), shape=(n, n))

    vec = np.zeros(n)
    vec[index[lam0.values]] = 1.0
    mu = lam_unif * t
    weight = math.exp(-mu)
    acc_vec = weight * vec
    acc_mass = weight
    j = 0
    while acc_mass < 1.0 - 1e-14:
        vec = vec @ P
        j += 1
        weight *= mu / j
        acc_vec = acc_vec + weight * vec
        acc_mass += weight
        if j > 10_000_000:
            raise InvalidInputError("uniformization series failed to converge")
    return 0.5 * float(np.abs(acc_vec - target).sum())


def exact_tv_table(
    N: int, q: float, ts: Sequence[float], lam0: Permutation | None = None
) -> list[tuple[float, float]]:
    return [(float(t), exact_tv(N, q, float(t), lam0)) for t in ts]


# ---------------------------------------------------------------------------
# Monte Carlo estimators
# ---------------------------------------------------------------------------


class TVEstimate(NamedTuple):
    t: float
    estimate: float
    stderr: float


def _split_ranges(trials: int, threads: int) -> list[tuple[int, int]]:
    threads = max(1, min(threads, trials))
    step = (trials + threads - 1) // threads
    return [(lo, min(lo + step, trials)) for lo in range(0, trials, step)]


def _run_ranges(fn: Callable[[int, int], None], trials: int, threads: int) -> None:
    ranges = _split_ranges(trials, threads)
    if len(ranges) == 1:
        fn(*ranges[0])
        return
    with ThreadPoolExecutor(len(ranges)) as ex:
        futures = [ex.submit(fn, lo, hi) for lo, hi in ranges]
        for f in futures:
            f.result()


def coupling_times_batch(
    N: int,
    q: float,
    trials: int,
    seed: int,
    horizon: float,
    lam0: Permutation | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Coupling times of (lam0, stationary partner) pairs; -1 marks censoring."""
    from asepmix import _kernels as K

    iv = Interval(1, N)
    if lam0 is None:
        lam0 = Permutation.identity(iv)
    measure = MallowsMeasure(iv, Fraction(q).limit_denominator(10**9))
    partners = np.empty((trials, N), dtype=np.int64)
    for trial in range(trials):
        rng = random.Random(mix64(mix64(seed, trial), AUX_STREAM_KEY))
        partners[trial] = sample_mallows(measure, rng).values
    lam_arr = np.asarray(lam0.values, dtype=np.int64)
    out = np.empty(trials, np.float64)
    nb = K.calendar_buckets(N - 1)

    def work(lo: int, hi: int) -> None:
        K.sim_coupling_pair(
            np.uint64(seed), lo, hi, lam_arr, partners, float(q), float(horizon), nb, out
        )

    _run_ranges(work, trials, threads)
    return out


def mc_tv_upper(
    N: int,
    q: float,
    ts: Sequence[float],
    trials: int,
    seed: int,
    lam0: Permutation | None = None,
    threads: int = 1,
    horizon: float | None = None,
) -> list[TVEstimate]:
    """Coupling upper bound: fraction of pairs not yet coupled by each t."""
    ts = [float(t) for t in ts]
    if horizon is None:
        horizon = max(ts) * 1.25 + 50.0
    times = coupling_times_batch(N, q, trials, seed, horizon, lam0, threads)
    out = []
    for t in ts:
        hits = np.logical_or(times < 0, times > t)
        p = float(hits.mean())
        out.append(TVEstimate(t, p, math.sqrt(p * (1 - p) / trials)))
    return out


def dynamics_statistics(
    N: int,
    q: float,
    ts: Sequence[float],
    trials: int,
    seed: int,
    threads: int = 1,
) -> np.ndarray:
    """Distinguishing statistic of the identity-started shuffling at each t."""
    from asepmix import _kernels as K

    cps = np.asarray(sorted(float(t) for t in ts))
    out = np.zeros((trials, len(cps)), np.int64)
    nb = K.calendar_buckets(N - 1)

    def work(lo: int, hi: int) -> None:
        K.sim_interval_checkpoint_stats(
            np.uint64(seed), lo, hi, N, float(q), cps, nb, out
        )

    _run_ranges(work, trials, threads)
    order = np.argsort(np.argsort([float(t) for t in ts]))
    return out[:, order]


def mallows_statistics(N: int, q: float, trials: int, seed: int) -> np.ndarray:
    """The same statistic under exact stationary draws."""
    iv = Interval(1, N)
    measure = MallowsMeasure(iv, Fraction(q).limit_denominator(10**9))
    out = np.empty(trials, np.int64)
    ys = np.arange(1, N + 1)
    for trial in range(trials):
        rng = random.Random(mix64(mix64(seed, trial), AUX_STREAM_KEY))
        w = sample_mallows(measure, rng)
        vals = np.asarray(w.values)
        diff = np.zeros(N + 2, np.int64)
        mask = vals <= N - ys
        np.add.at(diff, vals[mask], 1)
        np.add.at(diff, N - ys[mask] + 1, -1)
        out[trial] = 2 * int(np.cumsum(diff[: N + 1]).max())
    return out


def mc_tv_lower(
    N: int,
    q: float,
    ts: Sequence[float],
    theta: int | None = None,
    trials: int = 1000,
    seed: int = 0,
    threads: int = 1,
) -> list[TVEstimate]:
    """Lower bound: P_dynamics[stat >= theta] - P_Mallows[stat >= theta]."""
    if theta is None:
        theta = default_theta(N)
    if theta < 1:
        raise InvalidInputError("theta must be >= 1")
    dyn = dynamics_statistics(N, q, ts, trials, mix64(seed, 1), threads)
    mal = mallows_statistics(N, q, trials, mix64(seed, 2))
    p_mal = float((mal >= theta).mean())
    se_mal = math.sqrt(p_mal * (1 - p_mal) / trials)
    out = []
    for j, t in enumerate(ts):
        p_dyn = float((dyn[:, j] >= theta).mean())
        se_dyn = math.sqrt(p_dyn * (1 - p_dyn) / trials)
        out.append(TVEstimate(float(t), p_dyn - p_mal, math.sqrt(se_dyn**2 + se_mal**2)))
    return out


# ---------------------------------------------------------------------------
# Cutoff profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentPlan:
    N: int
    q: float
    taus: tuple[float, ...]
    trials: int
    seed: int
    threads: int = 1
    theta: int | None = None

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise InvalidInputError("trials must be >= 1")
        if not self.taus:
            raise InvalidInputError("tau grid must be nonempty")


@dataclass(frozen=True)
class ProfilePoint:
    tau: float
    t: float
    tv_upper: float
    tv_upper_se: float
    tv_lower: float
    tv_lower_se: float
    goe_reference: float


def profile_curve(plan: ExperimentPlan) -> list[ProfilePoint]:
    """Both TV bounds on the cutoff time grid, with the limiting profile
    1 - F_GOE(2^{2/3} tau) attached (identity start)."""
    from asepmix.tracywidom import f_goe

    ts = [t_of_tau(plan.N, plan.q, tau) for tau in plan.taus]
    upper = mc_tv_upper(
        plan.N, plan.q, ts, plan.trials, mix64(plan.seed, 11), threads=plan.threads
    )
    lower = mc_tv_lower(
        plan.N,
        plan.q,
        ts,
        theta=plan.theta,
        trials=plan.trials,
        seed=mix64(plan.seed, 13),
        threads=plan.threads,
    )
    out = []
    for tau, up, lo in zip(plan.taus, upper, lower):
        ref = 1.0 - f_goe(2.0 ** (2.0 / 3.0) * tau)
        out.append(
            ProfilePoint(tau, up.t, up.estimate, up.stderr, lo.estimate, lo.stderr, ref)
        )
    return out


# ---------------------------------------------------------------------------
# Line-process observables
# ---------------------------------------------------------------------------


def _multi_window_stats(
    N: int,
    q: float,
    t: float,
    trials: int,
    seed: int,
    threads: int,
    margin_scale: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """min_k [h{zeta projection k}(N-k) + k] per trial, plus validity flags."""
    from asepmix import _kernels as K

    spec = plan_window(Interval(0, N), t, q)
    core = spec.core
    if margin_scale != 1.0:
        extra = math.ceil((margin_scale - 1.0) * (core.size // 2))
        core = Interval(core.m - extra, core.n + extra)
        spec = type(spec)(core, spec.guard)
    w = spec.window
    out_stat = np.zeros(trials, np.int64)
    out_valid = np.zeros(trials, np.bool_)
    nb = K.calendar_buckets(w.size - 1)

    def work(lo: int, hi: int) -> None:
        K.sim_multi_window_stats(
            np.uint64(seed), lo, hi, w.m, w.n, N, float(q), float(t), spec.guard,
            nb, out_stat, out_valid,
        )

    _run_ranges(work, trials, threads)
    return out_stat, out_valid


def lemma53_batch(
    N: int,
    q: float,
    tau: float,
    n_samples: int,
    seed: int,
    threads: int = 1,
) -> np.ndarray:
    """Accepted samples of the rescaled minimal-height statistic

        -2^{2/3} N^{-1/3} min_k [h{zeta^k_t}(N-k) + k] + 2^{2/3} N^{2/3} + 2^{2/3} tau

    at t = 2 (1-q)^{-1} (N + tau N^{1/3}).  Guard-band violations are
    discarded and replaced by fresh seeds on an enlarged window.
    """
    t = t_of_tau(N, q, tau)
    samples = np.empty(n_samples, np.float64)
    filled = 0
    round_idx = 0
    margin_scale = 1.0
    while filled < n_samples:
        want = n_samples - filled
        stats, valid = _multi_window_stats(
            N, q, t, want, mix64(seed, 1000 + round_idx), threads, margin_scale
        )
        good = stats[valid]
        take = min(want, good.shape[0])
        scale = 2.0 ** (2.0 / 3.0)
        samples[filled : filled + take] = (
            -scale * N ** (-1.0 / 3.0) * good[:take] + scale * N ** (2.0 / 3.0) + scale * tau
        )
        filled += take
        round_idx += 1
        if good.shape[0] < want:
            margin_scale *= 1.5
        if round_idx > 8:
            raise UnsupportedWindowError("persistent guard-band violations in lemma53 sampling")
    return samples


def lemma53_sample(N: int, q: float, tau: float, seed: int) -> float:
    return float(lemma53_batch(N, q, tau, 1, seed)[0])


class ProbeResult(NamedTuple):
    p_first: float
    se_first: float
    p_second: float
    se_second: float
    z: float


def _z_score(p1: float, se1: float, p2: float, se2: float) -> float:
    var = se1 * se1 + se2 * se2
    if var == 0:
        return 0.0 if p1 == p2 else math.inf if p1 > p2 else -math.inf
    return (p1 - p2) / math.sqrt(var)


def _single_window_heights(
    initial_kind: str,
    kind_params: dict,
    q: float,
    t: float,
    positions: Sequence[int],
    trials: int,
    seed: int,
    threads: int,
    activity: Interval,
) -> np.ndarray:
    """Heights h(p) at the requested positions for a line single-species run
    anchored with a filled left tail."""
    from asepmix import _kernels as K

    spec = plan_window(activity, t, q)
    w = spec.window
    init = make_initial(initial_kind, window=w, **kind_params)
    vals0 = np.asarray([1 - b for b in init.state.bits], dtype=np.int64)
    pos = np.asarray(positions, dtype=np.int64)
    out_counts = np.zeros((trials, len(pos)), np.int64)
    out_valid = np.zeros(trials, np.bool_)
    nb = K.calendar_buckets(w.size - 1)

    def work(lo: int, hi: int) -> None:
        K.sim_single_window_counts(
            np.uint64(seed), lo, hi, w.m, vals0, float(q), float(t), spec.guard,
            nb, pos, out_counts, out_valid,
        )

    _run_ranges(work, trials, threads)
    if not out_valid.all():
        raise UnsupportedWindowError("guard-band violation in single-species run")
    return -pos[None, :] + 2 * out_counts


def shift_invariance_probe(
    N: int, q: float, b: float, t: float, trials: int, seed: int, threads: int = 1
) -> ProbeResult:
    """Compares P[h{zeta^k_t}(N-k) > N-k+b for all k] against
    P[h{zeta^0_t}(N-2k) > N+b for all k]; equal in law by shift invariance."""
    stats, valid = _multi_window_stats(N, q, t, trials, mix64(seed, 21), threads)
    if not valid.all():
        raise UnsupportedWindowError("guard-band violation in multi-species run")
    # event: min_k [h + k] - N > b  <=>  h(N-k) > N-k+b for all k
    p1 = float((stats - N > b).mean())
    se1 = math.sqrt(p1 * (1 - p1) / trials)

    positions = [N - 2 * k for k in range(N + 1)]
    heights = _single_window_heights(
        "step", {"c": 0}, q, t, positions, trials, mix64(seed, 22), threads,
        Interval(-N - 1, N + 1),
    )
    p2 = float((heights > N + b).all(axis=1).mean())
    se2 = math.sqrt(p2 * (1 - p2) / trials)
    return ProbeResult(p1, se1, p2, se2, _z_score(p1, se1, p2, se2))


def skew_reversibility_probe(
    N: int, q: float, b: float, t: float, trials: int, seed: int, threads: int = 1
) -> ProbeResult:
    """Compares P[h{zeta^0_t}(N-2k) > N+b for all k] against the
    time-reversal prediction P[h{eta*_t}(0) > 2N+b].

    Exact finite-size computations show the two sides differ at order q*t^2
    (the alternating block allows interference right of the origin that the
    step lacks), so the z-score measures a genuine finite-size defect of the
    prediction rather than pure noise.
    """
    positions = [N - 2 * k for k in range(N + 1)]
    heights = _single_window_heights(
        "step", {"c": 0}, q, t, positions, trials, mix64(seed, 31), threads,
        Interval(-N - 1, N + 1),
    )
    p1 = float((heights > N + b).all(axis=1).mean())
    se1 = math.sqrt(p1 * (1 - p1) / trials)

    heights2 = _single_window_heights(
        "eta-star", {"N": N}, q, t, [0], trials, mix64(seed, 32), threads,
        Interval(-N - 1, N + 1),
    )
    p2 = float((heights2[:, 0] > 2 * N + b).mean())
    se2 = math.sqrt(p2 * (1 - p2) / trials)
    return ProbeResult(p1, se1, p2, se2, _z_score(p1, se1, p2, se2))


def down_crossing_drops(
    N: int, q: float, k: int, t: float, r: float, trials: int, seed: int, threads: int = 1
) -> np.ndarray:
    """Height drops h(t) - min_{[t, t+r]} h at position N-k for projection k."""
    from asepmix import _kernels as K

    spec = plan_window(Interval(0, N), t + r, q)
    w = spec.window
    out_href = np.zeros(trials, np.int64)
    out_hmin = np.zeros(trials, np.int64)
    out_valid = np.zeros(trials, np.bool_)
    nb = K.calendar_buckets(w.size - 1)

    def work(lo: int, hi: int) -> None:
        K.sim_down_crossing(
            np.uint64(seed), lo, hi, w.m, w.n, N, float(q), float(t), float(r),
            spec.guard, nb, int(k), out_href, out_hmin, out_valid,
        )

    _run_ranges(work, trials, threads)
    if not out_valid.all():
        raise UnsupportedWindowError("guard-band violation in down-crossing run")
    return out_href - out_hmin


def down_crossing_probe(
    N: int,
    q: float,
    k: int,
    t: float,
    r: float,
    delta: int,
    trials: int,
    seed: int,
    threads: int = 1,
) -> float:
    """Empirical probability that the projection-k height at N-k drops by at
    least ``delta`` within time r after time t."""
    drops = down_crossing_drops(N, q, k, t, r, trials, seed, threads)
    return float((drops >= delta).mean())
