"""Seeded Monte Carlo sweeps pairing simulation estimates with predictions.

A sweep varies one scenario parameter (threshold, group size, BS count,
cluster count, or selected-node count) and runs many independent realizations
per point.  Every run gets its own 64-bit seed derived from the sweep's
``seed_base`` through a splitmix64-style mix chain:

    h = mix(seed_base); h = mix(h ^ axis_index); h = mix(h ^ run_index)

with mix(x) = splitmix64 output function (golden-ratio increment, two
xor-multiply rounds).  Points and runs are therefore independent, yet one
``seed_base`` reproduces every file byte for byte.

Non-converged runs are never averaged: they are counted in their own column,
and a point where they exceed 10% of attempts is flagged (``EstimateRow.flagged``)
so callers can refuse to trust the mean.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from typing import Sequence

import numpy as np

from . import analysis
from .beampattern import ActiveCluster, average_total_inr
from .core import RngStreams, Scenario, TWO_PI, sample_network
from .selection import (FIXED_CHANNEL, REDRAW_PER_TRIAL, default_max_trials,
                        run_multi_cluster, run_selection,
                        sample_cluster_networks)

AXES = ("eta_thr", "L", "D", "K", "N")

_M64 = (1 << 64) - 1


def _mix64(x: int) -> int:
    """splitmix64 output function; full-period 64-bit mixing."""
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return (x ^ (x >> 31)) & _M64


def point_run_seed(seed_base: int, axis_index: int, run_index: int) -> int:
    h = _mix64(seed_base & _M64)
    h = _mix64(h ^ (axis_index & _M64))
    return _mix64(h ^ (run_index & _M64))


@dataclasses.dataclass(frozen=True)
class SweepSpec:
    """One sweep: base scenario, the axis to vary, and the sampling plan."""

    base: Scenario
    axis: str
    values: tuple
    runs_per_point: int = 1000
    mode: str = FIXED_CHANNEL
    seed_base: int = 0
    max_trials: int | None = None
    cluster_targets: tuple[float, ...] | None = None
    skip_predicted_above: float | None = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, not {self.axis!r}")
        if len(self.values) == 0:
            raise ValueError("sweep needs at least one axis value")
        if self.runs_per_point < 1:
            raise ValueError("runs_per_point must be at least 1")
        if self.mode not in (FIXED_CHANNEL, REDRAW_PER_TRIAL):
            raise ValueError("mode must be 'fixed' or 'redraw'")
        if not 0 <= int(self.seed_base) <= _M64:
            raise ValueError("seed_base must fit in 64 bits")
        for v in self.values:
            scenario_for(self, v)  # raises if a substitution is invalid

    @property
    def targets(self) -> tuple[float, ...]:
        if self.cluster_targets is not None:
            return self.cluster_targets
        return (self.base.intended_direction,)


def scenario_for(spec: SweepSpec, value) -> Scenario:
    """The base scenario with one axis value substituted.

    The D axis keeps the first ``value`` unintended directions of the base
    scenario; the K axis (cluster count) leaves the scenario itself unchanged.
    """
    axis = spec.axis
    if axis == "eta_thr":
        return spec.base.replace(inr_threshold=float(value))
    if axis == "L":
        return spec.base.replace(group_size=int(value))
    if axis == "N":
        return spec.base.replace(num_selected=int(value))
    if axis == "D":
        d = int(value)
        if not 1 <= d <= len(spec.base.unintended_directions):
            raise ValueError("D exceeds the directions listed in the scenario")
        return spec.base.replace(
            unintended_directions=spec.base.unintended_directions[:d])
    if axis == "K":
        k = int(value)
        if not 1 <= k <= len(spec.targets):
            raise ValueError("K exceeds the configured cluster targets")
        return spec.base
    raise ValueError(f"unknown axis {axis!r}")


@dataclasses.dataclass(frozen=True)
class EstimateRow:
    """One sweep point: Monte Carlo estimate next to its prediction.

    ``n`` counts the runs that entered the estimate; non-converged runs are
    only counted, never averaged.  ``estimate`` is None for points skipped as
    predicted-too-expensive.  ``eta0`` is set for CCDF rows only.
    """

    axis_value: float
    estimate: float | None
    std_error: float | None
    prediction: float
    n: int
    nonconverged: int
    eta0: float | None = None

    def __post_init__(self):
        if self.std_error is not None and self.std_error < 0.0:
            raise ValueError("standard error cannot be negative")

    @property
    def flagged(self) -> bool:
        attempts = self.n + self.nonconverged
        return attempts > 0 and self.nonconverged > 0.1 * attempts


def _mean_se(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    if arr.size < 2:
        return mean, 0.0
    return mean, float(arr.std(ddof=1) / math.sqrt(arr.size))


def sweep_expected_trials(spec: SweepSpec) -> list[EstimateRow]:
    """Mean trial count per axis value versus the closed-form expectation.

    Each run draws a fresh network and runs one full selection.  Points whose
    predicted mean exceeds ``skip_predicted_above`` are emitted without an
    estimate (prediction only, n = 0) to keep sweep runtime bounded.
    """
    if spec.axis not in ("eta_thr", "L", "D"):
        raise ValueError("trial-count sweeps vary eta_thr, L, or D")
    rows = []
    for ai, value in enumerate(spec.values):
        scen = scenario_for(spec, value)
        pred = analysis.expected_trials(scen)
        if (spec.skip_predicted_above is not None
                and pred > spec.skip_predicted_above):
            rows.append(EstimateRow(_axis_float(value), None, None, pred, 0, 0))
            continue
        cap = default_max_trials(scen) if spec.max_trials is None else spec.max_trials
        trials: list[float] = []
        bad = 0
        for run in range(spec.runs_per_point):
            seeded = scen.replace(seed=point_run_seed(spec.seed_base, ai, run))
            net = sample_network(seeded)
            out = run_selection(net, max_trials=cap, mode=spec.mode,
                                full_log=False)
            if out.converged:
                trials.append(float(out.trials))
            else:
                bad += 1
        if trials:
            est, se = _mean_se(trials)
        else:
            est, se = None, None
        rows.append(EstimateRow(_axis_float(value), est, se, pred,
                                len(trials), bad))
    return rows


def _inr_samples(spec: SweepSpec, scen: Scenario, k: int,
                 axis_index: int) -> tuple[list[float], int]:
    """Post-selection symbol-averaged INR samples at the victim BS.

    Each realization selects k clusters (independent networks, targets from
    ``spec.targets``) and measures the summed interference of all selected
    nodes transmitting at data power toward their own targets.
    """
    victim = scen.unintended_directions[0]
    targets = spec.targets[:k]
    samples: list[float] = []
    bad = 0
    for run in range(spec.runs_per_point):
        seed = point_run_seed(spec.seed_base, axis_index, run)
        scens = [scen.replace(intended_direction=t, seed=seed) for t in targets]
        nets = sample_cluster_networks(scens)
        cap = spec.max_trials
        outs = run_multi_cluster(nets, max_trials=cap, mode=spec.mode,
                                 full_log=False)
        if not all(o.converged for o in outs):
            bad += 1
            continue
        clusters = [ActiveCluster(net, out.selected, s.intended_direction)
                    for net, out, s in zip(nets, outs, scens)]
        samples.append(average_total_inr(
            clusters, victim, scen.num_selected, scen.target_snr,
            scen.noise_power))
    return samples, bad


def sweep_average_inr(spec: SweepSpec) -> list[EstimateRow]:
    """Mean post-selection INR at the victim BS versus 2 sigma_I^2 K.

    The prediction reads the truncated component variance: each quadrature of
    the total interference has variance sigma_w^2 sigma_I^2 per cluster, so
    the mean INR of K clusters is 2 sigma_I^2 K.
    """
    if spec.axis not in ("eta_thr", "L"):
        raise ValueError("average-INR sweeps vary eta_thr or L")
    k = len(spec.targets)
    rows = []
    for ai, value in enumerate(spec.values):
        scen = scenario_for(spec, value)
        pred = 2.0 * analysis.truncated_variance(scen) * k
        samples, bad = _inr_samples(spec, scen, k, ai)
        if samples:
            est, se = _mean_se(samples)
        else:
            est, se = None, None
        rows.append(EstimateRow(_axis_float(value), est, se, pred,
                                len(samples), bad))
    return rows


def empirical_ccdf(spec: SweepSpec, grid: Sequence[float]) -> list[EstimateRow]:
    """Empirical Pr{INR >= eta0} on a grid versus the Erlang tail prediction.

    One row per (axis value, grid point).  The INR statistic is the
    symbol-averaged total at the victim: per-cluster interference powers add,
    which is what the K-fold Erlang model describes.
    """
    if spec.axis not in ("eta_thr", "K"):
        raise ValueError("CCDF sweeps vary eta_thr or K")
    grid = [float(g) for g in grid]
    if any(g < 0.0 for g in grid):
        raise ValueError("INR grid levels must be nonnegative")
    rows = []
    for ai, value in enumerate(spec.values):
        scen = scenario_for(spec, value)
        k = int(value) if spec.axis == "K" else len(spec.targets)
        samples, bad = _inr_samples(spec, scen, k, ai)
        arr = np.asarray(samples, dtype=np.float64)
        n = arr.size
        for g in grid:
            pred = analysis.inr_ccdf(g, k, scen)
            if n:
                hits = int((arr >= g).sum())
                est = hits / n
                se = math.sqrt(est * (1.0 - est) / n)
            else:
                est, se = None, None
            rows.append(EstimateRow(_axis_float(value), est, se, pred, n,
                                    bad, eta0=g))
    return rows


def iid_trial_verdicts(scenario: Scenario, num_trials: int,
                       stream: np.random.Generator | None = None,
                       batch: int = 8192) -> np.ndarray:
    """Verdicts of independent single trials, fresh geometry and gains each.

    This is the exact i.i.d. Bernoulli setting of the acceptance-probability
    analysis: every trial draws its own L node positions and L x D shadowing
    gains.  (Selection runs on one fixed network are only approximately
    Bernoulli: the finite node pool makes trials share geometry.)  Batched to
    keep memory bounded.  Returns a boolean array, True = approved.
    """
    if stream is None:
        stream = RngStreams(scenario.seed).get("iid")
    ell = scenario.group_size
    dirs = np.asarray(scenario.unintended_directions)
    thr = scenario.inr_threshold
    scale = scenario.target_snr / ell
    m, sd = scenario.lognormal_mean, math.sqrt(scenario.lognormal_var)
    radius = scenario.disk_radius_wavelengths
    out = np.empty(num_trials, dtype=bool)
    done = 0
    while done < num_trials:
        b = min(batch, num_trials - done)
        if scenario.node_distribution.value == "uniform_disk":
            u = stream.random((2, b, ell))
            rho = radius * np.sqrt(u[0])
            psi = TWO_PI * u[1] - math.pi
        else:
            z = stream.standard_normal((2, b, ell))
            rho = radius * np.hypot(z[0], z[1])
            psi = np.arctan2(z[1], z[0])
        gains = np.exp(m + sd * stream.standard_normal((b, ell, dirs.size)))
        # delta[b, l, d] = theta(target) - theta(victim d)
        delta = -TWO_PI * rho[:, :, None] * (
            np.cos(scenario.intended_direction - psi)[:, :, None]
            - np.cos(dirs[None, None, :] - psi[:, :, None]))
        sx = (gains * np.cos(delta)).sum(axis=1)
        sy = (gains * -np.sin(delta)).sum(axis=1)
        inr = scale * (sx * sx + sy * sy)
        out[done:done + b] = np.all(inr <= thr, axis=1)
        done += b
    return out


def phase_difference_moments(num_draws: int,
                             stream: np.random.Generator,
                             batch: int = 1 << 18) -> dict[str, float]:
    """Empirical moments of cos/sin of the difference of two uniform phases.

    Draws num_draws pairs (theta1, theta2) uniform on [-pi, pi), forms
    u = theta1 - theta2 and returns the sample means and variances of cos(u)
    and sin(u).  The exact values are mean 0 and variance 0.5 for both.
    """
    if num_draws < 2:
        raise ValueError("need at least two draws")
    s = {"c": 0.0, "c2": 0.0, "s": 0.0, "s2": 0.0}
    done = 0
    while done < num_draws:
        b = min(batch, num_draws - done)
        th = TWO_PI * stream.random((2, b)) - math.pi
        u = th[0] - th[1]
        c, sn = np.cos(u), np.sin(u)
        s["c"] += c.sum()
        s["c2"] += (c * c).sum()
        s["s"] += sn.sum()
        s["s2"] += (sn * sn).sum()
        done += b
    n = float(num_draws)
    cm, sm = s["c"] / n, s["s"] / n
    return {
        "cos_mean": cm,
        "cos_var": (s["c2"] - n * cm * cm) / (n - 1.0),
        "sin_mean": sm,
        "sin_var": (s["s2"] - n * sm * sm) / (n - 1.0),
    }


def negative_binomial_trials(num_groups: int, p: float, num_sequences: int,
                             stream: np.random.Generator,
                             chunk: int = 64) -> np.ndarray:
    """Trial counts of simulated Bernoulli sequences run to num_groups successes.

    Each sequence draws Bernoulli(p) trials until the num_groups-th success and
    reports the total number of trials, final success included.  The mean is
    num_groups / p.
    """
    if num_groups < 1:
        raise ValueError("need at least one success")
    if not 0.0 < p <= 1.0:
        raise ValueError("success probability must be in (0, 1]")
    if num_sequences < 1:
        raise ValueError("need at least one sequence")
    trials = np.zeros(num_sequences, dtype=np.int64)
    counts = np.zeros(num_sequences, dtype=np.int64)
    active = np.arange(num_sequences)
    while active.size:
        draws = stream.random((active.size, chunk)) < p
        cum = counts[active][:, None] + np.cumsum(draws, axis=1)
        reached = cum >= num_groups
        done = reached[:, -1]
        if done.any():
            # first column where the running success count hits the target
            trials[active[done]] += np.argmax(reached[done], axis=1) + 1
        cont = ~done
        trials[active[cont]] += chunk
        counts[active[cont]] = cum[cont, -1]
        active = active[cont]
    return trials


def _axis_float(value) -> float:
    return float(value)


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def axis_column_name(axis: str) -> str:
    """CSV column name for the axis; thresholds serialize in dB."""
    return "eta_thr_db" if axis == "eta_thr" else axis


def write_sweep_csv(rows: Sequence[EstimateRow], path: str, axis: str,
                    with_eta0: bool = False):
    """One CSV per sweep; dB conversion happens only here, at the boundary."""
    header = [axis_column_name(axis)]
    if with_eta0:
        header.append("eta0_db")
    header += ["estimate", "std_error", "prediction", "n", "nonconverged"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            if axis == "eta_thr":
                first = _fmt(10.0 * math.log10(row.axis_value))
            elif axis in ("L", "D", "K", "N"):
                first = str(int(row.axis_value))
            else:
                first = _fmt(row.axis_value)
            out = [first]
            if with_eta0:
                if row.eta0 is None:
                    out.append("")
                elif row.eta0 > 0.0:
                    out.append(_fmt(10.0 * math.log10(row.eta0)))
                else:
                    out.append("-inf")
            out += [_fmt(row.estimate), _fmt(row.std_error),
                    _fmt(row.prediction), str(row.n), str(row.nonconverged)]
            writer.writerow(out)
