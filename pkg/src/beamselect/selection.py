"""Iterative node selection with per-BS interference gating.

Protocol: draw a candidate group of ``L`` nodes uniformly at random from the
remaining pool, let it transmit a synchronized test signal at per-node power
``sigma_w^2 * gamma / L``, measure the INR at every unintended BS, and approve
the group only if no BS sees INR above its threshold.  Rejected nodes return to
the pool; approved groups accumulate until ``ceil(N/L)`` groups (the last one
possibly smaller) cover the ``N`` required nodes.  Each trial's verdict is the
lowest-indexed BS whose threshold is exceeded, or approval.

Channel handling has two modes.  ``fixed`` (default) keeps the network's drawn
shadowing gains and geometry-derived phases for the whole run, the physical
situation of one deployed network.  ``redraw`` draws an independent uniform
phase and an independent lognormal gain for every node-to-BS path each trial,
so trials are memoryless draws from the ensemble the trial-count analysis
assumes: verdicts are i.i.d. Bernoulli by construction.  (Redrawing only the
gains while keeping one network's phases is not enough: a finite deployment's
empirical phase sum is offset from zero, which noticeably inflates trial
counts once groups are large relative to the pool.)

The trial loop runs in a kernel (compiled when available, numpy fallback
otherwise) with a fixed random-draw contract, so every run can be replayed
from its recorded stream state and audited bit for bit; see verify_outcome.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from typing import Sequence

import numpy as np

from . import _kernels
from .beampattern import phase_difference_components
from .core import NetworkRealization, RngStreams, Scenario

FIXED_CHANNEL = "fixed"
REDRAW_PER_TRIAL = "redraw"


@dataclasses.dataclass(frozen=True)
class TrialRecord:
    """One group test: members, measured INR per BS, and the verdict."""

    trial_index: int
    group: tuple[int, ...]
    per_bs_inr: tuple[float, ...]
    rejecting_bs: int | None        # None = approved, else lowest offending BS

    @property
    def approved(self) -> bool:
        return self.rejecting_bs is None

    @property
    def verdict(self) -> str:
        return "approved" if self.rejecting_bs is None else "rejected"


@dataclasses.dataclass
class SelectionState:
    """Bookkeeping after a run: leftover pool, approved groups, trial log."""

    pool: tuple[int, ...]                 # candidates never approved
    approved: tuple[tuple[int, ...], ...]
    trial_log: tuple[TrialRecord, ...]    # empty when logging was off

    @property
    def approved_count(self) -> int:
        return len(self.approved)


@dataclasses.dataclass
class SelectionOutcome:
    """Result of one selection run; ``converged`` False means the trial cap hit
    before all groups were approved and the state is partial."""

    scenario: Scenario
    selected: tuple[int, ...]
    trials: int
    converged: bool
    state: SelectionState
    mode: str
    thresholds: tuple[float, ...]
    max_trials: int
    target: float
    victims: tuple[float, ...]
    victim_columns: tuple[int, ...]
    initial_pool: tuple[int, ...]
    stream_state: dict
    backend: str

    def message_counts(self) -> dict[str, int]:
        """Control-traffic tally (select broadcasts, test transmissions,
        feedback messages); needs the trial log."""
        if not self.state.trial_log:
            raise ValueError("run with full_log=True to tally messages")
        tests = sum(len(rec.group) for rec in self.state.trial_log)
        rejects = sum(0 if rec.approved else 1 for rec in self.state.trial_log)
        return {
            "select_broadcasts": self.trials,
            "test_transmissions": tests,
            "reject_feedbacks": rejects,
            "approvals": self.trials - rejects,
        }


def _resolve_thresholds(scenario: Scenario, num_bs: int,
                        per_bs: Sequence[float] | None) -> tuple[float, ...]:
    if per_bs is None:
        return (scenario.inr_threshold,) * num_bs
    vals = tuple(float(t) for t in per_bs)
    if len(vals) != num_bs:
        raise ValueError(f"need {num_bs} thresholds, got {len(vals)}")
    if any(not t > 0.0 for t in vals):
        raise ValueError("thresholds must be positive")
    return vals


def _capture_state(gen: np.random.Generator) -> dict:
    import copy

    return copy.deepcopy(gen.bit_generator.state)


def _build_log(result: dict) -> tuple[TrialRecord, ...]:
    if result["verdicts"] is None:
        return ()
    records = []
    for t in range(result["trials"]):
        grp = result["groups"][t]
        grp = tuple(int(x) for x in grp[grp >= 0])
        inr = tuple(float(x) for x in result["inr_log"][t])
        v = int(result["verdicts"][t])
        records.append(TrialRecord(t, grp, inr, None if v < 0 else v))
    return tuple(records)


def _run_core(network: NetworkRealization, scenario: Scenario,
              gen: np.random.Generator, target: float,
              victims: tuple[float, ...], victim_cols: tuple[int, ...],
              pool: np.ndarray, max_trials: int, mode: str,
              thresholds: tuple[float, ...], full_log: bool) -> SelectionOutcome:
    cmat, smat = phase_difference_components(network, target, victims)
    if mode == FIXED_CHANNEL:
        afix = np.ascontiguousarray(network.shadowing[:, list(victim_cols)])
        mu = sigma = 0.0
    elif mode == REDRAW_PER_TRIAL:
        afix = None
        mu = scenario.lognormal_mean
        sigma = math.sqrt(scenario.lognormal_var)
    else:
        raise ValueError(f"mode must be {FIXED_CHANNEL!r} or {REDRAW_PER_TRIAL!r}")
    state0 = _capture_state(gen)
    result = _kernels.run_trials(
        gen, pool, cmat, smat, afix, mu, sigma, scenario.target_snr,
        np.asarray(thresholds, dtype=np.float64), scenario.group_sizes,
        max_trials, full_log)

    selected = tuple(int(x) for x in result["selected"])
    sel_set = set(selected)
    groups = []
    off = 0
    for gsize in scenario.group_sizes:
        if off + gsize <= len(selected):
            groups.append(selected[off:off + gsize])
        off += gsize
    leftover = tuple(int(x) for x in pool if int(x) not in sel_set)
    state = SelectionState(leftover, tuple(groups), _build_log(result))
    return SelectionOutcome(
        scenario=scenario, selected=selected, trials=result["trials"],
        converged=result["converged"], state=state, mode=mode,
        thresholds=thresholds, max_trials=max_trials, target=target,
        victims=victims, victim_columns=victim_cols,
        initial_pool=tuple(int(x) for x in pool), stream_state=state0,
        backend=_kernels.BACKEND)


def default_max_trials(scenario: Scenario) -> int:
    """Trial cap 10^4 * (number of groups): bounded runtime with an explicit
    non-convergence signal for thresholds no group can meet."""
    return 10_000 * scenario.num_groups


def run_selection(network: NetworkRealization, scenario: Scenario | None = None,
                  stream: np.random.Generator | None = None,
                  max_trials: int | None = None, mode: str = FIXED_CHANNEL,
                  per_bs_thresholds: Sequence[float] | None = None,
                  full_log: bool = True) -> SelectionOutcome:
    """Select N nodes for the network's intended BS, gating on all unintended BSs.

    ``stream`` defaults to the scenario seed's selection substream.  A scalar
    threshold comes from the scenario; ``per_bs_thresholds`` overrides it per
    unintended BS, in direction order.
    """
    if scenario is None:
        scenario = network.scenario
    elif scenario is not network.scenario and scenario != network.scenario:
        raise ValueError("scenario does not match the network realization")
    if stream is None:
        stream = RngStreams(scenario.seed).selection
    if max_trials is None:
        max_trials = default_max_trials(scenario)
    if max_trials < scenario.num_groups:
        raise ValueError("max_trials below the number of groups to approve")
    victims = tuple(scenario.unintended_directions)
    victim_cols = tuple(range(1, scenario.num_unintended + 1))
    thresholds = _resolve_thresholds(scenario, len(victims), per_bs_thresholds)
    pool = np.arange(scenario.num_candidates, dtype=np.intp)
    return _run_core(network, scenario, stream, scenario.intended_direction,
                     victims, victim_cols, pool, int(max_trials), mode,
                     thresholds, full_log)


def _replay(outcome: SelectionOutcome, network: NetworkRealization):
    """Re-derive every trial from the recorded stream state in pure Python.

    Returns (trials, selected, verdicts, inrs, groups) or raises ValueError if
    the outcome's recorded structure cannot be reproduced.
    """
    scenario = outcome.scenario
    cmat, smat = phase_difference_components(network, outcome.target,
                                             outcome.victims)
    fixed = outcome.mode == FIXED_CHANNEL
    if fixed:
        afix = np.ascontiguousarray(network.shadowing[:, list(outcome.victim_columns)])
    mu = scenario.lognormal_mean
    sigma = math.sqrt(scenario.lognormal_var)
    gen = np.random.Generator(np.random.PCG64())
    gen.bit_generator.state = outcome.stream_state
    pool = list(outcome.initial_pool)
    n = len(pool)
    nbs = len(outcome.victims)
    thr = outcome.thresholds
    gamma = scenario.target_snr

    trials = 0
    start = 0
    verdicts: list[int] = []
    inrs: list[tuple[float, ...]] = []
    groups: list[tuple[int, ...]] = []
    converged = True
    for gsize in scenario.group_sizes:
        scale = gamma / gsize
        while True:
            if trials >= outcome.max_trials:
                converged = False
                break
            u = gen.random(gsize)
            for i in range(gsize):
                pos = start + i
                j = pos + int(u[i] * (n - pos))
                if j >= n:
                    j = n - 1
                pool[pos], pool[j] = pool[j], pool[pos]
            group = tuple(pool[start:start + gsize])
            if not fixed:
                u2 = gen.random((gsize, nbs))
                z = gen.standard_normal((gsize, nbs))
            inr_row = []
            verdict = -1
            for d in range(nbs):
                sx = 0.0
                sy = 0.0
                for i, node in enumerate(group):
                    if fixed:
                        a = float(afix[node, d])
                        c = float(cmat[node, d])
                        s = float(smat[node, d])
                    else:
                        a = math.exp(mu + sigma * float(z[i, d]))
                        th = math.tau * float(u2[i, d])
                        c = math.cos(th)
                        s = math.sin(th)
                    sx += a * c
                    sy += a * s
                val = scale * (sx * sx + sy * sy)
                inr_row.append(val)
                if verdict < 0 and val > thr[d]:
                    verdict = d
            trials += 1
            verdicts.append(verdict)
            inrs.append(tuple(inr_row))
            groups.append(group)
            if verdict < 0:
                start += gsize
                break
        if not converged:
            break
    return trials, tuple(pool[:start]), verdicts, inrs, groups, converged


def verify_outcome(outcome: SelectionOutcome, network: NetworkRealization,
                   scenario: Scenario | None = None,
                   inr_rel_tol: float = 1e-9) -> bool:
    """Audit a selection outcome from raw network data, trusting nothing.

    Checks structure (sizes, disjointness, membership), replays the whole trial
    sequence from the recorded stream state, and confirms that every approved
    group's recomputed INR is within threshold at every unintended BS and that
    every recorded verdict matches the recomputed interference.  Returns False
    for non-converged (partial) outcomes and for any tampered field.
    """
    if scenario is None:
        scenario = outcome.scenario
    if not outcome.converged:
        return False
    if scenario.directions != (outcome.target,) + outcome.victims:
        return False
    sel = outcome.selected
    if len(sel) != scenario.num_selected or len(set(sel)) != len(sel):
        return False
    if any(not 0 <= i < scenario.num_candidates for i in sel):
        return False
    if not set(sel) <= set(outcome.initial_pool):
        return False
    if set(sel) & set(outcome.state.pool):
        return False
    flat = [i for grp in outcome.state.approved for i in grp]
    if tuple(flat) != sel:
        return False
    if tuple(len(g) for g in outcome.state.approved) != scenario.group_sizes:
        return False
    if outcome.trials < scenario.num_groups:
        return False

    try:
        trials, selected, verdicts, inrs, groups, converged = _replay(
            outcome, network)
    except (ValueError, TypeError, KeyError):
        return False
    if not converged or trials != outcome.trials or selected != sel:
        return False
    for d_inr, v in zip(inrs, verdicts):
        if v < 0:
            if any(val > t for val, t in zip(d_inr, outcome.thresholds)):
                return False
        else:
            if not d_inr[v] > outcome.thresholds[v]:
                return False
    if outcome.state.trial_log:
        if len(outcome.state.trial_log) != trials:
            return False
        for rec, grp, v, inr_row in zip(outcome.state.trial_log, groups,
                                        verdicts, inrs):
            if rec.group != grp:
                return False
            if (rec.rejecting_bs if rec.rejecting_bs is not None else -1) != v:
                return False
            for a, b in zip(rec.per_bs_inr, inr_row):
                if abs(a - b) > inr_rel_tol * max(abs(a), abs(b), 1e-300):
                    return False
    return True


def multi_cluster_scenarios(base: Scenario, targets: Sequence[float],
                            extra_victims: Sequence[float] = ()) -> list[Scenario]:
    """One scenario per cluster: its own target, everyone else's target plus
    any extra directions as unintended BSs."""
    targets = [float(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValueError("cluster targets must be distinct")
    out = []
    for k, tgt in enumerate(targets):
        others = tuple(t for t in targets if t != tgt) + tuple(extra_victims)
        out.append(base.replace(intended_direction=tgt,
                                unintended_directions=others))
    return out


def sample_cluster_networks(scenarios: Sequence[Scenario],
                            streams: RngStreams | None = None,
                            ) -> list[NetworkRealization]:
    """One independent network per cluster scenario.

    Cluster k draws through the substream prefix ``cluster/k``, so clusters
    sharing one master seed still get independent node positions and gains.
    """
    from .core import PrefixedStreams, sample_network

    if streams is None:
        streams = RngStreams(scenarios[0].seed)
    return [sample_network(scen, PrefixedStreams(streams, f"cluster/{k}"))
            for k, scen in enumerate(scenarios)]


def run_multi_cluster(networks: Sequence[NetworkRealization],
                      streams: RngStreams | None = None,
                      max_trials: int | None = None, mode: str = FIXED_CHANNEL,
                      shared_pool: bool = False,
                      targets: Sequence[float] | None = None,
                      full_log: bool = False) -> list[SelectionOutcome]:
    """Select nodes for several clusters, one outcome per intended BS.

    Independent-pools variant (default): one network per cluster, each defining
    its own target via its own scenario (see multi_cluster_scenarios and
    sample_cluster_networks); cluster k draws trials from the substream
    ``cluster/k/selection``.

    Shared-pool variant (``shared_pool=True``): a single network whose
    direction list covers all cluster targets (pass ``targets``); clusters
    select sequentially and approved nodes leave the pool, so selected sets are
    pairwise disjoint.  A pool too small for the next cluster yields a
    non-converged outcome for it.
    """
    if shared_pool:
        if len(networks) != 1:
            raise ValueError("shared-pool variant takes exactly one network")
        if targets is None or len(targets) < 2:
            raise ValueError("shared-pool variant needs the cluster targets")
        net = networks[0]
        dirs = net.scenario.directions
        for t in targets:
            if t not in dirs:
                raise ValueError("every cluster target must be a BS direction "
                                 "of the shared network")
        if streams is None:
            streams = RngStreams(net.scenario.seed)
        outcomes = []
        pool = list(range(net.scenario.num_candidates))
        for k, tgt in enumerate(targets):
            scen = net.scenario.replace(
                intended_direction=tgt,
                unintended_directions=tuple(d for d in dirs if d != tgt))
            gen = streams.get(f"cluster/{k}/selection")
            cap = default_max_trials(scen) if max_trials is None else int(max_trials)
            thresholds = _resolve_thresholds(scen, scen.num_unintended, None)
            victims = scen.unintended_directions
            vcols = tuple(dirs.index(v) for v in victims)
            if len(pool) < scen.num_selected:
                outcomes.append(SelectionOutcome(
                    scenario=scen, selected=(), trials=0, converged=False,
                    state=SelectionState(tuple(pool), (), ()), mode=mode,
                    thresholds=thresholds, max_trials=cap, target=tgt,
                    victims=victims, victim_columns=vcols,
                    initial_pool=tuple(pool), stream_state=_capture_state(gen),
                    backend=_kernels.BACKEND))
                continue
            out = _run_core(net, scen, gen, tgt, victims, vcols,
                            np.asarray(pool, dtype=np.intp), cap, mode,
                            thresholds, full_log)
            outcomes.append(out)
            if out.converged:
                taken = set(out.selected)
                pool = [i for i in pool if i not in taken]
        return outcomes

    if targets is not None:
        for net, t in zip(networks, targets):
            if float(t) != net.scenario.intended_direction:
                raise ValueError(
                    "independent-pool clusters take their targets from their "
                    "own scenarios; build the networks from per-cluster "
                    "scenarios instead of passing targets here")
    outcomes = []
    for k, net in enumerate(networks):
        scen = net.scenario
        gen = (streams if streams is not None
               else RngStreams(scen.seed)).get(f"cluster/{k}/selection")
        cap = default_max_trials(scen) if max_trials is None else int(max_trials)
        outcomes.append(run_selection(net, None, gen, cap, mode, None, full_log))
    return outcomes


def write_trial_log_csv(outcome: SelectionOutcome, path: str):
    """Audit CSV: trial_index, verdict, rejecting_bs, inr_db_bs0..bsD-1."""
    if not outcome.state.trial_log:
        raise ValueError("run with full_log=True to export a trial log")
    nbs = len(outcome.victims)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial_index", "verdict", "rejecting_bs"]
                        + [f"inr_db_bs{d}" for d in range(nbs)])
        for rec in outcome.state.trial_log:
            row = [rec.trial_index, rec.verdict,
                   "" if rec.rejecting_bs is None else rec.rejecting_bs]
            for val in rec.per_bs_inr:
                row.append(repr(10.0 * math.log10(val)) if val > 0.0
                           else "-inf")
            writer.writerow(row)
