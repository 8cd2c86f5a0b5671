"""Array factor, beampatterns, and interference seen at unintended receivers.

Phase conventions (distances in wavelength units):

* closed-loop initial phase toward a direction phi_k:
      theta_r(phi_k) = -2*pi * rho_r * cos(phi_k - psi_r)
* propagation to the far field at angle phi contributes +2*pi*rho_r*cos(phi - psi_r)
  after the constant range term is dropped as a global phase.

So the per-node exponent of the array factor is
``theta_r + 2*pi*rho_r*cos(phi - psi_r)``, which is exactly 0.0 at the
synchronization target: the coherent peak N^2*P holds to the last bit, not just
to rounding.

Beampatterns (pure geometry) exclude channel gains; the interference/INR
operations include the per-victim shadowing gains.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from typing import NamedTuple, Sequence

import numpy as np

from .core import (TWO_PI, NetworkRealization, PrefixedStreams, RngStreams,
                   Scenario, sample_network)


@dataclasses.dataclass(frozen=True)
class PhaseAssignment:
    """Closed-loop initial phases for one node set, aimed at ``target_direction``."""

    initial_phases: np.ndarray      # theta_r, one per node in node_set order
    target_direction: float


@dataclasses.dataclass(frozen=True)
class BeampatternSample:
    angles: np.ndarray           # radians
    power: np.ndarray            # linear, same length
    node_set: tuple[int, ...]
    per_node_power: float

    def __post_init__(self):
        if self.angles.shape != self.power.shape:
            raise ValueError("angles and power must have equal length")


@dataclasses.dataclass(frozen=True)
class InterferenceComponents:
    """Real/imaginary interference sums at one victim for one candidate group."""

    x: float
    y: float

    @property
    def power(self) -> float:
        return self.x * self.x + self.y * self.y


class ActiveCluster(NamedTuple):
    """A selected node set transmitting toward its own target."""

    network: NetworkRealization
    nodes: tuple[int, ...]
    target: float


def default_angle_grid(points: int = 3601) -> np.ndarray:
    """Uniform angle grid over [-pi, pi]; 3601 points = 0.1 degree steps."""
    return np.linspace(-math.pi, math.pi, points)


def synchronize(network: NetworkRealization, node_set: Sequence[int],
                target: float) -> PhaseAssignment:
    """Ideal closed-loop phases theta_r = -2*pi*rho_r*cos(target - psi_r)."""
    idx = np.asarray(node_set, dtype=np.intp)
    if idx.size == 0:
        raise ValueError("node set must not be empty")
    theta = -TWO_PI * network.rho[idx] * np.cos(target - network.psi[idx])
    return PhaseAssignment(theta, float(target))


def array_factor(network: NetworkRealization, node_set: Sequence[int],
                 phases: PhaseAssignment, per_node_power: float,
                 direction: float) -> complex:
    """Complex array factor sqrt(P) * sum_r exp(j(theta_r + 2 pi rho_r cos(phi - psi_r)))."""
    idx = np.asarray(node_set, dtype=np.intp)
    if idx.size != phases.initial_phases.size:
        raise ValueError("phase list does not match node set")
    if not per_node_power > 0.0:
        raise ValueError("per-node power must be positive")
    expo = phases.initial_phases + TWO_PI * network.rho[idx] * np.cos(
        direction - network.psi[idx])
    total = np.exp(1j * expo).sum()
    return complex(math.sqrt(per_node_power) * total)


def sample_beampattern(network: NetworkRealization, node_set: Sequence[int],
                       phases: PhaseAssignment, per_node_power: float,
                       angle_grid: np.ndarray) -> BeampatternSample:
    """BP(phi) = |array factor|^2 on the grid, channel gains excluded.

    Computed as P * |sum of unit phasors|^2 so the coherent peak equals N^2 * P
    exactly (the unit-phasor sum at the target is the exact integer N).
    """
    idx = np.asarray(node_set, dtype=np.intp)
    if idx.size == 0:
        raise ValueError("node set must not be empty")
    grid = np.asarray(angle_grid, dtype=np.float64)
    expo = phases.initial_phases[None, :] + TWO_PI * network.rho[None, idx] * np.cos(
        grid[:, None] - network.psi[None, idx])
    s = np.exp(1j * expo).sum(axis=1)
    power = per_node_power * (s.real * s.real + s.imag * s.imag)
    return BeampatternSample(grid, power, tuple(int(i) for i in idx), per_node_power)


def phase_difference_components(network: NetworkRealization, target: float,
                                victims: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """cos/sin tables of the sync-phase differences, used by selection kernels.

    Delta[r, d] = theta_r(target) - theta_r(victim_d).  Returns
    (cos(Delta), Im exp(-j Delta)) = (cos(Delta), -sin(Delta)) as (M, D) arrays.
    """
    rho, psi = network.rho, network.psi
    theta_t = -TWO_PI * rho * np.cos(target - psi)
    out_c = np.empty((rho.size, len(victims)))
    out_s = np.empty_like(out_c)
    for d, phi in enumerate(victims):
        delta = theta_t - (-TWO_PI * rho * np.cos(phi - psi))
        out_c[:, d] = np.cos(delta)
        out_s[:, d] = -np.sin(delta)
    return out_c, out_s


def group_interference(network: NetworkRealization, group: Sequence[int],
                       target_index: int, victim_index: int,
                       per_node_power: float) -> InterferenceComponents:
    """Interference components (X, Y) of one candidate group at one victim BS.

    X = sqrt(P) * sum_r a_r * cos(Delta_r), Y = sqrt(P) * sum_r a_r * (-sin(Delta_r)),
    Delta_r = theta_r(target) - theta_r(victim); a_r is the shadowing gain from
    node r toward the victim.  Interference power is X^2 + Y^2.

    Sums accumulate sequentially in the given node order: the value matches the
    compiled selection kernel's per-trial INR bit for bit, which keeps outcome
    replay (verify_outcome) exact.
    """
    if len(group) == 0:
        raise ValueError("group must not be empty")
    if victim_index == target_index:
        raise ValueError("victim BS must differ from the target BS")
    dirs = network.scenario.directions
    target, victim = dirs[target_index], dirs[victim_index]
    rho, psi = network.rho, network.psi
    gains = network.shadowing[:, victim_index]
    sqrt_p = math.sqrt(per_node_power)
    sx = 0.0
    sy = 0.0
    for r in group:
        delta = (-TWO_PI * rho[r] * math.cos(target - psi[r])) - (
            -TWO_PI * rho[r] * math.cos(victim - psi[r]))
        a = gains[r]
        sx += a * math.cos(delta)
        sy += a * -math.sin(delta)
    return InterferenceComponents(sqrt_p * sx, sqrt_p * sy)


def _cluster_amplitude(cluster: ActiveCluster, victim_direction: float,
                       per_node_amp: float) -> complex:
    """Complex interference amplitude of one cluster at the victim direction.

    Per-node factor a_r * exp(j Delta_r) with Delta_r = theta_r(victim) -
    theta_r(cluster target); the shadowing gain toward the victim is looked up
    by direction in the cluster's own scenario.
    """
    net, nodes, target = cluster
    dirs = net.scenario.directions
    try:
        vcol = dirs.index(victim_direction)
    except ValueError:
        raise ValueError(
            "victim direction not among the cluster network's BS directions"
        ) from None
    idx = np.asarray(nodes, dtype=np.intp)
    rho, psi = net.rho[idx], net.psi[idx]
    delta = (-TWO_PI * rho * np.cos(victim_direction - psi)) - (
        -TWO_PI * rho * np.cos(target - psi))
    a = net.shadowing[idx, vcol]
    return per_node_amp * complex(np.sum(a * np.exp(1j * delta)))


def _check_disjoint(clusters: Sequence[ActiveCluster]):
    by_net: dict[int, set[int]] = {}
    for net, nodes, _ in clusters:
        seen = by_net.setdefault(id(net), set())
        s = set(nodes)
        if seen & s:
            raise ValueError("active clusters on one network must be disjoint")
        seen |= s


def total_received_inr(clusters: Sequence[ActiveCluster], victim_direction: float,
                       num_selected: int, target_snr: float, noise_power: float,
                       symbols: Sequence[complex] | None = None,
                       stream: np.random.Generator | None = None) -> float:
    """Instantaneous INR at the victim for one vector of data symbols.

    eta = |sum_k z_k * C_k|^2 / sigma_w^2 where C_k is cluster k's complex
    amplitude with per-node amplitude sqrt(sigma_w^2 * gamma / N), and the z_k
    are unit-magnitude symbols (given, or drawn as uniform random phases from
    ``stream``).  Clusters sharing a network must use disjoint node sets.
    """
    _check_disjoint(clusters)
    if not clusters:
        return 0.0
    if symbols is None:
        if stream is None:
            raise ValueError("provide symbols or a stream to draw them from")
        symbols = np.exp(1j * TWO_PI * stream.random(len(clusters)))
    if len(symbols) != len(clusters):
        raise ValueError("one symbol per cluster required")
    amp = math.sqrt(noise_power * target_snr / num_selected)
    total = 0.0 + 0.0j
    for z, cluster in zip(symbols, clusters):
        total += z * _cluster_amplitude(cluster, victim_direction, amp)
    return abs(total) ** 2 / noise_power


def average_total_inr(clusters: Sequence[ActiveCluster], victim_direction: float,
                      num_selected: int, target_snr: float,
                      noise_power: float) -> float:
    """Symbol-averaged INR at the victim: sum of per-cluster INR powers.

    Averaging the instantaneous INR over independent zero-mean unit-power
    symbols kills the cross-cluster terms, leaving sum_k |C_k|^2 / sigma_w^2.
    This is the statistic a receiver measures over a long symbol stream and the
    one the Erlang tail model describes.
    """
    _check_disjoint(clusters)
    amp = math.sqrt(noise_power * target_snr / num_selected)
    total = 0.0
    for cluster in clusters:
        total += abs(_cluster_amplitude(cluster, victim_direction, amp)) ** 2
    return total / noise_power


def average_beampattern(scenario: Scenario, angle_grid: np.ndarray,
                        realizations: int, streams: RngStreams,
                        node_count: int | None = None) -> BeampatternSample:
    """Mean beampattern of random ``node_count``-node subsets over fresh networks.

    Per-node power is sigma_w^2 * gamma / N (the data-phase budget); each
    realization draws a fresh network and takes its first N sampled nodes (the
    sampling order is already uniform).
    """
    n = scenario.num_selected if node_count is None else node_count
    p = scenario.noise_power * scenario.target_snr / n
    grid = np.asarray(angle_grid, dtype=np.float64)
    acc = np.zeros_like(grid)
    root = RngStreams(streams.seed)
    for i in range(realizations):
        net = sample_network(scenario, PrefixedStreams(root, f"avg/{i}"))
        nodes = np.arange(n)
        ph = synchronize(net, nodes, scenario.intended_direction)
        acc += sample_beampattern(net, nodes, ph, p, grid).power
    return BeampatternSample(grid, acc / realizations, tuple(range(n)), p)


def expected_average_pattern(n: int, disk_radius: float,
                             offsets: np.ndarray) -> np.ndarray:
    """Closed-form normalized average beampattern of a uniform disk.

    E{BP}/(N^2 P) = |mu|^2 + (1 - |mu|^2)/N with mu(phi) = 2 J1(z)/z,
    z = 4 pi R |sin((phi - phi0)/2)|; ``offsets`` are phi - phi0 in radians.
    """
    from scipy.special import j1

    z = 4.0 * math.pi * disk_radius * np.abs(np.sin(np.asarray(offsets) / 2.0))
    mu = np.ones_like(z)
    nz = z > 0.0
    mu[nz] = 2.0 * j1(z[nz]) / z[nz]
    return mu * mu + (1.0 - mu * mu) / n


def average_beampattern_peaks(disk_radius: float, count: int = 2) -> list[float]:
    """Offsets (radians, positive side) of the first sidelobe peaks of the
    closed-form average beampattern.

    The normalized pattern is (2 J1(z)/z)^2 with z = 4 pi R sin(offset/2), whose
    maxima sit at the zeros of J2; offsets beyond the visible region (z larger
    than 4 pi R) are dropped.
    """
    from scipy.special import jn_zeros

    zmax = 4.0 * math.pi * disk_radius
    peaks = []
    for z in jn_zeros(2, count):
        if z < zmax:
            peaks.append(2.0 * math.asin(z / zmax))
    return peaks


def write_beampattern_csv(sample: BeampatternSample, path: str):
    """CSV with columns (angle_deg, power_db); LF line endings, header row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["angle_deg", "power_db"])
        for ang, pw in zip(sample.angles, sample.power):
            db = 10.0 * math.log10(pw) if pw > 0.0 else float("-inf")
            writer.writerow([repr(math.degrees(float(ang))), repr(db)])
