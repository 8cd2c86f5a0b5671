"""Experiment configuration, node geometry sampling, and the shared RNG contract.

Angle convention: radians everywhere inside the package, in [-pi, pi).  Degrees
exist only at the CLI/CSV boundary.  Powers and ratios are linear everywhere
inside the package; dB only at the boundary.

RNG contract: every randomized quantity is drawn from a named substream derived
from a single master seed, so that enabling or disabling one randomness source
(say, per-trial channel redraw) does not perturb any other.  Substreams are
``numpy.random.Generator`` instances seeded with
``SeedSequence([seed, sha256(label)[:8]])``; the label hash is stable across
processes and Python versions (never ``hash()``).
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import math
from typing import Iterable

import numpy as np

TWO_PI = 2.0 * math.pi

_SEED_MAX = 2**64


def wrap_angle(phi: float) -> float:
    """Map an angle in radians onto [-pi, pi)."""
    w = math.fmod(phi + math.pi, TWO_PI)
    if w < 0.0:
        w += TWO_PI
    return w - math.pi


class NodeDistribution(enum.Enum):
    UNIFORM_DISK = "uniform_disk"
    GAUSSIAN_DISK = "gaussian_disk"


@dataclasses.dataclass(frozen=True)
class Scenario:
    """Immutable experiment parameters.

    Attributes:
        num_candidates: M, nodes available in the coverage area.
        num_selected: N, nodes to end up in the collaborative set.
        group_size: L, nodes tested jointly per trial.
        disk_radius_wavelengths: R, deployment radius in units of the carrier
            wavelength (all node distances are carried in wavelength units).
        intended_direction: mainlobe target, radians in [-pi, pi).
        unintended_directions: victim directions phi_1..phi_D, radians.
        inr_threshold: per-victim INR approval threshold, linear ratio.
        target_snr: gamma, required SNR at the intended receiver, linear.
        noise_power: sigma_w^2, linear.
        lognormal_mean / lognormal_var: parameters (nepers, nepers^2) of the
            Gaussian underlying the shadowing gain a = exp(N(m, sigma^2)).
        node_distribution: spatial law for node placement.
        seed: master seed; every random draw downstream derives from it.
    """

    num_candidates: int
    num_selected: int
    group_size: int
    disk_radius_wavelengths: float
    intended_direction: float
    unintended_directions: tuple[float, ...]
    inr_threshold: float
    target_snr: float
    noise_power: float
    lognormal_mean: float = 0.0
    lognormal_var: float = 0.0
    node_distribution: NodeDistribution = NodeDistribution.UNIFORM_DISK
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "unintended_directions", tuple(float(d) for d in self.unintended_directions)
        )
        m, n, ell = self.num_candidates, self.num_selected, self.group_size
        if not (1 <= ell <= n <= m):
            raise ValueError(f"need 1 <= L <= N <= M, got L={ell} N={n} M={m}")
        if len(self.unintended_directions) < 1:
            raise ValueError("at least one unintended direction required")
        if not self.disk_radius_wavelengths > 0.0:
            raise ValueError("disk radius must be positive")
        if not self.noise_power > 0.0:
            raise ValueError("noise power must be positive")
        if not self.target_snr > 0.0:
            raise ValueError("target SNR must be positive")
        if not self.inr_threshold > 0.0:
            raise ValueError("INR threshold must be positive (linear units)")
        if self.lognormal_var < 0.0:
            raise ValueError("lognormal variance must be nonnegative")
        for phi in (self.intended_direction, *self.unintended_directions):
            if not (-math.pi <= phi < math.pi):
                raise ValueError(f"direction {phi!r} outside [-pi, pi)")
        if self.intended_direction in self.unintended_directions:
            raise ValueError("intended direction listed among unintended directions")
        if not 0 <= self.seed < _SEED_MAX:
            raise ValueError("seed must fit in 64 bits")
        if not isinstance(self.node_distribution, NodeDistribution):
            object.__setattr__(
                self, "node_distribution", NodeDistribution(self.node_distribution)
            )

    @property
    def num_unintended(self) -> int:
        return len(self.unintended_directions)

    @property
    def directions(self) -> tuple[float, ...]:
        """Intended direction first, then the victims; indices into this tuple
        are the BS indices used throughout (0 = intended)."""
        return (self.intended_direction, *self.unintended_directions)

    @property
    def num_groups(self) -> int:
        """T0 = ceil(N/L), approvals needed for a full collaborative set."""
        return -(-self.num_selected // self.group_size)

    @property
    def group_sizes(self) -> tuple[int, ...]:
        """Per-approval group sizes; the last group absorbs the remainder."""
        t0, n, ell = self.num_groups, self.num_selected, self.group_size
        last = n - ell * (t0 - 1)
        return (ell,) * (t0 - 1) + (last,)

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


@dataclasses.dataclass(frozen=True)
class NodePosition:
    """Polar node coordinates: radial distance in wavelengths, azimuth in radians."""

    rho: float
    psi: float

    def __post_init__(self):
        if self.rho < 0.0:
            raise ValueError("radial distance must be nonnegative")
        if not (-math.pi <= self.psi < math.pi):
            raise ValueError("azimuth outside [-pi, pi)")


def _label_entropy(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_stream(seed: int, label: str) -> np.random.Generator:
    """One named substream of the master seed (stable across runs and platforms)."""
    ss = np.random.SeedSequence(entropy=[int(seed), _label_entropy(label)])
    return np.random.Generator(np.random.PCG64(ss))


class RngStreams:
    """Bundle of named substreams for one master seed.

    Streams are created lazily and cached, one stateful Generator per label.
    Well-known labels: ``positions``, ``shadowing``, ``selection``, ``symbols``;
    arbitrary labels (e.g. ``positions/2`` for the third cluster of a
    multi-cluster experiment) derive the same way.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._cache: dict[str, np.random.Generator] = {}

    def get(self, label: str) -> np.random.Generator:
        if label not in self._cache:
            self._cache[label] = derive_stream(self.seed, label)
        return self._cache[label]

    @property
    def positions(self) -> np.random.Generator:
        return self.get("positions")

    @property
    def shadowing(self) -> np.random.Generator:
        return self.get("shadowing")

    @property
    def selection(self) -> np.random.Generator:
        return self.get("selection")

    @property
    def symbols(self) -> np.random.Generator:
        return self.get("symbols")


class PrefixedStreams:
    """View of an RngStreams with every label prefixed (``prefix/label``).

    Lets nested experiments (per-cluster draws, per-realization averages) pull
    independent substreams from one master seed without label collisions.
    """

    def __init__(self, base, prefix: str):
        self._base = base
        self._prefix = prefix
        self.seed = base.seed

    def get(self, label: str) -> np.random.Generator:
        return self._base.get(f"{self._prefix}/{label}")

    @property
    def positions(self) -> np.random.Generator:
        return self.get("positions")

    @property
    def shadowing(self) -> np.random.Generator:
        return self.get("shadowing")

    @property
    def selection(self) -> np.random.Generator:
        return self.get("selection")

    @property
    def symbols(self) -> np.random.Generator:
        return self.get("symbols")


class NetworkRealization:
    """One sampled network: node positions plus per-node/per-BS shadowing gains.

    Positions are stored as flat arrays (``rho``, ``psi``, length M) for speed;
    ``positions`` materializes ``NodePosition`` objects on demand.  ``shadowing``
    is an (M, D+1) matrix of linear gains; column order follows
    ``scenario.directions`` (column 0 = toward the intended BS).
    """

    def __init__(self, scenario: Scenario, rho: np.ndarray, psi: np.ndarray,
                 shadowing: np.ndarray):
        m, d1 = scenario.num_candidates, scenario.num_unintended + 1
        if rho.shape != (m,) or psi.shape != (m,):
            raise ValueError("position arrays must have length M")
        if shadowing.shape != (m, d1):
            raise ValueError(f"shadowing must be (M, D+1) = ({m}, {d1})")
        if not np.all(shadowing > 0.0):
            raise ValueError("shadowing gains must be positive")
        self.scenario = scenario
        self.rho = rho
        self.psi = psi
        self.shadowing = shadowing

    @property
    def positions(self) -> list[NodePosition]:
        return [NodePosition(float(r), float(p)) for r, p in zip(self.rho, self.psi)]


def sample_network(scenario: Scenario, streams: RngStreams | None = None,
                   ) -> NetworkRealization:
    """Draw one network realization for the scenario.

    Uniform disk: rho = R*sqrt(U1), psi = 2*pi*U2 - pi.  Gaussian disk:
    Cartesian coordinates i.i.d. zero-mean Gaussian with standard deviation R,
    converted to polar.  Draw order is fixed (positions stream: one (2, M)
    uniform or normal block; shadowing stream: one M*(D+1) block, node-major),
    so equal seeds give bit-identical realizations.
    """
    from . import channel  # deferred: channel imports nothing from here

    if streams is None:
        streams = RngStreams(scenario.seed)
    m = scenario.num_candidates
    r = scenario.disk_radius_wavelengths
    gen = streams.positions
    if scenario.node_distribution is NodeDistribution.UNIFORM_DISK:
        u = gen.random((2, m))
        rho = r * np.sqrt(u[0])
        psi = TWO_PI * u[1] - math.pi
    else:
        z = gen.standard_normal((2, m))
        x, y = r * z[0], r * z[1]
        rho = np.hypot(x, y)
        psi = np.arctan2(y, x)
        psi[psi == math.pi] = -math.pi  # arctan2 upper edge -> half-open range
    params = channel.LognormalParams(scenario.lognormal_mean, scenario.lognormal_var)
    gains = channel.draw_shadowing(
        params, m * (scenario.num_unintended + 1), streams.shadowing
    ).reshape(m, scenario.num_unintended + 1)
    return NetworkRealization(scenario, rho, psi, gains)


def far_field_distance(node: NodePosition, direction: float, a: float) -> float:
    """Far-field distance approximation d = A - rho*cos(direction - psi).

    Valid only when the observation range A dominates the node's radial
    distance; enforced as A >= 100*rho for the node at hand.
    """
    if a < 100.0 * node.rho:
        raise ValueError(f"far-field range too small: A={a} < 100*rho={100 * node.rho}")
    return a - node.rho * math.cos(direction - node.psi)


def iter_scenarios(base: Scenario, field: str, values: Iterable) -> list[Scenario]:
    """Convenience: base scenario with one field swept over values."""
    return [base.replace(**{field: v}) for v in values]
