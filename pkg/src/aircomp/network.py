"""Network scenarios and reproducible Rayleigh-fading channel draws."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Stage identifiers for seed derivation; appended to the master seed's spawn key.
STAGE_PLACEMENT = 0
STAGE_DIRECT = 1
STAGE_CROSS = 2


@dataclass(frozen=True)
class PathLoss:
    """Distance path loss ``ref_gain * (d / ref_distance) ** -exponent`` (power gain)."""

    ref_gain: float = 1e-6
    ref_distance: float = 10.0
    exponent: float = 3.0


@dataclass(frozen=True)
class NetworkScenario:
    ap_positions: np.ndarray
    devices_per_cell: tuple[int, ...]
    cell_radius: float
    power_budgets: np.ndarray
    noise_power: float
    pathloss: PathLoss = field(default_factory=PathLoss)

    def __post_init__(self):
        aps = np.atleast_2d(np.asarray(self.ap_positions, dtype=float))
        object.__setattr__(self, "ap_positions", aps)
        object.__setattr__(self, "devices_per_cell", tuple(int(k) for k in self.devices_per_cell))
        budgets = np.asarray(self.power_budgets, dtype=float)
        if budgets.ndim == 0:
            budgets = np.full(sum(self.devices_per_cell), float(budgets))
        object.__setattr__(self, "power_budgets", budgets)

        if aps.shape[1] != 2:
            raise ValueError("ap_positions must be an (L, 2) array")
        if len(self.devices_per_cell) != aps.shape[0] or aps.shape[0] < 1:
            raise ValueError("devices_per_cell must list one count per AP")
        if min(self.devices_per_cell) < 1:
            raise ValueError("every cell needs at least one device")
        if budgets.shape != (self.num_devices,) or np.any(budgets <= 0):
            raise ValueError("power_budgets must be positive, one per device")
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")
        if not self.cell_radius > 0:
            raise ValueError("cell_radius must be positive")

    @property
    def num_cells(self) -> int:
        return len(self.devices_per_cell)

    @property
    def num_devices(self) -> int:
        return sum(self.devices_per_cell)

    @property
    def cell_of(self) -> np.ndarray:
        """Serving cell of every device; devices are numbered cell by cell."""
        return np.repeat(np.arange(self.num_cells), self.devices_per_cell)


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``.

    The master seed is the entropy of a ``SeedSequence`` and ``key`` its spawn
    key, so e.g. ``derive_rng(seed, realization, STAGE_DIRECT)`` never overlaps
    with the stream of any other stage or realization.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def place_devices(scenario: NetworkScenario, seed: int, realization: int = 0) -> np.ndarray:
    """Uniform device positions in the disk of radius ``cell_radius`` around each AP."""
    rng = derive_rng(seed, realization, STAGE_PLACEMENT)
    n = scenario.num_devices
    radius = scenario.cell_radius * np.sqrt(rng.random(n))
    angle = 2.0 * np.pi * rng.random(n)
    centre = scenario.ap_positions[scenario.cell_of]
    return centre + np.column_stack((radius * np.cos(angle), radius * np.sin(angle)))


def pathloss_gain(distance, params: PathLoss = PathLoss()):
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise ValueError("path loss is singular at zero distance")
    gain = params.ref_gain * (distance / params.ref_distance) ** (-params.exponent)
    return gain if gain.ndim else float(gain)


def effective_interference(g, h):
    """Real part of the interference gain after the interferer's phase pre-rotation."""
    g = np.asarray(g, dtype=complex)
    h = np.asarray(h, dtype=complex)
    if np.any(h == 0):
        raise ValueError("direct channel must be nonzero")
    out = np.real(g * np.conj(h) / np.abs(h))
    return out if out.ndim else float(out)


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly symmetric complex Gaussian, unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


@dataclass(frozen=True)
class ChannelRealization:
    """One channel draw.

    ``g`` and ``g_eff`` are ``(K, L)``; the column of a device's own cell is
    zero and never used.  ``g_eff`` is the real effective interference gain
    seen at each foreign AP after the device's phase pre-rotation.
    """

    h: np.ndarray
    g: np.ndarray
    g_eff: np.ndarray
    cell_of: np.ndarray
    noise_power: float

    @classmethod
    def from_gains(cls, h, g_eff, cell_of, noise_power: float) -> "ChannelRealization":
        """Build a realization directly from direct gains and effective cross gains.

        Handy for hand-made instances: ``g`` is set equal to ``g_eff`` (real),
        which is consistent whenever ``h`` is real and positive.
        """
        h = np.asarray(h, dtype=complex)
        cell_of = np.asarray(cell_of, dtype=int)
        g_eff = np.array(g_eff, dtype=float).reshape(len(h), -1)
        g_eff[np.arange(len(h)), cell_of] = 0.0
        return cls(h=h, g=g_eff.astype(complex), g_eff=g_eff, cell_of=cell_of,
                   noise_power=float(noise_power))

    @property
    def num_cells(self) -> int:
        return self.g_eff.shape[1]

    @property
    def num_devices(self) -> int:
        return len(self.h)

    @property
    def h_abs(self) -> np.ndarray:
        return np.abs(self.h)

    def devices(self, ell: int) -> np.ndarray:
        return np.flatnonzero(self.cell_of == ell)

    def interference_power(self, powers, ell: int) -> float:
        """Received inter-cell interference power at AP ``ell``."""
        powers = np.asarray(powers, dtype=float)
        foreign = self.cell_of != ell
        return float(np.sum(powers[foreign] * self.g_eff[foreign, ell] ** 2))

    def scaled(self, factor: float) -> "ChannelRealization":
        """Same realization with every amplitude multiplied by ``factor``.

        MSE values are invariant when powers are kept and denoising factors are
        multiplied by ``factor**2``.
        """
        return ChannelRealization(self.h * factor, self.g * factor, self.g_eff * factor,
                                  self.cell_of, self.noise_power * factor**2)

    def to_bytes(self) -> bytes:
        return b"".join(np.ascontiguousarray(a).tobytes() for a in
                        (self.h, self.g, self.g_eff, self.cell_of, np.float64(self.noise_power)))


def sample_channels(scenario: NetworkScenario, positions: np.ndarray, seed: int,
                    realization: int = 0) -> ChannelRealization:
    """Rayleigh-faded direct and cross channels for the given device positions.

    The path-loss factor is a power gain, so amplitudes carry its square root.
    Direct and cross fading use separate derived streams.
    """
    cell_of = scenario.cell_of
    n, num_cells = scenario.num_devices, scenario.num_cells
    dist = np.linalg.norm(positions[:, None, :] - scenario.ap_positions[None, :, :], axis=2)
    amp = np.sqrt(pathloss_gain(dist, scenario.pathloss))

    rng_h = derive_rng(seed, realization, STAGE_DIRECT)
    h_bar = _complex_gaussian(rng_h, n)
    while np.any(h_bar == 0):
        zero = h_bar == 0
        h_bar[zero] = _complex_gaussian(rng_h, int(zero.sum()))
    g_bar = _complex_gaussian(derive_rng(seed, realization, STAGE_CROSS), (n, num_cells))

    rows = np.arange(n)
    h = amp[rows, cell_of] * h_bar
    g = amp * g_bar
    g[rows, cell_of] = 0.0
    g_eff = effective_interference(g, h[:, None])
    g_eff[rows, cell_of] = 0.0
    return ChannelRealization(h=h, g=g, g_eff=g_eff, cell_of=cell_of,
                              noise_power=scenario.noise_power)


def draw_realization(scenario: NetworkScenario, seed: int, realization: int = 0) -> ChannelRealization:
    """Positions and channels for realization number ``realization`` of ``seed``."""
    positions = place_devices(scenario, seed, realization)
    return sample_channels(scenario, positions, seed, realization)


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def two_cell_scenario(devices_per_cell: int = 20, power_budget: float = 1.0) -> NetworkScenario:
    """Two APs 40 m apart, 20 m cells, -60 dB at 10 m, exponent 3, -120 dBm noise."""
    return NetworkScenario(
        ap_positions=np.array([[0.0, 0.0], [0.0, 40.0]]),
        devices_per_cell=(devices_per_cell,) * 2,
        cell_radius=20.0,
        power_budgets=power_budget,
        noise_power=dbm_to_watts(-120.0),
        pathloss=PathLoss(db_to_linear(-60.0), 10.0, 3.0),
    )


def three_cell_scenario(devices_per_cell: int = 20, power_budget: float = 1.0) -> NetworkScenario:
    """The two-cell layout plus a third AP at (20 m, 40 m)."""
    base = two_cell_scenario(devices_per_cell, power_budget)
    return NetworkScenario(
        ap_positions=np.array([[0.0, 0.0], [0.0, 40.0], [20.0, 40.0]]),
        devices_per_cell=(devices_per_cell,) * 3,
        cell_radius=base.cell_radius,
        power_budgets=power_budget,
        noise_power=base.noise_power,
        pathloss=base.pathloss,
    )
