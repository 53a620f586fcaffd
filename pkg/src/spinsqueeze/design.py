"""Experimental-feasibility calculators: loss budgets, laser and delay limits.

Every relation here is an order-of-magnitude estimate (the underlying
derivations carry "~", not "="); the calculators return point values and the
reports annotate them as order-of-magnitude.  "Much less than" verdicts use a
fixed ratio threshold of 0.1, reported alongside the verdict.  All quantities
are SI.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# CODATA, hard-coded: the only physics constants the package needs
HBAR = 1.054571817e-34      # J s
C_LIGHT = 2.99792458e8      # m / s

MUCH_LESS_THAN = 0.1        # ratio defining "<<" verdicts


@dataclass(frozen=True)
class ExperimentalParams:
    """Physical parameters of a probe-and-feedback setup.

    regime selects which coupling fields are required: "cavity" needs kappa
    (cavity linewidth, 1/s) and g (one-photon Rabi frequency, rad/s);
    "freespace" needs area (beam cross-section, m^2).  gamma is the
    spontaneous-emission rate (1/s, plain linewidth number without 2*pi),
    wavelength the probe wavelength (m), power the probe/LO power (W),
    detuning the probe detuning (rad/s), feedback_delay the loop latency (s).
    omega defaults to 2*pi*c/wavelength.
    """

    regime: str
    n_atoms: float
    gamma: float
    wavelength: float
    power: float
    detuning: float
    kappa: float | None = None
    g: float | None = None
    area: float | None = None
    feedback_delay: float | None = None
    omega: float | None = None

    def __post_init__(self):
        if self.regime not in ("cavity", "freespace"):
            raise ValueError(f"regime must be 'cavity' or 'freespace', got {self.regime!r}")
        for name in ("n_atoms", "gamma", "wavelength", "power", "detuning"):
            val = getattr(self, name)
            if val is None or val <= 0 or not np.isfinite(val):
                raise ValueError(f"{name} must be positive, got {val!r}")
        if self.regime == "cavity":
            if self.kappa is None or self.g is None:
                raise ValueError("cavity regime requires kappa and g")
            if self.kappa <= 0 or self.g <= 0:
                raise ValueError("kappa and g must be positive")
        else:
            if self.area is None or self.area <= 0:
                raise ValueError("freespace regime requires a positive area")
        if self.feedback_delay is not None and self.feedback_delay <= 0:
            raise ValueError("feedback_delay must be positive when given")
        if self.omega is not None and self.omega <= 0:
            raise ValueError("omega must be positive when given")

    @property
    def probe_omega(self) -> float:
        return self.omega if self.omega is not None else 2.0 * np.pi * C_LIGHT / self.wavelength


def cesium_preset(regime: str = "freespace", n_atoms: float = 1e7,
                  power: float = 1e-15, detuning: float = 1e9,
                  feedback_delay: float | None = 1e-7, **overrides) -> ExperimentalParams:
    """Worked example: Cs D2 probe (852 nm, gamma = 5 MHz), N = 1e7 atoms,
    femtowatt power at 1 GHz detuning."""
    base = dict(regime=regime, n_atoms=n_atoms, gamma=5e6, wavelength=852e-9,
                power=power, detuning=detuning, feedback_delay=feedback_delay)
    if regime == "freespace":
        base["area"] = overrides.pop("area", (852e-9) ** 2 / (16 * np.pi**2))
    base.update(overrides)
    return ExperimentalParams(**base)


def alpha(params: ExperimentalParams) -> float:
    """Photon-scattering cost parameter: loss rate per unit measurement rate.

    kappa*gamma/g^2 in a cavity, 16 pi^2 A / wavelength^2 in free space.
    The diffraction-scale area wavelength^2/(16 pi^2) marks alpha = 1, the
    best a free-space probe can do.
    """
    if params.regime == "cavity":
        return params.kappa * params.gamma / params.g**2
    return 16.0 * np.pi**2 * params.area / params.wavelength**2


@dataclass(frozen=True)
class LossBudget:
    loss_rate: float        # Gamma = alpha * M, per atom (1/s)
    atoms_lost: float       # alpha * M * N * t
    total_loss: bool        # atoms_lost >= N


def loss_rate_and_budget(alpha_value: float, m: float, n_atoms: float,
                         t: float) -> LossBudget:
    """Single-atom loss rate Gamma = alpha*M and atoms lost by time t,
    Delta N = alpha*M*N*t (flagged when it reaches the whole sample)."""
    for name, val in (("alpha", alpha_value), ("m", m), ("n_atoms", n_atoms), ("t", t)):
        if val < 0 or not np.isfinite(val):
            raise ValueError(f"{name} must be >= 0, got {val}")
    rate = alpha_value * m
    lost = rate * n_atoms * t
    return LossBudget(loss_rate=rate, atoms_lost=lost, total_loss=lost >= n_atoms)


@dataclass(frozen=True)
class SqueezingOutlook:
    xi2: float              # ~ sqrt(alpha/N)
    regime: str             # "heisenberg" | "sqrt-n" | "partial" | "none"


def attainable_squeezing(alpha_value: float, n_atoms: float) -> SqueezingOutlook:
    """Squeezing attainable before photon scattering destroys it.

    Balancing atoms lost against the loss budget of the entangled state gives
    xi2 ~ sqrt(alpha/N): Heisenberg-capable needs alpha <~ 1/N, alpha ~ 1
    leaves 1/sqrt(N)-level squeezing, and alpha >= N leaves none.
    """
    if alpha_value <= 0 or n_atoms < 1:
        raise ValueError("alpha must be positive and n_atoms >= 1")
    xi2 = float(np.sqrt(alpha_value / n_atoms))
    if alpha_value >= n_atoms:
        label = "none"
    elif alpha_value <= 1.0 / n_atoms:
        label = "heisenberg"
    elif alpha_value <= 1.0:
        label = "sqrt-n"
    else:
        label = "partial"
    return SqueezingOutlook(xi2=xi2, regime=label)


@dataclass(frozen=True)
class LaserConstraints:
    m: float                    # measurement strength (1/s)
    power_bound: float          # bound on P/Delta^2 (W s^2 / rad^2)
    far_detuned_ok: bool        # P/Delta^2 < 0.1 * bound
    far_detuned_ratio: float
    tau_fb_required: float      # feedback must act within ~1/(N M) (s)
    delay_ok: bool | None       # None when no delay was given


def laser_constraints(params: ExperimentalParams,
                      alpha_override: float | None = None) -> LaserConstraints:
    """Probe-laser and feedback-latency constraints.

    M re-expressed through the loss parameter is gamma^2 P / (hbar omega
    Delta^2 alpha^2); the far-detuned requirement Gamma << gamma becomes
    P/Delta^2 << hbar omega alpha / gamma; and the feedback loop must act
    within tau_fb ~ 1/(N M) = hbar omega Delta^2 alpha^2 / (N P gamma^2).
    """
    a = alpha(params) if alpha_override is None else float(alpha_override)
    if a <= 0:
        raise ValueError(f"alpha must be positive, got {a}")
    hw = HBAR * params.probe_omega
    m = params.gamma**2 * params.power / (hw * params.detuning**2 * a**2)
    power_bound = hw * a / params.gamma
    ratio = (params.power / params.detuning**2) / power_bound
    tau_fb = 1.0 / (params.n_atoms * m)
    delay_ok = None
    if params.feedback_delay is not None:
        delay_ok = params.feedback_delay <= tau_fb
    return LaserConstraints(m=m, power_bound=power_bound,
                            far_detuned_ok=ratio < MUCH_LESS_THAN,
                            far_detuned_ratio=ratio,
                            tau_fb_required=tau_fb, delay_ok=delay_ok)


@dataclass(frozen=True)
class SingleShotFloor:
    err_variance: float         # ~ eps^2 N / 4, grows with N
    xi2_floor: float            # eps^2, independent of N


def single_shot_floor(epsilon: float, n_atoms: float) -> SingleShotFloor:
    """Error floor of single-pulse (measure once, kick once) feedback.

    A relative gain error eps leaves a residual variance ~ eps^2 N/4 that
    dominates for large N, so xi2 can never fall below eps^2 -- unlike the
    continuous scheme, whose 1/N scaling survives gain miscalibration.
    """
    if epsilon < 0 or n_atoms < 1:
        raise ValueError("epsilon must be >= 0 and n_atoms >= 1")
    return SingleShotFloor(err_variance=epsilon**2 * n_atoms / 4.0,
                           xi2_floor=epsilon**2)


def single_atom_phase_shift(wavelength: float, gamma: float, area: float,
                            detuning: float) -> float:
    """Free-space probe phase shift per atom, gamma*wavelength^2/(16 pi^2 A Delta).

    Dimensionless; follows from theta = hbar omega gamma^2 / (8 A Delta I_sat)
    with the two-level saturation intensity I_sat = 2 pi^2 hbar omega gamma /
    wavelength^2.  Not needed by the alpha calculators, provided as a unit
    converter.
    """
    for name, val in (("wavelength", wavelength), ("gamma", gamma),
                      ("area", area), ("detuning", detuning)):
        if val <= 0 or not np.isfinite(val):
            raise ValueError(f"{name} must be positive, got {val}")
    return gamma * wavelength**2 / (16.0 * np.pi**2 * area * detuning)
