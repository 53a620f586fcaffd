"""Feedback-strength policies for the measurement-plus-feedback scheme.

The control drives J_y with a gain lambda(t) multiplying the homodyne
photocurrent.  Two non-trivial policies are provided: the state-based
conditional law lambda = 2M <Jz^2>/<Jx> and its experiment-ready closed form
lambda(t) = M e^(Mt/2) (1 + eta*N*Mt)^(-1).  A dimensionless multiplier
``scale`` supports deliberate miscalibration experiments (e.g. 120%).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spin import SpinOperators, expect_real

# conditional law validity cut: |<Jx>| below this fraction of j means the mean
# spin has collapsed and the control scheme has left its operating regime
MEAN_SPIN_CUTOFF = 1e-6


class MeanSpinCollapse(RuntimeError):
    """Conditional feedback gain undefined: |<Jx>| fell below the cutoff."""


def analytic_lambda(tau: float, m: float, n_atoms: int, eta: float = 1.0,
                    scale: float = 1.0) -> float:
    """Closed-form feedback gain scale * M e^(tau/2) / (1 + eta*N*tau).

    ``tau`` is dimensionless time Mt.  At tau = 0 this equals scale*M, matching
    the conditional law evaluated on the initial coherent state.
    """
    if tau < 0:
        raise ValueError(f"tau must be >= 0, got {tau}")
    return scale * m * np.exp(tau / 2) / (1.0 + eta * n_atoms * tau)


def conditional_lambda(state: np.ndarray, m: float, ops: SpinOperators,
                       scale: float = 1.0) -> float:
    """State-based feedback gain 2M <Jz^2>/<Jx>.

    Raises MeanSpinCollapse once |<Jx>| < 1e-6 * j; past that point the gain
    is not defined by the control scheme.
    """
    jx = expect_real(ops.jx, state)
    j = float(ops.sys.j)
    if abs(jx) < MEAN_SPIN_CUTOFF * j:
        raise MeanSpinCollapse(
            f"|<Jx>| = {abs(jx):.3e} below {MEAN_SPIN_CUTOFF:g}*j = "
            f"{MEAN_SPIN_CUTOFF * j:.3e}; conditional feedback gain undefined")
    jz2 = expect_real(ops.jz @ ops.jz, state)
    return scale * 2.0 * m * jz2 / jx


def feedback_generator(lam: float, ic_dt: float, m: float,
                       ops: SpinOperators) -> np.ndarray:
    """Hermitian generator (lambda/sqrt(M)) * (I_c dt) * J_y.

    Its exponential exp(-i * generator) is the per-step feedback unitary; the
    generator is proportional to J_y, so the feedback adds no <Jy^2> noise
    directly.
    """
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    if m <= 0:
        raise ValueError(f"measurement strength must be > 0, got {m}")
    return (lam / np.sqrt(m)) * ic_dt * ops.jy


@dataclass(frozen=True)
class FeedbackLaw:
    """Tagged choice of feedback policy.

    kind is one of "off", "constant", "analytic", "conditional".  ``scale``
    multiplies the gain identically in the analytic and conditional laws;
    ``eta`` and ``n_atoms`` parameterize the analytic closed form.
    """

    kind: str
    lambda0: float = 0.0
    scale: float = 1.0
    eta: float = 1.0
    n_atoms: int = 0

    _KINDS = ("off", "constant", "analytic", "conditional")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"law kind must be one of {self._KINDS}, got {self.kind!r}")
        if self.scale < 0:
            raise ValueError(f"scale must be >= 0, got {self.scale}")
        if self.kind == "constant" and self.lambda0 < 0:
            raise ValueError(f"constant law needs lambda0 >= 0, got {self.lambda0}")
        if self.kind == "analytic":
            if self.n_atoms < 1:
                raise ValueError("analytic law needs the atom number")
            if not (0.0 < self.eta <= 1.0):
                raise ValueError(f"eta must be in (0, 1], got {self.eta}")

    @classmethod
    def off(cls) -> "FeedbackLaw":
        return cls(kind="off")

    @classmethod
    def constant(cls, lambda0: float) -> "FeedbackLaw":
        return cls(kind="constant", lambda0=lambda0)

    @classmethod
    def analytic(cls, n_atoms: int, eta: float = 1.0, scale: float = 1.0) -> "FeedbackLaw":
        return cls(kind="analytic", n_atoms=n_atoms, eta=eta, scale=scale)

    @classmethod
    def conditional(cls, scale: float = 1.0) -> "FeedbackLaw":
        return cls(kind="conditional", scale=scale)

    def value(self, tau: float, state: np.ndarray | None, m: float,
              ops: SpinOperators) -> float:
        """Feedback gain at dimensionless time tau for the given state.

        ``state`` is only consulted by the conditional law (the unconditional
        integrator passes the evolving ensemble state there, the trajectory
        simulator the conditional state).
        """
        if self.kind == "off":
            return 0.0
        if self.kind == "constant":
            return self.lambda0
        if self.kind == "analytic":
            return analytic_lambda(tau, m, self.n_atoms, self.eta, self.scale)
        return conditional_lambda(state, m, ops, self.scale)
