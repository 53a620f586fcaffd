"""Collective spin operators and states on the symmetric (Dicke) subspace.

A sample of N two-level atoms is described as a single spin j = N/2 living in
the (N+1)-dimensional Dicke basis |j, m>.  The basis is ordered m = +j (row 0)
descending to m = -j (row N); every consumer of state dumps relies on this
ordering.  All operators are dense complex double-precision matrices, built
once per atom number and cached immutably.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class SpinSystem:
    """Fixed-j Dicke-space descriptor for N atoms (j = N/2, dimension N+1)."""

    n_atoms: int

    def __post_init__(self):
        if not isinstance(self.n_atoms, (int, np.integer)) or self.n_atoms < 1:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms!r}")

    @property
    def j(self) -> Fraction:
        """Total spin as an exact rational (half-integer for odd N)."""
        return Fraction(self.n_atoms, 2)

    @property
    def dim(self) -> int:
        return self.n_atoms + 1


@dataclass(frozen=True)
class SpinOperators:
    """Cached collective spin operators for one SpinSystem.

    Attributes
    ----------
    jx, jy, jz : ndarray
        Cartesian components, Hermitian, shape (dim, dim).
    jp, jm : ndarray
        Raising/lowering operators, jp = jx + i jy.
    m_values : ndarray
        Real diagonal of jz, i.e. m = +j ... -j in basis order.
    """

    sys: SpinSystem
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    jp: np.ndarray
    jm: np.ndarray
    m_values: np.ndarray

    @property
    def dim(self) -> int:
        return self.sys.dim


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def _build(n_atoms: int) -> SpinOperators:
    sys = SpinSystem(n_atoms)
    j = float(sys.j)
    dim = sys.dim
    m = j - np.arange(dim, dtype=float)
    jz = np.diag(m.astype(complex))
    jp = np.zeros((dim, dim), dtype=complex)
    for row in range(1, dim):
        mm = m[row]
        # |j,m> -> sqrt(j(j+1) - m(m+1)) |j,m+1>, one row up in this ordering
        jp[row - 1, row] = np.sqrt(j * (j + 1) - mm * (mm + 1))
    jm = jp.conj().T.copy()
    jx = (jp + jm) / 2
    jy = (jp - jm) / 2j
    return SpinOperators(
        sys=sys,
        jx=_freeze(jx),
        jy=_freeze(jy),
        jz=_freeze(jz),
        jp=_freeze(jp),
        jm=_freeze(jm),
        m_values=_freeze(m),
    )


def build_spin_operators(sys: SpinSystem) -> SpinOperators:
    """Return the cached collective operators for ``sys``.

    jz is diagonal with entries m = +j ... -j; jx = (jp+jm)/2 and
    jy = (jp-jm)/2i satisfy the cyclic commutation relations
    [jx, jy] = i jz to machine precision.
    """
    return _build(sys.n_atoms)


def operators_for_dim(dim: int) -> SpinOperators:
    """Operators matching a (dim, dim) state, i.e. N = dim - 1 atoms."""
    if dim < 2:
        raise ValueError(f"state dimension must be >= 2, got {dim}")
    return _build(dim - 1)


_AXES = ("x", "y", "z")


@lru_cache(maxsize=None)
def _axis_eig(n_atoms: int, axis: str):
    ops = _build(n_atoms)
    gen = {"x": ops.jx, "y": ops.jy, "z": ops.jz}[axis]
    w, v = np.linalg.eigh(gen)
    return _freeze(w), _freeze(v)


def rotation_matrix(sys: SpinSystem, axis: str, angle: float) -> np.ndarray:
    """Unitary exp(-i * angle * J_axis), computed from the eigenbasis of the
    Hermitian generator so it is unitary at machine precision."""
    if axis not in _AXES:
        raise ValueError(f"axis must be one of {_AXES}, got {axis!r}")
    if not np.isfinite(angle):
        raise ValueError(f"rotation angle must be finite, got {angle!r}")
    w, v = _axis_eig(sys.n_atoms, axis)
    return (v * np.exp(-1j * angle * w)) @ v.conj().T


def rotate(state: np.ndarray, axis: str, angle: float) -> np.ndarray:
    """Conjugate a density matrix by exp(-i * angle * J_axis).

    Preserves trace, Hermiticity and the spectrum exactly (unitary map).
    """
    state = np.asarray(state, dtype=complex)
    u = rotation_matrix(operators_for_dim(state.shape[0]).sys, axis, angle)
    return u @ state @ u.conj().T


def css_x(sys: SpinSystem) -> np.ndarray:
    """Coherent spin state polarized along +x, as a density matrix.

    Built by rotating the z-polarized state |j, m=j> by pi/2 about y, giving
    <Jx> = j, <Jy> = <Jz> = 0 and transverse variances j/2.
    """
    u = rotation_matrix(sys, "y", np.pi / 2)
    psi = u[:, 0]
    return np.outer(psi, psi.conj())


def expectation(op: np.ndarray, state: np.ndarray) -> complex:
    """Tr[op @ state]; dimensions must match."""
    op = np.asarray(op)
    state = np.asarray(state)
    if op.shape != state.shape or op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ValueError(f"dimension mismatch: op {op.shape} vs state {state.shape}")
    return complex(np.einsum("ij,ji->", op, state))


def expect_real(op: np.ndarray, state: np.ndarray) -> float:
    """Expectation of a Hermitian operator as a float."""
    return expectation(op, state).real


def is_hermitian(a: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(a - a.conj().T)) <= tol)


def purity(state: np.ndarray) -> float:
    """Tr[rho^2]."""
    return float(np.einsum("ij,ji->", state, state).real)


def validate_density_matrix(rho: np.ndarray, *, herm_tol: float = 1e-10,
                            trace_tol: float = 1e-10, eig_floor: float = -1e-8) -> None:
    """Raise ValueError unless rho is Hermitian, unit trace and numerically
    positive within the given tolerances."""
    rho = np.asarray(rho)
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > herm_tol:
        raise ValueError(f"state not Hermitian: max |rho - rho^dag| = {herm:.3e}")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"state trace {tr!r} deviates from 1 beyond {trace_tol}")
    lo = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    if lo < eig_floor:
        raise ValueError(f"state has negative eigenvalue {lo:.3e} below {eig_floor}")
