"""Homodyne-conditioned stochastic trajectories with Markovian feedback.

Each trajectory alternates a measurement update with an exact feedback
rotation.  The measurement update uses the positivity-preserving one-step
Kraus map of the diffusive measurement record,

    K = 1 - (M/2) Jz^2 dt + sqrt(M) Jz * (I_c dt)
    rho' = K rho K^dag + (1 - eta) M Jz rho Jz dt,   then renormalized,

where I_c dt = 2 eta sqrt(M) <Jz>_c dt + sqrt(eta) dW is the detected charge
increment.  The map agrees with the Euler form
rho + M D[Jz]rho dt + sqrt(eta M) dW H[Jz]rho to O(dt) but cannot produce
negative states, and for eta = 1 it maps pure states to pure states exactly,
matching the physical statement that perfectly monitored states stay pure.
The feedback is then the exact unitary exp(-i (lambda/sqrt(M)) Jy I_c dt): it
preserves the spectrum and already contains the Ito (dW)^2 = dt correction.

Noise contract (reproducible across machines): trajectory ``k`` of an ensemble
with master seed ``s`` draws its per-step standard normals, in step order,
from numpy's PCG64 seeded with SeedSequence(entropy=s, spawn_key=(k,)).
A single trajectory with seed ``s`` is ensemble member k = 0.

Ensembles are processed in fixed chunks of 128 trajectories; worker processes
only distribute whole chunks and the reduction runs in chunk order, so results
are byte-identical for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import MeParams, _integrate
from .feedback import MEAN_SPIN_CUTOFF, FeedbackLaw, MeanSpinCollapse
from .observables import ObservableSeries, xi2_z_from_moments
from .spin import SpinOperators, operators_for_dim

CHUNK = 128                  # fixed: part of the determinism contract
DEFAULT_TRAJ_DT = 1e-4


@dataclass
class TrajectoryRecord:
    """One conditioned trajectory, sampled on the common tau grid.

    photocurrent[i] is the dimensionless detected charge accumulated over
    (tau[i-1], tau[i]] in units of sqrt(M) (zero at the first sample);
    cond_means holds (<Jx>_c, <Jz>_c, <Jz^2>_c).
    """

    seed: int
    times: np.ndarray
    photocurrent: np.ndarray
    cond_means: np.ndarray          # shape (n_samples, 3)
    cond_purity: np.ndarray
    final_state: np.ndarray


@dataclass
class EnsembleResult:
    """Trajectory-averaged evolution plus its master-equation cross-check."""

    series: ObservableSeries
    trace_dist: np.ndarray          # to the deterministic solution, per sample
    stat_scale: float               # 1/sqrt(K)
    mean_final_state: np.ndarray
    trajectories: dict | None = None


def trajectory_noise(master_seed: int, index: int, n_steps: int) -> np.ndarray:
    """Per-step standard normal draws for ensemble member ``index``."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.PCG64(seq)).standard_normal(n_steps)


def sme_step(rho_c: np.ndarray, dw: float, params: MeParams, lam: float,
             ops: SpinOperators) -> tuple[np.ndarray, float]:
    """Advance a conditioned state by one step of physical duration params.dt.

    ``dw`` is the Wiener increment, drawn as sqrt(dt) * N(0,1).  Returns the
    renormalized post-feedback state and the photocurrent value
    I_c = 2 eta sqrt(M) <Jz>_c + sqrt(eta) dW/dt.
    """
    m_strength, eta = params.m, params.eta
    dt = params.dt if params.dt is not None else DEFAULT_TRAJ_DT
    if m_strength == 0.0 and lam != 0.0:
        raise ValueError("feedback with m = 0 is undefined (lambda must be 0)")
    mv = ops.m_values
    diag = np.einsum("ii->i", rho_c).real
    ejz = float(diag @ mv)
    sqm = np.sqrt(m_strength)
    ic_dt = 2.0 * eta * sqm * ejz * dt + np.sqrt(eta) * dw

    kdiag = 1.0 - 0.5 * m_strength * mv * mv * dt + sqm * mv * ic_dt
    rho = kdiag[:, None] * rho_c * kdiag[None, :]
    if eta < 1.0 and m_strength > 0.0:
        rho = rho + ((1.0 - eta) * m_strength * dt) * (np.outer(mv, mv) * rho_c)

    if lam != 0.0:
        w, v = np.linalg.eigh(ops.jy)
        theta = (lam / sqm) * ic_dt
        u = (v * np.exp(-1j * theta * w)) @ v.conj().T
        rho = u @ rho @ u.conj().T

    tr = np.trace(rho).real
    if tr <= 0.0:
        raise RuntimeError(f"state trace collapsed to {tr!r}: step dt={dt:g} too large")
    return rho / tr, ic_dt / dt


def _law_check(law: FeedbackLaw, m_strength: float) -> None:
    if m_strength == 0.0 and law.kind == "constant" and law.lambda0 != 0.0:
        raise ValueError("feedback with m = 0 is undefined (lambda must be 0)")


def _run_chunk(rho0: np.ndarray, params: MeParams, law: FeedbackLaw,
               master_seed: int, first_index: int, count: int,
               keep_final_states: bool = False) -> dict:
    """Step ``count`` trajectories (ensemble indices first_index ...) as one
    batch.  Works on the dimensionless clock tau = Mt with unit measurement
    strength; laws scale out M exactly.  Returns per-sample per-trajectory
    observables, accumulated photocurrent, and the in-chunk state sum.
    """
    ops = operators_for_dim(np.asarray(rho0).shape[0])
    n = ops.sys.n_atoms
    j = float(ops.sys.j)
    eta = params.eta
    dt = params.dt if params.dt is not None else DEFAULT_TRAJ_DT
    n_steps = int(round(params.t_max / dt))
    stride = max(1, int(round(params.sample_dt / dt)))
    n_samples = n_steps // stride + 1
    _law_check(law, params.m)

    mv = ops.m_values
    mv2 = mv * mv
    jx_op = ops.jx
    jy2_op = np.asarray(ops.jy @ ops.jy)
    w, v = np.linalg.eigh(ops.jy)
    vh = v.conj().T
    out_mm = np.outer(mv, mv)
    sqeta = np.sqrt(eta)

    noise = np.empty((count, n_steps))
    for b in range(count):
        noise[b] = trajectory_noise(master_seed, first_index + b, n_steps)
    sqdt = np.sqrt(dt)

    rho = np.broadcast_to(np.asarray(rho0, dtype=complex), (count, *rho0.shape)).copy()
    jx_c = np.empty((count, n_samples))
    jz_c = np.empty((count, n_samples))
    jz2_c = np.empty((count, n_samples))
    jy2_c = np.empty((count, n_samples))
    pur_c = np.empty((count, n_samples))
    charge = np.zeros((count, n_samples))
    state_sum = np.zeros((n_samples, *rho0.shape), dtype=complex)
    taus = np.empty(n_samples)

    conditional = law.kind == "conditional"
    frozen_gain = params.m == 0.0

    def gain(tau, diag_jx):
        # dimensionless gain lambda/M per trajectory
        if frozen_gain or law.kind == "off":
            return 0.0
        if law.kind == "constant":
            return law.lambda0 / params.m
        if law.kind == "analytic":
            return law.scale * np.exp(tau / 2) / (1.0 + law.eta * law.n_atoms * tau)
        ejx, ejz2 = diag_jx
        bad = np.abs(ejx) < MEAN_SPIN_CUTOFF * j
        if np.any(bad):
            k_bad = first_index + int(np.argmax(bad))
            raise MeanSpinCollapse(
                f"|<Jx>_c| below {MEAN_SPIN_CUTOFF:g}*j at tau={tau:.4f} "
                f"(trajectory {k_bad}); conditional feedback gain undefined")
        return law.scale * 2.0 * ejz2 / ejx

    def record(si, tau):
        taus[si] = tau
        diag = np.einsum("kii->ki", rho).real
        jz_c[:, si] = diag @ mv
        jz2_c[:, si] = diag @ mv2
        jx_c[:, si] = np.einsum("ij,kji->k", jx_op, rho).real
        jy2_c[:, si] = np.einsum("ij,kji->k", jy2_op, rho).real
        pur_c[:, si] = np.einsum("kij,kji->k", rho, rho).real
        state_sum[si] = rho.sum(axis=0)

    record(0, 0.0)
    window = np.zeros(count)
    si = 1
    for step in range(n_steps):
        tau = step * dt
        dw = noise[:, step] * sqdt
        diag = np.einsum("kii->ki", rho).real
        ejz = diag @ mv
        if conditional:
            ell = gain(tau, (np.einsum("ij,kji->k", jx_op, rho).real, diag @ mv2))
        else:
            ell = gain(tau, None)
        if frozen_gain:
            # no measurement: the record is pure detection noise
            q = sqeta * dw
            theta = np.zeros(count)
        else:
            q = 2.0 * eta * ejz * dt + sqeta * dw      # I_c dt, units sqrt(M)
            kdiag = 1.0 - 0.5 * mv2[None, :] * dt + q[:, None] * mv[None, :]
            rho_new = kdiag[:, :, None] * rho * kdiag[:, None, :]
            if eta < 1.0:
                rho_new += ((1.0 - eta) * dt) * (out_mm[None] * rho)
            rho = rho_new
            theta = np.asarray(ell * q)
        if np.any(theta != 0.0):
            phases = np.exp(-1j * np.multiply.outer(theta, w))
            u = (v[None] * phases[:, None, :]) @ vh[None]
            rho = u @ rho @ u.conj().swapaxes(1, 2)
        tr = np.einsum("kii->k", rho).real
        if np.any(tr <= 0.0):
            raise RuntimeError("state trace collapsed: step too large")
        rho /= tr[:, None, None]
        window += q
        if (step + 1) % stride == 0:
            record(si, (step + 1) * dt)
            charge[:, si] = window
            window = np.zeros(count)
            si += 1

    result = {
        "taus": taus, "jx": jx_c, "jz": jz_c, "jz2": jz2_c, "jy2": jy2_c,
        "purity": pur_c, "charge": charge, "state_sum": state_sum,
    }
    if keep_final_states:
        result["final_states"] = rho
    return result


def simulate_trajectory(rho0: np.ndarray, params: MeParams, law: FeedbackLaw,
                        seed: int) -> TrajectoryRecord:
    """Simulate one conditioned trajectory (ensemble member 0 of ``seed``)."""
    res = _run_chunk(rho0, params, law, seed, 0, 1, keep_final_states=True)
    return TrajectoryRecord(
        seed=seed,
        times=res["taus"],
        photocurrent=res["charge"][0],
        cond_means=np.column_stack([res["jx"][0], res["jz"][0], res["jz2"][0]]),
        cond_purity=res["purity"][0],
        final_state=res["final_states"][0],
    )


def _chunk_args(rho0, params, law, master_seed, count):
    for k0 in range(0, count, CHUNK):
        yield (rho0, params, law, master_seed, k0, min(CHUNK, count - k0))


def _run_chunk_star(args):
    return _run_chunk(*args)


def ensemble_average(rho0: np.ndarray, params: MeParams, law: FeedbackLaw,
                     count: int, master_seed: int, *, workers: int = 1,
                     keep_trajectories: bool = False):
    """Average ``count`` independently seeded trajectories.

    Returns an EnsembleResult whose series holds the observables of the mean
    state at each sample, together with the per-sample trace distance to the
    deterministic master-equation solution (same grid, default step) and the
    1/sqrt(K) statistical scale.  With keep_trajectories=True the per-
    trajectory sampled observables are attached as ``result.trajectories``
    (dict of (K, n_samples) arrays) for dumping.

    Trajectories are processed in fixed chunks of 128; ``workers`` > 1 only
    distributes chunks across processes, leaving the output byte-identical.
    """
    if count < 1:
        raise ValueError(f"ensemble size must be >= 1, got {count}")
    args = list(_chunk_args(rho0, params, law, master_seed, count))
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_chunk_star, args))
    else:
        chunks = [_run_chunk(*a) for a in args]

    taus = chunks[0]["taus"]
    n_samples = taus.shape[0]
    state_sum = np.zeros_like(chunks[0]["state_sum"])
    for ch in chunks:                       # fixed chunk order: deterministic
        state_sum += ch["state_sum"]
    mean_states = state_sum / count

    ops = operators_for_dim(np.asarray(rho0).shape[0])
    n = ops.sys.n_atoms
    mv2 = ops.m_values ** 2
    jy2_op = np.asarray(ops.jy @ ops.jy)
    jx = np.einsum("ij,sji->s", ops.jx, mean_states).real
    jy2 = np.einsum("ij,sji->s", jy2_op, mean_states).real
    jz2 = np.einsum("sii,i->s", mean_states, mv2).real
    pur = np.einsum("sij,sji->s", mean_states, mean_states).real
    xi2 = np.array([xi2_z_from_moments(n, z2, x) for z2, x in zip(jz2, jx)])
    lam = np.array([law.value(t, s, 1.0, ops) for t, s in zip(taus, mean_states)])

    # deterministic oracle on the same sample grid
    me_params = MeParams(m=params.m, eta=params.eta, dt=None,
                         t_max=params.t_max, sample_dt=params.sample_dt)
    me_series, _, me_states = _integrate(rho0, me_params, law, ops, record_states=True)
    if me_states.shape[0] != n_samples or not np.allclose(me_series.tau, taus, atol=1e-9):
        raise RuntimeError("sample grids of ensemble and master equation diverged")
    trace_dist = np.empty(n_samples)
    for i in range(n_samples):
        d = mean_states[i] - me_states[i]
        d = 0.5 * (d + d.conj().T)
        trace_dist[i] = 0.5 * np.abs(np.linalg.eigvalsh(d)).sum()

    series = ObservableSeries(
        tau=taus, jx=jx, jy2=jy2, jz2=jz2, xi2=xi2, purity=pur, lam=lam,
        params={"n_atoms": n, "m": params.m, "eta": params.eta,
                "dt": params.dt if params.dt is not None else DEFAULT_TRAJ_DT,
                "t_max": params.t_max, "sample_dt": params.sample_dt,
                "law": law.kind, "scale": law.scale, "lambda0": law.lambda0,
                "count": count, "master_seed": master_seed},
    )
    result = EnsembleResult(series=series, trace_dist=trace_dist,
                            stat_scale=1.0 / np.sqrt(count),
                            mean_final_state=mean_states[-1])
    if keep_trajectories:
        result.trajectories = {
            key: np.concatenate([ch[key] for ch in chunks], axis=0)
            for key in ("jx", "jz", "jz2", "purity", "charge")
        }
        result.trajectories["taus"] = taus
    return result
