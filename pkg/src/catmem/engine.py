"""Stochastic integration of the write/store/read protocol.

The positive-P equations of motion are linear Langevin equations for the
doubled phase-space variables (alpha, alpha+, beta, beta+).  The
deterministic part is advanced with classical fourth-order Runge-Kutta; the
mechanical thermal noise enters as one additive increment per step.  Two
paths are provided: ``run_protocol`` integrates a single trajectory step by
step, and ``run_ensemble`` advances whole trajectory blocks as numpy arrays,
replacing the long free-storage segment by its exact aggregate (the
per-step recursion is linear, so the compound decay factor and the summed
Gaussian noise are computed in closed form with identical statistics,
including the Runge-Kutta discretisation factor).
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import (PhaseSpaceState, ProtocolSchedule, SystemParams,
                    TrajectoryResult, WeightedSample)
from .modes import ModeFunctionSpec, u_in, u_out
from .sampling import RNG_BLOCK_SIZE, block_stream, sample_thermal

__all__ = [
    "DriveContext",
    "EnsembleResult",
    "g_of_t",
    "drift",
    "thermal_field_increment",
    "noise_increment",
    "step_rk4",
    "run_protocol",
    "run_ensemble",
    "reference_gain",
    "write_gain",
    "apply_phase_correction",
    "rk4_decay_factor",
]


def g_of_t(t, schedule: ProtocolSchedule, g_eff: float):
    """Coupling window: g_eff on the closed write and read intervals, else 0."""
    t_arr = np.asarray(t, dtype=float)
    in_write = (t_arr >= -schedule.t_write) & (t_arr <= 0.0)
    in_read = (t_arr >= schedule.t_store) & (t_arr <= schedule.t_store + schedule.t_read)
    vals = np.where(in_write | in_read, g_eff, 0.0)
    if np.ndim(t) == 0:
        return float(vals)
    return vals


@dataclass
class DriveContext:
    """Everything the drift needs besides the state itself.

    g_override pins the coupling for one integration segment so that
    Runge-Kutta stages never straddle a window edge; when None the window
    function is consulted directly.
    """

    alpha_in: complex
    alpha_in_plus: complex
    mode_spec: ModeFunctionSpec
    schedule: ProtocolSchedule
    params: SystemParams
    g_override: Optional[float] = None


def drift(state: PhaseSpaceState, t: float, ctx: DriveContext) -> PhaseSpaceState:
    """Deterministic time derivative of the doubled phase-space point."""
    p = ctx.params
    g = ctx.g_override if ctx.g_override is not None else g_of_t(t, ctx.schedule, p.g_eff)
    pump = math.sqrt(2.0 * p.gamma_ext) * u_in(t, ctx.mode_spec)
    return PhaseSpaceState(
        alpha=-p.gamma_o * state.alpha - 1j * g * state.beta + pump * ctx.alpha_in,
        alpha_plus=-p.gamma_o * state.alpha_plus + 1j * g * state.beta_plus
        + pump.conjugate() * ctx.alpha_in_plus,
        beta=-p.gamma_m * state.beta - 1j * g * state.alpha,
        beta_plus=-p.gamma_m * state.beta_plus + 1j * g * state.alpha_plus,
    )


def thermal_field_increment(dt: float, n_bar: float, rng: np.random.Generator, size=None):
    """Raw thermal reservoir increment dphi with <dphi dphi+> = n_bar dt.

    Returns complex Gaussians with <|dphi|^2> = n_bar dt and <dphi^2> = 0.
    Zero occupation returns exact zeros without consuming the stream.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if n_bar < 0:
        raise ValueError("n_bar must be non-negative")
    if n_bar == 0:
        return 0.0 + 0.0j if size is None else np.zeros(size, dtype=np.complex128)
    scale = math.sqrt(n_bar * dt / 2.0)
    xy = rng.standard_normal((2,) if size is None else (2, size))
    vals = scale * (xy[0] + 1j * xy[1])
    return complex(vals) if size is None else vals


def noise_increment(dt: float, params: SystemParams, rng: np.random.Generator) -> PhaseSpaceState:
    """Per-step stochastic increment.

    Only the mechanical channel is noisy at this order (optical thermal
    occupation is negligible and vacuum inputs carry no positive-P noise);
    beta and beta+ receive conjugate increments, which preserves conjugacy
    on diagonal-branch trajectories.  The multiplier is state independent,
    so the midpoint evaluation required of the stepper is the increment
    itself.
    """
    if params.gamma_m == 0 or params.n_th_mech == 0:
        return PhaseSpaceState(0j, 0j, 0j, 0j)
    dphi = thermal_field_increment(dt, params.n_th_mech, rng)
    amp = math.sqrt(2.0 * params.gamma_m)
    return PhaseSpaceState(0j, 0j, amp * dphi, amp * dphi.conjugate())


def step_rk4(state: PhaseSpaceState, t: float, dt: float, ctx: DriveContext,
             rng: np.random.Generator) -> PhaseSpaceState:
    """One classical RK4 step plus one additive noise increment."""
    k1 = drift(state, t, ctx)
    k2 = drift(state.shifted(k1, 0.5 * dt), t + 0.5 * dt, ctx)
    k3 = drift(state.shifted(k2, 0.5 * dt), t + 0.5 * dt, ctx)
    k4 = drift(state.shifted(k3, dt), t + dt, ctx)
    incr = k1.shifted(k2, 2.0).shifted(k3, 2.0).shifted(k4).scaled(dt / 6.0)
    new = state.shifted(incr)
    noise = noise_increment(dt, ctx.params, rng)
    return new.shifted(noise)


def run_protocol(sample: WeightedSample, beta_init: complex, params: SystemParams,
                 schedule: ProtocolSchedule, rng: np.random.Generator) -> TrajectoryResult:
    """Integrate one trajectory from -t_write to t_store + t_read.

    The integration is segmented so that every RK4 stage sees the coupling
    value of its own window.  The output-mode amplitude is the trapezoidal
    projection of the outgoing field onto the retrieved temporal mode over
    the read window (the input mode vanishes there, so no subtraction is
    needed).  For long storage at many steps prefer ``run_ensemble``.
    """
    spec = ModeFunctionSpec.for_params(params, schedule.t_store)
    base = dict(alpha_in=sample.alpha_in, alpha_in_plus=sample.alpha_in_plus,
                mode_spec=spec, schedule=schedule, params=params)
    state = PhaseSpaceState(0j, 0j, complex(beta_init), complex(beta_init).conjugate())

    ctx = DriveContext(**base, g_override=params.g_eff)
    t = -schedule.t_write
    for _ in range(schedule.n_write):
        state = step_rk4(state, t, schedule.dt, ctx, rng)
        t += schedule.dt

    ctx = DriveContext(**base, g_override=0.0)
    t = 0.0
    for _ in range(schedule.n_store):
        state = step_rk4(state, t, schedule.dt, ctx, rng)
        t += schedule.dt

    ctx = DriveContext(**base, g_override=params.g_eff)
    sq = math.sqrt(2.0 * params.gamma_ext)
    t = schedule.t_store
    uo = u_out(t, spec)
    acc = 0.5 * uo * sq * state.alpha
    acc_p = 0.5 * uo.conjugate() * sq * state.alpha_plus
    for k in range(schedule.n_read):
        state = step_rk4(state, t, schedule.dt, ctx, rng)
        t = schedule.t_store + (k + 1) * schedule.dt
        w = 0.5 if k == schedule.n_read - 1 else 1.0
        uo = u_out(t, spec)
        acc += w * uo * sq * state.alpha
        acc_p += w * uo.conjugate() * sq * state.alpha_plus
    return TrajectoryResult(alpha_out=acc * schedule.dt, alpha_out_plus=acc_p * schedule.dt,
                            weight=sample.weight, branch=sample.branch)


@dataclass
class EnsembleResult:
    """Column-oriented trajectory results for estimator consumption."""

    alpha_out: np.ndarray
    alpha_out_plus: np.ndarray
    weight: np.ndarray
    branch: np.ndarray

    def __len__(self) -> int:
        return self.alpha_out.size

    def as_trajectories(self) -> list[TrajectoryResult]:
        return [TrajectoryResult(complex(a), complex(ap), float(w), str(b))
                for a, ap, w, b in zip(self.alpha_out, self.alpha_out_plus,
                                       self.weight, self.branch)]


def rk4_decay_factor(x: float) -> float:
    """Amplification factor of one RK4 step for y' = lambda y with x = lambda dt."""
    return 1.0 + x + x * x / 2.0 + x ** 3 / 6.0 + x ** 4 / 24.0


@dataclass
class _DriveTables:
    """Window-sampled drive and projection values shared by all trajectories."""

    d_grid: np.ndarray    # sqrt(2 gamma_ext) u_in at write grid times, length n_write+1
    d_mid: np.ndarray     # same at write step midpoints, length n_write
    uo_grid: np.ndarray   # u_out at read grid times, length n_read+1
    trap: np.ndarray      # trapezoid weights including dt, length n_read+1


def _make_tables(params: SystemParams, schedule: ProtocolSchedule,
                 spec: ModeFunctionSpec) -> _DriveTables:
    sq = math.sqrt(2.0 * params.gamma_ext)
    tw = -schedule.t_write + schedule.dt * np.arange(schedule.n_write + 1)
    tr = schedule.t_store + schedule.dt * np.arange(schedule.n_read + 1)
    trap = np.full(schedule.n_read + 1, schedule.dt)
    trap[0] *= 0.5
    trap[-1] *= 0.5
    return _DriveTables(d_grid=sq * u_in(tw, spec),
                        d_mid=sq * u_in(tw[:-1] + 0.5 * schedule.dt, spec),
                        uo_grid=u_out(tr, spec), trap=trap)


def _coupled_span(a, ap, b, bp, params: SystemParams, dt: float, n_steps: int,
                  d_grid, d_mid, a_in, a_in_p, nu: float, rng,
                  uo_grid=None, trap=None, sq: float = 0.0):
    """Advance a trajectory block through a constant-g window.

    Optionally applies the mode-matched drive (write) and accumulates the
    output projection on the fly (read).  Returns the state and, when
    projecting, the running output integrals.
    """
    go, gm, g = params.gamma_o, params.gamma_m, params.g_eff
    half = 0.5 * dt
    acc = acc_p = None
    if uo_grid is not None:
        acc = trap[0] * uo_grid[0] * sq * a
        acc_p = trap[0] * np.conj(uo_grid[0]) * sq * ap

    for k in range(n_steps):
        if d_grid is not None:
            d0, dh, d1 = d_grid[k], d_mid[k], d_grid[k + 1]
        else:
            d0 = dh = d1 = 0.0j

        k1a = -go * a - 1j * g * b + d0 * a_in
        k1ap = -go * ap + 1j * g * bp + d0.conjugate() * a_in_p
        k1b = -gm * b - 1j * g * a
        k1bp = -gm * bp + 1j * g * ap

        a2 = a + half * k1a
        ap2 = ap + half * k1ap
        b2 = b + half * k1b
        bp2 = bp + half * k1bp
        k2a = -go * a2 - 1j * g * b2 + dh * a_in
        k2ap = -go * ap2 + 1j * g * bp2 + dh.conjugate() * a_in_p
        k2b = -gm * b2 - 1j * g * a2
        k2bp = -gm * bp2 + 1j * g * ap2

        a3 = a + half * k2a
        ap3 = ap + half * k2ap
        b3 = b + half * k2b
        bp3 = bp + half * k2bp
        k3a = -go * a3 - 1j * g * b3 + dh * a_in
        k3ap = -go * ap3 + 1j * g * bp3 + dh.conjugate() * a_in_p
        k3b = -gm * b3 - 1j * g * a3
        k3bp = -gm * bp3 + 1j * g * ap3

        a4 = a + dt * k3a
        ap4 = ap + dt * k3ap
        b4 = b + dt * k3b
        bp4 = bp + dt * k3bp
        k4a = -go * a4 - 1j * g * b4 + d1 * a_in
        k4ap = -go * ap4 + 1j * g * bp4 + d1.conjugate() * a_in_p
        k4b = -gm * b4 - 1j * g * a4
        k4bp = -gm * bp4 + 1j * g * ap4

        sixth = dt / 6.0
        a = a + sixth * (k1a + 2.0 * (k2a + k3a) + k4a)
        ap = ap + sixth * (k1ap + 2.0 * (k2ap + k3ap) + k4ap)
        b = b + sixth * (k1b + 2.0 * (k2b + k3b) + k4b)
        bp = bp + sixth * (k1bp + 2.0 * (k2bp + k3bp) + k4bp)

        if nu > 0:
            xy = rng.standard_normal((2, a.size))
            eta = (xy[0] + 1j * xy[1]) / math.sqrt(2.0)
            b = b + nu * eta
            bp = bp + nu * np.conj(eta)

        if uo_grid is not None:
            w = trap[k + 1]
            acc = acc + w * uo_grid[k + 1] * sq * a
            acc_p = acc_p + w * np.conj(uo_grid[k + 1]) * sq * ap

    return a, ap, b, bp, acc, acc_p


def _free_storage(a, ap, b, bp, params: SystemParams, dt: float, n_steps: int,
                  nu: float, rng):
    """Exact aggregate of n_steps uncoupled RK4-plus-noise storage steps.

    With g = 0 each step multiplies every variable by the scalar RK4 factor
    and adds independent mechanical noise; compounding the factors and
    summing the noise variances reproduces the stepped process exactly in
    distribution, discretisation bias included.
    """
    if n_steps == 0:
        return a, ap, b, bp
    r_o = rk4_decay_factor(-params.gamma_o * dt) ** n_steps
    r_m1 = rk4_decay_factor(-params.gamma_m * dt)
    r_m = r_m1 ** n_steps
    a = a * r_o
    ap = ap * r_o
    b = b * r_m
    bp = bp * r_m
    if nu > 0:
        var_sum = float(n_steps) if r_m1 == 1.0 else (1.0 - r_m1 ** (2 * n_steps)) / (1.0 - r_m1 ** 2)
        sigma = nu * math.sqrt(var_sum)
        xy = rng.standard_normal((2, a.size))
        eta = (xy[0] + 1j * xy[1]) / math.sqrt(2.0)
        b = b + sigma * eta
        bp = bp + sigma * np.conj(eta)
    return a, ap, b, bp


def _run_block(a_in, a_in_p, params, schedule, tables, stream):
    n = a_in.size
    nu = math.sqrt(2.0 * params.gamma_m * params.n_th_mech * schedule.dt) \
        if params.gamma_m > 0 and params.n_th_mech > 0 else 0.0
    beta0 = sample_thermal(params.n_init_mech, n, stream)
    a = np.zeros(n, dtype=np.complex128)
    ap = np.zeros(n, dtype=np.complex128)
    b = beta0.astype(np.complex128)
    bp = np.conj(beta0)
    sq = math.sqrt(2.0 * params.gamma_ext)

    a, ap, b, bp, _, _ = _coupled_span(a, ap, b, bp, params, schedule.dt,
                                       schedule.n_write, tables.d_grid,
                                       tables.d_mid, a_in, a_in_p, nu, stream)
    a, ap, b, bp = _free_storage(a, ap, b, bp, params, schedule.dt,
                                 schedule.n_store, nu, stream)
    _, _, _, _, acc, acc_p = _coupled_span(a, ap, b, bp, params, schedule.dt,
                                           schedule.n_read, None, None,
                                           a_in, a_in_p, nu, stream,
                                           uo_grid=tables.uo_grid,
                                           trap=tables.trap, sq=sq)
    return acc, acc_p


def run_ensemble(samples: list[WeightedSample], params: SystemParams,
                 schedule: ProtocolSchedule, master_seed: int,
                 workers: int = 1, block_size: int = RNG_BLOCK_SIZE) -> EnsembleResult:
    """Integrate every trajectory of a weighted ensemble.

    Trajectories are processed in fixed-size blocks, each with its own
    counter-based stream keyed by (master_seed, block index); the reduction
    order is by block index, so the result is independent of the worker
    count.
    """
    n = len(samples)
    a_in = np.array([s.alpha_in for s in samples], dtype=np.complex128)
    a_in_p = np.array([s.alpha_in_plus for s in samples], dtype=np.complex128)
    weight = np.array([s.weight for s in samples])
    branch = np.array([s.branch for s in samples])

    spec = ModeFunctionSpec.for_params(params, schedule.t_store)
    tables = _make_tables(params, schedule, spec)
    out = np.empty(n, dtype=np.complex128)
    out_p = np.empty(n, dtype=np.complex128)

    blocks = [(b, slice(b * block_size, min((b + 1) * block_size, n)))
              for b in range((n + block_size - 1) // block_size)]

    def work(item):
        idx, sl = item
        stream = block_stream(master_seed, idx)
        acc, acc_p = _run_block(a_in[sl], a_in_p[sl], params, schedule, tables, stream)
        out[sl] = acc
        out_p[sl] = acc_p

    if workers <= 1 or len(blocks) == 1:
        for item in blocks:
            work(item)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, blocks))

    if not (np.all(np.isfinite(out)) and np.all(np.isfinite(out_p))):
        raise FloatingPointError("non-finite trajectory output; check parameters")
    return EnsembleResult(alpha_out=out, alpha_out_plus=out_p, weight=weight, branch=branch)


def reference_gain(params: SystemParams, schedule: ProtocolSchedule) -> complex:
    """Complex coherent-state gain of the full protocol.

    Runs one deterministic trajectory with unit input amplitude, no thermal
    start and no noise; the modulus is the write-store-read amplitude
    efficiency and the argument fixes the overall phase convention of the
    retrieved mode.
    """
    quiet = SystemParams(gamma_o=params.gamma_o, gamma_ext=params.gamma_ext,
                         gamma_int=params.gamma_int, gamma_m=params.gamma_m,
                         g_eff=params.g_eff, n_th_mech=0.0, n_init_mech=0.0)
    spec = ModeFunctionSpec.for_params(quiet, schedule.t_store)
    tables = _make_tables(quiet, schedule, spec)
    one = np.ones(1, dtype=np.complex128)
    stream = block_stream(0, 0)  # never consumed: noiseless
    acc, _ = _run_block(one, one, quiet, schedule, tables, stream)
    return complex(acc[0])


def write_gain(params: SystemParams, schedule: ProtocolSchedule) -> complex:
    """Mechanical amplitude stored at t = 0 for a unit coherent input.

    Single-pass counterpart of reference_gain: only the write window is
    integrated, so the modulus measures the in-coupling efficiency alone.
    """
    quiet = SystemParams(gamma_o=params.gamma_o, gamma_ext=params.gamma_ext,
                         gamma_int=params.gamma_int, gamma_m=params.gamma_m,
                         g_eff=params.g_eff, n_th_mech=0.0, n_init_mech=0.0)
    spec = ModeFunctionSpec.for_params(quiet, schedule.t_store)
    tables = _make_tables(quiet, schedule, spec)
    one = np.ones(1, dtype=np.complex128)
    zeros = np.zeros(1, dtype=np.complex128)
    stream = block_stream(0, 0)  # never consumed: noiseless
    _, _, b, _, _, _ = _coupled_span(zeros.copy(), zeros.copy(), zeros.copy(),
                                     zeros.copy(), quiet, schedule.dt,
                                     schedule.n_write, tables.d_grid, tables.d_mid,
                                     one, one, 0.0, stream)
    return complex(b[0])


def apply_phase_correction(results: EnsembleResult, gain: complex) -> EnsembleResult:
    """Rotate outputs so the coherent-input gain becomes real and positive."""
    if gain == 0:
        raise ValueError("zero reference gain; cannot fix the output phase")
    phase = cmath.phase(gain)
    rot = cmath.exp(-1j * phase)
    return EnsembleResult(alpha_out=results.alpha_out * rot,
                          alpha_out_plus=results.alpha_out_plus * np.conj(rot),
                          weight=results.weight, branch=results.branch)
