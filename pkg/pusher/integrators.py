#!/usr/bin/env python3
"""
Time integrators for the augmented characteristics

    dx/dt      = v
    de_perp/dt = <E_perp, v_perp>
    dv/dt      = H(t, x, v_perp, e_perp) - b(x_perp) v_perp^perp / eps

and for their drift-kinetic limit. Every function works on whole particle
arrays; the stiff rotation is the only implicit term, solved in closed form.
"""

import logging
from typing import Callable, Dict

import numpy as np

from exceptions import StatePoisoned
from pic.particles import ParticleState
from pusher.fields import FieldSampler
from pusher.schemes import (
    SDIRK_GAMMA,
    SI3_ALPHA,
    SI3_BETA,
    SI3_ETA,
    SI3_GAMMA,
    SI3_STAGE_TIMES,
    SchemeKind,
)

logger = logging.getLogger(__name__)

# stage-time fractions (x2 predictor, x3 predictor) for the third-order limit scheme
LIMIT3_STAGE_TIMES = {
    "printed": (0.5, 1.0),
    "uniform": (1.0, 0.5),
}


def perp(v: np.ndarray) -> np.ndarray:
    """v^perp = (-v_y, v_x, 0)."""
    out = np.zeros_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


def dot_perp(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]


def chi(e_perp, v) -> np.ndarray:
    """Limiter e/(e + |v_perp|^2/2) * max(0, e - |v_perp|^2/2), zero at 0/0."""
    e_perp = np.asarray(e_perp, dtype=float)
    v = np.asarray(v, dtype=float)
    kinetic = 0.5 * (v[..., 0] ** 2 + v[..., 1] ** 2)
    denom = e_perp + kinetic
    ratio = np.divide(e_perp, denom, out=np.zeros(np.broadcast(e_perp, denom).shape),
                      where=denom > 0.0)
    return ratio * np.maximum(0.0, e_perp - kinetic)


def force_H(t: float, x: np.ndarray, v: np.ndarray, e_perp: np.ndarray,
            sampler: FieldSampler, E: np.ndarray = None) -> np.ndarray:
    """H = E - chi(e_perp, v_perp) grad_perp(b) / b."""
    if E is None:
        E = sampler.E(t, x)
    b = sampler.b(t, x)
    return E - (chi(e_perp, v) / b)[:, None] * sampler.grad_b(t, x)


def rotation_solve(lam, rhs: np.ndarray) -> np.ndarray:
    """Solve v + lam v^perp = rhs; the z-component passes through."""
    rhs = np.asarray(rhs, dtype=float)
    lam = np.asarray(lam, dtype=float)
    scale = 1.0 / (1.0 + lam * lam)
    out = np.array(rhs, copy=True)
    out[..., 0] = (rhs[..., 0] + lam * rhs[..., 1]) * scale
    out[..., 1] = (rhs[..., 1] - lam * rhs[..., 0]) * scale
    return out


def u_gc(t: float, x: np.ndarray, e_perp: np.ndarray, v_par: np.ndarray,
         sampler: FieldSampler, E: np.ndarray = None) -> np.ndarray:
    """Guiding-centre velocity v_par e_z - eps (F_perp - e_perp grad(b)/b^2)^perp, F = E/b."""
    if E is None:
        E = sampler.E(t, x)
    b = sampler.b(t, x)
    drift = E / b[:, None] - (e_perp / b ** 2)[:, None] * sampler.grad_b(t, x)
    drift[:, 2] = 0.0
    U = -sampler.eps * perp(drift)
    U[:, 2] = v_par
    return U


def div_F_perp_perp(t: float, x: np.ndarray, sampler: FieldSampler,
                    E: np.ndarray = None) -> np.ndarray:
    """div_perp((E_perp/b)^perp) for a curl-free E: -(-E_y d_x b + E_x d_y b) / b^2."""
    if E is None:
        E = sampler.E(t, x)
    b = sampler.b(t, x)
    g = sampler.grad_b(t, x)
    return -(-E[:, 1] * g[:, 0] + E[:, 0] * g[:, 1]) / b ** 2


def _check(scheme: str, stage: int, *arrays: np.ndarray):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise StatePoisoned(scheme, stage)


def _stiff_force(H: np.ndarray, b: np.ndarray, v: np.ndarray, eps: float) -> np.ndarray:
    return H - (b / eps)[:, None] * perp(v)


def _si1(state: ParticleState, t: float, dt: float, f: FieldSampler) -> ParticleState:
    x, v, e = state.x, state.v, state.e_perp
    E0 = f.E(t, x)
    H0 = force_H(t, x, v, e, f, E0)
    lam = dt * f.b(t, x) / f.eps
    v1 = rotation_solve(lam, v + dt * H0)
    e1 = e + dt * dot_perp(E0, v1)
    x1 = x + dt * v1
    _check("SI1", 1, v1, e1, x1)
    return ParticleState(x1, v1, e1, state.w)


def _si2(state: ParticleState, t: float, dt: float, f: FieldSampler) -> ParticleState:
    g = SDIRK_GAMMA
    x, v, e = state.x, state.v, state.e_perp
    E0 = f.E(t, x)
    b0 = f.b(t, x)
    H0 = force_H(t, x, v, e, f, E0)

    v1 = rotation_solve(g * dt * b0 / f.eps, v + g * dt * H0)
    F1 = _stiff_force(H0, b0, v1, f.eps)
    _check("SI2", 1, v1, F1)

    c = dt / (2.0 * g)
    t_hat = t + c
    x_hat = x + c * v1
    e_hat = e + c * dot_perp(E0, v1)
    v_hat = v + c * F1
    E_hat = f.E(t_hat, x_hat)
    H_hat = force_H(t_hat, x_hat, v_hat, e_hat, f, E_hat)
    b_hat = f.b(t_hat, x_hat)
    _check("SI2", 2, x_hat, e_hat, H_hat)

    v2 = rotation_solve(g * dt * b_hat / f.eps, v + dt * (1.0 - g) * F1 + g * dt * H_hat)
    x2 = x + dt * ((1.0 - g) * v1 + g * v2)
    e2 = e + dt * ((1.0 - g) * dot_perp(E0, v1) + g * dot_perp(E_hat, v2))
    _check("SI2", 3, v2, x2, e2)
    return ParticleState(x2, v2, e2, state.w)


def _si3(state: ParticleState, t: float, dt: float, f: FieldSampler,
         stage_times: str = "printed") -> ParticleState:
    a, be, et, g = SI3_ALPHA, SI3_BETA, SI3_ETA, SI3_GAMMA
    h3, b3, h4, b4 = SI3_STAGE_TIMES[stage_times]
    x, v, e = state.x, state.v, state.e_perp
    eps = f.eps
    E0 = f.E(t, x)
    b0 = f.b(t, x)
    H0 = force_H(t, x, v, e, f, E0)
    lam0 = a * dt * b0 / eps

    v1 = rotation_solve(lam0, v + a * dt * H0)
    F1 = _stiff_force(H0, b0, v1, eps)
    _check("SI3", 1, v1, F1)

    v2 = rotation_solve(lam0, v - a * dt * F1 + a * dt * H0)
    F2 = _stiff_force(H0, b0, v2, eps)
    _check("SI3", 2, v2, F2)

    x_2 = x + dt * v2
    e_2 = e + dt * dot_perp(E0, v2)
    v_2 = v + dt * F2
    E_2 = f.E(t + h3 * dt, x_2)
    H_2 = force_H(t + h3 * dt, x_2, v_2, e_2, f, E_2)
    b_2 = f.b(t + b3 * dt, x_2)
    v3 = rotation_solve(a * dt * b_2 / eps, v + dt * (1.0 - a) * F2 + a * dt * H_2)
    F3 = _stiff_force(H_2, b_2, v3, eps)
    _check("SI3", 3, x_2, e_2, v3, F3)

    x_3 = x + 0.25 * dt * (v2 + v3)
    e_3 = e + 0.25 * dt * (dot_perp(E0, v2) + dot_perp(E_2, v3))
    v_3 = v + 0.25 * dt * (F2 + F3)
    E_3 = f.E(t + h4 * dt, x_3)
    H_3 = force_H(t + h4 * dt, x_3, v_3, e_3, f, E_3)
    b_3 = f.b(t + b4 * dt, x_3)
    v4 = rotation_solve(a * dt * b_3 / eps,
                        v + dt * (be * F1 + et * F2 + g * F3) + a * dt * H_3)
    F4 = _stiff_force(H_3, b_3, v4, eps)
    _check("SI3", 4, x_3, e_3, v4, F4)

    x_new = x + dt / 6.0 * (v2 + v3 + 4.0 * v4)
    e_new = e + dt / 6.0 * (dot_perp(E0, v2) + dot_perp(E_2, v3) + 4.0 * dot_perp(E_3, v4))
    v_new = v + dt / 6.0 * (F2 + F3 + 4.0 * F4)
    _check("SI3", 5, x_new, e_new, v_new)
    return ParticleState(x_new, v_new, e_new, state.w)


def step_si(order: int, state: ParticleState, t: float, dt: float, sampler: FieldSampler,
            stage_times: str = "printed") -> ParticleState:
    """One step of the semi-implicit scheme of the given order (1, 2 or 3)."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if order == 1:
        return _si1(state, t, dt, sampler)
    if order == 2:
        return _si2(state, t, dt, sampler)
    if order == 3:
        return _si3(state, t, dt, sampler, stage_times)
    raise ValueError(f"semi-implicit order must be 1, 2 or 3, got {order}")


def _limit_state(x, e, v_par, w) -> ParticleState:
    v = np.zeros_like(x)
    v[:, 2] = v_par
    return ParticleState(x, v, e, w)


def _limit1(state: ParticleState, t: float, dt: float, f: FieldSampler) -> ParticleState:
    x, e, vp = state.x, state.e_perp, state.v_par
    E0 = f.E(t, x)
    vp1 = vp + dt * E0[:, 2]
    x1 = x + dt * u_gc(t, x, e, vp1, f, E0)
    e1 = e * (1.0 + f.eps * dt * div_F_perp_perp(t, x, f, E0))
    _check("LIMIT1", 1, x1, e1, vp1)
    return _limit_state(x1, e1, vp1, state.w)


def _limit2(state: ParticleState, t: float, dt: float, f: FieldSampler) -> ParticleState:
    g = SDIRK_GAMMA
    eps = f.eps
    x, e, vp = state.x, state.e_perp, state.v_par
    E0 = f.E(t, x)
    div0 = div_F_perp_perp(t, x, f, E0)

    vp1 = vp + g * dt * E0[:, 2]
    U1 = u_gc(t, x, e, vp1, f, E0)
    c = dt / (2.0 * g)
    t_hat = t + c
    x_hat = x + c * U1
    e_hat = e + eps * c * e * div0
    _check("LIMIT2", 1, x_hat, e_hat, vp1)

    E_hat = f.E(t_hat, x_hat)
    vp2 = vp + dt * ((1.0 - g) * E0[:, 2] + g * E_hat[:, 2])
    U2 = u_gc(t_hat, x_hat, e_hat, vp2, f, E_hat)
    x2 = x + dt * ((1.0 - g) * U1 + g * U2)
    e2 = e + eps * dt * ((1.0 - g) * e * div0 + g * e_hat * div_F_perp_perp(t_hat, x_hat, f, E_hat))
    _check("LIMIT2", 2, x2, e2, vp2)
    return _limit_state(x2, e2, vp2, state.w)


def _limit3(state: ParticleState, t: float, dt: float, f: FieldSampler,
            stage_times: str = "printed") -> ParticleState:
    a, be, et, g = SI3_ALPHA, SI3_BETA, SI3_ETA, SI3_GAMMA
    s2, s3 = LIMIT3_STAGE_TIMES[stage_times]
    eps = f.eps
    x, e, vp = state.x, state.e_perp, state.v_par
    E0 = f.E(t, x)
    div0 = div_F_perp_perp(t, x, f, E0)

    U1 = u_gc(t, x, e, vp, f, E0)
    x_2 = x + dt * U1
    e_2 = e + eps * dt * e * div0
    _check("LIMIT3", 1, x_2, e_2)

    t2 = t + s2 * dt
    E_2 = f.E(t2, x_2)
    div2 = div_F_perp_perp(t2, x_2, f, E_2)
    vp3 = vp + dt * ((1.0 - a) * E0[:, 2] + a * E_2[:, 2])
    U2 = u_gc(t2, x_2, e_2, vp3, f, E_2)
    x_3 = x + 0.25 * dt * (U1 + U2)
    e_3 = e + 0.25 * eps * dt * (e * div0 + e_2 * div2)
    _check("LIMIT3", 2, x_3, e_3, vp3)

    t3 = t + s3 * dt
    E_3 = f.E(t3, x_3)
    # the alpha term is the eps -> 0 limit of the implicit part of the fourth SI3 stage
    vp4 = vp + dt * ((be + et) * E0[:, 2] + g * E_2[:, 2] + a * E_3[:, 2])
    U3 = u_gc(t3, x_3, e_3, vp4, f, E_3)
    x_new = x + dt / 6.0 * (U1 + U2 + 4.0 * U3)
    e_new = e + eps * dt / 6.0 * (e * div0 + e_2 * div2 + 4.0 * e_3 * div_F_perp_perp(t3, x_3, f, E_3))
    vp_new = vp + dt / 6.0 * (E0[:, 2] + E_2[:, 2] + 4.0 * E_3[:, 2])
    _check("LIMIT3", 3, x_new, e_new, vp_new)
    return _limit_state(x_new, e_new, vp_new, state.w)


def step_limit(order: int, state: ParticleState, t: float, dt: float, sampler: FieldSampler,
               stage_times: str = "printed") -> ParticleState:
    """One step of the drift-kinetic limit scheme; the output has v_perp = 0."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if order == 1:
        return _limit1(state, t, dt, sampler)
    if order == 2:
        return _limit2(state, t, dt, sampler)
    if order == 3:
        return _limit3(state, t, dt, sampler, stage_times)
    raise ValueError(f"limit order must be 1, 2 or 3, got {order}")


def step_rk4(state: ParticleState, t: float, dt: float, sampler: FieldSampler) -> ParticleState:
    """Classical RK4 on the original Lorentz characteristics.

    e_perp is not integrated; it is reset to |v_perp|^2/2 on output.
    """
    eps = sampler.eps

    def rhs(tt, x, v):
        return v, sampler.E(tt, x) - (sampler.b(tt, x) / eps)[:, None] * perp(v)

    x, v = state.x, state.v
    k1x, k1v = rhs(t, x, v)
    k2x, k2v = rhs(t + 0.5 * dt, x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
    k3x, k3v = rhs(t + 0.5 * dt, x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
    k4x, k4v = rhs(t + dt, x + dt * k3x, v + dt * k3v)
    x_new = x + dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    v_new = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    _check("RK4REF", 1, x_new, v_new)
    e_new = 0.5 * (v_new[:, 0] ** 2 + v_new[:, 1] ** 2)
    return ParticleState(x_new, v_new, e_new, state.w)


def step_drift_rk4(state: ParticleState, t: float, dt: float, sampler: FieldSampler) -> ParticleState:
    """Classical RK4 on the limit characteristics (x, e_perp, v_par).

    dx/dt = U_gc, de_perp/dt = eps e_perp div(F_perp^perp), dv_par/dt = E_par.
    """
    eps = sampler.eps

    def rhs(tt, x, e, vp):
        E = sampler.E(tt, x)
        return (u_gc(tt, x, e, vp, sampler, E),
                eps * e * div_F_perp_perp(tt, x, sampler, E),
                E[:, 2])

    x, e, vp = state.x, state.e_perp, state.v_par
    k1 = rhs(t, x, e, vp)
    k2 = rhs(t + 0.5 * dt, x + 0.5 * dt * k1[0], e + 0.5 * dt * k1[1], vp + 0.5 * dt * k1[2])
    k3 = rhs(t + 0.5 * dt, x + 0.5 * dt * k2[0], e + 0.5 * dt * k2[1], vp + 0.5 * dt * k2[2])
    k4 = rhs(t + dt, x + dt * k3[0], e + dt * k3[1], vp + dt * k3[2])
    combine = lambda y, i: y + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    x_new, e_new, vp_new = combine(x, 0), combine(e, 1), combine(vp, 2)
    _check("DRIFT_RK4", 1, x_new, e_new, vp_new)
    return _limit_state(x_new, e_new, vp_new, state.w)


Stepper = Callable[[ParticleState, float, float, FieldSampler], ParticleState]


def stepper(kind, stage_times: str = "printed") -> Stepper:
    """Single-step function for a scheme kind."""
    kind = SchemeKind.parse(kind)
    table: Dict[SchemeKind, Stepper] = {
        SchemeKind.SI1: lambda s, t, dt, f: step_si(1, s, t, dt, f),
        SchemeKind.SI2: lambda s, t, dt, f: step_si(2, s, t, dt, f),
        SchemeKind.SI3: lambda s, t, dt, f: step_si(3, s, t, dt, f, stage_times),
        SchemeKind.LIMIT1: lambda s, t, dt, f: step_limit(1, s, t, dt, f),
        SchemeKind.LIMIT2: lambda s, t, dt, f: step_limit(2, s, t, dt, f),
        SchemeKind.LIMIT3: lambda s, t, dt, f: step_limit(3, s, t, dt, f, stage_times),
        SchemeKind.RK4REF: step_rk4,
    }
    return table[kind]


def to_limit_state(state: ParticleState) -> ParticleState:
    """Drop v_perp, keeping (x, e_perp, v_par)."""
    return _limit_state(state.x.copy(), state.e_perp.copy(), state.v_par.copy(), state.w)


def advance(kind, state: ParticleState, t0: float, dt: float, n_steps: int,
            sampler: FieldSampler, stage_times: str = "printed",
            observer: Callable[[int, float, ParticleState], None] = None) -> ParticleState:
    """Take n_steps fixed steps, calling observer(step, t, state) after each.

    Limit schemes start from the projection of the state onto (x, e_perp, v_par).
    """
    step = stepper(kind, stage_times)
    if SchemeKind.parse(kind).value.startswith("LIMIT"):
        state = to_limit_state(state)
    t = t0
    for n in range(1, n_steps + 1):
        state = step(state, t, dt, sampler)
        t = t0 + n * dt
        if observer is not None:
            observer(n, t, state)
    return state
