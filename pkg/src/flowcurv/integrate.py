"""Adaptive Dormand-Prince 5(4) integration with PWL boundary events.

The embedded pair controls the local error per accepted step; for
piecewise-linear models the breakpoint surfaces of every pwl argument
(u = +1 and u = -1) are treated as events: a bracketed crossing is bisected
to a 1e-12 time tolerance, the step is split there, and the crossing is
recorded, so the Jacobian discontinuities are localized and every stretch
between events stays inside one region.

Everything is plain deterministic float arithmetic: identical inputs and
tolerances reproduce bit-identical trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Trajectory", "IntegrationError", "integrate"]

# Dormand-Prince 5(4) tableau (FSAL: the 7th stage is the next step's first)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# b5 - b4: error-estimate weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

_EVENT_TIME_TOL = 1e-12
_EVENT_DEADBAND = 1e-9


class IntegrationError(RuntimeError):
    """Integration aborted; `.trajectory` holds the partial result."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass(frozen=True)
class Trajectory:
    """Accepted states of one integration, with PWL boundary crossings."""

    times: np.ndarray
    states: np.ndarray            # (nsamples, n)
    events: tuple = ()            # (time, boundary label) pairs
    complete: bool = True
    diagnostic: str = ""
    model_name: str = field(default="", compare=False)

    def __len__(self):
        return len(self.times)


def _event_functions(model):
    """Signed distances to the pwl breakpoints: u(x) - 1 and u(x) + 1."""
    funcs = []
    for k, arg in enumerate(model.pwl_args):
        for offset, label in ((-1.0, f"pwl{k}:+1"), (1.0, f"pwl{k}:-1")):
            def g(x, arg=arg, offset=offset):
                return float(arg.eval(x)) + offset
            funcs.append((g, label))
    return funcs


def integrate(model, x0, t_end, rel_tol=1e-9, abs_tol=1e-12, t0=0.0,
              max_steps=2_000_000):
    """Integrate `model` from `x0` over [t0, t0 + t_end].

    Returns accepted steps plus event points; no interpolated dense output.
    Raises IntegrationError (partial trajectory attached) on step-size
    underflow or a non-finite state.
    """
    if rel_tol <= 0 or abs_tol <= 0:
        raise ValueError("tolerances must be positive")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (model.dim,):
        raise ValueError(f"x0 must have shape ({model.dim},)")
    if not np.isfinite(x).all():
        raise ValueError("non-finite initial state")

    def f(state):
        return model.velocity(state)

    events = _event_functions(model)
    t = float(t0)
    t_final = t0 + t_end
    times = [t]
    states = [x.copy()]
    recorded_events = []

    def fail(message):
        traj = Trajectory(times=np.array(times), states=np.array(states),
                          events=tuple(recorded_events), complete=False,
                          diagnostic=message, model_name=model.name)
        raise IntegrationError(message, trajectory=traj)

    def signed(g_val):
        if g_val > _EVENT_DEADBAND:
            return 1
        if g_val < -_EVENT_DEADBAND:
            return -1
        return 0

    event_signs = [signed(g(x)) for g, _ in events]

    k1 = f(x)
    h = _initial_step(f, x, k1, rel_tol, abs_tol)
    h_min_factor = 16 * np.finfo(float).eps

    steps = 0
    while t < t_final:
        if steps >= max_steps:
            fail(f"step budget {max_steps} exhausted at t = {t:.6g}")
        steps += 1
        h = min(h, t_final - t)
        if h <= h_min_factor * max(abs(t), 1.0):
            fail(f"step size underflow at t = {t:.6g} (stiffness beyond the "
                 f"tolerance budget)")

        x_new, err, k_last, ks = _dp_step(f, x, k1, h)
        if not np.isfinite(x_new).all():
            h *= 0.25
            continue
        scale = abs_tol + rel_tol * np.maximum(np.abs(x), np.abs(x_new))
        err_norm = np.sqrt(np.mean((err / scale) ** 2))

        if err_norm > 1.0:  # reject
            h *= max(0.2, 0.9 * err_norm ** -0.2)
            continue

        # event scan on the accepted span
        theta_hit, hit_index = None, None
        new_signs = list(event_signs)
        for idx, (g, _) in enumerate(events):
            s_new = signed(g(x_new))
            if event_signs[idx] != 0 and s_new != 0 and s_new != event_signs[idx]:
                theta = _bisect_event(f, x, k1, h, g, event_signs[idx])
                if theta_hit is None or theta < theta_hit:
                    theta_hit, hit_index = theta, idx
            new_signs[idx] = s_new

        if theta_hit is not None:
            pre_sign = event_signs[hit_index]
            _, label = events[hit_index]
            h_ev = theta_hit * h
            x_ev, _, _, _ = _dp_step(f, x, k1, h_ev)
            t = t + h_ev
            x = x_ev
            times.append(t)
            states.append(x.copy())
            recorded_events.append((t, label))
            # post-crossing side of the hit boundary is the flip of the
            # pre-crossing sign; other events re-read at the split point
            event_signs = [signed(gg(x)) if i != hit_index else -pre_sign
                           for i, (gg, _) in enumerate(events)]
            k1 = f(x)
            continue

        t = t + h
        x = x_new
        k1 = k_last  # FSAL
        event_signs = [s if s != 0 else old for s, old in zip(new_signs, event_signs)]
        times.append(t)
        states.append(x.copy())
        if err_norm == 0.0:
            h *= 5.0
        else:
            h *= min(5.0, max(0.2, 0.9 * err_norm ** -0.2))

    return Trajectory(times=np.array(times), states=np.array(states),
                      events=tuple(recorded_events), complete=True,
                      model_name=model.name)


def _dp_step(f, x, k1, h):
    """One Dormand-Prince step of size h from x (k1 = f(x) supplied, FSAL)."""
    ks = [k1]
    for i in range(1, 7):
        xi = x + h * sum(a * k for a, k in zip(_A[i], ks))
        ks.append(f(xi))
    x_new = x + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
    err = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
    return x_new, err, ks[6], ks


def _bisect_event(f, x, k1, h, g, sign_before):
    """Fraction theta of the step at which g crosses zero, to 1e-12 in time."""
    lo, hi = 0.0, 1.0
    while (hi - lo) * h > _EVENT_TIME_TOL:
        mid = 0.5 * (lo + hi)
        x_mid, _, _, _ = _dp_step(f, x, k1, mid * h)
        val = g(x_mid)
        if val == 0.0:
            return mid
        if (1 if val > 0 else -1) == sign_before:
            lo = mid
        else:
            hi = mid
    return hi


def _initial_step(f, x, k1, rel_tol, abs_tol):
    """Standard order-5 starting-step heuristic."""
    scale = abs_tol + rel_tol * np.abs(x)
    d0 = np.sqrt(np.mean((x / scale) ** 2))
    d1 = np.sqrt(np.mean((k1 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    x1 = x + h0 * k1
    k2 = f(x1)
    d2 = np.sqrt(np.mean(((k2 - k1) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1)
