"""Newton solves, consistent initial values and fixed-step time integration."""

from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .decouple import DecoupledSystem
from .errors import NewtonDivergence, SingularJacobian

__all__ = [
    "SolverConfig",
    "Trajectory",
    "solve_algebraic",
    "consistent_initial_conditions",
    "integrate",
    "INTEGRATORS",
]

log = logging.getLogger("mnadec")

INTEGRATORS = ("implicit-euler", "trapezoidal")


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    h: float | None = None
    integrator: str = "implicit-euler"
    fd_epsilon: float = 1e-7
    max_halvings: int = 8

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be at least 1")
        if self.h is not None and not self.h > 0:
            raise ValueError("step size h must be positive")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")


@dataclass
class Trajectory:
    x_names: tuple
    y_names: tuple
    z_names: tuple
    times: list = field(default_factory=list)
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    z: list = field(default_factory=list)
    newton_iterations: list = field(default_factory=list)
    g_norm: list = field(default_factory=list)
    mna_residual: list = field(default_factory=list)

    def append(self, t, x, y, z, iters, gnorm, mres):
        self.times.append(float(t))
        self.x.append(np.array(x, dtype=float))
        self.y.append(np.array(y, dtype=float))
        self.z.append(np.array(z, dtype=float))
        self.newton_iterations.append(int(iters))
        self.g_norm.append(float(gnorm))
        self.mna_residual.append(float(mres))

    def __len__(self):
        return len(self.times)

    def array(self, which):
        rows = getattr(self, which)
        width = len(getattr(self, f"{which}_names"))
        return np.array(rows).reshape(len(rows), width)

    def column(self, name):
        for which in ("x", "y", "z"):
            names = getattr(self, f"{which}_names")
            if name in names:
                return self.array(which)[:, names.index(name)]
        raise KeyError(name)

    def header(self):
        return (["t", *self.x_names, *self.y_names, *self.z_names,
                 "newton_iterations", "g_norm", "mna_residual"])

    def to_csv(self, fh=None):
        """Write CSV (``repr`` floats, so the output is byte-reproducible)."""
        own = fh is None
        fh = fh or io.StringIO()
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.header())
        for k, t in enumerate(self.times):
            vals = [t, *self.x[k], *self.y[k], *self.z[k]]
            w.writerow([repr(float(v)) for v in vals]
                       + [self.newton_iterations[k], repr(self.g_norm[k]),
                          repr(self.mna_residual[k])])
        return fh.getvalue() if own else None

    def to_json(self):
        return json.dumps({
            "names": {"x": list(self.x_names), "y": list(self.y_names), "z": list(self.z_names)},
            "t": self.times,
            "x": [v.tolist() for v in self.x],
            "y": [v.tolist() for v in self.y],
            "z": [v.tolist() for v in self.z],
            "diagnostics": {"newton_iterations": self.newton_iterations,
                            "g_norm": self.g_norm, "mna_residual": self.mna_residual},
        }, indent=1) + "\n"


def _norm(v):
    return float(np.max(np.abs(v))) if np.size(v) else 0.0


def _solve(J, r):
    try:
        step = np.linalg.solve(J, r)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobian(str(exc)) from None
    if not np.all(np.isfinite(step)):
        raise SingularJacobian("Newton step is not finite")
    return step


def solve_algebraic(sys: DecoupledSystem, x, t, cfg: SolverConfig | None = None, y0=None,
                    info: dict | None = None):
    """Solve ``g(x, y, t) = 0`` for ``y``.

    ``g1..g3`` are affine in their own unknown and are solved in order by one
    correction each; ``(g4, g5)`` are solved jointly by damped Newton.  If
    ``info`` is given it receives the Newton iteration count and final
    residual norm.
    """
    cfg = cfg or SolverConfig()
    p = sys.partition
    y = np.zeros(sys.ny) if y0 is None else np.array(y0, dtype=float)
    x = np.asarray(x, dtype=float)
    rows = sys.g_row_slices()
    blocks = [p.local(n) for n in ("phi_Vs", "iL_tree", "phi_Vc")]
    for rs, cs, fac in zip(rows[:3], blocks, (sys._f1, sys._f2, sys._f3)):
        if cs.stop > cs.start:
            y[cs] -= fac.solve(sys.g(x, y, t)[rs])
    r45 = slice(rows[3].start, rows[4].stop)
    c45 = slice(p.local("phi_R").start, p.local("i_Vc").stop)
    g = sys.g(x, y, t)
    res = _norm(g)
    it = 0
    while res > cfg.newton_tol:
        if it >= cfg.newton_max_iter:
            raise NewtonDivergence(
                f"algebraic solve did not converge in {it} iterations (|g| = {res:.3e})",
                iterate=y.copy(), residual=res, iterations=it)
        it += 1
        _, gy = sys.g_jacobian(x, y, t)
        step = _solve(gy[r45, c45], g[r45])
        lam = 1.0
        for _ in range(cfg.max_halvings + 1):
            trial = y.copy()
            trial[c45] -= lam * step
            gt = sys.g(x, trial, t)
            rt = _norm(gt)
            if np.isfinite(rt) and rt < res:
                break
            lam *= 0.5
        if not np.isfinite(rt):
            raise NewtonDivergence("algebraic Newton produced a non-finite residual",
                                   iterate=y.copy(), residual=res, iterations=it)
        if rt >= res and _norm(lam * step) <= 1e-14 * (1.0 + _norm(y)):
            # stagnation at rounding level
            y, g, res = trial, gt, rt
            break
        y, g, res = trial, gt, rt
    log.debug("algebraic solve at t=%g: %d Newton iterations, |g|=%.3e", t, it, res)
    if info is not None:
        info.update(iterations=it, residual=res)
    return y


def _check_a4(sys, x, y, t):
    a4 = sys.A4(x, y, t)
    if a4.size:
        sym = 0.5 * (a4 + a4.T)
        if np.linalg.eigvalsh(sym).min() <= 0:
            warnings.warn("resistive Jacobian block A4 is not positive definite at the "
                          "initial point", RuntimeWarning, stacklevel=3)


def consistent_initial_conditions(sys: DecoupledSystem, x0=None, t0=0.0,
                                  cfg: SolverConfig | None = None, y_guess=None):
    """``(x0, y0, z0)`` with ``g = 0`` and ``h = 0`` at ``t0``; ``x0`` is free."""
    cfg = cfg or SolverConfig()
    x0 = np.zeros(sys.nx) if x0 is None else np.asarray(x0, dtype=float).ravel()
    if x0.size != sys.nx:
        from .errors import DimensionMismatch
        raise DimensionMismatch(f"x0 has {x0.size} entries, expected {sys.nx}")
    y0 = solve_algebraic(sys, x0, t0, cfg, y_guess)
    _check_a4(sys, x0, y0, t0)
    z0 = sys.solve_outputs(x0, y0, t0)
    return x0, y0, z0


def _step_terms(sys, x, y, t):
    """Differential residual part ``q``, ``g`` and their Jacobians in one pass."""
    xi = sys.partition.join(x, y)
    r, J = sys.projected(xi, t, jac=True)
    d = slice(sys.rows["d1"].start, sys.rows["d2"].stop)
    g = slice(sys.rows["g1"].start, sys.rows["g5"].stop)
    nx, ny = sys.nx, sys.ny
    q = r[d] + sys._ET[d] @ sys.known_ydot(t)
    return q, r[g], J[d, :nx], J[d, nx:nx + ny], J[g, :nx], J[g, nx:nx + ny]


def integrate(sys: DecoupledSystem, x0, t0, t_end, cfg: SolverConfig, y0=None) -> Trajectory:
    """Fixed-step implicit Euler or trapezoidal integration on ``[x, y]``.

    Each step solves the differential residual together with ``g`` at the new
    time by Newton; ``z`` is recovered afterwards from the output block using
    ``x' = f(x, y, t)`` at the new point.
    """
    if cfg.h is None:
        raise ValueError("integration needs a step size h")
    part = sys.partition
    traj = Trajectory(part.x_names, part.y_names, part.z_names)
    x, y, z = consistent_initial_conditions(sys, x0, t0, cfg, y0)
    traj.append(t0, x, y, z, 0, _norm(sys.g(x, y, t0)), _norm(sys.mna_residual(x, y, z, t0)))
    n_steps = int(round((t_end - t0) / cfg.h))
    theta = 1.0 if cfg.integrator == "implicit-euler" else 0.5
    M = sys.M
    nx = sys.nx
    q_prev = _step_terms(sys, x, y, t0)[0] if theta < 1 else None
    for k in range(1, n_steps + 1):
        t1 = t0 + k * cfg.h
        xk = x
        xn, yn = x.copy(), y.copy()

        def F(xa, ya):
            q, g, qx, qy, gx, gy = _step_terms(sys, xa, ya, t1)
            d = M @ (xa - xk) / cfg.h + theta * q
            if theta < 1:
                d = d + (1 - theta) * q_prev
            return np.concatenate([d, g]), (q, qx, qy, gx, gy)

        res_vec, parts = F(xn, yn)
        res = _norm(res_vec)
        it = 0
        while res > cfg.newton_tol:
            if it >= cfg.newton_max_iter:
                raise NewtonDivergence(
                    f"step {k} (t={t1:g}) did not converge in {it} iterations "
                    f"(|F| = {res:.3e})", iterate=np.concatenate([xn, yn]), residual=res,
                    iterations=it, trajectory=traj)
            it += 1
            _, qx, qy, gx, gy = parts
            J = np.block([[M / cfg.h + theta * qx, theta * qy], [gx, gy]])
            step = _solve(J, res_vec)
            lam = 1.0
            for _ in range(cfg.max_halvings + 1):
                xt, yt = xn - lam * step[:nx], yn - lam * step[nx:]
                rv, pt = F(xt, yt)
                rt = _norm(rv)
                if np.isfinite(rt) and rt < res:
                    break
                lam *= 0.5
            if not np.isfinite(rt):
                raise NewtonDivergence(f"step {k}: non-finite residual",
                                       iterate=np.concatenate([xn, yn]), residual=res,
                                       iterations=it, trajectory=traj)
            stalled = rt >= res
            xn, yn, res_vec, parts, res = xt, yt, rv, pt, rt
            if stalled and _norm(lam * step) <= 1e-14 * (1.0 + _norm(np.concatenate([xn, yn]))):
                break
        x, y = xn, yn
        if theta < 1:
            q_prev = parts[0]
        xdot = sys.f(x, y, t1)
        z = sys.solve_outputs(x, y, t1, xdot)
        traj.append(t1, x, y, z, it, _norm(sys.g(x, y, t1)),
                    _norm(sys.mna_residual(x, y, z, t1, xdot)))
    return traj
