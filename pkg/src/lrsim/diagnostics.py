"""Numerical certification of the flows.

Conservation drift reports, invariant-measure divergence checks in flat
redundant charts, the penalty-limit comparison between L+R and LR flows,
reduction equivalences, time-reparametrized cross-checks, and contact-point
reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from . import liecore as lie
from .integrators import (
    IntegratorConfig,
    Trajectory,
    integrate,
    integrate_reparametrized,
    reparametrize_trajectory,
)
from .operators import MeasureDensity
from .systems import (
    CotangentSystem,
    LplusRSystem,
    LRSystem,
    LstarGeodesicSystem,
    contact_velocity,
    penalty_pi0,
    reconstruct_coupled_W,
    reconstruct_support_W,
)

FD_STEP = 1e-5


@dataclass(frozen=True)
class QuantityDrift:
    name: str
    initial: float
    max_abs_drift: float
    max_rel_drift: float


def conservation_report(traj, quantities=None):
    """Drift of named conserved quantities along a trajectory.

    ``quantities`` may list names from the system's conserved set, names of
    the form ``constraint:<residual>``, or (name, callable) pairs; by
    default the full conserved set is reported.  Relative drift is measured
    against |initial value| when that is meaningful, else against the
    trajectory's own scale.
    """
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    available = traj.system.conserved()
    if quantities is None:
        selected = list(available.items())
    else:
        selected = []
        for q in quantities:
            if isinstance(q, str):
                if q.startswith("constraint:"):
                    resid = q.split(":", 1)[1]
                    if resid not in traj.system.constraints(traj.states[0]):
                        raise KeyError(
                            f"constraint {resid!r} undefined for system "
                            f"{traj.system.kind!r}"
                        )
                    selected.append(
                        (q, lambda y, r=resid: traj.system.constraints(y)[r])
                    )
                elif q not in available:
                    raise KeyError(
                        f"quantity {q!r} undefined for system {traj.system.kind!r}; "
                        f"available: {sorted(available)}"
                    )
                else:
                    selected.append((q, available[q]))
            else:
                selected.append(q)
    report = []
    for name, fn in selected:
        values = np.array([fn(y) for y in traj.states])
        initial = float(values[0])
        drift = float(np.max(np.abs(values - initial)))
        scale = abs(initial) if abs(initial) > 1e-12 else max(np.max(np.abs(values)), 1.0)
        report.append(QuantityDrift(name, initial, drift, drift / scale))
    return report


def constraint_report(traj):
    """Worst residual of every named constraint along the trajectory."""
    worst = {}
    for y in traj.states:
        for name, resid in traj.system.constraints(y).items():
            worst[name] = max(worst.get(name, 0.0), resid)
    return worst


@dataclass(frozen=True)
class DivergenceEstimate:
    value: float
    refined: float
    warning: bool


def measure_divergence(field, density, state, fd_step=FD_STEP):
    """Central-difference divergence of (density * field) at a flat state.

    A vanishing value certifies that density * (coordinate volume) is
    preserved by the flow.  The estimate is repeated at half the step; a
    large disagreement flags cancellation trouble.
    """
    state = np.asarray(state, dtype=float)

    def estimate(h):
        total = 0.0
        for i in range(state.size):
            up = state.copy()
            up[i] += h
            dn = state.copy()
            dn[i] -= h
            total += (density(up) * field(up)[i] - density(dn) * field(dn)[i]) / (2.0 * h)
        return total

    value = estimate(fd_step)
    refined = estimate(0.5 * fd_step)
    # roundoff-corrupted estimates are both large and mutually inconsistent;
    # a genuinely vanishing divergence gives two tiny values, a genuinely
    # nonzero one gives two values that agree
    magnitude = max(abs(value), abs(refined))
    warning = bool(abs(value - refined) > 0.5 * magnitude and magnitude > 1e-8)
    return DivergenceEstimate(value, refined, warning)


# --- flat charts carrying the invariant measures ---------------------------

def lr_measure_chart(inertia, k):
    """Extended LR flow on the flat (m, alpha_1..alpha_k) chart.

    Returns (field, density): the momentum equation with multipliers solved
    from the Gram system, the transport equations for the alpha, and the
    density sqrt(det <I^-1 alpha_i, alpha_j>).
    """
    n = inertia.n
    N = inertia.N

    def split(z):
        return z[:N], [z[N * (1 + i): N * (2 + i)] for i in range(k)]

    def field(z):
        mv, alphas = split(z)
        wv = inertia.solve_vec(mv)
        omega = lie.vec_to_skew(wv, n)
        torque = lie.skew_to_vec(lie.ad(lie.vec_to_skew(mv, n), omega))
        if k:
            sols = [inertia.solve_vec(a) for a in alphas]
            gram = np.array([[sols[i] @ alphas[j] for j in range(k)] for i in range(k)])
            lam = np.linalg.solve(gram, np.array([-(s @ torque) for s in sols]))
            torque = torque + sum(lam[i] * alphas[i] for i in range(k))
        adots = [lie.skew_to_vec(lie.ad(lie.vec_to_skew(a, n), omega)) for a in alphas]
        return np.concatenate([torque] + adots) if k else torque

    def density(z):
        _, alphas = split(z)
        if not k:
            return 1.0
        sols = [inertia.solve_vec(a) for a in alphas]
        gram = np.array([[sols[i] @ alphas[j] for j in range(k)] for i in range(k)])
        return float(np.sqrt(np.linalg.det(gram)))

    return field, MeasureDensity("lr", density)


def _sym_indices(N):
    return np.triu_indices(N)


def sym_to_coords(mat):
    return mat[_sym_indices(mat.shape[0])]


def coords_to_sym(coords, N):
    mat = np.zeros((N, N))
    rows, cols = _sym_indices(N)
    mat[rows, cols] = coords
    return mat + mat.T - np.diag(np.diag(mat))


def lplusr_measure_chart(inertia):
    """L+R flow on the flat (omega, Pi) chart with density sqrt(det(I + Pi)).

    Pi is a symmetric operator on the algebra; its upper-triangle entries
    are the chart coordinates.
    """
    n = inertia.n
    N = inertia.N

    def field(z):
        wv = z[:N]
        pi = coords_to_sym(z[N:], N)
        omega = lie.vec_to_skew(wv, n)
        iw = lie.vec_to_skew(inertia.apply_vec(wv), n)
        wdot = np.linalg.solve(inertia.matrix + pi, lie.skew_to_vec(lie.ad(iw, omega)))
        adw = lie.ad_matrix(omega)
        pidot = pi @ adw - adw @ pi
        return np.concatenate([wdot, sym_to_coords(pidot)])

    def density(z):
        pi = coords_to_sym(z[N:], N)
        return float(np.sqrt(np.linalg.det(inertia.matrix + pi)))

    return field, MeasureDensity("lplusr", density)


def reduced_chaplygin_density(inertia, mass, radius):
    """Density 1 / sqrt(det (I + m rho^2 Id)|_{R^n ^ gamma}) on (gamma, p).

    Only gamma enters; it is normalized first, making the density invariant
    under rescaling of gamma (the same extension the cotangent field uses).
    """
    mr2 = mass * radius**2
    n = inertia.n

    def density(z):
        gamma = z[:n] / np.linalg.norm(z[:n])
        basis = lie.wedge_subspace_basis(gamma)
        shifted = inertia.matrix + mr2 * np.eye(inertia.N)
        gram = basis.vectors.T @ shifted @ basis.vectors
        return float(1.0 / np.sqrt(np.linalg.det(gram)))

    return MeasureDensity("cotangent", density)


def special_chaplygin_density(axes):
    """Closed-form density (A gamma, gamma)^{-(n-2)/2} for the special inertia."""
    axes = np.asarray(axes, dtype=float)
    n = axes.size

    def density(z):
        gamma = z[:n] / np.linalg.norm(z[:n])
        return float(((axes * gamma) @ gamma) ** (-(n - 2) / 2.0))

    return MeasureDensity("cotangent-special", density)


def chaplygin_measure_check(state, inertia, mass, radius):
    """Both reduced-measure densities at a (gamma, p) state.

    The first is the general restricted-determinant form, the second the
    closed form available for the special inertia; for that inertia their
    ratio is independent of gamma.
    """
    if inertia.kind != "special":
        raise ValueError("the closed-form density requires the special inertia kind")
    state = np.asarray(state, dtype=float)
    general = reduced_chaplygin_density(inertia, mass, radius)(state)
    closed = special_chaplygin_density(inertia.params["A"])(state)
    return general, closed


# --- penalty limit ----------------------------------------------------------

@dataclass(frozen=True)
class EpsilonStudy:
    epsilons: tuple
    errors: tuple
    slope: float


def epsilon_limit_study(inertia, constraint_basis, g0, omega0, epsilons, cfg):
    """Sup-norm distance between penalized L+R and constrained LR trajectories.

    The L+R flow built on eps * sum_i a_i (x) a_i approaches the LR flow with
    constraints <a_i, Omega> = 0 as eps grows; the errors should decrease.
    """
    lr = LRSystem(inertia, constraint_basis)
    y_lr = lr.initial_state(g0, omega0)
    traj_lr = integrate(lr, y_lr, cfg)
    ref = np.column_stack([traj_lr.component("g"), traj_lr.component("omega")])
    errors = []
    for eps in epsilons:
        lpr = LplusRSystem(inertia, penalty_pi0(constraint_basis, eps))
        y0 = lpr.pack(g=g0, omega=omega0)
        traj = integrate(lpr, y0, cfg)
        cur = np.column_stack([traj.component("g"), traj.component("omega")])
        errors.append(float(np.max(np.abs(cur - ref))))
    slope = float(np.polyfit(np.log(np.asarray(epsilons, dtype=float)), np.log(errors), 1)[0])
    return EpsilonStudy(tuple(float(e) for e in epsilons), tuple(errors), slope)


# --- reconstruction ---------------------------------------------------------

def reconstruct_contact(traj):
    """Contact-point path r(t) - r(0) of a rolling-ball trajectory.

    Cumulative trapezoidal quadrature of rho * Ad_g(omega) Gamma; the last
    coordinate is conserved (the corresponding constraint is holonomic).
    """
    vels = np.array([contact_velocity(traj.system, y) for y in traj.states])
    return cumulative_trapezoid(vels, traj.times, axis=0, initial=0.0)


def reconstruct_W(traj, w0=None):
    """Partner velocities slaved to a coupled or support trajectory.

    For coupled systems ``w0`` supplies the initial second-factor velocity
    whose free component is transported; for support systems the contact
    constraints determine everything and a list of per-body W arrays is
    returned (see :mod:`lrsim.systems`).
    """
    system = traj.system
    if hasattr(system, "n_bodies"):
        return reconstruct_support_W(system, traj.states, w0)
    if w0 is None:
        raise ValueError("coupled reconstruction needs the initial W")
    w0 = np.asarray(w0, dtype=float)
    w0_vec = lie.skew_to_vec(w0) if w0.ndim == 2 else w0
    return reconstruct_coupled_W(system, traj.states, w0_vec)


# --- cross-checks -----------------------------------------------------------

def reduction_equivalence(full_system, reduced_system, y0_full, cfg):
    """Sup-norm deviation of (g, omega) between full and reduced trajectories."""
    traj_full = integrate(full_system, y0_full, cfg)
    y0_red = reduced_system.pack(
        g=y0_full[full_system.slice_of("g")].reshape(full_system.n, full_system.n),
        omega=y0_full[full_system.slice_of("omega")],
    )
    traj_red = integrate(reduced_system, y0_red, cfg)
    dev = 0.0
    for name in ("g", "omega"):
        dev = max(dev, float(np.max(np.abs(traj_full.component(name) - traj_red.component(name)))))
    return dev, traj_full, traj_red


def hamiltonization_check(inertia, mass, radius, gamma0, p0, tau_end=1.0, h=1e-3):
    """Compare the rescaled reduced flow with the quadric geodesic flow.

    Requires the special inertia.  Integrates the (gamma, p) flow directly
    in the rescaled time, converts a physical-time trajectory by quadrature
    as an independent path, and runs the Lagrangian geodesic flow from
    matched initial data.  Returns the sup deviation of gamma between the
    rescaled flow and the geodesic flow, the dual-path deviation, and the
    geodesic trajectory for further checks.
    """
    if inertia.kind != "special":
        raise ValueError("the Hamiltonization check requires the special inertia kind")
    axes = inertia.params["A"]
    cot = CotangentSystem(inertia, mass, radius)
    y0 = cot.pack(gamma=gamma0, p=p0)
    steps = int(round(tau_end / h))
    cfg_tau = IntegratorConfig(h=h, steps=steps)
    traj_tau = integrate_reparametrized(cot, y0, axes, cfg_tau)

    gdot0 = cot.gamma_dot_of(np.asarray(gamma0, dtype=float), np.asarray(p0, dtype=float))
    v0 = float(np.sqrt((axes * gamma0) @ gamma0)) * gdot0
    geo = LstarGeodesicSystem(axes)
    traj_geo = integrate(geo, geo.pack(gamma=gamma0, v=v0), cfg_tau)

    sup_geo = float(np.max(np.abs(traj_tau.component("gamma") - traj_geo.component("gamma"))))

    # independent path: physical-time trajectory reparametrized by quadrature
    rate_min = 1.0 / np.sqrt(float(np.max(axes)))
    t_end = 1.25 * tau_end / rate_min
    cfg_t = IntegratorConfig(h=h, steps=int(round(t_end / h)))
    traj_t = integrate(cot, y0, cfg_t)
    tau_of_t = reparametrize_trajectory(traj_t, axes)
    spline = CubicSpline(tau_of_t, traj_t.component("gamma"), axis=0)
    sup_dual = float(
        np.max(np.abs(spline(traj_tau.times) - traj_tau.component("gamma")))
    )
    return sup_geo, sup_dual, traj_geo


def functional_independence_rank(functions, states, fd_step=1e-6, tol=1e-8):
    """Rank of the Jacobian of scalar state functions at sample states.

    Gradients are taken by central differences in the flat chart; the rank
    is the count of singular values above ``tol`` relative to the largest,
    minimized over the sample states.
    """
    ranks = []
    for y in states:
        rows = []
        for fn in functions:
            grad = np.empty(y.size)
            for i in range(y.size):
                up = y.copy()
                up[i] += fd_step
                dn = y.copy()
                dn[i] -= fd_step
                grad[i] = (fn(up) - fn(dn)) / (2.0 * fd_step)
            rows.append(grad)
        sv = np.linalg.svd(np.array(rows), compute_uv=False)
        ranks.append(int(np.sum(sv > tol * sv[0])))
    return min(ranks)
