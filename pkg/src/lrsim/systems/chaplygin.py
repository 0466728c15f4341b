"""Rubber Chaplygin sphere in n dimensions and its reductions.

A ball of mass m and radius rho rolls on a hyperplane with normal Gamma
without slipping or twisting.  With gamma = g^{-1} Gamma the vertical
direction in the body frame and

    k = I omega + m rho^2 pr_{R^n ^ gamma} omega

the momentum relative to the contact point, the motion obeys

    k' = [k, omega] + lambda_0,   gamma' = -omega gamma,   g' = g omega,

where lambda_0 lies in the orthogonal complement of R^n ^ gamma and is
solved from preserving the no-twist condition pr_{k^gamma} omega = 0.

The quotient by the residual symmetry lives on the cotangent bundle of the
sphere in redundant coordinates (gamma, p), p = m rho^2 gamma' - I(Phi) gamma
with Phi = gamma ^ gamma', and flows by

    gamma' = -Phi gamma,   p' = -Phi p.

For the distinguished inertia I(x ^ y) = A x ^ A y - m rho^2 x ^ y the flow
becomes, after the time substitution dtau = dt / sqrt((A gamma, gamma)),
the geodesic flow on the sphere of the rescaled kinetic energy

    L*(gamma, gamma') = 1/2 [ (A gamma', gamma')
                              - (A gamma, gamma')^2 / (A gamma, gamma) ],

whose value along matched trajectories equals the physical reduced energy.

A companion generalization keeps gamma as an adjoint-orbit element of the
algebra:  k' = [k, omega], gamma' = [gamma, omega] with
k = I omega + m rho^2 [[gamma, omega], gamma]; at n = 3 it recovers the
classical Chaplygin sphere.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .. import liecore as lie
from ..operators import wedge_projector_matrix
from .base import Component, System, UNIT, VECTOR, rotation_component, skew_component
from .lr import MultiplierError

VERTICAL = "last-axis"  # Gamma = e_n throughout


def vertical_vector(n):
    gamma = np.zeros(n)
    gamma[-1] = 1.0
    return gamma


class RubberChaplyginSystem(System):
    """Rubber Chaplygin sphere in group variables; components g, omega."""

    kind = "rubber-chaplygin"

    def __init__(self, inertia, mass, radius):
        if mass <= 0 or radius <= 0:
            raise ValueError("mass and radius must be positive")
        self.inertia = inertia
        self.mass = float(mass)
        self.radius = float(radius)
        self.mr2 = self.mass * self.radius**2
        n = inertia.n
        super().__init__(n, [rotation_component(n), skew_component("omega", n)])

    def gamma_of(self, y):
        g = y[self.slice_of("g")].reshape(self.n, self.n)
        return g.T @ vertical_vector(self.n)

    def rhs(self, y):
        n = self.n
        g = y[self.slice_of("g")].reshape(n, n)
        wv = y[self.slice_of("omega")]
        omega = lie.vec_to_skew(wv, n)
        gamma = g.T @ vertical_vector(n)
        gamma = gamma / np.linalg.norm(gamma)
        proj = wedge_projector_matrix(gamma)
        b = self.inertia.matrix + self.mr2 * proj
        try:
            b_cho = cho_factor(b, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise MultiplierError("contact-point inertia lost positive definiteness") from exc
        kv = b @ wv
        kmat = lie.vec_to_skew(kv, n)
        pw = lie.vec_to_skew(proj @ wv, n)
        torque = lie.skew_to_vec(lie.ad(kmat, omega) - self.mr2 * lie.ad(pw, omega))
        twist = lie.wedge_complement_basis(gamma)
        if twist.dim:
            basis = twist.vectors
            binv_basis = cho_solve(b_cho, basis, check_finite=False)
            gram = basis.T @ binv_basis
            rhs_mult = -(binv_basis.T @ torque)
            try:
                coeff = cho_solve(
                    cho_factor(gram, check_finite=False), rhs_mult, check_finite=False
                )
            except np.linalg.LinAlgError as exc:
                raise MultiplierError("no-twist multiplier system is singular") from exc
            torque = torque + basis @ coeff
        wdot = cho_solve(b_cho, torque, check_finite=False)
        out = np.empty(self.dim)
        out[self.slice_of("g")] = (g @ omega).ravel()
        out[self.slice_of("omega")] = wdot
        return out

    def momentum_vec(self, y):
        gamma = self.gamma_of(y)
        gamma = gamma / np.linalg.norm(gamma)
        b = self.inertia.matrix + self.mr2 * wedge_projector_matrix(gamma)
        return b @ y[self.slice_of("omega")]

    def energy(self, y):
        wv = y[self.slice_of("omega")]
        return 0.5 * float(self.momentum_vec(y) @ wv)

    def constraints(self, y):
        out = super().constraints(y)
        gamma = self.gamma_of(y)
        gamma = gamma / np.linalg.norm(gamma)
        twist = lie.wedge_complement_basis(gamma)
        wv = y[self.slice_of("omega")]
        if twist.dim:
            out["no_twist"] = float(np.max(np.abs(twist.vectors.T @ wv)))
        return out

    def to_cotangent(self, y):
        """Project a group state to the reduced (gamma, p) chart."""
        gamma = self.gamma_of(y)
        gamma = gamma / np.linalg.norm(gamma)
        omega = lie.vec_to_skew(y[self.slice_of("omega")], self.n)
        gamma_dot = -omega @ gamma
        phi = lie.wedge(gamma, gamma_dot)
        p = self.mr2 * gamma_dot - self.inertia.apply(phi) @ gamma
        return gamma, p


class CotangentSystem(System):
    """Reduced rubber Chaplygin flow on T*S^{n-1}; components gamma, p.

    The field extends smoothly off the constraint set {|gamma| = 1,
    (gamma, p) = 0}: every formula uses the normalized gamma, making the
    extension invariant under rescaling of gamma, and the flow preserves
    both constraint functions exactly.
    """

    kind = "cotangent"

    def __init__(self, inertia, mass, radius):
        if mass <= 0 or radius <= 0:
            raise ValueError("mass and radius must be positive")
        self.inertia = inertia
        self.mass = float(mass)
        self.radius = float(radius)
        self.mr2 = self.mass * self.radius**2
        n = inertia.n
        super().__init__(n, [Component("gamma", UNIT, n), Component("p", VECTOR, n)])

    def gamma_dot_of(self, gamma, p):
        """Invert p = m rho^2 gamma' - I(gamma ^ gamma') gamma on T_gamma."""
        n = self.n
        gh = gamma / np.linalg.norm(gamma)
        frame = lie.householder_frame(gh)
        tan = frame[:, : n - 1]
        lmat = np.empty((n - 1, n - 1))
        for j in range(n - 1):
            x = lie.wedge(gh, tan[:, j])
            lmat[:, j] = -(tan.T @ (self.inertia.apply(x) @ gh))
        lmat += self.mr2 * np.eye(n - 1)
        try:
            coeff = np.linalg.solve(lmat, tan.T @ p)
        except np.linalg.LinAlgError as exc:
            raise MultiplierError("momentum-to-velocity map is singular") from exc
        return tan @ coeff

    def rhs(self, y):
        gamma = y[self.slice_of("gamma")]
        p = y[self.slice_of("p")]
        gh = gamma / np.linalg.norm(gamma)
        gamma_dot = self.gamma_dot_of(gamma, p)
        phi = lie.wedge(gh, gamma_dot)
        out = np.empty(self.dim)
        out[self.slice_of("gamma")] = -phi @ gamma
        out[self.slice_of("p")] = -phi @ p
        return out

    def energy(self, y):
        gamma = y[self.slice_of("gamma")]
        p = y[self.slice_of("p")]
        return 0.5 * float(p @ self.gamma_dot_of(gamma, p))

    def constraints(self, y):
        out = super().constraints(y)
        gamma = y[self.slice_of("gamma")]
        p = y[self.slice_of("p")]
        out["gamma_p_orthogonality"] = abs(float(gamma @ p))
        return out


class LstarGeodesicSystem(System):
    """Geodesic flow of the rescaled kinetic energy on the unit sphere.

    Components gamma and v = dgamma/dtau; the Lagrangian is
    1/2 [(A v, v) - (A gamma, v)^2 / (A gamma, gamma)], conserved along the
    flow, and its value equals the reduced energy of the rolling ball the
    flow is the Hamiltonization of.
    """

    kind = "lstar-geodesic"

    def __init__(self, axes):
        axes = np.asarray(axes, dtype=float)
        if axes.ndim != 1 or np.any(axes <= 0):
            raise ValueError("the quadric axes must be a vector of positive reals")
        self.axes = axes
        n = axes.size
        super().__init__(n, [Component("gamma", UNIT, n), Component("v", VECTOR, n)])

    def lagrangian(self, y):
        gamma = y[self.slice_of("gamma")]
        v = y[self.slice_of("v")]
        a_g = self.axes * gamma
        return 0.5 * (float((self.axes * v) @ v) - float(a_g @ v) ** 2 / float(a_g @ gamma))

    def rhs(self, y):
        n = self.n
        gamma = y[self.slice_of("gamma")]
        v = y[self.slice_of("v")]
        a_g = self.axes * gamma
        a_v = self.axes * v
        agg = float(a_g @ gamma)
        ratio = float(a_g @ v) / agg
        # Euler-Lagrange system with the unit-sphere multiplier:
        #   M gamma'' = ((Av,v)/(Ag,g) - ratio^2) Ag + lambda gamma,
        #   (gamma, gamma'') = -|v|^2,  M = A - Ag Ag^T / (Ag,g)
        mat = np.zeros((n + 1, n + 1))
        mat[:n, :n] = np.diag(self.axes) - np.outer(a_g, a_g) / agg
        mat[:n, n] = -gamma
        mat[n, :n] = gamma
        rhs_vec = np.empty(n + 1)
        rhs_vec[:n] = (float(a_v @ v) / agg - ratio**2) * a_g
        rhs_vec[n] = -float(v @ v)
        try:
            sol = np.linalg.solve(mat, rhs_vec)
        except np.linalg.LinAlgError as exc:
            raise MultiplierError("degenerate geodesic configuration") from exc
        out = np.empty(self.dim)
        out[self.slice_of("gamma")] = v
        out[self.slice_of("v")] = sol[:n]
        return out

    def energy(self, y):
        return self.lagrangian(y)

    def constraints(self, y):
        out = super().constraints(y)
        gamma = y[self.slice_of("gamma")]
        v = y[self.slice_of("v")]
        out["gamma_v_orthogonality"] = abs(float(gamma @ v))
        return out


class GsrSystem(System):
    """Chaplygin-sphere generalization on an adjoint orbit.

    State components gamma (an algebra element, not a unit vector) and
    omega.  The flow k' = [k, omega], gamma' = [gamma, omega] with
    k = I omega + m rho^2 [[gamma, omega], gamma] conserves <k, k>,
    <gamma, gamma> and the energy 1/2 <k, omega>.
    """

    kind = "gsr"

    def __init__(self, inertia, mass, radius):
        if mass <= 0 or radius <= 0:
            raise ValueError("mass and radius must be positive")
        self.inertia = inertia
        self.mass = float(mass)
        self.radius = float(radius)
        self.mr2 = self.mass * self.radius**2
        n = inertia.n
        super().__init__(n, [skew_component("gamma", n), skew_component("omega", n)])

    def _b_matrix(self, gamma_mat):
        adg = lie.ad_matrix(gamma_mat)
        return self.inertia.matrix + self.mr2 * (adg.T @ adg)

    def momentum_vec(self, y):
        gamma = lie.vec_to_skew(y[self.slice_of("gamma")], self.n)
        return self._b_matrix(gamma) @ y[self.slice_of("omega")]

    def rhs(self, y):
        n = self.n
        gamma = lie.vec_to_skew(y[self.slice_of("gamma")], n)
        wv = y[self.slice_of("omega")]
        omega = lie.vec_to_skew(wv, n)
        b = self._b_matrix(gamma)
        kmat = lie.vec_to_skew(b @ wv, n)
        gamma_dot = lie.ad(gamma, omega)
        # d/dt of the orbit-dependent part of the operator applied to omega
        bdot_w = self.mr2 * (
            lie.ad(lie.ad(gamma_dot, omega), gamma) + lie.ad(lie.ad(gamma, omega), gamma_dot)
        )
        try:
            wdot = cho_solve(
                cho_factor(b, check_finite=False),
                lie.skew_to_vec(lie.ad(kmat, omega) - bdot_w),
                check_finite=False,
            )
        except np.linalg.LinAlgError as exc:
            raise MultiplierError("effective inertia lost positive definiteness") from exc
        out = np.empty(self.dim)
        out[self.slice_of("gamma")] = lie.skew_to_vec(gamma_dot)
        out[self.slice_of("omega")] = wdot
        return out

    def energy(self, y):
        return 0.5 * float(self.momentum_vec(y) @ y[self.slice_of("omega")])

    def conserved(self):
        return {
            "energy": self.energy,
            "momentum_norm": lambda y: float(np.sum(self.momentum_vec(y) ** 2)),
            "orbit_norm": lambda y: 2.0 * float(np.sum(y[self.slice_of("gamma")] ** 2)),
        }


def contact_velocity(system, y):
    """Space-frame velocity of the rolling ball center, rho * Ad_g(omega) Gamma."""
    n = system.n
    g = y[system.slice_of("g")].reshape(n, n)
    omega = lie.vec_to_skew(y[system.slice_of("omega")], n)
    return system.radius * (lie.Ad(g, omega) @ vertical_vector(n))
