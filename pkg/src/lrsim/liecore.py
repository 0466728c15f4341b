"""Exact linear algebra on so(n) and SO(n).

Skew-symmetric matrices are the Lie algebra so(n); rotations are SO(n).
The scalar product used throughout is the Ad-invariant one,

    <X, Y> = -1/2 tr(X Y),

under which the elementary bivectors E_ij = e_i ^ e_j (i < j, ordered
lexicographically) form an orthonormal basis.  Skew matrices are freely
converted to/from their coordinate vectors in that basis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

SKEW_TOL = 1e-12
ORTHO_TOL = 1e-10
RANK_TOL = 1e-10
UNIT_TOL = 1e-12


class DimensionError(ValueError):
    """Operands live in incompatible spaces."""


def _as_matrix(x, name="matrix"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {x.shape}")
    return x


def check_skew(x, tol=SKEW_TOL):
    """Validate that ``x`` is square and skew-symmetric within ``tol``."""
    x = _as_matrix(x, "skew matrix")
    dev = np.max(np.abs(x + x.T))
    if dev > tol:
        raise ValueError(f"matrix is not skew-symmetric (|X + X^T| = {dev:.3e})")
    return x


def check_rotation(g, tol=ORTHO_TOL):
    """Validate that ``g`` is orthogonal with determinant +1 within ``tol``."""
    g = _as_matrix(g, "rotation")
    dev = np.max(np.abs(g.T @ g - np.eye(g.shape[0])))
    if dev > tol:
        raise ValueError(f"matrix is not orthogonal (|g^T g - I| = {dev:.3e})")
    det = np.linalg.det(g)
    if abs(det - 1.0) > tol:
        raise ValueError(f"matrix has determinant {det:.12g}, not +1")
    return g


def check_unit(v, tol=UNIT_TOL):
    """Validate that ``v`` is a unit vector within ``tol``."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {v.shape}")
    err = abs(np.dot(v, v) - 1.0)
    if err > 2.0 * tol:
        raise ValueError(f"vector is not unit (||v||^2 - 1 = {err:.3e})")
    return v


def skew_part(x):
    """Skew-symmetric part (X - X^T)/2; cheap drift control after products."""
    return 0.5 * (x - x.T)


def wedge(x, y):
    """Wedge product x ^ y = x y^T - y x^T of two n-vectors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionError(f"wedge needs two equal-length vectors, got {x.shape} and {y.shape}")
    return np.outer(x, y) - np.outer(y, x)


def inner(x, y):
    """Ad-invariant scalar product <X, Y> = -1/2 tr(X Y) of skew matrices.

    For skew operands this equals half the Frobenius pairing, which is how
    it is evaluated here.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionError(f"inner product of mismatched shapes {x.shape} and {y.shape}")
    return 0.5 * float(np.tensordot(x, y))


def norm(x):
    """Norm induced by :func:`inner`."""
    return np.sqrt(max(inner(x, x), 0.0))


def ad(x, y):
    """Commutator [X, Y] = X Y - Y X."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionError(f"commutator of mismatched shapes {x.shape} and {y.shape}")
    return x @ y - y @ x


def Ad(g, x):
    """Adjoint action g X g^{-1} of a rotation on a skew matrix."""
    g = np.asarray(g, dtype=float)
    x = np.asarray(x, dtype=float)
    if g.shape != x.shape:
        raise DimensionError(f"Ad of mismatched shapes {g.shape} and {x.shape}")
    return skew_part(g @ x @ g.T)


def proj_wedge_subspace(gamma, x):
    """Orthogonal projection of a skew matrix onto R^n ^ gamma.

    For a unit vector gamma the projection is
    X gamma gamma^T + gamma gamma^T X.
    """
    gamma = check_unit(gamma, tol=1e-10)
    x = np.asarray(x, dtype=float)
    if x.shape != (gamma.size, gamma.size):
        raise DimensionError(f"projection of shape {x.shape} against vector of size {gamma.size}")
    outer = np.outer(gamma, gamma)
    return x @ outer + outer @ x


# --- bivector coordinates -------------------------------------------------

def so_dim(n):
    """dim so(n) = n(n-1)/2."""
    return n * (n - 1) // 2


def bivector_pairs(n):
    """Index pairs (i, j), i < j, in lexicographic order."""
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


_PAIR_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _pair_indices(n):
    if n not in _PAIR_CACHE:
        pairs = bivector_pairs(n)
        rows = np.array([p[0] for p in pairs], dtype=int)
        cols = np.array([p[1] for p in pairs], dtype=int)
        _PAIR_CACHE[n] = (rows, cols)
    return _PAIR_CACHE[n]


def skew_to_vec(x):
    """Coordinates of a skew matrix in the ordered bivector basis."""
    x = np.asarray(x, dtype=float)
    rows, cols = _pair_indices(x.shape[0])
    return x[rows, cols].copy()


def vec_to_skew(v, n):
    """Skew matrix with the given bivector coordinates."""
    v = np.asarray(v, dtype=float)
    rows, cols = _pair_indices(n)
    if v.size != rows.size:
        raise DimensionError(f"expected {rows.size} coordinates for so({n}), got {v.size}")
    x = np.zeros((n, n))
    x[rows, cols] = v
    x[cols, rows] = -v
    return x


_BASIS_CACHE: dict[int, np.ndarray] = {}


def bivector_basis(n):
    """Stacked orthonormal basis matrices E_ij, shape (N, n, n)."""
    if n not in _BASIS_CACHE:
        pairs = bivector_pairs(n)
        basis = np.zeros((len(pairs), n, n))
        for a, (i, j) in enumerate(pairs):
            basis[a, i, j] = 1.0
            basis[a, j, i] = -1.0
        basis.setflags(write=False)
        _BASIS_CACHE[n] = basis
    return _BASIS_CACHE[n]


def adjoint_matrix(g):
    """Matrix of Ad_g on bivector coordinates: vec(g X g^T) = Q vec(X)."""
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    basis = bivector_basis(n)
    conj = np.einsum("ip,apq,jq->aij", g, basis, g)
    rows, cols = _pair_indices(n)
    return conj[:, rows, cols].T.copy()


def ad_matrix(x):
    """Matrix of ad_X = [X, .] on bivector coordinates."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    basis = bivector_basis(n)
    brk = np.einsum("pq,aqr->apr", x, basis) - np.einsum("apq,qr->apr", basis, x)
    rows, cols = _pair_indices(n)
    return brk[:, rows, cols].T.copy()


# --- subspaces ------------------------------------------------------------

@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal basis of a linear subspace of so(n).

    ``vectors`` holds the bivector coordinates of the basis elements as
    columns, shape (N, k).
    """

    n: int
    vectors: np.ndarray

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=float)
        if vecs.ndim != 2 or vecs.shape[0] != so_dim(self.n):
            raise DimensionError(
                f"basis coordinate array must be ({so_dim(self.n)}, k), got {vecs.shape}"
            )
        gram = vecs.T @ vecs
        if gram.size and np.max(np.abs(gram - np.eye(vecs.shape[1]))) > ORTHO_TOL:
            raise ValueError("basis is not orthonormal under the invariant product")
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)

    @property
    def dim(self):
        return self.vectors.shape[1]

    def elements(self):
        """Basis as a list of skew matrices."""
        return [vec_to_skew(self.vectors[:, j], self.n) for j in range(self.dim)]

    def project_vec(self, v):
        """Coordinates of the orthogonal projection onto the subspace."""
        return self.vectors @ (self.vectors.T @ v)

    def project(self, x):
        """Orthogonal projection of a skew matrix onto the subspace."""
        return vec_to_skew(self.project_vec(skew_to_vec(x)), self.n)


def orthonormal_basis_of(generators, n=None, tol=RANK_TOL):
    """Gram-Schmidt orthonormalization of skew-matrix generators.

    Generators that are linearly dependent on earlier ones (residual norm
    below ``tol``) are dropped with a warning.
    """
    gens = [np.asarray(g, dtype=float) for g in generators]
    if n is None:
        if not gens:
            raise ValueError("cannot infer dimension from an empty generator list")
        n = gens[0].shape[0]
    cols = []
    dropped = 0
    for g in gens:
        if g.shape != (n, n):
            raise DimensionError(f"generator of shape {g.shape} in so({n})")
        v = skew_to_vec(g)
        for c in cols:
            v = v - np.dot(c, v) * c
        length = np.linalg.norm(v)
        if length <= tol:
            dropped += 1
            continue
        cols.append(v / length)
    if dropped:
        warnings.warn(f"dropped {dropped} linearly dependent generator(s)", stacklevel=2)
    vectors = np.column_stack(cols) if cols else np.zeros((so_dim(n), 0))
    return SubspaceBasis(n, vectors)


def complement(basis):
    """Orthonormal basis of the orthogonal complement in so(n)."""
    n = basis.n
    full = np.eye(so_dim(n))
    cols = [basis.vectors[:, j] for j in range(basis.dim)]
    out = []
    for a in range(so_dim(n)):
        v = full[:, a]
        for c in cols:
            v = v - np.dot(c, v) * c
        length = np.linalg.norm(v)
        if length > RANK_TOL:
            v = v / length
            cols.append(v)
            out.append(v)
    vectors = np.column_stack(out) if out else np.zeros((so_dim(n), 0))
    return SubspaceBasis(n, vectors)


def householder_frame(gamma):
    """Orthogonal matrix H with H e_n = gamma (a Householder reflection).

    Columns 0..n-2 form an orthonormal frame of the tangent space at gamma;
    deterministic everywhere, smooth away from gamma = e_n where H = Id.
    """
    gamma = np.asarray(gamma, dtype=float)
    n = gamma.size
    e_last = np.zeros(n)
    e_last[-1] = 1.0
    u = gamma - e_last
    uu = np.dot(u, u)
    if uu < 1e-28:
        return np.eye(n)
    return np.eye(n) - (2.0 / uu) * np.outer(u, u)


def wedge_subspace_basis(gamma):
    """Orthonormal basis of R^n ^ gamma built from the Householder frame."""
    gamma = check_unit(gamma, tol=1e-10)
    n = gamma.size
    frame = householder_frame(gamma)
    cols = [skew_to_vec(wedge(frame[:, j], gamma)) for j in range(n - 1)]
    return SubspaceBasis(n, np.column_stack(cols))


def wedge_complement_basis(gamma):
    """Orthonormal basis of (R^n ^ gamma)^perp built from the Householder frame."""
    gamma = check_unit(gamma, tol=1e-10)
    n = gamma.size
    frame = householder_frame(gamma)
    cols = [
        skew_to_vec(wedge(frame[:, i], frame[:, j]))
        for i in range(n - 1)
        for j in range(i + 1, n - 1)
    ]
    vectors = np.column_stack(cols) if cols else np.zeros((so_dim(n), 0))
    return SubspaceBasis(n, vectors)


def iso3(v):
    """so(3) <-> R^3 isomorphism: iso3(a) x = a x for all x (hat map).

    The sign is fixed so that iso3(a x b) = [iso3(a), iso3(b)].
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise DimensionError(f"iso3 expects a 3-vector, got shape {v.shape}")
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def iso3_inv(x):
    """Inverse of :func:`iso3`."""
    x = np.asarray(x, dtype=float)
    if x.shape != (3, 3):
        raise DimensionError(f"iso3_inv expects a 3x3 matrix, got shape {x.shape}")
    return np.array([x[2, 1], x[0, 2], x[1, 0]])
