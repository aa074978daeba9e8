"""pn.py
Pointwise Poisson-Nijenhuis calculus in chart components: Schouten and Koszul
brackets, Lie derivatives, Nijenhuis torsion, the PN hierarchy, canonical
hamiltonians and the eigenvalue residuals.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.cluster import AgglomerativeClustering

from utils.errors import AsymmetryResidual, SingularNt, OddMultiplicity, ComplexSpectrum
from models.components import (BivectorAtPoint, TensorField, as_components,
                               fd_gradient, fd_jacobian)

ASYMMETRY_TOL = 1e-9
SINGULAR_DET = 1e-12
CLUSTER_TOL = 1e-6


def _cyclic(t):
    """t[i,j,k] + t[k,i,j] + t[j,k,i]"""
    return t + t.transpose(1, 2, 0) + t.transpose(2, 0, 1)


def schouten_bivector_bivector(P, Q, p, fd):
    """[P, Q]^{ijk} as the cyclic sum of P^{il} d_l Q^{jk} + Q^{il} d_l P^{jk}.
    [P, P] = 0 is the Jacobi identity, [P, Q] = 0 compatibility.
    """
    P.expect("bivector")
    Q.expect("bivector")
    dP = P.jacobian(p, fd)
    dQ = dP if Q is P else Q.jacobian(p, fd)
    term = np.einsum("il,ljk->ijk", P(p), dQ) + np.einsum("il,ljk->ijk", Q(p), dP)
    return _cyclic(term)


def _vector_field(v):
    if isinstance(v, TensorField):
        return v.expect("vector")
    return TensorField(v, "vector", name="vector field")


def lie_derivative_bivector(v, P, p, fd):
    """(L_v P)^{ij} = v^l d_l P^{ij} - P^{lj} d_l v^i - P^{il} d_l v^j"""
    P.expect("bivector")
    v = _vector_field(v)
    dv = v.jacobian(p, fd)
    dP = P.jacobian(p, fd)
    pv = P(p)
    comps = (np.einsum("l,lij->ij", v(p), dP)
             - np.einsum("lj,li->ij", pv, dv)
             - np.einsum("il,lj->ij", pv, dv))
    return BivectorAtPoint(comps)


def lie_derivative_covector(v, beta, p, fd):
    """(L_v beta)_i = v^j d_j beta_i + beta_j d_i v^j, for callables on the chart."""
    jac_beta = fd_jacobian(beta, p, fd)
    jac_v = fd_jacobian(v, p, fd)
    return np.asarray(v(p)) @ jac_beta + jac_v @ np.asarray(beta(p))


def torsion_tensor(N, p, fd):
    """Full Nijenhuis torsion T[i, j, k] = T(N)(e_j, e_k)^i."""
    N.expect("endomorphism")
    n0 = N(p)
    dN = N.jacobian(p, fd)  # dN[l, i, j] = d_l N^i_j
    return (np.einsum("lj,lik->ijk", n0, dN)
            - np.einsum("lk,lij->ijk", n0, dN)
            - np.einsum("il,jlk->ijk", n0, dN)
            + np.einsum("il,klj->ijk", n0, dN))


def nijenhuis_torsion(N, v, w, p, fd):
    """T(N)(e_v, e_w) for coordinate directions v, w."""
    return torsion_tensor(N, p, fd)[:, v, w]


def hierarchy_bivector(P, N, j, tol=ASYMMETRY_TOL):
    """P_{j+1} = N^j P."""
    if j < 0:
        raise ValueError(f"Invalid hierarchy level {j}")
    comps = np.linalg.matrix_power(as_components(N), j) @ as_components(P)
    res = np.linalg.norm(comps + comps.T) / max(1.0, np.linalg.norm(comps))
    if res > tol:
        raise AsymmetryResidual(f"N^{j} P is not antisymmetric (residual {res:.3e})")
    return BivectorAtPoint(0.5 * (comps - comps.T))


def hierarchy_field(P, N, j):
    P.expect("bivector")
    N.expect("endomorphism")
    if j == 0:
        return P
    return TensorField(lambda p: hierarchy_bivector(P(p), N(p), j, tol=np.inf).components,
                       "bivector", name=f"P_{j + 1}")


@dataclass(frozen=True)
class HierarchyLevel:
    """Level of the PN hierarchy: bivector P_{j+1} = N^j P and hamiltonian I_k."""
    j: int
    k: int

    def __post_init__(self):
        if self.j < 0 or self.k < 0:
            raise ValueError(f"Invalid hierarchy level (j={self.j}, k={self.k})")

    def bivector(self, P, N):
        return hierarchy_field(P, N, self.j)

    def hamiltonian(self, N):
        return lambda p: canonical_hamiltonian(N, self.k, p)


def check_np_symmetry(P, N):
    """||N P - P N^T||"""
    n, pc = as_components(N), as_components(P)
    return float(np.linalg.norm(n @ pc - pc @ n.T))


def canonical_hamiltonian(N_field, k, p):
    """I_k = Tr N^k / k"""
    if k < 1:
        raise ValueError(f"Invalid hamiltonian index {k}")
    return float(np.trace(np.linalg.matrix_power(N_field(p), k))) / k


def check_lenart_canonical(N_field, k, p, fd):
    """||N^T grad I_k - grad I_{k+1}||"""
    N_field.expect("endomorphism")
    grad_k = fd_gradient(lambda q: canonical_hamiltonian(N_field, k, q), p, fd)
    grad_next = fd_gradient(lambda q: canonical_hamiltonian(N_field, k + 1, q), p, fd)
    return float(np.linalg.norm(N_field(p).T @ grad_k - grad_next))


def shifted_field(N_field, t):
    """N_t = N + t"""
    N_field.expect("endomorphism")
    if t == 0:
        return N_field
    return TensorField(lambda p: N_field(p) + t * np.eye(N_field(p).shape[0]),
                       "endomorphism", name=f"{N_field.name}+{t:g}")


def _log_abs_det(N_field, t, q):
    sign, logdet = np.linalg.slogdet(N_field(q) + t * np.eye(N_field(q).shape[0]))
    if sign == 0 or logdet < np.log(SINGULAR_DET):
        raise SingularNt(f"det N_t vanishes at t={t} (chart point {q.coords})")
    return logdet


def check_logdet_extension(N_field, t, p, fd):
    """||N_t^T grad log|det N_t| - grad Tr N_t||"""
    N_field.expect("endomorphism")
    # the stencil straddles a zero of det N_t without sampling it
    _log_abs_det(N_field, t, p)
    grad_log = fd_gradient(lambda q: _log_abs_det(N_field, t, q), p, fd)
    grad_trace = fd_gradient(lambda q: float(np.trace(N_field(q))), p, fd)
    nt = N_field(p) + t * np.eye(len(grad_log))
    return float(np.linalg.norm(nt.T @ grad_log - grad_trace))


def poisson_bracket(P, df, dg):
    """{f, g} = P(df, dg), contracted on both orders so that {f, f} = 0 exactly."""
    P, df, dg = as_components(P), np.asarray(df, dtype=float), np.asarray(dg, dtype=float)
    return float(0.5 * (df @ P @ dg - dg @ P @ df))


def koszul_bracket(P, f, g, p, fd):
    """{df, dg}_P = L_{P(df)} dg - L_{P(dg)} df - d<P, df ^ dg>, second derivatives
    on the nested FD configuration. P(a)^i = P^{ji} a_j.
    """
    P.expect("bivector")
    nested = fd.nested()
    alpha = lambda q: fd_gradient(f, q, nested)
    beta = lambda q: fd_gradient(g, q, nested)
    p_alpha = lambda q: P(q).T @ alpha(q)
    p_beta = lambda q: P(q).T @ beta(q)
    pairing = lambda q: alpha(q) @ P(q) @ beta(q)
    return (lie_derivative_covector(p_alpha, beta, p, nested)
            - lie_derivative_covector(p_beta, alpha, p, nested)
            - fd_gradient(pairing, p, nested))


def check_koszul_exchange(P, N, f, g, p, fd):
    """||N^T {df, dg}_P - {N^T df, dg}_P|| for Nijenhuis eigenvalues f, g.
    For such f, N^T df = f df = d(f^2 / 2), so the right side is again exact.
    """
    N.expect("endomorphism")
    lhs = N(p).T @ koszul_bracket(P, f, g, p, fd)
    rhs = koszul_bracket(P, lambda q: 0.5 * f(q) ** 2, g, p, fd)
    return float(np.linalg.norm(lhs - rhs))


def nijenhuis_spectrum(N, tol=CLUSTER_TOL):
    """Distinct eigenvalues of N with (even) multiplicities, ascending.
    Eigenvalues closer than tol (relative) are merged by single-linkage clustering.
    """
    eig = np.linalg.eigvals(as_components(N))
    scale = max(1.0, float(np.max(np.abs(eig))))
    if np.max(np.abs(eig.imag)) > tol * scale:
        raise ComplexSpectrum(f"Eigenvalues with imaginary parts up to {np.max(np.abs(eig.imag)):.3e}")
    values = np.sort(eig.real)
    if len(values) < 2:
        labels = np.zeros(len(values), dtype=int)
    else:
        labels = AgglomerativeClustering(n_clusters=None, distance_threshold=tol * scale,
                                         linkage="single").fit(values.reshape(-1, 1)).labels_
    spectrum = []
    for label in np.unique(labels):
        members = values[labels == label]
        if len(members) % 2:
            raise OddMultiplicity(f"Eigenvalue {members.mean():.9f} has multiplicity {len(members)}")
        spectrum.append((float(members.mean()), int(len(members))))
    return sorted(spectrum)


def check_eigen_equation(lam, N_field, p, fd):
    """||N^T grad lam - lam(p) grad lam||"""
    N_field.expect("endomorphism")
    grad = fd_gradient(lam, p, fd)
    return float(np.linalg.norm(N_field(p).T @ grad - lam(p) * grad))


def hamiltonian_form_residual(lam, N_field, p, fd):
    """(||antisym d grad lam||, ||curl N^T grad lam||) on the nested FD configuration.
    The first is the FD noise floor, the second measures d(N* d lam).
    """
    N_field.expect("endomorphism")
    nested = fd.nested()
    grad = lambda q: fd_gradient(lam, q, nested)
    hess = fd_jacobian(grad, p, nested)
    curl = fd_jacobian(lambda q: N_field(q).T @ grad(q), p, nested)
    return float(np.linalg.norm(hess - hess.T)), float(np.linalg.norm(curl - curl.T))


def vandermonde_checks(values):
    values = np.asarray(values, dtype=float)
    if values.size < 1:
        raise ValueError("vandermonde_checks needs at least one value")
    i, j = np.triu_indices(values.size, k=1)
    det_b = float(np.prod(values[j] - values[i]))
    return det_b, float(np.prod(values)) * det_b
