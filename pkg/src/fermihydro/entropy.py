"""Quantum relative entropy and the variational entropy inequality.

All maps here are pure functions of density matrices; the numerical kernel of
a state is defined by an eigenvalue threshold (exact kernels never occur in
floating point).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, DomainError
from .fock import FockOperator
from .gibbs import DensityMatrix

KERNEL_TOL = 1e-12


@dataclass
class EntropyReport:
    """Value of S(gamma|omega), with the kernel verdict and optional density."""

    value: float
    kernel_violation: bool
    density: float | None = None

    def is_finite(self):
        return not self.kernel_violation

    def to_json(self):
        return json.dumps({
            "S": "inf" if self.kernel_violation else self.value,
            "kernel_violation": self.kernel_violation,
            "density": self.density,
        })


def _as_dense(op):
    if isinstance(op, FockOperator):
        return op.toarray()
    if sp.issparse(op):
        return op.toarray()
    return np.asarray(op)


def relative_entropy(gamma, omega, kernel_tol=KERNEL_TOL, eps=None, ndim=None):
    """Relative entropy Tr gamma (log gamma - log omega).

    Returns +infinity (flagged) when gamma puts more than ``kernel_tol``
    weight on the numerical kernel of omega.  The cross term is evaluated in
    omega's eigenbasis,  Tr gamma log omega = sum_j log(w_j) <w_j|gamma|w_j>,
    which equals the joint-eigenbasis double sum over squared overlaps.

    When ``eps`` is given the report carries the entropy density
    eps^ndim * S (ndim defaults to 1).
    """
    if gamma.dim != omega.dim:
        raise ConfigurationError("states live on different spaces")
    g_vals, _ = gamma.eigh()
    w_vals, w_vecs = omega.eigh()
    diag = np.real(np.einsum("ij,ij->j", w_vecs.conj(), gamma.matrix @ w_vecs))
    kernel = w_vals < kernel_tol
    if np.any(kernel) and diag[kernel].sum() > kernel_tol:
        density = math.inf if eps is not None else None
        return EntropyReport(math.inf, True, density)

    g_pos = g_vals[g_vals > kernel_tol]
    ent_gamma = float(np.sum(g_pos * np.log(g_pos)))
    support = ~kernel
    cross = float(np.sum(diag[support] * np.log(w_vals[support])))
    value = ent_gamma - cross
    density = None
    if eps is not None:
        density = value * eps ** (ndim if ndim is not None else 1)
    return EntropyReport(value, False, density)


def entropy_inequality_margin(gamma, omega, h, delta):
    """Margin RHS - LHS of the variational bound

        gamma(h) <= delta^-1 log Tr exp(delta h + log omega)
                    + delta^-1 S(gamma|omega).

    Requires omega strictly positive (the bound needs a trivial kernel) and
    delta > 0.  The margin is nonnegative up to roundoff.
    """
    if delta <= 0:
        raise ConfigurationError("delta must be positive")
    w_vals, w_vecs = omega.eigh()
    if w_vals.min() <= KERNEL_TOL:
        raise DomainError("entropy inequality needs a strictly positive omega")
    h_dense = _as_dense(h)
    log_omega = (w_vecs * np.log(w_vals)) @ w_vecs.conj().T
    a_vals = np.linalg.eigvalsh(delta * h_dense + log_omega)
    amax = a_vals.max()
    log_tr = amax + np.log(np.sum(np.exp(a_vals - amax)))
    s = relative_entropy(gamma, omega).value
    lhs = float(np.real(np.trace(gamma.matrix @ h_dense)))
    return float(log_tr / delta + s / delta - lhs)


def entropy_derivative_check(gamma0, family, hamiltonian, t, dt, inner_dt=None):
    """Residual of the relative-entropy time-derivative identity.

    Compares the centered difference of S(gamma_t | omega_t) in t against

        Tr gamma_t { -i [H, .] - d/dt } log omega_t ,

    where gamma_t solves the Schroedinger-Liouville equation and omega_t is a
    time-indexed local Gibbs family with explicit exponent.  The commutator
    sign follows from i d/dt gamma = [H, gamma] by direct differentiation.
    The time derivative of log omega_t uses centered differences of the
    exponent and of the log normalization.

    Returns (residual, lhs, rhs); the residual is O(dt^2).
    """
    from .dynamics import evolve  # local import to keep module layering acyclic

    if inner_dt is None:
        inner_dt = dt
    result = evolve(gamma0, hamiltonian, [t - dt, t, t + dt])
    g_minus, g_mid, g_plus = result.states

    s_plus = relative_entropy(g_plus, family.state(t + dt)).value
    s_minus = relative_entropy(g_minus, family.state(t - dt)).value
    lhs = (s_plus - s_minus) / (2 * dt)

    log_omega = family.log_state(t)
    d_log_omega = family.d_log_state(t, inner_dt)
    h_mat = hamiltonian.matrix
    comm = h_mat @ log_omega - log_omega @ h_mat
    gamma_mat = g_mid.matrix
    comm_term = float(np.real(-1j * np.sum(gamma_mat.T * comm)))
    drive_term = float(np.real(np.sum(gamma_mat.T * d_log_omega)))
    rhs = comm_term - drive_term
    return abs(lhs - rhs), lhs, rhs


def partial_trace(state, keep_bits, nbits):
    """Reduced density matrix over a subset of site bits.

    ``keep_bits`` lists the site indices to retain; the rest are traced out.
    Used for monotonicity checks on small systems.
    """
    mat = np.asarray(state.matrix if isinstance(state, DensityMatrix) else state)
    full = mat.reshape((2,) * (2 * nbits))
    # tensor legs: axis b corresponds to bit (nbits-1-b) in the integer label
    keep_axes = [nbits - 1 - b for b in sorted(keep_bits, reverse=True)]
    trace_axes = [ax for ax in range(nbits) if ax not in keep_axes]
    for ax in sorted(trace_axes, reverse=True):
        full = np.trace(full, axis1=ax, axis2=ax + full.ndim // 2)
    k = len(keep_bits)
    return DensityMatrix(full.reshape(2 ** k, 2 ** k), validate=False)
