"""Grand-canonical Gibbs states with a momentum multiplier, and local variants.

The multiplier 5-vector lambda = (l0, l1, l2, l3, l4) pairs with the conserved
densities through the sign convention

    lambda . u = l0 u0 + sum_j lj uj - l4 u4,

so l0 = beta*mu, lj = beta*alpha_j, l4 = beta > 0, and the state exponent is
sum_x lambda(x) . u_x = l0 N + sum_j lj P_j - l4 H for constant multipliers.
"""

from __future__ import annotations

import csv

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, ContractViolationError, DomainError
from .fock import FockOperator, FockSystem

TRACE_TOL = 1e-12
PSD_TOL = 1e-12


class LambdaVec:
    """Constant multiplier vector (l0, l1, l2, l3, l4) with l4 > 0."""

    __slots__ = ("lam0", "lam", "lam4")

    def __init__(self, lam0, lam=(0.0, 0.0, 0.0), lam4=1.0):
        if np.isscalar(lam):
            lam = (lam, 0.0, 0.0)
        lam = tuple(float(x) for x in lam)
        if len(lam) != 3:
            raise ConfigurationError("lambda needs exactly three momentum components")
        if lam4 <= 0:
            raise DomainError("lambda4 (= beta) must be positive")
        self.lam0 = float(lam0)
        self.lam = lam
        self.lam4 = float(lam4)

    @classmethod
    def from_physical(cls, beta, mu, alpha=(0.0, 0.0, 0.0)):
        if np.isscalar(alpha):
            alpha = (alpha, 0.0, 0.0)
        return cls(beta * mu, tuple(beta * a for a in alpha), beta)

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=float)
        return cls(arr[0], tuple(arr[1:4]), arr[4])

    def as_array(self):
        return np.array([self.lam0, *self.lam, self.lam4])

    @property
    def beta(self):
        return self.lam4

    @property
    def mu(self):
        return self.lam0 / self.lam4

    @property
    def alpha(self):
        return tuple(l / self.lam4 for l in self.lam)

    def shifted(self, mu_index, step):
        arr = self.as_array()
        arr[mu_index] += step
        return LambdaVec.from_array(arr)

    def __repr__(self):
        return (f"LambdaVec(lam0={self.lam0:.6g}, lam={tuple(round(l, 6) for l in self.lam)}, "
                f"lam4={self.lam4:.6g})")


class LambdaField:
    """Multiplier 5-vectors sampled at every lattice site.

    ``values`` has shape (nsites, 5); site x carries the field evaluated at
    the macroscopic position X = eps * x on the unit torus.
    """

    def __init__(self, values, lattice, eps):
        values = np.asarray(values, dtype=float)
        if values.shape != (lattice.nsites, 5):
            raise ConfigurationError(
                f"field shape {values.shape} does not match ({lattice.nsites}, 5)")
        if np.any(values[:, 4] <= 0):
            raise DomainError("lambda4 must be positive everywhere")
        self.values = values
        self.lattice = lattice
        self.eps = float(eps)

    @classmethod
    def constant(cls, lam, lattice, eps=None):
        if eps is None:
            eps = 1.0 / max(lattice.dims)
        vals = np.tile(lam.as_array(), (lattice.nsites, 1))
        return cls(vals, lattice, eps)

    @classmethod
    def from_callable(cls, fn, lattice, eps=None):
        """Sample a map X -> LambdaVec (or length-5 array) at X = eps*x."""
        if eps is None:
            eps = 1.0 / max(lattice.dims)
        xs = lattice.macroscopic_positions(eps)
        rows = []
        for pos in xs:
            lam = fn(pos if lattice.ndim > 1 else pos[0])
            rows.append(lam.as_array() if isinstance(lam, LambdaVec) else np.asarray(lam))
        return cls(np.array(rows), lattice, eps)

    @classmethod
    def from_profile(cls, profile, lattice, eps=None):
        """Build from the JSON profile form used in experiment configs.

        ``profile`` maps component names lambda0..lambda4 to
        {"const": c, "modes": [{"m": int or [ints], "cos": a, "sin": b}, ...]}.
        Components left out default to zero (lambda4 must be present).
        """
        if eps is None:
            eps = 1.0 / max(lattice.dims)
        xs = lattice.macroscopic_positions(eps)
        vals = np.zeros((lattice.nsites, 5))
        names = ["lambda0", "lambda1", "lambda2", "lambda3", "lambda4"]
        for idx, name in enumerate(names):
            comp = profile.get(name)
            if comp is None:
                continue
            col = np.full(lattice.nsites, float(comp.get("const", 0.0)))
            for mode in comp.get("modes", ()):
                m = np.atleast_1d(np.asarray(mode["m"], dtype=float))
                phase = 2 * np.pi * (xs[:, :len(m)] @ m)
                col = col + float(mode.get("cos", 0.0)) * np.cos(phase)
                col = col + float(mode.get("sin", 0.0)) * np.sin(phase)
            vals[:, idx] = col
        if "lambda4" not in profile:
            raise ConfigurationError("profile must define lambda4")
        return cls(vals, lattice, eps)

    def site_vec(self, x):
        return LambdaVec.from_array(self.values[x])

    def is_constant(self, tol=0.0):
        return np.all(np.abs(self.values - self.values[0]) <= tol)


class DensityMatrix:
    """Positive semidefinite unit-trace operator on the Fock space."""

    def __init__(self, matrix, validate=True):
        self.matrix = np.asarray(matrix)
        self._eigh_cache = None
        if validate:
            self.validate()

    @property
    def dim(self):
        return self.matrix.shape[0]

    def validate(self, herm_tol=1e-12, psd_tol=PSD_TOL, trace_tol=TRACE_TOL):
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ContractViolationError("density matrix must be square")
        herm_dev = np.max(np.abs(self.matrix - self.matrix.conj().T))
        if herm_dev > herm_tol:
            raise ContractViolationError(f"state not hermitian (dev {herm_dev:.2e})")
        tr = np.trace(self.matrix)
        if abs(tr - 1.0) > trace_tol:
            raise ContractViolationError(f"trace {tr} deviates from 1")
        vals = self.eigenvalues()
        if vals.min() < -psd_tol:
            raise ContractViolationError(f"negative eigenvalue {vals.min():.2e}")
        return self

    def eigh(self):
        if self._eigh_cache is None:
            mat = self.matrix
            if not np.iscomplexobj(mat):
                vals, vecs = np.linalg.eigh(mat)
            else:
                vals, vecs = np.linalg.eigh(mat)
            self._eigh_cache = (vals, vecs)
        return self._eigh_cache

    def eigenvalues(self):
        return self.eigh()[0]

    def is_hermitian(self, tol=1e-12):
        return np.max(np.abs(self.matrix - self.matrix.conj().T)) <= tol

    def trace(self):
        return complex(np.trace(self.matrix)).real

    def purity(self):
        return float(np.real(np.sum(self.matrix * self.matrix.conj().T)))

    def expect(self, op):
        """Tr(rho A) for a FockOperator or sparse/dense matrix."""
        if isinstance(op, FockOperator):
            return op.expectation(self.matrix)
        if sp.issparse(op):
            coo = op.tocoo()
            return complex(np.sum(coo.data * self.matrix[coo.col, coo.row]))
        return complex(np.trace(self.matrix @ op))

    def to_fidelity_with_vector(self, vec):
        return float(np.real(np.vdot(vec, self.matrix @ vec)))


def exponent_operator(lam, system):
    """Sparse exponent sum_x lambda(x) . u_x for constant or field multipliers."""
    dens = system.densities
    ndim = system.lattice.ndim
    if isinstance(lam, LambdaVec):
        mat = lam.lam0 * system.N.matrix - lam.lam4 * system.H.matrix
        for axis in range(ndim):
            if lam.lam[axis] != 0.0:
                mat = mat + lam.lam[axis] * system.P[axis].matrix
        for axis in range(ndim, 3):
            if lam.lam[axis] != 0.0:
                raise ConfigurationError(
                    f"momentum multiplier {axis + 1} undefined on a {ndim}D lattice")
        return FockOperator(mat, system.lattice, hermitian=True)
    vals = lam.values
    dim = 2 ** system.lattice.nsites
    mat = sp.csr_matrix((dim, dim))
    for x in range(system.lattice.nsites):
        site = vals[x, 0] * dens.n[x].matrix - vals[x, 4] * dens.h[x].matrix
        for axis in range(ndim):
            if vals[x, 1 + axis] != 0.0:
                site = site + vals[x, 1 + axis] * dens.p[x][axis].matrix
        mat = mat + site
    return FockOperator(mat, system.lattice, hermitian=True)


def _spectral_state(exponent):
    """exp(K)/Tr exp(K) from the eigendecomposition of K, spectrum-shifted."""
    vals, vecs = exponent.eigh()
    w = np.exp(vals - vals.max())
    w /= w.sum()
    mat = (vecs * w) @ vecs.conj().T
    state = DensityMatrix(mat, validate=False)
    return state, w, vecs


def gibbs_state(lam, system):
    """Finite-volume Gibbs state exp(sum_x lambda.u_x)/Z.

    Accepts a LambdaVec; for spatially varying multipliers see
    :func:`local_gibbs_state`.  The state commutes with its exponent by
    construction (shared eigenbasis).
    """
    exponent = exponent_operator(lam, system)
    state, _, _ = _spectral_state(exponent)
    return state


def local_gibbs_state(field, system):
    """Local Gibbs state for a site-dependent multiplier field.

    Reduces exactly to :func:`gibbs_state` when the field is constant.
    """
    exponent = exponent_operator(field, system)
    state, _, _ = _spectral_state(exponent)
    return state


def log_partition(lam, system):
    """log Tr exp(sum_x lambda.u_x), spectrum-shifted for overflow safety."""
    exponent = exponent_operator(lam, system)
    vals = exponent.eigh()[0]
    vmax = vals.max()
    return float(vmax + np.log(np.sum(np.exp(vals - vmax))))


def pressure_finite(lam, system):
    """Finite-volume pressure |Lambda|^-1 log Z at constant multipliers."""
    return log_partition(lam, system) / system.lattice.nsites


def expectations(state, densities):
    """Site-resolved conserved-density expectations, shape (nsites, 5).

    Columns are (n, p_1..p_3, h) with absent momentum components zero.
    Raises if the state is not hermitian; imaginary residues beyond 1e-12
    are treated as a contract violation as well.
    """
    if not state.is_hermitian():
        raise ContractViolationError("expectations need a hermitian state")
    lattice = densities.lattice
    out = np.zeros((lattice.nsites, 5))
    worst_imag = 0.0
    for x in range(lattice.nsites):
        vals = [densities.n[x].expectation(state.matrix)]
        for axis in range(lattice.ndim):
            vals.append(densities.p[x][axis].expectation(state.matrix))
        for _ in range(lattice.ndim, 3):
            vals.append(0.0)
        vals.append(densities.h[x].expectation(state.matrix))
        vals = np.asarray(vals, dtype=complex)
        worst_imag = max(worst_imag, float(np.max(np.abs(vals.imag))))
        out[x, :] = vals.real
    if worst_imag > 1e-12:
        raise ContractViolationError(
            f"imaginary residue {worst_imag:.2e} in conserved-density expectations")
    return out


def mean_conserved(state, densities):
    """Volume-averaged conserved 5-vector q = <u> (site mean)."""
    return expectations(state, densities).mean(axis=0)


def duality_check(lam, system, fd_step=1e-3, return_components=False):
    """Centered finite differences of the pressure against Gibbs expectations.

    Compares d psi / d lambda^mu with the site-averaged expectation of u^mu
    (sign-flipped for mu = 4).  Returns the worst absolute deviation, or the
    length-5 deviation vector when ``return_components`` is set.
    """
    if not 1e-6 <= fd_step <= 1e-2:
        raise ConfigurationError("fd_step must lie in [1e-6, 1e-2]")
    state = gibbs_state(lam, system)
    q = mean_conserved(state, system.densities)
    target = q.copy()
    target[4] = -q[4]
    devs = np.zeros(5)
    for mu in range(5):
        if 1 <= mu <= 3 and mu > system.lattice.ndim:
            continue  # multiplier structurally absent; both sides vanish
        up = pressure_finite(lam.shifted(mu, fd_step), system)
        dn = pressure_finite(lam.shifted(mu, -fd_step), system)
        devs[mu] = abs((up - dn) / (2 * fd_step) - target[mu])
    if return_components:
        return devs
    return float(devs.max())


class LocalGibbsFamily:
    """Time-indexed local Gibbs states omega_t built from a multiplier field.

    ``field_fn`` maps microscopic time t to a LambdaField; the exponent of
    log omega_t is explicit, which makes d/dt log omega_t computable by
    centered differences of the field plus the normalization.
    """

    def __init__(self, system, field_fn):
        self.system = system
        self.field_fn = field_fn
        self._cache = {}

    def field(self, t):
        return self.field_fn(t)

    def exponent(self, t):
        return exponent_operator(self.field(t), self.system)

    def _entry(self, t):
        key = float(t)
        if key not in self._cache:
            exponent = self.exponent(t)
            vals, vecs = exponent.eigh()
            vmax = vals.max()
            logc = float(vmax + np.log(np.sum(np.exp(vals - vmax))))
            w = np.exp(vals - vmax)
            w /= w.sum()
            state = DensityMatrix((vecs * w) @ vecs.conj().T, validate=False)
            self._cache[key] = (state, exponent, logc)
        return self._cache[key]

    def state(self, t):
        return self._entry(t)[0]

    def log_norm(self, t):
        return self._entry(t)[2]

    def log_state(self, t):
        """Dense log omega_t = K_t - log c(t) I."""
        _, exponent, logc = self._entry(t)
        mat = exponent.toarray()
        if exponent.real_symmetric():
            mat = mat.real
        return mat - logc * np.eye(mat.shape[0])

    def d_log_state(self, t, dt):
        """Centered difference of log omega_t in t."""
        plus = self.log_state(t + dt)
        minus = self.log_state(t - dt)
        return (plus - minus) / (2 * dt)


def export_occupations(state, densities, path):
    """CSV table (site, n, p1..pd, h) of site expectations."""
    table = expectations(state, densities)
    lattice = densities.lattice
    header = ["site", "n"] + [f"p{j + 1}" for j in range(lattice.ndim)] + ["h"]
    cols = [0] + list(range(1, 1 + lattice.ndim)) + [4]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for x in range(lattice.nsites):
            writer.writerow([x] + [f"{table[x, c]:.17g}" for c in cols])


def export_eigenvalues(state, path):
    """Eigenvalue list of a state, ascending, one per line."""
    vals = state.eigenvalues()
    with open(path, "w") as fh:
        fh.write("eigenvalue\n")
        for v in vals:
            fh.write(f"{v:.17g}\n")
