"""Fermion Fock space of a finite periodic lattice.

Basis convention: the Fock space of an M-site lattice is spanned by occupation
bitmasks 0..2^M-1, where bit x (value 2^x) is the occupation of site x in the
row-major site enumeration of :class:`~fermihydro.lattice.Lattice`.  The
fermionic string of the ladder operators runs along the same enumeration, so
all operator matrices are reproducible bit for bit.

Annihilators act as  a_x |n> = (-1)^(number of occupied sites below x) |n - 2^x>
when bit x is set, and as zero otherwise.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, ContractViolationError, ResourceLimitError
from .lattice import Lattice, PairPotential, interaction_diagonal, popcount

DEFAULT_SITE_GUARD = 14

HERMITIAN_TOL = 1e-12


def _dense_memory_estimate(nsites):
    dim = 2 ** nsites
    return dim * dim * 16  # one dense complex matrix


class FockOperator:
    """Sparse operator on the 2^M-dimensional Fock space.

    Thin wrapper that carries the lattice and a hermiticity flag next to the
    matrix.  Arithmetic keeps the flag only when it is provably preserved.
    """

    def __init__(self, matrix, lattice, hermitian=False):
        self.matrix = sp.csr_matrix(matrix)
        self.lattice = lattice
        self.hermitian = bool(hermitian)
        self._eigh_cache = None

    @property
    def dim(self):
        return self.matrix.shape[0]

    def dag(self):
        return FockOperator(self.matrix.conj().T.tocsr(), self.lattice, self.hermitian)

    def toarray(self):
        return self.matrix.toarray()

    def is_hermitian(self, tol=HERMITIAN_TOL):
        diff = (self.matrix - self.matrix.conj().T).tocoo()
        if diff.nnz == 0:
            return True
        return float(np.max(np.abs(diff.data))) <= tol

    def check_hermitian(self, tol=HERMITIAN_TOL):
        if not self.is_hermitian(tol):
            raise ContractViolationError("operator flagged hermitian is not")

    def real_symmetric(self):
        """True when the matrix has no imaginary part (cheap dtype check)."""
        return not np.iscomplexobj(self.matrix.data) or np.all(self.matrix.data.imag == 0)

    def eigh(self):
        """Dense eigendecomposition (cached).  Requires the hermitian flag."""
        if not self.hermitian:
            raise ContractViolationError("eigh requested on non-hermitian operator")
        if self._eigh_cache is None:
            dense = self.toarray()
            if self.real_symmetric():
                dense = dense.real
            vals, vecs = np.linalg.eigh(dense)
            self._eigh_cache = (vals, vecs)
        return self._eigh_cache

    def max_abs(self):
        if self.matrix.nnz == 0:
            return 0.0
        return float(np.max(np.abs(self.matrix.data)))

    def opnorm(self):
        """Operator 2-norm via Lanczos on A^dag A (dense fallback for tiny dims)."""
        if self.matrix.nnz == 0:
            return 0.0
        if self.dim <= 64:
            return float(np.linalg.norm(self.toarray(), 2))
        herm = self.matrix.conj().T @ self.matrix
        val = spla.eigsh(herm, k=1, which="LM", return_eigenvectors=False,
                         tol=1e-12, maxiter=5000)
        return float(np.sqrt(max(val[0], 0.0)))

    def __add__(self, other):
        other_m = other.matrix if isinstance(other, FockOperator) else other
        herm = self.hermitian and getattr(other, "hermitian", False)
        return FockOperator(self.matrix + other_m, self.lattice, herm)

    def __sub__(self, other):
        other_m = other.matrix if isinstance(other, FockOperator) else other
        herm = self.hermitian and getattr(other, "hermitian", False)
        return FockOperator(self.matrix - other_m, self.lattice, herm)

    def __mul__(self, scalar):
        herm = self.hermitian and np.isrealobj(np.asarray(scalar))
        return FockOperator(self.matrix * scalar, self.lattice, herm)

    __rmul__ = __mul__

    def __neg__(self):
        return FockOperator(-self.matrix, self.lattice, self.hermitian)

    def __matmul__(self, other):
        other_m = other.matrix if isinstance(other, FockOperator) else other
        return FockOperator(self.matrix @ other_m, self.lattice, False)

    def expectation(self, dense_state):
        """Tr(state A) for a dense density matrix, returned as a complex number."""
        m = self.matrix.tocoo()
        return complex(np.sum(m.data * dense_state[m.col, m.row]))


def commutator(a, b):
    """[A, B] as a FockOperator."""
    am = a.matrix if isinstance(a, FockOperator) else a
    bm = b.matrix if isinstance(b, FockOperator) else b
    lat = a.lattice if isinstance(a, FockOperator) else b.lattice
    return FockOperator(am @ bm - bm @ am, lat, False)


def build_ladder_operators(lattice, guard_sites=DEFAULT_SITE_GUARD):
    """Annihilation operators a_x for every site, Jordan-Wigner ordered.

    Creation operators are the conjugate transposes.  The anticommutation
    relations  a_x a_y^+ + a_y^+ a_x = delta_xy,  a_x a_y + a_y a_x = 0  hold
    exactly (matrix entries are integers).

    Raises
    ------
    ResourceLimitError
        If the lattice has more than ``guard_sites`` sites.
    """
    m = lattice.nsites
    if m > guard_sites:
        mem = _dense_memory_estimate(m)
        raise ResourceLimitError(
            f"{m} sites exceed the guard of {guard_sites}; a dense operator "
            f"would need ~{mem / 1e9:.1f} GB")
    dim = 2 ** m
    basis = np.arange(dim, dtype=np.int64)
    ops = []
    for x in range(m):
        occupied = (basis >> x) & 1 == 1
        cols = basis[occupied]
        rows = cols - (1 << x)
        lower_mask = (1 << x) - 1
        parity = popcount(cols & lower_mask, m).astype(np.int64)
        signs = np.where(parity % 2 == 0, 1.0, -1.0)
        mat = sp.csr_matrix((signs, (rows, cols)), shape=(dim, dim))
        ops.append(FockOperator(mat, lattice, hermitian=False))
    return ops


def number_operators(lattice, ladder=None):
    """Diagonal site-occupation operators n_x = a_x^+ a_x."""
    m = lattice.nsites
    dim = 2 ** m
    basis = np.arange(dim, dtype=np.int64)
    ops = []
    for x in range(m):
        diag = ((basis >> x) & 1).astype(float)
        ops.append(FockOperator(sp.diags(diag), lattice, hermitian=True))
    return ops


def one_particle_kinetic(lattice):
    """M x M matrix of the kinetic term restricted to one particle.

    Assembled from the directed nearest-neighbor bonds
    (a^+_{x+e} - a^+_x)(a_{x+e} - a_x) / (2 spacing^2); its spectrum is
    eps(k) = sum_j (1 - cos k_j s) / s^2 on the Brillouin grid.
    """
    m = lattice.nsites
    h1 = np.zeros((m, m))
    w = 0.5 / lattice.spacing ** 2
    for x in range(m):
        for axis in range(lattice.ndim):
            y = lattice.neighbor(x, axis, +1)
            if y == x:
                continue
            h1[x, x] += w
            h1[y, y] += w
            h1[x, y] -= w
            h1[y, x] -= w
    return h1


def build_hamiltonian(lattice, potential=None, ladder=None, guard_sites=DEFAULT_SITE_GUARD):
    """Kinetic-plus-pair-interaction Hamiltonian on the Fock space.

    The kinetic part sums the directed-bond hopping form over all sites and
    axes; the interaction applies W at minimal-image displacements,
    sum_{x<y} W(x-y) n_x n_y, which is diagonal in the occupation basis.
    """
    if potential is None:
        potential = PairPotential.zero(lattice.ndim)
    if ladder is None:
        ladder = build_ladder_operators(lattice, guard_sites)
    m = lattice.nsites
    dim = 2 ** m
    w = 0.5 / lattice.spacing ** 2
    h = sp.csr_matrix((dim, dim))
    for x in range(m):
        for axis in range(lattice.ndim):
            y = lattice.neighbor(x, axis, +1)
            if y == x:
                continue
            d_dag = (ladder[y].dag().matrix - ladder[x].dag().matrix)
            d = (ladder[y].matrix - ladder[x].matrix)
            h = h + w * (d_dag @ d)
    if not potential.is_zero():
        diag = interaction_diagonal(lattice, potential)
        h = h + sp.diags(diag)
    return FockOperator(h, lattice, hermitian=True)


class LocalDensitySet:
    """Site-resolved number, momentum and energy density operators.

    ``n[x]`` and ``h[x]`` are hermitian FockOperators; ``p[x][j]`` is the
    j-th momentum component at site x (centered-difference form).  The sums
    over sites reproduce the global operators exactly by construction.
    """

    def __init__(self, n, p, h, lattice):
        self.n = n
        self.p = p
        self.h = h
        self.lattice = lattice

    def total_number(self):
        return _sum_ops(self.n, self.lattice)

    def total_momentum(self, axis):
        return _sum_ops([row[axis] for row in self.p], self.lattice)

    def total_energy(self):
        return _sum_ops(self.h, self.lattice)

    def component(self, mu):
        """List of site operators for conserved index mu in 0..4.

        0 is number, 1..ndim the momentum components, 4 the energy density.
        """
        if mu == 0:
            return self.n
        if mu == 4:
            return self.h
        axis = mu - 1
        if not 0 <= axis < self.lattice.ndim:
            raise ConfigurationError(f"momentum component {mu} undefined in "
                                     f"{self.lattice.ndim}D")
        return [row[axis] for row in self.p]


def _sum_ops(ops, lattice):
    total = ops[0].matrix.copy()
    for op in ops[1:]:
        total = total + op.matrix
    return FockOperator(total, lattice, hermitian=all(o.hermitian for o in ops))


def build_local_densities(lattice, potential=None, ladder=None,
                          guard_sites=DEFAULT_SITE_GUARD):
    """Local conserved densities n_x, p_x^j, h_x.

    Momentum uses the centered difference
        p_x^j = (i/2) [ (D_j a^+)_x a_x - a_x^+ (D_j a)_x ],
    which gives a plane wave exp(i k x) the site expectation +sin(k s)/(s M).
    Energy attributes each kinetic bond half to either endpoint and splits the
    pair interaction evenly, so sum_x h_x equals the Hamiltonian exactly.
    """
    if potential is None:
        potential = PairPotential.zero(lattice.ndim)
    if ladder is None:
        ladder = build_ladder_operators(lattice, guard_sites)
    m = lattice.nsites
    dim = 2 ** m
    s = lattice.spacing
    n_ops = number_operators(lattice)

    p_ops = []
    for x in range(m):
        row = []
        for axis in range(lattice.ndim):
            xp = lattice.neighbor(x, axis, +1)
            xm = lattice.neighbor(x, axis, -1)
            d_dag = (ladder[xp].dag().matrix - ladder[xm].dag().matrix) / (2 * s)
            d = (ladder[xp].matrix - ladder[xm].matrix) / (2 * s)
            mat = 0.5j * (d_dag @ ladder[x].matrix - ladder[x].dag().matrix @ d)
            row.append(FockOperator(mat, lattice, hermitian=True))
        p_ops.append(row)

    bond_w = 0.5 / s ** 2
    kin = [sp.csr_matrix((dim, dim)) for _ in range(m)]
    for x in range(m):
        for axis in range(lattice.ndim):
            y = lattice.neighbor(x, axis, +1)
            if y == x:
                continue
            d_dag = (ladder[y].dag().matrix - ladder[x].dag().matrix)
            d = (ladder[y].matrix - ladder[x].matrix)
            bond = bond_w * (d_dag @ d)
            kin[x] = kin[x] + 0.5 * bond
            kin[y] = kin[y] + 0.5 * bond

    basis = np.arange(dim, dtype=np.int64)
    h_ops = []
    pair_terms = {}
    for i, j, w in potential.pair_list(lattice):
        pair_terms.setdefault(i, []).append((j, w))
        pair_terms.setdefault(j, []).append((i, w))
    for x in range(m):
        mat = kin[x]
        if x in pair_terms:
            diag = np.zeros(dim)
            occ_x = ((basis >> x) & 1).astype(float)
            for y, w in pair_terms[x]:
                occ_y = ((basis >> y) & 1).astype(float)
                diag += 0.5 * w * occ_x * occ_y
            mat = mat + sp.diags(diag)
        h_ops.append(FockOperator(mat, lattice, hermitian=True))

    return LocalDensitySet(n_ops, p_ops, h_ops, lattice)


class FockSystem:
    """Lattice, potential and all second-quantized operators, built once.

    Operator construction is pure and the results are immutable; instances
    are safe to share across threads.
    """

    def __init__(self, lattice, potential=None, guard_sites=DEFAULT_SITE_GUARD):
        if isinstance(lattice, (list, tuple)):
            lattice = Lattice(lattice)
        self.lattice = lattice
        self.potential = potential if potential is not None else PairPotential.zero(lattice.ndim)
        self.guard_sites = guard_sites
        self.ladder = build_ladder_operators(lattice, guard_sites)
        self.densities = build_local_densities(lattice, self.potential, self.ladder,
                                               guard_sites)
        self.H = build_hamiltonian(lattice, self.potential, self.ladder, guard_sites)
        self.N = self.densities.total_number()
        self.P = [self.densities.total_momentum(axis) for axis in range(lattice.ndim)]

    @property
    def dim(self):
        return 2 ** self.lattice.nsites

    def one_particle_kinetic(self):
        return one_particle_kinetic(self.lattice)

    def one_particle_sector(self, op):
        """Restriction of an operator to the single-particle sector (M x M)."""
        idx = [1 << x for x in range(self.lattice.nsites)]
        return op.matrix.toarray()[np.ix_(idx, idx)]

    def conserved_totals(self):
        """Named global conserved operators {N, P1.., H}."""
        out = {"N": self.N}
        for axis in range(self.lattice.ndim):
            out[f"P{axis + 1}"] = self.P[axis]
        out["H"] = self.H
        return out


def partial_sum(densities, mu, region):
    """Sum of u^mu over a set of sites."""
    ops = densities.component(mu)
    return _sum_ops([ops[x] for x in region], densities.lattice)


def commutator_boundary_scan(lattice_sizes, region_sizes=None, mu=0, nu=4,
                             potential=None, guard_sites=12):
    """Norms of commutators between partial-region conserved sums on 1D rings.

    For each ring size M (capped by the guard) and region 0..L-1 the table
    records ||[U^mu, U^nu]|| with U^mu = sum_{x in region} u^mu_x.  A region
    covering the full torus gives zero for exactly conserved pairs; for a
    half ring the norm tracks the boundary (constant in 1D), not the volume.
    """
    records = []
    for idx, m in enumerate(lattice_sizes):
        if m > guard_sites:
            raise ResourceLimitError(f"ring of {m} sites exceeds guard {guard_sites}")
        lattice = Lattice([m])
        dens = build_local_densities(lattice, potential)
        if region_sizes is None:
            length = m // 2
        elif np.isscalar(region_sizes):
            length = int(region_sizes)
        else:
            length = int(region_sizes[idx])
        region = list(range(length))
        u_mu = partial_sum(dens, mu, region)
        u_nu = partial_sum(dens, nu, region)
        comm = commutator(u_mu, u_nu)
        records.append({
            "sites": m,
            "region": length,
            "mu": mu,
            "nu": nu,
            "norm": comm.opnorm(),
        })
    return records


def write_coo(op, path):
    """Export an operator as 'row col re im' text, sorted by (row, col)."""
    coo = op.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# dim {op.dim} sites {op.lattice.nsites}\n")
        for k in order:
            v = complex(coo.data[k])
            fh.write(f"{coo.row[k]} {coo.col[k]} {v.real:.17g} {v.imag:.17g}\n")


def read_coo(path, lattice):
    """Load an operator written by :func:`write_coo`."""
    rows, cols, vals = [], [], []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            r, c, re, im = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(re) + 1j * float(im))
    dim = 2 ** lattice.nsites
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    return FockOperator(mat, lattice)
