"""Periodic lattices and short-range pair potentials.

Sites of a ``d``-dimensional periodic lattice (``d`` in 1..3) are enumerated
row-major over the axes, i.e. site index ``i = ravel_multi_index(coords, dims)``
with the last axis fastest.  This enumeration is the one fixed bijection used
everywhere: for the fermionic string order of the ladder operators, for file
exports, and for matching macroscopic profiles to sites.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import ConfigurationError, ResourceLimitError


class Lattice:
    """Finite periodic lattice (torus) in 1, 2 or 3 dimensions.

    Parameters
    ----------
    dims : sequence of int
        Number of sites along each axis.
    spacing : float, optional
        Lattice constant in microscopic units, default 1.0.
    """

    def __init__(self, dims, spacing=1.0):
        dims = tuple(int(n) for n in dims)
        if not 1 <= len(dims) <= 3:
            raise ConfigurationError("lattice dimension must be 1, 2 or 3")
        if any(n < 1 for n in dims):
            raise ConfigurationError("every axis needs at least one site")
        if spacing <= 0:
            raise ConfigurationError("spacing must be positive")
        self.dims = dims
        self.spacing = float(spacing)
        self.ndim = len(dims)
        self.nsites = int(np.prod(dims))

    def __repr__(self):
        return f"Lattice(dims={list(self.dims)}, spacing={self.spacing})"

    def site_index(self, coords):
        """Row-major site index of integer coordinates (periodically wrapped)."""
        coords = tuple(int(c) % n for c, n in zip(coords, self.dims))
        return int(np.ravel_multi_index(coords, self.dims))

    def site_coords(self, index):
        """Integer coordinates of a site index."""
        return tuple(int(c) for c in np.unravel_index(index, self.dims))

    def all_coords(self):
        """Array of shape (nsites, ndim) with the coordinates of every site."""
        grid = np.indices(self.dims).reshape(self.ndim, -1).T
        return grid

    def neighbor(self, index, axis, step=1):
        """Site index reached by moving ``step`` sites along ``axis``."""
        coords = list(self.site_coords(index))
        coords[axis] = (coords[axis] + step) % self.dims[axis]
        return self.site_index(coords)

    def min_image(self, delta):
        """Minimal-image representative of an integer displacement vector."""
        out = []
        for c, n in zip(delta, self.dims):
            c = int(c) % n
            if c > n // 2 or (n % 2 == 0 and c == n // 2):
                c -= n
            out.append(c)
        return tuple(out)

    def displacement(self, i, j):
        """Minimal-image displacement from site j to site i."""
        ci = self.site_coords(i)
        cj = self.site_coords(j)
        return self.min_image(tuple(a - b for a, b in zip(ci, cj)))

    def macroscopic_positions(self, eps):
        """Macroscopic coordinates X = eps * x of every site, shape (nsites, ndim)."""
        return self.all_coords().astype(float) * eps

    def momentum_grid(self):
        """Mode momenta 2 pi m / (M_j s) as representatives in (-pi/s, pi/s].

        Shape (nsites, ndim), enumerated row-major like the sites.
        """
        coords = self.all_coords()
        out = np.zeros(coords.shape, dtype=float)
        for axis, n in enumerate(self.dims):
            m = coords[:, axis].astype(int)
            wrapped = np.where(m > n / 2, m - n, m)  # m = n/2 stays at +pi/s
            out[:, axis] = 2 * np.pi * wrapped / (n * self.spacing)
        return out


def _reflection_orbit(delta):
    """All sign flips of the nonzero components of a displacement."""
    choices = [(c,) if c == 0 else (c, -c) for c in delta]
    return set(itertools.product(*choices))


class PairPotential:
    """Reflection-symmetric two-body potential with finite range.

    ``values`` maps integer displacement vectors to interaction strengths.
    Displacements may be given one-sided; the full reflection orbit (per-axis
    sign flips, hence also W(-r) = W(r)) is filled in automatically.
    Conflicting values inside one orbit raise.

    The range is the largest Euclidean displacement length carrying a nonzero
    value; a larger declared range is kept as given.
    """

    def __init__(self, values=None, rng=None, stability_constant=None):
        values = dict(values or {})
        full = {}
        for delta, w in values.items():
            delta = tuple(int(c) for c in (delta if isinstance(delta, tuple) else (delta,)))
            for image in _reflection_orbit(delta):
                if image in full and not math.isclose(full[image], float(w), abs_tol=1e-15):
                    raise ConfigurationError(
                        f"conflicting values for displacement orbit of {delta}")
                full[image] = float(w)
        self.values = full
        support = [d for d, w in full.items() if w != 0.0 and any(d)]
        self._support_range = max((math.sqrt(sum(c * c for c in d)) for d in support),
                                  default=0.0)
        if rng is None:
            rng = math.ceil(self._support_range)
        if rng < self._support_range - 1e-12:
            raise ConfigurationError(
                f"declared range {rng} smaller than support radius {self._support_range:.3f}")
        self.range = int(rng)
        self._stability = stability_constant

    def __call__(self, delta):
        """W at an integer displacement (0.0 outside the stored support)."""
        delta = tuple(int(c) for c in (delta if isinstance(delta, tuple) else (delta,)))
        return self.values.get(delta, 0.0)

    def is_zero(self):
        return all(w == 0.0 for w in self.values.values())

    @property
    def ndim(self):
        keys = list(self.values)
        return len(keys[0]) if keys else 1

    @classmethod
    def zero(cls, ndim=1):
        return cls({(0,) * ndim: 0.0}, rng=0)

    @classmethod
    def nearest_neighbor(cls, strength, ndim=1):
        """W = strength on the 2d nearest-neighbor displacements."""
        vals = {}
        for axis in range(ndim):
            delta = [0] * ndim
            delta[axis] = 1
            vals[tuple(delta)] = float(strength)
        return cls(vals, rng=1)

    @classmethod
    def from_dict(cls, mapping, rng=None):
        """Parse the JSON form {"1": 0.5} (1D) or {"1,0": 0.5} (2D/3D)."""
        vals = {}
        for key, w in mapping.items():
            delta = tuple(int(p) for p in str(key).split(","))
            vals[delta] = float(w)
        return cls(vals, rng=rng)

    def to_dict(self):
        """Canonical one-sided JSON form (lexicographically nonnegative reps)."""
        out = {}
        for delta, w in sorted(self.values.items()):
            rep = max(delta, tuple(-c for c in delta))
            key = ",".join(str(c) for c in rep)
            out.setdefault(key, w)
        return out

    def pair_list(self, lattice):
        """Interacting ordered-free pair list [(i, j, W_ij)] with i < j.

        Uses minimal-image displacements; requires range < min(dims)/2 so that
        the image is unique and no pair is double counted through the torus.
        """
        if self.range * 2 >= min(lattice.dims) and not self.is_zero():
            raise ConfigurationError(
                f"potential range {self.range} must be below half the smallest "
                f"lattice dimension {min(lattice.dims)}")
        pairs = []
        for i in range(lattice.nsites):
            for j in range(i + 1, lattice.nsites):
                w = self(lattice.displacement(i, j))
                if w != 0.0:
                    pairs.append((i, j, w))
        return pairs

    def stability_constant(self, lattice, max_sites=12):
        """Smallest B >= 0 with sum_{pairs} W >= -B N over all occupations.

        Brute force over the 2^M occupation patterns; the result is cached.
        """
        if self._stability is not None:
            return self._stability
        m = lattice.nsites
        if m > max_sites:
            raise ResourceLimitError(
                f"stability scan over 2^{m} occupation patterns exceeds the "
                f"guard of {max_sites} sites; pass stability_constant= instead")
        energy = interaction_diagonal(lattice, self)
        counts = popcount(np.arange(2 ** m, dtype=np.int64), m)
        mask = counts > 0
        b = np.max(-energy[mask] / counts[mask], initial=0.0)
        self._stability = float(max(b, 0.0))
        return self._stability


def popcount(basis, nbits):
    """Number of set bits for each integer in ``basis``."""
    counts = np.zeros_like(basis)
    for bit in range(nbits):
        counts += (basis >> bit) & 1
    return counts


def interaction_diagonal(lattice, potential):
    """Pair-interaction energy of every occupation pattern.

    Returns the length-2^M vector sum_{i<j} W(x_i - x_j) n_i n_j evaluated on
    each basis bitmask (site x corresponds to bit x).
    """
    m = lattice.nsites
    basis = np.arange(2 ** m, dtype=np.int64)
    diag = np.zeros(2 ** m)
    for i, j, w in potential.pair_list(lattice):
        occ = ((basis >> i) & 1) * ((basis >> j) & 1)
        diag += w * occ
    return diag
