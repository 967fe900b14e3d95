"""Square-lattice Ising model: plaquette tensor network and exact oracles.

Conventions
-----------
Coupling ``J = 1``, ferromagnetic: ``H = -sum_<ij> s_i s_j`` and each bond
carries weight ``exp(+s_i s_j / T)``. Tensor index 0 is spin ``+1`` and
index 1 is spin ``-1``.

Plaquette tensors sit on every second plaquette of the spin lattice. Each
tensor leg *is* a spin: the spin at a corner shared by two neighbouring
tensors. With legs ordered ``(left, up, right, down)`` the four corners of a
plaquette are visited cyclically, so::

        u
        |           A[l,u,r,d] = exp((l*u + u*r + r*d + d*l) / T)
    l --A-- r
        |
        d

An ``L x L`` periodic grid of these tensors therefore represents a spin
torus with ``N = 2 L**2`` spins (one per tensor bond) and ``4 L**2`` Ising
bonds (four per tensor).
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import CapacityError, NumericError
from .tensor import torus_log_contraction

__all__ = [
    "T_CRITICAL",
    "LatticeSpec",
    "as_beta",
    "ModelSpec",
    "boltzmann_plaquette_tensor",
    "brute_force_logZ",
    "network_logZ",
    "onsager_free_energy_density",
    "onsager_internal_energy_density",
    "spin_torus_bonds",
    "strip_free_energy_exact",
    "tensor_torus_bonds",
    "transfer_matrix_logZ",
]

T_CRITICAL = 2.0 / math.log(1.0 + math.sqrt(2.0))

MAX_ENUMERATED_SPINS = 26
QUAD_TOL = 1e-12

_SPIN = np.array([1.0, -1.0])


@dataclass(frozen=True)
class ModelSpec:
    temperature: float
    boundary: str = "torus"

    def __post_init__(self):
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError(f"temperature must be positive and finite, got {self.temperature}")
        if self.boundary not in ("torus", "open-strip"):
            raise ValueError(f"unknown boundary {self.boundary!r}")

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature


@dataclass(frozen=True)
class LatticeSpec:
    """``size`` tensors per row and column of a periodic plaquette network."""

    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("lattice size must be >= 1")

    @property
    def n_spins(self) -> int:
        return 2 * self.size * self.size


def as_beta(model) -> float:
    """Inverse temperature of a :class:`ModelSpec` or a bare float ``beta``."""
    if isinstance(model, ModelSpec):
        return model.beta
    return float(model)


def boltzmann_plaquette_tensor(beta: float) -> np.ndarray:
    """Rank-4 plaquette tensor (dims 2x2x2x2) at inverse temperature ``beta``.

    Accepts a :class:`ModelSpec` as well; ``beta = 0`` gives the all-ones tensor.
    """
    beta = as_beta(beta)
    s = _SPIN
    l, u, r, d = np.meshgrid(s, s, s, s, indexing="ij")
    return np.exp(beta * (l * u + u * r + r * d + d * l))


# --- lattice geometry -------------------------------------------------------


def tensor_torus_bonds(size: int) -> tuple[int, np.ndarray]:
    """Spin count and Ising bond list of the spin lattice under an LxL tensor torus.

    Spins are numbered as the horizontal tensor bonds ``h[r, c]`` (right leg
    of tensor ``(r, c)``) followed by the vertical bonds ``v[r, c]`` (down leg
    of tensor ``(r, c)``).
    """
    n = size

    def h(r, c):
        return (r % n) * n + (c % n)

    def v(r, c):
        return n * n + (r % n) * n + (c % n)

    bonds = []
    for r in range(n):
        for c in range(n):
            left, up, right, down = h(r, c - 1), v(r - 1, c), h(r, c), v(r, c)
            bonds += [(left, up), (up, right), (right, down), (down, left)]
    return 2 * n * n, np.array(bonds, dtype=np.int64)


def spin_torus_bonds(nx: int, ny: int) -> tuple[int, np.ndarray]:
    """Ordinary ``nx x ny`` periodic spin lattice (each site bonds right and down)."""
    bonds = []
    for y in range(ny):
        for x in range(nx):
            i = y * nx + x
            bonds.append((i, y * nx + (x + 1) % nx))
            bonds.append((i, ((y + 1) % ny) * nx + x))
    return nx * ny, np.array(bonds, dtype=np.int64)


# --- exact oracles ----------------------------------------------------------


def brute_force_logZ(beta: float, n_spins: int, bonds) -> float:
    """ln Z by summing ``exp(beta * sum s_i s_j)`` over all ``2**n_spins`` states."""
    if n_spins > MAX_ENUMERATED_SPINS:
        raise CapacityError(
            f"{n_spins} spins exceeds the enumeration bound of {MAX_ENUMERATED_SPINS}"
        )
    bonds = np.asarray(bonds, dtype=np.int64).reshape(-1, 2)
    n_bonds = len(bonds)
    chunk_bits = min(n_spins, 18)
    low = np.arange(2**chunk_bits, dtype=np.int64)
    low_spins = 1 - 2 * ((low[:, None] >> np.arange(chunk_bits)) & 1)
    total = 0.0
    # shift by the largest possible exponent so nothing overflows
    shift = abs(beta) * n_bonds
    for high in range(2 ** (n_spins - chunk_bits)):
        high_bits = 1 - 2 * ((high >> np.arange(n_spins - chunk_bits)) & 1)
        spins = np.empty((low.size, n_spins), dtype=np.int64)
        spins[:, :chunk_bits] = low_spins
        spins[:, chunk_bits:] = high_bits
        bond_sum = np.sum(spins[:, bonds[:, 0]] * spins[:, bonds[:, 1]], axis=1)
        total += float(np.sum(np.exp(beta * bond_sum - shift)))
    return math.log(total) + shift


def _row_transfer_matrix(beta: float, size: int, periodic: bool = True) -> np.ndarray:
    """Row-to-row transfer matrix over the vertical-bond spins of one tensor row.

    For fixed spins ``a`` above and ``b`` below a row, the horizontal spins of
    the row form a chain whose bond ``h[c-1] -- h[c]`` weight is
    ``exp(beta * (h[c-1] + h[c]) * (a[c] + b[c]))``. The chain is a ring when
    ``periodic``; otherwise both end spins are free and summed over.
    """
    states = np.array(list(itertools.product([1, -1], repeat=size)), dtype=np.float64)
    s = states[:, None, :] + states[None, :, :]  # a[c] + b[c]
    x = _SPIN[:, None]
    y = _SPIN[None, :]
    # K[..., c, x, y] = exp(beta * (x + y) * s_c)
    k = np.exp(beta * (x + y)[None, None, None] * s[..., None, None])
    prod = k[:, :, 0]
    for c in range(1, size):
        prod = prod @ k[:, :, c]
    if periodic:
        return np.trace(prod, axis1=-2, axis2=-1)
    return prod.sum(axis=(-2, -1))


def transfer_matrix_logZ(beta: float, size: int) -> float:
    """Exact ln Z of the spin torus under an LxL tensor torus (``size <= 10``).

    The full spin sum is organised row by row: ``Z = tr(T**size)`` with ``T``
    the ``2**size``-dimensional transfer matrix between vertical-bond spin
    rows. Independent of the plaquette tensor.
    """
    if size > 10:
        raise CapacityError("transfer-matrix oracle limited to size <= 10")
    t = _row_transfer_matrix(beta, size)
    w = np.linalg.eigvalsh(t)
    top = w[np.argmax(np.abs(w))]
    return size * math.log(top) + math.log(np.sum((w / top) ** size))


def strip_free_energy_exact(temperature: float, width: int, boundary: str = "open") -> float:
    """Free energy per spin of an infinite strip by dense transfer-matrix diagonalization.

    The strip is ``width`` tensors across (``width <= 10``); ``boundary`` is
    ``"open"`` (free edges, ``2 width + 1`` spins per row) or ``"periodic"``
    (``2 width`` spins per row).
    """
    if boundary not in ("open", "periodic"):
        raise ValueError(f"unknown strip boundary {boundary!r}")
    if not 1 <= width <= 10:
        raise CapacityError("dense strip oracle limited to 1 <= width <= 10")
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    periodic = boundary == "periodic"
    t = _row_transfer_matrix(1.0 / temperature, width, periodic)
    top = float(np.linalg.eigvalsh(t)[-1])
    return -temperature * math.log(top) / (2 * width + (not periodic))


def network_logZ(tensor, size: int) -> float:
    """Exact ln of the contraction of a homogeneous ``size x size`` tensor torus."""
    return torus_log_contraction([[tensor] * size for _ in range(size)])


# --- thermodynamic limit ----------------------------------------------------


def _onsager_parameters(beta: float) -> tuple[float, float]:
    """Modulus ``k`` and complementary modulus ``k1 = 2 tanh(2b)**2 - 1``."""
    c2 = math.cosh(2.0 * beta)
    s2 = math.sinh(2.0 * beta)
    k = 2.0 * s2 / (c2 * c2)
    k1 = 2.0 * math.tanh(2.0 * beta) ** 2 - 1.0
    return k, k1


def _quad(func, a, b, what):
    with warnings.catch_warnings():
        # the achieved error is checked below instead
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, err = integrate.quad(func, a, b, epsabs=1e-14, epsrel=1e-14, limit=400)
    if not err <= QUAD_TOL:
        raise NumericError(f"{what}: quadrature reached only {err:.2e}", value, err)
    return value


def onsager_free_energy_density(temperature: float) -> float:
    """Free energy per spin of the infinite ferromagnetic square-lattice Ising model.

    Uses ``-beta f = ln(2 cosh 2b) + (1/pi) int_0^{pi/2} ln[(1 + sqrt(1 - k^2
    sin^2 t)) / 2] dt`` with ``1 - k^2 sin^2 t`` written as ``cos^2 t + k1^2
    sin^2 t`` to avoid cancellation near the critical point.
    """
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    beta = 1.0 / temperature
    _, k1 = _onsager_parameters(beta)

    def integrand(t):
        root = math.sqrt(math.cos(t) ** 2 + (k1 * math.sin(t)) ** 2)
        return math.log(0.5 * (1.0 + root))

    integral = _quad(integrand, 0.0, 0.5 * math.pi, "free energy")
    minus_beta_f = math.log(2.0 * math.cosh(2.0 * beta)) + integral / math.pi
    return -temperature * minus_beta_f


def onsager_internal_energy_density(temperature: float) -> float:
    """Internal energy per spin, ``-coth(2b) [1 + (2/pi) k1 K(k)]``.

    ``K`` is the complete elliptic integral of the first kind, integrated as
    ``int_0^{pi/2} dt / sqrt(sin^2 t + k1^2 cos^2 t)``. At the critical point
    ``k1 = 0`` and the log-divergent ``K`` is multiplied by zero.
    """
    if not temperature > 0:
        raise ValueError("temperature must be positive")
    beta = 1.0 / temperature
    _, k1 = _onsager_parameters(beta)
    if k1 == 0.0:
        return -1.0 / math.tanh(2.0 * beta)

    def integrand(t):
        return 1.0 / math.sqrt(math.sin(t) ** 2 + (k1 * math.cos(t)) ** 2)

    # the integrand peaks (height 1/|k1|) at t = 0; split there for quad
    width = min(0.5 * math.pi, 50.0 * abs(k1))
    elliptic_k = _quad(integrand, 0.0, width, "elliptic K")
    if width < 0.5 * math.pi:
        elliptic_k += _quad(integrand, width, 0.5 * math.pi, "elliptic K")
    return -(1.0 + 2.0 / math.pi * k1 * elliptic_k) / math.tanh(2.0 * beta)
