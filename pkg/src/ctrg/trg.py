"""Levin-Nave tensor renormalization group on the square lattice.

Each step splits every tensor in two with a truncated SVD, along ``(l,u)|(r,d)``
on one sublattice and ``(u,r)|(d,l)`` on the other, then joins the four
three-leg pieces around every second plaquette into a coarse tensor::

      S_dr --c-- S_dl            new legs: l' = SW, u' = NW,
       |a          |e                      r' = NE, d' = SE
      S_ur --b-- S_ul

The coarse lattice is turned by 45 degrees and has half as many tensors, so
two steps turn it by 90 degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import TruncationPolicy
from .errors import CapacityError, NumericError, StateError
from .ising import as_beta, boltzmann_plaquette_tensor
from .tensor import as_tensor, ein, frobenius_norm, svd_split

EXACT_RTOL = 1e-14
MAX_COARSE_ENTRIES = 2**26  # 512 MiB of float64

__all__ = ["TrgState", "init_trg", "trg_step", "logZ_torus_trg", "is_power_of_two"]


@dataclass(frozen=True)
class TrgState:
    tensor: np.ndarray
    count: int
    steps: int = 0
    ledger: tuple[tuple[float, int], ...] = field(default=())
    max_eps: float = 0.0

    @property
    def parity(self) -> int:
        """Quarter turns (mod 2) of the current lattice against the original axes."""
        return (self.steps // 2) % 2

    def log_norm_total(self) -> float:
        return math.fsum(lg * mult for lg, mult in self.ledger)


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def init_trg(a0, count: int) -> TrgState:
    """State for ``count`` copies of ``a0``, normalised once."""
    a0 = as_tensor(a0, "A0")
    n = frobenius_norm(a0)
    return TrgState(tensor=a0 / n, count=count, ledger=((math.log(n), count),))


def _split(t, left, chi_cap, exact=False):
    u, s, vh = svd_split(t, left, t.shape[left[0]] * t.shape[left[1]])
    k = min(chi_cap, s.size)
    if exact:
        # numerical rank only: keeps exact-mode bonds from doubling every step
        k = max(int(np.sum(s > EXACT_RTOL * s[0])), 1)
    eps = math.sqrt(float(np.sum(s[k:] ** 2)))
    root = np.sqrt(s[:k])
    return u[..., :k] * root, root[:, None, None] * vh[:k], eps


def trg_step(state: TrgState, policy: TruncationPolicy) -> TrgState:
    if state.count < 2:
        raise StateError("a single tensor is left; take the trace instead")
    a = state.tensor
    cap = policy.cap(a.shape[0] * a.shape[1])
    if a.size > MAX_COARSE_ENTRIES:
        raise CapacityError(f"tensor of shape {a.shape} exceeds the memory bound")
    s_ul, s_dr, e1 = _split(a, (0, 1), cap, policy.exact)   # [l,u,k], [k,r,d]
    s_ur, s_ld, e2 = _split(a, (1, 2), cap, policy.exact)   # [u,r,k], [k,l,d]
    s_dl = s_ld.transpose(0, 2, 1)            # [k,d,l]
    chi = max(s_ul.shape[2], s_ur.shape[2])
    if chi**4 > MAX_COARSE_ENTRIES:
        raise CapacityError(f"coarse tensor with bond {chi} exceeds the memory bound")
    top = ein("abs,nca->bsnc", s_ur, s_dr)
    bottom = ein("tec,bew->tcbw", s_dl, s_ul)
    t = ein("bsnc,tcbw->sntw", top, bottom)
    n = frobenius_norm(t)
    if not n > 0.0:
        raise NumericError("coarse tensor vanished")
    count = state.count // 2
    return TrgState(
        tensor=t / n,
        count=count,
        steps=state.steps + 1,
        ledger=state.ledger + ((math.log(n), count),),
        max_eps=max(state.max_eps, e1, e2),
    )


def logZ_torus_trg(model, size: int, policy: TruncationPolicy):
    """TRG ln Z of the ``size x size`` Ising torus; returns ``(lnZ, max_eps)``."""
    if not (size >= 2 and is_power_of_two(size)):
        raise ValueError(f"TRG needs a power-of-two lattice size, got {size}")
    return trg_torus_logZ(boltzmann_plaquette_tensor(as_beta(model)), size, policy)


def trg_torus_logZ(a0, size: int, policy: TruncationPolicy):
    state = init_trg(a0, size * size)
    while state.count > 1:
        state = trg_step(state, policy)
    z = float(np.einsum("xyxy->", state.tensor))
    if not z > 0.0:
        raise NumericError(f"final trace is non-positive ({z})")
    return state.log_norm_total() + math.log(z), state.max_eps
