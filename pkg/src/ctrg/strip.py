"""Free energy of the Ising model on an infinitely long strip.

The strip is ``width`` plaquette tensors across and infinitely long. Two
closures of the width direction are supported:

* ``open``: the outermost horizontal legs are summed over (all-ones
  vectors), i.e. free edges. A row then holds ``2 * width + 1`` spins.
* ``periodic``: the width direction wraps around (a cylinder). A row holds
  ``2 * width`` spins.

Both methods reduce the strip to a single column of tensors, i.e. a chain,
whose transfer matrix is finished by power iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import TruncationPolicy, ctrg_step, init_core
from .errors import NumericError
from .ising import boltzmann_plaquette_tensor
from .tensor import as_tensor, ein, frobenius_norm, truncated_eig
from .trg import init_trg, is_power_of_two, trg_step

__all__ = [
    "BOUNDARIES",
    "StripSpec",
    "StripResult",
    "power_iteration",
    "strip_free_energy",
    "ctrg_strip",
    "ctrg_cylinder",
    "ctrg_open_strip",
    "trg_strip",
]

BOUNDARIES = ("open", "periodic")
POWER_TOL = 1e-13
POWER_MAX_ITERS = 100_000


@dataclass(frozen=True)
class StripSpec:
    width: int
    temperature: float
    boundary: str = "open"

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("strip width must be >= 1")
        if not (math.isfinite(self.temperature) and self.temperature > 0):
            raise ValueError(f"temperature must be positive and finite, got {self.temperature}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown strip boundary {self.boundary!r}")

    @property
    def beta(self) -> float:
        return 1.0 / self.temperature

    @property
    def spins_per_row(self) -> int:
        return 2 * self.width + (self.boundary == "open")


@dataclass(frozen=True)
class StripResult:
    free_energy: float
    log_lambda: float
    steps: int
    max_eps: float


def power_iteration(m, tol: float = POWER_TOL, max_iters: int = POWER_MAX_ITERS) -> float:
    """Dominant eigenvalue of a square matrix with a dominant positive eigenvalue.

    Starts from the all-ones vector. The matrix is squared (and rescaled)
    after every multiplication, so iteration ``k`` works on ``M**(2**k)``;
    this keeps near-degenerate leading pairs, as in ordered strips, from
    stalling convergence. Converged once the residual ``|P v - lam v| / lam``
    of the unit iterate ``v`` for the current power ``P`` drops below ``tol``;
    the eigenvalue of ``M`` is the ``2**k``-th root of ``lam``, so its
    relative error is smaller still.
    """
    p = as_tensor(m, "transfer matrix")
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {p.shape}")
    v = np.ones(p.shape[0]) / math.sqrt(p.shape[0])
    log_factor = 0.0  # M**(2**k) == exp(log_factor) * p
    lam, residual = math.nan, math.inf
    for k in range(max_iters):
        w = p @ v
        big = float(v @ w)
        if big > 0.0:
            residual = float(np.linalg.norm(w - big * v)) / big
            lam = math.exp((log_factor + math.log(big)) / 2.0**k)
            if residual <= tol:
                return lam
        n = float(np.linalg.norm(w))
        if not n > 0.0:
            raise NumericError("power iteration hit the null space", lam, residual)
        v = w / n
        if k < 60:
            p = p @ p
            c = float(np.max(np.abs(p)))
            if not c > 0.0:
                raise NumericError("matrix power vanished", lam, residual)
            p = p / c
            log_factor = 2.0 * log_factor + math.log(c)
    raise NumericError(
        f"power iteration not converged after {max_iters} iterations", lam, residual
    )


def _chain_log_lambda(t, width_axes):
    """ln of the dominant eigenvalue of a column tensor closed over ``width_axes``."""
    m = np.trace(t, axis1=width_axes[0], axis2=width_axes[1])
    lam = power_iteration(m)
    if not lam > 0.0:
        raise NumericError(f"non-positive dominant eigenvalue {lam}")
    return math.log(lam)


def ctrg_strip(spec: StripSpec, policy: TruncationPolicy) -> StripResult:
    """CTRG strip free energy; see :func:`ctrg_cylinder` and :func:`ctrg_open_strip`."""
    if spec.boundary == "periodic":
        return ctrg_cylinder(spec, policy)
    return ctrg_open_strip(spec, policy)


def ctrg_cylinder(spec: StripSpec, policy: TruncationPolicy) -> StripResult:
    """Periodic-width strip by the full CTRG iteration.

    Each step absorbs one bulk column into the core column and one bulk row
    into the core row. The strip has rows to spare, so only the width
    shrinks; the core row stays as the environment that fixes ``Y_v``. The
    column tensors after ``width - 2`` steps are those of the ``width x
    width`` torus run, and the last bulk column is folded in exactly: the
    chain is one ``A_v`` and one ``A0`` per row, closed around the width.
    The core row is a single row of an infinite strip and drops out of the
    free energy per spin.
    """
    a0 = boltzmann_plaquette_tensor(spec.beta)
    if spec.width == 1:
        n0 = frobenius_norm(a0)
        log_lambda = _chain_log_lambda(a0 / n0, (0, 2))
        f = -spec.temperature * (log_lambda + math.log(n0)) / spec.spins_per_row
        return StripResult(f, log_lambda, 0, 0.0)
    state = init_core(a0, spec.width, policy)
    log_total = spec.width * state.ledger[0][0]
    max_eps = 0.0
    for _ in range(spec.width - 2):
        state, _, report = ctrg_step(state, policy)
        log_total += state.ledger[-3][0]  # A_v, once per row
        max_eps = max(max_eps, report.max_eps)
    chain = ein("xuyd,yvxe->uvde", state.a_v, state.a0)
    s = chain.shape
    log_lambda = math.log(power_iteration(chain.reshape(s[0] * s[1], s[2] * s[3])))
    f = -spec.temperature * (log_lambda + log_total) / spec.spins_per_row
    return StripResult(f, log_lambda, spec.width - 2, max_eps)


def ctrg_open_strip(spec: StripSpec, policy: TruncationPolicy) -> StripResult:
    """Open-width strip by absorbing bulk columns into one core column.

    The core column ``A_v`` (legs ``l, u, r, d``) starts as the left edge
    column, its left leg summed over. Each absorption contracts a bulk
    ``A0`` onto its right leg, giving the column-local network ``F`` with
    vertical leg pairs ``(core, bulk)``. ``Y_v`` is the leading eigenbasis of
    the Gram matrix of ``F``'s bottom pair and is applied to both the top and
    bottom pairs, which are the same bond seen from neighbouring rows.

    Exact when nothing is truncated, but the one-row environment makes a
    poor truncation: at a given ``chi`` this is far less accurate than
    :func:`ctrg_cylinder`.
    """
    a0 = boltzmann_plaquette_tensor(spec.beta)
    n0 = frobenius_norm(a0)
    a = a0 / n0
    log_total = spec.width * math.log(n0)
    core = a.sum(axis=0, keepdims=True)
    max_eps = 0.0
    for _ in range(spec.width - 1):
        f = ein("lupd,pvrw->luvrdw", core, a)
        gram = ein("luvrdw,luvrxy->dwxy", f, f)
        dc, db = f.shape[4], f.shape[5]
        y, w = truncated_eig(gram.reshape(dc * db, dc * db), policy.cap(dc * db))
        kept = y.shape[1]
        max_eps = max(max_eps, math.sqrt(max(float(np.sum(w[kept:])), 0.0)))
        y = y.reshape(dc, db, kept)
        core = ein("uvk,luvrdw->lkrdw", y, f)
        core = ein("lkrdw,dwj->lkrj", core, y)
        n = frobenius_norm(core)
        core = core / n
        log_total += math.log(n)
    log_lambda = _chain_log_lambda(core.sum(axis=2, keepdims=True), (0, 2))
    f = -spec.temperature * (log_lambda + log_total) / spec.spins_per_row
    return StripResult(f, log_lambda, spec.width - 1, max_eps)


def trg_strip(spec: StripSpec, policy: TruncationPolicy) -> StripResult:
    """Strip free energy by TRG-coarsening a ``width x width`` block to one tensor.

    Needs a periodic width that is a power of two. After ``2k`` steps the
    lattice has turned by ``k`` quarter turns, so for odd ``k`` the width
    direction runs along the ``u, d`` legs of the coarse tensor.
    """
    if spec.boundary != "periodic":
        raise ValueError("TRG strips need a periodic width")
    if not is_power_of_two(spec.width):
        raise ValueError(f"TRG strips need a power-of-two width, got {spec.width}")
    state = init_trg(boltzmann_plaquette_tensor(spec.beta), spec.width * spec.width)
    while state.count > 1:
        state = trg_step(state, policy)
    width_axes = (1, 3) if state.parity else (0, 2)
    log_lambda = _chain_log_lambda(state.tensor, width_axes)
    # one coarse row spans `width` original rows
    spins = spec.width * spec.spins_per_row
    f = -spec.temperature * (log_lambda + state.log_norm_total()) / spins
    return StripResult(f, log_lambda, state.steps, state.max_eps)


def strip_free_energy(method: str, spec: StripSpec, policy: TruncationPolicy) -> float:
    """Free energy per spin of the strip by ``"ctrg"`` or ``"trg"``."""
    if method == "ctrg":
        return ctrg_strip(spec, policy).free_energy
    if method == "trg":
        return trg_strip(spec, policy).free_energy
    raise ValueError(f"unknown method {method!r}")
