"""Core-tensor renormalization group on a periodic square lattice.

Lattice picture (one iteration, absorbing below/left)::

      col: -2    -1     0     +1
    row 0   A_h   A_h  C_l/C_r  A_h        <- core row
    row +1  A0    A0    A_v     A0         <- absorbed into the core row
            ^^^^  ^^^^ absorbed column -1 joins the core column

The four tensors at rows {0, +1} x cols {-1, 0} form the network F::

        u_b   u_c
         |     |
    l_c-A_h---C_l            A0 on the forward diagonal is split like A_c:
         |      \\           A0 = D_ul . D_dr, (l, u) | (r, d)
    l_b-D_ul     C_r--r_c
          \\      |
          D_dr---A_v--r_b
           |      |
          d_b    d_c

Every core bond is a pair (core leg, absorbed bulk leg). ``Y_h`` compresses
the horizontal pairs of the core row, ``Y_v`` the vertical pairs of the core
column and ``Y_c`` the diagonal pair joining the upper-left half of F
(``A_h, C_l, D_ul``) to the lower-right half (``C_r, A_v, D_dr``). Isometries
are stored with legs ``(core, bulk, new)``.

Tensor legs: four-leg tensors are ``(left, up, right, down)``; ``C_l`` is
``(left, up, diag)`` and ``C_r`` is ``(diag, right, down)``.

After each step the whole lattice is rotated by 180 degrees, so the next
step (which absorbs from above/right in the original frame) runs the same
below/left code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import NumericError, ShapeError, StateError
from .ising import as_beta, boltzmann_plaquette_tensor
from .tensor import as_tensor, ein, frobenius_norm, svd_split, truncated_eig

__all__ = [
    "CoreState",
    "IsometrySet",
    "TruncationPolicy",
    "TruncationReport",
    "ctrg_step",
    "build_F",
    "build_half_F",
    "compute_isometries",
    "ctrg_iteration",
    "ctrg_logZ",
    "finalize_contract",
    "init_core",
    "logZ_sequence",
    "logZ_torus",
    "network_isometries",
    "observables",
    "thermo_limit_free_energy",
    "ThermoLimitResult",
]

BELOW_LEFT = "below-left"
ABOVE_RIGHT = "above-right"


@dataclass(frozen=True)
class TruncationPolicy:
    chi_max: int = 16
    exact: bool = False

    def __post_init__(self):
        if self.chi_max < 1:
            raise ValueError("chi_max must be >= 1")

    @classmethod
    def exact_mode(cls) -> "TruncationPolicy":
        return cls(chi_max=1, exact=True)

    def cap(self, dim: int) -> int:
        return dim if self.exact else min(self.chi_max, dim)


@dataclass(frozen=True)
class IsometrySet:
    y_h: np.ndarray
    y_v: np.ndarray
    y_c: np.ndarray


@dataclass(frozen=True)
class TruncationReport:
    eps_h: float
    eps_v: float
    eps_c: float
    dims: tuple[int, int, int]
    full_dims: tuple[int, int, int]

    @property
    def max_eps(self) -> float:
        return max(self.eps_h, self.eps_v, self.eps_c)


@dataclass(frozen=True)
class CoreState:
    a0: np.ndarray
    a_v: np.ndarray
    a_h: np.ndarray
    c_l: np.ndarray
    c_r: np.ndarray
    size: int
    side: str = BELOW_LEFT
    ledger: tuple[tuple[float, int], ...] = field(default=())

    def log_norm_total(self) -> float:
        return math.fsum(lg * mult for lg, mult in self.ledger)


# --- geometry helpers -------------------------------------------------------


def _rotate(t):
    """Four-leg tensor turned by 180 degrees."""
    return t.transpose(2, 3, 0, 1)


def _reflect(t):
    """Four-leg tensor mirrored across the forward (/) diagonal."""
    return t.transpose(3, 2, 1, 0)


def _split_diagonal(t, max_rank):
    """``t[l,u,r,d] = sum_k ul[l,u,k] dr[k,r,d]`` with sqrt(s) on both sides.

    The bulk tensor is always split at full rank (``d**2``): truncating it
    would change the half network M that ``Y_c`` compresses, and with it the
    meaning of ``eps_c``.
    """
    u, s, vh = svd_split(t, (0, 1), max_rank)
    root = np.sqrt(s)
    return u * root, root[:, None, None] * vh


def _unit(t, what):
    n = frobenius_norm(t)
    if not n > 0.0:
        raise NumericError(f"{what} vanished during coarse-graining")
    return t / n, math.log(n)


# --- initialisation ---------------------------------------------------------


def init_core(a0, size: int, policy: TruncationPolicy | None = None) -> CoreState:
    """Homogeneous ``size x size`` torus of ``a0`` with one row/column marked as core.

    ``a0`` is divided by its Frobenius norm once, credited to the ledger for
    all ``size**2`` copies. The central tensor is kept as ``C_l . C_r`` from a
    full-rank SVD across ``(left, up) | (right, down)``.
    """
    a0 = as_tensor(a0, "A0")
    if a0.ndim != 4 or len(set(a0.shape)) != 1:
        raise ShapeError(f"A0 must have four legs of equal dimension, got {a0.shape}")
    if size < 2:
        raise ValueError("lattice size must be >= 2")
    a0, log_n = _unit(a0, "A0")
    d = a0.shape[0]
    c_l, c_r = _split_diagonal(a0, d * d)
    return CoreState(
        a0=a0, a_v=a0, a_h=a0, c_l=c_l, c_r=c_r, size=size,
        side=BELOW_LEFT, ledger=((log_n, size * size),),
    )


# --- the F network ----------------------------------------------------------


def _upper(state):
    """``A_h . C_l`` with legs ``(l_c, u_b, down of A_h, u_c, diag)``."""
    return ein("auxz,xbk->auzbk", state.a_h, state.c_l)


def build_F(state: CoreState) -> np.ndarray:
    """Dense F with legs ``(l_c, l_b, u_c, u_b, r_c, r_b, d_c, d_b)``.

    Memory grows as ``chi**4 d**4``; the iteration itself never forms F.
    """
    lower = ein("kcw,pwre->kcpre", state.c_r, state.a_v)
    lower = ein("kcpre,lzpf->kcrelzf", lower, state.a0)
    return ein("auzbk,kcrelzf->albucref", _upper(state), lower)


def build_half_F(state: CoreState) -> np.ndarray:
    """Upper-left half of F (``A_h, C_l, D_ul``), legs ``(k, q, l_c, l_b, u_c, u_b)``.

    ``k`` is the diagonal leg of ``C_l`` and ``q`` that of the split bulk tensor.
    """
    d_ul, _ = _split_diagonal(state.a0, state.a0.shape[0] ** 2)
    return ein("auzbk,lzq->kqalbu", _upper(state), d_ul)


def _isometry(gram, n_rows_core, n_rows_bulk, keep):
    y, w = truncated_eig(gram, keep)
    tail = w[y.shape[1]:]
    # eigenvalues within eigh's backward error of zero carry no weight
    noise = w.size * np.finfo(np.float64).eps * abs(w[0])
    discarded = float(np.sum(tail[np.abs(tail) > noise]))
    eps = math.sqrt(max(discarded, 0.0))
    return y.reshape(n_rows_core, n_rows_bulk, y.shape[1]), eps


def _assemble(grams, shapes, policy):
    (g_h, g_v, g_c), (sh_h, sh_v, sh_c, cols_c) = grams, shapes
    rows = [sh_h[0] * sh_h[1], sh_v[0] * sh_v[1], sh_c[0] * sh_c[1]]
    keep = [policy.cap(rows[0]), policy.cap(rows[1]), min(policy.cap(rows[2]), cols_c)]
    y_h, e_h = _isometry(g_h, *sh_h, keep[0])
    y_v, e_v = _isometry(g_v, *sh_v, keep[1])
    y_c, e_c = _isometry(g_c, *sh_c, keep[2])
    report = TruncationReport(
        eps_h=e_h, eps_v=e_v, eps_c=e_c,
        dims=(y_h.shape[2], y_v.shape[2], y_c.shape[2]),
        full_dims=tuple(rows),
    )
    return IsometrySet(y_h, y_v, y_c), report


def compute_isometries(f, half, policy: TruncationPolicy):
    """Isometries from the dense F and its upper-left half (reference route).

    ``Y_h`` diagonalises ``F F^T`` with F a matrix from its left two legs to
    the rest, ``Y_v`` the same from the bottom two legs, ``Y_c`` the product
    ``M M^T`` of the half network from its diagonal pair. Each error is
    ``||X - Y Y^T X||`` for the corresponding matricisation ``X``.
    """
    f = as_tensor(f, "F")
    half = as_tensor(half, "half of F")
    fh = f.reshape(f.shape[0] * f.shape[1], -1)
    fv = f.transpose(6, 7, 0, 1, 2, 3, 4, 5).reshape(f.shape[6] * f.shape[7], -1)
    mc = half.reshape(half.shape[0] * half.shape[1], -1)
    grams = (fh @ fh.T, fv @ fv.T, mc @ mc.T)
    shapes = (f.shape[0:2], f.shape[6:8], half.shape[0:2], mc.shape[1])
    return _assemble(grams, shapes, policy)


def _halves(state: CoreState):
    """The two big pieces of F, shared by every isometry and the absorption.

    ``up[l_c, u_b, u_c, k, z] = A_h . C_l`` (``z`` is the down leg of
    ``A_h``) and ``low[k, y, r_c, r_b, d_c] = C_r . A_v`` (``y`` is the left
    leg of ``A_v``). Mirroring F across the / diagonal swaps the two.
    """
    up = np.ascontiguousarray(ein("auxz,xbk->aubkz", state.a_h, state.c_l))
    low = np.ascontiguousarray(ein("kaw,ywbc->kyabc", state.c_r, state.a_v))
    return up, low


def _pair_gram(side, env, block: int = 32):
    """``G[(a,l),(A,L)] = sum side[a,u,b,k,z] env[k,z,l,L,K,Z] side[A,u,b,K,Z]``.

    This is the Gram matrix of F over one pair of open legs ``(a, l)`` once
    the rest of F has been folded into ``env``. O(chi^4 d^5), done a block of
    ``a`` rows at a time to bound memory; layouts keep a bond-sized axis
    innermost so the transposes stay cheap.
    """
    na, nu, nb, nk, nz = side.shape
    nl = env.shape[2]
    e = np.ascontiguousarray(env).reshape(nk * nz, -1)
    sm = side.reshape(na, -1)
    g = np.empty((na, nl, nl, na))
    for start in range(0, na, block):
        blk = side[start:start + block]
        x = (blk.reshape(-1, nk * nz) @ e).reshape(blk.shape[0], nu, nb, nl, nl, nk, nz)
        x = x.transpose(0, 3, 4, 1, 2, 5, 6).reshape(blk.shape[0] * nl * nl, -1)
        g[start:start + block] = (x @ sm.T).reshape(blk.shape[0], nl, nl, na)
    return g.transpose(0, 1, 3, 2).reshape(na * nl, na * nl)


def _self_contract(t, n_keep):
    """``sum t[i, rest] t[j, rest]`` over all but the leading ``n_keep`` axes."""
    rows = int(np.prod(t.shape[:n_keep]))
    m = t.reshape(rows, -1)
    return (m @ m.T).reshape(t.shape[:n_keep] * 2)


def _network_grams(state: CoreState, policy: TruncationPolicy, halves):
    """Gram matrices of F over its left pair, bottom pair and diagonal pair.

    F is ``up[a,u,b,k,z] low[k,y,r,s,c] A0[l,z,y,e]`` with open legs
    ``(a, l)`` left, ``(b, u)`` top, ``(r, s)`` right, ``(c, e)`` bottom.
    """
    up, low = halves
    a0 = state.a0
    # lower part folded over (r, s, c) and upper part over (a, u, b)
    env_low = _self_contract(low, 2)                                  # k y K Y
    env_up = _self_contract(up.transpose(3, 4, 0, 1, 2).copy(), 2)   # k z K Z
    e_h = ein("kyKY,yYlzLZ->kzlLKZ", env_low, ein("lzye,LZYe->yYlzLZ", a0, a0))
    g_h = _pair_gram(up, e_h)
    e_v = ein("kzKZ,zZyeYE->kyeEKY", env_up, ein("lzye,lZYE->zZyeYE", a0, a0))
    g_v = _pair_gram(np.ascontiguousarray(low.transpose(4, 2, 3, 0, 1)), e_v)
    d_ul, _ = _split_diagonal(a0, a0.shape[0] ** 2)
    g_c = ein("kzKZ,zqZQ->kqKQ", env_up, ein("lzq,lZQ->zqZQ", d_ul, d_ul))
    n_c = g_c.shape[0] * g_c.shape[1]
    cols_c = up.shape[0] * d_ul.shape[0] * up.shape[2] * up.shape[1]
    return (g_h, g_v, g_c.reshape(n_c, n_c)), (g_c.shape[0], g_c.shape[1]), cols_c


def network_isometries(state: CoreState, policy: TruncationPolicy, halves=None):
    """Same isometries as :func:`compute_isometries`, built at O(chi^4) cost."""
    halves = halves if halves is not None else _halves(state)
    grams, sh_c, cols_c = _network_grams(state, policy, halves)
    shapes = (
        (state.a_h.shape[0], state.a0.shape[0]),
        (state.a_v.shape[3], state.a0.shape[3]),
        sh_c,
        cols_c,
    )
    return _assemble(grams, shapes, policy)


# --- one iteration ----------------------------------------------------------


def _absorb(state: CoreState, iso: IsometrySet, policy: TruncationPolicy, halves=None):
    """New core tensors for the below/left absorption, in the current frame."""
    y_h, y_v, y_c = iso.y_h, iso.y_v, iso.y_c
    a0 = state.a0
    d_ul, d_dr = _split_diagonal(a0, a0.shape[0] ** 2)

    t = ein("aurx,bxsd->aurbsd", state.a_h, a0)
    t = ein("aurbsd,abL->ursdL", t, y_h)
    a_h = ein("ursdL,rsR->LuRd", t, y_h)

    t = ein("ycrz,lbye->crzlbe", state.a_v, a0)
    t = ein("crzlbe,cbU->rzleU", t, y_v)
    a_v = ein("rzleU,zeD->lUrD", t, y_v)

    # isometries go on before the bulk pieces so nothing exceeds O(chi^4 d^2)
    up, low = halves if halves is not None else _halves(state)
    t = ein("aubkz,buU->akzU", up, y_v)
    t = ein("akzU,lzkn->aUln", t, ein("lzq,kqn->lzkn", d_ul, y_c))
    c_l = ein("aUln,alL->LUn", t, y_h)

    t = ein("kpabc,abR->kpcR", low, y_h)
    t = ein("kpcR,ceD->kpReD", t, y_v)
    c_r = ein("kpReD,pekn->nRD", t, ein("qpe,kqn->pekn", d_dr, y_c))
    return a_h, a_v, c_l, c_r


def ctrg_step(state: CoreState, policy: TruncationPolicy):
    """One iteration; returns ``(new_state, isometries, report)``."""
    if state.size < 3:
        raise StateError(
            f"lattice size {state.size} has no bulk row left; call finalize_contract"
        )
    halves = _halves(state)
    iso, report = network_isometries(state, policy, halves)
    a_h, a_v, c_l, c_r = _absorb(state, iso, policy, halves)
    m = state.size - 1
    a_h, lh = _unit(a_h, "A_h")
    a_v, lv = _unit(a_v, "A_v")
    c_l, ll = _unit(c_l, "C_l")
    c_r, lr = _unit(c_r, "C_r")
    ledger = state.ledger + ((lh, m - 1), (lv, m - 1), (ll, 1), (lr, 1))
    # turn the lattice so the next absorption (above/right) is again below/left
    new = CoreState(
        a0=_rotate(state.a0),
        a_v=_rotate(a_v),
        a_h=_rotate(a_h),
        c_l=c_r.transpose(1, 2, 0),
        c_r=c_l.transpose(2, 0, 1),
        size=m,
        side=ABOVE_RIGHT if state.side == BELOW_LEFT else BELOW_LEFT,
        ledger=ledger,
    )
    return new, iso, report


def ctrg_iteration(state: CoreState, policy: TruncationPolicy):
    """Absorb one bulk row and column into the core: ``m -> m - 1``."""
    new, _, report = ctrg_step(state, policy)
    return new, report


def finalize_contract(state: CoreState) -> float:
    """ln of the exact contraction of the remaining 2x2 torus."""
    if state.size != 2:
        raise StateError(f"finalize needs lattice size 2, got {state.size}")
    x = ein("cfag,ighf->caih", state.a_h, state.a0)
    x = ein("kce,caih->keaih", state.c_r, x)
    x = ein("keaih,heib->kab", x, state.a_v)
    z = float(ein("abk,kab->", state.c_l, x))
    if not z > 0.0:
        raise NumericError(f"final contraction is non-positive ({z}); check leg wiring")
    return math.log(z)


# --- drivers ----------------------------------------------------------------


def ctrg_logZ(a0, size: int, policy: TruncationPolicy):
    """ln Z of a ``size x size`` torus of ``a0``; returns ``(lnZ, max_eps)``."""
    state = init_core(a0, size, policy)
    max_eps = 0.0
    while state.size > 2:
        state, report = ctrg_iteration(state, policy)
        max_eps = max(max_eps, report.max_eps)
    return state.log_norm_total() + finalize_contract(state), max_eps


def logZ_torus(model, size: int, policy: TruncationPolicy):
    """CTRG ln Z of the Ising torus with ``size x size`` plaquette tensors."""
    return ctrg_logZ(boltzmann_plaquette_tensor(as_beta(model)), size, policy)


def logZ_sequence(a0, max_size: int, policy: TruncationPolicy):
    """Yield ``(L, lnZ, max_eps)`` for ``L = 2 .. max_size`` in one pass.

    The core tensors after ``z`` iterations do not depend on the starting
    size; only the ledger multiplicities do. A size-``L`` torus therefore
    reads off the state after ``L - 2`` iterations, with the ledger
    re-weighted for that ``L``.
    """
    state = init_core(a0, max_size, policy)
    log_a0 = state.ledger[0][0]
    s1 = s2 = s3 = 0.0  # sum(h+v), sum(j*(h+v)), sum(C_l + C_r) over steps j
    max_eps = 0.0
    z = 0
    while True:
        size = z + 2
        ln_z = size * size * log_a0 + (size - 1) * s1 - s2 + s3
        yield size, ln_z + finalize_contract(replace(state, size=2)), max_eps
        if size >= max_size:
            return
        state, report = ctrg_iteration(state, policy)
        z += 1
        max_eps = max(max_eps, report.max_eps)
        (lh, _), (lv, _), (ll, _), (lr, _) = state.ledger[-4:]
        s1 += lh + lv
        s2 += z * (lh + lv)
        s3 += ll + lr


def observables(free_energy, temperature: float, rel_step: float = 1e-3):
    """``(f, u)`` at ``temperature`` from a free-energy-per-spin callable.

    ``u = d(beta f)/d(beta)`` by a central difference with
    ``d(beta) = rel_step * beta``; ``free_energy`` is called at the two
    shifted temperatures and at ``temperature`` itself.
    """
    beta = 1.0 / temperature
    db = rel_step * beta
    bp, bm = beta + db, beta - db
    f_plus = free_energy(1.0 / bp)
    f_minus = free_energy(1.0 / bm)
    u = (bp * f_plus - bm * f_minus) / (2.0 * db)
    return free_energy(temperature), u


@dataclass(frozen=True)
class ThermoLimitResult:
    free_energy: float
    size: int
    steps: int
    max_eps: float
    converged: bool


def thermo_limit_free_energy(beta: float, policy: TruncationPolicy, tol: float = 1e-8,
                             max_size: int = 512) -> ThermoLimitResult:
    """Free energy per spin of the infinite lattice by growing the torus.

    Uses the free energy of the spins added between sizes ``L - 1`` and
    ``L``, ``-T (lnZ(L) - lnZ(L-1)) / (2L**2 - 2(L-1)**2)``. Size-independent
    terms of ln Z (the ``ln 2`` of the two ordered states, for one) cancel in
    the difference, so this converges far faster than ``-T lnZ / N``. Stops
    when two successive estimates differ by less than ``tol`` (absolute), or
    at ``max_size``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_size < 3:
        raise ValueError("max_size must be >= 3")
    a0 = boltzmann_plaquette_tensor(beta)
    prev_lnz = prev_f = None
    f = math.nan
    for size, ln_z, max_eps in logZ_sequence(a0, max_size, policy):
        if prev_lnz is not None:
            f = -(ln_z - prev_lnz) / (beta * (4 * size - 2))
            if prev_f is not None and abs(f - prev_f) < tol:
                return ThermoLimitResult(f, size, size - 2, max_eps, True)
            prev_f = f
        prev_lnz = ln_z
    return ThermoLimitResult(f, max_size, max_size - 2, max_eps, False)
