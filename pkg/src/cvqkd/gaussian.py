"""Covariance-matrix algebra for zero-mean Gaussian states.

Conventions used throughout the package:

* quadrature ordering ``(x1, p1, x2, p2, ...)``;
* shot-noise units, so the vacuum has covariance matrix ``I``;
* entropies in bits.

Beamsplitter convention: for modes ``(i, j)`` and transmittivity ``t``::

    a_i -> sqrt(t) a_i + sqrt(1 - t) a_j
    a_j -> -sqrt(1 - t) a_i + sqrt(t) a_j

so ``t = 0`` sends mode ``j`` into slot ``i`` and ``-a_i`` into slot ``j``.

Phase rotation by ``theta``: ``x -> x cos(theta) - p sin(theta)``,
``p -> x sin(theta) + p cos(theta)``; ``theta = pi/2`` maps ``(x, p)`` to
``(-p, x)`` and therefore a displacement ``(a, 0)`` to ``(0, a)``.

Heterodyne outcomes are ``((x + x_v)/sqrt(2), (p - p_v)/sqrt(2))`` with an
auxiliary vacuum ``v``, i.e. a balanced split followed by two homodynes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, NumericError

SYMMETRY_TOL = 1e-12
PHYSICAL_TOL = 1e-9
SMALL_X = 1e-12


class Quadrature(enum.Enum):
    X = 0
    P = 1


@dataclass(frozen=True)
class QuadratureSelector:
    """Which quadrature of which mode a homodyne detector measures."""

    mode: int
    quadrature: Quadrature = Quadrature.X

    @property
    def index(self) -> int:
        return 2 * self.mode + self.quadrature.value


@dataclass(frozen=True)
class SymplecticSpectrum:
    """Symplectic eigenvalues in descending order, clamped to be >= 1."""

    values: tuple

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]


def symplectic_form(n: int) -> np.ndarray:
    """Return the 2n x 2n symplectic form for ``(x1, p1, ..., xn, pn)`` ordering."""
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def physical_tol(m: np.ndarray) -> float:
    """Slack below 1 tolerated for symplectic eigenvalues of ``m``.

    Rounding in the entries perturbs the symplectic invariants by roughly
    ``eps * |m|**2``, so strongly squeezed states get a proportionally
    larger allowance; moderate states use the fixed ``1e-9``.
    """
    scale = float(np.max(np.abs(m)))
    return max(PHYSICAL_TOL, 64.0 * np.finfo(float).eps * scale * scale)


def _raw_symplectic_values(m: np.ndarray) -> np.ndarray:
    # L^T (i Omega) L is Hermitian, similar to i Omega g, eigenvalues +-lambda_k
    try:
        chol = np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise DomainError("covariance matrix is not positive definite") from None
    n = m.shape[0] // 2
    h = chol.T @ (1j * symplectic_form(n)) @ chol
    try:
        ev = np.linalg.eigvalsh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"symplectic eigensolver failed: {exc}") from exc
    return np.sort(ev[n:])[::-1]


class CovMatrix:
    """Covariance matrix of an n-mode Gaussian state.

    The matrix is validated on construction: square with even size,
    symmetric, positive definite and physical (no symplectic eigenvalue
    below one by more than :func:`physical_tol`).  Instances are treated as
    immutable.
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix, check: bool = True):
        m = np.array(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
            raise DomainError(f"covariance matrix must be 2n x 2n, got shape {m.shape}")
        if m.shape[0] == 0:
            raise DomainError("covariance matrix must have at least one mode")
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m - m.T)) > SYMMETRY_TOL * scale:
            raise DomainError("covariance matrix is not symmetric")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        self.matrix = m
        if check:
            lam = _raw_symplectic_values(m)
            if lam[-1] < 1.0 - physical_tol(m):
                raise DomainError(
                    f"unphysical covariance matrix: symplectic eigenvalue {lam[-1]!r} < 1"
                )

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    def __repr__(self):
        return f"CovMatrix(n_modes={self.n_modes},\n{self.matrix!r})"

    def block(self, i: int, j: int) -> np.ndarray:
        """2x2 block coupling modes ``i`` and ``j``."""
        return self.matrix[2 * i:2 * i + 2, 2 * j:2 * j + 2]

    def reduce(self, modes: Sequence[int]) -> "CovMatrix":
        """Partial trace: keep only ``modes`` (in the given order)."""
        _check_modes(self, modes)
        idx = _indices(modes)
        return CovMatrix(self.matrix[np.ix_(idx, idx)], check=False)

    def allclose(self, other, atol=1e-12) -> bool:
        return np.allclose(self.matrix, np.asarray(other), rtol=0.0, atol=atol)


def _as_cov(state) -> CovMatrix:
    return state if isinstance(state, CovMatrix) else CovMatrix(state)


def _indices(modes: Iterable[int]) -> list:
    return [k for m in modes for k in (2 * m, 2 * m + 1)]


def _check_modes(state: CovMatrix, modes: Iterable[int]) -> None:
    for m in modes:
        if not 0 <= m < state.n_modes:
            raise DomainError(f"mode index {m} out of range for {state.n_modes} modes")


def _symplectic_congruence(state: CovMatrix, s: np.ndarray, modes: Sequence[int]) -> CovMatrix:
    idx = _indices(modes)
    full = np.eye(state.matrix.shape[0])
    full[np.ix_(idx, idx)] = s
    return CovMatrix(full @ state.matrix @ full.T, check=False)


# --------------------------------------------------------------------------
# entropy
# --------------------------------------------------------------------------

def g_entropy(x: float) -> float:
    """Entropy in bits of a thermal state with mean photon number ``x``.

    ``G(x) = (x+1) log2(x+1) - x log2(x)``, with ``G(0) = 0``.

    >>> g_entropy(1.0)
    2.0
    """
    x = float(x)
    if not x >= 0.0:
        raise DomainError(f"g_entropy requires x >= 0, got {x!r}")
    if x < SMALL_X:
        return 0.0
    # same value as the textbook form, without its cancellation at large x
    return math.log2(1.0 + x) + x * math.log1p(1.0 / x) / math.log(2.0)


# --------------------------------------------------------------------------
# state builders
# --------------------------------------------------------------------------

def epr_state(V: float) -> CovMatrix:
    """Two-mode squeezed vacuum with quadrature variance ``V`` on each arm."""
    if not V >= 1.0:
        raise DomainError(f"EPR variance must be >= 1, got {V!r}")
    c = math.sqrt(V * V - 1.0)
    eye = np.eye(2)
    sz = np.diag([1.0, -1.0])
    return CovMatrix(np.block([[V * eye, c * sz], [c * sz, V * eye]]), check=False)


def thermal_state(N: float) -> CovMatrix:
    if not N >= 1.0:
        raise DomainError(f"thermal variance must be >= 1, got {N!r}")
    return CovMatrix(N * np.eye(2), check=False)


def vacuum() -> CovMatrix:
    return thermal_state(1.0)


def squeezed_state(V: float) -> CovMatrix:
    """Single-mode squeezed vacuum ``diag(1/V, V)`` (x squeezed)."""
    if not V >= 1.0:
        raise DomainError(f"squeezing variance must be >= 1, got {V!r}")
    return CovMatrix(np.diag([1.0 / V, V]), check=False)


def direct_sum(*states: CovMatrix) -> CovMatrix:
    """Tensor product of uncorrelated Gaussian states (block-diagonal sum)."""
    if not states:
        raise DomainError("direct_sum needs at least one state")
    mats = [_as_cov(s).matrix for s in states]
    size = sum(m.shape[0] for m in mats)
    out = np.zeros((size, size))
    k = 0
    for m in mats:
        d = m.shape[0]
        out[k:k + d, k:k + d] = m
        k += d
    return CovMatrix(out, check=False)


# --------------------------------------------------------------------------
# Gaussian unitaries
# --------------------------------------------------------------------------

def apply_beamsplitter(state: CovMatrix, modes: tuple, T_B: float) -> CovMatrix:
    """Mix ``modes = (i, j)`` on a beamsplitter of transmittivity ``T_B``."""
    state = _as_cov(state)
    i, j = modes
    if i == j:
        raise DomainError("beamsplitter needs two distinct modes")
    _check_modes(state, (i, j))
    if not 0.0 <= T_B <= 1.0:
        raise DomainError(f"beamsplitter transmittivity must lie in [0, 1], got {T_B!r}")
    t = math.sqrt(T_B)
    r = math.sqrt(1.0 - T_B)
    eye = np.eye(2)
    s = np.block([[t * eye, r * eye], [-r * eye, t * eye]])
    return _symplectic_congruence(state, s, (i, j))


def apply_phase(state: CovMatrix, mode: int, theta: float) -> CovMatrix:
    state = _as_cov(state)
    _check_modes(state, (mode,))
    c, s = math.cos(theta), math.sin(theta)
    return _symplectic_congruence(state, np.array([[c, -s], [s, c]]), (mode,))


# --------------------------------------------------------------------------
# measurements
# --------------------------------------------------------------------------

_SPLITTER = 134217729.0  # 2**27 + 1


def _two_product(a: np.ndarray, b: np.ndarray) -> tuple:
    # Dekker: a * b == p + e exactly (barring overflow)
    p = a * b
    t = _SPLITTER * a
    a_hi = t - (t - a)
    a_lo = a - a_hi
    t = _SPLITTER * b
    b_hi = t - (t - b)
    b_lo = b - b_hi
    e = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    return p, e


def _downdate(g_a: np.ndarray, col: np.ndarray, pivot: float) -> np.ndarray:
    """``g_a - col col^T / pivot`` without cancellation in the numerator.

    Strongly correlated states (EPR arms with large ``V``) leave conditional
    variances many orders of magnitude below the entries they come from.
    """
    p1, e1 = _two_product(g_a, np.full_like(g_a, pivot))
    p2, e2 = _two_product(col, col.T)
    return ((p1 - p2) + (e1 - e2)) / pivot

def _split(state: CovMatrix, mode: int):
    rest = [m for m in range(state.n_modes) if m != mode]
    ir = _indices(rest)
    im = _indices([mode])
    g = state.matrix
    return g[np.ix_(ir, ir)], g[np.ix_(ir, im)], g[np.ix_(im, im)]


def homodyne_condition(state: CovMatrix, sel: QuadratureSelector,
                       added_noise: float = 0.0) -> CovMatrix:
    """Conditional covariance of the other modes after a homodyne measurement.

    The measured quadrature may carry extra classical Gaussian noise of
    variance ``added_noise``.  The result does not depend on the outcome.

    Parameters
    ----------
    state : CovMatrix
        Joint state, at least two modes.
    sel : QuadratureSelector
        Measured mode and quadrature.
    added_noise : float
        Classical noise variance added to the outcome (shot-noise units).

    Returns
    -------
    CovMatrix
        ``(n-1)``-mode conditional covariance matrix
        ``g_A - s_AB (X g_B X + chi X)^+ s_AB^T``.
    """
    state = _as_cov(state)
    _check_modes(state, (sel.mode,))
    if state.n_modes < 2:
        raise DomainError("conditioning needs at least two modes")
    if not added_noise >= 0.0:
        raise DomainError(f"added noise must be >= 0, got {added_noise!r}")
    g_a, s_ab, g_b = _split(state, sel.mode)
    q = sel.quadrature.value
    # pseudoinverse of the rank-1 projected block is 1/(g_qq + chi) on the measured entry
    col = s_ab[:, q:q + 1]
    cond = _downdate(g_a, col, g_b[q, q] + added_noise)
    return CovMatrix(cond)


def heterodyne_condition(state: CovMatrix, mode: int) -> CovMatrix:
    """Conditional covariance of the other modes after heterodyning ``mode``."""
    state = _as_cov(state)
    _check_modes(state, (mode,))
    if state.n_modes < 2:
        raise DomainError("conditioning needs at least two modes")
    g_a, s_ab, g_b = _split(state, mode)
    cond = g_a - s_ab @ np.linalg.solve(g_b + np.eye(2), s_ab.T)
    return CovMatrix(cond)


def outcome_covariance(state: CovMatrix, homodyne: Sequence[QuadratureSelector] = (),
                       heterodyne: Sequence[int] = ()) -> np.ndarray:
    """Classical covariance of measurement outcomes on distinct modes.

    Outcomes are ordered as the homodyne selectors first, then an
    ``(x, p)`` pair for every heterodyned mode.
    """
    state = _as_cov(state)
    modes = [s.mode for s in homodyne] + list(heterodyne)
    if len(set(modes)) != len(modes):
        raise DomainError("each mode may be measured at most once")
    _check_modes(state, modes)
    dim = state.matrix.shape[0]
    rows = []
    noise = []
    for s in homodyne:
        row = np.zeros(dim)
        row[s.index] = 1.0
        rows.append(row)
        noise.append(0.0)
    h = 1.0 / math.sqrt(2.0)
    for m in heterodyne:
        for q in (0, 1):
            row = np.zeros(dim)
            row[2 * m + q] = h
            rows.append(row)
            noise.append(0.5)
    lmap = np.array(rows).reshape(len(rows), dim)
    return lmap @ state.matrix @ lmap.T + np.diag(noise)


# --------------------------------------------------------------------------
# spectra and entropies
# --------------------------------------------------------------------------

def symplectic_eigs_generic(state: CovMatrix) -> SymplecticSpectrum:
    """Symplectic eigenvalues from the spectrum of ``i Omega g``.

    Values within rounding of one (``1e-9`` for moderate states, see
    :func:`physical_tol`) are clamped to one; anything smaller is rejected
    as unphysical.
    """
    state = _as_cov(state)
    lam = _raw_symplectic_values(state.matrix)
    if lam[-1] < 1.0 - physical_tol(state.matrix):
        raise DomainError(f"unphysical state: symplectic eigenvalue {lam[-1]!r} < 1")
    return SymplecticSpectrum(tuple(float(max(v, 1.0)) for v in lam))


def entropy_from_spectrum(values: Iterable[float]) -> float:
    """Sum of ``G((lambda - 1)/2)`` over already validated eigenvalues."""
    return sum(g_entropy(max(v - 1.0, 0.0) / 2.0) for v in values)


def vn_entropy(state: CovMatrix) -> float:
    """Von Neumann entropy in bits, ``sum_k G((lambda_k - 1)/2)``."""
    return entropy_from_spectrum(symplectic_eigs_generic(state))


def gaussian_mutual_info(joint, n_a: int = 1) -> float:
    """Mutual information in bits between two blocks of jointly Gaussian variables.

    ``joint`` is the covariance of ``(a, b)`` with the first ``n_a`` rows
    belonging to ``a``.  For scalars this is ``1/2 log2(var(b)/var(b|a))``.
    """
    c = np.asarray(joint, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or not 0 < n_a < c.shape[0]:
        raise DomainError(f"bad joint covariance shape {c.shape} for n_a={n_a}")
    if not np.allclose(c, c.T, rtol=0.0, atol=SYMMETRY_TOL * max(1.0, np.max(np.abs(c)))):
        raise DomainError("joint covariance is not symmetric")
    try:
        np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        raise DomainError("joint covariance is not positive definite") from None
    _, ld_a = np.linalg.slogdet(c[:n_a, :n_a])
    _, ld_b = np.linalg.slogdet(c[n_a:, n_a:])
    _, ld = np.linalg.slogdet(c)
    return max(0.0, 0.5 * (ld_a + ld_b - ld) / math.log(2.0))
