"""Monte Carlo simulation of the prepare-and-measure squeezed-state protocols.

Each round Alice draws a bit ``r`` and a displacement ``a ~ N(0, V - 1/V)``,
prepares ``diag(1/V, V)`` displaced by ``(a, 0)`` and rotates it by
``r pi/2``.  Bob either heterodynes (``b_x`` and ``b_p``) or homodynes a
random quadrature, and after sifting keeps ``b``, his outcome on the
quadrature Alice used.

The joint law of ``(a, b_x, b_p)`` is not written by hand.  It is read off
the entanglement-based state: ``gamma_AB`` with Alice's rotation applied to
Bob's arm, Bob's detector modelled as a beamsplitter ``(T_B, N)`` in front
of ideal homodynes, and ``a = sqrt(V**2 - 1)/V * x_A``.  For heterodyne
detection ``T_B = 1/2`` and ``N = 1``, so the matched outcome is
``b = sqrt(T/2) a + noise`` with noise variance ``(T (1/V + chi_C) + 1)/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import gaussian as gs
from .errors import DomainError, EstimationError, UnsupportedConfigError
from .rates import ChannelModel, Measurement, Preparation, ProtocolConfig, gamma_AB, holevo_bE_closed

MIN_REVEALED = 100
MIN_ROUNDS_FOR_RATE = 1000
CSV_COLUMNS = ("r", "a", "b_x", "b_p", "b")


@dataclass(frozen=True)
class SimRecord:
    r: int
    a: float
    b_x: float
    b_p: float
    b: float


class RecordView:
    """Read-only sequence of :class:`SimRecord` over columnar session data."""

    def __init__(self, result: "SessionResult"):
        self._res = result

    def __len__(self):
        return self._res.n

    def __getitem__(self, i):
        res = self._res
        if not -res.n <= i < res.n:
            raise IndexError(i)
        return SimRecord(int(res.r[i]), float(res.a[i]), float(res.b_x[i]),
                         float(res.b_p[i]), float(res.b[i]))

    def __iter__(self):
        for i in range(self._res.n):
            yield self[i]


@dataclass
class SessionResult:
    """Outcome of :func:`run_session`; unmeasured or discarded values are NaN."""

    config: ProtocolConfig
    channel: ChannelModel
    seed: Optional[int]
    r: np.ndarray
    a: np.ndarray
    b_x: np.ndarray
    b_p: np.ndarray
    b: np.ndarray
    detector: tuple
    T_hat: Optional[float] = None
    chi_C_hat: Optional[float] = None
    I_hat: Optional[float] = None

    @property
    def n(self) -> int:
        return int(self.r.shape[0])

    @property
    def records(self) -> RecordView:
        return RecordView(self)

    def sifted(self) -> tuple:
        """``(a, b)`` for the rounds kept after sifting."""
        keep = ~np.isnan(self.b)
        return self.a[keep], self.b[keep]

    def to_csv(self, path) -> None:
        """Write the records with columns ``r, a, b_x, b_p, b``."""
        data = np.column_stack([self.r, self.a, self.b_x, self.b_p, self.b])
        np.savetxt(path, data, fmt=["%d", "%.12g", "%.12g", "%.12g", "%.12g"], delimiter=",",
                   header=",".join(CSV_COLUMNS), comments="", encoding="utf-8")


def _sampling_factor(cov: np.ndarray) -> np.ndarray:
    # symmetric square root; tolerates the rank-deficient V = 1 case
    w, u = np.linalg.eigh(cov)
    return u * np.sqrt(np.clip(w, 0.0, None))


def outcome_covariances(config: ProtocolConfig, channel: ChannelModel) -> dict:
    """Classical covariance of Alice's ``a`` and Bob's outcomes per setting.

    Keys are ``(r, s)`` with ``s`` the quadrature Bob measures (heterodyne
    uses ``s = None`` and yields a 3x3 matrix over ``(a, b_x, b_p)``;
    homodyne yields 2x2 matrices over ``(a, b_s)``).
    """
    if config.preparation is not Preparation.SQUEEZED:
        raise UnsupportedConfigError("the simulator covers squeezed-state preparation only")
    V = config.V
    k = math.sqrt(V * V - 1.0) / V
    T_B, N = config.detector
    het = config.bob_measurement is Measurement.HETERODYNE
    alice_x = gs.QuadratureSelector(0, gs.Quadrature.X)
    out = {}
    for r in (0, 1):
        g = gamma_AB(V, channel)
        if r:
            # the channel is phase insensitive, so rotating after it is equivalent
            g = gs.apply_phase(g, 1, math.pi / 2)
        state = gs.apply_beamsplitter(gs.direct_sum(g, gs.epr_state(N)), (1, 2), T_B)
        if het:
            cov = gs.outcome_covariance(state, [alice_x, gs.QuadratureSelector(1, gs.Quadrature.X),
                                                gs.QuadratureSelector(2, gs.Quadrature.P)])
            # the second port carries -B: Bob relabels the sign of b_p
            scale = np.diag([k, 1.0, -1.0])
            out[(r, None)] = scale @ cov @ scale
        else:
            for s in (0, 1):
                sel = gs.QuadratureSelector(1, gs.Quadrature(s))
                cov = gs.outcome_covariance(state, [alice_x, sel])
                scale = np.diag([k, 1.0])
                out[(r, s)] = scale @ cov @ scale
    return out


def run_session(n: int, config: ProtocolConfig, channel: ChannelModel, seed: Optional[int] = None,
                reveal_fraction: float = 0.5) -> SessionResult:
    """Simulate ``n`` rounds of quantum communication and sifting.

    Randomness comes from a counter-based Philox generator seeded with
    ``seed``, so equal seeds give identical sessions.  Channel estimates
    and the empirical mutual information are filled in when the session is
    large enough, otherwise left as ``None``.
    """
    if n < 0:
        raise DomainError(f"round count must be >= 0, got {n!r}")
    model = outcome_covariances(config, channel)
    gen = np.random.Generator(np.random.Philox(seed))
    het = config.bob_measurement is Measurement.HETERODYNE

    r = gen.integers(0, 2, size=n, dtype=np.int8)
    s = r.copy() if het else gen.integers(0, 2, size=n, dtype=np.int8)
    z = gen.standard_normal((n, 3))

    a = np.empty(n)
    b_x = np.full(n, np.nan)
    b_p = np.full(n, np.nan)
    for (rr, ss), cov in model.items():
        mask = r == rr if het else (r == rr) & (s == ss)
        dim = cov.shape[0]
        draws = z[mask, :dim] @ _sampling_factor(cov).T
        a[mask] = draws[:, 0]
        if het:
            b_x[mask] = draws[:, 1]
            b_p[mask] = draws[:, 2]
        elif ss == 0:
            b_x[mask] = draws[:, 1]
        else:
            b_p[mask] = draws[:, 1]
    b = np.where(r == 0, b_x, b_p)

    result = SessionResult(config, channel, seed, r, a, b_x, b_p, b, config.detector)
    if n >= MIN_ROUNDS_FOR_RATE:
        try:
            result.T_hat, result.chi_C_hat = estimate_channel(result, reveal_fraction)
            result.I_hat = _plugin_mutual_info(result)
        except EstimationError:
            pass
    return result


def estimate_channel(result: SessionResult, reveal_fraction: float = 0.5) -> tuple:
    """Moment estimates ``(T_hat, chi_C_hat)`` from the revealed sifted pairs.

    The first ``ceil(reveal_fraction * m)`` of the ``m`` sifted pairs are
    disclosed.  A linear regression ``b = g a + noise`` gives
    ``T_hat = g**2 / T_B``, undoing the detector gain (``T_B = 1/2`` for
    heterodyne), and the residual variance
    ``T_B T (1/V + chi_C) + (1 - T_B) N`` gives ``chi_C_hat``.
    """
    if not 0.0 < reveal_fraction <= 1.0:
        raise DomainError(f"reveal_fraction must lie in (0, 1], got {reveal_fraction!r}")
    a, b = result.sifted()
    k = math.ceil(reveal_fraction * a.shape[0])
    if k < MIN_REVEALED:
        raise EstimationError(f"{k} revealed pairs; at least {MIN_REVEALED} needed")
    cov = np.cov(a[:k], b[:k])
    if not cov[0, 0] > 0.0:
        raise EstimationError("Alice's revealed data has zero variance")
    T_B, N = result.detector
    gain = cov[0, 1] / cov[0, 0]
    residual = cov[1, 1] - gain * cov[0, 1]
    T_hat = gain * gain / T_B
    if not T_hat > 0.0:
        raise EstimationError("estimated transmittivity is zero")
    chi_C_hat = (residual - (1.0 - T_B) * N) / (T_B * T_hat) - 1.0 / result.config.V
    return float(T_hat), float(chi_C_hat)


def _plugin_mutual_info(result: SessionResult) -> float:
    a, b = result.sifted()
    if a.shape[0] < 2:
        raise EstimationError("too few sifted pairs")
    cov = np.cov(a, b)
    try:
        return gs.gaussian_mutual_info(cov)
    except DomainError as exc:
        raise EstimationError(f"degenerate sample covariance: {exc}") from exc


def empirical_rate(result: SessionResult, reveal_fraction: float = 0.5) -> tuple:
    """``(I_hat, K_hat)`` from the sampled data.

    ``I_hat`` is the Gaussian plug-in mutual information of the sifted
    ``(a, b)`` pairs.  ``K_hat`` subtracts Eve's Holevo information at the
    estimated channel, with ``T_hat`` capped at 1 and ``chi_C_hat`` raised
    to the pure-loss line when sampling noise pushes it below.
    """
    if result.n < MIN_ROUNDS_FOR_RATE:
        raise EstimationError(f"{result.n} rounds; at least {MIN_ROUNDS_FOR_RATE} needed")
    I_hat = _plugin_mutual_info(result)
    T_hat, chi_hat = estimate_channel(result, reveal_fraction)
    T_hat = min(T_hat, 1.0)
    chi_hat = max(chi_hat, (1.0 - T_hat) / T_hat)
    holevo = holevo_bE_closed(result.config.V, ChannelModel(T_hat, chi_hat), result.config.chi_D)
    return float(I_hat), float(I_hat - holevo)


def marginal_variances(result: SessionResult) -> dict:
    """Variance of each Bob outcome split by Alice's bit, with standard errors.

    Returns ``{(quadrature, r): (variance, standard_error)}`` for
    ``quadrature in ("b_x", "b_p")``.
    """
    out = {}
    for name in ("b_x", "b_p"):
        col = getattr(result, name)
        for r in (0, 1):
            vals = col[(result.r == r) & ~np.isnan(col)]
            m = vals.shape[0]
            if m < 2:
                raise EstimationError(f"too few {name} outcomes with r={r}")
            var = float(np.var(vals, ddof=1))
            out[(name, r)] = (var, var * math.sqrt(2.0 / (m - 1)))
    return out
