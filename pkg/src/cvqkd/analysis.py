"""Root finding, chi_D optimization and loss sweeps over the protocol family.

Protocols are named by preset strings:

* ``"squeezed-homodyne"``, ``"squeezed-heterodyne"`` (alias ``"new"``),
  ``"coherent-homodyne"``, ``"coherent-heterodyne"``;
* ``"optimal"``: squeezed states with Bob's noise ``chi_D`` optimized for
  every channel;
* ``"chiD=<value>"``: squeezed states, homodyne after fixed noise ``chi_D``.

Large-``V`` limits are evaluated numerically by doubling ``V`` from 1e5
until successive values agree (see :func:`large_V_eval`).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

from .errors import CVQKDError, DomainError, NonConvergenceError
from .rates import ChannelModel, ProtocolConfig, Reconciliation, keyrate, transmittance

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0

EPS_TOL = 1e-6
K_TOL = 1e-9
EPS_SEARCH_MAX = 10.0
CHI_D_MAX = 50.0
CHI_D_TOL = 1e-5
CHI_D_GRID = 51
LARGE_V_START = 1e5
LARGE_V_CAP = 1.6e6
LARGE_V_TOL = 1e-3

NO_FINITE_TOLERANCE = math.inf

Protocol = Union[str, ProtocolConfig]


def bisect(f: Callable[[float], float], lo: float, hi: float, xtol: float = EPS_TOL,
           ftol: float = K_TOL) -> float:
    """Zero of ``f`` on ``[lo, hi]`` given a sign change.

    Stops once ``|f(mid)| <= ftol`` or the bracket is narrower than ``xtol``.
    """
    f_lo = f(lo)
    f_hi = f(hi)
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo > 0) == (f_hi > 0):
        raise DomainError(f"root not bracketed: f({lo})={f_lo}, f({hi})={f_hi}")
    while True:
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if abs(f_mid) <= ftol or hi - lo <= xtol:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid


def golden_section_max(f: Callable[[float], float], a: float, b: float,
                       tol: float = CHI_D_TOL) -> tuple:
    """Maximize a unimodal ``f`` on ``[a, b]``; returns ``(argmax, max)``."""
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


# --------------------------------------------------------------------------
# chi_D optimization
# --------------------------------------------------------------------------

def optimize_chi_d(V: float, channel: ChannelModel, upper: float = CHI_D_MAX,
                   tol: float = CHI_D_TOL) -> tuple:
    """Bob's added noise maximizing the RR key rate of squeezed-state protocols.

    A coarse grid on ``[0, upper]`` brackets the maximum, which is then
    refined by golden-section search.  Ties go to the smallest ``chi_D``.

    Returns
    -------
    tuple
        ``(chi_D_opt, K_opt)``.
    """
    base = ProtocolConfig.general(V, 0.0)

    def rate(chi_d):
        return keyrate(base.with_chi_D(chi_d), channel).K

    step = upper / (CHI_D_GRID - 1)
    grid = [i * step for i in range(CHI_D_GRID)]
    values = [rate(c) for c in grid]
    best = max(range(CHI_D_GRID), key=lambda i: (values[i], -i))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, CHI_D_GRID - 1)]
    x, fx = golden_section_max(rate, lo, hi, tol)
    if values[best] >= fx:
        x, fx = grid[best], values[best]
    # with no key at all the supremum sits at chi_D -> inf; the cap is then moot
    if x >= upper - tol and fx > 0.0:
        warnings.warn(f"optimal chi_D hit the search cap {upper}", RuntimeWarning, stacklevel=2)
    return x, fx


# --------------------------------------------------------------------------
# protocol dispatch
# --------------------------------------------------------------------------

def _config_for(protocol: Protocol, V: Optional[float]) -> Optional[ProtocolConfig]:
    if isinstance(protocol, ProtocolConfig):
        return protocol if V is None else protocol.with_V(V)
    if V is None:
        raise DomainError(f"preset {protocol!r} needs a value for V")
    if protocol == "optimal":
        return None
    if protocol.startswith("chiD="):
        return ProtocolConfig.general(V, float(protocol[len("chiD="):]))
    return ProtocolConfig.preset(protocol, V)


def rate_for(protocol: Protocol, channel: ChannelModel, V: Optional[float] = None) -> float:
    """Key rate of a preset name or explicit config (``"optimal"`` optimizes chi_D)."""
    config = _config_for(protocol, V)
    if config is None:
        return optimize_chi_d(V, channel)[1]
    return keyrate(config, channel).K


def tolerable_excess_noise(protocol: Protocol, loss_dB: float, V: Optional[float] = None) -> float:
    """Largest excess noise with a positive key rate at the given loss.

    Returns 0 when no key is possible even without excess noise, and
    ``math.inf`` if the rate is still positive at ``epsilon = 10``.
    """
    T = transmittance(loss_dB)

    def k_of(eps):
        # near the threshold the optimal chi_D runs off to infinity (K -> 0+),
        # so hitting the cap is expected here
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", "optimal chi_D hit the search cap")
            return rate_for(protocol, ChannelModel.from_epsilon(T, eps), V)

    if k_of(0.0) <= 0.0:
        return 0.0
    hi = 0.125
    while k_of(hi) > 0.0:
        if hi >= EPS_SEARCH_MAX:
            return NO_FINITE_TOLERANCE
        hi = min(2.0 * hi, EPS_SEARCH_MAX)
    return bisect(k_of, 0.0, hi)


def large_V_eval(f: Callable[[float], float], tolerance: float = LARGE_V_TOL,
                 V_start: float = LARGE_V_START, V_cap: float = LARGE_V_CAP) -> float:
    """Limit of ``f(V)`` as ``V`` grows, by doubling until the relative change is small."""
    V = V_start
    prev = prev_prev = f(V)
    while V < V_cap:
        V *= 2.0
        cur = f(V)
        if cur == prev or abs(cur - prev) <= tolerance * max(abs(cur), abs(prev)):
            return cur
        prev_prev, prev = prev, cur
    raise NonConvergenceError(
        f"no convergence up to V={V:g}: last values {prev_prev!r}, {prev!r}",
        (prev_prev, prev),
    )


def dr_range_limit(protocol: Protocol = "coherent-homodyne", epsilon: float = 0.0,
                   V: float = LARGE_V_START, loss_max: float = 30.0) -> float:
    """Loss in dB at which the direct-reconciliation key rate reaches zero."""
    config = _config_for(protocol, V)
    if config is None:
        raise DomainError("direct reconciliation is defined for fixed protocols only")
    config = ProtocolConfig(config.preparation, config.bob_measurement, config.V,
                            chi_D=config.chi_D, reconciliation=Reconciliation.DR)

    def k_of(loss):
        return keyrate(config, ChannelModel.from_loss_db(loss, epsilon=epsilon)).K

    return bisect(k_of, 0.0, loss_max, xtol=EPS_TOL)


def crossing_loss(V: float, epsilon: float, chi_a: float = 0.0, chi_b: float = 1.0,
                  loss_lo: float = 0.0, loss_hi: float = 25.0) -> float:
    """Loss in dB where ``K(chi_b) - K(chi_a)`` changes sign."""

    def diff(loss):
        ch = ChannelModel.from_loss_db(loss, epsilon=epsilon)
        return (keyrate(ProtocolConfig.general(V, chi_b), ch).K
                - keyrate(ProtocolConfig.general(V, chi_a), ch).K)

    return bisect(diff, loss_lo, loss_hi, xtol=1e-9, ftol=0.0)


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """A loss sweep.

    With ``tolerance=True`` every point reports the tolerable excess noise
    of each preset instead of its key rate at ``epsilon``.  ``V=None``
    selects the large-``V`` procedure.
    """

    losses: tuple
    presets: tuple = ("squeezed-homodyne", "squeezed-heterodyne", "optimal")
    epsilon: float = 0.5
    V: Optional[float] = 40.0
    tolerance: bool = False

    def __post_init__(self):
        losses = tuple(float(x) for x in self.losses)
        if any(b <= a for a, b in zip(losses, losses[1:])):
            raise DomainError("loss grid must be strictly increasing")
        object.__setattr__(self, "losses", losses)
        object.__setattr__(self, "presets", tuple(self.presets))
        if self.V is not None and not self.V >= 1.0:
            raise DomainError(f"V must be >= 1, got {self.V!r}")
        if not self.tolerance and not self.epsilon >= 0.0:
            raise DomainError(f"epsilon must be >= 0, got {self.epsilon!r}")

    @property
    def large_V(self) -> bool:
        return self.V is None


@dataclass
class CurvePoint:
    loss_dB: float
    T: float
    K: dict = field(default_factory=dict)
    epsilon_max: dict = field(default_factory=dict)
    chi_D_opt: Optional[float] = None
    errors: dict = field(default_factory=dict)


def _with_V(spec: SweepSpec, f: Callable[[float], float]) -> float:
    return large_V_eval(f) if spec.large_V else f(spec.V)


def _sweep_point(spec: SweepSpec, loss: float) -> CurvePoint:
    T = transmittance(loss)
    point = CurvePoint(loss, T)
    for preset in spec.presets:
        try:
            if spec.tolerance:
                point.epsilon_max[preset] = _with_V(
                    spec, lambda V, p=preset: tolerable_excess_noise(p, loss, V))
            elif preset == "optimal":
                ch = ChannelModel.from_epsilon(T, spec.epsilon)
                last = {}

                def k_opt(V, ch=ch, last=last):
                    last["chi"], k = optimize_chi_d(V, ch)
                    return k

                point.K[preset] = _with_V(spec, k_opt)
                point.chi_D_opt = last["chi"]
            else:
                ch = ChannelModel.from_epsilon(T, spec.epsilon)
                point.K[preset] = _with_V(spec, lambda V, p=preset: rate_for(p, ch, V))
        except CVQKDError as exc:
            point.errors[preset] = f"{type(exc).__name__}: {exc}"
    return point


def sweep_curves(spec: SweepSpec) -> list:
    """Evaluate every preset at every loss of ``spec``; errors are recorded per point."""
    return [_sweep_point(spec, loss) for loss in spec.losses]


# figure presets: 2b, 4a and 4b at epsilon = 0.5, V = 40; 2a is the large-V tolerance sweep
def _grid(lo: float, hi: float, step: float) -> tuple:
    n = int(round((hi - lo) / step))
    return tuple(round(lo + i * step, 10) for i in range(n + 1))


FIGURES = {
    "2a": SweepSpec(_grid(0.0, 25.0, 1.0),
                    ("squeezed-heterodyne", "squeezed-homodyne", "coherent-homodyne",
                     "coherent-heterodyne", "optimal"),
                    V=None, tolerance=True),
    "2b": SweepSpec(_grid(0.0, 25.0, 0.5), ("squeezed-homodyne", "squeezed-heterodyne", "optimal"),
                    epsilon=0.5, V=40.0),
    "4a": SweepSpec(_grid(0.0, 25.0, 0.5), ("optimal", "squeezed-homodyne", "squeezed-heterodyne"),
                    epsilon=0.5, V=40.0),
    "4b": SweepSpec(_grid(0.0, 25.0, 0.5), ("optimal",), epsilon=0.5, V=40.0),
}


def figure_spec(name: str, losses: Optional[Sequence[float]] = None) -> SweepSpec:
    try:
        spec = FIGURES[name]
    except KeyError:
        raise DomainError(f"unknown figure {name!r}; choose from {sorted(FIGURES)}") from None
    if losses is not None:
        spec = SweepSpec(tuple(losses), spec.presets, spec.epsilon, spec.V, spec.tolerance)
    return spec
