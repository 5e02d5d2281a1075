"""Secret key rates of one-way Gaussian CV-QKD protocols under collective attacks.

All protocols are described by the entanglement-based picture: Alice holds
one arm of an EPR pair of variance ``V``, the other arm crosses a channel
``(T, chi_C)`` and reaches Bob.  Alice homodynes her arm for squeezed-state
preparation and heterodynes it for coherent-state preparation.  Bob's
detector is an ideal homodyne preceded by phase-insensitive noise
``chi_D``; heterodyne detection of a single kept quadrature is the case
``chi_D = 1``.

Two independent evaluation routes are provided:

``method="analytic"``
    Closed forms written with cancellation-free invariants, e.g.
    ``D = xy - z**2 = T (1 + V chi_C)``, so they stay accurate for
    ``V`` up to 1e6 and beyond.
``method="entanglement"``
    Builds the covariance matrices with :mod:`cvqkd.gaussian`, conditions
    on the measurements and takes generic symplectic spectra.  Exact in
    exact arithmetic, but double precision resolves the invariants of a
    variance-``V`` EPR state only to about ``eps * V**2``; use it for
    ``V`` below ~1e3.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import gaussian as gs
from .errors import DomainError, NumericError

DISCRIMINANT_TOL = 1e-9


class Preparation(enum.Enum):
    SQUEEZED = "squeezed"
    COHERENT = "coherent"


class Measurement(enum.Enum):
    HOMODYNE = "homodyne"
    HETERODYNE = "heterodyne"


class Reconciliation(enum.Enum):
    RR = "RR"
    DR = "DR"


def transmittance(loss_dB: float) -> float:
    """Channel transmittivity for a loss given in dB."""
    return 10.0 ** (-loss_dB / 10.0)


def chi_line(T: float, epsilon: float) -> float:
    """Added noise referred to the input for excess noise ``epsilon``."""
    if not 0.0 < T <= 1.0:
        raise DomainError(f"transmittivity must lie in (0, 1], got {T!r}")
    if not epsilon >= 0.0:
        raise DomainError(f"excess noise must be >= 0, got {epsilon!r}")
    return (1.0 - T) / T + epsilon


@dataclass(frozen=True)
class ChannelModel:
    """Phase-insensitive Gaussian channel between Alice and Bob.

    ``chi_C`` is the added noise referred to the channel input in
    shot-noise units; the pure-loss line is ``chi_C = (1 - T)/T``.
    """

    T: float
    chi_C: float

    def __post_init__(self):
        if not 0.0 < self.T <= 1.0:
            raise DomainError(f"transmittivity must lie in (0, 1], got {self.T!r}")
        if not (self.chi_C >= 0.0 and math.isfinite(self.chi_C)):
            raise DomainError(f"chi_C must be finite and >= 0, got {self.chi_C!r}")

    @classmethod
    def from_epsilon(cls, T: float, epsilon: float) -> "ChannelModel":
        return cls(T, chi_line(T, epsilon))

    @classmethod
    def from_loss_db(cls, loss_dB: float, epsilon: Optional[float] = None,
                     chi_C: Optional[float] = None) -> "ChannelModel":
        if (epsilon is None) == (chi_C is None):
            raise DomainError("give exactly one of epsilon and chi_C")
        T = transmittance(loss_dB)
        if epsilon is not None:
            return cls.from_epsilon(T, epsilon)
        return cls(T, chi_C)

    @property
    def epsilon(self) -> float:
        return self.chi_C - (1.0 - self.T) / self.T

    @property
    def loss_dB(self) -> float:
        return -10.0 * math.log10(self.T) + 0.0


PRESETS = {
    "squeezed-homodyne": (Preparation.SQUEEZED, Measurement.HOMODYNE),
    "squeezed-heterodyne": (Preparation.SQUEEZED, Measurement.HETERODYNE),
    "coherent-homodyne": (Preparation.COHERENT, Measurement.HOMODYNE),
    "coherent-heterodyne": (Preparation.COHERENT, Measurement.HETERODYNE),
}
PRESET_ALIASES = {"new": "squeezed-heterodyne"}


@dataclass(frozen=True)
class ProtocolConfig:
    """One Gaussian protocol.

    ``chi_D`` is the noise on Bob's kept quadrature.  It defaults to 1 for
    squeezed states with heterodyne detection (the balanced split) and to
    0 otherwise; coherent-state presets carry no extra noise.  Giving
    ``bob_model = (T_B, N)`` fixes ``chi_D = (1 - T_B) N / T_B``.
    ``switching=True`` models homodyne detection with a random basis
    choice, which halves every reported rate.
    """

    preparation: Preparation = Preparation.SQUEEZED
    bob_measurement: Measurement = Measurement.HOMODYNE
    V: float = 40.0
    chi_D: Optional[float] = None
    reconciliation: Reconciliation = Reconciliation.RR
    bob_model: Optional[tuple] = None
    switching: bool = False

    def __post_init__(self):
        prep = Preparation(self.preparation)
        meas = Measurement(self.bob_measurement)
        rec = Reconciliation(self.reconciliation)
        object.__setattr__(self, "preparation", prep)
        object.__setattr__(self, "bob_measurement", meas)
        object.__setattr__(self, "reconciliation", rec)
        if not (self.V >= 1.0 and math.isfinite(self.V)):
            raise DomainError(f"V must be finite and >= 1, got {self.V!r}")

        chi_d = self.chi_D
        if self.bob_model is not None:
            T_B, N = self.bob_model
            if not 0.0 < T_B <= 1.0 or not N >= 1.0:
                raise DomainError(f"bob_model needs T_B in (0, 1] and N >= 1, got {self.bob_model!r}")
            derived = (1.0 - T_B) * N / T_B
            if chi_d is None:
                chi_d = derived
            elif abs(chi_d - derived) > 1e-12 * max(1.0, derived):
                raise DomainError(f"chi_D={chi_d!r} inconsistent with bob_model (gives {derived!r})")
        if chi_d is None:
            het = prep is Preparation.SQUEEZED and meas is Measurement.HETERODYNE
            chi_d = 1.0 if het else 0.0
        if not (chi_d >= 0.0 and math.isfinite(chi_d)):
            raise DomainError(f"chi_D must be finite and >= 0, got {chi_d!r}")
        if prep is Preparation.SQUEEZED and meas is Measurement.HETERODYNE and chi_d != 1.0:
            raise DomainError("squeezed+heterodyne fixes chi_D = 1; use homodyne with chi_D for other noise levels")
        if prep is Preparation.COHERENT and chi_d != 0.0:
            raise DomainError("coherent-state presets carry no Bob-side added noise")
        object.__setattr__(self, "chi_D", float(chi_d))

    @classmethod
    def preset(cls, name: str, V: float = 40.0, **kwargs) -> "ProtocolConfig":
        key = PRESET_ALIASES.get(name, name)
        try:
            prep, meas = PRESETS[key]
        except KeyError:
            raise DomainError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
        return cls(prep, meas, V, **kwargs)

    @classmethod
    def general(cls, V: float, chi_D: float, **kwargs) -> "ProtocolConfig":
        """Squeezed states, homodyne detection after added noise ``chi_D``."""
        return cls(Preparation.SQUEEZED, Measurement.HOMODYNE, V, chi_D=chi_D, **kwargs)

    @property
    def V_a(self) -> float:
        """Alice's modulation variance, ``V - 1/V``."""
        return self.V - 1.0 / self.V

    @property
    def detector(self) -> tuple:
        """``(T_B, N)`` realizing ``chi_D``; an inefficient detector by default."""
        if self.bob_model is not None:
            return tuple(self.bob_model)
        return 1.0 / (1.0 + self.chi_D), 1.0

    @property
    def name(self) -> str:
        base = f"{self.preparation.value}-{self.bob_measurement.value}"
        if self.preparation is Preparation.SQUEEZED and self.bob_measurement is Measurement.HOMODYNE \
                and self.chi_D != 0.0:
            base += f"(chi_D={self.chi_D:g})"
        return base

    def with_chi_D(self, chi_D: float) -> "ProtocolConfig":
        return replace(self, chi_D=chi_D, bob_model=None)

    def with_V(self, V: float) -> "ProtocolConfig":
        return replace(self, V=V)


@dataclass
class RateReport:
    """Rates in bits per channel use; ``K`` may be negative (no key)."""

    I_ab: float
    holevo: float
    K: float
    reconciliation: Reconciliation = Reconciliation.RR
    chi: Optional[float] = None
    x: Optional[float] = None
    y: Optional[float] = None
    z: Optional[float] = None
    Delta: Optional[float] = None
    D: Optional[float] = None
    A: Optional[float] = None
    B: Optional[float] = None
    lambdas: tuple = field(default_factory=tuple)

    def as_dict(self) -> dict:
        out = {"I_ab": self.I_ab, "holevo": self.holevo, "K": self.K,
               "reconciliation": self.reconciliation.value}
        for k in ("chi", "x", "y", "z", "Delta", "D", "A", "B"):
            v = getattr(self, k)
            if v is not None:
                out[k] = v
        for i, lam in enumerate(self.lambdas, start=1):
            out[f"lambda{i}"] = lam
        return out


# --------------------------------------------------------------------------
# two-mode invariants
# --------------------------------------------------------------------------

def _check_V(V: float) -> None:
    if not (V >= 1.0 and math.isfinite(V)):
        raise DomainError(f"V must be finite and >= 1, got {V!r}")


def _invariants(V: float, channel: ChannelModel) -> dict:
    _check_V(V)
    T, c = channel.T, channel.chi_C
    x = V
    y = T * (V + c)
    z = math.sqrt(T * (V * V - 1.0))
    D = T * (1.0 + V * c)
    Delta = V * V * (1.0 - T) ** 2 + 2.0 * T * T * V * c + T * T * c * c + 2.0 * T
    # Delta^2 - 4 D^2 = (x - y)^2 ((x + y)^2 - 4 z^2)
    plus = V * V * (1.0 - T) ** 2 + 2.0 * T * V * c * (1.0 + T) + T * T * c * c + 4.0 * T
    disc = (x - y) ** 2 * plus
    l1 = math.sqrt(0.5 * (Delta + math.sqrt(disc)))
    l2 = D / l1
    if l2 < 1.0 - gs.PHYSICAL_TOL:
        raise DomainError(
            f"channel (T={T!r}, chi_C={c!r}) with V={V!r} gives an unphysical state (lambda2={l2!r})"
        )
    return {"x": x, "y": y, "z": z, "D": D, "Delta": Delta, "l1": max(l1, 1.0), "l2": max(l2, 1.0)}


def _G(lam: float) -> float:
    return gs.g_entropy(max(lam - 1.0, 0.0) / 2.0)


def _quadratic_roots(A: float, B: float) -> tuple:
    """Roots ``lambda3 >= lambda4`` of ``lambda**4 - A lambda**2 + B = 0``."""
    disc = A * A - 4.0 * B
    if disc < -DISCRIMINANT_TOL * max(1.0, A * A):
        raise NumericError(f"negative discriminant A^2 - 4B = {disc!r}")
    hi = 0.5 * (A + math.sqrt(max(disc, 0.0)))
    l3 = math.sqrt(hi)
    l4 = math.sqrt(B / hi)
    return max(l3, 1.0), max(l4, 1.0)


def gamma_AB(V: float, channel: ChannelModel) -> gs.CovMatrix:
    """Covariance matrix shared by Alice and Bob after the channel."""
    inv = _invariants(V, channel)
    x, y, z = inv["x"], inv["y"], inv["z"]
    eye = np.eye(2)
    sz = np.diag([1.0, -1.0])
    return gs.CovMatrix(np.block([[x * eye, z * sz], [z * sz, y * eye]]), check=False)


def ab_covariance(V: float, channel: ChannelModel, chi_D: float = 0.0) -> np.ndarray:
    """Classical covariance of Alice's displacement ``a`` and Bob's outcome ``b``.

    ``b`` is expressed at the channel output (Bob's noise divided out of
    the detector gain), so ``var(b) = y + chi_D``.
    """
    _check_V(V)
    V_a = V - 1.0 / V
    T = channel.T
    return np.array([[V_a, math.sqrt(T) * V_a],
                     [math.sqrt(T) * V_a, T * (V + channel.chi_C) + chi_D]])


def mutual_info_ab(V: float, channel: ChannelModel, chi_D: float = 0.0) -> float:
    """Shannon information between Alice and Bob for squeezed-state protocols."""
    _check_V(V)
    if not chi_D >= 0.0:
        raise DomainError(f"chi_D must be >= 0, got {chi_D!r}")
    chi = channel.chi_C + chi_D / channel.T
    return 0.5 * math.log2((V + chi) / (chi + 1.0 / V))


def _rr_squeezed_terms(V: float, channel: ChannelModel, chi_D: float) -> dict:
    if not chi_D >= 0.0:
        raise DomainError(f"chi_D must be >= 0, got {chi_D!r}")
    inv = _invariants(V, channel)
    x, y, D, Delta = inv["x"], inv["y"], inv["D"], inv["Delta"]
    A = (y + x * D + chi_D * Delta) / (y + chi_D)
    B = D * (x + chi_D * D) / (y + chi_D)
    l3, l4 = _quadratic_roots(A, B)
    s_ab = _G(inv["l1"]) + _G(inv["l2"])
    s_cond = _G(l3) + _G(l4)
    inv.update(A=A, B=B, l3=l3, l4=l4, holevo=s_ab - s_cond)
    return inv


def holevo_bE_closed(V: float, channel: ChannelModel, chi_D: float = 0.0) -> float:
    """Eve's Holevo information on Bob's data, ``S(AB) - S(AFG|b)``, in bits."""
    return _rr_squeezed_terms(V, channel, chi_D)["holevo"]


def holevo_bE_oracle(V: float, channel: ChannelModel, T_B: float = 1.0, N: float = 1.0) -> float:
    """Same quantity as :func:`holevo_bE_closed`, built mode by mode.

    Modes ``A, B`` carry ``gamma_AB``; ``F, G`` are an EPR pair of variance
    ``N``; ``B`` and ``F`` meet on a beamsplitter of transmittivity ``T_B``
    and Bob homodynes the ``x`` quadrature of ``B``.
    """
    if not 0.0 < T_B <= 1.0:
        raise DomainError(f"T_B must lie in (0, 1], got {T_B!r}")
    g = gamma_AB(V, channel)
    state = gs.direct_sum(g, gs.epr_state(N))
    state = gs.apply_beamsplitter(state, (1, 2), T_B)
    cond = gs.homodyne_condition(state, gs.QuadratureSelector(1, gs.Quadrature.X))
    return gs.vn_entropy(g) - gs.vn_entropy(cond)


# --------------------------------------------------------------------------
# key rates
# --------------------------------------------------------------------------

def _keyrate_analytic(config: ProtocolConfig, channel: ChannelModel) -> RateReport:
    V = config.V
    squeezed = config.preparation is Preparation.SQUEEZED
    het = config.bob_measurement is Measurement.HETERODYNE
    rr = config.reconciliation is Reconciliation.RR
    chi = channel.chi_C + config.chi_D / channel.T

    if squeezed and rr:
        t = _rr_squeezed_terms(V, channel, config.chi_D)
        I_ab = mutual_info_ab(V, channel, config.chi_D)
        return RateReport(I_ab, t["holevo"], I_ab - t["holevo"], config.reconciliation, chi,
                          t["x"], t["y"], t["z"], t["Delta"], t["D"], t["A"], t["B"],
                          (t["l1"], t["l2"], t["l3"], t["l4"]))

    t = _invariants(V, channel)
    x, y, D = t["x"], t["y"], t["D"]
    if squeezed:
        I_ab = mutual_info_ab(V, channel, config.chi_D)
    elif het:
        I_ab = math.log2((x + 1.0) * (y + 1.0) / (D + x + y + 1.0))
    else:
        I_ab = 0.5 * math.log2(y * (x + 1.0) / (D + y))

    A = B = None
    if rr:
        # coherent states; Bob's measurement alone fixes Eve's information
        cond = ((D + x) / (y + 1.0),) if het else (math.sqrt(x * D / y),)
    elif squeezed:
        cond = (math.sqrt(y * D / x),)
    elif het:
        cond = ((D + y) / (x + 1.0),)
    else:
        # only Alice's x outcome is key data: her heterodyne is a balanced
        # split (noise 1 on her side) and the unused port stays trusted
        A = (x + y * D + t["Delta"]) / (x + 1.0)
        B = D * (y + D) / (x + 1.0)
        cond = _quadratic_roots(A, B)
    cond = tuple(max(lam, 1.0) for lam in cond)
    holevo = _G(t["l1"]) + _G(t["l2"]) - sum(_G(lam) for lam in cond)
    return RateReport(I_ab, holevo, I_ab - holevo, config.reconciliation, chi,
                      x, y, t["z"], t["Delta"], D, A, B, (t["l1"], t["l2"]) + cond)


def _keyrate_entanglement(config: ProtocolConfig, channel: ChannelModel) -> RateReport:
    g = gamma_AB(config.V, channel)
    squeezed = config.preparation is Preparation.SQUEEZED
    alice_x = gs.QuadratureSelector(0, gs.Quadrature.X)
    bob_x = gs.QuadratureSelector(1, gs.Quadrature.X)

    bob_het = config.preparation is Preparation.COHERENT and \
        config.bob_measurement is Measurement.HETERODYNE
    state = g
    if config.chi_D > 0.0:
        T_B, N = config.detector
        state = gs.apply_beamsplitter(gs.direct_sum(g, gs.epr_state(N)), (1, 2), T_B)

    alice_hom = [alice_x] if squeezed else []
    alice_het = [] if squeezed else [0]
    bob_hom = [] if bob_het else [bob_x]
    bob_het_modes = [1] if bob_het else []
    n_a = 1 if squeezed else 2
    cov = gs.outcome_covariance(state, alice_hom + bob_hom, alice_het + bob_het_modes)
    if not squeezed and bob_hom:
        # outcome order is homodynes first: move Alice's heterodyne pair to the front
        cov = cov[np.ix_([1, 2, 0], [1, 2, 0])]
    I_ab = gs.gaussian_mutual_info(cov, n_a)

    s_ab = gs.vn_entropy(g)
    if config.reconciliation is Reconciliation.RR:
        cond = gs.heterodyne_condition(state, 1) if bob_het else gs.homodyne_condition(state, bob_x)
    elif squeezed:
        cond = gs.homodyne_condition(g, alice_x)
    elif config.bob_measurement is Measurement.HETERODYNE:
        cond = gs.heterodyne_condition(g, 0)
    else:
        # Alice's heterodyne as a balanced split with vacuum; only x is key data
        split = gs.apply_beamsplitter(gs.direct_sum(g, gs.vacuum()), (0, 2), 0.5)
        cond = gs.homodyne_condition(split, alice_x)
    holevo = s_ab - gs.vn_entropy(cond)
    lambdas = tuple(gs.symplectic_eigs_generic(g)) + tuple(gs.symplectic_eigs_generic(cond))
    return RateReport(I_ab, holevo, I_ab - holevo, config.reconciliation,
                      channel.chi_C + config.chi_D / channel.T, lambdas=lambdas)


def keyrate(config: ProtocolConfig, channel: ChannelModel, method: str = "analytic") -> RateReport:
    """Secret key rate ``K = I_ab - holevo`` for ``config`` over ``channel``.

    ``holevo`` is Eve's information on Bob's data for reverse reconciliation
    and on Alice's data for direct reconciliation.
    """
    if method == "analytic":
        rep = _keyrate_analytic(config, channel)
    elif method == "entanglement":
        rep = _keyrate_entanglement(config, channel)
    else:
        raise DomainError(f"unknown method {method!r}")
    if config.switching:
        rep.I_ab *= 0.5
        rep.holevo *= 0.5
        rep.K = rep.I_ab - rep.holevo
    return rep
