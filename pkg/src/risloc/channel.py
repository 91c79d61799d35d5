"""Pathloss, precoding, RIS temporal codes and the noise-free received signal.

The received signal is evaluated from a channel-parameter vector eta (see
:mod:`risloc.params`) rather than from the scenario poses directly. Each path
rebuilds its own geometry from its block: the RIS centroid sits at
``p_B + c tau_br Delta_br`` and the UE centroid of that path at
``p_R + c tau_ru Delta_ru``. Evaluating at :func:`true_channel_params` recovers
the scenario geometry, while perturbing one entry moves only what that entry
controls. This is what the analytic derivatives in :mod:`risloc.fim`
differentiate.

Array shapes follow ``(T, N_U, N)`` for symbols, UE antennas and subcarriers.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
import math
from typing import NamedTuple, Sequence

import numpy as np

from .geometry import (
    DegenerateGeometryError,
    Entity,
    direction_angles,
    rotation_gradient,
    rotation_matrix,
    unit_vector,
    unit_vector_gradient,
)
from .params import (
    LOS_GEOMETRIC,
    NUISANCE,
    RIS_GEOMETRIC,
    ParamIndex,
    ParamVector,
    channel_layout,
)

__all__ = [
    "SPEED_OF_LIGHT",
    "Waveform",
    "RisProfile",
    "PathState",
    "Scenario",
    "Pathloss",
    "ris_element_gain",
    "ris_pathloss",
    "los_pathloss",
    "temporal_codes",
    "code_constraint_errors",
    "precoder",
    "focusing_phases",
    "true_channel_params",
    "received_signal",
    "path_signal",
    "signal_nearfield",
    "signal_farfield",
]

SPEED_OF_LIGHT = 299_792_458.0
MODELS = ("near", "far")
PATHLOSS_MODES = ("composite", "physical")


@dataclass(frozen=True)
class Waveform:
    """OFDM waveform description.

    Attributes
    ----------
    carrier_frequency : float
        f_c in Hz.
    subcarrier_count : int
        N.
    subcarrier_spacing : float
        Delta f in Hz.
    symbol_count : int
        T.
    pilot_symbols : ndarray, optional
        Shape (N, N_D). Defaults to all ones.
    beam_targets : ndarray, optional
        Shape (N_D, 3). Defaults to the first RIS centroid.
    narrowband : bool
        If True every subcarrier uses the carrier wavelength.
    """

    carrier_frequency: float
    subcarrier_count: int = 1
    subcarrier_spacing: float = 120e3
    symbol_count: int = 4
    pilot_symbols: np.ndarray | None = None
    beam_targets: np.ndarray | None = None
    narrowband: bool = True

    def __post_init__(self):
        if not self.carrier_frequency > 0:
            raise ValueError("carrier frequency must be positive")
        if self.subcarrier_count < 1 or self.symbol_count < 1:
            raise ValueError("need at least one subcarrier and one symbol")
        if self.pilot_symbols is not None:
            x = np.asarray(self.pilot_symbols, dtype=complex)
            if x.ndim == 1:
                x = x[:, None]
            if x.shape[0] != self.subcarrier_count:
                raise ValueError("pilot_symbols must have one row per subcarrier")
            object.__setattr__(self, "pilot_symbols", x)
        if self.beam_targets is not None:
            object.__setattr__(self, "beam_targets", np.atleast_2d(np.asarray(self.beam_targets, float)))

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def bandwidth(self) -> float:
        return self.subcarrier_count * self.subcarrier_spacing

    def frequencies(self) -> np.ndarray:
        """Subcarrier frequencies ``f_n = f_c + n df - B/2`` for n = 1..N."""
        if self.narrowband:
            return np.full(self.subcarrier_count, self.carrier_frequency)
        n = np.arange(1, self.subcarrier_count + 1)
        return self.carrier_frequency + n * self.subcarrier_spacing - self.bandwidth / 2


@dataclass(frozen=True)
class RisProfile:
    """RIS phase profile ``Gamma`` and temporal code ``gamma_t``."""

    element_phases: np.ndarray
    temporal_codes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "element_phases", np.asarray(self.element_phases, dtype=float).ravel())
        object.__setattr__(self, "temporal_codes", np.asarray(self.temporal_codes, dtype=complex).ravel())

    @property
    def reflection(self) -> np.ndarray:
        return np.exp(1j * self.element_phases)


@dataclass(frozen=True)
class PathState:
    """Complex gain and synchronization error of one path."""

    complex_gain: complex = 1.0 + 0.0j
    sync_error: float = 0.0


@dataclass(frozen=True)
class Scenario:
    """Geometry, waveform, RIS profiles and link budget.

    ``paths[0]`` belongs to the LOS path and ``paths[m]`` to RIS m.

    ``pathloss="physical"`` uses the per-element RIS pathloss and the LOS
    free-space amplitude, with ``snr`` the transmit budget over the noise per
    subcarrier. ``pathloss="composite"`` folds every pathloss into ``snr``
    (all amplitudes equal to one), leaving ``snr`` as a single scale.
    """

    bs: Entity
    ris: tuple
    ue: Entity
    waveform: Waveform
    profiles: tuple
    paths: tuple
    q0: float = 0.285
    efficiency: float = 0.5
    snr: float = 1.0
    pathloss: str = "composite"
    include_los: bool = True

    def __post_init__(self):
        object.__setattr__(self, "ris", tuple(self.ris))
        object.__setattr__(self, "profiles", tuple(self.profiles))
        object.__setattr__(self, "paths", tuple(self.paths))
        if len(self.profiles) != len(self.ris):
            raise ValueError("need one RisProfile per RIS")
        if len(self.paths) != len(self.ris) + 1:
            raise ValueError("need one PathState per path (LOS first)")
        if self.pathloss not in PATHLOSS_MODES:
            raise ValueError(f"pathloss must be one of {PATHLOSS_MODES}")
        for m, (r, p) in enumerate(zip(self.ris, self.profiles), start=1):
            if p.element_phases.size != r.count:
                raise ValueError(f"RIS {m}: {p.element_phases.size} phases for {r.count} elements")
            if p.temporal_codes.size != self.waveform.symbol_count:
                raise ValueError(f"RIS {m}: temporal code length must equal T")

    @property
    def n_ris(self) -> int:
        return len(self.ris)

    @property
    def wavelength(self) -> float:
        return self.waveform.wavelength

    def path_ids(self) -> list[int]:
        return ([0] if self.include_los else []) + list(range(1, self.n_ris + 1))

    def layout(self) -> list[ParamIndex]:
        return channel_layout(self.n_ris, self.include_los)

    def beam_targets(self) -> np.ndarray:
        if self.waveform.beam_targets is not None:
            return self.waveform.beam_targets
        if self.ris:
            return self.ris[0].pose.nominal_position[None, :]
        return self.ue.pose.nominal_position[None, :]

    def pilots(self) -> np.ndarray:
        nd = self.beam_targets().shape[0]
        if self.waveform.pilot_symbols is not None:
            x = self.waveform.pilot_symbols
            if x.shape[1] != nd:
                raise ValueError("pilot_symbols columns must match the number of beam targets")
            return x
        return np.ones((self.waveform.subcarrier_count, nd), dtype=complex)

    def with_(self, **kw) -> "Scenario":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# pathloss


class Pathloss(NamedTuple):
    amplitude: float
    behind_surface: bool


def _pow(x, q):
    # x**q for x > 0 through exp(q ln x); zero elsewhere
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(q * np.log(x[pos]))
    return out


def ris_element_gain(ris: Entity, r: int, target, q0: float) -> float:
    """Gain ``pi (a^T Q_R a~)^(2 q0)`` of RIS element ``r`` toward ``target``.

    ``a`` is the unit vector from the element to the target. The gain is
    clamped to zero when the target lies behind the surface.
    """
    elem = ris.elements()[r]
    w = np.asarray(target, float) - elem
    d = float(np.linalg.norm(w))
    if d == 0.0:
        raise DegenerateGeometryError("target coincides with the RIS element")
    c = float(w @ ris.normal()) / d
    return float(math.pi * _pow(c, 2 * q0)) if c > 0 else 0.0


def _pathloss_grid(proj_b, proj_u, d_br, d_ru, q0, eff, lam):
    c = lam ** 2 * eff / (16 * math.pi)
    return c * _pow(proj_b, q0) * _pow(proj_u, q0) * _pow(d_br, -(q0 + 1)) * _pow(d_ru, -(q0 + 1))


def ris_pathloss(bs_elem, ris: Entity, r: int, ue_elem, q0: float, efficiency: float,
                 wavelength: float) -> Pathloss:
    """Amplitude pathloss through RIS element ``r``.

    ``lambda^2 eps_p proj_b^q0 proj_u^q0 / (16 pi d_br^(q0+1) d_ru^(q0+1))``
    where ``proj_x`` is the separation vector from the element to ``x``
    projected on the rotated RIS normal.
    """
    b = np.asarray(bs_elem, float)
    u = np.asarray(ue_elem, float)
    elem = ris.elements()[r]
    n = ris.normal()
    d_br = np.linalg.norm(elem - b)
    d_ru = np.linalg.norm(u - elem)
    if d_br == 0 or d_ru == 0:
        raise DegenerateGeometryError("BS or UE element coincides with the RIS element")
    pb = float((b - elem) @ n)
    pu = float((u - elem) @ n)
    if pb <= 0 or pu <= 0:
        return Pathloss(0.0, True)
    amp = float(_pathloss_grid(pb, pu, d_br, d_ru, q0, efficiency, wavelength))
    return Pathloss(amp, False)


def los_pathloss(d: float, wavelength: float) -> float:
    """Free-space amplitude ``(lambda / 4 pi) / d``."""
    if not d > 0:
        raise DegenerateGeometryError("LOS distance must be positive")
    return wavelength / (4 * math.pi) / d


# ---------------------------------------------------------------------------
# codes and precoding


def temporal_codes(T: int, n_ris: int) -> np.ndarray:
    """Non-DC DFT columns ``exp(-j 2 pi k t / T) / sqrt(T)`` for k = 1..M1.

    Returns
    -------
    ndarray, shape (M1, T)
    """
    if T < n_ris + 1:
        raise ValueError(f"T={T} symbols cannot separate {n_ris} RIS paths from the LOS (need T >= {n_ris + 1})")
    t = np.arange(T)
    k = np.arange(1, n_ris + 1)[:, None]
    return np.exp(-2j * np.pi * k * t / T) / math.sqrt(T)


def code_constraint_errors(codes: np.ndarray) -> tuple[float, float, float]:
    """Largest violations of (zero sum, unit energy, mutual orthogonality)."""
    g = np.atleast_2d(codes)
    s = float(np.abs(g.sum(axis=1)).max())
    e = float(np.abs((np.abs(g) ** 2).sum(axis=1) - 1).max())
    gram = g.conj() @ g.T
    off = gram - np.diag(np.diag(gram))
    o = float(np.abs(off).max()) if g.shape[0] > 1 else 0.0
    return s, e, o


def precoder(beam_targets, bs: Entity, frequencies) -> np.ndarray:
    """Beam-steering precoder with columns ``exp(+j 2 pi f_n tau_{b p_d})``.

    Scaled by ``1 / sqrt(N_B N_D)`` so that ``Tr(F^H F) = 1`` on every subcarrier.

    Returns
    -------
    ndarray, shape (N, N_B, N_D)
    """
    targets = np.atleast_2d(np.asarray(beam_targets, float))
    b = bs.elements()
    d = np.linalg.norm(targets[None, :, :] - b[:, None, :], axis=-1)
    if np.any(d == 0):
        raise DegenerateGeometryError("beam target coincides with a BS element")
    f = np.atleast_1d(np.asarray(frequencies, float))
    scale = 1.0 / math.sqrt(b.shape[0] * targets.shape[0])
    return scale * np.exp(2j * np.pi * f[:, None, None] * d[None] / SPEED_OF_LIGHT)


def focusing_phases(bs: Entity, ris: Entity, focus_point, frequency: float) -> np.ndarray:
    """Phases that align the BS-centroid to focus-point delays across the RIS."""
    r = ris.elements()
    d = np.linalg.norm(r - bs.position, axis=1) + np.linalg.norm(np.asarray(focus_point, float) - r, axis=1)
    return np.mod(2 * np.pi * frequency * d / SPEED_OF_LIGHT, 2 * np.pi)


# ---------------------------------------------------------------------------
# channel parameters


def _check_pole(da, what):
    if da.at_pole:
        raise DegenerateGeometryError(f"{what} link is aligned with the z axis (spherical-angle pole)")


def true_channel_params(scenario: Scenario) -> ParamVector:
    """Centroid-to-centroid channel parameters of the scenario truth."""
    index = scenario.layout()
    pb, pu = scenario.bs.position, scenario.ue.position
    ue_ang = scenario.ue.pose.orientation.as_array()
    vals = {}
    if scenario.include_los:
        da = direction_angles(pb, pu)
        _check_pole(da, "BS-UE")
        st = scenario.paths[0]
        vals[0] = dict(theta_bu=da.theta, phi_bu=da.phi, tau_bu=da.distance / SPEED_OF_LIGHT,
                       ue_yaw=ue_ang[0], ue_pitch=ue_ang[1], ue_roll=ue_ang[2],
                       eps=st.sync_error, beta_re=complex(st.complex_gain).real,
                       beta_im=complex(st.complex_gain).imag)
    for m, ris in enumerate(scenario.ris, start=1):
        pr = ris.position
        ru = direction_angles(pr, pu)
        br = direction_angles(pb, pr)
        _check_pole(ru, f"RIS{m}-UE")
        _check_pole(br, f"BS-RIS{m}")
        ang = ris.pose.orientation.as_array()
        st = scenario.paths[m]
        vals[m] = dict(theta_ru=ru.theta, phi_ru=ru.phi, theta_br=br.theta, phi_br=br.phi,
                       tau_ru=ru.distance / SPEED_OF_LIGHT, tau_br=br.distance / SPEED_OF_LIGHT,
                       ris_yaw=ang[0], ris_pitch=ang[1], ris_roll=ang[2],
                       ue_yaw=ue_ang[0], ue_pitch=ue_ang[1], ue_roll=ue_ang[2],
                       eps=st.sync_error, beta_re=complex(st.complex_gain).real,
                       beta_im=complex(st.complex_gain).imag)
    v = np.array([vals[p.path][p.name] for p in index])
    return ParamVector(index, v)


# ---------------------------------------------------------------------------
# per-path geometry rebuilt from eta


@dataclass
class LinkState:
    """Centroid link G -> V described by angles and delay."""

    theta: float
    phi: float
    tau: float
    distance: float = field(init=False)
    delta: np.ndarray = field(init=False)
    d_theta: np.ndarray = field(init=False)
    d_phi: np.ndarray = field(init=False)

    def __post_init__(self):
        self.distance = SPEED_OF_LIGHT * self.tau
        self.delta = unit_vector(self.theta, self.phi)
        self.d_theta, self.d_phi = unit_vector_gradient(self.theta, self.phi)


@dataclass
class OrientedArray:
    """Rotated element offsets of one entity and their orientation derivatives."""

    centroid: np.ndarray
    rotation: np.ndarray
    offsets: np.ndarray  # (N, 3)
    d_offsets: np.ndarray  # (3, N, 3), derivative w.r.t. each angle
    normal: np.ndarray  # (3,)
    d_normal: np.ndarray  # (3, 3)

    @classmethod
    def build(cls, centroid, angles, layout) -> "OrientedArray":
        q = rotation_matrix(angles)
        dq = rotation_gradient(angles)
        s = layout.local_offsets
        return cls(
            np.asarray(centroid, float), q, s @ q.T,
            np.einsum("kij,nj->kni", dq, s),
            q @ layout.normal, dq @ layout.normal,
        )

    @classmethod
    def fixed(cls, entity: Entity) -> "OrientedArray":
        q = entity.rotation
        s = entity.layout.local_offsets
        return cls(entity.position, q, s @ q.T, np.zeros((3,) + s.shape),
                   q @ entity.layout.normal, np.zeros((3, 3)))


@dataclass
class LosGeometry:
    bu: LinkState
    bs: OrientedArray
    ue: OrientedArray


@dataclass
class RisGeometry:
    br: LinkState
    ru: LinkState
    bs: OrientedArray
    ris: OrientedArray
    ue: OrientedArray


def _angles(block, names):
    return np.array([block[n] for n in names])


def los_geometry(scenario: Scenario, block: dict) -> LosGeometry:
    bu = LinkState(block["theta_bu"], block["phi_bu"], block["tau_bu"])
    bs = OrientedArray.fixed(scenario.bs)
    pu = bs.centroid + bu.distance * bu.delta
    ue = OrientedArray.build(pu, _angles(block, LOS_GEOMETRIC[3:6]), scenario.ue.layout)
    return LosGeometry(bu, bs, ue)


def ris_geometry(scenario: Scenario, m: int, block: dict) -> RisGeometry:
    br = LinkState(block["theta_br"], block["phi_br"], block["tau_br"])
    ru = LinkState(block["theta_ru"], block["phi_ru"], block["tau_ru"])
    bs = OrientedArray.fixed(scenario.bs)
    pr = bs.centroid + br.distance * br.delta
    ris = OrientedArray.build(pr, _angles(block, RIS_GEOMETRIC[6:9]), scenario.ris[m - 1].layout)
    pu = pr + ru.distance * ru.delta
    ue = OrientedArray.build(pu, _angles(block, RIS_GEOMETRIC[9:12]), scenario.ue.layout)
    return RisGeometry(br, ru, bs, ris, ue)


def link_distances(link: LinkState, src: OrientedArray, dst: OrientedArray, model: str) -> np.ndarray:
    """Element distances (N_src, N_dst), exact ("near") or first order ("far")."""
    rel = dst.offsets[None, :, :] - src.offsets[:, None, :]
    if model == "near":
        return np.linalg.norm(link.distance * link.delta + rel, axis=-1)
    return link.distance + rel @ link.delta


def ris_projections(g: RisGeometry, model: str):
    """Separations from RIS elements to BS and UE projected on the RIS normal.

    Returns arrays (N_R, N_B) and (N_R, N_U) for "near", scalars for "far".
    """
    n = g.ris.normal
    to_b = -g.br.distance * g.br.delta
    to_u = g.ru.distance * g.ru.delta
    if model == "near":
        pb = (to_b + g.bs.offsets[None, :, :] - g.ris.offsets[:, None, :]) @ n
        pu = (to_u + g.ue.offsets[None, :, :] - g.ris.offsets[:, None, :]) @ n
        return pb, pu
    return float(to_b @ n), float(to_u @ n)


def ris_pathloss_grid(scenario: Scenario, g: RisGeometry, model: str):
    """Pathloss amplitudes broadcastable to (N_B, N_R, N_U) and a behind-surface count."""
    if scenario.pathloss == "composite":
        return np.ones((1, 1, 1)), 0
    lam = scenario.wavelength
    pb, pu = ris_projections(g, model)
    if model == "near":
        d_br = link_distances(g.br, g.bs, g.ris, "near")  # (B, R)
        d_ru = link_distances(g.ru, g.ris, g.ue, "near")  # (R, U)
        rho = _pathloss_grid(pb.T[:, :, None], pu[None, :, :], d_br[:, :, None], d_ru[None, :, :],
                             scenario.q0, scenario.efficiency, lam)
        behind = int(np.sum(pb <= 0) + np.sum(pu <= 0))
        return rho, behind
    rho = _pathloss_grid(pb, pu, g.br.distance, g.ru.distance, scenario.q0, scenario.efficiency, lam)
    return np.full((1, 1, 1), float(rho)), int(pb <= 0) + int(pu <= 0)


def los_amplitude(scenario: Scenario, g: LosGeometry) -> float:
    if scenario.pathloss == "composite":
        return 1.0
    return los_pathloss(g.bu.distance, scenario.wavelength)


# ---------------------------------------------------------------------------
# signal


def _unique_frequencies(scenario: Scenario):
    f = scenario.waveform.frequencies()
    fu, inv = np.unique(f, return_inverse=True)
    return f, fu, inv


def transmit_weights(scenario: Scenario) -> np.ndarray:
    """Precoded pilots ``w[n, b] = sum_d F[n, b, d] x_d[n]``, shape (N, N_B)."""
    f = scenario.waveform.frequencies()
    F = precoder(scenario.beam_targets(), scenario.bs, f)
    return np.einsum("nbd,nd->nb", F, scenario.pilots())


def los_response(scenario: Scenario, block: dict, model: str = "near") -> np.ndarray:
    """Unit-gain LOS response ``g[n, u]`` (without beta and sync-error phase)."""
    g = los_geometry(scenario, block)
    d = link_distances(g.bu, g.bs, g.ue, model)  # (B, U)
    f, fu, inv = _unique_frequencies(scenario)
    w = transmit_weights(scenario)
    E = np.exp(-2j * np.pi * fu[:, None, None] * d[None] / SPEED_OF_LIGHT)  # (F, B, U)
    return los_amplitude(scenario, g) * np.einsum("nb,nbu->nu", w, E[inv])


def ris_response(scenario: Scenario, m: int, block: dict, model: str = "near") -> np.ndarray:
    """Unit-gain response of RIS path m, ``g[n, u]`` (without gamma_t, beta, sync phase)."""
    g = ris_geometry(scenario, m, block)
    d_br = link_distances(g.br, g.bs, g.ris, model)  # (B, R)
    d_ru = link_distances(g.ru, g.ris, g.ue, model)  # (R, U)
    rho, _ = ris_pathloss_grid(scenario, g, model)
    refl = scenario.profiles[m - 1].reflection
    f, fu, inv = _unique_frequencies(scenario)
    w = transmit_weights(scenario)
    K = np.empty((fu.size, d_br.shape[0], d_ru.shape[1]), dtype=complex)
    for i, fi in enumerate(fu):
        k = -2j * np.pi * fi / SPEED_OF_LIGHT
        a_b = np.exp(k * d_br) * refl[None, :]  # (B, R)
        a_u = np.exp(k * d_ru)  # (R, U)
        K[i] = np.einsum("br,bru,ru->bu", a_b, np.broadcast_to(rho, (a_b.shape[0],) + a_u.shape), a_u)
    return np.einsum("nb,nbu->nu", w, K[inv])


def _eta(scenario: Scenario, eta) -> ParamVector:
    return true_channel_params(scenario) if eta is None else eta


def path_signal(scenario: Scenario, m: int, eta: ParamVector | None = None,
                model: str = "near") -> np.ndarray:
    """Contribution of path m to the received signal, shape (T, N_U, N)."""
    if model not in MODELS:
        raise ValueError(f"model must be one of {MODELS}")
    eta = _eta(scenario, eta)
    block = eta.block(m)
    f = scenario.waveform.frequencies()
    beta = block["beta_re"] + 1j * block["beta_im"]
    sync = np.exp(-2j * np.pi * f * block["eps"])  # (N,)
    if m == 0:
        base = los_response(scenario, block, model)
        codes = np.ones(scenario.waveform.symbol_count)
    else:
        base = ris_response(scenario, m, block, model)
        codes = scenario.profiles[m - 1].temporal_codes
    cu = base.T * sync[None, :] * beta  # (U, N)
    return codes[:, None, None] * cu[None]


def received_signal(scenario: Scenario, eta: ParamVector | None = None,
                    model: str = "near", paths: Sequence[int] | None = None) -> np.ndarray:
    """Noise-free received signal, shape (T, N_U, N)."""
    eta = _eta(scenario, eta)
    ids = eta.paths() if paths is None else list(paths)
    out = np.zeros((scenario.waveform.symbol_count, scenario.ue.count,
                    scenario.waveform.subcarrier_count), dtype=complex)
    for m in ids:
        out += path_signal(scenario, m, eta, model)
    return out


def signal_nearfield(scenario: Scenario, t: int | None = None, u: int | None = None,
                     n: int | None = None, eta: ParamVector | None = None):
    """Exact-distance received signal; a sample when t, u and n are given."""
    mu = received_signal(scenario, eta, "near")
    return _index(mu, t, u, n)


def signal_farfield(scenario: Scenario, t: int | None = None, n: int | None = None,
                    eta: ParamVector | None = None):
    """Far-field received signal; the vector over UE antennas when t and n are given."""
    mu = received_signal(scenario, eta, "far")
    return _index(mu, t, None, n)


def _index(mu, t, u, n):
    T, U, N = mu.shape
    for name, i, size in (("t", t, T), ("u", u, U), ("n", n, N)):
        if i is not None and not 0 <= i < size:
            raise IndexError(f"{name}={i} out of range [0, {size})")
    sl = (slice(None) if t is None else t, slice(None) if u is None else u,
          slice(None) if n is None else n)
    out = mu[sl]
    return complex(out) if np.ndim(out) == 0 else out


def behind_surface_count(scenario: Scenario, model: str = "near") -> dict[int, int]:
    """Per-RIS count of element projections that fall behind the surface."""
    eta = true_channel_params(scenario)
    out = {}
    for m in range(1, scenario.n_ris + 1):
        g = ris_geometry(scenario, m, eta.block(m))
        pb, pu = ris_projections(g, model)
        out[m] = int(np.sum(np.asarray(pb) <= 0) + np.sum(np.asarray(pu) <= 0))
    return out
