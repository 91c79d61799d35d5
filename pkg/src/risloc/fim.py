"""Analytic signal derivatives, observation FIM, priors, EFIM and estimability.

Signal derivatives are written link by link: every element distance and every
normal projection has a closed-form derivative with respect to the angles
and delay of its link and the orientations of its end points. The RIS pathloss
derivative uses the product rule over its two links. A path's sample
derivative then combines the pathloss derivative with the phase derivative
``-j 2 pi f_n (dd_br + dd_ru) / c``.

The FIM is kept together with a real factor ``G`` such that ``J = G^T G``. The
factor rows are the real and imaginary parts of the scaled derivative samples.
Equivalent FIMs are then formed from a QR factorization of the reordered
factor, which avoids the cancellation of an explicit Schur complement when
the nuisance parameters absorb nearly all of the information.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla

from .channel import (
    SPEED_OF_LIGHT,
    LinkState,
    OrientedArray,
    Scenario,
    _unique_frequencies,
    link_distances,
    los_amplitude,
    los_geometry,
    ris_geometry,
    ris_projections,
    received_signal,
    transmit_weights,
    true_channel_params,
)
from .params import (
    ANGLE_NAMES,
    DELAY_NAMES,
    LOS_GEOMETRIC,
    NUISANCE,
    RIS_GEOMETRIC,
    ParamIndex,
    ParamVector,
    _key,
    select,
)

__all__ = [
    "NuisanceSingularError",
    "Fim",
    "PriorSpec",
    "Estimability",
    "link_distance_derivatives",
    "los_response_derivatives",
    "ris_response_derivatives",
    "signal_derivatives",
    "fd_signal_derivatives",
    "fd_step",
    "relative_errors",
    "derivative_check",
    "observation_fim",
    "bayesian_fim",
    "efim",
    "estimability",
]

DEFAULT_TOL = 1e-10


class NuisanceSingularError(np.linalg.LinAlgError):
    """The nuisance block of an EFIM reduction is singular."""


# ---------------------------------------------------------------------------
# distance and projection derivatives


def link_distance_derivatives(link: LinkState, src: OrientedArray, dst: OrientedArray,
                              model: str) -> dict[str, np.ndarray]:
    """Derivatives of element distances on the link ``src -> dst``.

    Returns a dict with keys ``theta``, ``phi``, ``tau`` (each (N_src, N_dst))
    and ``dst_orient``, ``src_orient`` (each (3, N_src, N_dst)).

    Near field, with ``s = s_v - s_g`` and centroid distance ``D``::

        dd/dtheta = (D / d) dDelta_theta^T s
        dd/dtau   = c (D + Delta^T s) / d
        dd/dPhi_V = (D / d) Delta^T ds_v - ds_v^T s_g / d
        dd/dPhi_G = -(D / d) Delta^T ds_g - s_v^T ds_g / d

    Far field drops every ``1/d`` factor: the distance is ``D + Delta^T s``.
    """
    rel = dst.offsets[None, :, :] - src.offsets[:, None, :]  # (S, V, 3)
    D, delta = link.distance, link.delta
    out = {}
    if model == "near":
        d = np.linalg.norm(D * delta + rel, axis=-1)
        out["theta"] = D / d * (rel @ link.d_theta)
        out["phi"] = D / d * (rel @ link.d_phi)
        out["tau"] = SPEED_OF_LIGHT * (D + rel @ delta) / d
        dv = dst.d_offsets  # (3, V, 3)
        dg = src.d_offsets  # (3, S, 3)
        out["dst_orient"] = (D * (dv @ delta)[:, None, :] - np.einsum("kvi,si->ksv", dv, src.offsets)) / d
        out["src_orient"] = (-D * (dg @ delta)[:, :, None] - np.einsum("vi,ksi->ksv", dst.offsets, dg)) / d
    else:
        shape = rel.shape[:2]
        out["theta"] = rel @ link.d_theta
        out["phi"] = rel @ link.d_phi
        out["tau"] = np.full(shape, SPEED_OF_LIGHT)
        out["dst_orient"] = np.broadcast_to((dst.d_offsets @ delta)[:, None, :], (3,) + shape).copy()
        out["src_orient"] = np.broadcast_to(-(src.d_offsets @ delta)[:, :, None], (3,) + shape).copy()
    return out


def _pathloss_factor(proj, dist, dproj, ddist, q0):
    """``A = proj^q0 dist^-(q0+1)`` and its derivatives along the leading axis.

    Entries with a non-positive projection are clamped to zero together with
    their derivatives.
    """
    proj = np.asarray(proj, float)
    pos = proj > 0
    p = np.where(pos, proj, 1.0)
    A = np.where(pos, np.exp(q0 * np.log(p) - (q0 + 1) * np.log(dist)), 0.0)
    dA = (q0 * dist ** (-(q0 + 1)) * np.exp((q0 - 1) * np.log(p)) * dproj
          - (q0 + 1) * np.exp(q0 * np.log(p)) * dist ** (-q0 - 2) * ddist)
    return A, np.where(pos, dA, 0.0)


def _ris_pathloss_derivatives(scenario: Scenario, g, model, dd_br, dd_ru):
    """Physical RIS pathloss and its 12 geometric derivatives.

    Returns rho broadcastable to (B, R, U) and drho of shape (12, B, R, U) or
    (12, 1, 1, 1) in the far-field model.
    """
    q0, lam = scenario.q0, scenario.wavelength
    C = lam ** 2 * scenario.efficiency / (16 * math.pi)
    n, dn = g.ris.normal, g.ris.d_normal
    br, ru = g.br, g.ru
    pb, pu = ris_projections(g, model)
    c = SPEED_OF_LIGHT
    to_b = -br.distance * br.delta
    to_u = ru.distance * ru.delta
    if model == "near":
        B, R, U = g.bs.offsets.shape[0], g.ris.offsets.shape[0], g.ue.offsets.shape[0]
        pb = pb.T  # (B, R)
        d_br = link_distances(br, g.bs, g.ris, "near")
        d_ru = link_distances(ru, g.ris, g.ue, "near")
        dpb = np.zeros((12, B, R))
        dpu = np.zeros((12, R, U))
        dpb[2] = -br.distance * (br.d_theta @ n)
        dpb[3] = -br.distance * (br.d_phi @ n)
        dpb[5] = -c * (br.delta @ n)
        dpb[6:9] = ((to_b + g.bs.offsets) @ dn.T).T[:, :, None]
        dpu[0] = ru.distance * (ru.d_theta @ n)
        dpu[1] = ru.distance * (ru.d_phi @ n)
        dpu[4] = c * (ru.delta @ n)
        dpu[6:9] = ((to_u + g.ue.offsets) @ dn.T).T[:, None, :]
        dpu[9:12] = (g.ue.d_offsets @ n)[:, None, :]
        Ab, dAb = _pathloss_factor(pb, d_br, dpb, dd_br, q0)
        Au, dAu = _pathloss_factor(pu, d_ru, dpu, dd_ru, q0)
        rho = C * Ab[:, :, None] * Au[None, :, :]
        drho = C * (dAb[:, :, :, None] * Au[None, None] + Ab[None, :, :, None] * dAu[:, None])
        return rho, drho
    # far field: centroid projections and centroid distances
    dpb = np.zeros(12)
    dpu = np.zeros(12)
    dpb[2] = -br.distance * (br.d_theta @ n)
    dpb[3] = -br.distance * (br.d_phi @ n)
    dpb[5] = -c * (br.delta @ n)
    dpb[6:9] = dn @ to_b
    dpu[0] = ru.distance * (ru.d_theta @ n)
    dpu[1] = ru.distance * (ru.d_phi @ n)
    dpu[4] = c * (ru.delta @ n)
    dpu[6:9] = dn @ to_u
    dDb = np.zeros(12)
    dDu = np.zeros(12)
    dDb[5] = c
    dDu[4] = c
    Ab, dAb = _pathloss_factor(np.array(pb), br.distance, dpb, dDb, q0)
    Au, dAu = _pathloss_factor(np.array(pu), ru.distance, dpu, dDu, q0)
    rho = np.full((1, 1, 1), C * float(Ab) * float(Au))
    drho = (C * (dAb * Au + Ab * dAu)).reshape(12, 1, 1, 1)
    return rho, drho


def ris_response_derivatives(scenario: Scenario, m: int, block: dict, model: str = "near"):
    """Unit-gain RIS response and its derivatives w.r.t. the 12 geometric parameters.

    Returns
    -------
    g : ndarray, shape (N, U)
    dg : ndarray, shape (N, U, 12)
        Ordered as ``RIS_GEOMETRIC``.
    """
    geo = ris_geometry(scenario, m, block)
    dbr = link_distance_derivatives(geo.br, geo.bs, geo.ris, model)  # src B, dst R
    dru = link_distance_derivatives(geo.ru, geo.ris, geo.ue, model)  # src R, dst U
    d_br = link_distances(geo.br, geo.bs, geo.ris, model)
    d_ru = link_distances(geo.ru, geo.ris, geo.ue, model)
    B, R = d_br.shape
    U = d_ru.shape[1]
    dd_br = np.zeros((12, B, R))
    dd_ru = np.zeros((12, R, U))
    dd_ru[0], dd_ru[1], dd_ru[4] = dru["theta"], dru["phi"], dru["tau"]
    dd_br[2], dd_br[3], dd_br[5] = dbr["theta"], dbr["phi"], dbr["tau"]
    dd_br[6:9] = dbr["dst_orient"]
    dd_ru[6:9] = dru["src_orient"]
    dd_ru[9:12] = dru["dst_orient"]
    physical = scenario.pathloss == "physical"
    if physical:
        rho, drho = _ris_pathloss_derivatives(scenario, geo, model, dd_br, dd_ru)
    refl = scenario.profiles[m - 1].reflection
    f, fu, inv = _unique_frequencies(scenario)
    w = transmit_weights(scenario)
    K = np.empty((fu.size, B, U), complex)
    dK = np.empty((fu.size, 12, B, U), complex)
    for i, fi in enumerate(fu):
        k = -2j * np.pi * fi / SPEED_OF_LIGHT
        a_b = np.exp(k * d_br) * refl[None, :]
        a_u = np.exp(k * d_ru)
        if physical:
            rb = np.broadcast_to(rho, (B, R, U))
            K[i] = np.einsum("br,bru,ru->bu", a_b, rb, a_u)
            phase = k * (dd_br[:, :, :, None] + dd_ru[:, None, :, :])  # (12, B, R, U)
            dK[i] = np.einsum("br,kbru,ru->kbu", a_b, np.broadcast_to(drho, phase.shape) + rb[None] * phase, a_u)
        else:
            K[i] = a_b @ a_u
            dK[i] = k * (np.einsum("br,kbr,ru->kbu", a_b, dd_br, a_u)
                         + np.einsum("br,kru,ru->kbu", a_b, dd_ru, a_u))
    g = np.einsum("nb,nbu->nu", w, K[inv])
    dg = np.einsum("nb,nkbu->nuk", w, dK[inv])
    return g, dg


def los_response_derivatives(scenario: Scenario, block: dict, model: str = "near"):
    """Unit-gain LOS response and derivatives w.r.t. ``LOS_GEOMETRIC`` (6 entries)."""
    geo = los_geometry(scenario, block)
    dd = link_distance_derivatives(geo.bu, geo.bs, geo.ue, model)
    d = link_distances(geo.bu, geo.bs, geo.ue, model)
    B, U = d.shape
    ddk = np.zeros((6, B, U))
    ddk[0], ddk[1], ddk[2] = dd["theta"], dd["phi"], dd["tau"]
    ddk[3:6] = dd["dst_orient"]
    rho0 = los_amplitude(scenario, geo)
    drho = np.zeros(6)
    if scenario.pathloss == "physical":
        drho[2] = -SPEED_OF_LIGHT * scenario.wavelength / (4 * math.pi) / geo.bu.distance ** 2
    f, fu, inv = _unique_frequencies(scenario)
    w = transmit_weights(scenario)
    E = np.exp(-2j * np.pi * fu[:, None, None] * d[None] / SPEED_OF_LIGHT)  # (F, B, U)
    k = (-2j * np.pi * fu / SPEED_OF_LIGHT)[:, None, None, None]
    dE = E[:, None] * (drho[None, :, None, None] + rho0 * k * ddk[None])  # (F, 6, B, U)
    g = rho0 * np.einsum("nb,nbu->nu", w, E[inv])
    dg = np.einsum("nb,nkbu->nuk", w, dE[inv])
    return g, dg


def _path_derivatives(scenario: Scenario, m: int, block: dict, model: str):
    """Derivatives of path m's signal w.r.t. its own block, shape (T, U, N, P_m)."""
    f = scenario.waveform.frequencies()
    beta = block["beta_re"] + 1j * block["beta_im"]
    sync = np.exp(-2j * np.pi * f * block["eps"])
    if m == 0:
        g, dg = los_response_derivatives(scenario, block, model)
        codes = np.ones(scenario.waveform.symbol_count, complex)
        geo_names = LOS_GEOMETRIC
    else:
        g, dg = ris_response_derivatives(scenario, m, block, model)
        codes = scenario.profiles[m - 1].temporal_codes
        geo_names = RIS_GEOMETRIC
    base = (g * sync[:, None]).T  # (U, N)
    cols = [beta * (dg[:, :, k] * sync[:, None]).T for k in range(len(geo_names))]
    cols.append(-2j * np.pi * f[None, :] * beta * base)  # eps
    cols.append(base)  # beta_re
    cols.append(1j * base)  # beta_im
    du = np.stack(cols, axis=-1)  # (U, N, P)
    return codes[:, None, None, None] * du[None], list(geo_names) + list(NUISANCE)


def signal_derivatives(scenario: Scenario, params: Sequence | None = None,
                       eta: ParamVector | None = None, model: str = "near") -> np.ndarray:
    """Analytic derivatives of the received signal.

    Parameters
    ----------
    params : sequence of ParamIndex or (path, name), optional
        Defaults to the full layout.
    eta : ParamVector, optional
        Evaluation point; defaults to the scenario truth.

    Returns
    -------
    ndarray, shape (T, N_U, N, P)
    """
    eta = true_channel_params(scenario) if eta is None else eta
    keys = [p.key for p in eta.index] if params is None else [_key(p) for p in params]
    paths = sorted({k[0] for k in keys})
    cache = {}
    for m in paths:
        cache[m] = _path_derivatives(scenario, m, eta.block(m), model)
    T, U, N = scenario.waveform.symbol_count, scenario.ue.count, scenario.waveform.subcarrier_count
    out = np.empty((T, U, N, len(keys)), complex)
    for j, (m, name) in enumerate(keys):
        d, names = cache[m]
        out[..., j] = d[..., names.index(name)]
    return out


def fd_step(name: str, value: float, rule: str = "extrapolated") -> float:
    """Base finite-difference step for one parameter.

    ``rule="plain"``: 1e-13 s for delays and ``max(1e-7, 1e-7 |x|)`` otherwise.
    ``rule="extrapolated"`` (default, paired with Richardson extrapolation):
    1e-13 s for delays and ``max(1e-3, 1e-3 |x|)`` otherwise. The small plain
    step loses 3-4 digits to cancellation on parameters that only move the
    element offsets, so the larger extrapolated step is the reference.
    """
    if name in DELAY_NAMES:
        return 1e-13
    base = 1e-7 if rule == "plain" else 1e-3
    return max(base, base * abs(value))


def fd_signal_derivatives(scenario: Scenario, params: Sequence | None = None,
                          eta: ParamVector | None = None, model: str = "near",
                          rule: str = "extrapolated") -> np.ndarray:
    """Central finite differences of :func:`received_signal` (oracle).

    With ``rule="extrapolated"`` the steps h and 2h are combined as
    ``(4 D_h - D_2h) / 3``; ``rule="plain"`` is a single central difference.
    """
    eta = true_channel_params(scenario) if eta is None else eta
    keys = [p.key for p in eta.index] if params is None else [_key(p) for p in params]
    T, U, N = scenario.waveform.symbol_count, scenario.ue.count, scenario.waveform.subcarrier_count
    out = np.empty((T, U, N, len(keys)), complex)

    def central(key, h):
        x = eta[key]
        return (received_signal(scenario, eta.with_value(key, x + h), model, paths=[key[0]])
                - received_signal(scenario, eta.with_value(key, x - h), model, paths=[key[0]])) / (2 * h)

    for j, key in enumerate(keys):
        h = fd_step(key[1], eta[key], rule)
        d1 = central(key, h)
        out[..., j] = (4 * d1 - central(key, 2 * h)) / 3 if rule == "extrapolated" else d1
    return out


def relative_errors(analytic: np.ndarray, reference: np.ndarray,
                    scale: np.ndarray | None = None) -> np.ndarray:
    """Per-parameter ``||a - r|| / ||r||`` over all samples (last axis = parameter).

    Where the analytic derivative is exactly zero (a structural zero, e.g. an
    angle of a single-antenna link) the reference is pure round-off; the error
    is then ``||r|| / scale`` with ``scale`` a per-parameter magnitude such as
    the path signal norm divided by the step (defaults to 1).
    """
    a = analytic.reshape(-1, analytic.shape[-1])
    r = reference.reshape(-1, reference.shape[-1])
    num = np.linalg.norm(a - r, axis=0)
    den = np.linalg.norm(r, axis=0)
    s = np.ones(a.shape[1]) if scale is None else np.broadcast_to(np.asarray(scale, float), (a.shape[1],))
    zero = ~np.any(a != 0, axis=0)
    out = np.where(den > 0, num / np.where(den > 0, den, 1.0), num)
    return np.where(zero, den / s, out)


def derivative_check(scenario: Scenario, params: Sequence | None = None,
                     eta: ParamVector | None = None, model: str = "near",
                     rule: str = "extrapolated"):
    """Analytic-vs-FD relative errors per parameter.

    Returns
    -------
    keys : list of (path, name)
    errors : ndarray
    """
    eta = true_channel_params(scenario) if eta is None else eta
    keys = [p.key for p in eta.index] if params is None else [_key(p) for p in params]
    a = signal_derivatives(scenario, keys, eta, model)
    f = fd_signal_derivatives(scenario, keys, eta, model, rule)
    norms = {m: np.linalg.norm(received_signal(scenario, eta, model, paths=[m])) for m in {k[0] for k in keys}}
    scale = np.array([max(norms[k[0]], 1e-300) / fd_step(k[1], eta[k], rule) for k in keys])
    return keys, relative_errors(a, f, scale)


# ---------------------------------------------------------------------------
# Fisher information containers


@dataclass
class Fim:
    """Real symmetric information matrix with a parameter index map.

    ``factor`` (optional) is a real matrix with ``factor.T @ factor == matrix``.
    """

    matrix: np.ndarray
    index: list
    factor: np.ndarray | None = None
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        n = len(self.index)
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix shape {self.matrix.shape} does not match {n} labels")
        self.index = [ParamIndex(*_key(p), i) for i, p in enumerate(self.index)]
        self._pos = {p.key: i for i, p in enumerate(self.index)}

    @classmethod
    def from_factor(cls, factor: np.ndarray, index) -> "Fim":
        J = factor.T @ factor
        return cls(0.5 * (J + J.T), index, factor)

    @property
    def keys(self) -> list[tuple[int, str]]:
        return [p.key for p in self.index]

    @property
    def size(self) -> int:
        return len(self.index)

    def positions(self, keys) -> list[int]:
        try:
            return [self._pos[_key(k)] for k in keys]
        except KeyError as e:
            raise KeyError(f"parameter {e.args[0]} not in FIM") from None

    def sub(self, keys) -> "Fim":
        """Principal submatrix on ``keys`` (no marginalization)."""
        idx = self.positions(keys)
        fac = None if self.factor is None else self.factor[:, idx]
        return Fim(self.matrix[np.ix_(idx, idx)], [self.index[i] for i in idx], fac)

    def drop(self, keys) -> "Fim":
        gone = {_key(k) for k in keys}
        return self.sub([k for k in self.keys if k not in gone])

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def efim(self, interest, pinv: bool = False) -> "Fim":
        return efim(self, interest, pinv=pinv)

    def estimability(self, tol: float = DEFAULT_TOL, parent_scale: float | None = None) -> "Estimability":
        return estimability(self, tol, parent_scale)

    def inverse(self) -> np.ndarray:
        """Inverse, from the factor when available (avoids squaring the condition number)."""
        if self.factor is None:
            return _equilibrated_inverse(self.matrix)
        return _factor_inverse(self.factor)

    def symmetry_error(self) -> float:
        nrm = np.linalg.norm(self.matrix)
        return float(np.linalg.norm(self.matrix - self.matrix.T) / nrm) if nrm > 0 else 0.0


def _equilibrated_inverse(J: np.ndarray) -> np.ndarray:
    d = np.sqrt(np.abs(np.diag(J)))
    if np.any(d == 0):
        raise np.linalg.LinAlgError("matrix has a zero diagonal entry")
    Js = J / np.outer(d, d)
    Jsi = sla.solve(Js, np.eye(J.shape[0]), assume_a="sym")
    inv = Jsi / np.outer(d, d)
    return 0.5 * (inv + inv.T)


def _factor_inverse(G: np.ndarray) -> np.ndarray:
    s = np.linalg.norm(G, axis=0)
    if np.any(s == 0):
        raise np.linalg.LinAlgError("matrix has a zero diagonal entry")
    R = np.linalg.qr(G / s, mode="r")
    if R.shape[0] < R.shape[1] or np.any(np.abs(np.diag(R)) < np.finfo(float).eps * np.abs(R).max()):
        raise np.linalg.LinAlgError("factor is rank deficient")
    Ri = sla.solve_triangular(R, np.eye(R.shape[1]))
    inv = (Ri @ Ri.T) / np.outer(s, s)
    return 0.5 * (inv + inv.T)


# ---------------------------------------------------------------------------
# observation FIM and priors


def observation_fim(scenario: Scenario, params: Sequence | None = None,
                    eta: ParamVector | None = None, model: str = "near") -> Fim:
    """``J = 2 snr sum_{t,u,n} Re{dmu^H dmu}`` with its real factor."""
    eta = true_channel_params(scenario) if eta is None else eta
    keys = [p.key for p in eta.index] if params is None else [_key(p) for p in params]
    D = signal_derivatives(scenario, keys, eta, model).reshape(-1, len(keys))
    G = math.sqrt(2 * scenario.snr) * np.vstack([D.real, D.imag])
    return Fim.from_factor(G, select(eta.index, keys))


@dataclass
class PriorSpec:
    """Diagonal prior information, stored as fractions of a reference SNR.

    ``fractions`` maps (path, name) keys to nonnegative scalars; the prior
    information of a parameter is ``fraction * snr``.
    """

    fractions: dict
    snr: float = 1.0

    def __post_init__(self):
        self.fractions = {_key(k): float(v) for k, v in self.fractions.items()}
        for k, v in self.fractions.items():
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"prior for {k[1]}[{k[0]}] must be finite and nonnegative")

    @classmethod
    def absolute(cls, values: dict) -> "PriorSpec":
        return cls(values, 1.0)

    def information(self) -> dict:
        return {k: v * self.snr for k, v in self.fractions.items()}


def bayesian_fim(obs: Fim, prior: PriorSpec | None) -> Fim:
    """Add the diagonal prior to ``obs``; prior-only parameters are appended."""
    if prior is None:
        return Fim(obs.matrix.copy(), list(obs.index),
                   None if obs.factor is None else obs.factor.copy())
    info = prior.information()
    extra = [k for k in info if k not in obs._pos]
    keys = obs.keys + extra
    n = len(keys)
    J = np.zeros((n, n))
    J[: obs.size, : obs.size] = obs.matrix
    xi = np.array([info.get(k, 0.0) for k in keys])
    J[np.diag_indices(n)] += xi
    fac = None
    if obs.factor is not None:
        top = np.hstack([obs.factor, np.zeros((obs.factor.shape[0], len(extra)))])
        nz = np.flatnonzero(xi)
        rows = np.zeros((nz.size, n))
        rows[np.arange(nz.size), nz] = np.sqrt(xi[nz])
        fac = np.vstack([top, rows])
    return Fim(J, keys, fac)


# ---------------------------------------------------------------------------
# EFIM and estimability


def _scaled_eig(C: np.ndarray):
    d = np.sqrt(np.abs(np.diag(C)))
    if np.any(d == 0):
        return d, None
    w = np.linalg.eigvalsh(C / np.outer(d, d))
    return d, w


def nuisance_is_singular(C: np.ndarray, tol: float = DEFAULT_TOL) -> bool:
    """Singularity test on the Jacobi-equilibrated block."""
    if C.size == 0:
        return False
    d, w = _scaled_eig(C)
    return w is None or w[0] <= tol * w[-1]


def efim(J: Fim, interest: Iterable, pinv: bool = False, tol: float = DEFAULT_TOL) -> Fim:
    """Equivalent FIM ``A - B C^-1 B^T`` of the ``interest`` parameters.

    When ``J`` carries a factor the reduction is computed from a QR
    factorization of ``[G_nuisance, G_interest]``, giving ``R_II^T R_II``.

    Raises
    ------
    NuisanceSingularError
        If the nuisance block is singular and ``pinv`` is False. With
        ``pinv=True`` the pseudo-inverse is used and ``flags['pinv']`` is set.
    """
    keys = [_key(k) for k in interest]
    ii = J.positions(keys)
    iset = set(ii)
    nn = [i for i in range(J.size) if i not in iset]
    A = J.matrix[np.ix_(ii, ii)]
    labels = [J.index[i] for i in ii]
    if not nn:
        return Fim(A.copy(), labels, None if J.factor is None else J.factor[:, ii])
    C = J.matrix[np.ix_(nn, nn)]
    Bm = J.matrix[np.ix_(ii, nn)]
    singular = nuisance_is_singular(C, tol)
    if singular and not pinv:
        names = ", ".join(str(J.index[i]) for i in nn)
        raise NuisanceSingularError(f"nuisance-singular: block over [{names}] is not invertible")
    if singular:
        d = np.sqrt(np.abs(np.diag(C)))
        d[d == 0] = 1.0
        Ci = np.linalg.pinv(C / np.outer(d, d), rcond=tol, hermitian=True) / np.outer(d, d)
        E = A - Bm @ Ci @ Bm.T
        out = Fim(0.5 * (E + E.T), labels)
        out.flags["pinv"] = True
        return out
    if J.factor is not None:
        G = J.factor[:, nn + ii]
        if G.shape[0] < G.shape[1]:
            G = np.vstack([G, np.zeros((G.shape[1] - G.shape[0], G.shape[1]))])
        # column scaling keeps the factorization well balanced
        s = np.linalg.norm(G, axis=0)
        s[s == 0] = 1.0
        R = np.linalg.qr(G / s, mode="r")
        Rii = R[len(nn):, len(nn):] * s[len(nn):]
        E = Rii.T @ Rii
        return Fim(0.5 * (E + E.T), labels, Rii)
    d = np.sqrt(np.diag(C))
    X = sla.solve(C / np.outer(d, d), (Bm / d).T, assume_a="pos") / d[:, None]
    E = A - Bm @ X
    return Fim(0.5 * (E + E.T), labels)


@dataclass
class Estimability:
    """Result of a positive-definiteness test."""

    estimatable: bool
    lambda_min: float
    lambda_max: float
    null_direction: np.ndarray
    reason: str = ""
    numerically_zero: bool = False

    @property
    def ratio(self) -> float:
        """``lambda_min / lambda_max``; 0 for a numerically zero matrix."""
        if self.numerically_zero or self.lambda_max <= 0:
            return 0.0
        return self.lambda_min / self.lambda_max

    @property
    def verdict(self) -> str:
        return "estimatable" if self.estimatable else "rank-deficient"


ROUNDOFF_FLOOR = 1e-13


def estimability(J, tol: float = DEFAULT_TOL, parent_scale: float | None = None,
                 floor: float = ROUNDOFF_FLOOR) -> Estimability:
    """Positive-definiteness verdict ``lambda_min > tol * lambda_max``.

    A zero diagonal entry is rank-deficient immediately. For a reduced
    (EFIM) matrix pass ``parent_scale``, the largest eigenvalue of the block
    it was reduced from: the reduction carries absolute round-off of order
    ``eps * parent_scale``, so a matrix whose largest eigenvalue is below
    ``floor * parent_scale`` is numerically zero, and ``lambda_min`` must also
    clear that floor.
    """
    M = J.matrix if isinstance(J, Fim) else np.asarray(J, float)
    n = M.shape[0]
    diag = np.diag(M)
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    lmax = float(w[-1]) if n else 0.0
    zero = np.flatnonzero(diag == 0)
    if zero.size:
        e = np.zeros(n)
        e[zero[0]] = 1.0
        return Estimability(False, float(min(w[0], 0.0)), lmax, e, "zero diagonal entry")
    lo = floor * parent_scale if parent_scale is not None else 0.0
    if lmax <= lo or lmax <= 0:
        return Estimability(False, float(w[0]), lmax, V[:, 0], "numerically zero matrix", True)
    ok = bool(w[0] > tol * lmax and w[0] > lo)
    return Estimability(ok, float(w[0]), lmax, V[:, 0], "" if ok else "lambda_min below tolerance")
