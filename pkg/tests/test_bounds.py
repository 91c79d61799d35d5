import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from risloc.bounds import (
    BoundReport,
    channel_efim,
    evaluate_case,
    fd_location_jacobian,
    full_case,
    lemma3_certificate,
    lemma4_block_fim,
    lemma4_certificate,
    link_gradients,
    location_jacobian,
    location_layout,
    location_prior_fim,
    peb_oeb,
    theorem2_certificate,
    ue_location_efim,
    ue_location_efim_bruteforce,
    with_ris_count,
    with_ue_count,
)
from risloc.channel import SPEED_OF_LIGHT, true_channel_params
from risloc.config import build_scenario, random_config
from risloc.fim import Fim, observation_fim
from risloc.geometry import DegenerateGeometryError
from risloc.params import RIS_GEOMETRIC, RIS_ORIENTATION

# first verified runs on the paper-v preset, frozen (relative tolerance 1e-10)
BASELINE = {
    ("a", "near", 4, 0.0): ("oeb", 0.022804633119445885),
    ("a", "near", 4, 0.1): ("oeb", 0.02279777728317751),
    ("a", "far", 4, 0.1): ("oeb", 1.484817005394658),
    ("b", "near", 16, 0.0): ("oeb", 0.016290662913177902),
    ("c", "near", 16, 0.0): ("peb", 0.03220703125093826),
    ("d", "near", 4, 0.0): ("peb", 0.06989433011388267),
    ("d", "near", 16, 0.0): ("peb", 0.005536836335268186),
    ("e", "near", 16, 0.0): ("peb", 0.0017622096400471388),
}


# link gradients and transformation matrix


def test_delay_gradient_is_unit_direction_over_c():
    src, dst = np.array([1.0, 2.0, 0.5]), np.array([4.0, -2.0, 3.0])
    g = link_gradients(src, dst)
    delta = (dst - src) / np.linalg.norm(dst - src)
    assert np.allclose(g[:, 2], delta / SPEED_OF_LIGHT, rtol=1e-14)


@settings(max_examples=50)
@given(st.tuples(*[st.floats(-5, 5)] * 3), st.tuples(*[st.floats(-5, 5)] * 3))
def test_link_gradients_match_central_differences(a, b):
    from risloc.geometry import direction_angles

    src, dst = np.array(a), np.array(b)
    w = dst - src
    if np.linalg.norm(w) < 0.5 or np.hypot(w[0], w[1]) < 0.2:
        return
    g = link_gradients(src, dst)
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        hi, lo = direction_angles(src, dst + e), direction_angles(src, dst - e)
        fd = [(hi.theta - lo.theta) / (2 * h),
              math.remainder(hi.phi - lo.phi, 2 * math.pi) / (2 * h),
              (hi.distance - lo.distance) / (2 * h * SPEED_OF_LIGHT)]
        assert np.allclose(g[i], fd, rtol=1e-5, atol=1e-7 * np.abs(g).max())


def test_pole_link_raises():
    with pytest.raises(DegenerateGeometryError):
        link_gradients([0.0, 0.0, 0.0], [0.0, 0.0, 3.0])


def test_legacy_gradient_disagrees_with_fd():
    src, dst = np.array([10.0, 8.0, 4.0]), np.array([12.0, 10.0, 3.0])
    assert not np.allclose(link_gradients(src, dst, legacy=True), link_gradients(src, dst), rtol=1e-3)


@pytest.mark.parametrize("scheme", ["kappa", "zeta"])
def test_full_jacobian_matches_fd(cfg, scheme):
    sc = build_scenario(cfg.with_(case="full"), include_los=True)
    spec = full_case(2, scheme)
    keys = [(m, g) for m, geo in spec.channel.items() for g in geo]
    Y = location_jacobian(sc, keys, scheme=scheme)
    F = fd_location_jacobian(sc, keys, scheme=scheme)
    assert Y.matrix.shape == (18, len(keys))
    err = np.linalg.norm(Y.matrix - F.matrix, axis=0)
    ref = np.linalg.norm(F.matrix, axis=0)
    rel = np.where(ref > 0, err / np.where(ref > 0, ref, 1), err)
    assert rel.max() < 1e-5


def test_location_layout_dimensions():
    lay = location_layout(2)
    assert len(lay) == 18
    assert sum(1 for k in lay if k[0] == 0) == 6


# location prior


def test_location_prior_examples(scenario):
    keys = location_layout(2)
    assert not np.any(location_prior_fim(keys).matrix)
    snr = scenario.snr
    ori = {(m, n): 10 * snr for m in (1, 2) for n in ("yaw", "pitch", "roll")}
    P = location_prior_fim(keys, ori).matrix
    for m in (1, 2):
        idx = [i for i, k in enumerate(keys) if k[0] == m]
        assert np.count_nonzero(np.diag(P)[idx]) == 3
    assert np.count_nonzero(P - np.diag(np.diag(P))) == 0


def test_location_prior_cross_block():
    keys = location_layout(1)
    C = np.arange(36.0).reshape(6, 6)
    P = location_prior_fim(keys, cross={1: C}).matrix
    assert np.array_equal(P[:6, 6:], C) and np.array_equal(P[6:, :6], C.T)
    with pytest.raises(ValueError):
        location_prior_fim(keys, cross={1: np.ones((6, 5))})
    with pytest.raises(KeyError):
        location_prior_fim(keys, {(3, "yaw"): 1.0})


# UE location EFIM


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.mark.parametrize("case", ["c", "d", "e"])
def test_lemma_form_matches_bruteforce_cases(cfg, case):
    r = evaluate_case(cfg.with_(case=case))
    bf = ue_location_efim_bruteforce(r.channel, r.jacobian, r.location_prior)
    assert r.efim.size == 3
    assert _rel(r.efim.matrix, bf.matrix) < 1e-8


@pytest.mark.parametrize("prior", [1e-3, 1.0, 1e3])
def test_lemma_form_matches_bruteforce_full(cfg, prior):
    c = cfg.with_(case="full", prior=replace(cfg.prior, ris_orientation=prior, ris_position=prior))
    r = evaluate_case(c)
    bf = ue_location_efim_bruteforce(r.channel, r.jacobian, r.location_prior)
    assert r.efim.size == 6
    assert _rel(r.efim.matrix, bf.matrix) < 1e-8


def test_infinite_ris_prior_removes_subtrahend(cfg):
    c = cfg.with_(case="full", prior=replace(cfg.prior, ris_orientation=1e15, ris_position=1e15))
    r = evaluate_case(c)
    ue = [k for k in r.jacobian.rows if k[0] == 0]
    direct = sum(r.jacobian.block(ue, Je.keys) @ Je.matrix @ r.jacobian.block(ue, Je.keys).T
                 for Je in r.channel.values())
    assert _rel(r.efim.matrix, direct) < 1e-6


def test_zero_ris_priors_without_los_carry_no_ue_information(cfg):
    # RIS paths alone cannot separate the UE pose from the unknown RIS poses
    sc = build_scenario(cfg.with_(case="full"), include_los=False)
    spec = full_case(2, include_los=False)
    ch = {m: channel_efim(sc, m, g, pinv=True) for m, g in spec.channel.items()}
    keys = [k for Je in ch.values() for k in Je.keys]
    jac = location_jacobian(sc, keys)
    ue = ue_location_efim(ch, jac)
    rep = peb_oeb(ue.fim, sc.snr, parent_scale=ue.scale)
    assert rep.verdict == "rank-deficient"
    assert math.isnan(rep.peb) and math.isnan(rep.oeb)


def test_ue_efim_lambda_min_monotone_in_ris_prior(cfg):
    lam = []
    for p in (0.01, 0.1, 1.0, 10.0):
        c = cfg.with_(case="full", prior=replace(cfg.prior, ris_orientation=p, ris_position=p))
        lam.append(np.linalg.eigvalsh(evaluate_case(c).efim.matrix)[0])
    assert all(b >= a * (1 - 1e-9) for a, b in zip(lam, lam[1:]))


# PEB / OEB


def _loc_fim(d):
    names = ("px", "py", "pz", "yaw", "pitch", "roll")
    return Fim(np.diag(d), [(0, n) for n in names])


def test_peb_oeb_identity():
    r = peb_oeb(_loc_fim([1.0] * 6))
    assert r.peb == pytest.approx(math.sqrt(3)) and r.oeb == pytest.approx(math.sqrt(3))


def test_peb_oeb_diagonal():
    r = peb_oeb(_loc_fim([4.0, 4, 4, 1, 1, 1]))
    assert r.peb == pytest.approx(math.sqrt(0.75)) and r.oeb == pytest.approx(math.sqrt(3))
    assert r.defined and isinstance(r, BoundReport)


def test_peb_oeb_singular_is_undefined():
    r = peb_oeb(_loc_fim([4.0, 4, 0, 1, 1, 1]))
    assert r.verdict == "rank-deficient" and not r.defined
    assert math.isnan(r.peb) and math.isnan(r.oeb)
    assert abs(r.null_direction[2]) == 1.0


@pytest.mark.parametrize("key", sorted(BASELINE))
def test_paper_v_regression(cfg, key):
    case, regime, n_u, prior = key
    what, value = BASELINE[key]
    c = with_ue_count(cfg.with_(case=case, regime=regime, prior=replace(cfg.prior, ris_orientation=prior)), n_u)
    rep = evaluate_case(c).report
    assert rep.verdict == "estimatable"
    assert getattr(rep, what) == pytest.approx(value, rel=1e-10)


def test_information_additivity_e_below_c_and_d(cfg):
    for n in (4, 16):
        peb = {k: evaluate_case(with_ue_count(cfg.with_(case=k), n)).report.peb for k in "cde"}
        assert peb["e"] <= min(peb["c"], peb["d"])


# certificates


def test_lemma3_certificate_passes(cfg):
    cert = lemma3_certificate(cfg)
    assert cert.passed, cert.lines()
    assert [r["n_u"] for r in cert.rows] == [1, 4, 16, 64]


def test_far_field_gain_prior_restores_at_most_rank_two(cfg):
    # the orientation enters the far-field response through one complex
    # scalar, so a gain prior exposes two real directions out of three
    c = cfg.with_(regime="far", case="a")
    for g in (0.1, 1.0):
        res = evaluate_case(c.with_(prior=replace(c.prior, gain=g)))
        w = np.linalg.eigvalsh(res.efim.matrix)
        assert w[1] > 1e-6 * w[-1]
        assert abs(w[0]) < 1e-10 * w[-1]
        assert res.report.verdict == "rank-deficient"


def test_block_construction_matches_generic_fim(cfg):
    for n in (1, 4):
        sc = build_scenario(with_ue_count(cfg.with_(case="a"), n), include_los=False)
        keys = [(1, k) for k in RIS_ORIENTATION] + [(1, "beta_re"), (1, "beta_im")]
        J = observation_fim(sc, keys).matrix
        assert _rel(lemma4_block_fim(sc).matrix, J) < 1e-8


def test_lemma4_rows_single_and_many_antennas(cfg):
    cert = lemma4_certificate(cfg, n_u_values=(1, 4, 16))
    assert cert.passed, cert.lines()
    assert cert.rows[0]["observed"] == "singular"


def test_two_antenna_narrowband_orientation_is_underdetermined(cfg):
    # four real observations per symbol against five unknowns
    cert = lemma4_certificate(cfg, n_u_values=(2,))
    assert cert.rows[0]["observed"] == "singular"


def test_theorem2_paper_v(cfg):
    cert = theorem2_certificate(cfg)
    assert cert.passed, cert.lines()
    assert cert.rows[0]["jacobian_diff"] == 0.0


def test_theorem2_random_scenarios():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        c = random_config(rng, n_ris=int(rng.integers(1, 3)))
        sc = build_scenario(c.with_(case="full"), include_los=True)
        spec = full_case(sc.n_ris)
        keys = [(m, g) for m, geo in spec.channel.items() for g in geo]
        Yk = location_jacobian(sc, keys, location_layout(sc.n_ris, "kappa"), "kappa")
        Yz = location_jacobian(sc, keys, location_layout(sc.n_ris, "zeta"), "zeta")
        assert np.array_equal(Yk.matrix, Yz.matrix)
        cert = theorem2_certificate(c)
        assert cert.passed, cert.lines()


def test_count_helpers(cfg):
    assert with_ue_count(cfg, 9).ue.count == 9
    assert with_ris_count(cfg, 36).ris[0].count == 36
    assert with_ris_count(cfg, 36).ris[1].count == 121


def test_ris_geometric_layout_channel_keys(scenario):
    eta = true_channel_params(scenario)
    assert [k[1] for k in eta.index if k[0] == 1][: len(RIS_GEOMETRIC)] == list(RIS_GEOMETRIC)
