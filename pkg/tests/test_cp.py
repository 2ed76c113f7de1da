import math

import numpy as np
import pytest

import oracles
from qubit_channels import (
    AffineChannel,
    ConsistencyError,
    NotCompletelyPositiveError,
    PhaseFlip,
    Unitary,
    Verdict,
    choi,
    choi_rotated,
    compose,
    cp_report,
    fac_unital,
    gfa_general,
    is_cp,
    kraus_decomposition,
    make_generator,
    sample_channel,
)
from qubit_channels import cp as cp_module
from qubit_channels.channel import InvalidParameterError, apply, bloch_from_density, density_from_bloch, extremal_channel
from qubit_channels.cp import apply_kraus, gfa_arrays, q_values

FRAME = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]


# --- Choi matrix -----------------------------------------------------------------


def test_choi_identity():
    C = choi(AffineChannel.identity())
    np.testing.assert_allclose(C, [[1, 0, 0, 1], [0, 0, 0, 0], [0, 0, 0, 0], [1, 0, 0, 1]], atol=1e-15)
    np.testing.assert_allclose(np.linalg.eigvalsh(C), [0, 0, 0, 2], atol=1e-15)
    np.testing.assert_allclose(choi(AffineChannel.identity(), normalize=True), C / 2)


def test_choi_diagonal_entries():
    lam, t = np.array([0.3, -0.2, 0.5]), np.array([0.1, 0.2, -0.3])
    C = choi(AffineChannel.diagonal(lam, t))
    assert C[0, 0] == pytest.approx((1 + lam[2] + t[2]) / 2)
    assert C[0, 2] == pytest.approx((t[0] + 1j * t[1]) / 2)
    assert C[0, 3] == pytest.approx((lam[0] + lam[1]) / 2)
    assert C[1, 2] == pytest.approx((lam[0] - lam[1]) / 2)
    C1 = choi(AffineChannel.diagonal([1, 1, 1]))
    assert C1[0, 0] == 1 and C1[0, 3] == 1


def test_choi_eigenvalues_are_twice_q():
    eigs = np.linalg.eigvalsh(choi(AffineChannel.diagonal([0.6, 0.4, 0.2])))
    np.testing.assert_allclose(eigs, [0.1, 0.3, 0.5, 1.1], atol=1e-15)
    np.testing.assert_allclose(2 * q_values([0.6, 0.4, 0.2]), [1.1, 0.5, 0.3, 0.1], atol=1e-15)


def test_choi_matches_state_oracle(rng):
    for _ in range(200):
        M, t = rng.normal(size=(3, 3)), rng.normal(size=3)
        C = choi(AffineChannel(M, t))
        np.testing.assert_allclose(C, np.conj(oracles.choi_standard(M, t)), atol=1e-14)
        np.testing.assert_allclose(C, C.conj().T, atol=1e-15)
        assert np.trace(C).real == pytest.approx(2, abs=1e-14)


def test_choi_rotated_unital_is_diagonal():
    lam = [0.6, -0.4, 0.2]
    Cr = choi_rotated(AffineChannel.diagonal(lam))
    np.testing.assert_allclose(Cr, np.diag(2 * q_values(lam)), atol=1e-15)


def test_choi_rotated_translation_pattern():
    Cr = choi_rotated(AffineChannel.diagonal([0.5, 0.5, 0.25], [0, 0, 0.75]))
    assert Cr[0, 3] == pytest.approx(0.375)
    lam, t = np.array([0.3, 0.1, -0.2]), np.array([0.1, 0.2, 0.3])
    q = q_values(lam)
    expected = 0.5 * np.array(
        [
            [4 * q[0], t[0], t[1], t[2]],
            [t[0], 4 * q[1], 1j * t[2], -1j * t[1]],
            [t[1], -1j * t[2], 4 * q[2], 1j * t[0]],
            [t[2], 1j * t[1], -1j * t[0], 4 * q[3]],
        ]
    )
    np.testing.assert_allclose(choi_rotated(AffineChannel.diagonal(lam, t)), expected, atol=1e-15)


def test_choi_rotated_similarity(rng):
    R = cp_module.BELL_ROTATION
    np.testing.assert_allclose(R @ R.conj().T, np.eye(4), atol=1e-15)
    for _ in range(100):
        ch = AffineChannel.diagonal(rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3))
        np.testing.assert_allclose(choi_rotated(ch), R @ np.conj(oracles.choi_standard(ch.M, ch.t)) @ R.conj().T, atol=1e-13)


def test_choi_rotated_needs_diagonal():
    with pytest.raises(InvalidParameterError):
        choi_rotated(make_generator(Unitary((1, 1, 0), 0.3)))


# --- Kraus -------------------------------------------------------------------------


def check_kraus(ch, ops):
    np.testing.assert_allclose(sum(A.conj().T @ A for A in ops), np.eye(2), atol=1e-10)
    for r in FRAME:
        out = bloch_from_density(apply_kraus(ops, density_from_bloch(r)))
        np.testing.assert_allclose(out, apply(ch, r), atol=1e-10)


def test_kraus_phase_flip():
    t = 0.3
    ch = make_generator(PhaseFlip(t))
    ops = kraus_decomposition(ch)
    assert len(ops) == 2
    check_kraus(ch, ops)
    # up to phases: sqrt(1 - t) I and sqrt(t) Z
    for A, expected in zip(ops, [math.sqrt(1 - t) * np.eye(2), math.sqrt(t) * np.diag([1, -1])]):
        phase = np.vdot(expected, A) / abs(np.vdot(expected, A))
        np.testing.assert_allclose(A, phase * expected, atol=1e-12)


def test_kraus_identity_and_extremal():
    ops = kraus_decomposition(AffineChannel.identity())
    assert len(ops) == 1
    np.testing.assert_allclose(np.abs(ops[0]), np.eye(2), atol=1e-14)
    ch = extremal_channel(math.pi / 4, math.pi / 3)
    ops = kraus_decomposition(ch)
    assert len(ops) == 2
    check_kraus(ch, ops)


def test_kraus_random_channels():
    for seed in range(200):
        ch = sample_channel(seed, "general")
        ops = kraus_decomposition(ch)
        assert len(ops) == oracles.kraus_rank(ch.M, ch.t)
        check_kraus(ch, ops)


def test_kraus_rejects_non_cp():
    with pytest.raises(NotCompletelyPositiveError) as info:
        kraus_decomposition(AffineChannel.diagonal([-1, -1, -1]))
    assert info.value.min_eigenvalue == pytest.approx(-1.0)


# --- unital test --------------------------------------------------------------------


def test_fac_identity_vertex():
    report = fac_unital([1, 1, 1])
    np.testing.assert_allclose(report.q, [1, 0, 0, 0])
    assert report.verdict is Verdict.BOUNDARY and report.verdict.is_cp


def test_fac_inversion_is_not_cp():
    report = fac_unital([-1, -1, -1])
    assert report.q[0] == pytest.approx(-0.5)
    assert report.verdict is Verdict.NOT_CP


def test_fac_face_centre():
    report = fac_unital([-1 / 3, -1 / 3, -1 / 3])
    np.testing.assert_allclose(report.q, [0, 1 / 3, 1 / 3, 1 / 3], atol=1e-15)
    assert report.verdict.is_cp
    assert report.r is None and report.bound is None and report.unital


def test_fac_matches_absolute_value_inequalities(rng):
    for _ in range(2000):
        lam = rng.uniform(-1.05, 1.05, 3)
        l1, l2, l3 = lam
        report = fac_unital(lam)
        margins = [1 + l3 - abs(l1 + l2), 1 - l3 - abs(l1 - l2)]
        if min(margins) > 1e-9:
            assert report.verdict is Verdict.CP
        elif min(margins) < -1e-9:
            assert report.verdict is Verdict.NOT_CP
        assert np.sum(report.q) == pytest.approx(1, abs=1e-12)


# --- general test ---------------------------------------------------------------------


def test_gfa_boundary_example():
    report = gfa_general([0.5, 0.5, 0.25], [0, 0, 0.75])
    assert report.r == pytest.approx(0.5625, abs=1e-15)
    assert report.q_prod == pytest.approx(0.31640625, abs=1e-15)
    assert report.r**2 - report.q_prod == pytest.approx(0, abs=1e-15)
    assert report.bound == pytest.approx(0.5625, abs=1e-15)
    assert report.verdict is Verdict.BOUNDARY
    assert oracles.min_choi_eig(np.diag([0.5, 0.5, 0.25]), [0, 0, 0.75]) == pytest.approx(0, abs=1e-14)


def test_gfa_not_cp_example():
    report = gfa_general([0.6, 0.4, 0.2], [0, 0, 0.67])
    assert report.r == pytest.approx(0.52, abs=1e-15)
    assert report.q_prod == pytest.approx(0.264, abs=1e-15)
    assert math.sqrt(report.r**2 - report.q_prod) == pytest.approx(0.08, abs=1e-12)
    assert math.sqrt(report.bound) == pytest.approx(0.66332, abs=5e-6)
    assert report.verdict is Verdict.NOT_CP
    assert oracles.min_choi_eig(np.diag([0.6, 0.4, 0.2]), [0, 0, 0.67]) < 0


def test_gfa_constant_mixed_output():
    report = gfa_general([0, 0, 0], [0, 0, 0.5])
    np.testing.assert_allclose(report.q, [0.25] * 4)
    assert (report.r, report.q_prod, report.bound) == pytest.approx((1, 1, 1))
    assert report.verdict is Verdict.CP


def test_gfa_delegates_for_zero_translation():
    report = gfa_general([0.5, 0.3, 0.2], [0, 0, 0])
    assert report.unital and report.r is None


def test_gfa_upper_root_is_flagged():
    # lambda = (0.6, 0.4, 0.2) along z: r = 0.52, sqrt(r^2 - q) = 0.08, upper root 0.6
    report = gfa_general([0.6, 0.4, 0.2], [0, 0, math.sqrt(0.6)])
    assert report.upper_root_contact
    assert report.verdict is Verdict.NOT_CP
    assert not gfa_general([0.6, 0.4, 0.2], [0, 0, 0.5]).upper_root_contact


def test_characteristic_polynomial_vanishes_at_spectrum():
    for seed in range(300):
        ch = sample_channel(seed, "general", rotate=False)
        report = gfa_general(np.diag(ch.M), ch.t)
        eigs = oracles.choi_eigs(ch.M, ch.t)
        assert np.max(np.abs(report.char_poly(eigs))) < 1e-10
        assert np.sum(report.q) == pytest.approx(1, abs=1e-12)


def test_discriminant_is_non_negative_and_r_bounded_below(rng):
    for _ in range(2000):
        lam = oracles.tetrahedron_lambda(rng)
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        g = gfa_arrays(lam, u)
        direct = g["r"] ** 2 - g["q_prod"]
        assert direct >= -1e-12 and g["disc"] >= -1e-15
        assert g["disc"] == pytest.approx(direct, abs=1e-12)
        small = np.argmin(np.abs(lam))
        others = np.delete(lam, small)
        r_min = 1 - np.sum(others**2) + lam[small] ** 2
        assert g["r"] >= r_min - 1e-12


def test_special_case_sqrt(rng):
    for _ in range(1000):
        lam = oracles.tetrahedron_lambda(rng)
        t = [0, 0, rng.uniform(-1, 1)]
        g = gfa_arrays(lam, t)
        assert math.sqrt(g["disc"]) == pytest.approx(2 * abs(lam[2] - lam[0] * lam[1]), abs=1e-12)


# --- is_cp -------------------------------------------------------------------------------


def test_is_cp_unitary_is_boundary():
    ch = make_generator(Unitary((1, 2, 2), 0.4))
    assert is_cp(ch) is Verdict.BOUNDARY
    assert np.sum(np.abs(oracles.choi_eigs(ch.M, ch.t)) < 1e-12) == 3


def test_is_cp_sampled_general():
    for seed in range(200):
        assert is_cp(sample_channel(seed, "general")).is_cp


def test_is_cp_matches_oracle_example():
    ch = AffineChannel.diagonal([0.9, 0.9, 0.9], [0.3, 0, 0])
    oracle = oracles.min_choi_eig(ch.M, ch.t)
    assert oracle < -1e-10
    assert is_cp(ch) is Verdict.NOT_CP


def test_is_cp_random_rotated_maps(rng):
    for _ in range(1000):
        M = oracles.random_rotation(rng) @ np.diag(rng.uniform(-1, 1, 3)) @ oracles.random_rotation(rng)
        t = rng.uniform(-0.7, 0.7, 3)
        ch = AffineChannel(M, t)
        oracle = oracles.min_choi_eig(M, t)
        verdict = is_cp(ch)
        if oracle > 1e-9:
            assert verdict is Verdict.CP
        elif oracle < -1e-9:
            assert verdict is Verdict.NOT_CP


def test_is_cp_raises_on_disagreement(monkeypatch):
    monkeypatch.setattr(cp_module, "choi_eigenvalues", lambda ch: np.array([-0.5, 0.5, 0.5, 1.5]))
    with pytest.raises(ConsistencyError):
        is_cp(AffineChannel.diagonal([0.5, 0.5, 0.5]))


def test_cp_closed_under_composition():
    rng = np.random.default_rng(5)
    kinds = ("unital", "general", "extremal")
    for _ in range(10_000):
        a = sample_channel(rng, kinds[rng.integers(3)])
        b = sample_channel(rng, kinds[rng.integers(3)])
        ab = compose(a, b)
        assert oracles.min_choi_eig(ab.M, ab.t) >= -1e-10


def test_report_serializes():
    d = cp_report(AffineChannel.diagonal([0.5, 0.5, 0.25], [0, 0, 0.75])).to_dict()
    assert d["verdict"] == "Boundary"
    assert set(d) >= {"q", "r", "q_prod", "bound", "a", "b", "detC", "choi_eigs", "verdict", "unital"}
