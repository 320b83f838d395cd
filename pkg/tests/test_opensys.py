import numpy as np
import pytest

from spinflip import (FieldTriple, LindbladParams, NoiseParams, bloch_rhs,
                      build_heff, ensemble_average, fidelity, fidelity_from_w,
                      lindblad_step_rhs, noise_bloch_rhs, noise_master_rhs,
                      perturbative_bound, propagate_bloch, propagate_density,
                      propagate_master, propagate_schrodinger, sse_trajectory,
                      xonly_hprime)
from spinflip.core import IDENTITY2
from spinflip.fields import fields_xyz_at
from spinflip.opensys import noise_increments

UP = np.array([1.0, 0.0], dtype=complex)


def dephasing_fidelity_exact(gamma, tf):
    """The -4 gamma decay is isotropic, so it factors out of the rotation:
    w(tf) = -e^{-4 gamma tf} exactly (given a perfect unitary flip)."""
    return np.sqrt((1.0 + np.exp(-4.0 * gamma * tf)) / 2.0)


def check_density_trajectory(traj):
    tr = traj.rho[:, 0, 0] + traj.rho[:, 1, 1]
    assert np.abs(tr - 1.0).max() < 1e-9
    eigmin = min(np.linalg.eigvalsh(traj.rho[i]).min()
                 for i in range(0, traj.rho.shape[0], 100))
    assert eigmin > -1e-9
    purity = np.einsum("nij,nji->n", traj.rho, traj.rho).real
    assert np.diff(purity).max() < 1e-9


class TestLindbladRHS:
    def test_maximally_mixed_fixed_point(self, design, mat):
        h = build_heff(fields_xyz_at(design, 0.3), mat)
        rhs = lindblad_step_rhs(IDENTITY2 / 2, h, 0.7)
        assert np.abs(rhs).max() < 1e-15

    def test_trace_free(self, mat, design):
        rng = np.random.default_rng(8)
        h = build_heff(fields_xyz_at(design, 0.6), mat)
        for _ in range(20):
            psi = rng.normal(size=2) + 1j * rng.normal(size=2)
            psi /= np.linalg.norm(psi)
            rhs = lindblad_step_rhs(np.outer(psi, psi.conj()), h, 0.3)
            assert abs(rhs[0, 0] + rhs[1, 1]) < 1e-15

    def test_purity_conserved_when_gamma_zero(self, mat, design):
        h = build_heff(fields_xyz_at(design, 0.4), mat)
        psi = np.array([0.6, 0.8j])
        rho = np.outer(psi, psi.conj())
        rhs = lindblad_step_rhs(rho, h, 0.0)
        dpurity = 2.0 * np.trace(rho @ rhs).real
        assert abs(dpurity) < 1e-15

    def test_zero_hamiltonian_gives_uniform_bloch_decay(self):
        rng = np.random.default_rng(9)
        gamma = 0.23
        for _ in range(20):
            r = rng.uniform(-0.5, 0.5, 3)
            rho = 0.5 * np.array([[1 + r[2], r[0] + 1j * r[1]],
                                  [r[0] - 1j * r[1], 1 - r[2]]])
            rhs = lindblad_step_rhs(rho, np.zeros((2, 2), dtype=complex), gamma)
            rdot = np.array([(rhs[0, 1] + rhs[1, 0]).real,
                             (-1j * (rhs[0, 1] - rhs[1, 0])).real,
                             (rhs[0, 0] - rhs[1, 1]).real])
            assert np.allclose(rdot, -4.0 * gamma * r, atol=1e-14)


class TestBlochRHS:
    def test_pure_precession(self, mat):
        rdot = bloch_rhs(np.array([0.3, -0.2, 0.5]), FieldTriple(0, 0, 0.15),
                         0.0, mat)
        eta_b0 = mat.eta * 0.15
        assert np.allclose(rdot, [eta_b0 * -0.2, -eta_b0 * 0.3, 0.0])

    def test_zero_field_closed_form(self, mat):
        gamma, dt, n = 0.4, 1e-3, 1000
        r = np.array([0.6, -0.1, 0.3])
        f = FieldTriple(0.0, 0.0, 0.0)
        for _ in range(n):
            k1 = bloch_rhs(r, f, gamma, mat)
            k2 = bloch_rhs(r + dt / 2 * k1, f, gamma, mat)
            k3 = bloch_rhs(r + dt / 2 * k2, f, gamma, mat)
            k4 = bloch_rhs(r + dt * k3, f, gamma, mat)
            r = r + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        expected = np.array([0.6, -0.1, 0.3]) * np.exp(-4 * gamma * dt * n)
        assert np.allclose(r, expected, rtol=1e-10)

    def test_matches_density_form(self, mat, design):
        rng = np.random.default_rng(10)
        gamma = 0.17
        for t in (0.2, 0.55, 0.8):
            fields = fields_xyz_at(design, t)
            h = build_heff(fields, mat)
            r = rng.uniform(-0.4, 0.4, 3)
            rho = 0.5 * np.array([[1 + r[2], r[0] + 1j * r[1]],
                                  [r[0] - 1j * r[1], 1 - r[2]]])
            rhs = lindblad_step_rhs(rho, h, gamma)
            rdot_density = np.array([(rhs[0, 1] + rhs[1, 0]).real,
                                     (-1j * (rhs[0, 1] - rhs[1, 0])).real,
                                     (rhs[0, 0] - rhs[1, 1]).real])
            assert np.allclose(rdot_density, bloch_rhs(r, fields, gamma, mat),
                               atol=1e-12)


class TestPropagateMaster:
    def test_unitary_limit(self, design):
        assert propagate_master(design, 0.0, 10000) >= 1.0 - 1e-6

    def test_against_exact_factorization(self, design):
        for gamma in (0.01, 0.1, 0.5):
            f = propagate_master(design, gamma, 10000)
            assert f == pytest.approx(dephasing_fidelity_exact(gamma, 1.0),
                                      abs=1e-6)

    def test_spec_values_at_gamma_0p01(self, design):
        f = propagate_master(design, 0.01, 10000)
        assert f >= 0.98
        assert f >= perturbative_bound(0.01, 1.0) - 1e-3

    def test_monotone_and_ordered_in_tf(self, design, design_short):
        gammas = [0.1, 0.4, 0.7, 1.0]
        f_long = [propagate_master(design, g, 4000) for g in gammas]
        f_short = [propagate_master(design_short, g, 4000) for g in gammas]
        assert all(np.diff(f_long) < 0) and all(np.diff(f_short) < 0)
        assert all(s > l for s, l in zip(f_short, f_long))

    def test_cross_form_agreement(self, design):
        gamma = 0.05
        bl = propagate_bloch(design, gamma=gamma, steps=10000)
        dn = propagate_density(design, gamma=gamma, steps=10000)
        assert np.abs(dn.bloch() - bl.r).max() < 1e-8
        check_density_trajectory(dn)


class TestNoiseMasterRHS:
    def test_lambda_zero_is_unitary(self, mat, design):
        fields = fields_xyz_at(design, 0.4)
        h = build_heff(fields, mat)
        hp = xonly_hprime(fields, design.b0, mat)
        psi = np.array([0.8, 0.6j])
        rho = np.outer(psi, psi.conj())
        assert np.allclose(noise_master_rhs(rho, h, hp, 0.0),
                           lindblad_step_rhs(rho, h, 0.0))

    def test_identity_noise_operator_inert(self, mat, design):
        fields = fields_xyz_at(design, 0.4)
        h = build_heff(fields, mat)
        psi = np.array([0.8, 0.6j])
        rho = np.outer(psi, psi.conj())
        with_noise = noise_master_rhs(rho, h, IDENTITY2 * 0.37, 2.0)
        assert np.allclose(with_noise, lindblad_step_rhs(rho, h, 0.0))

    def test_trace_preserving(self, mat, design):
        fields = fields_xyz_at(design, 0.7)
        h = build_heff(fields, mat)
        hp = xonly_hprime(fields, design.b0, mat)
        rho = np.array([[0.7, 0.1 + 0.2j], [0.1 - 0.2j, 0.3]])
        rhs = noise_master_rhs(rho, h, hp, 1.3)
        assert abs(rhs[0, 0] + rhs[1, 1]) < 1e-15


def xonly_bloch_expected(r, fields, b0, lam, mat):
    """Pauli-expansion oracle for the exact x-only dissipator:
    rdot = (lam^2 eta^2 / 2) [h (h.r) - r |h|^2] with h = (0, -Y, Z') in the
    Pauli frame, mapped back to the (u, v, w) convention."""
    x, y, z = fields
    zp = z - b0
    k = 0.5 * lam**2 * mat.eta**2
    u, v, w = r
    prec = bloch_rhs(r, fields, 0.0, mat)
    return prec + k * np.array([
        -(y * y + zp * zp) * u,
        -zp * zp * v + y * zp * w,
        y * zp * v - y * y * w,
    ])


class TestNoiseBlochRHS:
    def test_lambda_zero_matches_unitary(self, mat, design):
        fields = fields_xyz_at(design, 0.3)
        r = np.array([0.2, 0.1, 0.9])
        for channel in ("as-printed", "x-only"):
            assert np.allclose(
                noise_bloch_rhs(r, fields, design.b0, 0.0, mat, channel),
                bloch_rhs(r, fields, 0.0, mat), atol=1e-12)

    def test_no_drive_pure_precession(self, mat):
        fields = FieldTriple(0.0, 0.0, 0.15)  # Z' = 0
        r = np.array([0.5, -0.3, 0.2])
        got = noise_bloch_rhs(r, fields, 0.15, 1.7, mat, "as-printed")
        assert np.allclose(got, bloch_rhs(r, fields, 0.0, mat), atol=1e-12)

    def test_xonly_matches_pauli_expansion(self, mat, design):
        rng = np.random.default_rng(31)
        for t in (0.2, 0.5, 0.77):
            fields = fields_xyz_at(design, t)
            r = rng.uniform(-0.5, 0.5, 3)
            got = noise_bloch_rhs(r, fields, design.b0, 0.9, mat, "x-only")
            want = xonly_bloch_expected(r, fields, design.b0, 0.9, mat)
            assert np.abs(got - want).max() < 1e-10

    def test_u_decay_shared_between_channels(self, mat, design):
        # the printed matrix and the exact x-only dissipator agree on the
        # u diagonal -(lam^2 eta^2/2)(Y^2 + Z'^2)
        fields = fields_xyz_at(design, 0.4)
        r = np.array([1.0, 0.0, 0.0])
        printed = noise_bloch_rhs(r, fields, design.b0, 0.8, mat, "as-printed")
        exact = noise_bloch_rhs(r, fields, design.b0, 0.8, mat, "x-only")
        assert printed[0] == pytest.approx(exact[0], abs=1e-10)

    def test_unknown_channel_rejected(self, mat, design):
        with pytest.raises(ValueError):
            noise_bloch_rhs(np.zeros(3), fields_xyz_at(design, 0.5),
                            design.b0, 0.1, mat, "both")

    def test_cross_form_agreement_as_printed(self, design):
        lam0 = np.sqrt(0.02)
        bl = propagate_bloch(design, lambda0=lam0, steps=10000)
        dn = propagate_density(design, lambda0=lam0, channel="as-printed",
                               steps=10000)
        assert np.abs(dn.bloch() - bl.r).max() < 1e-8

    def test_fidelity_decreasing_in_lambda0_sq(self, design):
        grid = [0.0, 0.01, 0.02, 0.05]
        fs = [propagate_bloch(design, lambda0=np.sqrt(l2), steps=8000).final_fidelity
              for l2 in grid]
        assert all(np.diff(fs) < 0)

    def test_xonly_density_valid(self, design):
        dn = propagate_density(design, lambda0=np.sqrt(0.05), channel="x-only",
                               steps=10000)
        check_density_trajectory(dn)


class TestSSE:
    def test_lambda_zero_matches_schrodinger(self, design):
        sse = sse_trajectory(design, NoiseParams(lambda0=0.0, seed=5), 10000)
        rk = propagate_schrodinger(design, UP, 10000)
        assert abs(sse.final_fidelity - fidelity(rk)) < 5e-3
        assert sse.final_fidelity > 1.0 - 1e-6

    def test_deterministic_for_fixed_seed(self, design):
        n = NoiseParams(lambda0=0.3, seed=99)
        a = sse_trajectory(design, n, 10000)
        b = sse_trajectory(design, n, 10000)
        assert np.array_equal(a.states, b.states)

    def test_seed_changes_trajectory(self, design):
        a = sse_trajectory(design, NoiseParams(lambda0=0.3, seed=1), 10000)
        b = sse_trajectory(design, NoiseParams(lambda0=0.3, seed=2), 10000)
        assert not np.array_equal(a.states, b.states)

    def test_wiener_increment_statistics(self):
        dt = 1e-4
        dw = noise_increments(seed=123, n_traj=100, steps=10000, dt=dt)
        flat = dw.ravel()
        n = flat.size
        se_mean = np.sqrt(dt / n)
        assert abs(flat.mean()) < 3 * se_mean
        se_var = dt * np.sqrt(2.0 / n)
        assert abs(flat.var() - dt) < 3 * se_var

    def test_per_trajectory_generators(self):
        # trajectory i draws from generator seeded seed ^ i
        dw = noise_increments(seed=40, n_traj=3, steps=16, dt=0.1)
        single = noise_increments(seed=40 ^ 2, n_traj=1, steps=16, dt=0.1)
        assert np.array_equal(dw[2], single[0])


class TestEnsemble:
    def test_zero_noise_zero_variance(self, design):
        res = ensemble_average(design, NoiseParams(lambda0=0.0, seed=3, n_traj=16),
                               10000)
        assert res.fidelities.std() == 0.0
        assert res.fidelity_se == 0.0

    def test_matches_deterministic_master(self, design):
        lam0 = np.sqrt(0.02)
        res = ensemble_average(design, NoiseParams(lambda0=lam0, seed=7,
                                                   n_traj=400), 10000)
        master = propagate_density(design, lambda0=lam0, channel="x-only",
                                   steps=10000).final_fidelity
        assert abs(res.fidelity_mean - master) < 3 * res.fidelity_se

    def test_standard_error_scaling(self, design):
        lam0 = np.sqrt(0.02)
        ses = [ensemble_average(design, NoiseParams(lambda0=lam0, seed=11,
                                                    n_traj=n), 10000).fidelity_se
               for n in (100, 400, 1600)]
        # 1/sqrt(n): each quadrupling halves the SE, within sampling slack
        assert ses[0] / ses[1] == pytest.approx(2.0, rel=0.35)
        assert ses[1] / ses[2] == pytest.approx(2.0, rel=0.35)

    def test_mean_bloch_norm_shrinks(self, design):
        res = ensemble_average(design, NoiseParams(lambda0=0.5, seed=2,
                                                   n_traj=64), 10000)
        norms = np.linalg.norm(res.mean_bloch, axis=1)
        assert norms[0] == pytest.approx(1.0, abs=1e-12)
        assert norms[-1] < 0.9


class TestPerturbativeBound:
    def test_values(self):
        assert perturbative_bound(0.0, 5.0) == 1.0
        assert perturbative_bound(0.01, 1.0) == pytest.approx(0.98)
        assert perturbative_bound(0.01, 0.1) == pytest.approx(0.998)

    def test_clamped(self):
        assert perturbative_bound(10.0, 1.0) == 0.0


class TestParams:
    def test_gamma_validation(self):
        with pytest.raises(ValueError):
            LindbladParams(gamma=-0.1)
        assert LindbladParams(gamma=0.0).gamma == 0.0

    def test_noise_validation(self):
        with pytest.raises(ValueError):
            NoiseParams(lambda0=-1.0)
        with pytest.raises(ValueError):
            NoiseParams(lambda0=0.1, channel="plaid")
        with pytest.raises(ValueError):
            NoiseParams(lambda0=0.1, n_traj=0)

    def test_fidelity_from_w(self):
        assert fidelity_from_w(-1.0) == 1.0
        assert fidelity_from_w(1.0) == 0.0
        assert fidelity_from_w(0.0) == pytest.approx(1 / np.sqrt(2))
