import numpy as np
import pytest

from pilotforge import archive, matlin
from pilotforge.channel import (
    ChannelRealization,
    FullySeparable,
    Geometry,
    MuMimo,
    NetworkConfig,
    complex_normal,
    decay_grid,
    effective_P_matrices,
    make_hex_geometry,
    make_mu_mimo_profile,
    make_random_fully_separable,
    sample_channel_batch,
    sample_channels,
)


def small_cfg(**kw):
    base = dict(cells=2, users=2, bs_antennas=2, rf_chains=2, pilot_len=2)
    base.update(kw)
    return NetworkConfig(**base)


class TestNetworkConfig:
    def test_rejects_rf_above_antennas(self):
        with pytest.raises(ValueError):
            NetworkConfig(cells=1, users=1, bs_antennas=2, rf_chains=3, pilot_len=1)

    def test_rejects_too_many_pilot_symbols(self):
        with pytest.raises(ValueError):
            NetworkConfig(cells=2, users=2, bs_antennas=2, rf_chains=1, pilot_len=5)

    def test_warns_at_full_pilot_length(self):
        with pytest.warns(UserWarning):
            NetworkConfig(cells=2, users=2, bs_antennas=2, rf_chains=1, pilot_len=4)

    def test_rejects_nonpositive_power(self):
        with pytest.raises(ValueError):
            NetworkConfig(cells=1, users=1, bs_antennas=1, rf_chains=1, pilot_len=1, power=0.0)


class TestRandomFullySeparable:
    def test_receive_correlations_are_psd(self):
        cfg = small_cfg(bs_antennas=4)
        prof = make_random_fully_separable(cfg, np.random.default_rng(0))
        for q in prof.rx:
            assert np.linalg.eigvalsh(q).min() >= -1e-10 * matlin.frob(q)

    def test_transmit_diagonals_in_unit_interval(self):
        cfg = small_cfg(users=5, pilot_len=4)
        prof = make_random_fully_separable(cfg, np.random.default_rng(1))
        for p in prof.tx:
            d = np.real(np.diagonal(p))
            assert np.all(d >= 0) and np.all(d <= 1)
            assert np.allclose(p, np.diag(d))

    def test_seeded_determinism(self):
        cfg = small_cfg()
        a = make_random_fully_separable(cfg, np.random.default_rng(7))
        b = make_random_fully_separable(cfg, np.random.default_rng(7))
        for qa, qb in zip(a.rx, b.rx):
            assert np.array_equal(qa, qb)
        for pa, pb in zip(a.tx, b.tx):
            assert np.array_equal(pa, pb)


class TestHexGeometry:
    def test_users_inside_their_cell(self):
        cfg = NetworkConfig(cells=7, users=8, bs_antennas=2, rf_chains=1, pilot_len=3)
        geom = make_hex_geometry(cfg, 2.0, np.random.default_rng(2))
        offsets = geom.ut_positions - geom.cell_centers[:, None, :]
        assert np.all(np.linalg.norm(offsets, axis=-1) <= 2.0 + 1e-9)

    def test_distance_floor(self):
        cfg = NetworkConfig(cells=3, users=50, bs_antennas=2, rf_chains=1, pilot_len=3)
        geom = make_hex_geometry(cfg, 1.0, np.random.default_rng(3))
        r = geom.distances()
        assert np.all(r > 0)
        for j in range(3):
            own = np.linalg.norm(geom.ut_positions[j] - geom.cell_centers[j], axis=-1)
            assert np.all(own >= 0.05 - 1e-12)

    def test_seven_cell_ring_layout(self):
        cfg = NetworkConfig(cells=7, users=1, bs_antennas=2, rf_chains=1, pilot_len=3)
        geom = make_hex_geometry(cfg, 1.0, np.random.default_rng(4))
        c = geom.cell_centers
        np.testing.assert_allclose(c[0], [0.0, 0.0], atol=1e-12)
        ring = np.linalg.norm(c[1:] - c[0], axis=1)
        np.testing.assert_allclose(ring, np.sqrt(3.0), rtol=1e-12)
        # neighbors on the ring sit one pitch apart as well
        pair = np.linalg.norm(c[1] - c[2])
        assert pair == pytest.approx(np.sqrt(3.0), rel=1e-12)

    def test_determinism(self):
        cfg = NetworkConfig(cells=4, users=3, bs_antennas=2, rf_chains=1, pilot_len=3)
        a = make_hex_geometry(cfg, 1.0, np.random.default_rng(5))
        b = make_hex_geometry(cfg, 1.0, np.random.default_rng(5))
        assert np.array_equal(a.ut_positions, b.ut_positions)


def manual_geometry(distances_to_bs0):
    """Single-cell geometry whose users sit at chosen distances from the BS."""
    k = len(distances_to_bs0)
    pos = np.zeros((1, k, 2))
    pos[0, :, 0] = distances_to_bs0
    return Geometry(cell_centers=np.zeros((1, 2)), ut_positions=pos, cell_radius=1.0)


class TestMuMimoProfile:
    def test_unit_distance_no_shadowing(self):
        geom = manual_geometry([1.0])
        prof = make_mu_mimo_profile(geom, 3.0, 0.0, np.random.default_rng(0), bs_antennas=2)
        assert prof.beta[0, 0, 0] == pytest.approx(1.0)

    def test_inverse_cube_decay(self):
        geom = manual_geometry([2.0])
        prof = make_mu_mimo_profile(geom, 3.0, 0.0, np.random.default_rng(0), bs_antennas=2)
        assert prof.beta[0, 0, 0] == pytest.approx(0.125)

    def test_shadowing_standard_deviation(self):
        geom = manual_geometry(np.ones(100_000))
        prof = make_mu_mimo_profile(geom, 3.0, 8.0, np.random.default_rng(6), bs_antennas=1)
        shadow_db = 10.0 * np.log10(prof.beta.ravel())
        assert np.std(shadow_db) == pytest.approx(8.0, rel=0.02)

    def test_rejects_nonpositive_exponent(self):
        with pytest.raises(ValueError):
            make_mu_mimo_profile(manual_geometry([1.0]), 0.0, 8.0, np.random.default_rng(0))


class TestSampleChannels:
    def test_identity_profile_unit_variance(self):
        cfg = NetworkConfig(cells=1, users=1, bs_antennas=2, rf_chains=1, pilot_len=1)
        eye = np.eye(2, dtype=complex)
        prof = FullySeparable(rx=[eye], tx=[np.eye(1, dtype=complex)])
        h = sample_channel_batch(prof, cfg, np.random.default_rng(8), 100_000)
        var = np.mean(np.abs(h) ** 2)
        assert var == pytest.approx(1.0, rel=0.02)

    def test_sample_covariance_matches_kronecker_model(self):
        cfg = small_cfg()
        prof = make_random_fully_separable(cfg, np.random.default_rng(9))
        h = sample_channel_batch(prof, cfg, np.random.default_rng(10), 100_000)
        for i, j in [(0, 0), (1, 0)]:
            x = h[:, i, j].transpose(0, 2, 1).reshape(h.shape[0], -1)  # vec per draw
            cov = x.T @ x.conj() / x.shape[0]
            target = matlin.kron(prof.tx_corr(i, j), prof.rx_corr(i))
            assert matlin.frob(cov - target) <= 0.05 * matlin.frob(target)

    def test_mu_mimo_column_covariance(self):
        cfg = NetworkConfig(cells=1, users=2, bs_antennas=2, rf_chains=1, pilot_len=1)
        beta = np.array([[[0.5], [2.0]]])  # beta[0, k, 0]
        prof = MuMimo(beta=beta, bs_antennas=2)
        h = sample_channel_batch(prof, cfg, np.random.default_rng(11), 100_000)
        for k, b in enumerate([0.5, 2.0]):
            col = h[:, 0, 0, :, k]
            cov = col.T @ col.conj() / col.shape[0]
            assert matlin.frob(cov - b * np.eye(2)) <= 0.05 * matlin.frob(b * np.eye(2))

    def test_mu_mimo_matches_partially_separable_view(self):
        cfg = NetworkConfig(cells=2, users=2, bs_antennas=2, rf_chains=1, pilot_len=2)
        rng = np.random.default_rng(12)
        beta = rng.uniform(0.2, 2.0, size=(2, 2, 2))
        mu = MuMimo(beta=beta, bs_antennas=2)
        ps = mu.as_partially_separable()
        h1 = sample_channel_batch(mu, cfg, np.random.default_rng(13), 100_000)
        h2 = sample_channel_batch(ps, cfg, np.random.default_rng(14), 100_000)
        for h in (h1, h2):
            x = h[:, 0, 1].transpose(0, 2, 1).reshape(h.shape[0], -1)
            cov = x.T @ x.conj() / x.shape[0]
            target = matlin.kron(mu.tx_corr(0, 1), mu.rx_corr(0))
            assert matlin.frob(cov - target) <= 0.05 * matlin.frob(target)

    def test_single_draw_determinism(self):
        cfg = small_cfg()
        prof = make_random_fully_separable(cfg, np.random.default_rng(15))
        a = sample_channels(prof, cfg, np.random.default_rng(16))
        b = sample_channels(prof, cfg, np.random.default_rng(16))
        assert np.array_equal(a.H, b.H)

    def test_vectorization_accessor(self):
        h = np.arange(8, dtype=complex).reshape(1, 1, 4, 2)
        real = ChannelRealization(H=np.tile(h, (2, 2, 1, 1)))
        np.testing.assert_allclose(real.h(0, 1), h[0, 0].ravel(order="F"))

    def test_dim_mismatch_rejected(self):
        cfg = small_cfg(bs_antennas=3)
        prof = make_random_fully_separable(small_cfg(), np.random.default_rng(17))
        from pilotforge.errors import DimMismatch

        with pytest.raises(DimMismatch):
            sample_channels(prof, cfg, np.random.default_rng(18))


class TestEffectiveP:
    def test_single_cell_returns_own_matrix(self):
        cfg = NetworkConfig(cells=1, users=3, bs_antennas=2, rf_chains=1, pilot_len=2)
        prof = make_random_fully_separable(cfg, np.random.default_rng(19))
        p_bar, qs = effective_P_matrices(prof)
        np.testing.assert_allclose(p_bar, prof.tx[0])
        assert len(qs) == 1

    def test_fully_separable_viewed_as_partially_separable(self):
        cfg = small_cfg()
        prof = make_random_fully_separable(cfg, np.random.default_rng(20))
        p_bar, _ = effective_P_matrices(prof)
        per_cell, _ = effective_P_matrices(prof.as_partially_separable())
        for p_i in per_cell:
            np.testing.assert_allclose(p_i, p_bar)

    def test_mu_mimo_two_cell_example(self):
        beta = np.empty((2, 1, 2))
        beta[0, 0, 0], beta[0, 0, 1] = 1.0, 0.5
        beta[1, 0, 0], beta[1, 0, 1] = 0.25, 2.0
        prof = MuMimo(beta=beta, bs_antennas=2)
        per_cell, _ = effective_P_matrices(prof)
        np.testing.assert_allclose(per_cell[0], np.diag([1.0, 0.5]))
        np.testing.assert_allclose(per_cell[1], np.diag([0.25, 2.0]))

    def test_decay_grid_roundtrip(self):
        beta = np.array([[[0.3, 0.7], [1.1, 0.2]]])[[0, 0]]  # (2, 2, 2) after fancy index
        prof = MuMimo(beta=np.ascontiguousarray(beta), bs_antennas=2)
        np.testing.assert_allclose(decay_grid(prof), beta)


class TestArchive:
    def test_fully_separable_roundtrip(self, tmp_path):
        cfg = small_cfg()
        prof = make_random_fully_separable(cfg, np.random.default_rng(21))
        path = tmp_path / "profile.txt"
        archive.save_profile(prof, path)
        back = archive.load_profile(path)
        for a, b in zip(prof.rx, back.rx):
            assert np.array_equal(a, b)
        for a, b in zip(prof.tx, back.tx):
            assert np.array_equal(a, b)

    def test_mu_mimo_roundtrip(self, tmp_path):
        rng = np.random.default_rng(22)
        prof = MuMimo(beta=rng.uniform(0.1, 3.0, size=(2, 3, 2)), bs_antennas=4)
        path = tmp_path / "mu.txt"
        archive.save_profile(prof, path)
        back = archive.load_profile(path)
        assert np.array_equal(prof.beta, back.beta)
        assert back.bs_antennas == 4

    def test_partially_separable_roundtrip(self, tmp_path):
        cfg = small_cfg()
        prof = make_random_fully_separable(cfg, np.random.default_rng(23)).as_partially_separable()
        path = tmp_path / "part.txt"
        archive.save_profile(prof, path)
        back = archive.load_profile(path)
        for i in range(2):
            for j in range(2):
                assert np.array_equal(prof.tx[i][j], back.tx[i][j])

    def test_pilot_roundtrip(self, tmp_path):
        from pilotforge.estimator import PilotSet

        rng = np.random.default_rng(24)
        pilots = PilotSet(per_cell=[complex_normal(rng, (3, 2)) for _ in range(2)])
        path = tmp_path / "pilots.txt"
        archive.save_pilots(pilots, path)
        back = archive.load_pilots(path)
        for a, b in zip(pilots.per_cell, back.per_cell):
            assert np.array_equal(a, b)
