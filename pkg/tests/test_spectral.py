"""Eigensolver correctness against numpy, transforms, and band splits.

numpy.linalg.eigh appears here only as an independent oracle; the
package itself never calls it.
"""

import numpy as np
import pytest

from specnet.errors import ContractViolation
from specnet.graphs import laplacian, make_graph, one_hot_features
from specnet.spectral import (
    BandSplit,
    band_cutoff,
    band_filter,
    band_split,
    domain_energy_profile,
    eigendecompose_sym,
    gft,
    graph_band_features,
    igft,
    pairwise_spectral_difference,
    spectral_basis,
    spectral_energy,
)
from specnet.synth import make_synthetic_graphs


def random_symmetric(rng, n):
    M = rng.standard_normal((n, n))
    return (M + M.T) / 2.0


class TestEigendecomposition:
    # exercises both code paths: Jacobi (n <= 8) and Householder+QL
    SIZES = [1, 2, 3, 5, 8, 9, 12, 20, 40]

    def test_eigenvalues_match_numpy(self):
        rng = np.random.Generator(np.random.PCG64(100))
        for n in self.SIZES:
            for _ in range(3):
                A = random_symmetric(rng, n)
                basis = eigendecompose_sym(A)
                w_ref = np.linalg.eigvalsh(A)
                assert np.allclose(basis.eigenvalues, w_ref, atol=1e-10), n

    def test_reconstruction(self):
        rng = np.random.Generator(np.random.PCG64(101))
        for n in self.SIZES:
            A = random_symmetric(rng, n)
            basis = eigendecompose_sym(A)
            V, w = basis.vectors, basis.eigenvalues
            assert np.allclose(V @ np.diag(w) @ V.T, A, atol=1e-9), n

    def test_eigenvalues_ascending(self):
        rng = np.random.Generator(np.random.PCG64(102))
        A = random_symmetric(rng, 15)
        w = eigendecompose_sym(A).eigenvalues
        assert np.all(np.diff(w) >= 0)

    def test_sign_convention(self):
        rng = np.random.Generator(np.random.PCG64(103))
        for n in (4, 10, 17):
            V = eigendecompose_sym(random_symmetric(rng, n)).vectors
            for j in range(n):
                col = V[:, j]
                lead = col[np.abs(col) > 1e-12][0]
                assert lead > 0.0

    def test_deterministic_bytes(self):
        rng = np.random.Generator(np.random.PCG64(104))
        A = random_symmetric(rng, 11)
        a = eigendecompose_sym(A)
        b = eigendecompose_sym(A.copy())
        assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
        assert a.vectors.tobytes() == b.vectors.tobytes()

    def test_degenerate_spectrum(self):
        # identity has a single eigenvalue of multiplicity n
        basis = eigendecompose_sym(np.eye(12))
        assert np.allclose(basis.eigenvalues, 1.0)
        assert np.allclose(basis.vectors.T @ basis.vectors, np.eye(12),
                           atol=1e-10)

    def test_path_laplacian_analytic_eigenvalues(self):
        # combinatorial Laplacian of a path: 4 sin^2(pi k / (2 n))
        n = 13
        g = make_graph(n, [(i, i + 1) for i in range(n - 1)])
        basis = eigendecompose_sym(laplacian(g))
        expect = np.sort(4.0 * np.sin(np.pi * np.arange(n) / (2 * n)) ** 2)
        assert np.allclose(basis.eigenvalues, expect, atol=1e-8)

    def test_rejects_asymmetric(self):
        with pytest.raises(ContractViolation, match="not symmetric"):
            eigendecompose_sym(np.array([[0.0, 1.0], [0.5, 0.0]]))

    def test_rejects_non_square(self):
        with pytest.raises(ContractViolation):
            eigendecompose_sym(np.zeros((2, 3)))

    def test_rejects_non_finite(self):
        M = np.eye(3)
        M[0, 0] = np.nan
        with pytest.raises(ContractViolation):
            eigendecompose_sym(M)

    def test_rejects_unknown_source(self):
        with pytest.raises(ContractViolation):
            eigendecompose_sym(np.eye(2), source="magic")


class TestBandMath:
    def test_cutoff_known_values(self):
        assert band_cutoff(10, 0.5) == 5
        assert band_cutoff(5, 0.5) == 3
        assert band_cutoff(10, 0.3) == 3  # 0.3 * 10 wobbles above 3.0
        assert band_cutoff(10, 0.05) == 1
        assert band_cutoff(1, 0.5) == 1
        assert band_cutoff(7, 0.99) == 7

    def test_cutoff_rejects_bad_rho(self):
        for rho in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(ContractViolation):
                band_cutoff(5, rho)

    def test_band_split_indices_partition(self):
        split = BandSplit(cutoff_fraction=0.5, size=9)
        joined = np.concatenate([split.low_indices, split.high_indices])
        assert np.array_equal(joined, np.arange(9))
        assert split.cutoff == 5

    def test_both_bands_nonempty_at_default_rho(self):
        for n in range(2, 30):
            c = band_cutoff(n, 0.5)
            assert 1 <= c < n


class TestTransforms:
    def test_roundtrip_on_synthetic_graphs(self):
        rng = np.random.Generator(np.random.PCG64(200))
        for g in make_synthetic_graphs(12, seed=21):
            basis = spectral_basis(g)
            X = rng.standard_normal((g.node_count, 4))
            back = igft(basis, gft(basis, X))
            assert np.abs(back - X).max() <= 1e-10

    def test_parseval(self):
        rng = np.random.Generator(np.random.PCG64(201))
        for g in make_synthetic_graphs(12, seed=22):
            X = rng.standard_normal((g.node_count, 3))
            coeffs = gft(spectral_basis(g), X)
            a, b = float(np.sum(X**2)), float(np.sum(coeffs**2))
            assert abs(a - b) <= 1e-8 * max(1.0, a)

    def test_band_filter_sums_to_signal(self):
        for g in make_synthetic_graphs(8, seed=23):
            basis = spectral_basis(g)
            X = one_hot_features(g, 3)
            low, high = band_filter(basis, X, band_split(basis, 0.5))
            assert np.abs(low + high - X).max() <= 1e-10

    def test_band_components_orthogonal(self):
        for g in make_synthetic_graphs(6, seed=24):
            basis = spectral_basis(g)
            X = one_hot_features(g, 3)
            low, high = band_filter(basis, X, band_split(basis, 0.5))
            assert abs(float(np.sum(low * high))) <= 1e-9

    def test_shape_mismatch_rejected(self):
        g = make_synthetic_graphs(2, seed=1)[0]
        basis = spectral_basis(g)
        with pytest.raises(ContractViolation):
            gft(basis, np.zeros((basis.size + 1, 2)))
        with pytest.raises(ContractViolation):
            igft(basis, np.zeros(basis.size + 2))


class TestEnergy:
    def test_fractions_sum_to_one(self):
        for g in make_synthetic_graphs(10, seed=31):
            basis = spectral_basis(g)
            p = spectral_energy(basis, one_hot_features(g, 3),
                                band_split(basis, 0.5))
            assert p.low_energy >= 0.0 and p.high_energy >= 0.0
            assert p.low_energy + p.high_energy == pytest.approx(1.0)

    def test_zero_signal_convention(self):
        g = make_synthetic_graphs(2, seed=1)[0]
        basis = spectral_basis(g)
        p = spectral_energy(basis, np.zeros((g.node_count, 2)),
                            band_split(basis, 0.5))
        assert (p.low_energy, p.high_energy) == (0.5, 0.5)

    def test_domain_profile_is_mean(self):
        graphs = make_synthetic_graphs(6, seed=32)
        whole = domain_energy_profile(graphs, 3, 0.5)
        singles = [domain_energy_profile([g], 3, 0.5) for g in graphs]
        assert whole.low_energy == pytest.approx(
            np.mean([s.low_energy for s in singles]))

    def test_pairwise_difference_symmetric(self):
        a = make_synthetic_graphs(5, seed=33)
        b = make_synthetic_graphs(5, seed=34)
        assert pairwise_spectral_difference(a, b, 3, 0.5) == \
            pairwise_spectral_difference(b, a, 3, 0.5)


class TestBandFeatures:
    def test_components_recombine(self):
        g = make_synthetic_graphs(3, seed=41)[0]
        feats = graph_band_features(g, 0.5, 3)
        assert feats.adjacency.shape == (g.node_count, g.node_count)
        X = one_hot_features(g, 3)
        assert np.abs(feats.low + feats.high - X).max() <= 1e-10

    def test_pure_function(self):
        g = make_synthetic_graphs(3, seed=42)[1]
        a = graph_band_features(g, 0.5, 3)
        b = graph_band_features(g, 0.5, 3)
        assert a.low.tobytes() == b.low.tobytes()
        assert a.high.tobytes() == b.high.tobytes()
