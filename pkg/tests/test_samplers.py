import math

import numpy as np
import pytest

from gensmooth import (
    DirectionSet,
    HypothesisError,
    ParameterError,
    RankDeficiencyError,
    RngStream,
    SamplerSpec,
    bes_shrinkage_scale,
    derive,
    gs_shrinkage_variance,
    guided_update,
    orthogonalize,
    sample_directions,
)


def pooled_entries(kind, L, d, n_entries, seed=0):
    spec = SamplerSpec.for_kind(kind, L, d)
    root = RngStream(seed)
    chunks = []
    total = 0
    i = 0
    while total < n_entries:
        dirs = sample_directions(spec, L, d, derive(root, i))
        chunks.append(dirs.directions.ravel())
        total += L * d
        i += 1
    return np.concatenate(chunks)[:n_entries]


def kurtosis_with_se(x):
    """Sample kurtosis m4/m2^2 and its delta-method standard error."""
    centered = x - x.mean()
    c2 = centered**2
    c4 = centered**4
    m2 = c2.mean()
    g2 = c4.mean() / m2**2
    influence = c4 / m2**2 - 2.0 * g2 * c2 / m2
    return g2, influence.std() / math.sqrt(x.size)


class TestShrinkageParameters:
    def test_gs_variance_values(self):
        assert gs_shrinkage_variance(2, 100) == pytest.approx(2.0 / 103.0)
        assert gs_shrinkage_variance(1, 1) == pytest.approx(1.0 / 3.0)

    def test_gs_variance_large_L_limit(self):
        assert abs(gs_shrinkage_variance(10**9, 100) - 1.0) < 1e-6

    def test_gs_variance_in_unit_interval(self):
        for L in (1, 2, 20, 1000):
            for d in (1, 10, 500):
                assert 0.0 < gs_shrinkage_variance(L, d) < 1.0

    def test_bes_scale_values(self):
        assert bes_shrinkage_scale(2, 100) == pytest.approx(math.sqrt(101.0 / 8.0))
        assert bes_shrinkage_scale(1, 5) == pytest.approx(math.sqrt(5.0 / 4.0))

    def test_bes_scale_requires_L_plus_d_above_5(self):
        with pytest.raises(HypothesisError):
            bes_shrinkage_scale(2, 3)

    def test_bes_scale_entry_variance_below_one(self):
        # Var = p(1-p)/m^2 = L / (L + d - 1) < 1.
        for L, d in [(1, 6), (2, 100), (20, 200)]:
            m = bes_shrinkage_scale(L, d)
            assert 0.25 / m**2 == pytest.approx(L / (L + d - 1.0))
            assert 0.25 / m**2 < 1.0

    def test_invalid_sizes(self):
        with pytest.raises(ParameterError):
            gs_shrinkage_variance(0, 5)
        with pytest.raises(ParameterError):
            bes_shrinkage_scale(3, 0)


class TestSampleDirections:
    def test_bes_support(self):
        dirs = sample_directions(SamplerSpec.for_kind("bes", 4, 7), 4, 7,
                                 RngStream(0))
        assert set(np.unique(dirs.directions)) <= {-1.0, 1.0}

    def test_shapes_and_finiteness(self):
        for kind in ("gs", "bes", "gs-shrinkage", "bes-shrinkage", "orthogonal",
                     "guided"):
            spec = SamplerSpec.for_kind(kind, 3, 20)
            dirs = sample_directions(spec, 3, 20, RngStream(1))
            assert dirs.directions.shape == (3, 20)
            assert np.all(np.isfinite(dirs.directions))
            assert dirs.L == 3 and dirs.d == 20

    def test_gs_shrinkage_pooled_variance(self):
        x = pooled_entries("gs-shrinkage", 6, 100, 10**6, seed=2)
        target = 6.0 / 107.0
        assert abs(x.var() - target) < 0.01 * target

    @pytest.mark.parametrize("kind,L,d,variance,kurt", [
        ("gs", 2, 100, 1.0, 3.0),
        ("bes", 2, 100, 1.0, 1.0),
        ("gs-shrinkage", 6, 100, 6.0 / 107.0, 3.0),
        ("bes-shrinkage", 6, 100, 6.0 / 105.0, 1.0),
    ])
    def test_zero_mean_and_moment_match(self, kind, L, d, variance, kurt):
        x = pooled_entries(kind, L, d, 10**6, seed=3)
        n = x.size
        mean_se = x.std() / math.sqrt(n)
        assert abs(x.mean()) < 3 * mean_se
        var_se = math.sqrt(max(np.mean((x - x.mean())**4) - x.var()**2, 0.0) / n)
        assert abs(x.var() - variance) < 3 * var_se + 1e-9
        g2, kurt_se = kurtosis_with_se(x)
        assert abs(g2 - kurt) < 3 * kurt_se + 1e-5

    def test_determinism(self):
        spec = SamplerSpec.for_kind("gs", 5, 11)
        a = sample_directions(spec, 5, 11, RngStream(9))
        b = sample_directions(spec, 5, 11, RngStream(9))
        np.testing.assert_array_equal(a.directions, b.directions)

    def test_invalid_sizes(self):
        with pytest.raises(ParameterError):
            sample_directions(SamplerSpec.for_kind("gs", 1, 1), 0, 1, RngStream(0))


class TestOrthogonalize:
    def test_single_row_unchanged(self):
        raw = DirectionSet(directions=np.array([[1.0, 2.0, 3.0]]),
                           spec=SamplerSpec.for_kind("orthogonal", 1, 3))
        out = orthogonalize(raw)
        np.testing.assert_array_equal(out.directions, raw.directions)

    def test_hand_case(self):
        rows = np.array([[1.0, 0.0, 0.0],
                         [1.0, 1.0, 0.0],
                         [1.0, 1.0, 1.0]])
        raw = DirectionSet(directions=rows,
                           spec=SamplerSpec.for_kind("orthogonal", 3, 3))
        out = orthogonalize(raw).directions
        expected = np.array([[1.0, 0.0, 0.0],
                             [0.0, math.sqrt(2.0), 0.0],
                             [0.0, 0.0, math.sqrt(3.0)]])
        np.testing.assert_allclose(out, expected, atol=1e-12)

    def test_norms_preserved_and_orthogonal(self):
        rng = np.random.default_rng(4)
        rows = rng.standard_normal((5, 50))
        raw = DirectionSet(directions=rows,
                           spec=SamplerSpec.for_kind("orthogonal", 5, 50))
        out = orthogonalize(raw).directions
        np.testing.assert_allclose(np.linalg.norm(out, axis=1),
                                   np.linalg.norm(rows, axis=1), rtol=1e-12)
        gram = out @ out.T
        off_diag = gram - np.diag(np.diag(gram))
        assert np.abs(off_diag).max() < 1e-8

    def test_rank_deficiency_detected(self):
        rows = np.array([[1.0, 0.0], [2.0, 0.0]])
        raw = DirectionSet(directions=rows,
                           spec=SamplerSpec.for_kind("orthogonal", 2, 2))
        with pytest.raises(RankDeficiencyError):
            orthogonalize(raw)

    def test_too_many_rows_rejected(self):
        rows = np.eye(3, 2)
        raw = DirectionSet(directions=rows,
                           spec=SamplerSpec.for_kind("orthogonal", 2, 2))
        with pytest.raises(ParameterError):
            orthogonalize(raw)


class TestOrthogonalSampler:
    @pytest.mark.parametrize("case", range(100))
    def test_pairwise_orthogonality(self, case):
        rng = np.random.default_rng(case)
        d = int(rng.integers(2, 40))
        L = int(rng.integers(1, d + 1))
        spec = SamplerSpec.for_kind("orthogonal", L, d)
        out = sample_directions(spec, L, d, RngStream(1000 + case)).directions
        gram = out @ out.T
        off_diag = gram - np.diag(np.diag(gram))
        assert np.abs(off_diag).max() < 1e-8

    def test_blocks_when_L_exceeds_d(self):
        spec = SamplerSpec.for_kind("orthogonal", 7, 3)
        out = sample_directions(spec, 7, 3, RngStream(5)).directions
        assert out.shape == (7, 3)
        for lo in (0, 3):
            block = out[lo:lo + 3]
            gram = block @ block.T
            off_diag = gram - np.diag(np.diag(gram))
            assert np.abs(off_diag).max() < 1e-8

    def test_norms_follow_gaussian_norms(self):
        # Rescaling preserves the chi distribution of row norms.
        spec = SamplerSpec.for_kind("orthogonal", 8, 30)
        norms = []
        root = RngStream(6)
        for i in range(2000):
            out = sample_directions(spec, 8, 30, derive(root, i)).directions
            norms.append(np.linalg.norm(out, axis=1))
        norms_sq = np.concatenate(norms)**2
        se = norms_sq.std() / math.sqrt(norms_sq.size)
        assert abs(norms_sq.mean() - 30.0) < 3 * se


class TestGuided:
    def test_isotropic_phase_covariance(self):
        d = 10
        spec = SamplerSpec.for_kind("guided", 4, d)
        assert spec.effective_alpha == 1.0
        root = RngStream(7)
        rows = np.concatenate(
            [sample_directions(spec, 500, d, derive(root, i)).directions
             for i in range(2000)])
        cov = np.cov(rows.T)
        np.testing.assert_allclose(cov, np.eye(d) / d, atol=0.01)

    def test_full_buffer_covariance(self):
        d = 10
        buffer = (np.eye(d)[0] * 2.0, np.eye(d)[1] * 0.5, np.eye(d)[2] * 3.0)
        spec = SamplerSpec(kind="guided", guided_alpha=0.5, guided_k=3,
                           guided_buffer=buffer)
        assert spec.effective_alpha == 0.5
        proj = np.zeros((d, d))
        proj[:3, :3] = np.eye(3)
        expected = 0.5 / d * np.eye(d) + 0.5 / 3.0 * proj
        root = RngStream(8)
        rows = np.concatenate(
            [sample_directions(spec, 500, d, derive(root, i)).directions
             for i in range(2000)])
        cov = np.cov(rows.T)
        np.testing.assert_allclose(cov, expected, atol=0.01)

    def test_update_below_capacity(self):
        spec = SamplerSpec(kind="guided", guided_alpha=0.5, guided_k=2)
        g1 = np.array([1.0, 0.0])
        spec = guided_update(spec, g1)
        assert len(spec.guided_buffer) == 1
        assert spec.effective_alpha == 1.0

    def test_update_fifo_eviction(self):
        spec = SamplerSpec(kind="guided", guided_alpha=0.5, guided_k=2)
        g1, g2, g3 = (np.array([float(i), 0.0]) for i in (1, 2, 3))
        spec = guided_update(guided_update(guided_update(spec, g1), g2), g3)
        assert len(spec.guided_buffer) == 2
        np.testing.assert_array_equal(spec.guided_buffer[0], g2)
        np.testing.assert_array_equal(spec.guided_buffer[1], g3)

    def test_alpha_transition_at_capacity(self):
        spec = SamplerSpec(kind="guided", guided_alpha=0.5, guided_k=2)
        spec = guided_update(spec, np.array([1.0, 0.0]))
        spec = guided_update(spec, np.array([0.0, 1.0]))
        assert spec.effective_alpha == 0.5

    def test_zero_gradient_skipped(self):
        spec = SamplerSpec(kind="guided", guided_alpha=0.5, guided_k=2)
        spec = guided_update(spec, np.zeros(2))
        assert len(spec.guided_buffer) == 0

    def test_update_ignores_other_kinds(self):
        spec = SamplerSpec.for_kind("gs", 2, 4)
        assert guided_update(spec, np.ones(4)) is spec

    def test_guided_k_by_dimension(self):
        assert SamplerSpec.for_kind("guided", 2, 100).guided_k == 50
        assert SamplerSpec.for_kind("guided", 2, 20).guided_k == 10


class TestSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(ParameterError):
            SamplerSpec(kind="cma")

    def test_shrinkage_recomputed_per_configuration(self):
        a = SamplerSpec.for_kind("gs-shrinkage", 2, 100)
        b = SamplerSpec.for_kind("gs-shrinkage", 20, 100)
        assert a.sigma_sq == pytest.approx(2.0 / 103.0)
        assert b.sigma_sq == pytest.approx(20.0 / 121.0)
