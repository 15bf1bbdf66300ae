"""Scale-invariant SDR: projection decomposition and the clamped dB score."""
import numpy as np
import pytest

from percloss import SDR_CAP, decompose, hit_clamp, loss_sdr, si_sdr


def _pair(n, seed):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(n) * 0.1, rng.standard_normal(n) * 0.1


def _si_sdr_oracle(clean, x_hat):
    """Direct textbook evaluation without stabilizers (generic inputs)."""
    alpha = np.dot(clean, x_hat) / np.dot(clean, clean)
    target = alpha * clean
    residual = target - x_hat
    return 10.0 * np.log10(np.dot(target, target) / np.dot(residual, residual))


class TestDecompose:
    def test_projections_are_collinear_and_exact(self):
        rng = np.random.default_rng(0)
        clean = rng.standard_normal(1000)
        noise = rng.standard_normal(1000)
        x_hat = 0.7 * clean + 0.2 * noise + 0.05 * rng.standard_normal(1000)
        dec = decompose(clean, noise, x_hat)
        np.testing.assert_allclose(
            dec.target + dec.e_noise + dec.e_artif, x_hat, atol=1e-12
        )
        # target is the least-squares projection onto the clean direction
        assert dec.alpha == pytest.approx(np.dot(clean, x_hat) / np.dot(clean, clean), rel=1e-9)
        np.testing.assert_allclose(dec.target, dec.alpha * clean, atol=1e-12)

    def test_pure_scaled_clean_has_no_artifacts(self):
        rng = np.random.default_rng(1)
        clean = rng.standard_normal(500)
        noise = rng.standard_normal(500)
        noise -= noise.dot(clean) / clean.dot(clean) * clean  # orthogonalize
        dec = decompose(clean, noise, 3.0 * clean)
        assert dec.alpha == pytest.approx(3.0, rel=1e-9)
        assert np.abs(dec.e_noise).max() < 1e-9
        assert np.abs(dec.e_artif).max() < 1e-9

    def test_zero_energy_rejected(self):
        with pytest.raises(ValueError, match="zero energy"):
            decompose(np.zeros(10), np.ones(10), np.ones(10))


class TestSiSdr:
    def test_matches_textbook_oracle(self):
        for seed in range(10):
            clean, noise = _pair(2000, seed)
            x_hat = clean + 0.3 * noise
            assert si_sdr(clean, x_hat) == pytest.approx(
                _si_sdr_oracle(clean, x_hat), abs=1e-9
            )

    def test_scale_invariance(self):
        clean, noise = _pair(2000, 42)
        x_hat = clean + 0.5 * noise
        base = si_sdr(clean, x_hat)
        for c in (0.1, 2.0, 10.0):
            assert abs(si_sdr(clean, c * x_hat) - base) < 1e-6

    def test_perfect_reconstruction_hits_upper_clamp(self):
        clean, _ = _pair(1000, 3)
        assert si_sdr(clean, clean) == SDR_CAP
        assert si_sdr(clean, 2.0 * clean) == SDR_CAP
        assert hit_clamp(si_sdr(clean, clean))

    def test_orthogonal_estimate_hits_lower_clamp(self):
        clean, other = _pair(1000, 4)
        x_hat = other - other.dot(clean) / clean.dot(clean) * clean
        assert si_sdr(clean, x_hat) == -SDR_CAP

    def test_hand_example(self):
        # x_hat = clean + orthogonal unit error, ||clean|| = 2:
        # projection = clean, residual energy 1 -> 10*log10(4)
        clean = np.array([2.0, 0.0, 0.0])
        x_hat = np.array([2.0, 1.0, 0.0])
        assert si_sdr(clean, x_hat) == pytest.approx(10.0 * np.log10(4.0), abs=1e-9)

    def test_worse_estimates_score_lower(self):
        clean, noise = _pair(4000, 5)
        scores = [si_sdr(clean, clean + g * noise) for g in (0.01, 0.1, 1.0, 10.0)]
        assert all(a > b for a, b in zip(scores, scores[1:]))

    def test_zero_clean_rejected(self):
        with pytest.raises(ValueError, match="zero energy"):
            si_sdr(np.zeros(10), np.ones(10))

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            si_sdr(np.ones(10), np.ones(11))


class TestLossSdrBatch:
    def test_mean_of_per_pair_scores(self):
        pairs = []
        expected = []
        for seed in range(4):
            clean, noise = _pair(1500, seed + 10)
            pairs.append((clean, clean + 0.2 * noise))
            expected.append(si_sdr(clean, clean + 0.2 * noise))
        assert loss_sdr(pairs) == pytest.approx(np.mean(expected), abs=1e-12)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError, match="empty batch"):
            loss_sdr([])
