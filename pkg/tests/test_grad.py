"""Gradient engine: taped reverse-mode derivatives verified against
central finite differences of pure forward evaluations, plus the
objective registry and the fixed subgradient conventions at kinks.
"""
import numpy as np
import pytest
import torch

from percloss import (
    OBJECTIVES,
    finite_diff_check,
    finite_diff_scan,
    gradcheck_pair,
    gradient,
    make_objective,
)
from percloss._core import safe_root, tie_min


class TestObjectiveRegistry:
    def test_all_names_resolve(self):
        assert OBJECTIVES == ("sdr", "pesq", "stoi", "sdr-pesq", "sdr-stoi", "sdr-pesq-stoi")
        for name in OBJECTIVES:
            assert callable(make_objective(name))

    def test_unknown_name_rejected(self):
        with pytest.raises(ValueError, match="unknown objective"):
            make_objective("mse")

    def test_combination_is_weighted_sum(self):
        clean, x_hat = gradcheck_pair(0)
        ct, xt = torch.from_numpy(clean), torch.from_numpy(x_hat)
        with torch.no_grad():
            combined = make_objective("sdr-pesq-stoi", alpha=2.0, beta=0.5)(ct, xt)
            parts = (
                make_objective("sdr")(ct, xt)
                + 2.0 * make_objective("pesq")(ct, xt)
                + 0.5 * make_objective("stoi")(ct, xt)
            )
        assert float(combined) == pytest.approx(float(parts), abs=1e-12)


class TestGradient:
    def test_value_matches_forward_eval(self):
        clean, x_hat = gradcheck_pair(1)
        g = gradient("sdr", x_hat, clean)
        fn = make_objective("sdr")
        with torch.no_grad():
            want = float(fn(torch.from_numpy(clean), torch.from_numpy(x_hat)))
        assert g.value == pytest.approx(want, abs=1e-12)
        assert g.d_input.shape == x_hat.shape
        assert np.all(np.isfinite(g.d_input))

    def test_input_not_mutated(self):
        clean, x_hat = gradcheck_pair(2)
        before = x_hat.copy()
        gradient("pesq", x_hat, clean)
        np.testing.assert_array_equal(x_hat, before)

    def test_gradients_finite_at_fixed_point(self):
        # every objective sits at a max here; roots of zero sums must not
        # poison the tape with NaN
        clean, _ = gradcheck_pair(3)
        for name in OBJECTIVES:
            g = gradient(name, clean.copy(), clean)
            assert np.all(np.isfinite(g.d_input)), name

    def test_accepts_callable(self):
        clean, x_hat = gradcheck_pair(4)
        g = gradient(lambda c, e: ((c - e) ** 2).sum(), x_hat, clean)
        np.testing.assert_allclose(g.d_input, 2.0 * (x_hat - clean), atol=1e-12)


class TestFiniteDiffCheck:
    def test_explicit_coordinates(self):
        clean, x_hat = gradcheck_pair(5)
        report = finite_diff_check("sdr", x_hat, clean, coords=[0, 100, 2000])
        assert report.coords.tolist() == [0, 100, 2000]
        assert report.rel_errors.shape == (3,)
        assert report.max_rel_error < 1e-6

    def test_bad_step_rejected(self):
        clean, x_hat = gradcheck_pair(6)
        with pytest.raises(ValueError, match="step"):
            finite_diff_check("sdr", x_hat, clean, coords=[0], step=0.0)

    def test_out_of_range_coordinate_rejected(self):
        clean, x_hat = gradcheck_pair(7)
        with pytest.raises(ValueError, match="out of range"):
            finite_diff_check("sdr", x_hat, clean, coords=[x_hat.size])

    def test_detects_a_wrong_gradient(self):
        # an objective whose tape is deliberately inconsistent with its
        # forward value: detach() hides half the dependency
        def crooked(c, e):
            return (e**2).sum() + (e.detach() * e).sum()

        clean, x_hat = gradcheck_pair(8)
        report = finite_diff_check(crooked, x_hat, clean, coords=[10, 20])
        assert report.max_rel_error > 0.1


class TestFiniteDiffScan:
    def test_all_objectives_pass_at_generic_points(self):
        clean, x_hat = gradcheck_pair(9)
        for name in OBJECTIVES:
            report = finite_diff_scan(
                name, x_hat, clean, n_coords=24, rng=np.random.default_rng(9)
            )
            assert report.max_rel_error < 1e-4, (name, report.max_rel_error)
            assert report.coords.size == 24

    def test_deterministic_given_rng_seed(self):
        clean, x_hat = gradcheck_pair(10)
        a = finite_diff_scan("stoi", x_hat, clean, n_coords=8, rng=np.random.default_rng(3))
        b = finite_diff_scan("stoi", x_hat, clean, n_coords=8, rng=np.random.default_rng(3))
        assert a.coords.tolist() == b.coords.tolist()
        assert a.max_rel_error == b.max_rel_error

    def test_rejects_oversized_request(self):
        clean, x_hat = gradcheck_pair(11)
        with pytest.raises(ValueError, match="more coordinates"):
            finite_diff_scan("sdr", x_hat, clean, n_coords=x_hat.size + 1)


class TestSubgradientConventions:
    def test_safe_root_exact_away_from_zero(self):
        u = torch.tensor([1e-20, 1.0, 4.0], dtype=torch.float64)
        np.testing.assert_allclose(safe_root(u, 0.5).numpy(), np.sqrt(u.numpy()), rtol=1e-15)

    def test_safe_root_zero_at_zero_with_zero_grad(self):
        u = torch.zeros(3, dtype=torch.float64, requires_grad=True)
        out = safe_root(u, 0.5).sum()
        (g,) = torch.autograd.grad(out, u)
        assert np.all(out.detach().numpy() == 0.0)
        assert np.all(g.numpy() == 0.0)

    def test_tie_min_routes_ties_to_first(self):
        a = torch.tensor([2.0], dtype=torch.float64, requires_grad=True)
        b = torch.tensor([2.0], dtype=torch.float64, requires_grad=True)
        out = tie_min(a, b).sum()
        ga, gb = torch.autograd.grad(out, (a, b))
        assert ga.item() == 1.0 and gb.item() == 0.0
