import numpy as np
import pytest

from helpers import make_record, make_series
from optioncast.errors import ConvergenceError, DataError
from optioncast.market_data import SyntheticSpec, generate_gbm
from optioncast.qrm import (
    Minimizer,
    QrmConfig,
    QrmGrid,
    assemble_system,
    estimate_series,
    solve_qrm,
)


def constant_pair(option_bid=4.9, option_ask=5.1, implied_vol=0.0, **kwargs):
    rec = make_record(implied_vol=implied_vol, option_bid=option_bid,
                      option_ask=option_ask, **kwargs)
    nxt = make_record(offset=1, implied_vol=implied_vol, option_bid=option_bid,
                      option_ask=option_ask, **kwargs)
    return [rec, nxt]


def bs_series(n_days=60, sigma=0.2, seed=7, spread_bp=0.0):
    spec = SyntheticSpec(s0=100.0, sigma=sigma, mu=0.05, rate=0.02,
                         n_days=n_days, seed=seed, spread_bp=spread_bp)
    return generate_gbm(spec)


class TestAssemble:
    def test_data_surface_tau_zero_row_is_todays_mid(self):
        records = bs_series(n_days=12)[:2]
        system = assemble_system(records, QrmConfig())
        mid = records[-1].option_mid
        assert np.all(system.f_surface[:, 0] == mid)

    def test_tiny_system_normal_matrix_is_spd(self):
        # Dense eigenvalue oracle on the smallest legal grid.
        records = bs_series(n_days=12)[:2]
        system = assemble_system(records, QrmConfig(n_s=3, n_tau=3))
        eigvals = np.linalg.eigvalsh(system.normal_matrix())
        assert np.all(eigvals > 0)

    def test_default_grid_normal_matrix_is_spd(self):
        records = bs_series(n_days=12)[:2]
        system = assemble_system(records, QrmConfig())
        eigvals = np.linalg.eigvalsh(system.normal_matrix())
        assert np.all(eigvals > 0)
        # beta floors the spectrum, up to rounding in forming the dense A^T A
        assert eigvals.min() >= 0.01 * (1.0 - 1e-4)

    def test_zero_vol_operator_is_pure_time_difference(self):
        system = assemble_system(constant_pair(implied_vol=0.0), QrmConfig())
        dtau = system.tau_values[1] - system.tau_values[0]
        rows = system.a_pde.tocsr()
        for r in range(rows.shape[0]):
            data = rows.data[rows.indptr[r] : rows.indptr[r + 1]]
            nonzero = data[data != 0.0]
            assert len(nonzero) <= 2
            assert np.allclose(np.abs(nonzero), 1.0 / dtau)

    def test_insufficient_history(self):
        with pytest.raises(DataError, match="at least 2"):
            assemble_system([make_record()], QrmConfig())

    def test_collapsed_grid(self):
        records = constant_pair(implied_vol=0.0, stock_bid=100.0, stock_ask=100.0)
        with pytest.raises(DataError, match="collapsed"):
            assemble_system(records, QrmConfig())

    def test_rayleigh_quotients_positive(self):
        rng = np.random.Generator(np.random.PCG64(42))
        series = bs_series(n_days=12, spread_bp=15.0)
        for k in (1, 5, 11):
            system = assemble_system(series[k - 1 : k + 1], QrmConfig())
            for _ in range(100):
                v = rng.standard_normal(system.n_unknowns)
                assert float(v @ system.apply_normal(v)) > 0.0


class TestSolve:
    def test_zero_vol_flat_data_solution_is_constant(self):
        # Equal option bid/ask makes the whole data surface one constant.
        records = constant_pair(option_bid=5.0, option_ask=5.0, implied_vol=0.0)
        result = solve_qrm(records, QrmConfig())
        assert result.est == 5.0
        assert np.all(result.grid.u == 5.0)
        assert result.residual == 0.0

    def test_zero_vol_center_line_is_exactly_the_mid(self):
        # With zero diffusion the stock lines decouple and the center line's
        # data column is the constant mid, so EST matches it exactly.
        records = constant_pair(option_bid=4.9, option_ask=5.1, implied_vol=0.0)
        result = solve_qrm(records, QrmConfig())
        assert result.est == records[-1].option_mid == 5.0
        center = (len(result.grid.s_values) - 1) // 2
        assert np.all(result.grid.u[center, :] == 5.0)

    def test_boundary_values_equal_data_surface(self):
        records = bs_series(n_days=12, spread_bp=20.0)[:2]
        config = QrmConfig()
        system = assemble_system(records, config)
        result = solve_qrm(records, config)
        assert np.array_equal(result.grid.u[:, 0], system.f_surface[:, 0])
        assert np.array_equal(result.grid.u[0, :], system.f_surface[0, :])
        assert np.array_equal(result.grid.u[-1, :], system.f_surface[-1, :])

    def test_large_beta_pins_solution_to_data(self):
        # Direct dense solve as oracle on a 5x5 grid with gentle day-to-day
        # movement, then the data term dominates the minimizer.
        records = [
            make_record(option_bid=49.98, option_ask=50.02, stock_bid=99.5, stock_ask=100.5),
            make_record(offset=1, option_bid=50.03, option_ask=50.07,
                        stock_bid=99.6, stock_ask=100.6),
        ]
        config = QrmConfig(n_s=5, n_tau=5, beta=1e6, cg_max_iter=20000)
        system = assemble_system(records, config)
        dense = np.linalg.solve(system.normal_matrix(), system.normal_rhs())
        result = solve_qrm(records, config)
        flat = result.grid.u.reshape(-1)
        solved_interior = flat[~system.known_mask]
        assert np.allclose(solved_interior, dense, rtol=1e-8, atol=1e-10)
        f_inf = np.max(np.abs(system.f_surface))
        assert np.max(np.abs(solved_interior - system.f_interior)) <= 1e-3 * f_inf

    def test_pde_misfit_monotone_in_beta(self):
        records = bs_series(n_days=12, spread_bp=20.0)[:2]
        misfits = [
            solve_qrm(records, QrmConfig(beta=beta)).residual
            for beta in (1.0, 0.1, 0.01, 0.001)
        ]
        for larger, smaller in zip(misfits, misfits[1:]):
            assert smaller <= larger + 1e-12

    def test_grid_refinement_changes_estimate_under_one_percent(self):
        records = bs_series(n_days=12)[:2]
        coarse = solve_qrm(records, QrmConfig(n_s=21, n_tau=11))
        fine = solve_qrm(records, QrmConfig(n_s=41, n_tau=21, cg_max_iter=20000))
        assert abs(fine.est - coarse.est) <= 0.01 * abs(coarse.est)

    def test_deterministic_bit_identical(self):
        records = bs_series(n_days=12, spread_bp=10.0)[:2]
        a = solve_qrm(records, QrmConfig())
        b = solve_qrm(records, QrmConfig())
        assert a.est == b.est
        assert a.iterations == b.iterations
        assert np.array_equal(a.grid.u, b.grid.u)

    def test_nonconvergence_error_carries_residual(self):
        records = bs_series(n_days=12, spread_bp=10.0)[:2]
        with pytest.raises(ConvergenceError) as excinfo:
            solve_qrm(records, QrmConfig(cg_max_iter=1))
        assert excinfo.value.residual is not None
        assert excinfo.value.residual > 0

    def test_single_solve_tracks_exact_next_day_price(self):
        # One representative day pair from an exactly priced path; the
        # next-day closed-form repricing is the oracle.
        records = bs_series(n_days=30, sigma=0.2, seed=7, spread_bp=0.0)
        result = solve_qrm(records[8:10], QrmConfig())
        truth = records[10].option_mid
        assert abs(result.est - truth) / truth <= 0.02

    def test_minimizer_json(self):
        records = bs_series(n_days=12)[:2]
        payload = solve_qrm(records, QrmConfig()).to_json()
        assert set(payload) == {"est", "residual", "iterations", "n_s", "n_tau"}
        assert payload["n_s"] == 21 and payload["n_tau"] == 11


class TestEstimateSeries:
    def test_two_records_one_estimate(self):
        series = estimate_series(bs_series(n_days=12)[:2], QrmConfig())
        assert len(series) == 2
        assert series[0] is None
        assert isinstance(series[1], Minimizer)

    def test_zero_vol_constant_series_estimates_the_mid(self):
        records = make_series([5.0] * 6, spread=0.2, implied_vol=0.0)
        series = estimate_series(records, QrmConfig())
        assert all(m.est == 5.0 for m in series[1:])

    def test_oracle_recovery_on_exact_bs_path(self):
        # Next-day repricing of the generated path is the oracle.
        records = bs_series(n_days=60, sigma=0.2, seed=7, spread_bp=0.0)
        series = estimate_series(records, QrmConfig())
        errors = [
            abs(series[k].est - records[k + 1].option_mid) / records[k + 1].option_mid
            for k in range(1, len(records) - 1)
        ]
        assert sum(errors) / len(errors) <= 0.03

    def test_errors_carry_day_index(self):
        records = bs_series(n_days=12, spread_bp=10.0)
        with pytest.raises(ConvergenceError, match="day 1"):
            estimate_series(records, QrmConfig(cg_max_iter=1))

    def test_requires_two_records(self):
        with pytest.raises(DataError):
            estimate_series([make_record()], QrmConfig())


class TestConfigAndGrid:
    def test_config_validation(self):
        with pytest.raises(DataError):
            QrmConfig(n_s=4)
        with pytest.raises(DataError):
            QrmConfig(n_tau=2)
        with pytest.raises(DataError):
            QrmConfig(beta=0.0)
        with pytest.raises(DataError):
            QrmConfig(cg_max_iter=0)

    def test_grid_validation(self):
        with pytest.raises(DataError):
            QrmGrid(
                s_values=np.array([1.0, 0.5, 2.0]),
                tau_values=np.array([0.0, 1.0]),
                u=np.zeros((3, 2)),
            )
        with pytest.raises(DataError):
            QrmGrid(
                s_values=np.array([1.0, 2.0]),
                tau_values=np.array([0.0, 1.0]),
                u=np.full((2, 2), np.nan),
            )

    def test_grid_covers_at_least_the_quoted_spread(self):
        records = bs_series(n_days=12, spread_bp=500.0)[:2]
        system = assemble_system(records, QrmConfig())
        today = records[-1]
        assert system.s_values[0] <= today.stock_bid + 1e-9
        assert system.s_values[-1] >= today.stock_ask - 1e-9
