import numpy as np
import pytest

from ocmflow.diagnostics import (CSV_FIELDS, J_functional, Monitor, V_functional, continuum_residual,
                                 f_condition_check, holder_gap, identity_check_b, identity_check_rho, residual)
from ocmflow.flow import FlowConfig, FlowState, rk4_step, run, step
from ocmflow.oracles import axisymmetric_reduction, sphere_integral
from ocmflow.orlicz import OrliczModel
from ocmflow.sphere import ScalarField, build_grid

from conftest import field, xyz_field

P2 = lambda t, p: 1 + 0.1 * (3 * np.cos(t) ** 2 - 1) / 2 + 0 * p  # noqa: E731


def ones(grid, c=1.0):
    return ScalarField(grid, np.full(grid.shape, c))


class TestFunctionals:
    @pytest.mark.parametrize("r,p", [(1.0, 2), (0.7, 3), (2.0, 2.5)])
    def test_J_sphere(self, grid32, r, p):
        J = J_functional(ones(grid32, r), ones(grid32), OrliczModel.power(p))
        assert J == pytest.approx(4 * np.pi * r**p / p, rel=1e-13)

    def test_J_refinement(self, grid32, grid64):
        m = OrliczModel.power(2)
        a = J_functional(field(grid32, P2), ones(grid32), m)
        b = J_functional(field(grid64, P2), ones(grid64), m)
        assert abs(a - b) <= 1e-9 * b
        want = sphere_integral(lambda t, p: P2(t, p) ** 2 / 2, axisymmetric=True)
        assert abs(a - want) <= 1e-9 * want

    @pytest.mark.parametrize("k,power", [(1, 2), (2, 3)])
    def test_V_sphere(self, grid32, k, power):
        assert V_functional(ones(grid32, 1.5), k) == pytest.approx(4 * np.pi * 1.5**power, rel=1e-12)

    def test_V_translated(self, grid32):
        h = xyz_field(grid32, lambda x: 1 + x @ np.array([0.0, 0.18, 0.24]))
        assert V_functional(h, 1) == pytest.approx(4 * np.pi, rel=1e-12)


class TestHolderAndResidual:
    def test_gap_zero_on_sphere(self, grid32):
        assert abs(holder_gap(ones(grid32, 1.7), ones(grid32), OrliczModel.power(2), 1)) <= 1e-12

    def test_gap_positive_and_matches_dV(self, grid32):
        cfg = FlowConfig(k=1, model=OrliczModel.power(2), f=ones(grid32))
        h = field(grid32, P2)
        gap = holder_gap(h, cfg.f, cfg.model, 1)
        assert gap > 0
        errs = []
        for dt in (2e-3, 1e-3, 5e-4):
            h1 = ScalarField(grid32, rk4_step(h.values, dt, cfg))
            dV = (V_functional(h1, 1) - V_functional(h, 1)) / dt
            errs.append(abs(dV - 2 * gap))
        assert errs[1] < 0.6 * errs[0] and errs[2] < 0.6 * errs[1]

    def test_residual_sphere(self, grid32):
        m = OrliczModel.power(3)
        res = residual(ones(grid32, 1.2), ones(grid32), m, 1)
        want = 1 / (m.phi(1.2) * 1.2)
        assert res.c_ls == pytest.approx(want, rel=1e-12)
        assert res.c_eta == pytest.approx(want, rel=1e-12)
        assert res.residual_sup <= 1e-12 and res.residual_l2 <= 1e-12

    def test_residual_rescaled_f(self, grid32):
        m = OrliczModel.power(2)
        res = residual(ones(grid32), ones(grid32, 2.0), m, 1)
        assert res.c_ls == pytest.approx(2.0 / m.phi(1.0), rel=1e-12)
        assert res.residual_sup <= 1e-12

    def test_continuum_residual_sphere(self, grid32):
        res = continuum_residual(ones(grid32, 1.0), lambda x: np.ones(x.shape[:-1]), OrliczModel.power(2), 1,
                                 build_grid(2, 48, 96))
        assert res.residual_sup <= 1e-12


class TestFCondition:
    @pytest.mark.parametrize("k", [1, 2])
    def test_constant(self, grid32, k):
        fc = f_condition_check(ones(grid32), k, 2.0)
        assert fc.passed and abs(fc.min_eigenvalue - (k + 1)) <= 1e-12

    def test_axisymmetric_against_oracle(self, grid64):
        k, a = 1, 2.0
        f = xyz_field(grid64, lambda x: (1 + 0.9 * x[..., 2]) ** (k + a))
        fc = f_condition_check(f, k, a)
        # radii of g = f^(-1/(k+a)) from the 1-D reduction give Hess g + g I
        M = 1024
        tt = (np.arange(M) + 0.5) * np.pi / M
        _, radii, _ = axisymmetric_reduction(1 / (1 + 0.9 * np.cos(tt)), 1, grid64.theta)
        g = 1 / (1 + 0.9 * np.cos(grid64.theta))
        eig = (k + a) * radii + (k + 1 - (k + a)) * g[:, None]
        assert fc.min_eigenvalue == pytest.approx(eig.min(), rel=1e-6)
        assert fc.passed == (eig.min() > 0)

    def test_high_frequency_fails(self, grid32):
        f = field(grid32, lambda t, p: 1 + 0.3 * np.cos(6 * p) * np.sin(t) ** 6)
        fc = f_condition_check(f, 1, 1.0)
        assert not fc.passed and fc.min_eigenvalue < 0
        assert len(fc.angles) == 2


class TestIdentity:
    def test_stationary_sphere(self, grid32):
        cfg = FlowConfig(k=1, model=OrliczModel.power(2), f=ones(grid32))
        h0 = ones(grid32)
        h1 = ScalarField(grid32, rk4_step(h0.values, 1e-3, cfg))
        assert identity_check_rho(h0, h1, 1e-3, cfg) <= 1e-10

    @pytest.mark.parametrize("k", [1, 2])
    def test_defect_first_order(self, grid32, k):
        cfg = FlowConfig(k=k, model=OrliczModel.power(k + 1), f=ones(grid32))
        h = xyz_field(grid32, lambda x: 1 + 0.05 * x[..., 0] * x[..., 2] + 0.05 * x[..., 1] ** 2)
        defects = []
        for dt in (4e-4, 2e-4, 1e-4):
            h1 = ScalarField(grid32, rk4_step(h.values, dt, cfg))
            defects.append(identity_check_rho(h, h1, dt, cfg))
        assert defects[1] <= 0.5 * defects[0] and defects[2] <= 0.5 * defects[1]

    def test_circle_fine(self):
        g = build_grid(1, n_lon=256)
        cfg = FlowConfig(k=1, model=OrliczModel.power(2), f=ones(g))
        h = ScalarField(g, 1 + 0.1 * np.cos(2 * g.theta))
        dt = 1e-5
        h1 = ScalarField(g, rk4_step(h.values, dt, cfg))
        assert identity_check_rho(h, h1, dt, cfg) <= 1e-6


class TestRadiiMatrixIdentity:
    def _defects(self, g, h, cfg, dts):
        return [identity_check_b(h, ScalarField(g, rk4_step(h.values, dt, cfg)), dt, cfg) for dt in dts]

    def test_circle_b_and_inverse_second_order(self):
        g = build_grid(1, n_lon=64)
        cfg = FlowConfig(k=1, model=OrliczModel.power(2), f=ones(g))
        h = ScalarField(g, 1 + 0.1 * np.cos(2 * g.theta))
        d = self._defects(g, h, cfg, (4e-3, 2e-3, 1e-3))
        for name in ("b", "b_inverse"):
            assert d[0][name] / d[1][name] > 3.5 and d[1][name] / d[2][name] > 3.5
        assert d[2]["b"] < 1e-5

    def test_sphere_trace_second_order(self):
        g = build_grid(2, 16, 32)
        f = xyz_field(g, lambda x: (1 + 0.2 * x[..., 2]) ** 3)
        cfg = FlowConfig(k=1, model=OrliczModel.power(3), f=f, lon_filter="none")
        h = xyz_field(g, lambda x: 1 + 0.05 * x[..., 0] * x[..., 2] + 0.05 * x[..., 1] ** 2)
        d = self._defects(g, h, cfg, (1e-4, 5e-5))
        assert d[0]["trace_b"] / d[1]["trace_b"] > 3.0
        assert d[1]["trace_b"] < 1e-6

    def test_requires_k1(self, grid32):
        cfg = FlowConfig(k=2, model=OrliczModel.power(3), f=ones(grid32))
        with pytest.raises(ValueError):
            identity_check_b(ones(grid32), ones(grid32), 1e-3, cfg)


class TestMonitor:
    def test_records_and_bounds(self):
        g = build_grid(2, 16, 32)
        cfg = FlowConfig(k=1, model=OrliczModel.power(2), f=ones(g), step_max=50)
        mon = Monitor()
        run(cfg, field(g, P2), [mon])
        assert len(mon.records) == 51
        rec = mon.records[-1]
        assert rec.h_min <= rec.h_max and rec.rho_min <= rec.rho_max and rec.sigma_min <= rec.sigma_max
        assert rec.kappa_max == pytest.approx(1 / rec.min_radius)
        assert len(rec.row()) == len(CSV_FIELDS)
        b = mon.bounds()
        assert b["h_floor"] > 0 and b["min_radius_floor"] > 0 and b["kappa_ceiling"] < np.inf
        assert not mon.violations

    def test_violation_flagged(self):
        from ocmflow.diagnostics import DiagnosticsRecord

        mon = Monitor()
        base = dict.fromkeys(CSV_FIELDS, 1.0)
        mon(DiagnosticsRecord(**base), None)
        mon(DiagnosticsRecord(**{**base, "V": 0.5, "holder_gap": -1.0}), None)
        assert len(mon.violations) == 2
