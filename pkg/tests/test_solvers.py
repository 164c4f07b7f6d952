import io
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from magnetotrio import (ConfigSolution, DegenerateError, DomainError,
                         NoSolution, SystemSpec, ValidityError,
                         build_initial_state, closed_form_B_II,
                         closed_form_B_III, conserved_closed_forms,
                         evaluate_p6, hamiltonian, helium_closed_forms,
                         helium_cubic_root, helium_quartic_coefficients,
                         newton_balance, p6_coefficients, pair_distance_min,
                         pair_virial, pseudomomentum, residuals_config_I,
                         residuals_config_II, residuals_config_III,
                         residuals_nbody_II, solve_config_I_identical,
                         solve_config_I_v3zero, solve_config_II,
                         solve_config_III, solve_nbody_II,
                         third_pseudomomentum_x, write_catalog)
from magnetotrio.invariants import (angular_momentum,
                                    individual_angular_momenta,
                                    kinetic_energies)
from magnetotrio.solvers import (catalog_header, collinear_kappa,
                                 helium_pattern)

CBRT_5_4 = (5.0 / 4.0) ** (1.0 / 3.0)       # 1.0772173450159419
CBRT_10 = 10.0 ** (1.0 / 3.0)               # 2.1544346900318838


def _direct_value(spec_b, state, name):
    q, v = state.positions, state.velocities
    if name == "H":
        return hamiltonian(spec_b, q, v)
    if name == "Lz":
        return angular_momentum(spec_b, q, v)
    if name == "K2":
        K = pseudomomentum(spec_b, q, v)
        return float(K @ K)
    if name == "pair_virial":
        return pair_virial(spec_b, q, v)
    if name == "k3x":
        return third_pseudomomentum_x(spec_b, q, v)
    if name.startswith("l"):
        return float(individual_angular_momenta(spec_b, q, v)[int(name[1:]) - 1])
    if name.startswith("T"):
        return float(kinetic_energies(spec_b, v)[int(name[1:]) - 1])
    raise KeyError(name)


class TestClosedFormFields:
    def test_sign_map_between_sectors(self, spec4, rng):
        # B_III(v1, v2, v3) = -B_II(v1, v2, -v3), coded independently
        for _ in range(50):
            v1, v2, v3 = rng.uniform(0.1, 10.0, 3)
            try:
                a = closed_form_B_III(spec4, v1, v2, v3)
                b = closed_form_B_II(spec4, v1, v2, -v3)
            except DegenerateError:
                continue
            assert a == pytest.approx(-b, rel=1e-12)

    def test_degenerate_denominator(self, spec4):
        # e1 v1 + e2 v2 + e3 v3 = 0 kills the field expression
        with pytest.raises(DegenerateError):
            closed_form_B_II(spec4, 1.0, 4.0, 1.0)  # 3 - 4 + 1 = 0

    def test_kappa(self, spec4):
        v = (1.0, 2.0, 3.0)
        expected = (3.0 * 1 - 1 * 2 + 1 * 3) / (1 * 1 + 1 * 2 + 3 * 3)
        assert collinear_kappa(spec4, v) == pytest.approx(expected, rel=1e-15)
        with pytest.raises(DegenerateError):
            collinear_kappa(SystemSpec(1.0, (1.0, 1.0), (1.0, 1.0)),
                            (1.0, -1.0))


class TestEliminationSextic:
    def test_vanishes_for_equal_ratios(self, electrons):
        coeffs = p6_coefficients(electrons)
        assert all(c == 0.0 for c in coeffs.values())

    def test_three_charges_only(self):
        with pytest.raises(DomainError):
            p6_coefficients(SystemSpec(1.0, (1.0, 1.0), (1.0, 1.0)))

    def test_neutral_pair_factorization(self, helium, rng):
        # P6 = e^3 (2m + m1) * v1 * quartic = 6 v1 q(v1) for (-2,1,1)/(4,1,1)
        for _ in range(10):
            v1, v2, v3 = rng.uniform(0.5, 5.0, 3)
            q = np.polyval(helium_quartic_coefficients(v2, v3), v1)
            assert evaluate_p6(helium, v1, v2, v3) == pytest.approx(6.0 * v1 * q,
                                                                    rel=1e-9)

    @given(s=st.floats(0.25, 4.0), v1=st.floats(0.2, 5.0),
           v2=st.floats(0.2, 5.0), v3=st.floats(0.2, 5.0))
    @settings(max_examples=50, deadline=None)
    def test_degree_six_homogeneity(self, s, v1, v2, v3):
        spec = SystemSpec(1.0, (3.0, -1.0, 1.0), (1.0, 1.0, 3.0))
        base = evaluate_p6(spec, v1, v2, v3)
        scaled = evaluate_p6(spec, s * v1, s * v2, s * v3)
        # round-off floor from the summed-term magnitude at the scaled point
        floor = (sum(abs(a) for a in p6_coefficients(spec).values())
                 * (s * max(v1, v2, v3)) ** 6 * 1e-12)
        assert scaled == pytest.approx(s ** 6 * base, rel=1e-9, abs=floor)


class TestResidualSystems:
    def test_config_II_is_nbody_specialization(self, spec4, rng):
        v = tuple(rng.uniform(0.5, 3.0, 3))
        a = residuals_config_II(spec4, v, 0.7, 1.3)
        b = residuals_nbody_II(spec4, v, 0.7, 1.3)
        assert np.array_equal(a, b)

    @given(s=st.floats(0.25, 4.0))
    @settings(max_examples=50, deadline=None)
    def test_collinear_scaling_covariance(self, s):
        # (v, omega, B) -> (s v, s^3 omega, s^3 B) scales every term by s^4
        spec = SystemSpec(1.0, (3.0, -1.0, 1.0), (1.0, 1.0, 3.0))
        v = np.array([0.5, 1.1, 2.3])
        base = residuals_config_II(spec, v, 0.7, 1.3)
        scaled = residuals_config_II(spec, s * v, s ** 3 * 0.7, s ** 3 * 1.3)
        assert np.allclose(scaled, s ** 4 * base, rtol=1e-9)

    def test_wrong_sizes(self, spec4):
        with pytest.raises(DomainError):
            residuals_nbody_II(spec4, (1.0, 2.0), 1.0, 1.0)
        with pytest.raises(DomainError):
            residuals_config_III(SystemSpec(1.0, (1.0, 1.0), (1.0, 1.0)),
                                 (1.0, 2.0), 1.0, 1.0)


class TestNeutralPairWindow:
    def test_pattern_detection(self, helium, spec4):
        assert helium_pattern(helium) == (1.0, 4.0, 1.0)
        assert helium_pattern(spec4) is None
        # breaking m2 = m3 breaks the pattern
        assert helium_pattern(SystemSpec(1.0, (-2.0, 1.0, 1.0),
                                         (4.0, 1.0, 2.0))) is None

    def test_window_edge_value(self):
        lam = helium_cubic_root(1.0)
        assert lam == pytest.approx(117.69019695759704, rel=1e-12)
        # independent check by plain bisection on the cubic
        f = lambda x: x ** 3 - 117 * x ** 2 - 81 * x - 27
        lo, hi = 100.0, 200.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(lo) * f(mid) <= 0:
                hi = mid
            else:
                lo = mid
        assert lam == pytest.approx(0.5 * (lo + hi), abs=1e-9)

    def test_window_edge_scales_linearly(self):
        assert helium_cubic_root(2.5) == pytest.approx(2.5 * helium_cubic_root(1.0),
                                                       rel=1e-12)

    def test_quartic_roots(self):
        roots = np.roots(helium_quartic_coefficients(1.0, 150.0))
        real = sorted(r.real for r in roots if abs(r.imag) < 1e-9)
        assert real == pytest.approx([140.51161826097874, 160.3656955561019],
                                     rel=1e-10)
        roots = np.roots(helium_quartic_coefficients(1.0, 300.0))
        real = sorted(r.real for r in roots if abs(r.imag) < 1e-9)
        assert real == pytest.approx([286.350956842006, 314.532130183436],
                                     rel=1e-10)

    def test_closed_forms_solve_the_raw_system(self, helium):
        v1 = 140.51161826097874
        omega, B = helium_closed_forms(helium, v1, 1.0, 150.0)
        assert B == pytest.approx(closed_form_B_II(helium, v1, 1.0, 150.0),
                                  rel=1e-12)
        res = residuals_config_II(helium, (v1, 1.0, 150.0), omega, B)
        # raw residuals, gated relative to the huge term scale ~ B e v1
        assert np.abs(res).max() < 1e-10 * abs(B) * v1

    def test_algebra_roots_are_not_trajectories(self, helium):
        sols = solve_config_II(helium, v3_values=[150.0],
                               require_certified=False)
        assert len(sols) == 2 and not any(s.certified for s in sols)
        # measured imbalances 0.0601 and 1.096 -- far above the 1e-6 gate
        assert min(s.newton_balance for s in sols) > 0.01
        assert max(s.newton_balance for s in sols) > 0.5
        assert all("speed ordering outside the sector" in s.notes for s in sols)

    def test_certified_search_reports_why(self, helium):
        with pytest.raises(NoSolution, match="fail certification"):
            solve_config_II(helium, v3_values=[150.0])
        # below the window the quartic shortcut does not even apply
        with pytest.raises(NoSolution) as err:
            solve_config_II(helium, v3_values=[100.0])
        assert "quartic" not in str(err.value)


class TestConfigIThirdAtRest:
    def test_worked_species(self, worked):
        sol = solve_config_I_v3zero(worked)[0]
        assert sol.omega == pytest.approx(18 / 91, rel=1e-15)
        assert sol.B == pytest.approx(162 / 637, rel=1e-15)
        assert sol.v[1] == pytest.approx(2.0, rel=1e-15)   # v2 = v1 sqrt(e2/e1)
        assert sol.certified
        assert sol.residual_norm < 1e-12

    def test_raw_residuals_at_solution(self, worked):
        from dataclasses import replace
        spec_b = replace(worked, B=162 / 637)
        res = residuals_config_I(spec_b, 1.0, 2.0, 0.0, 18 / 91, 0.0)
        assert np.abs(res).max() < 1e-12

    def test_heavy_first_charge_has_no_rotation(self):
        # moving the heavy mass onto the first charge flips the closed-form
        # frequency to omega = -342/91: algebra, but not a rotation
        swapped = SystemSpec(1.0, (1.0, 4.0, 1.0), (5.0, 1.0, 1.0))
        with pytest.raises(ValidityError, match="-3.75824"):
            solve_config_I_v3zero(swapped)

    def test_opposite_sign_pair_rejected(self):
        with pytest.raises(DomainError):
            solve_config_I_v3zero(SystemSpec(1.0, (1.0, -1.0, 1.0),
                                             (1.0, 1.0, 1.0)))

    def test_identical_pair_deferred(self, electrons_b2):
        with pytest.raises(DegenerateError, match="identical"):
            solve_config_I_v3zero(electrons_b2)


class TestConfigIIdenticalPair:
    def test_minimum_separation(self, electrons_b2):
        assert pair_distance_min(electrons_b2) == pytest.approx(CBRT_10,
                                                                rel=1e-14)

    def test_no_minimum_when_branches_always_real(self):
        spec = SystemSpec(2.0, (-1.0, -1.0, 1.0), (1.0, 1.0, 1.0))
        assert pair_distance_min(spec) is None

    def test_branches_coincide_at_critical_separation(self, electrons_b2):
        sols = solve_config_I_identical(electrons_b2, CBRT_10)
        assert len(sols) == 2
        assert abs(sols[0].v[0] - sols[1].v[0]) < 1e-10
        assert sols[0].v[0] == pytest.approx(CBRT_5_4, rel=1e-12)
        assert all(s.certified for s in sols)

    def test_below_critical_separation(self, electrons_b2):
        with pytest.raises(NoSolution, match="below the critical"):
            solve_config_I_identical(electrons_b2, 0.9 * CBRT_10)

    def test_branches_split_above_critical(self, electrons_b2):
        plus, minus = solve_config_I_identical(electrons_b2, 2 * CBRT_10)
        assert plus.branch == "+" and minus.branch == "-"
        assert plus.v[0] > minus.v[0]
        assert plus.v[0] == pytest.approx(4.16972380810184, rel=1e-12)
        assert plus.omega == pytest.approx(1.9354143466934852, rel=1e-12)
        assert all(s.certified for s in (plus, minus))

    def test_rotation_sense_follows_field_sign(self, electrons, electrons_b2):
        for s in solve_config_I_identical(electrons_b2, 2 * CBRT_10):
            assert s.sense == "ccw"
        for s in solve_config_I_identical(electrons, 2 * CBRT_10):
            assert s.sense == "cw"

    def test_moving_third_charge_needs_common_ratio(self):
        spec = SystemSpec(2.0, (-1.0, -1.0, -2.0), (1.0, 1.0, 1.0))
        solve_config_I_identical(spec, 3.0)  # at rest: fine
        with pytest.raises(ValidityError, match="charge-to-mass"):
            solve_config_I_identical(spec, 3.0, v3=1.0)

    def test_built_state_geometry(self, electrons):
        # critical-separation pair with the third electron on its own
        # circle: the snapshot is pinned to 17 digits
        sols = solve_config_I_identical(electrons, pair_distance_min(electrons),
                                        v3=1.0)
        sol = sols[0]
        assert sol.omega == pytest.approx(1.0, rel=1e-12)
        assert sol.omega3 == 2.0
        spec_b, state = build_initial_state(sol, electrons)
        assert spec_b.B == electrons.B
        from conftest import electron_orbit
        _, pos, vel = electron_orbit()
        assert np.array_equal(state.positions, pos)
        assert np.array_equal(state.velocities, vel)


class TestConfigII:
    def test_reference_row(self, spec4):
        sol = solve_config_II(spec4, v3_values=[1.5])[0]
        assert sol.v[0] == pytest.approx(0.54568864134101336, rel=1e-12)
        assert sol.omega == pytest.approx(0.36345312416589365, rel=1e-12)
        assert sol.B == pytest.approx(1.0281968374158392, rel=1e-12)
        assert sol.sense == "cw" and sol.certified
        assert sol.residual_norm < 1e-12
        assert sol.newton_balance < 1e-10

    def test_speed_ordering_in_certified_rows(self, spec4):
        sols = solve_config_II(spec4, v3_values=np.geomspace(1.5, 20.0, 4))
        assert len(sols) >= 4
        for s in sols:
            assert s.v[0] < s.v[1] < s.v[2]
            assert s.certified

    def test_equal_ratio_no_go(self, electrons):
        with pytest.raises(NoSolution, match="charge-to-mass"):
            solve_config_II(electrons)


class TestConfigIII:
    def test_reference_row(self, spec4):
        sol = solve_config_III(spec4, v3_values=[0.6])[0]
        assert sol.v[0] == pytest.approx(5.7736244725433368, rel=1e-12)
        assert sol.omega == pytest.approx(5.0830263123554538, rel=1e-12)
        assert sol.B == pytest.approx(1.6081208333731387, rel=1e-12)
        assert sol.certified
        assert sol.v[0] > sol.v[1] > sol.v[2] > 0

    def test_anti_phase_neutral_relabeling(self):
        # the neutral identical-pair species admits anti-phase rotations
        # once the heavy charge sits in the middle slot
        spec = SystemSpec(1.0, (-1.0, 2.0, -1.0), (1.0, 4.0, 1.0))
        sol = solve_config_III(spec, v3_values=[0.5])[0]
        assert sol.v[0] == pytest.approx(1.8462075589388545, rel=1e-12)
        assert sol.omega == pytest.approx(6.4881873018665424, rel=1e-12)
        assert sol.B == pytest.approx(53.05536408581068, rel=1e-12)
        assert sol.certified

    def test_raw_residuals_at_reference_row(self, spec4):
        sol = solve_config_III(spec4, v3_values=[0.6])[0]
        sigma = 1.0 if sol.sense == "cw" else -1.0
        res = residuals_config_III(spec4, sol.v, sigma * sol.omega, sol.B)
        scale = abs(sol.B) * max(sol.v)
        assert np.abs(res).max() < 1e-10 * scale

    def test_third_speed_must_be_smallest(self, spec4):
        with pytest.raises(NoSolution):
            solve_config_III(spec4, v3_values=[1.5])


class TestNbodyCollinear:
    def test_three_charge_catalog_matches_dedicated_solver(self, spec4):
        grid = [1.5, 4.0]
        a = solve_config_II(spec4, v3_values=grid)
        b = solve_nbody_II(spec4, vn_values=grid)
        assert len(a) == len(b)
        for sa, sb in zip(a, b):
            assert np.allclose(sa.v, sb.v, rtol=1e-10)
            assert sa.B == pytest.approx(sb.B, rel=1e-10)
            assert sa.omega == pytest.approx(sb.omega, rel=1e-10)

    def test_four_charge_row(self):
        spec = SystemSpec(1.0, (3.0, -1.0, 1.0, 2.0), (1.0, 1.0, 3.0, 2.0))
        sols = solve_nbody_II(spec, vn_values=[3.0])
        assert len(sols) == 1
        sol = sols[0]
        assert np.allclose(sol.v, (0.6459345560691812, 1.0,
                                   2.754118664095354, 3.0), rtol=1e-9)
        assert sol.omega == pytest.approx(0.11431830587065503, rel=1e-9)
        assert sol.B == pytest.approx(0.18764170434225977, rel=1e-9)
        assert sol.certified
        assert sol.rigidity < 1e-6

    def test_four_charge_residuals_at_row(self):
        spec = SystemSpec(1.0, (3.0, -1.0, 1.0, 2.0), (1.0, 1.0, 3.0, 2.0))
        sol = solve_nbody_II(spec, vn_values=[3.0])[0]
        res = residuals_nbody_II(spec, sol.v, sol.omega, sol.B)
        assert np.abs(res).max() < 1e-10

    def test_small_n_rejected(self):
        with pytest.raises(DomainError):
            solve_nbody_II(SystemSpec(1.0, (1.0, 1.0), (1.0, 1.0)))

    def test_equal_ratio_no_go_any_n(self):
        spec = SystemSpec(2.0, (1.0, 2.0, 3.0, 4.0), (1.0, 2.0, 3.0, 4.0))
        with pytest.raises(NoSolution, match="charge-to-mass"):
            solve_nbody_II(spec)


class TestConservedForms:
    def test_third_at_rest_table(self, worked):
        sol = solve_config_I_v3zero(worked)[0]
        spec_b, state = build_initial_state(sol, worked)
        forms = conserved_closed_forms(worked, sol)
        assert forms.pop("B_check") == pytest.approx(sol.B, rel=1e-12)
        for name, value in forms.items():
            direct = _direct_value(spec_b, state, name)
            assert value == pytest.approx(direct, abs=1e-8), name

    def test_identical_pair_table(self, electrons):
        sol = solve_config_I_identical(electrons, pair_distance_min(electrons),
                                       v3=1.0)[0]
        spec_b, state = build_initial_state(sol, electrons)
        forms = conserved_closed_forms(electrons, sol)
        for name, value in forms.items():
            if name == "H":
                continue
            direct = _direct_value(spec_b, state, name)
            assert value == pytest.approx(direct, abs=1e-10), name
        # the tabulated H drops the guiding-center kinetic term and scales
        # the Coulomb part by 1/4; the deviation closes exactly
        rho = 2 * sol.v[0] / sol.omega
        e, e3 = electrons.charges[0], electrons.charges[2]
        E_C = e * (e + 4 * e3) / rho
        H_direct = _direct_value(spec_b, state, "H")
        v3 = sol.v[2]
        assert H_direct - forms["H"] == pytest.approx(
            electrons.masses[2] * v3 ** 2 + 0.75 * E_C, rel=1e-12)

    def test_in_phase_collinear_table(self, spec4):
        sol = solve_config_II(spec4, v3_values=[1.5])[0]
        spec_b, state = build_initial_state(sol, spec4)
        forms = conserved_closed_forms(spec4, sol)
        for name in ("Lz", "l2", "K2", "pair_virial"):
            direct = _direct_value(spec_b, state, name)
            assert forms[name] == pytest.approx(direct, abs=1e-8), name
        # the tabulated H carries signed inverse separations, which in this
        # sector flips the Coulomb part: form = 2T - H
        T = 0.5 * float(np.dot(spec4.masses, np.asarray(sol.v) ** 2))
        assert forms["H"] == pytest.approx(
            2 * T - _direct_value(spec_b, state, "H"), rel=1e-10)

    def test_anti_phase_collinear_table(self, spec4):
        sol = solve_config_III(spec4, v3_values=[0.6])[0]
        spec_b, state = build_initial_state(sol, spec4)
        forms = conserved_closed_forms(spec4, sol)
        for name, value in forms.items():
            direct = _direct_value(spec_b, state, name)
            assert value == pytest.approx(direct, abs=1e-8), name

    def test_unknown_configuration(self, spec4):
        bogus = ConfigSolution(config="spiral", branch="0", v=(1.0, 1.0, 1.0),
                               omega=1.0, B=1.0)
        with pytest.raises(DomainError):
            conserved_closed_forms(spec4, bogus)


class TestCertification:
    def test_newton_balance_flat_on_true_solution(self, spec4):
        sol = solve_config_II(spec4, v3_values=[1.5])[0]
        assert newton_balance(sol, spec4) < 1e-10

    def test_newton_balance_large_on_false_root(self, helium):
        sol = solve_config_II(helium, v3_values=[150.0],
                              require_certified=False)[0]
        assert newton_balance(sol, helium) > 0.01


class TestCatalog:
    def test_reference_row_format(self, spec4):
        sol = solve_config_II(spec4, v3_values=[1.5])[0]
        buf = io.StringIO()
        write_catalog([sol], buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == catalog_header()
        assert lines[1].startswith("II,0,0.54568864134101336,1,1.5,")

    def test_mirror_sense_suffix(self, electrons_b2):
        sols = solve_config_I_identical(electrons_b2, 2 * CBRT_10)
        buf = io.StringIO()
        write_catalog(sols, buf)
        branches = [line.split(",")[1] for line in buf.getvalue().splitlines()[1:]]
        assert branches == ["+:ccw", "-:ccw"]

    def test_extra_speeds_ride_in_branch_tag(self):
        spec = SystemSpec(1.0, (3.0, -1.0, 1.0, 2.0), (1.0, 1.0, 3.0, 2.0))
        sol = solve_nbody_II(spec, vn_values=[3.0])[0]
        buf = io.StringIO()
        write_catalog([sol], buf)
        row = buf.getvalue().splitlines()[1]
        assert row.split(",")[1] == "1;v4=3"

    def test_rows_sorted_by_config_then_speed(self, spec4):
        sols = solve_config_III(spec4, v3_values=[0.8, 0.6])
        sols += solve_config_II(spec4, v3_values=[1.5])
        buf = io.StringIO()
        write_catalog(sols, buf)
        rows = [line.split(",") for line in buf.getvalue().splitlines()[1:]]
        keys = [(r[0], float(r[4])) for r in rows]
        assert keys == sorted(keys)
