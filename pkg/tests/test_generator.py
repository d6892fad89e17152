"""Generator hierarchy: term-by-term solving, transforms, effective Hamiltonians."""

from fractions import Fraction

import numpy as np
import pytest
from scipy.linalg import expm

from anharme.algebra import Context, commutator
from anharme.generator import (
    EffectiveHamiltonian,
    Generator,
    QuadraticSpectrum,
    ResonantDenominator,
    anharmonic_series_term,
    quadrature_sum,
    solve_generator4,
    solve_generator6,
    transform_first_order,
    transform_state_first_order,
)

F = Fraction


@pytest.fixture
def single_mode():
    ctx = Context(1)
    spectrum = QuadraticSpectrum([F(1)])
    h4 = anharmonic_series_term(ctx, [1], 2, F(1))
    s4, n4 = h4.split_secular()
    g4 = solve_generator4(spectrum, n4)
    return ctx, spectrum, s4, n4, g4


class TestSeriesTerms:
    def test_quartic_prefactor(self):
        ctx = Context(1)
        h4 = anharmonic_series_term(ctx, [1], 2, F(1))
        assert h4 == ctx.x() ** 4 * F(1, 48)

    def test_sextic_prefactor(self):
        ctx = Context(1)
        h6 = anharmonic_series_term(ctx, [1], 3, F(1))
        assert h6 == ctx.x() ** 6 * F(1, 1440)

    def test_weighted_sum(self):
        ctx = Context(2, exact=False)
        q = quadrature_sum(ctx, [0.5, 0.25])
        assert complex(q.coefficient(((0, 1), (0, 0)))) == 0.5
        assert complex(q.coefficient(((0, 0), (1, 0)))) == 0.25


class TestFirstOrderGenerator:
    def test_reference_coefficients(self, single_mode):
        ctx, _, _, _, g4 = single_mode
        expected = ctx.polynomial(
            {
                ((4, 0),): F(1, 192),
                ((0, 4),): F(-1, 192),
                ((3, 1),): F(1, 24),
                ((1, 3),): F(-1, 24),
                ((2, 0),): F(1, 16),
                ((0, 2),): F(-1, 16),
            }
        )
        assert g4 == expected

    def test_structure(self, single_mode):
        _, _, _, _, g4 = single_mode
        gen = Generator(order4=g4, epsilon=F(1, 5))
        gen.validate()
        assert g4.dagger() == -g4
        assert g4.secular_part().is_zero()

    def test_defining_residual_vanishes(self, single_mode):
        ctx, spectrum, _, n4, g4 = single_mode
        assert (commutator(spectrum.h2(ctx), g4) - n4).is_zero()

    def test_support_matches_source(self, single_mode):
        _, _, _, n4, g4 = single_mode
        assert set(g4.terms) == set(n4.terms)

    def test_zero_input(self, single_mode):
        ctx, spectrum, _, _, _ = single_mode
        assert solve_generator4(spectrum, ctx.zero()).is_zero()

    def test_secular_input_rejected(self, single_mode):
        ctx, spectrum, s4, _, _ = single_mode
        with pytest.raises(ValueError):
            solve_generator4(spectrum, s4)

    def test_random_exact_residuals(self):
        rng = np.random.default_rng(31)
        ctx = Context(2)
        for _ in range(10):
            wa = F(int(rng.integers(3, 40)), int(rng.integers(1, 7)))
            wc = F(int(rng.integers(3, 40)), int(rng.integers(1, 7)))
            if wa in (wc, 3 * wc) or wc == 3 * wa:
                continue
            spectrum = QuadraticSpectrum([wa, wc])
            u = (F(int(rng.integers(1, 9)), 8), F(int(rng.integers(1, 9)), 8))
            n4 = anharmonic_series_term(ctx, u, 2, F(1)).nonsecular_part()
            g4 = solve_generator4(spectrum, n4)
            assert (commutator(spectrum.h2(ctx), g4) - n4).is_zero()

    def test_resonant_denominator(self):
        # omega_c = 3 omega_a makes the mixed a†^3 c monomial resonant
        ctx = Context(2)
        spectrum = QuadraticSpectrum([F(1), F(3)])
        n4 = anharmonic_series_term(ctx, [F(1, 2), F(1, 2)], 2, F(1)).nonsecular_part()
        with pytest.raises(ResonantDenominator):
            solve_generator4(spectrum, n4)

    def test_float_resonance_tolerance(self):
        ctx = Context(2, exact=False)
        spectrum = QuadraticSpectrum([1.0, 3.0 + 1e-12])
        n4 = anharmonic_series_term(ctx, [0.5, 0.5], 2, 1.0).nonsecular_part()
        with pytest.raises(ResonantDenominator):
            solve_generator4(spectrum, n4)


class TestTransformOperators:
    def test_single_mode_quadrature(self, single_mode):
        ctx, _, _, _, g4 = single_mode
        eps = F(1, 5)
        t = transform_first_order(ctx.x(), g4, eps)
        expected = ctx.polynomial(
            {
                ((0, 1),): 1 + eps / 8,
                ((1, 0),): 1 + eps / 8,
                ((1, 2),): eps / 8,
                ((2, 1),): eps / 8,
                ((0, 3),): -eps / 48,
                ((3, 0),): -eps / 48,
            }
        )
        assert t == expected

    def test_h2_transform_adds_nonsecular_source(self, single_mode):
        ctx, spectrum, _, n4, g4 = single_mode
        eps = F(1, 7)
        h2 = spectrum.h2(ctx)
        assert transform_first_order(h2, g4, eps) == h2 + n4 * eps

    def test_epsilon_type_guard(self, single_mode):
        ctx, _, _, _, g4 = single_mode
        with pytest.raises(TypeError):
            transform_first_order(ctx.x(), g4, 0.2)

    def test_order_of_accuracy_against_expm(self, single_mode):
        ctx, _, _, _, g4 = single_mode
        dim, interior = 16, 6
        gm = g4.to_matrix(dim)
        om = ctx.x().to_matrix(dim)
        block = slice(0, interior)
        diffs = []
        eps_values = (0.05, 0.1, 0.2)
        for eps in eps_values:
            conj = expm(-eps * gm) @ om @ expm(eps * gm)
            first = transform_first_order(ctx.x(), g4, F(str(eps))).to_matrix(dim)
            diffs.append(np.linalg.norm((conj - first)[block, block]))
        slope = np.polyfit(np.log(eps_values), np.log(diffs), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.15)


class TestTransformState:
    def test_identity_state_fixed(self, single_mode):
        ctx, _, _, _, g4 = single_mode
        rho = np.eye(8) / 8
        out = transform_state_first_order(rho, g4.to_matrix(8), 0.2)
        assert np.allclose(out, rho)

    def test_epsilon_zero_is_identity(self, single_mode):
        ctx, _, _, _, g4 = single_mode
        rng = np.random.default_rng(32)
        a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        out = transform_state_first_order(rho, g4.to_matrix(8), 0.0)
        assert np.allclose(out, rho)

    def test_expm_oracle_bound(self, single_mode):
        # |first-order map - exact conjugation| <= C eps^2 with C measured once
        ctx, _, _, _, g4 = single_mode
        dim = 12
        gm = g4.to_matrix(dim)
        rho = np.zeros((dim, dim), complex)
        rho[1, 1] = 1.0
        def diff(eps):
            exact = expm(-eps * gm) @ rho @ expm(eps * gm)
            approx = transform_state_first_order(rho, gm, eps)
            return np.linalg.norm(exact - approx)
        c = diff(0.05) / 0.05**2
        assert diff(0.2) <= 1.6 * c * 0.2**2

    def test_trace_renormalized(self, single_mode):
        ctx, _, _, _, g4 = single_mode
        rho = np.zeros((10, 10), complex)
        rho[2, 2] = 1.0
        out = transform_state_first_order(rho, g4.to_matrix(10), 0.2)
        assert np.trace(out).real == pytest.approx(1.0, abs=1e-14)

    def test_dimension_mismatch(self, single_mode):
        ctx, _, _, _, g4 = single_mode
        with pytest.raises(ValueError):
            transform_state_first_order(np.eye(4), g4.to_matrix(6), 0.1)


class TestEffectiveHamiltonian:
    def test_first_order_single_mode(self, single_mode):
        ctx, spectrum, s4, _, _ = single_mode
        eps = F(1, 5)
        h = EffectiveHamiltonian.from_secular(spectrum.h2(ctx) - s4 * eps)
        assert h.coefficient((1,)) == 1 - eps / 8
        assert h.coefficient((2,)) == -eps / 8
        assert h.coefficient((0,)) == F(1, 2) - eps * F(1, 16)

    def test_falling_factorial_conversion(self):
        ctx = Context(1)
        poly = ctx.polynomial({((2, 2),): 1})  # a†^2 a^2 = n(n-1)
        h = EffectiveHamiltonian.from_secular(poly)
        assert h.coefficient((2,)) == 1 and h.coefficient((1,)) == -1

    def test_matrix_is_diagonal_and_matches_energy(self):
        ctx = Context(2)
        poly = (
            ctx.number(0) * F(3, 2)
            + ctx.number(1) * F(1, 3)
            + ctx.number(0) * ctx.number(1) * F(1, 7)
        )
        h = EffectiveHamiltonian.from_secular(poly)
        mat = h.to_matrix((3, 4))
        assert np.allclose(mat, np.diag(np.diag(mat)))
        diag = np.diag(mat).real.reshape(3, 4)
        for na in range(3):
            for nc in range(4):
                assert diag[na, nc] == pytest.approx(h.energy((na, nc)))

    def test_commutes_with_number_matrices(self, single_mode):
        ctx, spectrum, s4, _, _ = single_mode
        h = EffectiveHamiltonian.from_secular(spectrum.h2(ctx) - s4 * F(1, 5))
        hm = h.to_matrix(8)
        nm = ctx.number().to_matrix(8)
        assert np.allclose(hm @ nm, nm @ hm)

    def test_nonsecular_input_rejected(self):
        ctx = Context(1)
        with pytest.raises(ValueError):
            EffectiveHamiltonian.from_secular(ctx.x())

    def test_constant_kept_in_data_skipped_in_matrix(self):
        h = EffectiveHamiltonian(1, {(0,): F(5), (1,): F(2)})
        assert h.coefficient((0,)) == 5
        assert np.allclose(np.diag(h.to_matrix(3)), [0, 2, 4])
        assert np.allclose(np.diag(h.to_matrix(3, include_constant=True)), [5, 7, 9])


class TestSecondOrder:
    @pytest.fixture
    def pieces(self, single_mode):
        ctx, spectrum, s4, n4, g4 = single_mode
        h6 = anharmonic_series_term(ctx, [1], 3, F(1))
        s6, n6 = h6.split_secular()
        return ctx, spectrum, s4, n4, g4, s6, n6

    def test_residual_vanishes_exactly(self, pieces):
        ctx, spectrum, s4, n4, g4, s6, n6 = pieces
        g6, _ = solve_generator6(spectrum, s4, n4, g4, n6, s6, F(1, 5))
        cross = commutator(n4, g4)
        residual = (
            commutator(spectrum.h2(ctx), g6)
            + n6
            - commutator(s4, g4)
            - cross.nonsecular_part() * F(1, 2)
        )
        assert residual.is_zero()

    def test_g6_structure(self, pieces):
        ctx, spectrum, s4, n4, g4, s6, n6 = pieces
        g6, _ = solve_generator6(spectrum, s4, n4, g4, n6, s6, F(1, 5))
        assert g6.dagger() == -g6
        assert g6.secular_part().is_zero()

    def test_combined_generator(self, pieces):
        ctx, spectrum, s4, n4, g4, s6, n6 = pieces
        eps = F(1, 5)
        g6, _ = solve_generator6(spectrum, s4, n4, g4, n6, s6, eps)
        gen = Generator(order4=g4, epsilon=eps, order6=g6)
        gen.validate()
        assert gen.combined() == g4 * eps + g6 * (eps * eps)

    def test_secular_cross_term_is_hermitian_diagonal(self, pieces):
        _, _, _, n4, g4, _, _ = pieces
        cross_sec = commutator(n4, g4).secular_part()
        assert cross_sec.is_hermitian()
        assert all(m.is_secular() for m in cross_sec.terms)

    def test_second_order_coefficients(self, pieces):
        ctx, spectrum, s4, n4, g4, s6, n6 = pieces
        eps = F(1, 5)
        _, h2 = solve_generator6(spectrum, s4, n4, g4, n6, s6, eps)
        # first-order parts survive unchanged, second order adds cubic growth
        assert h2.coefficient((1,)) == 1 - eps / 8 - eps * eps * F(3, 128)
        assert h2.coefficient((2,)) == -eps / 8 - eps * eps * F(3, 128)
        assert h2.coefficient((3,)) == -eps * eps * F(1, 64)

    def test_against_dense_diagonalization(self, pieces):
        # oracle: eigenvalues of the series-truncated Hamiltonian at dim 40
        ctx, spectrum, s4, n4, g4, s6, n6 = pieces
        h4 = s4 + n4
        h6 = s6 + n6
        dim = 40
        for eps_f in (0.02, 0.01):
            eps = F(str(eps_f))
            hmat = (spectrum.h2(ctx) - h4 * eps + h6 * (eps * eps)).to_matrix(dim)
            evals = np.linalg.eigvalsh(hmat)
            _, h2 = solve_generator6(spectrum, s4, n4, g4, n6, s6, eps)
            for level in range(4):
                predicted = h2.energy((level,))
                assert abs(evals[level] - predicted) < 10 * eps_f**3
