import cmath
import json
import math

import numpy as np
import pytest

from heunlock.errors import (
    EvaluationDomainError,
    MonodromyMismatchError,
    NearPoleError,
)
from heunlock.laurent import (
    LaurentSolution,
    coefficients,
    companion_E_sharp,
    companion_E_sharp_prime,
    conjugate_hat_E,
    evaluate_E,
    evaluate_E_derivs,
    gamma_ratio,
    monodromy_constant,
    prefactor,
    _sharp_matrix,
)
from heunlock.matching import find_roots, lock_decision
from heunlock.params import ProblemParams, derive
from heunlock.recurrence import RecurrenceContext, Z, Z_tilde
from heunlock.residuals import dche_residual


def ctx_for(A, B, om, parity, kappa):
    return RecurrenceContext(derive(ProblemParams(A, B, om)), parity, kappa)


def matched_ctx(A, B, om):
    params = ProblemParams(A, B, om)
    dec = lock_decision(params)
    return RecurrenceContext(derive(params), dec.parity, dec.kappa)


class TestGammaRatio:
    def test_empty_product(self):
        assert gamma_ratio(0.3 + 0.2j, 0) == 1.0

    def test_integer_cases(self):
        assert gamma_ratio(0.0, 3) == pytest.approx(1.0 / 6.0)
        assert gamma_ratio(-0.5, 2) == pytest.approx(4.0 / 3.0)

    def test_pole_raises(self):
        with pytest.raises(NearPoleError):
            gamma_ratio(-2.0, 3)


class TestPrefactor:
    def test_matches_literal_formula(self):
        # the sinc product must equal the explicit sine/linear expression
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = rng.uniform(-4.3, 0.7)
            kap = rng.uniform(-1.2, 1.2)
            p = int(rng.integers(2))
            om = rng.uniform(0.3, 2.0)
            mu = rng.uniform(0, 2.0)
            d = derive(ProblemParams(2 * om * mu, -(n + 1) * om, om))
            got = prefactor(d, p, kap)
            a = n + p - 2j * kap
            b = n + p + 2j * kap
            lit = (4 / math.pi ** 2) * cmath.sin(math.pi * a / 2) \
                * cmath.sin(math.pi * b / 2) / (a * (n + 2 - p + 2j * kap))
            assert got == pytest.approx(lit, rel=1e-12)

    def test_finite_at_singular_grid(self):
        # integer n with kappa = 0 sits on the sine zero grid; the closed
        # form must stay finite there
        d = derive(ProblemParams(1.0, 0.6, 0.6))     # n = -2
        for p in (0, 1):
            val = prefactor(d, p, 0.0)
            assert np.isfinite(val.real) and np.isfinite(val.imag)


class TestCoefficients:
    def test_mu_zero_kills_all_terms(self):
        c = ctx_for(0, 0.5, 1, 1, 0.4330127018922193)
        sol = coefficients(c, 8, 8)
        assert np.all(sol.a_plus[1:] == 0)
        assert np.all(sol.a_minus[1:] == 0)
        assert sol.a_plus[0] == 1.0 and sol.a_minus[0] == 1.0

    def test_three_term_recurrences(self):
        # every stored interior coefficient triplet satisfies its recurrence
        rng = np.random.default_rng(17)
        for _ in range(20):
            c = ctx_for(rng.uniform(0.1, 2.5), rng.uniform(-2.5, 2.5),
                        rng.uniform(0.3, 1.5), int(rng.integers(2)),
                        rng.uniform(0.01, 0.9))
            d = c.derived
            mu, lam, kap, p = d.mu, d.lam, c.kappa, c.parity
            sol = coefficients(c, 16, 16)
            ap, am = sol.a_plus, sol.a_minus
            for k in range(1, 14):
                t1 = -mu * (k - 1 - (d.n - p) / 2 - 1j * kap) * ap[k - 1]
                t2 = (Z(c, k) + lam) * ap[k]
                t3 = mu * (k + 1 + (d.n + p) / 2 - 1j * kap) * ap[k + 1]
                scale = max(abs(t1), abs(t2), abs(t3), 1e-30)
                assert abs(t1 + t2 + t3) < 1e-10 * scale
                s1 = -mu * (k - 1 - (d.n + p) / 2 + 1j * kap) * am[k - 1]
                s2 = (Z_tilde(c, k) + lam) * am[k]
                s3 = mu * (k + 1 + (d.n - p) / 2 + 1j * kap) * am[k + 1]
                scale = max(abs(s1), abs(s2), abs(s3), 1e-30)
                assert abs(s1 + s2 + s3) < 1e-10 * scale

    def test_factorial_decay(self):
        c = matched_ctx(2.0, 1.0, 1.0)
        sol = coefficients(c, 32, 32)
        # |a_{k+1}|/|a_k| * (k+1) stays bounded if |a_k| ~ zeta^k / k!
        mags = np.abs(sol.a_plus)
        ratios = [mags[k + 1] / mags[k] * (k + 1)
                  for k in range(4, 24) if mags[k] > 0]
        assert max(ratios) < 8.0 * max(1.0, np.median(ratios))

    def test_central_equation_iff_matched(self):
        params = ProblemParams(2.0, 1.0, 1.0)
        dec = lock_decision(params)
        d = derive(params)

        def central_residual(kappa):
            c = RecurrenceContext(d, dec.parity, kappa)
            sol = coefficients(c, 12, 12)
            mu, lam, p = d.mu, d.lam, dec.parity
            t1 = mu * (1 + (d.n - p) / 2 + 1j * kappa) * sol.a_minus[1]
            t2 = (Z(c, 0) + lam) * 1.0
            t3 = mu * (1 + (d.n + p) / 2 - 1j * kappa) * sol.a_plus[1]
            return abs(t1 + t2 + t3)

        assert central_residual(dec.kappa) < 1e-10
        assert central_residual(dec.kappa + 1e-2) > 1e-4

    def test_near_pole_raises_on_raw_path(self):
        c = ctx_for(1, 0.6, 0.6, 0, 0.0)   # exact pole at Z_1
        with pytest.raises(NearPoleError):
            coefficients(c, 8, 8)

    def test_json_round_trip(self):
        c = matched_ctx(2.0, 1.0, 1.0)
        sol = coefficients(c, 12, 12)
        obj = json.loads(json.dumps(sol.to_json_dict()))
        back = LaurentSolution.from_json_dict(obj)
        assert np.array_equal(back.a_plus, sol.a_plus)
        assert np.array_equal(back.a_minus, sol.a_minus)
        assert back.prefactor == sol.prefactor
        assert back.kappa == sol.kappa and back.parity == sol.parity


class TestConjugatePairing:
    def test_tilde_products_are_conjugated_variants(self):
        # for parity 1 the backward divisors are conjugates of the forward
        # ones, and the backward factors equal the sigma-variant factors
        # built from the forward divisors at -kappa
        c = ctx_for(1.3, 0.7, 0.9, 1, 0.37)
        cneg = ctx_for(1.3, 0.7, 0.9, 1, -0.37)
        d = c.derived
        for j in range(1, 9):
            assert Z_tilde(c, j) == pytest.approx(Z(cneg, j), rel=1e-13)
            mt = np.array([[1 + d.lam / Z_tilde(c, j),
                            d.mu ** 2 / Z_tilde(c, j)],
                           [Z_tilde(c, j - 1) / Z_tilde(c, j), 0.0]])
            sigma_variant = np.array([[1 + d.lam / Z(cneg, j),
                                       d.mu ** 2 / Z(cneg, j)],
                                      [Z(cneg, j - 1) / Z(cneg, j), 0.0]])
            assert np.allclose(mt, sigma_variant, rtol=1e-12)
            assert np.allclose(mt, np.conj(
                np.array([[1 + d.lam / Z(c, j), d.mu ** 2 / Z(c, j)],
                          [Z(c, j - 1) / Z(c, j), 0.0]])), rtol=1e-12)


class TestEvaluateE:
    def test_mu_zero_constant(self):
        c = ctx_for(0, 0.5, 1, 1, 0.4330127018922193)
        sol = coefficients(c, 8, 8)
        E, Ep = evaluate_E(sol, 0.3 + 0.8j)
        assert E == pytest.approx(sol.prefactor, rel=1e-14)
        assert Ep == 0.0

    def test_dche_residual_matched_vs_perturbed(self):
        params = ProblemParams(2.0, 1.0, 1.0)
        dec = lock_decision(params)
        d = derive(params)
        sol = coefficients(RecurrenceContext(d, dec.parity, dec.kappa), 48, 48)
        assert dche_residual(sol) < 1e-8
        sol_bad = coefficients(
            RecurrenceContext(d, dec.parity, dec.kappa + 1e-2), 48, 48)
        assert dche_residual(sol_bad) > 1e-4

    def test_single_valued_on_circle(self):
        c = matched_ctx(2.0, 1.0, 1.0)
        sol = coefficients(c, 32, 32)
        for theta in (0.3, 2.0, -1.2):
            z1 = cmath.exp(1j * theta)
            z2 = cmath.exp(1j * (theta + 2 * math.pi))
            E1, _ = evaluate_E(sol, z1)
            E2, _ = evaluate_E(sol, z2)
            assert E1 == pytest.approx(E2, rel=1e-12)

    def test_annulus_domain_error(self):
        c = matched_ctx(2.0, 1.0, 1.0)
        sol = coefficients(c, 16, 16)
        with pytest.raises(EvaluationDomainError):
            evaluate_E(sol, 0.01)
        with pytest.raises(EvaluationDomainError):
            evaluate_E(sol, 200.0)
        with pytest.raises(EvaluationDomainError):
            evaluate_E(sol, 0.0)

    def test_derivatives_match_finite_differences(self):
        c = matched_ctx(2.0, 1.0, 1.0)
        sol = coefficients(c, 48, 48)
        z = 1.1 * cmath.exp(0.7j)
        h = 1e-5
        E, Ep, Epp = evaluate_E_derivs(sol, z, 2)
        fd1 = (evaluate_E(sol, z + h)[0] - evaluate_E(sol, z - h)[0]) / (2 * h)
        fd2 = (evaluate_E(sol, z + h)[0] - 2 * E
               + evaluate_E(sol, z - h)[0]) / h ** 2
        assert Ep == pytest.approx(fd1, rel=1e-8)
        assert Epp == pytest.approx(fd2, rel=1e-5)


@pytest.fixture(scope="module")
def matched():
    c = matched_ctx(2.0, 1.0, 1.0)
    return coefficients(c, 48, 48)


class TestCompanion:

    def test_involution(self, matched):
        sol = matched
        inv_w2 = sol.derived.lam + sol.derived.mu ** 2    # (2*omega)^-2
        for z in (cmath.exp(0.4j), 1.3 * cmath.exp(-1.1j), 0.8 + 0.1j):
            # apply the map twice using the closed-form pair (E#, E#')
            zi = 1.0 / z
            Es_i = companion_E_sharp(sol, zi)
            Esp_i = companion_E_sharp_prime(sol, zi)
            u = sol.u
            mu = sol.derived.mu
            head = np.exp((2j * sol.kappa - sol.parity) * np.log(z))
            double = head * (Esp_i + (u * z - mu) * Es_i)
            E, _ = evaluate_E(sol, z)
            assert complex(double) == pytest.approx(inv_w2 * E, rel=1e-9)

    def test_sharp_solves_dche(self, matched):
        sol = matched
        d = sol.derived
        p, kap = sol.parity, sol.kappa
        zs = np.exp(1j * np.linspace(0.2, 5.9, 16))
        E = companion_E_sharp(sol, zs)
        Ep = companion_E_sharp_prime(sol, zs)
        h = 1e-5
        Epp = (companion_E_sharp_prime(sol, zs + h)
               - companion_E_sharp_prime(sol, zs - h)) / (2 * h)
        c1 = (1 - p) * (0.25 + 1j * kap) - kap ** 2 - ((d.n + 1) / 2) ** 2 + d.lam
        res = (zs ** 3 * Epp
               + zs * ((p - 2j * kap) * zs - d.mu * (zs ** 2 - 1)) * Ep
               + (d.mu * ((d.n - p) / 2 + 1j * kap) * zs ** 2 + c1 * zs
                  + d.mu * ((d.n + p) / 2 - 1j * kap)) * E)
        scale = np.abs(zs ** 3 * Epp) + np.abs(E) + np.abs(Ep)
        assert np.max(np.abs(res) / scale) < 1e-6

    def test_transform_determinant(self, matched):
        sol = matched
        inv_w2 = sol.derived.lam + sol.derived.mu ** 2
        b11, b12, b21, b22 = _sharp_matrix(sol, 1.0 + 0j)
        det = b11 * b22 - b12 * b21
        assert complex(det) == pytest.approx(inv_w2, rel=1e-12)
        # at general z the determinant is (2w)^-2 z^(2(-p+2i*kappa)) after
        # the branch heads are restored
        z = cmath.exp(0.9j)
        b11, b12, b21, b22 = _sharp_matrix(sol, z)
        det = (b11 * b22 - b12 * b21) * z ** (2 * (2j * sol.kappa - sol.parity) - 1)
        expect = inv_w2 * z ** (2 * (-sol.parity + 2j * sol.kappa))
        assert complex(det) == pytest.approx(expect, rel=1e-12)

    def test_linear_independence(self, matched):
        sol = matched
        z = cmath.exp(0.4j)
        E, Ep = evaluate_E(sol, z)
        Es = complex(companion_E_sharp(sol, z))
        Esp = complex(companion_E_sharp_prime(sol, z))
        wr = E * Esp - Ep * Es
        assert abs(wr) > 1e-6


class TestMonodromy:
    def test_modulus_and_constancy(self):
        c = matched_ctx(2.0, 1.0, 1.0)
        sol = coefficients(c, 48, 48)
        mc = monodromy_constant(sol)
        two_omega = 2.0 * 1.0
        assert abs(abs(mc.C_C) * two_omega - 1.0) < 1e-6
        assert mc.residual < 1e-6
        # point-wise estimates barely vary around the circle
        theta = 2 * math.pi * np.arange(64) / 64
        zs = np.exp(1j * theta)
        E, _ = evaluate_E(sol, zs)
        Ehat = conjugate_hat_E(sol, zs)
        assert np.var(np.abs(Ehat / E)) < 1e-10

    def test_mu_zero_closed_form(self):
        # constant solution: the reflected solution is a hand-computable
        # multiple of E
        B, om = 0.6, 0.5
        kappa = math.sqrt(1 - B * B) / (2 * om)   # = 0.8
        c = ctx_for(0, B, om, 1, kappa)
        sol = coefficients(c, 8, 8)
        mc = monodromy_constant(sol)
        d = c.derived
        const = sol.prefactor
        expect = ((d.n + 1) / 2 + 1j * kappa) * np.conj(const) / const
        assert mc.C_C == pytest.approx(expect, rel=1e-12)
        assert abs(abs(mc.C_C) * 2 * om - 1.0) < 1e-12

    def test_mismatch_raises(self):
        params = ProblemParams(2.0, 1.0, 1.0)
        dec = lock_decision(params)
        d = derive(params)
        sol = coefficients(RecurrenceContext(d, dec.parity,
                                             dec.kappa + 5e-3), 32, 32)
        with pytest.raises(MonodromyMismatchError):
            monodromy_constant(sol)
