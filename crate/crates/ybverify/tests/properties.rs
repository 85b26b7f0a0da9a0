//! Property-based tests for the numeric kernel and invariant arithmetic.

use proptest::prelude::*;
use ybverify::numkit::{uv_roots, PolyMV, PrecComplex};
use ybverify::verify::{product_surface_invariants, surface_invariants_from_genus};

const PREC: u32 = 128;

fn c(re: f64, im: f64) -> PrecComplex {
    PrecComplex::from_f64(re, im, PREC)
}

/// Strategy for a bounded complex scalar.
fn small_complex() -> impl Strategy<Value = (f64, f64)> {
    (-2.0f64..2.0, -2.0f64..2.0)
}

/// Strategy for a sparse bivariate polynomial of small degree: a list of
/// (exponent pair, coefficient) entries.
fn small_poly() -> impl Strategy<Value = Vec<(u32, u32, f64, f64)>> {
    prop::collection::vec((0u32..4, 0u32..4, -2.0f64..2.0, -2.0f64..2.0), 1..6)
}

fn build_poly(entries: &[(u32, u32, f64, f64)]) -> PolyMV {
    let mut p = PolyMV::new(2);
    for &(e0, e1, re, im) in entries {
        p.add_term(vec![e0, e1], c(re, im));
    }
    p
}

fn close(a: &PrecComplex, b: &PrecComplex, scale: f64) -> bool {
    let denom = scale.max(1.0);
    (a - b).mag_f64() <= 1e-20 * denom
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Evaluating a product equals the product of evaluations.
    #[test]
    fn poly_mul_eval_homomorphism(pe in small_poly(), qe in small_poly(), v in small_complex(), w in small_complex()) {
        let p = build_poly(&pe);
        let q = build_poly(&qe);
        let at = [c(v.0, v.1), c(w.0, w.1)];
        let lhs = p.mul(&q).eval(&at);
        let rhs = &p.eval(&at) * &q.eval(&at);
        let scale = p.max_coeff_mag() * q.max_coeff_mag() * 1e6;
        prop_assert!(close(&lhs, &rhs, scale));
    }

    /// Shifting the argument commutes with evaluation: p.shift(s)(v) = p(v + s).
    #[test]
    fn poly_shift_consistency(pe in small_poly(), s in small_complex(), t in small_complex(), v in small_complex(), w in small_complex()) {
        let p = build_poly(&pe);
        let sh = [c(s.0, s.1), c(t.0, t.1)];
        let at = [c(v.0, v.1), c(w.0, w.1)];
        let moved = [&at[0] + &sh[0], &at[1] + &sh[1]];
        let lhs = p.shift(&sh).eval(&at);
        let rhs = p.eval(&moved);
        let scale = p.max_coeff_mag() * 1e6;
        prop_assert!(close(&lhs, &rhs, scale));
    }

    /// Substituting a constant for one variable agrees with plain evaluation.
    #[test]
    fn poly_substitute_consistency(pe in small_poly(), s in small_complex(), v in small_complex()) {
        let p = build_poly(&pe);
        let fixed = c(s.0, s.1);
        let reduced = p.substitute_const(0, &fixed);
        let rest = c(v.0, v.1);
        let lhs = reduced.eval(std::slice::from_ref(&rest));
        let rhs = p.eval(&[fixed, rest]);
        let scale = p.max_coeff_mag() * 1e4;
        prop_assert!(close(&lhs, &rhs, scale));
    }

    /// The Leibniz rule holds for the polynomial derivative: (pq)' = p'q + pq'.
    #[test]
    fn poly_derivative_leibniz(pe in small_poly(), qe in small_poly(), v in small_complex(), w in small_complex()) {
        let p = build_poly(&pe);
        let q = build_poly(&qe);
        let at = [c(v.0, v.1), c(w.0, w.1)];
        for var in 0..2 {
            let lhs = p.mul(&q).derivative(var).eval(&at);
            let a = p.derivative(var).mul(&q).eval(&at);
            let b = p.mul(&q.derivative(var)).eval(&at);
            let rhs = &a + &b;
            let scale = p.max_coeff_mag() * q.max_coeff_mag() * 1e8;
            prop_assert!(close(&lhs, &rhs, scale));
        }
    }

    /// The principal square root squares back to its argument and lands in the
    /// right half plane (with the Im >= 0 tie-break on the imaginary axis).
    #[test]
    fn principal_sqrt_branch(z in small_complex()) {
        let zc = c(z.0, z.1);
        let s = zc.sqrt();
        prop_assert!(close(&s.square(), &zc, 10.0));
        let re = s.real().to_f64();
        let im = s.imag().to_f64();
        prop_assert!(re > -1e-25);
        if re.abs() <= 1e-25 {
            prop_assert!(im >= -1e-25);
        }
    }

    /// Root finding recovers the roots a monic polynomial was built from.
    #[test]
    fn uv_roots_round_trip(roots in prop::collection::vec(small_complex(), 1..5)) {
        // Build prod (x - r_i) by repeated convolution.
        let mut coeffs = vec![PrecComplex::one(PREC)];
        for r in &roots {
            let rc = c(r.0, r.1);
            let mut next = vec![PrecComplex::zero(PREC); coeffs.len() + 1];
            for (i, ci) in coeffs.iter().enumerate() {
                next[i + 1] = &next[i + 1] + ci;
                let t = ci * &rc;
                next[i] = &next[i] - &t;
            }
            coeffs = next;
        }
        let mut found = uv_roots(&coeffs).unwrap();
        let mut expected: Vec<PrecComplex> = roots.iter().map(|r| c(r.0, r.1)).collect();
        prop_assert_eq!(found.len(), expected.len());
        // Greedy multiset matching: each expected root must have a close
        // computed partner.
        for e in &expected {
            let (idx, dist) = found
                .iter()
                .enumerate()
                .map(|(i, f)| (i, (f - e).mag_f64()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            prop_assert!(dist < 1e-12, "root mismatch: {}", dist);
            found.swap_remove(idx);
        }
        expected.clear();
    }

    /// Surface invariants satisfy their defining relations for any genus.
    #[test]
    fn surface_invariant_relations(g in 2i64..60) {
        let inv = surface_invariants_from_genus(g).unwrap();
        prop_assert_eq!(inv.l2, 2 * (g - 1));
        prop_assert_eq!(inv.chi, inv.l2 / 2);
        prop_assert_eq!(inv.ksq, 2 * inv.l2);
        prop_assert_eq!(inv.pg, 1 + inv.chi);
        prop_assert_eq!(inv.q_irr, 1 + inv.pg - inv.chi);
        for (k, pn) in inv.plurigenera.iter().enumerate() {
            let n = k as i64 + 2;
            prop_assert_eq!(*pn, inv.chi + n * (n - 1) / 2 * inv.ksq);
        }
        prop_assert_eq!(inv.severi, inv.ksq == 4 * inv.chi);
    }

    /// The product formula for split invariants is symmetric and matches the
    /// direct genus computation on the diagonal.
    #[test]
    fn product_invariants_symmetric(g1 in 2i64..30, g2 in 2i64..30) {
        let a = product_surface_invariants(g1, g2);
        let b = product_surface_invariants(g2, g1);
        prop_assert_eq!(a, b);
        prop_assert_eq!(a, (g1 + g2, g1 * g2));
    }
}
