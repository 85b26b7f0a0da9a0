//! Jacobi elliptic functions with complex modulus, the quartic-curve
//! uniformization, j-invariants of the three elliptic curves of the model,
//! the level-2 modular polynomial, and j-extraction from Weierstrass,
//! quartic, and plane-cubic models.

use crate::model::ModelParams;
use crate::numkit::{PolyMV, PrecComplex, ResidualReport};

#[derive(Debug, thiserror::Error)]
pub enum EllipticError {
    #[error("pole: {0}")]
    Pole(String),
    #[error("singular curve: {0}")]
    Singular(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("insufficient precision: {0}")]
    Precision(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

fn csin(z: &PrecComplex) -> PrecComplex {
    PrecComplex(z.0.clone().sin())
}

fn ccos(z: &PrecComplex) -> PrecComplex {
    PrecComplex(z.0.clone().cos())
}

/// Jacobi sn, cn, dn at complex argument and complex modulus, by the
/// descending Landen recursion: k → (1 − k′)/(1 + k′) with k′ = √(1 − k²),
/// u → u/(1 + k_next), closed with the trigonometric base case once the
/// modulus is negligible, then unwound through the ascending identities.
/// A modulus with |k| > 1 is handled once by the reciprocal-modulus
/// transformation sn(u, k) = sn(ku, 1/k)/k.
pub fn jacobi_sn_cn_dn(
    u: &PrecComplex,
    k: &PrecComplex,
) -> Result<(PrecComplex, PrecComplex, PrecComplex), EllipticError> {
    let prec = u.prec().max(k.prec());
    if k.mag_f64() > 1.0 + 1e-15 {
        // sn(u,k) = k⁻¹·sn(ku, 1/k), cn(u,k) = dn(ku, 1/k), dn = cn(ku, 1/k).
        let kin = k.recip();
        let (s, c, d) = jacobi_landen(&(u * k), &kin, prec)?;
        return Ok((&s / k, d, c));
    }
    jacobi_landen(u, k, prec)
}

fn jacobi_landen(
    u: &PrecComplex,
    k: &PrecComplex,
    prec: u32,
) -> Result<(PrecComplex, PrecComplex, PrecComplex), EllipticError> {
    let cutoff = 10f64.powf(-(prec as f64) / 2.0);
    let one = PrecComplex::one(prec);
    let mut ks: Vec<PrecComplex> = Vec::new();
    let mut kn = k.to_prec(prec);
    let mut un = u.to_prec(prec);
    for step in 0..80 {
        if kn.mag_f64() < cutoff {
            break;
        }
        if step == 79 {
            return Err(EllipticError::NoConvergence(format!(
                "Landen recursion stalled at |k| = {:.3e}",
                kn.mag_f64()
            )));
        }
        let kp = (&one - &kn.square()).sqrt();
        let knext = &(&one - &kp) / &(&one + &kp);
        if knext.mag_f64() > 0.999 * kn.mag_f64().min(1.0) {
            return Err(EllipticError::NoConvergence(
                "Landen step failed to contract the modulus".into(),
            ));
        }
        un = &un / &(&one + &knext);
        ks.push(knext.clone());
        kn = knext;
    }
    let mut sn = csin(&un);
    let mut cn = ccos(&un);
    let mut dn = one.clone();
    for kj in ks.iter().rev() {
        let s2 = sn.square();
        let den = &one + &(kj * &s2);
        if den.mag_f64() < 1e-300 {
            return Err(EllipticError::NoConvergence(
                "pole encountered while unwinding the Landen recursion".into(),
            ));
        }
        let new_sn = &(&(&one + kj) * &sn) / &den;
        let new_cn = &(&cn * &dn) / &den;
        let new_dn = &(&one - &(kj * &s2)) / &den;
        sn = new_sn;
        cn = new_cn;
        dn = new_dn;
    }
    Ok((sn, cn, dn))
}

/// The modulus data of the quartic curve: λ1, λ2, Δ, and the modulus k.
#[derive(Clone, Debug)]
pub struct EllipticContext {
    pub lambda1: PrecComplex,
    pub lambda2: PrecComplex,
    pub delta: PrecComplex,
    pub k: PrecComplex,
    pub branch: u8,
}

/// Builds the modulus data from the couplings: λ's are the roots of
/// λ² − ((4 + 4q⁴ − qU²)/(4q))λ + q² = 0, Δ = q² + 1/q² − U²/(4q), and
/// k = Δ/2 ± √(Δ²/4 − 1) with the sign selected by `branch`.  The λ's are
/// ordered so that k² = λ2/λ1.
pub fn context(mp: &ModelParams, branch: u8) -> EllipticContext {
    let prec = mp.prec();
    let one = PrecComplex::one(prec);
    let four = PrecComplex::from_int(4, prec);
    let s = &(&(&four + &(&four * &mp.q.powi(4))) - &(&mp.q * &mp.u.square())) / &(&four * &mp.q);
    let disc = (&s.square() - &(&four * &mp.q.square())).sqrt();
    let la = &(&s + &disc) / &PrecComplex::from_int(2, prec);
    let lb = &(&s - &disc) / &PrecComplex::from_int(2, prec);
    let delta = &(&mp.q.square() + &mp.q.square().recip()) - &(&mp.u.square() / &(&four * &mp.q));
    let half = delta.scale_f64(0.5);
    let rad = (&half.square() - &one).sqrt();
    let k = if branch == 0 {
        &half + &rad
    } else {
        &half - &rad
    };
    // Order λ's so that k² = λ2/λ1.
    let k2 = k.square();
    let (lambda1, lambda2) = if lb.mag_f64() > 1e-300
        && (&(&la.clone() / &lb) - &k2).mag_f64() < (&(&lb.clone() / &la) - &k2).mag_f64()
    {
        (lb, la)
    } else {
        (la, lb)
    };
    EllipticContext {
        lambda1,
        lambda2,
        delta,
        k,
        branch,
    }
}

/// The uniformization of the quartic curve:
/// y1 = 2i√q·cn(μ,k)·dn(μ,k), y2 = √(k/q)·sn(μ,k).
pub fn uniformize_e2(
    mu: &PrecComplex,
    ctx: &EllipticContext,
    mp: &ModelParams,
) -> Result<crate::model::PointE2, EllipticError> {
    let prec = mp.prec();
    let (sn, cn, dn) = jacobi_sn_cn_dn(mu, &ctx.k)?;
    let i = PrecComplex::i(prec);
    let y1 = &(&(&i.scale_f64(2.0) * &mp.q.sqrt()) * &cn) * &dn;
    let y2 = &(&ctx.k / &mp.q).sqrt() * &sn;
    Ok(crate::model::PointE2 { y1, y2 })
}

/// The two degeneration factors 4 − qU² + 4q⁴ ± 8q², which are exactly the
/// denominator factors of the printed j-invariants.
fn pole_factors(mp: &ModelParams) -> (PrecComplex, PrecComplex, f64) {
    let prec = mp.prec();
    let four = PrecComplex::from_int(4, prec);
    let core = &(&four - &(&mp.q * &mp.u.square())) + &(&four * &mp.q.powi(4));
    let eight = &PrecComplex::from_int(8, prec) * &mp.q.square();
    let plus = &core + &eight;
    let minus = &core - &eight;
    let scale = core.mag_f64().max(eight.mag_f64()).max(1.0);
    (plus, minus, scale)
}

fn pole_guard(mp: &ModelParams) -> Result<(PrecComplex, PrecComplex), EllipticError> {
    let (plus, minus, scale) = pole_factors(mp);
    if plus.mag_f64() < 1e-12 * scale {
        return Err(EllipticError::Pole(
            "4 − qU² + 4q⁴ + 8q² vanishes (degeneration locus)".into(),
        ));
    }
    if minus.mag_f64() < 1e-12 * scale {
        return Err(EllipticError::Pole(
            "4 − qU² + 4q⁴ − 8q² vanishes (degeneration locus)".into(),
        ));
    }
    Ok((plus, minus))
}

/// The printed closed form of the j-invariant of the spectral curve.
pub fn j_e1(mp: &ModelParams) -> Result<PrecComplex, EllipticError> {
    let (plus, minus) = pole_guard(mp)?;
    let prec = mp.prec();
    let q = &mp.q;
    let u2 = mp.u.square();
    let u4 = u2.square();
    let mut core = &PrecComplex::from_int(16, prec) - &(&q.scale_f64(8.0) * &u2);
    core = &core + &(&q.square() * &u4);
    core = &core - &q.powi(4).scale_f64(16.0);
    core = &core - &(&q.powi(5).scale_f64(8.0) * &u2);
    core = &core + &q.powi(8).scale_f64(16.0);
    let num = core.powi(3);
    let den = &(&q.powi(8) * &plus) * &minus;
    Ok(&num / &den)
}

/// The printed closed form of the j-invariant of the quartic curve.
pub fn j_e2(mp: &ModelParams) -> Result<PrecComplex, EllipticError> {
    let (plus, minus) = pole_guard(mp)?;
    let prec = mp.prec();
    let q = &mp.q;
    let u2 = mp.u.square();
    let u4 = u2.square();
    let mut core = &PrecComplex::from_int(16, prec) - &(&q.scale_f64(8.0) * &u2);
    core = &core + &(&q.square() * &u4);
    core = &core + &q.powi(4).scale_f64(224.0);
    core = &core - &(&q.powi(5).scale_f64(8.0) * &u2);
    core = &core + &q.powi(8).scale_f64(16.0);
    let num = core.powi(3);
    let den = &(&q.powi(4) * &plus.square()) * &minus.square();
    Ok(&num / &den)
}

/// The printed closed form of the j-invariant of the normalized curve from
/// the fourth quadric.
pub fn j_e3(mp: &ModelParams) -> Result<PrecComplex, EllipticError> {
    let (plus, minus) = pole_guard(mp)?;
    let prec = mp.prec();
    let q = &mp.q;
    let u2 = mp.u.square();
    let u4 = u2.square();
    let mut core = &PrecComplex::from_int(16, prec) - &(&q.scale_f64(8.0) * &u2);
    core = &core + &(&q.square() * &u4);
    core = &core + &q.square().scale_f64(960.0);
    core = &core - &(&q.powi(3) * &u2).scale_f64(240.0);
    core = &core + &q.powi(4).scale_f64(2144.0);
    core = &core - &(&q.powi(5).scale_f64(8.0) * &u2);
    core = &core + &q.powi(6).scale_f64(960.0);
    core = &core + &q.powi(8).scale_f64(16.0);
    let num = core.powi(3);
    let den = &(&q.square() * &plus) * &minus.powi(4);
    Ok(&num / &den)
}

/// The Weierstrass coefficients (A, B) of the printed genus-one curve, read
/// as y² = x³ + A·x + B.  The display carries the coefficients of x and the
/// constant with opposite sign, so A = −P/48-term and B = −Q/864-term.
pub fn e3_weierstrass(mp: &ModelParams) -> (PrecComplex, PrecComplex) {
    let prec = mp.prec();
    let q = &mp.q;
    let u2 = mp.u.square();
    let u4 = u2.square();
    let one_q4 = &PrecComplex::one(prec) + &q.powi(4);
    // P = [16 + 8q(120q − U²)(1 + q⁴) + q²U⁴ − 240q³U² + 2144q⁴ + 16q⁸]/48
    let mut p = &PrecComplex::from_int(16, prec)
        + &(&(&q.scale_f64(8.0) * &(&q.scale_f64(120.0) - &u2)) * &one_q4);
    p = &p + &(&q.square() * &u4);
    p = &p - &(&q.powi(3) * &u2).scale_f64(240.0);
    p = &p + &q.powi(4).scale_f64(2144.0);
    p = &p + &q.powi(8).scale_f64(16.0);
    let p = &p / &PrecComplex::from_int(48, prec);
    // Q = [4 + 4q⁴ + 24q² − qU²]·
    //     [16 − 8q(264q + U²)(1 + q⁴) + q²U⁴ + 528q³U² − 4000q⁴ + 16q⁸]/864
    let lead = &(&(&PrecComplex::from_int(4, prec) + &q.powi(4).scale_f64(4.0))
        + &q.square().scale_f64(24.0))
        - &(q * &u2);
    let mut tail = &PrecComplex::from_int(16, prec)
        - &(&(&q.scale_f64(8.0) * &(&q.scale_f64(264.0) + &u2)) * &one_q4);
    tail = &tail + &(&q.square() * &u4);
    tail = &tail + &(&q.powi(3) * &u2).scale_f64(528.0);
    tail = &tail - &q.powi(4).scale_f64(4000.0);
    tail = &tail + &q.powi(8).scale_f64(16.0);
    let qq = &(&lead * &tail) / &PrecComplex::from_int(864, prec);
    (-&p, -&qq)
}

/// The level-2 modular polynomial
/// Φ2[x,y] = x³ + y³ − x²y² + 1488xy(x+y) − 162000(x²+y²) + 40773375xy
///           + 8748000000(x+y) − 157464000000000.
pub fn phi2(x: &PrecComplex, y: &PrecComplex) -> PrecComplex {
    phi2_terms(x, y)
        .into_iter()
        .fold(PrecComplex::zero(x.prec().max(y.prec())), |a, t| &a + &t)
}

/// The eleven monomial values of Φ2 at (x, y), for scale-aware residuals.
pub fn phi2_terms(x: &PrecComplex, y: &PrecComplex) -> Vec<PrecComplex> {
    let prec = x.prec().max(y.prec());
    let c = |v: i64| PrecComplex::from_int(v, prec);
    vec![
        x.powi(3),
        y.powi(3),
        -&(&x.square() * &y.square()),
        &c(1488) * &(&x.square() * y),
        &c(1488) * &(x * &y.square()),
        -&(&c(162000) * &x.square()),
        -&(&c(162000) * &y.square()),
        &c(40773375) * &(x * y),
        &c(8748000000) * x,
        &c(8748000000) * y,
        -&c(157464000000000),
    ]
}

/// Normalized residual of Φ2[J(E1), J(E2)], the twofold-isogeny certificate.
/// Always evaluated at ≥ 256 bits; refuses to run below 128 bits.
pub fn isogeny_check(mp: &ModelParams) -> Result<ResidualReport, EllipticError> {
    if mp.prec() < 128 {
        return Err(EllipticError::Precision(
            "the modular-polynomial cancellation spans ~40 digits; rerun with at least 128 bits (256 recommended)".into(),
        ));
    }
    let work = if mp.prec() < 256 {
        mp.at_precision(256)?
    } else {
        mp.clone()
    };
    let j1 = j_e1(&work)?;
    let j2 = j_e2(&work)?;
    let tol = crate::model::default_tol(work.prec());
    Ok(ResidualReport::from_terms(&phi2_terms(&j1, &j2), tol))
}

/// j = 1728·4a³/(4a³ + 27b²) for y² = x³ + ax + b.
///
/// ```
/// use ybverify::elliptic::j_from_weierstrass;
/// use ybverify::numkit::PrecComplex;
///
/// // The harmonic curve y² = x³ + x has j = 1728.
/// let j = j_from_weierstrass(&PrecComplex::one(53), &PrecComplex::zero(53)).unwrap();
/// assert!((j.real().to_f64() - 1728.0).abs() < 1e-9);
/// ```
pub fn j_from_weierstrass(a: &PrecComplex, b: &PrecComplex) -> Result<PrecComplex, EllipticError> {
    let prec = a.prec().max(b.prec());
    let four_a3 = a.powi(3).scale_f64(4.0);
    let disc = &four_a3 + &b.square().scale_f64(27.0);
    let scale = four_a3
        .mag_f64()
        .max(b.square().mag_f64() * 27.0)
        .max(1e-300);
    if disc.mag_f64() < 1e-20 * scale {
        return Err(EllipticError::Singular(
            "vanishing discriminant 4a³ + 27b²".into(),
        ));
    }
    Ok(&(&PrecComplex::from_int(1728, prec) * &four_a3) / &disc)
}

/// j = 256(1 − k² + k⁴)³/(k⁴(1 − k²)²), the Legendre-form invariant at
/// λ = k².
pub fn legendre_j(k: &PrecComplex) -> Result<PrecComplex, EllipticError> {
    let prec = k.prec();
    let one = PrecComplex::one(prec);
    let k2 = k.square();
    let den = &k2.square() * &(&one - &k2).square();
    if den.mag_f64() < 1e-30 {
        return Err(EllipticError::Singular("k⁴(1 − k²)² vanishes".into()));
    }
    let num = &PrecComplex::from_int(256, prec) * &(&(&one - &k2) + &k2.square()).powi(3);
    Ok(&num / &den)
}

/// j of y² = a₄x⁴ + a₃x³ + a₂x² + a₁x + a₀ through the classical binary
/// quartic invariants I = 12a₄a₀ − 3a₃a₁ + a₂² and
/// J = 72a₄a₂a₀ + 9a₃a₂a₁ − 27a₄a₁² − 27a₀a₃² − 2a₂³, j = 1728·4I³/(4I³ − J²).
pub fn j_from_quartic(a: &[PrecComplex; 5]) -> Result<PrecComplex, EllipticError> {
    let prec = a.iter().map(|c| c.prec()).max().unwrap();
    let (a4, a3, a2, a1, a0) = (&a[0], &a[1], &a[2], &a[3], &a[4]);
    let mut i_inv = &(a4 * a0).scale_f64(12.0) - &(a3 * a1).scale_f64(3.0);
    i_inv = &i_inv + &a2.square();
    let mut j_inv = &(&(a4 * a2) * a0).scale_f64(72.0) + &(&(a3 * a2) * a1).scale_f64(9.0);
    j_inv = &j_inv - &(a4 * &a1.square()).scale_f64(27.0);
    j_inv = &j_inv - &(a0 * &a3.square()).scale_f64(27.0);
    j_inv = &j_inv - &a2.powi(3).scale_f64(2.0);
    let four_i3 = i_inv.powi(3).scale_f64(4.0);
    let disc = &four_i3 - &j_inv.square();
    let scale = four_i3.mag_f64().max(j_inv.square().mag_f64()).max(1e-300);
    if disc.mag_f64() < 1e-20 * scale {
        return Err(EllipticError::Singular(
            "degenerate quartic: 4I³ = J²".into(),
        ));
    }
    Ok(&(&PrecComplex::from_int(1728, prec) * &four_i3) / &disc)
}

/// j of a smooth plane cubic with a marked smooth point, by the classical
/// rational-point reduction: translate the point to the affine origin,
/// project the pencil of lines through it, and read off the branch quartic
/// f2² − 4·f1·f3 from the homogeneous parts f1 + f2 + f3 of the shifted
/// affine cubic; finish with the binary-quartic invariants.
pub fn nagell_cubic_j(cubic: &PolyMV, pt: &[PrecComplex; 3]) -> Result<PrecComplex, EllipticError> {
    if cubic.nvars != 3 {
        return Err(EllipticError::Invalid(
            "expected a polynomial in three homogeneous variables".into(),
        ));
    }
    let prec = pt.iter().map(|c| c.prec()).max().unwrap();
    let rep = cubic.normalized_residual(pt.as_slice(), 1e-8);
    if !rep.pass && !rep.degenerate {
        return Err(EllipticError::Invalid(format!(
            "point is not on the cubic (residual {:.2e})",
            rep.normalized_f64()
        )));
    }
    // Dehomogenize in the chart of the largest coordinate.
    let chart = (0..3)
        .max_by(|&i, &j| pt[i].mag_f64().partial_cmp(&pt[j].mag_f64()).unwrap())
        .unwrap();
    let affine = {
        // substitute_const removes the chosen variable; scale the point.
        let one = PrecComplex::one(prec);

        cubic.substitute_const(chart, &one)
    };
    let (i0, i1): (usize, usize) = match chart {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let alpha = &pt[i0] / &pt[chart];
    let beta = &pt[i1] / &pt[chart];
    let shifted = affine.shift(&[alpha, beta]);
    // Homogeneous parts f1, f2, f3 (f0 vanishes because pt is on the curve).
    let mut parts = [
        PolyMV::new(2),
        PolyMV::new(2),
        PolyMV::new(2),
        PolyMV::new(2),
    ];
    let mut maxmag = 0.0f64;
    for (e, c) in shifted.terms() {
        maxmag = maxmag.max(c.mag_f64());
        let d = (e[0] + e[1]) as usize;
        parts[d].add_term(e.clone(), c.clone());
    }
    let f1 = &parts[1];
    if f1.max_coeff_mag() < 1e-8 * maxmag.max(1e-300) {
        return Err(EllipticError::Singular(
            "the marked point is a singular point of the cubic".into(),
        ));
    }
    let f2 = &parts[2];
    let f3 = &parts[3];
    if f3.is_zero() && f2.is_zero() {
        return Err(EllipticError::Singular(
            "degenerate (reducible) cubic".into(),
        ));
    }
    let minus4 = PrecComplex::from_int(-4, prec);
    let g4 = f2.mul(f2).add(&f1.mul(f3).scale(&minus4));
    // Coefficients of the binary quartic g4(u, v), read off as a4..a0 in u.
    let mut coeffs = [
        PrecComplex::zero(prec),
        PrecComplex::zero(prec),
        PrecComplex::zero(prec),
        PrecComplex::zero(prec),
        PrecComplex::zero(prec),
    ];
    for (e, c) in g4.terms() {
        let du = e[0] as usize;
        coeffs[4 - du] = &coeffs[4 - du] + c;
    }
    j_from_quartic(&coeffs)
}
