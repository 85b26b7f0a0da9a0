//! Precision-parametric complex arithmetic, sparse multivariate polynomials,
//! polynomial root finding, damped Newton systems, and the normalized-residual
//! policy shared by every other module.

use rug::{Complex, Float};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Supported working precisions, in bits of mantissa.
pub const SUPPORTED_PRECISIONS: [u32; 4] = [53, 128, 256, 512];

/// Magnitude below which a residual scale is considered degenerate.
pub const DEGENERATE_SCALE: f64 = 1e-300;

/// An arbitrary-precision complex number.  Arithmetic between operands of
/// different precision promotes the result to the larger precision.
#[derive(Clone, Debug)]
pub struct PrecComplex(pub Complex);

impl PrecComplex {
    pub fn new(prec: u32) -> Self {
        PrecComplex(Complex::new(prec))
    }

    pub fn from_f64(re: f64, im: f64, prec: u32) -> Self {
        PrecComplex(Complex::with_val(prec, (re, im)))
    }

    pub fn from_real(re: f64, prec: u32) -> Self {
        Self::from_f64(re, 0.0, prec)
    }

    pub fn from_int(n: i64, prec: u32) -> Self {
        PrecComplex(Complex::with_val(prec, (n, 0)))
    }

    pub fn zero(prec: u32) -> Self {
        Self::new(prec)
    }

    pub fn one(prec: u32) -> Self {
        Self::from_int(1, prec)
    }

    /// The imaginary unit.
    pub fn i(prec: u32) -> Self {
        Self::from_f64(0.0, 1.0, prec)
    }

    pub fn prec(&self) -> u32 {
        self.0.prec().0
    }

    /// Re-round to a given precision.
    pub fn to_prec(&self, prec: u32) -> Self {
        PrecComplex(Complex::with_val(prec, &self.0))
    }

    pub fn real(&self) -> Float {
        self.0.real().clone()
    }

    pub fn imag(&self) -> Float {
        self.0.imag().clone()
    }

    pub fn abs(&self) -> Float {
        self.0.clone().abs().into_real_imag().0
    }

    pub fn is_zero(&self) -> bool {
        self.0.real().is_zero() && self.0.imag().is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.0.real().is_finite() && self.0.imag().is_finite()
    }

    /// Principal square root: Re ≥ 0, with Im ≥ 0 on the branch cut
    /// (negative real axis), so that sqrt(v)² = v to a few ulp.
    pub fn sqrt(&self) -> Self {
        let mut s = self.0.clone().sqrt();
        let re_zeroish = {
            // MPC already returns the principal branch (Re ≥ 0); enforce the
            // tie-break Im ≥ 0 when the real part vanishes.
            s.real().is_zero()
        };
        if s.real().is_sign_negative() && !s.real().is_zero() {
            s = -s;
        }
        if re_zeroish && s.imag().is_sign_negative() {
            s = -s;
        }
        PrecComplex(s)
    }

    pub fn square(&self) -> Self {
        self * self
    }

    pub fn recip(&self) -> Self {
        let prec = self.prec();
        PrecComplex(Complex::with_val(
            prec,
            Complex::with_val(prec, 1) / &self.0,
        ))
    }

    pub fn conj(&self) -> Self {
        PrecComplex(self.0.clone().conj())
    }

    /// Integer power (positive, zero, or negative).
    pub fn powi(&self, n: i32) -> Self {
        let prec = self.prec();
        if n == 0 {
            return Self::one(prec);
        }
        let base = if n < 0 { self.recip() } else { self.clone() };
        let mut acc = Self::one(prec);
        for _ in 0..n.unsigned_abs() {
            acc = &acc * &base;
        }
        acc
    }

    /// Principal complex power exp(e·log v).
    pub fn pow(&self, e: &PrecComplex) -> Self {
        let prec = self.prec().max(e.prec());
        PrecComplex(Complex::with_val(prec, rug::ops::Pow::pow(&self.0, &e.0)))
    }

    /// Principal fourth root, exp(log(v)/4).
    pub fn root4(&self) -> Self {
        let prec = self.prec();
        let quarter = PrecComplex::from_real(0.25, prec);
        self.pow(&quarter)
    }

    pub fn scale_f64(&self, s: f64) -> Self {
        let prec = self.prec();
        self * &PrecComplex::from_real(s, prec)
    }

    /// Approximate magnitude as f64 (for thresholds only).
    pub fn mag_f64(&self) -> f64 {
        self.abs().to_f64()
    }
}

impl fmt::Display for PrecComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn join_prec(a: &PrecComplex, b: &PrecComplex) -> u32 {
    a.prec().max(b.prec())
}

macro_rules! binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl $trait for &PrecComplex {
            type Output = PrecComplex;
            fn $method(self, rhs: &PrecComplex) -> PrecComplex {
                let prec = join_prec(self, rhs);
                PrecComplex(Complex::with_val(prec, &self.0 $op &rhs.0))
            }
        }
        impl $trait for PrecComplex {
            type Output = PrecComplex;
            fn $method(self, rhs: PrecComplex) -> PrecComplex {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&PrecComplex> for PrecComplex {
            type Output = PrecComplex;
            fn $method(self, rhs: &PrecComplex) -> PrecComplex {
                (&self).$method(rhs)
            }
        }
        impl $trait<PrecComplex> for &PrecComplex {
            type Output = PrecComplex;
            fn $method(self, rhs: PrecComplex) -> PrecComplex {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, +);
binop!(Sub, sub, -);
binop!(Mul, mul, *);
binop!(Div, div, /);

impl Neg for &PrecComplex {
    type Output = PrecComplex;
    fn neg(self) -> PrecComplex {
        PrecComplex(-self.0.clone())
    }
}

impl Neg for PrecComplex {
    type Output = PrecComplex;
    fn neg(self) -> PrecComplex {
        -&self
    }
}

/// Outcome of a normalized-residual evaluation.
///
/// `normalized = raw / scale`, where `raw = |Σ termᵢ(v)|` and
/// `scale = Σ |termᵢ(v)|`.  A vanishing scale marks the report degenerate
/// (never a pass).
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub raw: Float,
    pub scale: Float,
    pub normalized: Float,
    pub pass: bool,
    pub degenerate: bool,
}

impl ResidualReport {
    pub fn from_terms(terms: &[PrecComplex], tol: f64) -> Self {
        let prec = terms.iter().map(|t| t.prec()).max().unwrap_or(53);
        let mut sum = PrecComplex::zero(prec);
        let mut scale = Float::with_val(prec, 0);
        for t in terms {
            sum = &sum + t;
            scale += t.abs();
        }
        let raw = sum.abs();
        let degenerate = scale.clone().to_f64() < DEGENERATE_SCALE;
        let normalized = if degenerate {
            Float::with_val(prec, f64::INFINITY)
        } else {
            Float::with_val(prec, &raw / &scale)
        };
        let pass = !degenerate && normalized.clone().to_f64() < tol;
        ResidualReport {
            raw,
            scale,
            normalized,
            pass,
            degenerate,
        }
    }

    pub fn normalized_f64(&self) -> f64 {
        self.normalized.to_f64()
    }
}

/// A sparse multivariate polynomial: unique exponent vectors mapping to
/// nonzero coefficients.  Term order never affects evaluation; the map is
/// ordered only for determinism.
///
/// ```
/// use ybverify::numkit::{PolyMV, PrecComplex};
///
/// // p = x² − y² in two variables at 53 bits.
/// let mut p = PolyMV::new(2);
/// p.add_term(vec![2, 0], PrecComplex::one(53));
/// p.add_term(vec![0, 2], -&PrecComplex::one(53));
///
/// let v = [PrecComplex::from_int(1, 53), PrecComplex::from_int(2, 53)];
/// assert_eq!(p.eval(&v).real().to_f64(), -3.0);
///
/// // Normalized residual: |1 − 4| / (1 + 4) = 0.6.
/// let rep = p.normalized_residual(&v, 1e-10);
/// assert!((rep.normalized_f64() - 0.6).abs() < 1e-12);
/// assert!(!rep.pass);
/// ```
#[derive(Clone, Debug)]
pub struct PolyMV {
    pub nvars: usize,
    terms: BTreeMap<Vec<u32>, PrecComplex>,
}

impl PolyMV {
    pub fn new(nvars: usize) -> Self {
        PolyMV {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    /// Builds from (exponent vector, coefficient) pairs, merging duplicates
    /// and dropping zeros.
    pub fn from_terms(nvars: usize, list: Vec<(Vec<u32>, PrecComplex)>) -> Self {
        let mut p = Self::new(nvars);
        for (e, c) in list {
            p.add_term(e, c);
        }
        p
    }

    pub fn add_term(&mut self, expts: Vec<u32>, coeff: PrecComplex) {
        assert_eq!(expts.len(), self.nvars, "exponent vector arity mismatch");
        if coeff.is_zero() {
            return;
        }
        match self.terms.get_mut(&expts) {
            Some(c) => {
                let merged = &*c + &coeff;
                if merged.is_zero() {
                    self.terms.remove(&expts);
                } else {
                    *c = merged;
                }
            }
            None => {
                self.terms.insert(expts, coeff);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &PrecComplex)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn max_coeff_mag(&self) -> f64 {
        self.terms.values().map(|c| c.mag_f64()).fold(0.0, f64::max)
    }

    /// Evaluates each term separately (the input of the residual policy).
    pub fn eval_terms(&self, v: &[PrecComplex]) -> Vec<PrecComplex> {
        assert_eq!(v.len(), self.nvars, "point arity mismatch");
        let prec = v
            .iter()
            .map(|x| x.prec())
            .chain(self.terms.values().map(|c| c.prec()))
            .max()
            .unwrap_or(53);
        self.terms
            .iter()
            .map(|(e, c)| {
                let mut t = c.to_prec(prec.max(c.prec()));
                for (x, &p) in v.iter().zip(e.iter()) {
                    if p > 0 {
                        t = &t * &x.powi(p as i32);
                    }
                }
                t
            })
            .collect()
    }

    pub fn eval(&self, v: &[PrecComplex]) -> PrecComplex {
        let prec = v.iter().map(|x| x.prec()).max().unwrap_or(53);
        self.eval_terms(v)
            .into_iter()
            .fold(PrecComplex::zero(prec), |a, t| &a + &t)
    }

    /// The scale-free residual of the polynomial at a point.
    pub fn normalized_residual(&self, v: &[PrecComplex], tol: f64) -> ResidualReport {
        ResidualReport::from_terms(&self.eval_terms(v), tol)
    }

    pub fn add(&self, other: &PolyMV) -> PolyMV {
        assert_eq!(self.nvars, other.nvars);
        let mut out = self.clone();
        for (e, c) in other.terms.iter() {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &PolyMV) -> PolyMV {
        self.add(&other.scale(&PrecComplex::from_int(-1, 53)))
    }

    pub fn scale(&self, s: &PrecComplex) -> PolyMV {
        let mut out = PolyMV::new(self.nvars);
        for (e, c) in self.terms.iter() {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &PolyMV) -> PolyMV {
        assert_eq!(self.nvars, other.nvars);
        let mut out = PolyMV::new(self.nvars);
        for (e1, c1) in self.terms.iter() {
            for (e2, c2) in other.terms.iter() {
                let e: Vec<u32> = e1.iter().zip(e2.iter()).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    /// Partial derivative with respect to variable `var`.
    pub fn derivative(&self, var: usize) -> PolyMV {
        let mut out = PolyMV::new(self.nvars);
        for (e, c) in self.terms.iter() {
            if e[var] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            let k = PrecComplex::from_int(e[var] as i64, c.prec());
            out.add_term(e2, c * &k);
        }
        out
    }

    /// Substitutes variable `var` by a constant, reducing arity by one.
    pub fn substitute_const(&self, var: usize, value: &PrecComplex) -> PolyMV {
        let mut out = PolyMV::new(self.nvars - 1);
        for (e, c) in self.terms.iter() {
            let mut e2 = Vec::with_capacity(self.nvars - 1);
            for (i, &p) in e.iter().enumerate() {
                if i != var {
                    e2.push(p);
                }
            }
            out.add_term(e2, c * &value.powi(e[var] as i32));
        }
        out
    }

    /// Translates coordinates: p(x) → p(x + v), via binomial expansion.
    pub fn shift(&self, v: &[PrecComplex]) -> PolyMV {
        assert_eq!(v.len(), self.nvars);
        let mut out = PolyMV::new(self.nvars);
        for (e, c) in self.terms.iter() {
            // Expand ∏ (x_i + v_i)^{e_i}.
            let mut expansion: Vec<(Vec<u32>, PrecComplex)> = vec![(vec![], c.clone())];
            for (i, &p) in e.iter().enumerate() {
                let mut next = Vec::new();
                for (partial, coeff) in expansion.into_iter() {
                    // (x_i + v_i)^p = Σ_k C(p,k) x_i^k v_i^{p-k}
                    let mut binom = PrecComplex::one(coeff.prec());
                    for k in (0..=p).rev() {
                        // binom currently C(p, k) computed iteratively from k=p down
                        let mut e2 = partial.clone();
                        e2.push(k);
                        let vpow = v[i].powi((p - k) as i32);
                        next.push((e2, &(&coeff * &binom) * &vpow));
                        if k > 0 {
                            // C(p, k-1) = C(p,k) * k / (p-k+1)
                            let num = PrecComplex::from_int(k as i64, binom.prec());
                            let den = PrecComplex::from_int((p - k + 1) as i64, binom.prec());
                            binom = &(&binom * &num) / &den;
                        }
                    }
                }
                expansion = next;
            }
            for (e2, c2) in expansion {
                out.add_term(e2, c2);
            }
        }
        out
    }

    /// Collects the univariate coefficients in variable `var` (ascending),
    /// after all other variables have been substituted away.
    pub fn univariate_coeffs(&self) -> Vec<PrecComplex> {
        assert_eq!(self.nvars, 1, "univariate_coeffs needs a 1-variable poly");
        let deg = self.total_degree() as usize;
        let prec = self.terms.values().map(|c| c.prec()).max().unwrap_or(53);
        let mut out = vec![PrecComplex::zero(prec); deg + 1];
        for (e, c) in self.terms.iter() {
            out[e[0] as usize] = c.clone();
        }
        out
    }
}

/// Result of an equality-up-to-scalar comparison.
#[derive(Clone, Debug)]
pub struct ScalarMatch {
    pub equal: bool,
    pub lambda: Option<PrecComplex>,
    /// Worst offending monomial (exponent vector) when not equal.
    pub worst_monomial: Option<Vec<u32>>,
    pub worst_error: f64,
}

/// Polynomial product with merged coefficients.
pub fn mv_multiply(p: &PolyMV, q: &PolyMV) -> PolyMV {
    p.mul(q)
}

/// Tests whether q = λ·p for a single scalar λ, determined from the
/// largest-magnitude coefficient pair.  Coefficients below 10⁻³⁰ of the
/// largest magnitude are treated as zero.
pub fn mv_equal_up_to_scalar(p: &PolyMV, q: &PolyMV, tol: f64) -> ScalarMatch {
    let pmax = p.max_coeff_mag();
    let qmax = q.max_coeff_mag();
    if pmax == 0.0 || qmax == 0.0 {
        return ScalarMatch {
            equal: p.is_zero() && q.is_zero(),
            lambda: None,
            worst_monomial: None,
            worst_error: 0.0,
        };
    }
    let pcut = pmax * 1e-30;
    let qcut = qmax * 1e-30;
    // Pivot: largest-magnitude coefficient of p that also appears in q.
    let mut pivot: Option<(&Vec<u32>, &PrecComplex)> = None;
    for (e, c) in p.terms() {
        if c.mag_f64() <= pcut {
            continue;
        }
        if pivot.is_none_or(|(_, pc)| c.mag_f64() > pc.mag_f64()) {
            pivot = Some((e, c));
        }
    }
    let (pe, pc) = match pivot {
        Some(x) => x,
        None => {
            return ScalarMatch {
                equal: false,
                lambda: None,
                worst_monomial: None,
                worst_error: f64::INFINITY,
            }
        }
    };
    let qc = match q.terms().find(|(e, _)| *e == pe) {
        Some((_, c)) if c.mag_f64() > qcut => c.clone(),
        _ => {
            return ScalarMatch {
                equal: false,
                lambda: None,
                worst_monomial: Some(pe.clone()),
                worst_error: f64::INFINITY,
            }
        }
    };
    let lambda = &qc / pc;
    let mut worst: Option<(Vec<u32>, f64)> = None;
    let mut keys: Vec<Vec<u32>> = p.terms().map(|(e, _)| e.clone()).collect();
    for (e, _) in q.terms() {
        if !keys.contains(e) {
            keys.push(e.clone());
        }
    }
    for e in keys {
        let a = p
            .terms()
            .find(|(k, _)| **k == e)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(|| PrecComplex::zero(53));
        let b = q
            .terms()
            .find(|(k, _)| **k == e)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(|| PrecComplex::zero(53));
        let a0 = a.mag_f64() <= pcut;
        let b0 = b.mag_f64() <= qcut;
        if a0 && b0 {
            continue;
        }
        let err = if a0 || b0 {
            f64::INFINITY
        } else {
            let lhs = &a * &lambda;
            (&lhs - &b).mag_f64() / b.mag_f64().max(lhs.mag_f64())
        };
        if worst.as_ref().is_none_or(|(_, w)| err > *w) {
            worst = Some((e, err));
        }
    }
    let (wm, we) = worst.map(|(e, w)| (Some(e), w)).unwrap_or((None, 0.0));
    ScalarMatch {
        equal: we < tol,
        lambda: Some(lambda),
        worst_monomial: wm,
        worst_error: we,
    }
}

/// Errors surfaced by the numeric kernels.
#[derive(Debug, thiserror::Error)]
pub enum NumError {
    #[error("root finder did not converge for {0} root(s)")]
    RootsUnconverged(usize),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("newton system diverged: {0}")]
    NewtonDiverged(String),
    #[error("insufficient precision: {0}")]
    Precision(String),
}

fn horner(c: &[PrecComplex], z: &PrecComplex) -> (PrecComplex, PrecComplex) {
    // c ascending; returns (p(z), p'(z)).
    let prec = z.prec().max(c.iter().map(|x| x.prec()).max().unwrap_or(53));
    let mut p = PrecComplex::zero(prec);
    let mut dp = PrecComplex::zero(prec);
    for ci in c.iter().rev() {
        dp = &(&dp * z) + &p;
        p = &(&p * z) + ci;
    }
    (p, dp)
}

/// All complex roots of a univariate polynomial, coefficients ascending
/// (c[k] multiplies x^k), via Aberth simultaneous iteration followed by
/// three Newton polish steps per root.
///
/// ```
/// use ybverify::numkit::{uv_roots, PrecComplex};
///
/// // x² − 1 = 0, coefficients ascending: [−1, 0, 1].
/// let c = [
///     PrecComplex::from_int(-1, 53),
///     PrecComplex::zero(53),
///     PrecComplex::one(53),
/// ];
/// let mut re: Vec<f64> = uv_roots(&c).unwrap().iter().map(|r| r.real().to_f64()).collect();
/// re.sort_by(f64::total_cmp);
/// assert_eq!(re.len(), 2);
/// assert!((re[0] + 1.0).abs() < 1e-12 && (re[1] - 1.0).abs() < 1e-12);
/// ```
pub fn uv_roots(coeffs: &[PrecComplex]) -> Result<Vec<PrecComplex>, NumError> {
    let mut c: Vec<PrecComplex> = coeffs.to_vec();
    while let Some(last) = c.last() {
        if last.mag_f64() < DEGENERATE_SCALE {
            c.pop();
        } else {
            break;
        }
    }
    if c.len() < 2 {
        return Err(NumError::Degenerate(
            "polynomial degree < 1 after stripping leading zeros".into(),
        ));
    }
    let n = c.len() - 1;
    let prec = c.iter().map(|x| x.prec()).max().unwrap_or(53);
    let lead = c[n].clone();

    // Initial guesses on a circle; radius from the Cauchy bound.
    let mut radius: f64 = 0.0;
    for ci in &c[..n] {
        radius = radius.max((ci.mag_f64() / lead.mag_f64()).powf(1.0 / n as f64));
    }
    let radius = (radius + 1.0).min(1e6);
    let mut z: Vec<PrecComplex> = (0..n)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64) + 0.3971;
            PrecComplex::from_f64(radius * theta.cos(), radius * theta.sin(), prec)
        })
        .collect();

    let target = 10f64.powf(-(prec as f64) / 2.0);
    let max_iter = 200;
    let mut converged = vec![false; n];
    for _ in 0..max_iter {
        let mut max_step = 0.0f64;
        for i in 0..n {
            let (p, dp) = horner(&c, &z[i]);
            if dp.mag_f64() < DEGENERATE_SCALE {
                // Nudge off a critical point.
                z[i] = &z[i] + &PrecComplex::from_f64(1e-6, 1e-6, prec);
                max_step = f64::INFINITY;
                continue;
            }
            let newton = &p / &dp;
            let mut s = PrecComplex::zero(prec);
            for j in 0..n {
                if j != i {
                    let d = &z[i] - &z[j];
                    if d.mag_f64() < 1e-30 {
                        continue;
                    }
                    s = &s + &d.recip();
                }
            }
            let denom = &PrecComplex::one(prec) - &(&newton * &s);
            let step = if denom.mag_f64() < 1e-30 {
                newton
            } else {
                &newton / &denom
            };
            let rel = step.mag_f64() / (1.0 + z[i].mag_f64());
            max_step = max_step.max(rel);
            converged[i] = rel < target;
            z[i] = &z[i] - &step;
        }
        if max_step < target {
            break;
        }
    }

    // Polish.
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = horner(&c, zi);
            if dp.mag_f64() < DEGENERATE_SCALE {
                break;
            }
            *zi = &*zi - &(&p / &dp);
        }
    }

    // Verify against the residual contract |p(r)|/scale(r) < 10^(-prec/4).
    let tol = 10f64.powf(-(prec as f64) / 4.0);
    let mut bad = 0usize;
    for zi in &z {
        let terms: Vec<PrecComplex> = c
            .iter()
            .enumerate()
            .map(|(k, ck)| ck * &zi.powi(k as i32))
            .collect();
        let rep = ResidualReport::from_terms(&terms, tol);
        if !rep.pass && !rep.degenerate {
            bad += 1;
        }
    }
    if bad > 0 {
        return Err(NumError::RootsUnconverged(bad));
    }
    Ok(z)
}

/// Tuning knobs for `newton_system`.
#[derive(Clone, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    /// Condition-number proxy above which the trajectory aborts.
    pub cond_limit: f64,
    pub max_damping: u32,
    /// Number of full steps the iteration may take even when they increase
    /// the residual.  Zero keeps the strictly monotone policy; a positive
    /// budget lets the trajectory escape saddle regions where damping stalls.
    pub uphill_budget: u32,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-10,
            cond_limit: 1e12,
            max_damping: 20,
            uphill_budget: 0,
        }
    }
}

fn solve_linear(
    a: &mut [Vec<PrecComplex>],
    b: &mut [PrecComplex],
) -> Option<(Vec<PrecComplex>, f64)> {
    let n = b.len();
    let mut cond_proxy = 1.0f64;
    let mut row_norms = vec![0.0f64; n];
    for (i, row) in a.iter().enumerate() {
        row_norms[i] = row.iter().map(|x| x.mag_f64()).fold(0.0, f64::max);
    }
    let mut det_mag = 1.0f64;
    for k in 0..n {
        // Partial pivot.
        let mut piv = k;
        for r in k + 1..n {
            if a[r][k].mag_f64() > a[piv][k].mag_f64() {
                piv = r;
            }
        }
        if piv != k {
            a.swap(piv, k);
            b.swap(piv, k);
            row_norms.swap(piv, k);
        }
        let pk = a[k][k].clone();
        if pk.mag_f64() < DEGENERATE_SCALE {
            return None;
        }
        det_mag *= pk.mag_f64();
        for r in k + 1..n {
            let m = &a[r][k] / &pk;
            #[allow(clippy::needless_range_loop)]
            for cidx in k..n {
                let delta = &m * &a[k][cidx];
                a[r][cidx] = &a[r][cidx] - &delta;
            }
            let delta = &m * &b[k];
            b[r] = &b[r] - &delta;
        }
    }
    for rn in row_norms {
        cond_proxy *= rn.max(1e-300);
    }
    let cond = cond_proxy / det_mag.max(1e-300);
    // Back substitution.
    let prec = b.iter().map(|x| x.prec()).max().unwrap_or(53);
    let mut x = vec![PrecComplex::zero(prec); n];
    for k in (0..n).rev() {
        let mut s = b[k].clone();
        for cidx in k + 1..n {
            let t = &a[k][cidx] * &x[cidx];
            s = &s - &t;
        }
        x[k] = &s / &a[k][k];
    }
    Some((x, cond))
}

fn system_residual(f: &[PolyMV], v: &[PrecComplex]) -> f64 {
    f.iter().map(|p| p.eval(v).mag_f64()).fold(0.0, f64::max)
}

/// Damped Newton iteration for a square polynomial system with analytic
/// Jacobian.  Returns the solution or `None` on divergence (including a
/// condition-proxy abort).
pub fn newton_system_with(
    f: &[PolyMV],
    start: &[PrecComplex],
    max_iter: usize,
    opts: &NewtonOptions,
) -> Option<Vec<PrecComplex>> {
    let n = f.len();
    assert_eq!(n, start.len(), "square system required");
    let prec = start.iter().map(|x| x.prec()).max().unwrap_or(53);
    let jac: Vec<Vec<PolyMV>> = f
        .iter()
        .map(|p| (0..n).map(|j| p.derivative(j)).collect())
        .collect();
    let mut v: Vec<PrecComplex> = start.iter().map(|x| x.to_prec(prec)).collect();
    let mut res = system_residual(f, &v);
    let mut uphill_left = opts.uphill_budget;
    for _ in 0..max_iter {
        let mut a: Vec<Vec<PrecComplex>> = jac
            .iter()
            .map(|row| row.iter().map(|p| p.eval(&v)).collect())
            .collect();
        let mut b: Vec<PrecComplex> = f.iter().map(|p| p.eval(&v)).collect();
        let (step, cond) = solve_linear(&mut a, &mut b)?;
        if cond > opts.cond_limit {
            return None;
        }
        let mut lam = 1.0f64;
        let mut accepted = false;
        for _ in 0..=opts.max_damping {
            let trial: Vec<PrecComplex> = v
                .iter()
                .zip(step.iter())
                .map(|(x, s)| x - &s.scale_f64(lam))
                .collect();
            let tres = system_residual(f, &trial);
            if tres < res || res == 0.0 {
                v = trial;
                res = tres;
                accepted = true;
                break;
            }
            lam *= 0.5;
        }
        if !accepted {
            if uphill_left == 0 {
                // Residual stagnation.
                break;
            }
            // Take a (clamped) full step anyway to escape a saddle region.
            uphill_left -= 1;
            let raw_mag: f64 = step.iter().map(|s| s.mag_f64()).fold(0.0, f64::max);
            let clamp = if raw_mag > 10.0 { 10.0 / raw_mag } else { 1.0 };
            v = v
                .iter()
                .zip(step.iter())
                .map(|(x, s)| x - &s.scale_f64(clamp))
                .collect();
            res = system_residual(f, &v);
            continue;
        }
        let step_mag: f64 = step.iter().map(|s| s.mag_f64()).fold(0.0, f64::max);
        if step_mag < 10f64.powf(-(prec as f64) * 0.85) {
            break;
        }
    }
    // Accept when every equation's normalized residual clears the tolerance.
    let ok = f.iter().all(|p| {
        let rep = p.normalized_residual(&v, opts.tol);
        rep.pass || rep.degenerate
    });
    if ok {
        Some(v)
    } else {
        None
    }
}

/// Damped Newton with the default policy (tolerance 1e-10, condition abort
/// at 1e12, 20 halvings).
pub fn newton_system(
    f: &[PolyMV],
    start: &[PrecComplex],
    max_iter: usize,
) -> Option<Vec<PrecComplex>> {
    newton_system_with(f, start, max_iter, &NewtonOptions::default())
}

/// Orders complex numbers lexicographically by (Re, Im) for deterministic
/// output listings.
pub fn lex_cmp(a: &PrecComplex, b: &PrecComplex) -> Ordering {
    let (ar, ai) = (a.real().to_f64(), a.imag().to_f64());
    let (br, bi) = (b.real().to_f64(), b.imag().to_f64());
    ar.partial_cmp(&br)
        .unwrap_or(Ordering::Equal)
        .then(ai.partial_cmp(&bi).unwrap_or(Ordering::Equal))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pc(re: f64, im: f64) -> PrecComplex {
        PrecComplex::from_f64(re, im, 53)
    }

    #[test]
    fn precision_promotion() {
        let a = PrecComplex::from_f64(1.0, 0.0, 53);
        let b = PrecComplex::from_f64(2.0, 0.0, 256);
        assert_eq!((&a + &b).prec(), 256);
        assert_eq!((&a * &b).prec(), 256);
    }

    #[test]
    fn principal_sqrt_branch() {
        // sqrt(-1) = +i (branch cut tie-break Im ≥ 0).
        let m1 = pc(-1.0, 0.0);
        let s = m1.sqrt();
        assert!(s.real().to_f64().abs() < 1e-15);
        assert!((s.imag().to_f64() - 1.0).abs() < 1e-15);
        // Re(sqrt) ≥ 0 generally, and sqrt(v)^2 = v.
        for (re, im) in [(3.0, 4.0), (-3.0, 4.0), (-3.0, -4.0), (2.0, -5.0)] {
            let v = pc(re, im);
            let s = v.sqrt();
            assert!(s.real().to_f64() >= 0.0);
            let back = s.square();
            assert!((&back - &v).mag_f64() < 1e-13);
        }
    }

    #[test]
    fn residual_exact_cancellation() {
        // x² − y² at (1, 1): exact zero.
        let mut p = PolyMV::new(2);
        p.add_term(vec![2, 0], pc(1.0, 0.0));
        p.add_term(vec![0, 2], pc(-1.0, 0.0));
        let rep = p.normalized_residual(&[pc(1.0, 0.0), pc(1.0, 0.0)], 1e-10);
        assert!(rep.pass);
        assert_eq!(rep.normalized_f64(), 0.0);
    }

    #[test]
    fn residual_direct_arithmetic() {
        // x² − y² at (1, 2): raw 3, scale 5, normalized 0.6.
        let mut p = PolyMV::new(2);
        p.add_term(vec![2, 0], pc(1.0, 0.0));
        p.add_term(vec![0, 2], pc(-1.0, 0.0));
        let rep = p.normalized_residual(&[pc(1.0, 0.0), pc(2.0, 0.0)], 1e-10);
        assert!((rep.raw.to_f64() - 3.0).abs() < 1e-14);
        assert!((rep.scale.to_f64() - 5.0).abs() < 1e-14);
        assert!((rep.normalized_f64() - 0.6).abs() < 1e-14);
        assert!(!rep.pass);
    }

    #[test]
    fn residual_scaling_invariance() {
        let mut p = PolyMV::new(2);
        p.add_term(vec![2, 1], pc(1.5, -0.25));
        p.add_term(vec![0, 3], pc(-0.75, 2.0));
        p.add_term(vec![1, 0], pc(0.1, 0.3));
        let v = [pc(1.1, -0.4), pc(0.7, 0.9)];
        let r1 = p.normalized_residual(&v, 1e-10).normalized_f64();
        let scaled = p.scale(&pc(7.0, 0.0));
        let r2 = scaled.normalized_residual(&v, 1e-10).normalized_f64();
        assert!((r1 - r2).abs() <= 1e-15 * r1.abs().max(1.0));
    }

    #[test]
    fn roots_factored_forms() {
        // x² − 1 → {±1}
        let c = vec![pc(-1.0, 0.0), pc(0.0, 0.0), pc(1.0, 0.0)];
        let mut r = uv_roots(&c).unwrap();
        r.sort_by(lex_cmp);
        assert!((&r[0] + &pc(1.0, 0.0)).mag_f64() < 1e-12);
        assert!((&r[1] - &pc(1.0, 0.0)).mag_f64() < 1e-12);
        // x² + 1 → {±i}
        let c = vec![pc(1.0, 0.0), pc(0.0, 0.0), pc(1.0, 0.0)];
        let mut r = uv_roots(&c).unwrap();
        r.sort_by(lex_cmp);
        assert!((&r[0] + &pc(0.0, 1.0)).mag_f64() < 1e-12);
        assert!((&r[1] - &pc(0.0, 1.0)).mag_f64() < 1e-12);
    }

    #[test]
    fn roots_cubic_expanded() {
        // (x−2)(x−3)(x−5) = x³ −10x² +31x −30.
        let c = vec![pc(-30.0, 0.0), pc(31.0, 0.0), pc(-10.0, 0.0), pc(1.0, 0.0)];
        let mut r = uv_roots(&c).unwrap();
        r.sort_by(lex_cmp);
        for (root, want) in r.iter().zip([2.0, 3.0, 5.0]) {
            assert!((root - &pc(want, 0.0)).mag_f64() < 1e-12);
        }
    }

    #[test]
    fn roots_reconstruction() {
        // Product of (x − rᵢ) rebuilt from the computed roots matches the
        // input coefficients.
        let coeffs = vec![pc(6.0, -2.0), pc(-5.0, 1.0), pc(2.5, 0.0), pc(1.0, 0.5)];
        let roots = uv_roots(&coeffs).unwrap();
        let mut poly = PolyMV::new(1);
        poly.add_term(vec![0], coeffs[3].clone());
        for r in &roots {
            let mut lin = PolyMV::new(1);
            lin.add_term(vec![1], pc(1.0, 0.0));
            lin.add_term(vec![0], -r);
            poly = poly.mul(&lin);
        }
        let rebuilt = poly.univariate_coeffs();
        for (a, b) in rebuilt.iter().zip(coeffs.iter()) {
            assert!((a - b).mag_f64() < 1e-8 * (1.0 + b.mag_f64()));
        }
    }

    #[test]
    fn newton_simple_basin() {
        // {x² − 1, y − x} from (0.9, 0.9) → (1, 1).
        let mut f1 = PolyMV::new(2);
        f1.add_term(vec![2, 0], pc(1.0, 0.0));
        f1.add_term(vec![0, 0], pc(-1.0, 0.0));
        let mut f2 = PolyMV::new(2);
        f2.add_term(vec![0, 1], pc(1.0, 0.0));
        f2.add_term(vec![1, 0], pc(-1.0, 0.0));
        let sol = newton_system(&[f1, f2], &[pc(0.9, 0.0), pc(0.9, 0.0)], 50).unwrap();
        assert!((&sol[0] - &pc(1.0, 0.0)).mag_f64() < 1e-12);
        assert!((&sol[1] - &pc(1.0, 0.0)).mag_f64() < 1e-12);
    }

    #[test]
    fn newton_circle_line() {
        // {x² + y² − 1, x − y} from (1, 0) → (1/√2, 1/√2).
        let mut f1 = PolyMV::new(2);
        f1.add_term(vec![2, 0], pc(1.0, 0.0));
        f1.add_term(vec![0, 2], pc(1.0, 0.0));
        f1.add_term(vec![0, 0], pc(-1.0, 0.0));
        let mut f2 = PolyMV::new(2);
        f2.add_term(vec![1, 0], pc(1.0, 0.0));
        f2.add_term(vec![0, 1], pc(-1.0, 0.0));
        let sol = newton_system(&[f1, f2], &[pc(1.0, 0.0), pc(0.0, 0.0)], 80).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((&sol[0] - &pc(s, 0.0)).mag_f64() < 1e-12);
        assert!((&sol[1] - &pc(s, 0.0)).mag_f64() < 1e-12);
    }

    #[test]
    fn newton_singular_root_detected() {
        // {x², y} has a degenerate Jacobian at the root; the default policy
        // must not silently claim quadratic convergence.
        let mut f1 = PolyMV::new(2);
        f1.add_term(vec![2, 0], pc(1.0, 0.0));
        let mut f2 = PolyMV::new(2);
        f2.add_term(vec![0, 1], pc(1.0, 0.0));
        let out = newton_system(&[f1.clone(), f2.clone()], &[pc(1.0, 0.0), pc(1.0, 0.0)], 12);
        match out {
            None => {}
            Some(v) => {
                // If it converged anyway, the answer must be (≈0, ≈0).
                assert!(v[0].mag_f64() < 1e-3 && v[1].mag_f64() < 1e-6);
            }
        }
    }

    #[test]
    fn multiply_basics() {
        // (x + y)(x − y) = x² − y².
        let mut a = PolyMV::new(2);
        a.add_term(vec![1, 0], pc(1.0, 0.0));
        a.add_term(vec![0, 1], pc(1.0, 0.0));
        let mut b = PolyMV::new(2);
        b.add_term(vec![1, 0], pc(1.0, 0.0));
        b.add_term(vec![0, 1], pc(-1.0, 0.0));
        let prod = mv_multiply(&a, &b);
        assert_eq!(prod.num_terms(), 2);
        let m = mv_equal_up_to_scalar(
            &prod,
            &{
                let mut p = PolyMV::new(2);
                p.add_term(vec![2, 0], pc(1.0, 0.0));
                p.add_term(vec![0, 2], pc(-1.0, 0.0));
                p
            },
            1e-12,
        );
        assert!(m.equal);
    }

    #[test]
    fn equal_up_to_scalar_lambda() {
        let mut p = PolyMV::new(2);
        p.add_term(vec![2, 0], pc(2.0, 0.0));
        p.add_term(vec![0, 2], pc(-2.0, 0.0));
        let mut q = PolyMV::new(2);
        q.add_term(vec![2, 0], pc(1.0, 0.0));
        q.add_term(vec![0, 2], pc(-1.0, 0.0));
        let m = mv_equal_up_to_scalar(&q, &p, 1e-12);
        assert!(m.equal);
        let lam = m.lambda.unwrap();
        assert!((&lam - &pc(2.0, 0.0)).mag_f64() < 1e-14);
    }

    #[test]
    fn shift_translates_correctly() {
        // p(x, y) = x² y; p shifted by (1, 2) evaluated at (u,v) equals
        // p(u+1, v+2).
        let mut p = PolyMV::new(2);
        p.add_term(vec![2, 1], pc(1.0, 0.0));
        let shifted = p.shift(&[pc(1.0, 0.0), pc(2.0, 0.0)]);
        let u = pc(0.3, -0.2);
        let v = pc(-1.1, 0.6);
        let direct = p.eval(&[&u + &pc(1.0, 0.0), &v + &pc(2.0, 0.0)]);
        let via = shifted.eval(&[u, v]);
        assert!((&direct - &via).mag_f64() < 1e-13);
    }
}
