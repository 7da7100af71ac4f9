//! Closed-form truncation-error estimates: the asymptotic upper and lower
//! bounds, their pre-asymptotic companions, the `j^N e^{-j}` tail sums, the
//! negative-order polylogarithm, Stechkin-type comparison bounds, and the
//! theoretical minimum cardinality derived from an Ehrhart quasi-polynomial.
//!
//! Every evaluator is total over its stated domain and fails loudly outside
//! it; nothing is clamped silently.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::bounds::{BoundModel, Family};
use crate::error::{Error, Result};
use crate::polytope::EhrhartQP;
use crate::sum::Accumulator;

const E: f64 = std::f64::consts::E;

/// Largest admissible rate-adjusting parameter `(e-1)/e`.
pub const XI_MAX: f64 = (E - 1.0) / E;

fn check_m(m: u64) -> Result<f64> {
    if m < 1 {
        return Err(Error::Argument("M must be >= 1".into()));
    }
    Ok(m as f64)
}

fn check_n(n: u32) -> Result<f64> {
    if n < 1 {
        return Err(Error::Argument("N must be >= 1".into()));
    }
    Ok(n as f64)
}

fn check_volp(volp: f64) -> Result<()> {
    if !(volp > 0.0) || !volp.is_finite() {
        return Err(Error::Argument("volP must be a positive real".into()));
    }
    Ok(())
}

/// `C_u(eps) = (4e + 4 eps e - 2) e/(e-1)`.
pub fn c_upper(epsilon: f64) -> f64 {
    (4.0 * E + 4.0 * epsilon * E - 2.0) * E / (E - 1.0)
}

/// `C_l = (1/2)(2/3)^{1-1/N} N volP^{1/N} q/(e^q - 1)`.
pub fn c_lower(n: u32, volp: f64, q: u32) -> f64 {
    let nf = n as f64;
    0.5 * (2.0f64 / 3.0).powf(1.0 - 1.0 / nf) * nf * volp.powf(1.0 / nf) * q as f64
        / ((q as f64).exp() - 1.0)
}

/// Asymptotic upper bound `C_u(eps) M exp(-(M/(volP(1+eps)))^{1/N})`,
/// times `(N+1)/2` in the relaxed variant.
pub fn upper_asymptotic(m: u64, n: u32, volp: f64, epsilon: f64, relaxed: bool) -> Result<f64> {
    let mf = check_m(m)?;
    let nf = check_n(n)?;
    check_volp(volp)?;
    if !(epsilon > 0.0) {
        return Err(Error::Argument("epsilon must be > 0".into()));
    }
    let rate = (mf / (volp * (1.0 + epsilon))).powf(1.0 / nf);
    let mut v = c_upper(epsilon) * mf * (-rate).exp();
    if relaxed {
        v *= (nf + 1.0) / 2.0;
    }
    Ok(v)
}

/// Asymptotic lower bound `C_l M^{1-1/N} exp(-(M/volP)^{1/N})`.
pub fn lower_asymptotic(m: u64, n: u32, volp: f64, q: u32) -> Result<f64> {
    let mf = check_m(m)?;
    let nf = check_n(n)?;
    check_volp(volp)?;
    if q < 1 {
        return Err(Error::Argument("q must be >= 1".into()));
    }
    let rate = (mf / volp).powf(1.0 / nf);
    Ok(c_lower(n, volp, q) * mf.powf(1.0 - 1.0 / nf) * (-rate).exp())
}

/// `sum_{j >= J} j^N e^{-j}` by direct summation.
pub fn sum_jn_exact(j: u32, n: u32) -> Result<f64> {
    check_n(n)?;
    let mut acc = Accumulator::new();
    let mut k = j.max(1) as u64;
    loop {
        let term = ((n as f64) * (k as f64).ln() - k as f64).exp();
        acc.add(term);
        if term < 1e-18 * acc.value() {
            return Ok(acc.value());
        }
        k += 1;
    }
}

/// Threshold `max{1/(e^{1/N}-1), L/(e^{(L-1)/N}-1)}` below which the bound
/// form is out of regime.
pub fn sum_jn_threshold(n: u32, l: f64) -> f64 {
    let nf = n as f64;
    let a = ((1.0 / nf).exp() - 1.0).recip();
    let b = l / (((l - 1.0) / nf).exp() - 1.0);
    a.max(b)
}

/// `L J^N e^{-J} e/(e-1)`, valid for `J >= sum_jn_threshold(N, L)`.
pub fn sum_jn_bound(j: u32, n: u32, l: f64) -> Result<f64> {
    let nf = check_n(n)?;
    if !(l > 1.0) {
        return Err(Error::Argument("L must be > 1".into()));
    }
    let threshold = sum_jn_threshold(n, l);
    if (j as f64) < threshold {
        return Err(Error::Domain(format!(
            "J = {j} is below the validity threshold {threshold:.6} for L = {l}"
        )));
    }
    let jf = j as f64;
    Ok(l * (nf * jf.ln() - jf).exp() * E / (E - 1.0))
}

/// Stechkin bound `(prod 1/(1-e^{-p lambda_i}))^{1/p} M^{1-1/p}`.
pub fn stechkin(m: u64, lambda: &[f64], p: f64) -> Result<f64> {
    let mf = check_m(m)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Argument("p must be in (0,1)".into()));
    }
    if lambda.is_empty() || lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Argument("lambda must be nonempty and positive".into()));
    }
    let factor: f64 = lambda
        .iter()
        .map(|&l| (1.0 - (-p * l).exp()).recip())
        .product();
    Ok(factor.powf(1.0 / p) * mf.powf(1.0 - 1.0 / p))
}

/// Optimized Stechkin-type bound `M exp(-(1/e)(M prod lambda)^{1/N} N xi)`.
pub fn stechkin_optimized(m: u64, lambda: &[f64], xi: f64) -> Result<f64> {
    let mf = check_m(m)?;
    if lambda.is_empty() || lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Argument("lambda must be nonempty and positive".into()));
    }
    if !(xi > 0.0 && xi <= XI_MAX) {
        return Err(Error::Argument(format!("xi must be in (0, {XI_MAX}]")));
    }
    let n = lambda.len() as f64;
    let prod: f64 = lambda.iter().product();
    Ok(mf * (-(mf * prod).powf(1.0 / n) * n * xi / E).exp())
}

/// Isotropic Stechkin bound `(1-e^{-l/2})^{-N} M^{-1/p} (1-e^{-p l/2})^{-N/p}`.
pub fn iso_stechkin(m: u64, n: u32, lambda: f64, p: f64) -> Result<f64> {
    let mf = check_m(m)?;
    let nf = check_n(n)?;
    if !(lambda > 0.0) || !(p > 0.0) {
        return Err(Error::Argument("lambda and p must be > 0".into()));
    }
    Ok((1.0 - (-lambda / 2.0).exp()).powf(-nf)
        * mf.powf(-1.0 / p)
        * (1.0 - (-p * lambda / 2.0).exp()).powf(-nf / p))
}

/// Optimized isotropic bound with the internally computed
/// `eps = ((e-1)/e)(1 - 1.09/M^{1/N})`; requires `M > 1.09^N`.
pub fn iso_optimized(m: u64, n: u32, lambda: f64) -> Result<f64> {
    let mf = check_m(m)?;
    let nf = check_n(n)?;
    if !(lambda > 0.0) {
        return Err(Error::Argument("lambda must be > 0".into()));
    }
    if mf <= 1.09f64.powf(nf) {
        return Err(Error::Domain(format!(
            "M = {m} must exceed 1.09^N = {:.4}",
            1.09f64.powf(nf)
        )));
    }
    let eps = XI_MAX * (1.0 - 1.09 / mf.powf(1.0 / nf));
    Ok((1.0 - (-lambda / 2.0).exp()).powf(-nf)
        * (lambda * nf / (2.0 * E) * (1.0 - eps).ln() * mf.powf(1.0 / nf)).exp())
}

/// Complex-analysis bound `exp(-lambda (M N!)^{1/N})/(e^lambda - 1)`.
pub fn complex_bound(m: u64, n: u32, lambda: f64) -> Result<f64> {
    let mf = check_m(m)?;
    let nf = check_n(n)?;
    if !(lambda > 0.0) {
        return Err(Error::Argument("lambda must be > 0".into()));
    }
    let root = ((mf.ln() + ln_gamma(nf + 1.0)) / nf).exp();
    Ok((-lambda * root).exp() / (lambda.exp() - 1.0))
}

/// Negative-order polylogarithm `Li_{-N}(z) = sum_j j^N z^j` for `0 < z < 1`.
pub fn polylog_neg(n: u32, z: f64) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return Err(Error::Argument("z must be in (0,1)".into()));
    }
    let lnz = z.ln();
    let mut acc = Accumulator::new();
    let mut j = 1u64;
    loop {
        let term = ((n as f64) * (j as f64).ln() + (j as f64) * lnz).exp();
        acc.add(term);
        // once terms decay geometrically, the left-out tail is below
        // term * z/(1-z); stop when that is negligible
        if j as f64 > (n as f64) / -lnz && term * z / (1.0 - z) < 1e-17 * acc.value() {
            return Ok(acc.value());
        }
        j += 1;
    }
}

/// Pre-asymptotic bound on `sum_{j >= J} j^N e^{-j}`, valid for `J <= N+1`:
/// `Li_{-N}(1/e) - ((J-1)^{N+1}/(N+1)) exp(-(J-1)(N+1)/(N+2))`.
pub fn pre_asymptotic_sum_bound(j: u32, n: u32) -> Result<f64> {
    let nf = check_n(n)?;
    if j < 1 || j > n + 1 {
        return Err(Error::Domain(format!(
            "pre-asymptotic regime requires 1 <= J <= N+1 = {}",
            n + 1
        )));
    }
    let jm = (j - 1) as f64;
    let correction = if j == 1 {
        0.0
    } else {
        jm.powf(nf + 1.0) / (nf + 1.0) * (-jm * (nf + 1.0) / (nf + 2.0)).exp()
    };
    Ok(polylog_neg(n, 1.0 / E)? - correction)
}

/// Pre-asymptotic tail bound
/// `e sigma [Li_{-N}(1/e) - (1/(N+1))(M/sigma)^{(N+1)/N} exp(-(M/sigma)^{1/N}(N+1)/(N+2))]`.
///
/// Valid for `M <= #(P_N cap Z^N)`; that cap depends on the model and is the
/// caller's check.
pub fn pre_asymptotic_tail_bound(m: u64, n: u32, sigma: u64) -> Result<f64> {
    let mf = check_m(m)?;
    let nf = check_n(n)?;
    if sigma < 1 {
        return Err(Error::Argument("sigma must be >= 1".into()));
    }
    let r = mf / sigma as f64;
    let v = E
        * sigma as f64
        * (polylog_neg(n, 1.0 / E)?
            - r.powf((nf + 1.0) / nf) / (nf + 1.0) * (-r.powf(1.0 / nf) * (nf + 1.0) / (nf + 2.0)).exp());
    Ok(v)
}

/// Output of [`min_cardinality`].
#[derive(Debug, Clone, Serialize)]
pub struct MinCardinality {
    /// Largest integer `j` where the Ehrhart count still exceeds
    /// `(1+eps) volP j^N`.
    pub delta_eps: u64,
    pub j_eps: f64,
    pub m_eps: u128,
    pub jp_eps: f64,
    pub mp_eps: u128,
    /// `(1+eps)^{-1/N}`.
    pub rate_factor: f64,
}

/// Theoretical minimum cardinalities for the asymptotic upper bounds, from an
/// exact Ehrhart quasi-polynomial of a homogeneous rational model.
pub fn min_cardinality(model: &BoundModel, epsilon: f64, qp: &EhrhartQP) -> Result<MinCardinality> {
    if !(epsilon > 0.0) {
        return Err(Error::Argument("epsilon must be > 0".into()));
    }
    match model.family() {
        Family::WeightedLinear => {}
        Family::SupAffine if model.affine_terms().iter().all(|t| t.offset == 0.0) => {}
        _ => {
            return Err(Error::Domain(
                "minimum cardinality needs a homogeneous model (WeightedLinear or zero-offset SupAffine)"
                    .into(),
            ))
        }
    }
    if model.dimension() != qp.n as usize {
        return Err(Error::Argument("model and Ehrhart dimensions differ".into()));
    }

    let n = qp.n;
    let volp = qp.leading_rational();
    let volp_f = volp.to_f64().unwrap();
    // beyond j_max the leading term dominates every lower-order coefficient
    let mut coeff_mass = 0.0f64;
    for i in 0..n as usize {
        let worst = qp
            .rows
            .iter()
            .map(|row| row[i].abs().to_f64().unwrap())
            .fold(0.0f64, f64::max);
        coeff_mass += worst;
    }
    let j_max = ((coeff_mass / (epsilon * volp_f)).ceil() as u64).max(1);

    let one_plus_eps = BigRational::from_float(1.0 + epsilon)
        .ok_or_else(|| Error::Argument("epsilon must be finite".into()))?;
    let mut delta_eps = 0u64;
    for j in (1..=j_max).rev() {
        let count = qp.eval_rational(j);
        let jn = BigRational::from_integer(BigInt::from(j)).pow(n as i32);
        if count > &one_plus_eps * &volp * jn {
            delta_eps = j;
            break;
        }
    }

    let nf = n as f64;
    let j_eps = (2.0 / ((1.0 / nf).exp() - 1.0)).max(delta_eps as f64);
    let jp_eps = (1.0 / ((1.0 / nf).exp() - 1.0)).max(delta_eps as f64);
    let m_eps = qp.eval_count(j_eps.ceil() as u64)?;
    let mp_eps = qp.eval_count(jp_eps.ceil() as u64)?;
    Ok(MinCardinality {
        delta_eps,
        j_eps,
        m_eps,
        jp_eps,
        mp_eps,
        rate_factor: (1.0 + epsilon).powf(-1.0 / nf),
    })
}

impl EhrhartQP {
    pub(crate) fn leading_rational(&self) -> BigRational {
        self.rows[0][self.n as usize].clone()
    }

    /// Exact rational evaluation of the quasi-polynomial at integer `j`.
    pub fn eval_rational(&self, j: u64) -> BigRational {
        let row = &self.rows[(j % self.q as u64) as usize];
        let jq = BigRational::from_integer(BigInt::from(j));
        let mut v = BigRational::zero();
        for c in row.iter().rev() {
            v = v * &jq + c;
        }
        v
    }

    /// Evaluation at an integer point where the value must be a nonnegative
    /// integer (a lattice count).
    pub fn eval_count(&self, j: u64) -> Result<u128> {
        let v = self.eval_rational(j);
        if !v.is_integer() || v.is_negative() {
            return Err(Error::Consistency(format!(
                "quasi-polynomial value at j = {j} is not a lattice count: {v}"
            )));
        }
        v.to_integer().to_u128().ok_or_else(|| {
            Error::Consistency(format!("lattice count at j = {j} overflows u128"))
        })
    }
}
