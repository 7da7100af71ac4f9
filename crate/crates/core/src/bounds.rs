//! Exponent functions `b` of the coefficient-bound families `e^{-b(nu)}`.
//!
//! Four parametric families are supported:
//!
//! * `WeightedLinear` — `b(nu) = sum_i lambda_i nu_i`
//! * `SupAffine` — `b(nu) = max_t (sum_i w_{t,i} nu_i - offset_t)` over a
//!   finite list of affine terms with `offset_t = log(1/delta_t) >= 0`
//! * `LegendreSqrt` — `b(nu) = sum_i (2 lambda_i nu_i - log(2 nu_i + 1))`
//! * `FactorialAlpha` — `b(nu) = 2 sum_i lambda_i nu_i - 2 log(|nu|!/nu!)`
//!   with `lambda_i = -log alpha_i`, evaluated in log-gamma form
//!
//! Every `b` is evaluable on real vectors in `[0,inf)^N` so that superlevel
//! sets and the limiting set are usable by the enumeration and polytope
//! machinery.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// A lattice multi-index `nu` in `N^N` (nonnegative entries).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `|nu| = sum_i nu_i`.
    pub fn total_degree(&self) -> u64 {
        self.0.iter().map(|&x| x as u64).sum()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.0.iter().map(|&x| x as f64).collect()
    }

    /// `nu <= mu` in the componentwise partial order.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    WeightedLinear,
    SupAffine,
    LegendreSqrt,
    FactorialAlpha,
}

/// One affine term of a `SupAffine` model: `sum_i weights_i nu_i - offset`
/// with `offset = log(1/delta) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTerm {
    pub offset: f64,
    pub weights: Vec<f64>,
    /// Exact rational weights, required for Ehrhart mode.
    pub rational_weights: Option<Vec<BigRational>>,
}

impl AffineTerm {
    pub fn new(offset: f64, weights: Vec<f64>) -> Self {
        AffineTerm {
            offset,
            weights,
            rational_weights: None,
        }
    }

    pub fn with_rational_weights(mut self, rw: Vec<BigRational>) -> Self {
        self.rational_weights = Some(rw);
        self
    }
}

/// A coefficient-bound model `prefactor * e^{-b(nu)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundModel {
    dimension: usize,
    family: Family,
    lambda: Vec<f64>,
    affine_terms: Vec<AffineTerm>,
    alpha: Vec<f64>,
    prefactor: f64,
    rational_weights: Option<Vec<BigRational>>,
}

/// Linear lower bound `base + sum_i coeff_i nu_i <= b(nu)` with all
/// `coeff_i > 0`, valid on the whole lattice. Drives branch pruning and the
/// geometric remainder control of controlled enumeration.
#[derive(Debug, Clone)]
pub(crate) struct LinearEnvelope {
    pub base: f64,
    pub coeff: Vec<f64>,
}

impl LinearEnvelope {
    pub fn eval_index(&self, nu: &[u32]) -> f64 {
        self.base + self.coeff.iter().zip(nu).map(|(c, &x)| c * x as f64).sum::<f64>()
    }

    /// `sum_{nu in N^N} e^{-l(nu)} = e^{-base} prod_i 1/(1 - e^{-coeff_i})`.
    pub fn full_sum(&self) -> f64 {
        let prod: f64 = self.coeff.iter().map(|&c| (1.0 - (-c).exp()).recip()).product();
        (-self.base).exp() * prod
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log Gamma(|nu|+1) - sum_i log Gamma(nu_i+1)` for real `nu >= 0`.
fn log_multinomial(nu: &[f64]) -> f64 {
    let total: f64 = nu.iter().sum();
    ln_gamma(total + 1.0) - nu.iter().map(|&x| ln_gamma(x + 1.0)).sum::<f64>()
}

/// Stirling limit `G(nu) = log(|nu|^{|nu|} / prod nu_i^{nu_i})`, continuously
/// extended to the boundary by `0 log 0 = 0`.
pub(crate) fn stirling_entropy(nu: &[f64]) -> f64 {
    let total: f64 = nu.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    xlogx(total) - nu.iter().map(|&x| xlogx(x)).sum::<f64>()
}

impl BoundModel {
    pub fn weighted_linear(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::Argument("lambda must be nonempty".into()));
        }
        if lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::Argument("WeightedLinear requires all lambda_i > 0".into()));
        }
        Ok(BoundModel {
            dimension: lambda.len(),
            family: Family::WeightedLinear,
            lambda,
            affine_terms: Vec::new(),
            alpha: Vec::new(),
            prefactor: 1.0,
            rational_weights: None,
        })
    }

    /// WeightedLinear with exact rational weights; `lambda` is derived as the
    /// nearest double of each ratio.
    pub fn weighted_linear_rational(weights: Vec<BigRational>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_positive()) {
            return Err(Error::Argument("rational weights must be positive".into()));
        }
        let lambda: Vec<f64> = weights.iter().map(ratio_to_f64).collect();
        let mut m = Self::weighted_linear(lambda)?;
        m.rational_weights = Some(weights);
        Ok(m)
    }

    pub fn sup_affine(dimension: usize, terms: Vec<AffineTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Argument("SupAffine requires a nonempty term list".into()));
        }
        for t in &terms {
            if t.weights.len() != dimension {
                return Err(Error::Argument("affine term weight length must equal dimension".into()));
            }
            if t.weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
                return Err(Error::Argument("affine term weights must be strictly positive".into()));
            }
            if !(t.offset >= 0.0) || !t.offset.is_finite() {
                return Err(Error::Argument("affine term offsets must be >= 0".into()));
            }
            if let Some(rw) = &t.rational_weights {
                if rw.len() != dimension {
                    return Err(Error::Argument("rational weights length must equal dimension".into()));
                }
                check_rational_matches(rw, &t.weights)?;
            }
        }
        Ok(BoundModel {
            dimension,
            family: Family::SupAffine,
            lambda: Vec::new(),
            affine_terms: terms,
            alpha: Vec::new(),
            prefactor: 1.0,
            rational_weights: None,
        })
    }

    pub fn legendre_sqrt(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::Argument("lambda must be nonempty".into()));
        }
        if lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::Argument("LegendreSqrt requires all lambda_i > 0".into()));
        }
        Ok(BoundModel {
            dimension: lambda.len(),
            family: Family::LegendreSqrt,
            lambda,
            affine_terms: Vec::new(),
            alpha: Vec::new(),
            prefactor: 1.0,
            rational_weights: None,
        })
    }

    pub fn factorial_alpha(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(Error::Argument("alpha must be nonempty".into()));
        }
        if alpha.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::Argument("FactorialAlpha requires alpha_i in (0,1)".into()));
        }
        let s: f64 = alpha.iter().sum();
        if !(s < 1.0) {
            return Err(Error::Argument(format!(
                "FactorialAlpha requires sum(alpha) < 1, got {s}"
            )));
        }
        let lambda = alpha.iter().map(|&a| -a.ln()).collect();
        Ok(BoundModel {
            dimension: alpha.len(),
            family: Family::FactorialAlpha,
            lambda,
            affine_terms: Vec::new(),
            alpha,
            prefactor: 1.0,
            rational_weights: None,
        })
    }

    pub fn with_prefactor(mut self, prefactor: f64) -> Result<Self> {
        if !(prefactor > 0.0) || !prefactor.is_finite() {
            return Err(Error::Argument("prefactor must be a positive real".into()));
        }
        self.prefactor = prefactor;
        Ok(self)
    }

    pub fn with_rational_weights(mut self, weights: Vec<BigRational>) -> Result<Self> {
        if weights.len() != self.dimension {
            return Err(Error::Argument("rational weights length must equal dimension".into()));
        }
        check_rational_matches(&weights, &self.lambda)?;
        self.rational_weights = Some(weights);
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn affine_terms(&self) -> &[AffineTerm] {
        &self.affine_terms
    }

    pub fn rational_weights(&self) -> Option<&[BigRational]> {
        self.rational_weights.as_deref()
    }

    /// True when `b` is nondecreasing in every coordinate for all of the
    /// lattice (WeightedLinear and SupAffine). LegendreSqrt and
    /// FactorialAlpha are treated as non-monotone.
    pub fn is_coordinate_monotone(&self) -> bool {
        matches!(self.family, Family::WeightedLinear | Family::SupAffine)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dimension {
            return Err(Error::Argument(format!(
                "index has length {len}, model dimension is {}",
                self.dimension
            )));
        }
        Ok(())
    }

    /// Evaluates `b(nu)` on a real vector in `[0,inf)^N`.
    pub fn eval_b(&self, nu: &[f64]) -> Result<f64> {
        self.check_dim(nu.len())?;
        if nu.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::Argument("entries must be >= 0".into()));
        }
        Ok(self.eval_b_unchecked(nu))
    }

    pub(crate) fn eval_b_unchecked(&self, nu: &[f64]) -> f64 {
        match self.family {
            Family::WeightedLinear => dot(&self.lambda, nu),
            Family::SupAffine => self
                .affine_terms
                .iter()
                .map(|t| dot(&t.weights, nu) - t.offset)
                .fold(f64::NEG_INFINITY, f64::max),
            Family::LegendreSqrt => self
                .lambda
                .iter()
                .zip(nu)
                .map(|(&l, &x)| 2.0 * l * x - (2.0 * x + 1.0).ln())
                .sum(),
            Family::FactorialAlpha => {
                2.0 * dot(&self.lambda, nu) - 2.0 * log_multinomial(nu)
            }
        }
    }

    /// Evaluates `b` at a lattice index.
    pub fn eval_b_index(&self, nu: &MultiIndex) -> Result<f64> {
        self.check_dim(nu.len())?;
        Ok(self.eval_b_index_unchecked(nu.entries()))
    }

    pub(crate) fn eval_b_index_unchecked(&self, nu: &[u32]) -> f64 {
        // reuses the real-vector path; entries are exact in f64
        let v: Vec<f64> = nu.iter().map(|&x| x as f64).collect();
        self.eval_b_unchecked(&v)
    }

    /// Membership `nu in P` in the family's limiting set.
    ///
    /// FactorialAlpha's limiting set lives on `(0,inf)^N`; zero entries are
    /// rejected there and accepted elsewhere.
    pub fn limiting_membership(&self, nu: &[f64]) -> Result<bool> {
        self.check_dim(nu.len())?;
        if nu.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::Argument("entries must be >= 0".into()));
        }
        if self.family == Family::FactorialAlpha && nu.iter().any(|&x| x == 0.0) {
            return Err(Error::Argument(
                "FactorialAlpha limiting set is defined on (0,inf)^N; entries must be > 0".into(),
            ));
        }
        Ok(self.limiting_membership_closure(nu))
    }

    /// Membership with the FactorialAlpha Stirling term continuously extended
    /// to the boundary; used by lattice-scaling volume counts.
    pub(crate) fn limiting_membership_closure(&self, nu: &[f64]) -> bool {
        match self.family {
            Family::WeightedLinear => dot(&self.lambda, nu) <= 1.0,
            Family::SupAffine => self
                .affine_terms
                .iter()
                .all(|t| dot(&t.weights, nu) <= 1.0),
            Family::LegendreSqrt => 2.0 * dot(&self.lambda, nu) <= 1.0,
            Family::FactorialAlpha => dot(&self.lambda, nu) - stirling_entropy(nu) < 0.5,
        }
    }

    /// Smallest `p` in `{0.5, 0.75, 0.9}` with `sum alpha_i^p < 1`, plus the
    /// corresponding sum. FactorialAlpha only.
    pub(crate) fn factorial_margin(&self) -> Result<(f64, f64)> {
        debug_assert_eq!(self.family, Family::FactorialAlpha);
        for &p in &[0.5, 0.75, 0.9] {
            let s: f64 = self.alpha.iter().map(|&a| a.powf(p)).sum();
            if s < 1.0 {
                return Ok((p, s));
            }
        }
        Err(Error::Domain(
            "no summability margin p in {0.5, 0.75, 0.9} with sum(alpha^p) < 1".into(),
        ))
    }

    /// Linear lower envelopes of `b`, valid on all lattice points.
    pub(crate) fn lower_envelopes(&self) -> Result<Vec<LinearEnvelope>> {
        match self.family {
            Family::WeightedLinear => Ok(vec![LinearEnvelope {
                base: 0.0,
                coeff: self.lambda.clone(),
            }]),
            // b = max over terms, so each term is itself a lower bound
            Family::SupAffine => Ok(self
                .affine_terms
                .iter()
                .map(|t| LinearEnvelope {
                    base: -t.offset,
                    coeff: t.weights.clone(),
                })
                .collect()),
            Family::LegendreSqrt => {
                // c(x) = 2 lambda x - log(2x+1) is convex; take the tangent of
                // slope lambda in each coordinate
                let mut base = 0.0;
                for &l in &self.lambda {
                    if l < 2.0 {
                        let xs = (2.0 / l - 1.0) / 2.0;
                        let c = 2.0 * l * xs - (2.0 * xs + 1.0).ln();
                        base += c - l * xs;
                    }
                }
                Ok(vec![LinearEnvelope {
                    base,
                    coeff: self.lambda.clone(),
                }])
            }
            Family::FactorialAlpha => {
                // multinomial bound: |nu|!/nu! <= s_p^{|nu|} alpha^{-p nu}
                let (p, s_p) = self.factorial_margin()?;
                let coeff = self
                    .lambda
                    .iter()
                    .map(|&l| (2.0 - 2.0 * p) * l - 2.0 * s_p.ln())
                    .collect();
                Ok(vec![LinearEnvelope { base: 0.0, coeff }])
            }
        }
    }

    /// Empirical verification of the structural assumptions on `b`:
    /// `b(0) = 0`, linear growth constants, and monotonicity of
    /// `H_nu(tau) = b(tau nu)/tau`.
    pub fn check_assumptions(&self, box_radius: u32, tau_grid: &[f64]) -> Result<AssumptionReport> {
        if box_radius < 2 {
            return Err(Error::Argument("box_radius must be >= 2".into()));
        }
        if tau_grid.len() < 2
            || tau_grid.iter().any(|&t| !(t > 0.0))
            || tau_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Argument(
                "tau_grid must be strictly increasing and positive with >= 2 points".into(),
            ));
        }

        let b_origin = self.eval_b_index_unchecked(&vec![0; self.dimension]);

        // growth constants over the shell |nu| = box_radius
        let mut c_est = f64::INFINITY;
        let mut c_cap_est = f64::NEG_INFINITY;
        let mut shell = vec![0u32; self.dimension];
        let mut visited = 0u64;
        self.shell_scan(&mut shell, 0, box_radius, &mut c_est, &mut c_cap_est, &mut visited)?;

        // deterministic direction sample: axes, the diagonal, a graded ray
        let n = self.dimension;
        let mut directions: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        directions.push(vec![1.0 / n as f64; n]);
        let s: f64 = (1..=n).map(|k| k as f64).sum();
        directions.push((1..=n).map(|k| k as f64 / s).collect());

        let mut dir_reports = Vec::new();
        for d in directions {
            let h: Vec<f64> = tau_grid
                .iter()
                .map(|&t| {
                    let scaled: Vec<f64> = d.iter().map(|&x| t * x).collect();
                    self.eval_b_unchecked(&scaled) / t
                })
                .collect();
            let class = classify_monotone(&h);
            dir_reports.push(DirectionReport { direction: d, class });
        }
        let classification = combine_classes(dir_reports.iter().map(|r| r.class));

        Ok(AssumptionReport {
            b_origin,
            origin_deviation: b_origin.abs(),
            c_est,
            c_cap_est,
            classification,
            directions: dir_reports,
        })
    }

    fn shell_scan(
        &self,
        nu: &mut Vec<u32>,
        pos: usize,
        remaining: u32,
        c_est: &mut f64,
        c_cap_est: &mut f64,
        visited: &mut u64,
    ) -> Result<()> {
        const SHELL_CEILING: u64 = 2_000_000;
        if pos + 1 == nu.len() {
            nu[pos] = remaining;
            *visited += 1;
            if *visited > SHELL_CEILING {
                return Err(Error::Resource("assumption shell scan".into(), SHELL_CEILING));
            }
            let b = self.eval_b_index_unchecked(nu);
            let deg: u64 = nu.iter().map(|&x| x as u64).sum();
            let r = b / deg as f64;
            *c_est = c_est.min(r);
            *c_cap_est = c_cap_est.max(r);
            nu[pos] = 0;
            return Ok(());
        }
        for k in 0..=remaining {
            nu[pos] = k;
            self.shell_scan(nu, pos + 1, remaining - k, c_est, c_cap_est, visited)?;
        }
        nu[pos] = 0;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelJson::from(self)).expect("model serialization")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: ModelJson = serde_json::from_str(s)?;
        raw.try_into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HClass {
    Increasing,
    Decreasing,
    Constant,
    Mixed,
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionReport {
    pub direction: Vec<f64>,
    pub class: HClass,
}

/// Advisory report from [`BoundModel::check_assumptions`]; the constants are
/// finite-box estimates, never a hard gate.
#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    pub b_origin: f64,
    pub origin_deviation: f64,
    /// `min b(nu)/|nu|` over the shell `|nu| = box_radius`.
    pub c_est: f64,
    /// `max b(nu)/|nu|` over the same shell.
    pub c_cap_est: f64,
    pub classification: HClass,
    pub directions: Vec<DirectionReport>,
}

fn classify_monotone(h: &[f64]) -> HClass {
    let scale = h.iter().fold(1.0f64, |m, &x| m.max(x.abs()));
    let tol = 1e-10 * scale;
    let mut up = false;
    let mut down = false;
    for w in h.windows(2) {
        let d = w[1] - w[0];
        if d > tol {
            up = true;
        } else if d < -tol {
            down = true;
        }
    }
    match (up, down) {
        (false, false) => HClass::Constant,
        (true, false) => HClass::Increasing,
        (false, true) => HClass::Decreasing,
        (true, true) => HClass::Mixed,
    }
}

fn combine_classes<I: Iterator<Item = HClass>>(classes: I) -> HClass {
    let mut up = false;
    let mut down = false;
    for c in classes {
        match c {
            HClass::Increasing => up = true,
            HClass::Decreasing => down = true,
            HClass::Constant => {}
            HClass::Mixed => return HClass::Mixed,
        }
    }
    match (up, down) {
        (false, false) => HClass::Constant,
        (true, false) => HClass::Increasing,
        (false, true) => HClass::Decreasing,
        (true, true) => HClass::Mixed,
    }
}

pub(crate) fn ratio_to_f64(r: &BigRational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

fn check_rational_matches(rw: &[BigRational], floats: &[f64]) -> Result<()> {
    for (r, &f) in rw.iter().zip(floats) {
        let v = ratio_to_f64(r);
        if !(v.is_finite()) || (v - f).abs() > 1e-12 * v.abs().max(1.0) {
            return Err(Error::Argument(format!(
                "rational weight {r} does not match float weight {f}"
            )));
        }
    }
    Ok(())
}

pub(crate) fn parse_ratio(pair: &[String; 2]) -> Result<BigRational> {
    let p: BigInt = pair[0]
        .parse()
        .map_err(|_| Error::Argument(format!("bad rational numerator {:?}", pair[0])))?;
    let q: BigInt = pair[1]
        .parse()
        .map_err(|_| Error::Argument(format!("bad rational denominator {:?}", pair[1])))?;
    if q.is_zero() {
        return Err(Error::Argument("rational denominator is zero".into()));
    }
    Ok(BigRational::new(p, q))
}

pub(crate) fn ratio_to_pair(r: &BigRational) -> [String; 2] {
    [r.numer().to_string(), r.denom().to_string()]
}

// ---------------------------------------------------------------------------
// JSON wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TermJson {
    offset: f64,
    weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rational_weights: Option<Vec<[String; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    dimension: usize,
    family: Family,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    lambda: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    affine_terms: Vec<TermJson>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    alpha: Vec<f64>,
    #[serde(default = "default_prefactor")]
    prefactor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rational_weights: Option<Vec<[String; 2]>>,
}

fn default_prefactor() -> f64 {
    1.0
}

impl From<&BoundModel> for ModelJson {
    fn from(m: &BoundModel) -> Self {
        ModelJson {
            dimension: m.dimension,
            family: m.family,
            lambda: if m.family == Family::SupAffine || m.family == Family::FactorialAlpha {
                Vec::new()
            } else {
                m.lambda.clone()
            },
            affine_terms: m
                .affine_terms
                .iter()
                .map(|t| TermJson {
                    offset: t.offset,
                    weights: t.weights.clone(),
                    rational_weights: t
                        .rational_weights
                        .as_ref()
                        .map(|rw| rw.iter().map(ratio_to_pair).collect()),
                })
                .collect(),
            alpha: m.alpha.clone(),
            prefactor: m.prefactor,
            rational_weights: m
                .rational_weights
                .as_ref()
                .map(|rw| rw.iter().map(ratio_to_pair).collect()),
        }
    }
}

impl TryFrom<ModelJson> for BoundModel {
    type Error = Error;

    fn try_from(raw: ModelJson) -> Result<Self> {
        let parse_rw = |rw: &Option<Vec<[String; 2]>>| -> Result<Option<Vec<BigRational>>> {
            rw.as_ref()
                .map(|v| v.iter().map(parse_ratio).collect::<Result<Vec<_>>>())
                .transpose()
        };
        let rational = parse_rw(&raw.rational_weights)?;
        let model = match raw.family {
            Family::WeightedLinear => {
                if let Some(rw) = rational.clone() {
                    if raw.lambda.is_empty() {
                        BoundModel::weighted_linear_rational(rw)?
                    } else {
                        BoundModel::weighted_linear(raw.lambda.clone())?.with_rational_weights(rw)?
                    }
                } else {
                    BoundModel::weighted_linear(raw.lambda.clone())?
                }
            }
            Family::SupAffine => {
                let mut terms = Vec::new();
                for t in &raw.affine_terms {
                    let rw = parse_rw(&t.rational_weights)?;
                    let weights = if t.weights.is_empty() {
                        rw.as_ref()
                            .map(|v| v.iter().map(ratio_to_f64).collect())
                            .ok_or_else(|| {
                                Error::Argument("affine term needs weights or rational_weights".into())
                            })?
                    } else {
                        t.weights.clone()
                    };
                    let mut term = AffineTerm::new(t.offset, weights);
                    term.rational_weights = rw;
                    terms.push(term);
                }
                BoundModel::sup_affine(raw.dimension, terms)?
            }
            Family::LegendreSqrt => {
                let m = BoundModel::legendre_sqrt(raw.lambda.clone())?;
                if let Some(rw) = rational {
                    m.with_rational_weights(rw)?
                } else {
                    m
                }
            }
            Family::FactorialAlpha => BoundModel::factorial_alpha(raw.alpha.clone())?,
        };
        if model.dimension() != raw.dimension {
            return Err(Error::Argument(format!(
                "declared dimension {} does not match parameter length {}",
                raw.dimension,
                model.dimension()
            )));
        }
        model.with_prefactor(raw.prefactor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wl1124() -> BoundModel {
        BoundModel::weighted_linear(vec![1.0, 1.0, 2.0, 4.0]).unwrap()
    }

    #[test]
    fn eval_b_weighted_linear() {
        let m = wl1124();
        assert_eq!(m.eval_b_index(&MultiIndex::new(vec![0, 0, 0, 0])).unwrap(), 0.0);
        assert_eq!(m.eval_b_index(&MultiIndex::new(vec![1, 1, 1, 1])).unwrap(), 8.0);
    }

    #[test]
    fn eval_b_factorial_alpha_hand_value() {
        let m = BoundModel::factorial_alpha(vec![0.25, 0.25]).unwrap();
        // |nu|!/nu! alpha^nu = 2/16; b = -2 log of that = 6 log 2
        let b = m.eval_b_index(&MultiIndex::new(vec![1, 1])).unwrap();
        assert!((b - 6.0 * 2.0f64.ln()).abs() < 1e-12, "b = {b}");
        assert!((b - 4.1589).abs() < 1e-4);
    }

    #[test]
    fn eval_b_legendre_hand_value() {
        let m = BoundModel::legendre_sqrt(vec![1.0]).unwrap();
        let b = m.eval_b(&[3.0]).unwrap();
        assert!((b - (6.0 - 7.0f64.ln())).abs() < 1e-12);
        assert!((b - 4.0541).abs() < 1e-4);
    }

    #[test]
    fn eval_b_dimension_mismatch() {
        let m = wl1124();
        assert!(matches!(m.eval_b(&[1.0, 2.0]), Err(Error::Argument(_))));
        assert!(matches!(m.eval_b(&[1.0, 1.0, 1.0, -0.5]), Err(Error::Argument(_))));
    }

    #[test]
    fn membership_weighted_linear() {
        let m = wl1124();
        assert!(m.limiting_membership(&[0.5, 0.5, 0.0, 0.0]).unwrap());
        assert!(!m.limiting_membership(&[0.0, 0.0, 0.0, 0.26]).unwrap());
    }

    #[test]
    fn membership_factorial_diagonal() {
        let a = (-1.0f64).exp();
        let m = BoundModel::factorial_alpha(vec![a, a]).unwrap();
        // at nu = (t,t): sum lambda nu - G = 2t - 2t log 2 < 1/2 at t = 0.4
        assert!(m.limiting_membership(&[0.4, 0.4]).unwrap());
        assert!(matches!(
            m.limiting_membership(&[0.0, 0.4]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn sup_affine_b_at_origin_is_minus_min_offset() {
        let terms = vec![
            AffineTerm::new(0.5, vec![1.0, 1.0]),
            AffineTerm::new(0.1, vec![0.5, 2.0]),
        ];
        let m = BoundModel::sup_affine(2, terms).unwrap();
        let b0 = m.eval_b(&[0.0, 0.0]).unwrap();
        assert!((b0 - (-0.1)).abs() < 1e-15);
    }

    #[test]
    fn assumption_classification() {
        let grid: Vec<f64> = (1..=20).map(|k| 0.5 * k as f64).collect();

        let wl = BoundModel::weighted_linear(vec![1.0, 2.0]).unwrap();
        let r = wl.check_assumptions(6, &grid).unwrap();
        assert_eq!(r.classification, HClass::Constant);
        assert!((r.c_est - 1.0).abs() < 1e-12);
        assert!((r.c_cap_est - 2.0).abs() < 1e-12);

        let sup = BoundModel::sup_affine(
            2,
            vec![
                AffineTerm::new(0.7, vec![1.0, 1.0]),
                AffineTerm::new(0.3, vec![0.4, 1.5]),
            ],
        )
        .unwrap();
        let r = sup.check_assumptions(4, &grid).unwrap();
        assert_eq!(r.classification, HClass::Increasing);

        let fa = BoundModel::factorial_alpha(vec![0.25, 0.25]).unwrap();
        let r = fa.check_assumptions(4, &grid).unwrap();
        assert_eq!(r.classification, HClass::Decreasing);
    }

    #[test]
    fn factorial_envelope_is_a_lower_bound() {
        let m = BoundModel::factorial_alpha(vec![0.25, 0.25, 0.2]).unwrap();
        let env = &m.lower_envelopes().unwrap()[0];
        for a in 0..8u32 {
            for b in 0..8u32 {
                for c in 0..8u32 {
                    let nu = [a, b, c];
                    assert!(env.eval_index(&nu) <= m.eval_b_index_unchecked(&nu) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn legendre_envelope_is_a_lower_bound() {
        let m = BoundModel::legendre_sqrt(vec![0.3, 1.0]).unwrap();
        let env = &m.lower_envelopes().unwrap()[0];
        for a in 0..40u32 {
            for b in 0..40u32 {
                let nu = [a, b];
                assert!(env.eval_index(&nu) <= m.eval_b_index_unchecked(&nu) + 1e-9);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let m = wl1124().with_prefactor(2.5).unwrap();
        let back = BoundModel::from_json(&m.to_json()).unwrap();
        assert_eq!(m, back);

        let fa = BoundModel::factorial_alpha(vec![0.3, 0.2]).unwrap();
        let back = BoundModel::from_json(&fa.to_json()).unwrap();
        assert_eq!(fa, back);
    }
}
