//! Limiting-set geometry: volumes, exact lattice counts, and Ehrhart
//! quasi-polynomials.

mod counting;
mod ehrhart;
mod vertices;

pub use counting::count_dilate;
pub use ehrhart::ehrhart_fit;
pub(crate) use vertices::enumerate_vertices;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::bounds::{BoundModel, Family};
use crate::error::{Error, Result};

/// How a limiting-set volume was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum VolumeMethod {
    AnalyticSimplex,
    LatticeScaling,
}

/// The limiting set's measured volume.
#[derive(Debug, Clone, Serialize)]
pub struct LimitingSet {
    pub volume: f64,
    pub method: VolumeMethod,
    /// Largest dilation used by lattice scaling (0 for analytic).
    pub tau_used: f64,
    /// Last extrapolant difference (0 for analytic).
    pub error_estimate: f64,
}

/// A period-`q` Ehrhart quasi-polynomial: row `r = j mod q` holds the exact
/// rational coefficients `c_0..c_N` with `E*(j) = sum_i c_i j^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EhrhartQP {
    pub n: u32,
    pub q: u32,
    pub rows: Vec<Vec<BigRational>>,
    pub volume: f64,
}

impl EhrhartQP {
    pub fn to_json(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| row.iter().map(|c| format!("{c}")).collect())
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "N": self.n,
            "q": self.q,
            "rows": rows,
            "volume": self.volume,
        }))
        .expect("Ehrhart serialization")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Raw {
            #[serde(rename = "N")]
            n: u32,
            q: u32,
            rows: Vec<Vec<String>>,
            volume: f64,
        }
        let raw: Raw = serde_json::from_str(s)?;
        if raw.rows.len() != raw.q as usize
            || raw.rows.iter().any(|r| r.len() != raw.n as usize + 1)
        {
            return Err(Error::Argument(
                "rows must be q lists of N+1 coefficients".into(),
            ));
        }
        let rows = raw
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| {
                        c.parse::<BigRational>()
                            .map_err(|_| Error::Argument(format!("bad rational {c:?}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EhrhartQP {
            n: raw.n,
            q: raw.q,
            rows,
            volume: raw.volume,
        })
    }
}

/// Analytic volume where a closed form exists: `1/(N! prod lambda_i)` for
/// WeightedLinear and `1/(2^N N! prod lambda_i)` for LegendreSqrt.
pub fn analytic_volume(model: &BoundModel) -> Result<f64> {
    let n = model.dimension();
    let factorial: f64 = (1..=n).map(|k| k as f64).product();
    match model.family() {
        Family::WeightedLinear => {
            Ok((factorial * model.lambda().iter().product::<f64>()).recip())
        }
        Family::LegendreSqrt => Ok((2.0f64.powi(n as i32)
            * factorial
            * model.lambda().iter().product::<f64>())
        .recip()),
        _ => Err(Error::Domain(
            "no analytic volume for this family; use lattice scaling".into(),
        )),
    }
}

/// Per-coordinate upper bounds of the limiting set scaled by `tau`, so the
/// lattice count can run over a finite box.
fn scaled_box(model: &BoundModel, tau: f64) -> Vec<u32> {
    let n = model.dimension();
    match model.family() {
        Family::WeightedLinear => model.lambda().iter().map(|&l| (tau / l) as u32 + 1).collect(),
        Family::LegendreSqrt => model
            .lambda()
            .iter()
            .map(|&l| (tau / (2.0 * l)) as u32 + 1)
            .collect(),
        Family::SupAffine => (0..n)
            .map(|i| {
                let w = model
                    .affine_terms()
                    .iter()
                    .map(|t| t.weights[i])
                    .fold(0.0f64, f64::max);
                (tau / w) as u32 + 1
            })
            .collect(),
        Family::FactorialAlpha => {
            // Gibbs bound: min over distributions of (lambda.w - H(w)) equals
            // -log(sum alpha_i) > 0, so |nu| <= tau/2 / (-log sum alpha)
            let s: f64 = model.alpha().iter().sum();
            let cap = (0.5 * tau / (-s.ln())) as u32 + 1;
            vec![cap; n]
        }
    }
}

/// Membership of `nu/tau` in the (boundary-extended) limiting set.
fn scaled_member(model: &BoundModel, nu: &[u32], tau: f64) -> bool {
    let v: Vec<f64> = nu.iter().map(|&x| x as f64 / tau).collect();
    model.limiting_membership_closure(&v)
}

fn count_scaled(model: &BoundModel, tau: f64, ceiling: u64) -> Result<u64> {
    let cap = scaled_box(model, tau);
    let monotone = !matches!(model.family(), Family::FactorialAlpha);
    let mut nu = vec![0u32; model.dimension()];
    let mut count = 0u64;
    let mut visited = 0u64;
    fn rec(
        model: &BoundModel,
        tau: f64,
        cap: &[u32],
        monotone: bool,
        nu: &mut Vec<u32>,
        pos: usize,
        count: &mut u64,
        visited: &mut u64,
        ceiling: u64,
    ) -> Result<()> {
        if pos == nu.len() {
            *visited += 1;
            if *visited > ceiling {
                return Err(Error::Resource("lattice scaling point budget".into(), ceiling));
            }
            if scaled_member(model, nu, tau) {
                *count += 1;
            }
            return Ok(());
        }
        for v in 0..=cap[pos] {
            nu[pos] = v;
            if monotone {
                // the set is downward closed: once the all-zero completion of
                // this prefix leaves it, larger v cannot re-enter
                let mut probe = nu.clone();
                for p in probe.iter_mut().skip(pos + 1) {
                    *p = 0;
                }
                if !scaled_member(model, &probe, tau) {
                    break;
                }
            }
            rec(model, tau, cap, monotone, nu, pos + 1, count, visited, ceiling)?;
        }
        nu[pos] = 0;
        Ok(())
    }
    rec(model, tau, &cap, monotone, &mut nu, 0, &mut count, &mut visited, ceiling)?;
    Ok(count)
}

const LATTICE_POINT_BUDGET: u64 = 200_000_000;

/// Limiting-set volume.
///
/// Lattice scaling counts `#(tau P cap Z^N)` on a doubling `tau` ladder and
/// Richardson-extrapolates `count/tau^N` (first-order boundary correction),
/// stopping when successive extrapolants agree within `tol` relatively.
pub fn volume(model: &BoundModel, method: VolumeMethod, tol: f64) -> Result<LimitingSet> {
    match method {
        VolumeMethod::AnalyticSimplex => Ok(LimitingSet {
            volume: analytic_volume(model)?,
            method,
            tau_used: 0.0,
            error_estimate: 0.0,
        }),
        VolumeMethod::LatticeScaling => {
            if !(tol > 0.0) {
                return Err(Error::Argument("tol must be > 0".into()));
            }
            let n = model.dimension() as i32;
            // exact closed-form counting where available; point enumeration
            // would visit tau^N points and stall in high dimension
            let exact_countable = count_dilate(model, 1).is_ok();
            let v_at = |tau: f64| -> Result<f64> {
                let count = if exact_countable {
                    count_dilate(model, tau as u64)?
                        .to_f64()
                        .ok_or_else(|| Error::Consistency("lattice count overflows f64".into()))?
                } else {
                    count_scaled(model, tau, LATTICE_POINT_BUDGET)? as f64
                };
                Ok(count / tau.powi(n))
            };
            let mut tau = 8.0f64;
            let mut v1 = v_at(tau)?;
            let mut v2 = v_at(2.0 * tau)?;
            let mut prev = 2.0 * v2 - v1;
            loop {
                tau *= 2.0;
                v1 = v2;
                v2 = v_at(2.0 * tau)?;
                let cur = 2.0 * v2 - v1;
                let diff = (cur - prev).abs();
                if diff < tol * cur.abs().max(f64::MIN_POSITIVE) {
                    return Ok(LimitingSet {
                        volume: cur,
                        method,
                        tau_used: 2.0 * tau,
                        error_estimate: diff,
                    });
                }
                if tau >= 2048.0 {
                    return Err(Error::Resource(
                        format!("lattice scaling ladder (best estimate {cur:.6e}, last delta {diff:.2e})"),
                        2048,
                    ));
                }
                prev = cur;
            }
        }
    }
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
