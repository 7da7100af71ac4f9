//! Ehrhart quasi-polynomial fitting by exact counting.
//!
//! For a homogeneous rational model the dilated superlevel sets satisfy
//! `P_j = j P`, so their lattice counts follow a degree-`N` quasi-polynomial
//! with integer period `q`. The fit solves an exact rational Vandermonde
//! system per residue and is validated by integer equality on held-out
//! counts; a failed validation escalates the period.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::bounds::{BoundModel, Family};
use crate::error::{Error, Result};
use crate::polytope::vertices::solve_rational;
use crate::polytope::{analytic_volume, count_dilate, enumerate_vertices, EhrhartQP};

/// Starting period: lcm of the vertex coordinate denominators of the
/// limiting set. The true period divides it for simplices and can otherwise
/// only be overshot, never silently undershot (validation catches that).
fn period_heuristic(model: &BoundModel) -> Result<u32> {
    let mut q = BigInt::one();
    match model.family() {
        Family::WeightedLinear => {
            let weights = model
                .rational_weights()
                .ok_or_else(|| Error::Domain("Ehrhart fit needs rational weights".into()))?;
            for w in weights {
                // axis vertex 1/lambda_i has denominator numer(lambda_i)
                q = q.lcm(w.numer());
            }
        }
        Family::SupAffine => {
            for v in enumerate_vertices(model)? {
                for c in v {
                    q = q.lcm(c.denom());
                }
            }
        }
        _ => unreachable!("validated by the caller"),
    }
    q.to_u32()
        .ok_or_else(|| Error::Domain("period heuristic overflows u32".into()))
}

fn validate_homogeneous(model: &BoundModel) -> Result<()> {
    match model.family() {
        Family::WeightedLinear if model.rational_weights().is_some() => Ok(()),
        Family::SupAffine => {
            if model.affine_terms().iter().any(|t| t.offset != 0.0) {
                return Err(Error::Domain(
                    "Ehrhart fit needs a homogeneous model (zero offsets)".into(),
                ));
            }
            if model
                .affine_terms()
                .iter()
                .any(|t| t.rational_weights.is_none())
            {
                return Err(Error::Domain("Ehrhart fit needs rational term weights".into()));
            }
            Ok(())
        }
        _ => Err(Error::Domain(
            "Ehrhart fit applies to rational WeightedLinear or zero-offset SupAffine models".into(),
        )),
    }
}

fn fit_with_period(model: &BoundModel, q: u32) -> Result<Vec<Vec<BigRational>>> {
    let n = model.dimension();
    let mut rows = Vec::with_capacity(q as usize);
    for r in 0..q as u64 {
        // N+1 sample points on this residue class, skipping j = 0
        let m0: u64 = if r == 0 { 1 } else { 0 };
        let points: Vec<u64> = (m0..=m0 + n as u64).map(|m| r + m * q as u64).collect();
        let mut a = Vec::with_capacity(n + 1);
        let mut b = Vec::with_capacity(n + 1);
        for &j in &points {
            let jq = BigRational::from_integer(BigInt::from(j));
            let mut row = Vec::with_capacity(n + 1);
            let mut p = BigRational::one();
            for _ in 0..=n {
                row.push(p.clone());
                p *= &jq;
            }
            a.push(row);
            b.push(BigRational::from_integer(count_dilate(model, j)?));
        }
        let coeffs = solve_rational(a, b).ok_or_else(|| {
            Error::Consistency("degenerate Vandermonde system in Ehrhart fit".into())
        })?;
        rows.push(coeffs);
    }
    Ok(rows)
}

/// Fits the Ehrhart quasi-polynomial of a homogeneous rational model and
/// verifies it on at least `max(max_verify, 2q)` held-out dilations with
/// exact integer equality.
pub fn ehrhart_fit(model: &BoundModel, max_verify: u32) -> Result<EhrhartQP> {
    validate_homogeneous(model)?;
    let n = model.dimension() as u32;
    let q0 = period_heuristic(model)?.max(1);

    let mut q = q0;
    let mut last_err = None;
    while q <= q0.saturating_mul(64) {
        let rows = fit_with_period(model, q)?;
        let qp = EhrhartQP {
            n,
            q,
            rows,
            volume: 0.0,
        };
        match verify(model, &qp, max_verify) {
            Ok(volume) => return Ok(EhrhartQP { volume, ..qp }),
            Err(e @ Error::Consistency(_)) => {
                last_err = Some(e);
                q *= 2;
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| {
        Error::Consistency("Ehrhart fit failed before any verification ran".into())
    }))
}

fn verify(model: &BoundModel, qp: &EhrhartQP, max_verify: u32) -> Result<f64> {
    let n = qp.n as u64;
    // every residue row must share the leading coefficient
    let lead = qp.leading_rational();
    for row in &qp.rows {
        if row[n as usize] != lead {
            return Err(Error::Consistency(
                "residue rows disagree on the leading coefficient".into(),
            ));
        }
    }
    let volume = lead
        .to_f64()
        .ok_or_else(|| Error::Consistency("leading coefficient is not finite".into()))?;
    if let Ok(analytic) = analytic_volume(model) {
        if (volume - analytic).abs() > 1e-9 * analytic {
            return Err(Error::Consistency(format!(
                "fitted leading coefficient {volume} disagrees with the analytic volume {analytic}"
            )));
        }
    }

    let fit_max = (n + 1) * qp.q as u64;
    let count = (max_verify as u64).max(2 * qp.q as u64);
    for j in fit_max + 1..=fit_max + count {
        let predicted = qp.eval_rational(j);
        let actual = BigRational::from_integer(count_dilate(model, j)?);
        if predicted != actual {
            return Err(Error::Consistency(format!(
                "quasi-polynomial mismatch at j = {j}: predicted {predicted}, counted {actual}"
            )));
        }
    }
    Ok(volume)
}
