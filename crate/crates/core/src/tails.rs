//! Exact truncation tails `sum_{nu not in Lambda_M} prefactor * e^{-b(nu)}`.

use serde::Serialize;

use crate::bounds::{BoundModel, Family};
use crate::error::{Error, Result};
use crate::index_sets::{self, DEFAULT_MEMBER_CEILING};
use crate::sum::Accumulator;

/// How a total sum was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SumMethod {
    ClosedForm,
    ControlledEnumeration,
}

/// Result of a tail computation. `head_sum` and `total_sum` are unscaled
/// (`sum e^{-b}`); the prefactor is applied once, to `tail`.
#[derive(Debug, Clone, Serialize)]
pub struct TailValue {
    pub m: u64,
    pub head_sum: f64,
    pub total_sum: f64,
    pub tail: f64,
    pub abs_error_bound: f64,
    pub method: SumMethod,
}

/// Default relative tolerance for controlled enumeration.
pub const DEFAULT_TOL: f64 = 1e-12;

/// `sum_{nu in N^N} e^{-b(nu)}` (without the prefactor).
///
/// WeightedLinear and LegendreSqrt have separable closed forms; SupAffine and
/// FactorialAlpha are summed by controlled enumeration with a geometric
/// envelope bounding the remainder below `tol * max(1, value)`.
pub fn total_sum(model: &BoundModel, tol: f64) -> Result<(f64, SumMethod)> {
    let (value, err, method) = total_sum_with_error(model, tol)?;
    let _ = err;
    Ok((value, method))
}

pub(crate) fn total_sum_with_error(model: &BoundModel, tol: f64) -> Result<(f64, f64, SumMethod)> {
    if !(tol > 0.0) {
        return Err(Error::Argument("tol must be > 0".into()));
    }
    match model.family() {
        Family::WeightedLinear => {
            let v: f64 = model
                .lambda()
                .iter()
                .map(|&l| (1.0 - (-l).exp()).recip())
                .product();
            Ok((v, 0.0, SumMethod::ClosedForm))
        }
        Family::LegendreSqrt => {
            // sum_v (2v+1) x^v = (1+x)/(1-x)^2 with x = e^{-2 lambda}
            let v: f64 = model
                .lambda()
                .iter()
                .map(|&l| {
                    let x = (-2.0 * l).exp();
                    (1.0 + x) / ((1.0 - x) * (1.0 - x))
                })
                .product();
            Ok((v, 0.0, SumMethod::ClosedForm))
        }
        Family::SupAffine | Family::FactorialAlpha => {
            let (v, err) = enumerated_total(model, tol)?;
            Ok((v, err, SumMethod::ControlledEnumeration))
        }
    }
}

/// Controlled enumeration: sum `e^{-b}` over `b <= T` on a doubling `T`
/// ladder; the part left out is bounded through each linear lower envelope
/// `l <= b` by `sum_all e^{-l} - sum_{b<=T} e^{-l}`, a computable geometric
/// quantity.
fn enumerated_total(model: &BoundModel, tol: f64) -> Result<(f64, f64)> {
    let envelopes = model.lower_envelopes()?;
    if envelopes
        .iter()
        .any(|e| e.coeff.iter().any(|&c| !(c > 0.0)))
    {
        return Err(Error::Domain(
            "model is not summable: no strictly positive envelope slope".into(),
        ));
    }
    let full: Vec<f64> = envelopes.iter().map(|e| e.full_sum()).collect();
    let mut t = 8.0f64;
    loop {
        let mut s = Accumulator::new();
        let mut h: Vec<Accumulator> = vec![Accumulator::new(); envelopes.len()];
        index_sets::visit_superlevel(model, t, |nu, b| {
            s.add((-b).exp());
            for (acc, env) in h.iter_mut().zip(&envelopes) {
                acc.add((-env.eval_index(nu)).exp());
            }
            Ok(())
        })?;
        let value = s.value();
        let rem = full
            .iter()
            .zip(&h)
            .map(|(&f, acc)| (f - acc.value()).max(0.0))
            .fold(f64::INFINITY, f64::min);
        if rem < tol * value.max(1.0) {
            return Ok((value, rem));
        }
        if t > 4096.0 {
            return Err(Error::Resource(
                "controlled enumeration threshold ladder".into(),
                4096,
            ));
        }
        t *= 2.0;
    }
}

/// Exact tail after keeping the quasi-optimal set of cardinality `m`.
pub fn exact_tail(model: &BoundModel, m: u64, tol: f64) -> Result<TailValue> {
    exact_tail_with_ceiling(model, m, tol, DEFAULT_MEMBER_CEILING)
}

pub fn exact_tail_with_ceiling(model: &BoundModel, m: u64, tol: f64, ceiling: u64) -> Result<TailValue> {
    let (total, total_err, method) = total_sum_with_error(model, tol)?;
    let set = index_sets::build_quasi_optimal_with_ceiling(model, m, ceiling)?;
    // ascending b order: smallest terms are absorbed last by the compensation
    let mut head = Accumulator::new();
    for (_, b) in set.members() {
        head.add((-b).exp());
    }
    let tail = head.subtract_from(total).max(0.0);
    let pf = model.prefactor();
    Ok(TailValue {
        m,
        head_sum: head.value(),
        total_sum: total,
        tail: pf * tail,
        abs_error_bound: pf * total_err,
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::AffineTerm;

    #[test]
    fn total_weighted_linear_1d() {
        let m = BoundModel::weighted_linear(vec![1.0]).unwrap();
        let (v, method) = total_sum(&m, DEFAULT_TOL).unwrap();
        assert_eq!(method, SumMethod::ClosedForm);
        assert!((v - 1.0 / (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((v - 1.581977).abs() < 1e-6);
    }

    #[test]
    fn total_legendre_1d() {
        let m = BoundModel::legendre_sqrt(vec![1.0]).unwrap();
        let (v, _) = total_sum(&m, DEFAULT_TOL).unwrap();
        let x = (-2.0f64).exp();
        assert!((v - (1.0 + x) / ((1.0 - x) * (1.0 - x))).abs() < 1e-15);
        assert!((v - 1.518548473).abs() < 1e-9);
    }

    #[test]
    fn total_factorial_matches_brute_force() {
        let m = BoundModel::factorial_alpha(vec![0.25, 0.25]).unwrap();
        let (v, method) = total_sum(&m, 1e-10).unwrap();
        assert_eq!(method, SumMethod::ControlledEnumeration);
        let mut brute = 0.0f64;
        for a in 0..=60u32 {
            for b in 0..=60u32 {
                brute += (-m.eval_b_index_unchecked(&[a, b])).exp();
            }
        }
        assert!((v - brute).abs() < 1e-8, "v = {v}, brute = {brute}");
    }

    #[test]
    fn total_sup_affine_matches_brute_force() {
        let m = BoundModel::sup_affine(
            2,
            vec![
                AffineTerm::new(0.5, vec![1.0, 1.0]),
                AffineTerm::new(0.0, vec![0.4, 1.5]),
            ],
        )
        .unwrap();
        let (v, _) = total_sum(&m, 1e-10).unwrap();
        let mut brute = 0.0f64;
        for a in 0..=200u32 {
            for b in 0..=200u32 {
                brute += (-m.eval_b_index_unchecked(&[a, b])).exp();
            }
        }
        assert!((v - brute).abs() < 1e-9);
    }

    #[test]
    fn geometric_tail_1d() {
        let lambda = 0.7;
        let m = BoundModel::weighted_linear(vec![lambda]).unwrap();
        for mm in [1u64, 2, 5, 20] {
            let t = exact_tail(&m, mm, DEFAULT_TOL).unwrap();
            let expected = (-lambda * mm as f64).exp() / (1.0 - (-lambda).exp());
            assert!((t.tail - expected).abs() < 1e-13, "M={mm}");
        }
    }

    #[test]
    fn hand_tail_2d() {
        let m = BoundModel::weighted_linear(vec![1.0, 1.0]).unwrap();
        let t = exact_tail(&m, 3, DEFAULT_TOL).unwrap();
        let e1 = (-1.0f64).exp();
        let expected = (1.0 - e1).powi(-2) - 1.0 - 2.0 * e1;
        assert!((t.tail - expected).abs() < 1e-14);
        assert!((t.tail - 0.766891418734).abs() < 1e-10);
    }

    #[test]
    fn prefactor_scales_tail_linearly() {
        let base = BoundModel::weighted_linear(vec![1.0, 2.0]).unwrap();
        let scaled = base.clone().with_prefactor(3.5).unwrap();
        let a = exact_tail(&base, 4, DEFAULT_TOL).unwrap();
        let b = exact_tail(&scaled, 4, DEFAULT_TOL).unwrap();
        assert!((b.tail - 3.5 * a.tail).abs() < 1e-14 * b.tail.max(1.0));
    }

    #[test]
    fn tail_decreases_in_m() {
        let m = BoundModel::legendre_sqrt(vec![0.4, 0.8]).unwrap();
        let mut prev = f64::INFINITY;
        for mm in [1u64, 2, 4, 8, 16, 32] {
            let t = exact_tail(&m, mm, DEFAULT_TOL).unwrap();
            assert!(t.tail <= prev + 2.0 * DEFAULT_TOL);
            assert!(t.tail >= 0.0);
            prev = t.tail;
        }
    }
}
