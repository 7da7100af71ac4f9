//! Exact lattice-point counts `#(jP cap Z^N)` for homogeneous rational
//! models, without enumerating the points (counts reach 1e14 and beyond in
//! the shipped presets).

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::bounds::{BoundModel, Family};
use crate::error::{Error, Result};

/// Exact count of `{nu in N^N : b(nu) <= j}` for a homogeneous rational
/// model (WeightedLinear with rational weights, or SupAffine with zero
/// offsets and rational term weights).
pub fn count_dilate(model: &BoundModel, j: u64) -> Result<BigInt> {
    match model.family() {
        Family::WeightedLinear => {
            let weights = model.rational_weights().ok_or_else(|| {
                Error::Domain("exact counting needs rational weights".into())
            })?;
            Ok(count_knapsack(weights, j))
        }
        Family::SupAffine => {
            if model.affine_terms().iter().any(|t| t.offset != 0.0) {
                return Err(Error::Domain(
                    "exact counting needs a homogeneous model (zero offsets)".into(),
                ));
            }
            let terms: Vec<&[BigRational]> = model
                .affine_terms()
                .iter()
                .map(|t| {
                    t.rational_weights.as_deref().ok_or_else(|| {
                        Error::Domain("exact counting needs rational term weights".into())
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(split) = split_uniform_spike(&terms) {
                Ok(count_uniform_spike(model.dimension(), &split, j))
            } else {
                count_halfspaces_dfs(&terms, j)
            }
        }
        _ => Err(Error::Domain(
            "exact counting applies to homogeneous rational models only".into(),
        )),
    }
}

/// WeightedLinear: scale `sum lambda_i nu_i <= j` by `L = lcm` of the weight
/// denominators into an integer knapsack and count with an unbounded-coin DP.
fn count_knapsack(weights: &[BigRational], j: u64) -> BigInt {
    let mut l = BigInt::one();
    for w in weights {
        l = l.lcm(w.denom());
    }
    let lq = BigRational::from_integer(l.clone());
    let coins: Vec<u64> = weights
        .iter()
        .map(|w| (w * &lq).to_integer().to_u64().expect("scaled weight fits u64"))
        .collect();
    let budget = (&l * BigInt::from(j)).to_u64().expect("scaled budget fits u64") as usize;

    // dp[s] = number of nu with sum coins_i nu_i = s
    let mut dp = vec![BigUint::zero(); budget + 1];
    dp[0] = BigUint::one();
    for &c in &coins {
        let c = c as usize;
        for s in c..=budget {
            let add = dp[s - c].clone();
            dp[s] += add;
        }
    }
    let total: BigUint = dp.into_iter().sum();
    BigInt::from(total)
}

/// A SupAffine constraint set where each term reads `a * |nu| + b * nu_k`.
struct UniformSpike {
    /// (a, b = 0) terms: constraints on the total degree only.
    uniform: Vec<BigRational>,
    /// (a, b, k) spike terms.
    spikes: Vec<(BigRational, BigRational, usize)>,
}

fn split_uniform_spike(terms: &[&[BigRational]]) -> Option<UniformSpike> {
    let mut uniform = Vec::new();
    let mut spikes = Vec::new();
    for &w in terms {
        let mn = w.iter().min()?.clone();
        let heavy: Vec<usize> = (0..w.len()).filter(|&i| w[i] != mn).collect();
        match heavy.len() {
            0 => uniform.push(mn),
            1 => {
                let k = heavy[0];
                spikes.push((mn.clone(), &w[k] - &mn, k));
            }
            _ => return None,
        }
    }
    Some(UniformSpike { uniform, spikes })
}

fn binomial(n: i64, k: u32) -> BigInt {
    if n < 0 {
        // generalized binomial is zero in the range used here (n < k)
        return BigInt::zero();
    }
    let n = n as u64;
    if (k as u64) > n {
        return BigInt::zero();
    }
    let mut r = BigInt::one();
    for i in 0..k as u64 {
        r = r * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    r
}

/// Count compositions of `s` into `n` parts with per-part caps `m_k` by
/// inclusion-exclusion over the set of parts forced past their cap.
fn bounded_compositions(s: u64, caps: &[i64]) -> BigInt {
    let n = caps.len();
    if caps.iter().any(|&c| c < 0) {
        return BigInt::zero();
    }
    let total_cap: i64 = caps.iter().sum();
    if (s as i64) > total_cap {
        return BigInt::zero();
    }
    let mut count = BigInt::zero();
    for mask in 0u32..(1 << n) {
        let mut shift: i64 = 0;
        for (k, &cap) in caps.iter().enumerate() {
            if mask & (1 << k) != 0 {
                shift += cap + 1;
            }
        }
        let rem = s as i64 - shift;
        let term = binomial(rem + n as i64 - 1, n as u32 - 1);
        if mask.count_ones() % 2 == 0 {
            count += term;
        } else {
            count -= term;
        }
    }
    count
}

fn count_uniform_spike(n: usize, split: &UniformSpike, j: u64) -> BigInt {
    let jq = BigRational::from_integer(BigInt::from(j));
    // cap on s = |nu| from the uniform terms (and spike terms at b=0 corner)
    let mut s_max: Option<u64> = None;
    for a in &split.uniform {
        if a.is_positive() {
            let cap = (&jq / a).floor().to_integer().to_u64().unwrap_or(u64::MAX);
            s_max = Some(s_max.map_or(cap, |c| c.min(cap)));
        }
    }
    // a spike term's uniform part alone bounds s: a|nu| <= a|nu| + b nu_k <= j,
    // and a > 0 because all weights are strictly positive
    for (a, _, _) in &split.spikes {
        let cap = (&jq / a).floor().to_integer().to_u64().unwrap_or(u64::MAX);
        s_max = Some(s_max.map_or(cap, |c| c.min(cap)));
    }
    let s_max = s_max.expect("positive weights bound the total degree");

    let mut total = BigInt::zero();
    for s in 0..=s_max {
        let sq = BigRational::from_integer(BigInt::from(s));
        // per-coordinate caps from the spike terms: b nu_k <= j - a s
        let mut caps: Vec<i64> = vec![s as i64; n];
        let mut feasible = true;
        for (a, b, k) in &split.spikes {
            let slack = &jq - a * &sq;
            if slack.is_negative() {
                feasible = false;
                break;
            }
            let cap = (&slack / b).floor().to_integer().to_i64().unwrap_or(i64::MAX);
            caps[*k] = caps[*k].min(cap);
        }
        if !feasible {
            continue;
        }
        total += bounded_compositions(s, &caps);
    }
    total
}

/// Fallback for unstructured zero-offset SupAffine models: exact rational
/// DFS over the box, with per-branch feasibility pruning.
fn count_halfspaces_dfs(terms: &[&[BigRational]], j: u64) -> Result<BigInt> {
    const CEILING: u64 = 50_000_000;
    let n = terms[0].len();
    let jq = BigRational::from_integer(BigInt::from(j));
    let mut nu = vec![0u64; n];
    let mut count = BigInt::zero();
    let mut visited = 0u64;

    fn feasible(terms: &[&[BigRational]], nu: &[u64], jq: &BigRational) -> bool {
        terms.iter().all(|w| {
            let mut acc = BigRational::zero();
            for (c, &x) in w.iter().zip(nu) {
                acc += c * BigRational::from_integer(BigInt::from(x));
            }
            acc <= *jq
        })
    }

    fn rec(
        terms: &[&[BigRational]],
        jq: &BigRational,
        nu: &mut Vec<u64>,
        pos: usize,
        count: &mut BigInt,
        visited: &mut u64,
        ceiling: u64,
    ) -> Result<()> {
        if pos == nu.len() {
            *count += 1;
            *visited += 1;
            if *visited > ceiling {
                return Err(Error::Resource("halfspace DFS count".into(), ceiling));
            }
            return Ok(());
        }
        let mut v = 0u64;
        loop {
            nu[pos] = v;
            // weights are strictly positive, so infeasibility is monotone in v
            let mut probe = nu.clone();
            for p in probe.iter_mut().skip(pos + 1) {
                *p = 0;
            }
            if !feasible(terms, &probe, jq) {
                break;
            }
            rec(terms, jq, nu, pos + 1, count, visited, ceiling)?;
            v += 1;
        }
        nu[pos] = 0;
        Ok(())
    }

    rec(terms, &jq, &mut nu, 0, &mut count, &mut visited, CEILING)?;
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::AffineTerm;
    use crate::index_sets;

    fn rat(p: i64, q: i64) -> BigRational {
        BigRational::new(BigInt::from(p), BigInt::from(q))
    }

    fn wl_rational(ws: &[(i64, i64)]) -> BoundModel {
        BoundModel::weighted_linear_rational(ws.iter().map(|&(p, q)| rat(p, q)).collect()).unwrap()
    }

    #[test]
    fn knapsack_matches_enumeration() {
        let m = wl_rational(&[(1, 1), (1, 1), (2, 1), (4, 1)]);
        for j in [1u64, 4, 8, 12] {
            let exact = count_dilate(&m, j).unwrap();
            let brute = index_sets::count_superlevel(&m, j as f64, 10_000_000).unwrap();
            assert_eq!(exact, BigInt::from(brute), "j = {j}");
        }
    }

    #[test]
    fn knapsack_fractional_weights() {
        let m = wl_rational(&[(1, 2), (3, 4)]);
        for j in [1u64, 3, 7] {
            let exact = count_dilate(&m, j).unwrap();
            let brute = index_sets::count_superlevel(&m, j as f64, 10_000_000).unwrap();
            assert_eq!(exact, BigInt::from(brute), "j = {j}");
        }
    }

    fn spike_model(n: usize, c0: (i64, i64), c1: (i64, i64)) -> BoundModel {
        let mut terms = Vec::new();
        let uni: Vec<BigRational> = vec![rat(c0.0, c0.1); n];
        terms.push(
            AffineTerm::new(0.0, uni.iter().map(super::super::rational_to_f64).collect())
                .with_rational_weights(uni),
        );
        for k in 0..n {
            let mut w: Vec<BigRational> = vec![rat(c1.0, c1.1); n];
            w[k] = &w[k] + rat(c1.0, c1.1);
            terms.push(
                AffineTerm::new(0.0, w.iter().map(super::super::rational_to_f64).collect())
                    .with_rational_weights(w),
            );
        }
        BoundModel::sup_affine(n, terms).unwrap()
    }

    #[test]
    fn uniform_spike_matches_enumeration() {
        // 3-dimensional shrunk analog of the shipped truncated-simplex presets
        let m = spike_model(3, (1, 2), (5, 16));
        for j in [1u64, 2, 5, 9] {
            let exact = count_dilate(&m, j).unwrap();
            let brute = index_sets::count_superlevel(&m, j as f64, 10_000_000).unwrap();
            assert_eq!(exact, BigInt::from(brute), "j = {j}");
        }
    }

    #[test]
    fn dfs_fallback_matches_enumeration() {
        // asymmetric halfspaces that no structured counter covers
        let w1 = vec![rat(1, 2), rat(1, 3)];
        let w2 = vec![rat(1, 4), rat(2, 3)];
        let m = BoundModel::sup_affine(
            2,
            vec![
                AffineTerm::new(0.0, w1.iter().map(super::super::rational_to_f64).collect())
                    .with_rational_weights(w1),
                AffineTerm::new(0.0, w2.iter().map(super::super::rational_to_f64).collect())
                    .with_rational_weights(w2),
            ],
        )
        .unwrap();
        for j in [1u64, 3, 6] {
            let exact = count_dilate(&m, j).unwrap();
            let brute = index_sets::count_superlevel(&m, j as f64, 10_000_000).unwrap();
            assert_eq!(exact, BigInt::from(brute), "j = {j}");
        }
    }

    #[test]
    fn bounded_compositions_hand_checks() {
        // s=3 into 2 parts, caps (2,2): (1,2),(2,1) -> 2
        assert_eq!(bounded_compositions(3, &[2, 2]), BigInt::from(2));
        // no caps binding: C(s+n-1, n-1)
        assert_eq!(bounded_compositions(4, &[10, 10, 10]), BigInt::from(15));
        assert_eq!(bounded_compositions(5, &[1, 1]), BigInt::zero());
    }
}
