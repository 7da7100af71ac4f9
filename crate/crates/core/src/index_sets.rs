//! Superlevel-set enumeration and quasi-optimal index-set construction.
//!
//! The quasi-optimal set of cardinality `M` keeps the `M` indices with the
//! largest coefficient bound `e^{-b(nu)}`, i.e. the smallest `b`. Members are
//! always ordered by the strict total order `(b, |nu|, lex)`.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::io::Write;

use crate::bounds::{BoundModel, Family, MultiIndex};
use crate::error::{Error, Result};

/// Default member-count ceiling for enumerations (desk-scale memory bound).
pub const DEFAULT_MEMBER_CEILING: u64 = 50_000_000;

pub(crate) const ORDER_RULE: &str = "(b_value, total_degree, lexicographic)";

/// An ordered set of multi-indices with their `b`-values.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSet {
    members: Vec<(MultiIndex, f64)>,
    order_rule: &'static str,
    envelope: String,
}

impl IndexSet {
    pub fn members(&self) -> &[(MultiIndex, f64)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn order_rule(&self) -> &str {
        self.order_rule
    }

    /// Description of the pruning envelope used during construction.
    pub fn envelope(&self) -> &str {
        &self.envelope
    }

    pub fn max_b(&self) -> f64 {
        self.members.last().map_or(f64::NEG_INFINITY, |m| m.1)
    }

    pub fn contains(&self, nu: &MultiIndex) -> bool {
        self.members.iter().any(|(m, _)| m == nu)
    }

    /// Checks downward closure: every `mu <= nu` of a member is a member.
    pub fn is_downward_closed(&self) -> bool {
        for (nu, _) in &self.members {
            for i in 0..nu.len() {
                if nu.entries()[i] > 0 {
                    let mut parent = nu.entries().to_vec();
                    parent[i] -= 1;
                    if !self.contains(&MultiIndex::new(parent)) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// One row per member: `nu_1,...,nu_N,b_value,rank`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        let n = self.members.first().map_or(0, |(m, _)| m.len());
        let header: Vec<String> = (1..=n)
            .map(|i| format!("nu_{i}"))
            .chain(["b_value".into(), "rank".into()])
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (rank, (nu, b)) in self.members.iter().enumerate() {
            let mut row: Vec<String> = nu.entries().iter().map(|x| x.to_string()).collect();
            row.push(format!("{b:.12e}"));
            row.push((rank + 1).to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// The strict total order `(b, |nu|, lex)` on `(nu, b)` pairs.
pub(crate) fn order_cmp(a: &(MultiIndex, f64), b: &(MultiIndex, f64)) -> Ordering {
    a.1.total_cmp(&b.1)
        .then_with(|| a.0.total_degree().cmp(&b.0.total_degree()))
        .then_with(|| a.0.entries().cmp(b.0.entries()))
}

/// Per-coordinate function `m_i(v) = min over integer x >= v` of coordinate
/// `i`'s contribution to `b`. Nondecreasing in `v`, which is what branch
/// pruning needs.
enum CoordFloor {
    /// contribution `coeff * v`, already monotone
    Linear { coeff: f64 },
    /// LegendreSqrt: `c(v) = 2 lambda v - log(2v+1)`, convex with an interior
    /// dip when lambda < 1
    Dip { lambda: f64, argmin: f64 },
}

impl CoordFloor {
    fn eval(&self, v: u32) -> f64 {
        match *self {
            CoordFloor::Linear { coeff } => coeff * v as f64,
            CoordFloor::Dip { lambda, argmin } => {
                let c = |x: f64| 2.0 * lambda * x - (2.0 * x + 1.0).ln();
                let v = v as f64;
                if v >= argmin {
                    c(v)
                } else {
                    c(argmin.floor().max(v)).min(c(argmin.ceil()))
                }
            }
        }
    }
}

fn coord_floors(model: &BoundModel) -> Result<(Vec<CoordFloor>, String)> {
    match model.family() {
        Family::WeightedLinear => Ok((
            model
                .lambda()
                .iter()
                .map(|&l| CoordFloor::Linear { coeff: l })
                .collect(),
            "exact (b is separable and monotone)".into(),
        )),
        // min over terms of the per-coordinate weight, minus the worst offset,
        // is a valid separable floor; the DFS also prunes on exact b since
        // SupAffine is coordinate-monotone
        Family::SupAffine => {
            let n = model.dimension();
            let mut floors = Vec::with_capacity(n);
            for i in 0..n {
                let w = model
                    .affine_terms()
                    .iter()
                    .map(|t| t.weights[i])
                    .fold(f64::INFINITY, f64::min);
                floors.push(CoordFloor::Linear { coeff: w });
            }
            Ok((floors, "per-coordinate min term weight".into()))
        }
        Family::LegendreSqrt => Ok((
            model
                .lambda()
                .iter()
                .map(|&l| {
                    let argmin = ((1.0 / l - 1.0) / 2.0).max(0.0);
                    CoordFloor::Dip { lambda: l, argmin }
                })
                .collect(),
            "per-coordinate convex minimum of 2*lambda*v - log(2v+1)".into(),
        )),
        Family::FactorialAlpha => {
            let (p, s_p) = model.factorial_margin()?;
            Ok((
                model
                    .lambda()
                    .iter()
                    .map(|&l| CoordFloor::Linear {
                        coeff: (2.0 - 2.0 * p) * l - 2.0 * s_p.ln(),
                    })
                    .collect(),
                format!("multinomial margin p={p}"),
            ))
        }
    }
}

/// Constant shift so that `shift + sum_i floor_i(nu_i) <= b(nu)` everywhere.
fn floor_shift(model: &BoundModel) -> f64 {
    match model.family() {
        Family::SupAffine => -model
            .affine_terms()
            .iter()
            .map(|t| t.offset)
            .fold(0.0f64, f64::max),
        _ => 0.0,
    }
}

struct SuperlevelScan<'a, F> {
    model: &'a BoundModel,
    floors: Vec<CoordFloor>,
    /// suffix[i] = sum of floor_j(0) for j >= i
    suffix: Vec<f64>,
    shift: f64,
    tau: f64,
    visit: F,
}

impl<F: FnMut(&[u32], f64) -> Result<()>> SuperlevelScan<'_, F> {
    fn run(&mut self) -> Result<()> {
        let mut nu = vec![0u32; self.model.dimension()];
        let base = self.shift + self.suffix[0];
        self.descend(&mut nu, 0, base)
    }

    /// `low` is a lower bound on `b` over every completion of `nu[..pos]`.
    fn descend(&mut self, nu: &mut Vec<u32>, pos: usize, low: f64) -> Result<()> {
        if pos == nu.len() {
            let b = self.model.eval_b_index_unchecked(nu);
            if b <= self.tau {
                (self.visit)(nu, b)?;
            }
            return Ok(());
        }
        let monotone = self.model.is_coordinate_monotone();
        let mut v = 0u32;
        loop {
            nu[pos] = v;
            let here = low - self.suffix[pos] + self.suffix[pos + 1] + self.floors[pos].eval(v);
            if here > self.tau {
                break;
            }
            if monotone && pos + 1 == nu.len() {
                // exact b is monotone in v here, cheapest possible check
                if self.model.eval_b_index_unchecked(nu) > self.tau {
                    break;
                }
            }
            self.descend(nu, pos + 1, here)?;
            v += 1;
        }
        nu[pos] = 0;
        Ok(())
    }
}

/// Visits every lattice point with `b(nu) <= tau` in lexicographic DFS order.
pub(crate) fn visit_superlevel<F: FnMut(&[u32], f64) -> Result<()>>(
    model: &BoundModel,
    tau: f64,
    visit: F,
) -> Result<String> {
    let (floors, envelope) = coord_floors(model)?;
    let n = model.dimension();
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + floors[i].eval(0);
    }
    let mut scan = SuperlevelScan {
        model,
        floors,
        suffix,
        shift: floor_shift(model),
        tau,
        visit,
    };
    scan.run()?;
    Ok(envelope)
}

/// All lattice indices with `b(nu) <= tau`, ordered by `(b, |nu|, lex)`.
pub fn enumerate_superlevel(model: &BoundModel, tau: f64) -> Result<IndexSet> {
    enumerate_superlevel_with_ceiling(model, tau, DEFAULT_MEMBER_CEILING)
}

pub fn enumerate_superlevel_with_ceiling(
    model: &BoundModel,
    tau: f64,
    ceiling: u64,
) -> Result<IndexSet> {
    if !(tau >= 0.0) {
        return Err(Error::Argument("tau must be >= 0".into()));
    }
    let mut members: Vec<(MultiIndex, f64)> = Vec::new();
    let envelope = visit_superlevel(model, tau, |nu, b| {
        if members.len() as u64 >= ceiling {
            return Err(Error::Resource("superlevel member count".into(), ceiling));
        }
        members.push((MultiIndex::new(nu.to_vec()), b));
        Ok(())
    })?;
    members.sort_by(order_cmp);
    Ok(IndexSet {
        members,
        order_rule: ORDER_RULE,
        envelope,
    })
}

/// Number of lattice indices with `b(nu) <= tau`, without storing them.
pub fn count_superlevel(model: &BoundModel, tau: f64, ceiling: u64) -> Result<u64> {
    if !(tau >= 0.0) {
        return Err(Error::Argument("tau must be >= 0".into()));
    }
    let mut count = 0u64;
    visit_superlevel(model, tau, |_, _| {
        count += 1;
        if count > ceiling {
            return Err(Error::Resource("superlevel member count".into(), ceiling));
        }
        Ok(())
    })?;
    Ok(count)
}

#[derive(Debug)]
struct HeapNode {
    b: f64,
    deg: u64,
    nu: Vec<u32>,
}

impl PartialEq for HeapNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapNode {}
impl PartialOrd for HeapNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapNode {
    // reversed so BinaryHeap pops the smallest (b, deg, lex) first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .b
            .total_cmp(&self.b)
            .then_with(|| other.deg.cmp(&self.deg))
            .then_with(|| other.nu.cmp(&self.nu))
    }
}

/// The first `M` indices under `(b, |nu|, lex)`, grown by best-first search
/// from the origin.
///
/// A child `nu + e_i` enters the frontier only once all of its parents have
/// been finalized (graded generation), so every node is pushed exactly once
/// and the result is downward closed whenever `b` is coordinate-monotone.
pub fn build_quasi_optimal(model: &BoundModel, m: u64) -> Result<IndexSet> {
    build_quasi_optimal_with_ceiling(model, m, DEFAULT_MEMBER_CEILING)
}

pub fn build_quasi_optimal_with_ceiling(model: &BoundModel, m: u64, ceiling: u64) -> Result<IndexSet> {
    if m < 1 {
        return Err(Error::Argument("M must be >= 1".into()));
    }
    if m > ceiling {
        return Err(Error::Resource("quasi-optimal member count".into(), ceiling));
    }
    let n = model.dimension();
    let mut heap: BinaryHeap<HeapNode> = BinaryHeap::new();
    let mut pending: HashMap<Vec<u32>, u32> = HashMap::new();
    let origin = vec![0u32; n];
    heap.push(HeapNode {
        b: model.eval_b_index_unchecked(&origin),
        deg: 0,
        nu: origin,
    });

    let mut members: Vec<(MultiIndex, f64)> = Vec::with_capacity(m as usize);
    while (members.len() as u64) < m {
        let node = heap.pop().expect("frontier never empties before M nodes");
        for i in 0..n {
            let mut child = node.nu.clone();
            child[i] += 1;
            let parents = child.iter().filter(|&&x| x > 0).count() as u32;
            let seen = pending.entry(child.clone()).or_insert(0);
            *seen += 1;
            if *seen == parents {
                pending.remove(&child);
                heap.push(HeapNode {
                    b: model.eval_b_index_unchecked(&child),
                    deg: child.iter().map(|&x| x as u64).sum(),
                    nu: child,
                });
            }
        }
        members.push((MultiIndex::new(node.nu), node.b));
    }
    Ok(IndexSet {
        members,
        order_rule: ORDER_RULE,
        envelope: "graded best-first".into(),
    })
}

/// Superlevel counts along an ascending list of thresholds.
pub fn cardinality_profile(model: &BoundModel, taus: &[f64]) -> Result<Vec<(f64, u64)>> {
    if taus.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Argument("tau list must be ascending".into()));
    }
    taus.iter()
        .map(|&t| count_superlevel(model, t, DEFAULT_MEMBER_CEILING).map(|c| (t, c)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::AffineTerm;

    fn binom(n: u64, k: u64) -> u64 {
        let mut r = 1u64;
        for i in 0..k {
            r = r * (n - i) / (i + 1);
        }
        r
    }

    #[test]
    fn superlevel_1124_tau4_has_23_members() {
        let m = BoundModel::weighted_linear(vec![1.0, 1.0, 2.0, 4.0]).unwrap();
        let s = enumerate_superlevel(&m, 4.0).unwrap();
        assert_eq!(s.len(), 23);
        assert!(s.is_downward_closed());
    }

    #[test]
    fn superlevel_isotropic_n8_is_binomial() {
        let m = BoundModel::weighted_linear(vec![1.0; 8]).unwrap();
        for j in 1..=5u64 {
            let s = count_superlevel(&m, j as f64, DEFAULT_MEMBER_CEILING).unwrap();
            assert_eq!(s, binom(j + 8, 8));
        }
    }

    #[test]
    fn superlevel_tau0_is_origin_only() {
        let m = BoundModel::weighted_linear(vec![1.0, 2.0]).unwrap();
        let s = enumerate_superlevel(&m, 0.0).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.members()[0].0.entries(), &[0, 0]);
    }

    #[test]
    fn superlevel_matches_box_scan_all_families() {
        let models = vec![
            BoundModel::weighted_linear(vec![0.7, 1.3]).unwrap(),
            BoundModel::sup_affine(
                2,
                vec![
                    AffineTerm::new(0.5, vec![1.0, 1.0]),
                    AffineTerm::new(0.0, vec![0.4, 1.5]),
                ],
            )
            .unwrap(),
            BoundModel::legendre_sqrt(vec![0.2, 0.9]).unwrap(),
            BoundModel::factorial_alpha(vec![0.3, 0.2]).unwrap(),
        ];
        for m in &models {
            for &tau in &[0.5, 2.0, 5.0] {
                let fast = enumerate_superlevel(m, tau).unwrap();
                let mut brute = 0u64;
                for a in 0..200u32 {
                    for b in 0..200u32 {
                        if m.eval_b_index_unchecked(&[a, b]) <= tau {
                            brute += 1;
                        }
                    }
                }
                assert_eq!(fast.len() as u64, brute, "family {:?} tau {tau}", m.family());
            }
        }
    }

    #[test]
    fn quasi_optimal_small_hand_case() {
        let m = BoundModel::weighted_linear(vec![1.0, 1.0]).unwrap();
        let s = build_quasi_optimal(&m, 3).unwrap();
        let got: Vec<&[u32]> = s.members().iter().map(|(n, _)| n.entries()).collect();
        assert_eq!(got, vec![&[0, 0][..], &[0, 1], &[1, 0]]);
    }

    #[test]
    fn quasi_optimal_matches_superlevel_at_level_cardinality() {
        let m = BoundModel::weighted_linear(vec![1.0, 1.0, 2.0, 4.0]).unwrap();
        let level = enumerate_superlevel(&m, 4.0).unwrap();
        let qsi = build_quasi_optimal(&m, level.len() as u64).unwrap();
        assert_eq!(level.members(), qsi.members());
    }

    #[test]
    fn nesting_and_profile() {
        let m = BoundModel::legendre_sqrt(vec![0.5]).unwrap();
        let taus = [0.0, 1.0, 2.0, 4.0];
        let profile = cardinality_profile(&m, &taus).unwrap();
        for w in profile.windows(2) {
            assert!(w[0].1 <= w[1].1);
        }
        let small = enumerate_superlevel(&m, 1.0).unwrap();
        let large = enumerate_superlevel(&m, 4.0).unwrap();
        for (nu, _) in small.members() {
            assert!(large.contains(nu));
        }
    }

    #[test]
    fn ceiling_reports_resource_error() {
        let m = BoundModel::weighted_linear(vec![1.0]).unwrap();
        let err = enumerate_superlevel_with_ceiling(&m, 100.0, 10).unwrap_err();
        assert!(matches!(err, Error::Resource(_, 10)));
    }

    #[test]
    fn quasi_optimal_is_sorted_and_deterministic() {
        let m = BoundModel::factorial_alpha(vec![0.2, 0.15, 0.1]).unwrap();
        let a = build_quasi_optimal(&m, 50).unwrap();
        let b = build_quasi_optimal(&m, 50).unwrap();
        assert_eq!(a, b);
        for w in a.members().windows(2) {
            assert_eq!(order_cmp(&w[0], &w[1]), Ordering::Less);
        }
    }
}
