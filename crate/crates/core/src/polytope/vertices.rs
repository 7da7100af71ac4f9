//! Exact vertex enumeration of `P = {nu >= 0 : w_t . nu <= 1 for all t}` by
//! rational halfspace intersection: every vertex is the solution of some
//! `N`-subset of tight constraints. An f64 pre-solve filters the bulk of the
//! singular and infeasible subsets before the exact arithmetic runs.

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::bounds::BoundModel;
use crate::error::{Error, Result};
use crate::polytope::rational_to_f64;

struct Constraint {
    a: Vec<BigRational>,
    rhs: BigRational,
}

/// Solves `A x = b` in place; returns `None` when singular.
pub(crate) fn solve_rational(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for c in col..n {
                    let sub = &f * &a[col][c];
                    a[r][c] -= sub;
                }
                let sub = &f * &b[col];
                b[r] -= sub;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

fn solve_f64(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[pivot][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// All vertices of the SupAffine limiting set, exactly.
pub(crate) fn enumerate_vertices(model: &BoundModel) -> Result<Vec<Vec<BigRational>>> {
    let n = model.dimension();
    let mut cons: Vec<Constraint> = Vec::new();
    for i in 0..n {
        let mut a = vec![BigRational::zero(); n];
        a[i] = BigRational::from_integer(1.into());
        cons.push(Constraint {
            a,
            rhs: BigRational::zero(),
        });
    }
    for t in model.affine_terms() {
        let rw = t.rational_weights.as_ref().ok_or_else(|| {
            Error::Domain("vertex enumeration needs rational term weights".into())
        })?;
        cons.push(Constraint {
            a: rw.clone(),
            rhs: BigRational::from_integer(1.into()),
        });
    }
    let cons_f: Vec<(Vec<f64>, f64)> = cons
        .iter()
        .map(|c| {
            (
                c.a.iter().map(rational_to_f64).collect(),
                rational_to_f64(&c.rhs),
            )
        })
        .collect();

    let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
    let mut vertices = Vec::new();
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        // f64 screen first, exact confirmation after
        let af: Vec<Vec<f64>> = subset.iter().map(|&i| cons_f[i].0.clone()).collect();
        let bf: Vec<f64> = subset.iter().map(|&i| cons_f[i].1).collect();
        let plausible = match solve_f64(af, bf) {
            None => false,
            Some(x) => {
                x.iter().all(|&v| v >= -1e-7)
                    && cons_f[n..].iter().all(|(a, rhs)| {
                        a.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>() <= rhs + 1e-7
                    })
            }
        };
        if plausible {
            let ar: Vec<Vec<BigRational>> = subset.iter().map(|&i| cons[i].a.clone()).collect();
            let br: Vec<BigRational> = subset.iter().map(|&i| cons[i].rhs.clone()).collect();
            if let Some(x) = solve_rational(ar, br) {
                let feasible = x.iter().all(|v| !v.is_negative())
                    && cons[n..].iter().all(|c| {
                        let mut acc = BigRational::zero();
                        for (a, v) in c.a.iter().zip(&x) {
                            acc += a * v;
                        }
                        acc <= c.rhs
                    });
                if feasible {
                    let key: Vec<String> = x.iter().map(|v| v.to_string()).collect();
                    if seen.insert(key) {
                        vertices.push(x);
                    }
                }
            }
        }

        // next N-combination of constraint indices
        let total = cons.len();
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(vertices);
            }
            i -= 1;
            if subset[i] != i + total - n {
                subset[i] += 1;
                for k in i + 1..n {
                    subset[k] = subset[k - 1] + 1;
                }
                break;
            }
        }
    }
}
