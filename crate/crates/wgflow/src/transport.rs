//! Exact 2-Wasserstein distance between equal-size uniform empirical measures
//! and ambiguity-set membership.
//!
//! For two uniform empirical measures with the same particle count the
//! optimal coupling is a permutation, so the distance reduces to a linear
//! assignment problem on the squared-distance cost matrix. The solver is the
//! shortest-augmenting-path (Jonker–Volgenant) method, exact in O(n³).
//!
//! Note the convention: [`w2_distance`] returns the *distance* (square root
//! of the optimal mean squared cost), not the squared distance. Ambiguity
//! radii are compared against the distance.

use alloc::vec;
use alloc::vec::Vec;

use crate::ensemble::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::math;

/// Nominal ensemble plus a 2-Wasserstein radius.
#[derive(Debug, Clone)]
pub struct AmbiguitySet {
    pub nominal: ParticleEnsemble,
    pub radius: f64,
}

impl AmbiguitySet {
    pub fn new(nominal: ParticleEnsemble, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidInput(alloc::format!(
                "ambiguity radius must be nonnegative and finite, got {radius}"
            )));
        }
        Ok(AmbiguitySet { nominal, radius })
    }
}

/// Optimal coupling between two equal-size ensembles.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// `assignment[i]` is the target particle matched to source particle `i`.
    pub assignment: Vec<usize>,
    /// Mean squared transport cost `(1/n) Σᵢ ‖aᵢ - b_{σ(i)}‖²`.
    pub cost: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let diff = x - y;
        acc += diff * diff;
    }
    acc
}

/// 2-Wasserstein distance and the minimising permutation.
pub fn w2_distance(a: &ParticleEnsemble, b: &ParticleEnsemble) -> Result<(f64, TransportPlan)> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let n = a.len();
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        let source = a.particle(i);
        for j in 0..n {
            cost[i * n + j] = squared_distance(source, b.particle(j));
        }
    }
    let assignment = solve_assignment(n, &cost);
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[i * n + j])
        .sum();
    let mean_cost = total / n as f64;
    Ok((
        math::sqrt(mean_cost),
        TransportPlan {
            assignment,
            cost: mean_cost,
        },
    ))
}

/// Membership test against the set's radius; the boundary counts as inside.
/// Also returns the computed distance for logging.
pub fn within_ambiguity(set: &AmbiguitySet, candidate: &ParticleEnsemble) -> Result<(bool, f64)> {
    let (distance, _) = w2_distance(&set.nominal, candidate)?;
    Ok((distance <= set.radius, distance))
}

/// Shortest-augmenting-path solution of the square assignment problem.
/// Ties between equally cheap assignments are broken arbitrarily; only the
/// optimal cost is contractual.
fn solve_assignment(n: usize, cost: &[f64]) -> Vec<usize> {
    const UNASSIGNED: usize = usize::MAX;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut shortest = vec![0.0_f64; n];
    let mut path = vec![UNASSIGNED; n];
    let mut col4row = vec![UNASSIGNED; n];
    let mut row4col = vec![UNASSIGNED; n];
    let mut row_seen = vec![false; n];
    let mut col_seen = vec![false; n];
    let mut remaining = vec![0usize; n];

    for cur_row in 0..n {
        for (slot, j) in remaining.iter_mut().zip((0..n).rev()) {
            *slot = j;
        }
        let mut num_remaining = n;
        for flag in row_seen.iter_mut() {
            *flag = false;
        }
        for flag in col_seen.iter_mut() {
            *flag = false;
        }
        for s in shortest.iter_mut() {
            *s = f64::INFINITY;
        }

        let mut min_val = 0.0;
        let mut i = cur_row;
        let mut sink = UNASSIGNED;
        while sink == UNASSIGNED {
            row_seen[i] = true;
            let mut lowest = f64::INFINITY;
            let mut index = UNASSIGNED;
            for it in 0..num_remaining {
                let j = remaining[it];
                let reduced = min_val + cost[i * n + j] - u[i] - v[j];
                if reduced < shortest[j] {
                    shortest[j] = reduced;
                    path[j] = i;
                }
                if shortest[j] < lowest || (shortest[j] == lowest && row4col[j] == UNASSIGNED) {
                    lowest = shortest[j];
                    index = it;
                }
            }
            min_val = lowest;
            debug_assert!(min_val.is_finite(), "assignment problem is infeasible");
            let j = remaining[index];
            if row4col[j] == UNASSIGNED {
                sink = j;
            } else {
                i = row4col[j];
            }
            col_seen[j] = true;
            num_remaining -= 1;
            remaining[index] = remaining[num_remaining];
        }

        u[cur_row] += min_val;
        for ip in 0..n {
            if row_seen[ip] && ip != cur_row {
                u[ip] += min_val - shortest[col4row[ip]];
            }
        }
        for jp in 0..n {
            if col_seen[jp] {
                v[jp] -= min_val - shortest[jp];
            }
        }

        let mut j = sink;
        loop {
            let ip = path[j];
            row4col[j] = ip;
            core::mem::swap(&mut col4row[ip], &mut j);
            if ip == cur_row {
                break;
            }
        }
    }
    col4row
}
