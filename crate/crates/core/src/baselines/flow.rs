use ndarray::Array2;

use super::require_capacity_for;
use super::relax::FractionalAllocation;
use crate::error::{QapError, Result};

// Guards against parent cycles from round-off on zero-cost residual cycles.
const RELAX_TOL: f64 = 1e-12;

/// Exact minimizer of `⟨cost, X⟩` over the transportation polytope
/// (rows sum to 1, column `j` sums to at most `caps[j]`), as an integral vertex.
///
/// Successive shortest paths: phones join one at a time, each along a
/// cheapest augmenting path. Paths enter at a host and may bump earlier
/// phones between hosts before ending at a host with spare capacity, so the
/// residual network collapses to `n` host nodes.
pub fn lmo_transportation(cost: &Array2<f64>, caps: &[usize]) -> Result<FractionalAllocation> {
    let assign = min_cost_assignment(cost, caps)?;
    let (m, n) = cost.dim();
    let mut x = Array2::zeros((m, n));
    for (i, &h) in assign.iter().enumerate() {
        x[[i, h]] = 1.0;
    }
    Ok(FractionalAllocation::from_matrix_unchecked(x))
}

pub(crate) fn min_cost_assignment(cost: &Array2<f64>, caps: &[usize]) -> Result<Vec<usize>> {
    let (m, n) = cost.dim();
    if caps.len() != n {
        return Err(QapError::Dimension(format!(
            "cost has {n} columns but {} capacities were given",
            caps.len()
        )));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(QapError::Config("cost matrix has non-finite entries".into()));
    }
    require_capacity_for(caps, m)?;

    let mut assign = vec![usize::MAX; m];
    let mut counts = vec![0usize; n];
    // edge[a][b]: cheapest phone to move from host a to b, with its cost.
    let mut edge = vec![vec![(f64::INFINITY, usize::MAX); n]; n];
    let mut dist = vec![0.0; n];
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];

    for phone in 0..m {
        for row in edge.iter_mut() {
            row.fill((f64::INFINITY, usize::MAX));
        }
        for p in 0..phone {
            let a = assign[p];
            for b in 0..n {
                let c = cost[[p, b]] - cost[[p, a]];
                if b != a && c < edge[a][b].0 {
                    edge[a][b] = (c, p);
                }
            }
        }
        for j in 0..n {
            dist[j] = cost[[phone, j]];
            parent[j] = None;
        }
        // Bellman–Ford over hosts; the residual graph has no negative cycles.
        for _ in 1..n {
            let mut changed = false;
            for a in 0..n {
                for b in 0..n {
                    let (c, p) = edge[a][b];
                    if p != usize::MAX && dist[a] + c < dist[b] - RELAX_TOL {
                        dist[b] = dist[a] + c;
                        parent[b] = Some((a, p));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let end = (0..n)
            .filter(|&j| counts[j] < caps[j])
            .min_by(|&a, &b| dist[a].total_cmp(&dist[b]))
            .expect("spare capacity exists");
        counts[end] += 1;
        let mut host = end;
        let mut hops = 0;
        while let Some((from, moved)) = parent[host] {
            assign[moved] = host;
            host = from;
            hops += 1;
            if hops > n {
                return Err(QapError::State("augmenting path did not terminate".into()));
            }
        }
        assign[phone] = host;
    }
    Ok(assign)
}
