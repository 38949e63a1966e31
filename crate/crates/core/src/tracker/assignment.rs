//! Minimum-cost bipartite assignment between predicted boxes and detections.

use crate::geometry::{iou_box, BBox};

/// Result of one association round. Indices refer to the input slices.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Hungarian algorithm with row/column potentials for a rectangular cost
/// matrix with `rows <= cols`. Returns the column assigned to each row.
///
/// Runs in `O(rows² · cols)`. Exact ties are resolved by scan order, so
/// the result depends only on the input order.
fn hungarian_rows(cost: &[Vec<f64>], cols: usize) -> Vec<usize> {
    let rows = cost.len();
    // 1-based arrays; column 0 is the virtual start column
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for row in 1..=rows {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assigned = vec![usize::MAX; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            assigned[owner[j] - 1] = j - 1;
        }
    }
    assigned
}

/// Optimal assignment for an arbitrary `rows x cols` matrix. Every row is
/// matched when `rows <= cols`, otherwise every column.
pub fn solve_assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows <= cols {
        hungarian_rows(cost, cols).into_iter().enumerate().collect()
    } else {
        let transposed: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect();
        let mut pairs: Vec<(usize, usize)> =
            hungarian_rows(&transposed, rows).into_iter().enumerate().map(|(j, i)| (i, j)).collect();
        pairs.sort_unstable();
        pairs
    }
}

/// Match predicted track boxes to detection boxes minimising total
/// `1 - IoU`; pairs below `min_iou` are dropped after solving.
pub fn assign(predicted: &[BBox], detections: &[BBox], min_iou: f64) -> Matching {
    let iou: Vec<Vec<f64>> = predicted.iter().map(|p| detections.iter().map(|d| iou_box(p, d)).collect()).collect();
    let cost: Vec<Vec<f64>> = iou.iter().map(|row| row.iter().map(|v| 1.0 - v).collect()).collect();
    let mut track_used = vec![false; predicted.len()];
    let mut det_used = vec![false; detections.len()];
    let mut pairs = Vec::new();
    for (t, d) in solve_assignment(&cost) {
        if iou[t][d] >= min_iou && iou[t][d] > 0.0 {
            track_used[t] = true;
            det_used[d] = true;
            pairs.push((t, d));
        }
    }
    Matching {
        pairs,
        unmatched_tracks: (0..predicted.len()).filter(|&t| !track_used[t]).collect(),
        unmatched_detections: (0..detections.len()).filter(|&d| !det_used[d]).collect(),
    }
}
