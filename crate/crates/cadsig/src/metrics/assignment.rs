//! Minimum-cost bipartite assignment and entity-list matching.

use crate::lang::curve2d::{curve_bbox, Bbox2};
use crate::lang::{Curve, Loop};

/// Finite stand-in for the infinite cost of matching against padding.
pub const PAD_COST: f64 = 1e12;

/// Solve the square assignment problem, returning `row -> column`.
///
/// Potentials-based O(n^3) shortest augmenting path construction.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    for row in cost {
        assert_eq!(row.len(), n, "hungarian needs a square matrix");
    }
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut assigned_row = vec![0usize; n + 1]; // column -> row (1-based, 0 = free)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        assigned_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
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
            for j in 0..=n {
                if used[j] {
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if assigned_row[j] > 0 {
            row_to_col[assigned_row[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Anything with a 2D bounding box can be list-matched.
pub trait EntityBbox {
    fn entity_bbox(&self) -> Bbox2;
}

impl EntityBbox for Curve {
    fn entity_bbox(&self) -> Bbox2 {
        curve_bbox(self)
    }
}

impl EntityBbox for Loop {
    fn entity_bbox(&self) -> Bbox2 {
        let mut bb = Bbox2::empty();
        for c in &self.curves {
            bb.merge(&curve_bbox(c));
        }
        bb
    }
}

/// One matched slot: indices into the ground-truth and predicted lists.
/// `None` on a side means the slot was padding (over/under-prediction).
pub type MatchedPair = (Option<usize>, Option<usize>);

/// Hungarian-match two entity lists padded to equal length.
///
/// The cost of a real pair is the sum of Euclidean distances between the
/// bounding-box bottom-left corners and top-right corners; pairs involving
/// padding cost effectively infinity.
pub fn match_entity_list<E: EntityBbox>(gt: &[E], pred: &[E]) -> Vec<MatchedPair> {
    let n_max = gt.len().max(pred.len());
    if n_max == 0 {
        return Vec::new();
    }
    let mut cost = vec![vec![PAD_COST; n_max]; n_max];
    for (i, g) in gt.iter().enumerate() {
        let gb = g.entity_bbox();
        for (j, p) in pred.iter().enumerate() {
            let pb = p.entity_bbox();
            cost[i][j] =
                gb.bottom_left().dist(&pb.bottom_left()) + gb.top_right().dist(&pb.top_right());
        }
    }
    let row_to_col = hungarian(&cost);
    row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| ((i < gt.len()).then_some(i), (j < pred.len()).then_some(j)))
        .collect()
}

/// Total assignment cost under the same padding convention (diagnostics
/// and oracle comparisons).
pub fn matching_cost<E: EntityBbox>(gt: &[E], pred: &[E], pairs: &[MatchedPair]) -> f64 {
    pairs
        .iter()
        .map(|(gi, pi)| match (gi, pi) {
            (Some(g), Some(p)) => {
                let gb = gt[*g].entity_bbox();
                let pb = pred[*p].entity_bbox();
                gb.bottom_left().dist(&pb.bottom_left()) + gb.top_right().dist(&pb.top_right())
            }
            _ => PAD_COST,
        })
        .sum()
}
