//! Enumeration of irreducible incentive-constraint pairs on the type
//! lattice.
//!
//! An ordered pair of nodes is irreducible when no third lattice node lies
//! strictly on the open segment between their p-space points; the
//! constraints of such pairs imply all remaining pairwise constraints. On a
//! lattice with uniform p-spacing this reduces to the offset-gcd test, but
//! the test here works directly in p-space so nonuniformly spaced grids
//! (e.g. uniform in skill) keep the implication property.

use crate::grid::SkillGrid;

/// Ordered irreducible pairs with their index offsets.
#[derive(Debug, Clone)]
pub struct IrreduciblePairSet {
    /// `(from, to)` node indices; both orders of every unordered pair appear.
    pub pairs: Vec<(u32, u32)>,
    /// Index offset `(di, dj)` of `to` relative to `from`.
    pub offsets: Vec<(i32, i32)>,
}

impl IrreduciblePairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Whether some grid node lies strictly inside the p-space segment between
/// nodes `a` and `b`. Candidate nodes are confined to the index bounding box.
fn has_interior_node(grid: &SkillGrid, a: usize, b: usize) -> bool {
    let (ia, ja) = grid.coords(a);
    let (ib, jb) = grid.coords(b);
    let (pa_c, pa_m) = grid.p(a);
    let (pb_c, pb_m) = grid.p(b);
    let dc = pb_c - pa_c;
    let dm = pb_m - pa_m;
    let (ilo, ihi) = (ia.min(ib), ia.max(ib));
    let (jlo, jhi) = (ja.min(jb), ja.max(jb));
    // Strictly-between index ranges per axis; a fixed axis keeps its value.
    let irange: Vec<usize> = if ia == ib {
        vec![ia]
    } else {
        ((ilo + 1)..ihi).collect()
    };
    let jrange: Vec<usize> = if ja == jb {
        vec![ja]
    } else {
        ((jlo + 1)..jhi).collect()
    };
    if ia != ib && irange.is_empty() {
        return false;
    }
    if ja != jb && jrange.is_empty() {
        return false;
    }
    for &i in &irange {
        for &j in &jrange {
            if (i, j) == (ia, ja) || (i, j) == (ib, jb) {
                continue;
            }
            let pc = grid.p_c[i];
            let pm = grid.p_m[j];
            // Collinearity via the cross product, with parameters strictly
            // inside (0, 1) guaranteed by the index ranges above.
            let cross = (pc - pa_c) * dm - (pm - pa_m) * dc;
            let scale = dc.abs().max(dm.abs());
            if cross.abs() <= 1e-12 * scale * scale.max(1.0) {
                // Degenerate directions: for axis-aligned segments the node
                // is automatically on the segment; otherwise confirm the
                // parameter matches on the moving axis.
                if dc == 0.0 || dm == 0.0 {
                    return true;
                }
                let t = (pc - pa_c) / dc;
                if t > 0.0 && t < 1.0 {
                    return true;
                }
            }
        }
    }
    false
}

/// Enumerate all ordered irreducible pairs, optionally capped to index
/// offsets with `|di|, |dj| <= max_offset` (experimentation only; leave the
/// cap off for certified runs).
pub fn enumerate_irreducible(grid: &SkillGrid, max_offset: Option<usize>) -> IrreduciblePairSet {
    let n = grid.node_count();
    let mut pairs = Vec::new();
    let mut offsets = Vec::new();
    for a in 0..n {
        let (ia, ja) = grid.coords(a);
        for b in (a + 1)..n {
            let (ib, jb) = grid.coords(b);
            let di = ib as i32 - ia as i32;
            let dj = jb as i32 - ja as i32;
            if let Some(cap) = max_offset {
                if di.unsigned_abs() as usize > cap || dj.unsigned_abs() as usize > cap {
                    continue;
                }
            }
            if !has_interior_node(grid, a, b) {
                pairs.push((a as u32, b as u32));
                offsets.push((di, dj));
                pairs.push((b as u32, a as u32));
                offsets.push((-di, -dj));
            }
        }
    }
    IrreduciblePairSet { pairs, offsets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpacing;
    use crate::params::ModelParams;

    fn uniform_p_grid(n_c: usize, n_m: usize) -> SkillGrid {
        // Build skill coordinates whose p-images are uniformly spaced, so the
        // offset-gcd characterization applies exactly.
        let params = ModelParams::calibrated();
        let p_of = |k: usize, n: usize| 0.5 - 0.3 * k as f64 / (n - 1).max(1) as f64;
        let alpha = |k: usize, n: usize| (params.kappa / p_of(k, n)).powf(1.0 / params.rho);
        let alpha_c: Vec<f64> = (0..n_c).map(|k| alpha(k, n_c)).collect();
        let alpha_m: Vec<f64> = (0..n_m).map(|k| alpha(k, n_m)).collect();
        let nn = n_c * n_m;
        SkillGrid::new(alpha_c, alpha_m, vec![1.0 / nn as f64; nn], &params).unwrap()
    }

    /// Brute-force oracle: scan every grid node for strict interior
    /// collinearity, without index bounding boxes.
    fn brute_force_irreducible(grid: &SkillGrid, a: usize, b: usize) -> bool {
        let (pa_c, pa_m) = grid.p(a);
        let (pb_c, pb_m) = grid.p(b);
        for m in 0..grid.node_count() {
            if m == a || m == b {
                continue;
            }
            let (pc, pm) = grid.p(m);
            let dc = pb_c - pa_c;
            let dm = pb_m - pa_m;
            let cross = (pc - pa_c) * dm - (pm - pa_m) * dc;
            let scale = dc.abs().max(dm.abs());
            if cross.abs() > 1e-12 * scale * scale.max(1.0) {
                continue;
            }
            let t = if dc.abs() > dm.abs() {
                (pc - pa_c) / dc
            } else {
                (pm - pa_m) / dm
            };
            if t > 1e-12 && t < 1.0 - 1e-12 {
                return false;
            }
        }
        true
    }

    #[test]
    fn two_by_two_has_all_twelve() {
        let g = uniform_p_grid(2, 2);
        let set = enumerate_irreducible(&g, None);
        assert_eq!(set.len(), 12);
    }

    #[test]
    fn three_by_three_uniform_matches_gcd_count() {
        let g = uniform_p_grid(3, 3);
        let set = enumerate_irreducible(&g, None);
        // 72 ordered pairs minus the 16 with offsets (+-2,0),(0,+-2),(+-2,+-2).
        assert_eq!(set.len(), 56);
        for (k, &(a, b)) in set.pairs.iter().enumerate() {
            let (di, dj) = set.offsets[k];
            assert!(brute_force_irreducible(&g, a as usize, b as usize));
            let g_ = gcd(di.unsigned_abs(), dj.unsigned_abs());
            assert_eq!(g_, 1, "offset ({di},{dj}) not primitive on uniform grid");
        }
    }

    fn gcd(a: u32, b: u32) -> u32 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    #[test]
    fn chain_grid_keeps_adjacent_only() {
        let g = uniform_p_grid(1, 7);
        let set = enumerate_irreducible(&g, None);
        assert_eq!(set.len(), 2 * 6);
        for &(a, b) in &set.pairs {
            assert_eq!((a as i32 - b as i32).abs(), 1);
        }
    }

    #[test]
    fn nonuniform_grid_agrees_with_brute_force() {
        let params = ModelParams::calibrated();
        let g = SkillGrid::regular((4, 5), (1.0, 2.0), (1.0, 2.5), GridSpacing::Uniform, &params)
            .unwrap();
        let set = enumerate_irreducible(&g, None);
        let mut fast: Vec<(u32, u32)> = set.pairs.clone();
        fast.sort_unstable();
        let mut slow = Vec::new();
        for a in 0..g.node_count() {
            for b in 0..g.node_count() {
                if a != b && brute_force_irreducible(&g, a, b) {
                    slow.push((a as u32, b as u32));
                }
            }
        }
        slow.sort_unstable();
        assert_eq!(fast, slow);
        // Uniform-in-skill grids have nonuniform p-spacing, so long diagonal
        // offsets whose midpoints miss the segment stay irreducible.
        let has_2_2 = set.offsets.iter().any(|&(di, dj)| di.abs() == 2 && dj.abs() == 2);
        assert!(has_2_2, "expected (2,2) offsets to survive on a nonuniform grid");
    }

    #[test]
    fn offset_cap_filters_pairs() {
        let g = uniform_p_grid(4, 4);
        let capped = enumerate_irreducible(&g, Some(1));
        assert!(capped
            .offsets
            .iter()
            .all(|&(di, dj)| di.abs() <= 1 && dj.abs() <= 1));
        let full = enumerate_irreducible(&g, None);
        assert!(full.len() > capped.len());
    }

    #[test]
    fn symmetric_pairs() {
        let g = uniform_p_grid(3, 4);
        let set = enumerate_irreducible(&g, None);
        let mut sorted: Vec<(u32, u32)> = set.pairs.clone();
        sorted.sort_unstable();
        for &(a, b) in &set.pairs {
            assert!(sorted.binary_search(&(b, a)).is_ok());
        }
    }
}
