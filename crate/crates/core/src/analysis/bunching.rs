//! Bunching detection and classification.
//!
//! Two types are bunched when their allocations coincide; on the lattice a
//! pair is flagged when the allocation distance is below `rel_tol` times the
//! type distance. Flagged pairs are merged into equivalence classes by
//! union-find, and each class is labelled blunt when it spans both
//! comparative-advantage regions (its relative-skill ratios straddle the
//! grid median) and targeted otherwise.

use crate::error::{Error, Result};
use crate::field::AllocationField;
use crate::grid::SkillGrid;
use std::collections::BTreeMap;

/// Label of a bunching class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BunchLabel {
    /// Members sit on both sides of relative-skill parity.
    Blunt,
    /// Members share one comparative-advantage region.
    Targeted,
}

/// One equivalence class of nodes sharing an allocation.
#[derive(Debug, Clone)]
pub struct BunchClass {
    pub members: Vec<usize>,
    pub mass: f64,
    pub label: Option<BunchLabel>,
}

/// Bunching diagnosis of a solved allocation.
#[derive(Debug, Clone)]
pub struct BunchingReport {
    /// Per-node flag: belongs to a class of size at least two.
    pub flags: Vec<bool>,
    pub classes: Vec<BunchClass>,
    /// Class id per node.
    pub class_of: Vec<Option<usize>>,
    /// Flagged pairs `(a, b)` with `a < b`.
    pub edges: Vec<(usize, usize)>,
    /// Probability mass of bunched nodes.
    pub bunched_mass: f64,
    /// Shares of the bunched mass in blunt / targeted classes (set by
    /// [`classify_bunching`]).
    pub blunt_share: f64,
    pub targeted_share: f64,
    pub rel_tol: f64,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins, keeping ids deterministic.
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Exact-pair fallback threshold; larger grids go through spatial hashing.
const EXACT_PAIR_LIMIT: usize = 2500;

fn pair_is_bunched(
    alloc: &AllocationField,
    grid: &SkillGrid,
    a: usize,
    b: usize,
    rel_tol: f64,
) -> bool {
    let dx = alloc.x_c[a] - alloc.x_c[b];
    let dy = alloc.x_m[a] - alloc.x_m[b];
    let (pca, pma) = grid.p(a);
    let (pcb, pmb) = grid.p(b);
    let dp = ((pca - pcb).powi(2) + (pma - pmb).powi(2)).sqrt();
    (dx * dx + dy * dy).sqrt() < rel_tol * dp
}

/// Detect bunched pairs, merge them into classes and report flags, classes
/// and edges. `rel_tol` defaults to 1e-4 at the calling sites.
pub fn detect_bunching(
    alloc: &AllocationField,
    grid: &SkillGrid,
    rel_tol: f64,
) -> Result<BunchingReport> {
    if alloc.n_c != grid.n_c || alloc.n_m != grid.n_m {
        return Err(Error::Argument("allocation and grid shapes differ".into()));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::Argument(format!(
            "relative tolerance must be positive, got {rel_tol}"
        )));
    }
    let n = grid.node_count();
    let mut uf = UnionFind::new(n);
    let mut edges = Vec::new();

    if n <= EXACT_PAIR_LIMIT {
        for a in 0..n {
            for b in (a + 1)..n {
                if pair_is_bunched(alloc, grid, a, b, rel_tol) {
                    uf.union(a, b);
                    edges.push((a, b));
                }
            }
        }
    } else {
        // Allocation-space spatial hashing. Any flagged pair is closer than
        // rel_tol times the p-space diameter, so cell-neighborhood scans with
        // that cell size see every candidate.
        let diam = {
            let dc = grid.p_c[0] - grid.p_c[grid.n_c - 1];
            let dm = grid.p_m[0] - grid.p_m[grid.n_m - 1];
            (dc * dc + dm * dm).sqrt()
        };
        let h = (rel_tol * diam).max(1e-300);
        let key = |v: f64| (v / h).floor() as i64;
        let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
        for idx in 0..n {
            cells
                .entry((key(alloc.x_c[idx]), key(alloc.x_m[idx])))
                .or_default()
                .push(idx);
        }
        for (&(ci, cj), members) in &cells {
            for di in 0..=1i64 {
                for dj in -1..=1i64 {
                    if di == 0 && dj < 0 {
                        continue; // scan each unordered cell pair once
                    }
                    let other = match cells.get(&(ci + di, cj + dj)) {
                        Some(v) => v,
                        None => continue,
                    };
                    for &a in members {
                        for &b in other {
                            if (di == 0 && dj == 0 && b <= a) || a == b {
                                continue;
                            }
                            let (lo, hi) = (a.min(b), a.max(b));
                            if pair_is_bunched(alloc, grid, lo, hi, rel_tol) {
                                uf.union(lo, hi);
                                edges.push((lo, hi));
                            }
                        }
                    }
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
    }

    // Classes of size >= 2, ordered by their smallest member.
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for idx in 0..n {
        groups.entry(uf.find(idx)).or_default().push(idx);
    }
    let mut flags = vec![false; n];
    let mut class_of = vec![None; n];
    let mut classes = Vec::new();
    let mut bunched_mass = 0.0;
    for (_, members) in groups {
        if members.len() < 2 {
            continue;
        }
        let id = classes.len();
        let mut mass = 0.0;
        for &m in &members {
            flags[m] = true;
            class_of[m] = Some(id);
            mass += grid.mass(m);
        }
        bunched_mass += mass;
        classes.push(BunchClass {
            members,
            mass,
            label: None,
        });
    }
    Ok(BunchingReport {
        flags,
        classes,
        class_of,
        edges,
        bunched_mass,
        blunt_share: 0.0,
        targeted_share: 0.0,
        rel_tol,
    })
}

/// Fill in blunt/targeted labels: a class is blunt when it has members on
/// strictly opposite sides of the grid-median relative-skill ratio
/// `alpha_m / alpha_c`. Updates the mass shares of the report.
pub fn classify_bunching(report: &mut BunchingReport, grid: &SkillGrid) {
    let n = grid.node_count();
    let mut ratios: Vec<f64> = (0..n)
        .map(|idx| {
            let (ac, am) = grid.alpha(idx);
            am / ac
        })
        .collect();
    let node_ratio = ratios.clone();
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if n % 2 == 1 {
        ratios[n / 2]
    } else {
        0.5 * (ratios[n / 2 - 1] + ratios[n / 2])
    };

    let mut blunt_mass = 0.0;
    let mut targeted_mass = 0.0;
    for class in &mut report.classes {
        let mut below = false;
        let mut above = false;
        for &m in &class.members {
            if node_ratio[m] < median {
                below = true;
            }
            if node_ratio[m] > median {
                above = true;
            }
        }
        let label = if below && above {
            BunchLabel::Blunt
        } else {
            BunchLabel::Targeted
        };
        class.label = Some(label);
        match label {
            BunchLabel::Blunt => blunt_mass += class.mass,
            BunchLabel::Targeted => targeted_mass += class.mass,
        }
    }
    if report.bunched_mass > 0.0 {
        report.blunt_share = blunt_mass / report.bunched_mass;
        report.targeted_share = targeted_mass / report.bunched_mass;
    }
}
