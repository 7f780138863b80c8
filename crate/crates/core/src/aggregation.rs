//! Cell aggregation.
//!
//! Every cut cell is glued to a root cell (an internal cell) through a chain
//! of facet neighbors sharing a facet with nonzero wetted measure. Aggregates
//! grow in rounds: in each round every still untouched cut cell that has a
//! touched neighbor joins the aggregate of the neighbor whose root is
//! closest; all decisions of a round are committed at its end.
//!
//! Entities (vertices, edges, faces) of active cells that belong to no root
//! cell are *outer*; each one is owned by one of the aggregates containing it.

use std::collections::BTreeMap;

use crate::geometry::{CellClass, Classification};
use crate::mesh::{BackgroundMesh, Neighbor, VefId};
use crate::quadrature::{facet_measure, CutDecomposition};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateMap {
    root_of_cell: Vec<Option<usize>>,
    aggregate_of_cell: Vec<Option<usize>>,
    roots: Vec<usize>,
    members: Vec<Vec<usize>>,
    diameters: Vec<usize>,
    outer_owners: BTreeMap<VefId, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateStatistics {
    pub num_aggregates: usize,
    pub max_size: usize,
    pub mean_size: f64,
    /// Largest Chebyshev distance (in cells) between a member and its root.
    pub max_root_distance: usize,
}

impl AggregateMap {
    /// Root cell of an active cell.
    pub fn root_of_cell(&self, cell: usize) -> Option<usize> {
        self.root_of_cell.get(cell).copied().flatten()
    }

    pub fn aggregate_of_cell(&self, cell: usize) -> Option<usize> {
        self.aggregate_of_cell.get(cell).copied().flatten()
    }

    pub fn num_aggregates(&self) -> usize {
        self.roots.len()
    }

    pub fn root(&self, aggregate: usize) -> usize {
        self.roots[aggregate]
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    /// Member cells in ascending order (root included).
    pub fn members(&self, aggregate: usize) -> &[usize] {
        &self.members[aggregate]
    }

    pub fn diameter(&self, aggregate: usize) -> usize {
        self.diameters[aggregate]
    }

    pub fn is_root(&self, cell: usize) -> bool {
        self.root_of_cell(cell) == Some(cell)
    }

    pub fn is_singleton(&self, aggregate: usize) -> bool {
        self.members[aggregate].len() == 1
    }

    pub fn outer_owner(&self, vef: VefId) -> Option<usize> {
        self.outer_owners.get(&vef).copied()
    }

    pub fn outer_owners(&self) -> &BTreeMap<VefId, usize> {
        &self.outer_owners
    }
}

/// Runs the aggregation rounds.
///
/// With `eta0 > 0`, cut cells whose inside volume fraction exceeds `eta0`
/// are touched from the start and act as roots of their own aggregates.
pub fn aggregate_cells(
    mesh: &BackgroundMesh,
    classification: &Classification,
    decomposition: &CutDecomposition,
    eta0: f64,
) -> Result<AggregateMap> {
    let n = mesh.num_cells();
    let mut root: Vec<Option<usize>> = vec![None; n];
    let mut pending = Vec::new();
    for cell in 0..n {
        match classification.cell_class(cell) {
            CellClass::Internal => root[cell] = Some(cell),
            CellClass::Cut => {
                let eta =
                    decomposition.inside_volume(mesh, classification, cell) / mesh.cell_volume();
                if eta0 > 0.0 && eta > eta0 {
                    root[cell] = Some(cell);
                } else {
                    pending.push(cell);
                }
            }
            CellClass::External => {}
        }
    }
    if pending.is_empty() && root.iter().all(Option::is_none) {
        return Err(Error::InvalidMesh(
            "the domain covers no background cell".into(),
        ));
    }

    // wetted facet neighbors of every pending cell, fixed across rounds
    let mut wet_neighbors: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &cell in &pending {
        let mut list = Vec::new();
        for (facet, nb) in mesh.cell_neighbors_through_facets(cell)? {
            if let Neighbor::Cell(other) = nb {
                if classification.is_active(other)
                    && facet_measure(mesh, classification, facet)? > 0.0
                {
                    list.push(other);
                }
            }
        }
        wet_neighbors.insert(cell, list);
    }

    while !pending.is_empty() {
        let mut updates = Vec::new();
        for &cell in &pending {
            let best = wet_neighbors[&cell]
                .iter()
                .filter_map(|&nb| root[nb].map(|r| (center_distance(mesh, cell, r), nb, r)))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((_, _, r)) = best {
                updates.push((cell, r));
            }
        }
        if updates.is_empty() {
            return Err(Error::UnreachableCutCell { cell: pending[0] });
        }
        for &(cell, r) in &updates {
            root[cell] = Some(r);
        }
        pending.retain(|&c| root[c].is_none());
    }

    let roots: Vec<usize> = (0..n).filter(|&c| root[c] == Some(c)).collect();
    let mut index_of_root = vec![usize::MAX; n];
    for (a, &r) in roots.iter().enumerate() {
        index_of_root[r] = a;
    }
    let mut members = vec![Vec::new(); roots.len()];
    let mut aggregate_of_cell = vec![None; n];
    let mut diameters = vec![0; roots.len()];
    for cell in 0..n {
        if let Some(r) = root[cell] {
            let a = index_of_root[r];
            members[a].push(cell);
            aggregate_of_cell[cell] = Some(a);
            diameters[a] = diameters[a].max(chebyshev(mesh, cell, r));
        }
    }
    let mut map = AggregateMap {
        root_of_cell: root,
        aggregate_of_cell,
        roots,
        members,
        diameters,
        outer_owners: BTreeMap::new(),
    };
    assign_outer_vef_owners(mesh, classification, &mut map)?;
    Ok(map)
}

/// Squared Euclidean distance between cell centers, summed in a fixed order
/// so that symmetric configurations tie exactly.
fn center_distance(mesh: &BackgroundMesh, a: usize, b: usize) -> f64 {
    let (ca, cb) = (mesh.cell_coords(a), mesh.cell_coords(b));
    let h = mesh.h();
    let mut terms: Vec<f64> = (0..mesh.dim())
        .map(|k| {
            let d = (ca[k] as f64 - cb[k] as f64) * h[k];
            d * d
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

fn chebyshev(mesh: &BackgroundMesh, a: usize, b: usize) -> usize {
    let (ca, cb) = (mesh.cell_coords(a), mesh.cell_coords(b));
    (0..mesh.dim())
        .map(|k| ca[k].abs_diff(cb[k]))
        .max()
        .unwrap_or(0)
}

/// Maps every outer entity to the smallest aggregate containing it (ties to
/// the smaller root cell).
pub fn assign_outer_vef_owners(
    mesh: &BackgroundMesh,
    classification: &Classification,
    map: &mut AggregateMap,
) -> Result<()> {
    let mut in_root = std::collections::BTreeSet::new();
    for &r in &map.roots {
        in_root.extend(mesh.vefs_of_cell(r)?);
    }
    let mut owners = BTreeMap::new();
    for cell in 0..mesh.num_cells() {
        if !classification.is_active(cell) || map.is_root(cell) {
            continue;
        }
        let mut vefs = mesh.vefs_of_cell(cell)?;
        vefs.push(VefId {
            dim: mesh.dim(),
            index: cell,
        });
        for vef in vefs {
            if in_root.contains(&vef) || owners.contains_key(&vef) {
                continue;
            }
            let owner = mesh
                .cells_of_vef(vef)?
                .into_iter()
                .filter_map(|c| map.aggregate_of_cell(c))
                .min_by_key(|&a| (map.members[a].len(), map.roots[a]))
                .ok_or_else(|| {
                    Error::Internal(format!("outer entity {vef:?} lies in no aggregate"))
                })?;
            owners.insert(vef, owner);
        }
    }
    map.outer_owners = owners;
    Ok(())
}

pub fn aggregate_statistics(map: &AggregateMap) -> AggregateStatistics {
    let num = map.num_aggregates();
    let total: usize = map.members.iter().map(Vec::len).sum();
    AggregateStatistics {
        num_aggregates: num,
        max_size: map.members.iter().map(Vec::len).max().unwrap_or(0),
        mean_size: if num == 0 {
            0.0
        } else {
            total as f64 / num as f64
        },
        max_root_distance: map.diameters.iter().copied().max().unwrap_or(0),
    }
}
