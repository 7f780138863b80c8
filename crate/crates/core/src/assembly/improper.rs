use std::collections::BTreeSet;

use super::Stabilization;
use crate::aggregation::AggregateMap;
use crate::geometry::{CellClass, Classification};
use crate::mesh::{BackgroundMesh, Neighbor};
use crate::quadrature::facet_measure;
use crate::Result;

/// Facets and aggregates receiving pressure stabilization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImproperSets {
    /// `(facet, lower cell, upper cell)` in ascending facet order.
    pub facets: Vec<(usize, usize, usize)>,
    pub aggregates: BTreeSet<usize>,
}

/// An aggregate is improper unless it is a single internal cell.
fn is_improper(map: &AggregateMap, classification: &Classification, aggregate: usize) -> bool {
    !map.is_singleton(aggregate)
        || classification.cell_class(map.root(aggregate)) != CellClass::Internal
}

fn roots_share_facet(mesh: &BackgroundMesh, a: usize, b: usize) -> bool {
    let (ca, cb) = (mesh.cell_coords(a), mesh.cell_coords(b));
    (0..mesh.dim())
        .map(|k| ca[k].abs_diff(cb[k]))
        .sum::<usize>()
        == 1
}

/// Collects the improper facets and aggregates for the given scheme and
/// velocity order `q`.
pub fn identify_improper_sets(
    mesh: &BackgroundMesh,
    classification: &Classification,
    map: &AggregateMap,
    stabilization: Stabilization,
    q: usize,
) -> Result<ImproperSets> {
    let mut sets = ImproperSets::default();
    if stabilization == Stabilization::None {
        return Ok(sets);
    }
    let dim = mesh.dim();
    let filter_roots = stabilization == Stabilization::Alg3 && dim == 3 && q + 3 <= 2 * dim;
    for cell in 0..mesh.num_cells() {
        let Some(a) = map.aggregate_of_cell(cell) else {
            continue;
        };
        for (i, (facet, nb)) in mesh
            .cell_neighbors_through_facets(cell)?
            .into_iter()
            .enumerate()
        {
            if i % 2 == 0 {
                continue;
            }
            let Neighbor::Cell(other) = nb else { continue };
            let Some(b) = map.aggregate_of_cell(other) else {
                continue;
            };
            if a == b
                || !(is_improper(map, classification, a) || is_improper(map, classification, b))
            {
                continue;
            }
            if filter_roots && roots_share_facet(mesh, map.root(a), map.root(b)) {
                continue;
            }
            if facet_measure(mesh, classification, facet)? > 0.0 {
                sets.facets.push((facet, cell, other));
            }
        }
    }
    sets.facets.sort_unstable();
    if stabilization == Stabilization::Alg2 {
        sets.aggregates = (0..map.num_aggregates())
            .filter(|&a| is_improper(map, classification, a))
            .collect();
    }
    Ok(sets)
}
