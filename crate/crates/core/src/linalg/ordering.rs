//! Fill-reducing orderings from unknown coordinates.

use super::SparseMatrix;
use crate::Point;

/// Subsets at most this large are not split further.
const LEAF_SIZE: usize = 64;

/// Nested dissection guided by coordinates: each subset is split at the
/// median of its widest coordinate and the vertices of the larger half that
/// touch the other half form the separator, which is numbered last.
/// Vertices listed in `last` (dense rows such as multipliers) are numbered
/// after everything else. Within a leaf or separator unknowns keep their
/// original relative order. Returns `perm` with `perm[new] = old`.
pub fn nested_dissection(matrix: &SparseMatrix, coords: &[Point], last: &[usize]) -> Vec<usize> {
    let n = matrix.nrows();
    assert_eq!(coords.len(), n, "one coordinate per unknown");
    let mut is_last = vec![false; n];
    for &v in last {
        is_last[v] = true;
    }
    let mut state = State {
        matrix,
        coords,
        mark: vec![0; n],
        stamp: 0,
        out: Vec::with_capacity(n),
    };
    let start: Vec<usize> = (0..n).filter(|&v| !is_last[v]).collect();
    state.dissect(start);
    let mut seen = vec![false; n];
    let mut tail: Vec<usize> = last
        .iter()
        .copied()
        .filter(|&v| !std::mem::replace(&mut seen[v], true))
        .collect();
    state.out.append(&mut tail);
    state.out
}

struct State<'a> {
    matrix: &'a SparseMatrix,
    coords: &'a [Point],
    mark: Vec<u32>,
    stamp: u32,
    out: Vec<usize>,
}

impl State<'_> {
    fn next_stamp(&mut self) -> u32 {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.stamp = 1;
        }
        self.stamp
    }

    fn dissect(&mut self, mut set: Vec<usize>) {
        if set.len() <= LEAF_SIZE {
            set.sort_unstable();
            self.out.extend(set);
            return;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &v in &set {
            for d in 0..3 {
                lo[d] = lo[d].min(self.coords[v][d]);
                hi[d] = hi[d].max(self.coords[v][d]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap();
        if hi[axis] - lo[axis] <= 0.0 {
            set.sort_unstable();
            self.out.extend(set);
            return;
        }
        set.sort_by(|&a, &b| {
            self.coords[a][axis]
                .total_cmp(&self.coords[b][axis])
                .then(a.cmp(&b))
        });
        // keep coincident points on one side
        let mut mid = set.len() / 2;
        let c = self.coords[set[mid]][axis];
        while mid > 0 && self.coords[set[mid - 1]][axis] == c {
            mid -= 1;
        }
        if mid == 0 {
            mid = set.len() / 2;
        }
        let right = set.split_off(mid);
        let left = set;
        let (small, large) = if left.len() <= right.len() {
            (left, right)
        } else {
            (right, left)
        };
        let stamp = self.next_stamp();
        for &v in &small {
            self.mark[v] = stamp;
        }
        let mut rest = Vec::with_capacity(large.len());
        let mut separator = Vec::new();
        for v in large {
            let (rows, _) = self.matrix.column(v);
            if rows.iter().any(|&r| self.mark[r] == stamp) {
                separator.push(v);
            } else {
                rest.push(v);
            }
        }
        self.dissect(small);
        self.dissect(rest);
        separator.sort_unstable();
        self.out.extend(separator);
    }
}
