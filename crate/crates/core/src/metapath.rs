//! Drug-to-drug meta-paths, their commuting (path-count) matrices, and the
//! binarized neighbour graphs the encoder attends over.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hin::{EntityKind, Hin, Relation, RelationMatrix};
use crate::tensor::Mask;

/// Largest per-kind entity count the brute-force enumerator accepts.
pub const BRUTE_FORCE_LIMIT: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Step {
    pub relation: Relation,
    pub transposed: bool,
}

impl Step {
    pub fn forward(relation: Relation) -> Self {
        Step {
            relation,
            transposed: false,
        }
    }

    pub fn transposed(relation: Relation) -> Self {
        Step {
            relation,
            transposed: true,
        }
    }

    pub fn from_kind(self) -> EntityKind {
        if self.transposed {
            self.relation.target()
        } else {
            self.relation.source()
        }
    }

    pub fn to_kind(self) -> EntityKind {
        if self.transposed {
            self.relation.source()
        } else {
            self.relation.target()
        }
    }

    fn reversed(self) -> Step {
        // P is symmetric, so its orientation carries no information.
        if self.relation == Relation::P {
            return self;
        }
        Step {
            transposed: !self.transposed,
            ..self
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}",
            self.relation.symbol(),
            if self.transposed { "ᵀ" } else { "" }
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetaPathSpec {
    name: String,
    steps: Vec<Step>,
}

impl MetaPathSpec {
    /// Checks that the chain starts and ends at drugs and that adjacent steps
    /// agree on the entity kind they share.
    pub fn new(name: impl Into<String>, steps: Vec<Step>) -> Result<Self> {
        let name = name.into();
        let (Some(first), Some(last)) = (steps.first(), steps.last()) else {
            return Err(Error::MetaPath(format!("{name} has no steps")));
        };
        if first.from_kind() != EntityKind::Drug || last.to_kind() != EntityKind::Drug {
            return Err(Error::MetaPath(format!(
                "{name} must start and end at drugs"
            )));
        }
        for (k, pair) in steps.windows(2).enumerate() {
            if pair[0].to_kind() != pair[1].from_kind() {
                return Err(Error::MetaPath(format!(
                    "{name}: step {k} ends at {} but step {} starts at {}",
                    pair[0].to_kind(),
                    k + 1,
                    pair[1].from_kind()
                )));
            }
        }
        Ok(MetaPathSpec { name, steps })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// True when reading the path backwards gives the same path.
    pub fn is_palindromic(&self) -> bool {
        let n = self.steps.len();
        (0..n).all(|k| self.steps[k] == self.steps[n - 1 - k].reversed())
    }

    /// Entity kinds visited, including both endpoints.
    pub fn kinds(&self) -> Vec<EntityKind> {
        std::iter::once(self.steps[0].from_kind())
            .chain(self.steps.iter().map(|s| s.to_kind()))
            .collect()
    }
}

impl fmt::Display for MetaPathSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = ", self.name)?;
        for (k, s) in self.steps.iter().enumerate() {
            if k > 0 {
                f.write_str("·")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// DID-1 (T·Tᵀ), DID-2 (T·P·Tᵀ), DID-3 (H·Hᵀ), DID-4 (C·Cᵀ).
pub fn builtin_specs() -> Vec<MetaPathSpec> {
    use Relation::*;
    let spec = |name: &str, steps| MetaPathSpec::new(name, steps).expect("builtin spec chains");
    vec![
        spec("DID-1", vec![Step::forward(T), Step::transposed(T)]),
        spec(
            "DID-2",
            vec![Step::forward(T), Step::forward(P), Step::transposed(T)],
        ),
        spec("DID-3", vec![Step::forward(H), Step::transposed(H)]),
        spec("DID-4", vec![Step::forward(C), Step::transposed(C)]),
    ]
}

/// Builtin specs by name, in the order given.
pub fn select_specs<S: AsRef<str>>(names: &[S]) -> Result<Vec<MetaPathSpec>> {
    let all = builtin_specs();
    names
        .iter()
        .map(|n| {
            let n = n.as_ref().trim();
            all.iter()
                .find(|s| s.name() == n)
                .cloned()
                .ok_or_else(|| Error::MetaPath(format!("unknown meta-path {n:?}")))
        })
        .collect()
}

/// Compressed-row sparse matrix of path counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<u64>,
}

impl CountMatrix {
    fn from_relation(
        m: &RelationMatrix,
        rows: usize,
        cols: usize,
        transposed: bool,
    ) -> Result<Self> {
        let (rows, cols) = if transposed {
            (cols, rows)
        } else {
            (rows, cols)
        };
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); rows];
        for &(i, j) in m.pairs() {
            let (r, c) = if transposed { (j, i) } else { (i, j) };
            if r >= rows || c >= cols {
                return Err(Error::MetaPath(format!(
                    "relation coordinate ({i}, {j}) outside registry bounds"
                )));
            }
            lists[r].push(c);
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(m.nnz());
        row_ptr.push(0);
        for mut list in lists {
            list.sort_unstable();
            col_idx.extend(list);
            row_ptr.push(col_idx.len());
        }
        let values = vec![1; col_idx.len()];
        Ok(CountMatrix {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Row-by-row (Gustavson) product with a dense accumulator.
    fn multiply(&self, other: &CountMatrix) -> CountMatrix {
        assert_eq!(self.cols, other.rows, "inner extents must agree");
        let mut acc = vec![0u64; other.cols];
        let mut touched: Vec<usize> = Vec::new();
        let mut row_ptr = Vec::with_capacity(self.rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..self.rows {
            for (&k, &a) in self.row_cols(i).iter().zip(self.row_values(i)) {
                for (&j, &b) in other.row_cols(k).iter().zip(other.row_values(k)) {
                    if acc[j] == 0 {
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_idx.push(j);
                values.push(acc[j]);
                acc[j] = 0;
            }
            touched.clear();
            row_ptr.push(col_idx.len());
        }
        CountMatrix {
            rows: self.rows,
            cols: other.cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    fn row_cols(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    fn row_values(&self, i: usize) -> &[u64] {
        &self.values[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        let cols = self.row_cols(i);
        cols.binary_search(&j)
            .map(|k| self.row_values(i)[k])
            .unwrap_or(0)
    }

    /// Nonzero entries as `(row, col, count)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            self.row_cols(i)
                .iter()
                .zip(self.row_values(i))
                .map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols && self.entries().all(|(i, j, v)| self.get(j, i) == v)
    }
}

/// Drug×drug path-count matrix for one meta-path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommutingMatrix {
    pub name: String,
    pub counts: CountMatrix,
}

impl CommutingMatrix {
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts.get(i, j)
    }

    pub fn drugs(&self) -> usize {
        self.counts.rows
    }

    /// `i<TAB>j<TAB>count` for every nonzero entry.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# {}\n# i\tj\tcount\n", self.name);
        for (i, j, v) in self.counts.entries() {
            out.push_str(&format!("{i}\t{j}\t{v}\n"));
        }
        out
    }
}

/// Left-to-right product of the step matrices in sparse integer arithmetic.
pub fn commuting_matrix(hin: &Hin, spec: &MetaPathSpec) -> Result<CommutingMatrix> {
    let spec = MetaPathSpec::new(spec.name.clone(), spec.steps.clone())?;
    let mut product: Option<CountMatrix> = None;
    for step in spec.steps() {
        let rel = step.relation;
        let m = CountMatrix::from_relation(
            hin.relation(rel),
            hin.count(rel.source()),
            hin.count(rel.target()),
            step.transposed,
        )?;
        product = Some(match product {
            None => m,
            Some(acc) => acc.multiply(&m),
        });
    }
    Ok(CommutingMatrix {
        name: spec.name,
        counts: product.expect("spec has at least one step"),
    })
}

/// Exhaustive depth-first count of concrete paths from drug `i` to drug `j`.
/// Refuses instances with more than [`BRUTE_FORCE_LIMIT`] entities of any
/// kind on the path.
pub fn brute_force_path_count(hin: &Hin, spec: &MetaPathSpec, i: usize, j: usize) -> Result<u64> {
    for kind in spec.kinds() {
        let count = hin.count(kind);
        if count > BRUTE_FORCE_LIMIT {
            return Err(Error::TooLarge {
                kind: kind.to_string(),
                count,
                limit: BRUTE_FORCE_LIMIT,
            });
        }
    }
    let n = hin.drug_count();
    if i >= n || j >= n {
        return Err(Error::Contract(format!(
            "drug index out of range for {n} drugs"
        )));
    }

    // Per step: successors of each entity, following the step's orientation.
    let adjacency: Vec<Vec<Vec<usize>>> = spec
        .steps()
        .iter()
        .map(|s| {
            let mut succ = vec![Vec::new(); hin.count(s.from_kind())];
            for &(a, b) in hin.relation(s.relation).pairs() {
                let (from, to) = if s.transposed { (b, a) } else { (a, b) };
                if from < succ.len() {
                    succ[from].push(to);
                }
            }
            succ
        })
        .collect();

    fn walk(adjacency: &[Vec<Vec<usize>>], depth: usize, at: usize, goal: usize) -> u64 {
        if depth == adjacency.len() {
            return u64::from(at == goal);
        }
        adjacency[depth]
            .get(at)
            .map(|next| {
                next.iter()
                    .map(|&n| walk(adjacency, depth + 1, n, goal))
                    .sum()
            })
            .unwrap_or(0)
    }
    Ok(walk(&adjacency, 0, i, j))
}

/// Binarized meta-path adjacency with a self-loop on every drug.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborGraph {
    pub name: String,
    pub adjacency: Arc<Mask>,
}

impl NeighborGraph {
    pub fn drugs(&self) -> usize {
        self.adjacency.rows()
    }

    /// Neighbours of `i`, including `i` itself.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency
            .row(i)
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(j, _)| j)
    }
}

/// Edge `(i, j)`, `i ≠ j`, iff `counts[i, j] ≥ threshold`; all self-loops added.
pub fn neighbor_graph(m: &CommutingMatrix, threshold: u64) -> Result<NeighborGraph> {
    if threshold == 0 {
        return Err(Error::Parameter(
            "binarization threshold must be at least 1".into(),
        ));
    }
    let n = m.drugs();
    let mut mask = Mask::empty(n, n);
    for i in 0..n {
        mask.set(i, i, true);
    }
    for (i, j, v) in m.counts.entries() {
        if v >= threshold {
            mask.set(i, j, true);
        }
    }
    Ok(NeighborGraph {
        name: m.name.clone(),
        adjacency: Arc::new(mask),
    })
}
