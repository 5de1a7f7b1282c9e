//! Minimum feedback repair sets.
//!
//! The coordinates graph has one vertex per grid row (`R_0..R_n`), one per
//! grid column (`C_0..C_m`) and one edge per erroneous packet, joining the
//! row and the column of its cell. A set of errors is repairable by peeling
//! exactly when its edges form a forest, so a minimum feedback repair set is
//! the complement of a maximum-weight spanning forest of that graph.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::codec::{CodeGrid, CodeParams};
use crate::error::{invalid, Error, Result};
use crate::packet::{CorruptionMask, ErrorConfiguration, GridCoord, PacketIndex, Status};

/// Exact repair cost.
pub type Weight = Ratio<u64>;

/// Cost of requesting a packet again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CostFunction {
    /// Every packet costs one.
    #[default]
    AllOrNone,
    /// Parities cost one, sources `1 + 1/(N+1)`: parities are preferred.
    ModifiedAllOrNone,
    /// A packet costs its number of corrupted bits. Requires the receiver to
    /// know the corruption masks.
    Graded,
}

impl FromStr for CostFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all-or-none" => Ok(Self::AllOrNone),
            "modified-all-or-none" => Ok(Self::ModifiedAllOrNone),
            "graded" => Ok(Self::Graded),
            other => invalid(format!("unknown cost function `{other}`")),
        }
    }
}

impl fmt::Display for CostFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::AllOrNone => "all-or-none",
            Self::ModifiedAllOrNone => "modified-all-or-none",
            Self::Graded => "graded",
        })
    }
}

/// Repair cost of packet `idx`.
pub fn packet_weight(
    cost: CostFunction,
    idx: PacketIndex,
    params: &CodeParams,
    mask: Option<&CorruptionMask>,
) -> Result<Weight> {
    match cost {
        CostFunction::AllOrNone => Ok(Weight::one()),
        CostFunction::ModifiedAllOrNone => {
            let n = params.cell_count() as u64;
            if idx.0 < params.source_count() {
                Ok(Ratio::new(n + 2, n + 1))
            } else {
                Ok(Weight::one())
            }
        }
        CostFunction::Graded => {
            let mask = mask.ok_or_else(|| {
                Error::InvalidArgument(format!("graded cost needs the corruption mask of {idx}"))
            })?;
            match mask.popcount() {
                0 => Err(Error::Invariant(format!("packet {idx} has no corrupted bit"))),
                bits => Ok(Weight::from_integer(bits)),
            }
        }
    }
}

/// Union-find with path halving and union by size.
#[derive(Debug, Clone)]
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(count: usize) -> Self {
        Self {
            parent: (0..count).collect(),
            size: vec![1; count],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merge the sets of `a` and `b`; false when already merged.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GadgetEdge {
    pub row: usize,
    pub col: usize,
    pub packet: PacketIndex,
    pub weight: Weight,
}

/// Counts attached to one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GadgetCounts {
    /// Erroneous packets (edges).
    pub n_e: usize,
    /// Rows holding an error.
    pub r: usize,
    /// Columns holding an error.
    pub c: usize,
    /// Connected components, isolated vertices included.
    pub n_cc: usize,
    /// Components with at least one edge.
    pub n_nscc: usize,
}

/// Bipartite row/column graph with one edge per erroneous packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordinatesGraph {
    n: usize,
    m: usize,
    // sorted by packet index
    edges: Vec<GadgetEdge>,
}

impl CoordinatesGraph {
    /// Validate and store an explicit edge list.
    pub fn from_edges(n: usize, m: usize, mut edges: Vec<GadgetEdge>) -> Result<Self> {
        let mut seen = vec![false; (n + 1) * (m + 1)];
        for e in &edges {
            if e.row > n || e.col > m {
                return invalid(format!("edge ({}, {}) outside the grid", e.row, e.col));
            }
            if std::mem::replace(&mut seen[e.row * (m + 1) + e.col], true) {
                return invalid(format!("duplicate edge ({}, {})", e.row, e.col));
            }
            if e.weight.is_zero() {
                return invalid(format!("packet {} has a zero weight", e.packet));
            }
        }
        edges.sort_by_key(|e| e.packet);
        if edges.windows(2).any(|w| w[0].packet == w[1].packet) {
            return invalid("two edges carry the same packet index");
        }
        Ok(Self { n, m, edges })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    pub fn edges(&self) -> &[GadgetEdge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `n + m + 2`.
    pub fn vertex_count(&self) -> usize {
        self.n + self.m + 2
    }

    fn row_vertex(&self, i: usize) -> usize {
        i
    }

    fn col_vertex(&self, j: usize) -> usize {
        self.n + 1 + j
    }

    fn endpoints(&self, e: &GadgetEdge) -> (usize, usize) {
        (self.row_vertex(e.row), self.col_vertex(e.col))
    }

    pub fn total_weight(&self) -> Weight {
        self.edges.iter().map(|e| e.weight).sum()
    }

    pub fn counts(&self) -> GadgetCounts {
        let mut rows = vec![false; self.n + 1];
        let mut cols = vec![false; self.m + 1];
        let mut sets = DisjointSets::new(self.vertex_count());
        let mut merges = 0;
        for e in &self.edges {
            rows[e.row] = true;
            cols[e.col] = true;
            let (a, b) = self.endpoints(e);
            merges += usize::from(sets.union(a, b));
        }
        let r = rows.iter().filter(|&&x| x).count();
        let c = cols.iter().filter(|&&x| x).count();
        let n_cc = self.vertex_count() - merges;
        GadgetCounts {
            n_e: self.edges.len(),
            r,
            c,
            n_cc,
            n_nscc: n_cc - (self.n + 1 - r) - (self.m + 1 - c),
        }
    }

    pub fn is_acyclic(&self) -> bool {
        let mut sets = DisjointSets::new(self.vertex_count());
        self.edges.iter().all(|e| {
            let (a, b) = self.endpoints(e);
            sets.union(a, b)
        })
    }

    /// The graph with the edges of `removed` dropped.
    pub fn without(&self, removed: &[PacketIndex]) -> CoordinatesGraph {
        let edges = self
            .edges
            .iter()
            .filter(|e| !removed.contains(&e.packet))
            .cloned()
            .collect();
        Self {
            n: self.n,
            m: self.m,
            edges,
        }
    }
}

/// Build the coordinates graph of `config`.
///
/// `grid` supplies the corruption masks needed by [`CostFunction::Graded`].
/// Runs in `O(K + |E|)`.
pub fn build_gadget(
    config: &ErrorConfiguration,
    cost: CostFunction,
    params: &CodeParams,
    grid: Option<&CodeGrid>,
) -> Result<CoordinatesGraph> {
    let (n, m) = config.dims();
    if (n, m) != (params.n(), params.m()) {
        return invalid(format!(
            "configuration is {n}x{m} but the code is {}x{}",
            params.n(),
            params.m()
        ));
    }
    if cost == CostFunction::Graded && grid.is_none() {
        return invalid("graded cost needs the received grid for its corruption masks");
    }
    let mut edges = Vec::with_capacity(config.len());
    for c in config.iter() {
        let packet = params.index_of(c)?;
        let mask = match grid.map(|g| g.cell(c).status()) {
            Some(Status::BitCorrupted(mask)) => Some(mask),
            _ => None,
        };
        edges.push(GadgetEdge {
            row: c.row,
            col: c.col,
            packet,
            weight: packet_weight(cost, packet, params, mask)?,
        });
    }
    let cells = params.cell_count();
    if edges.len() * 8 > cells {
        // bucket by index: linear in N
        let mut slots: Vec<Option<GadgetEdge>> = vec![None; cells];
        for e in edges.drain(..) {
            let k = e.packet.0;
            slots[k] = Some(e);
        }
        edges.extend(slots.into_iter().flatten());
    } else {
        edges.sort_unstable_by_key(|e| e.packet);
    }
    Ok(CoordinatesGraph { n, m, edges })
}

/// Unit-weight graph of a configuration laid out by `params`.
pub fn unit_gadget(config: &ErrorConfiguration, params: &CodeParams) -> Result<CoordinatesGraph> {
    build_gadget(config, CostFunction::AllOrNone, params, None)
}

/// Errors to request again, with their total cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackRepairSet {
    /// Sorted packet indices.
    pub packets: Vec<PacketIndex>,
    pub cost: Weight,
}

impl FeedbackRepairSet {
    pub fn empty() -> Self {
        Self {
            packets: Vec::new(),
            cost: Weight::zero(),
        }
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn cost_f64(&self) -> f64 {
        self.cost.to_f64().unwrap_or(f64::NAN)
    }
}

impl Serialize for FeedbackRepairSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("FeedbackRepairSet", 3)?;
        st.serialize_field("packets", &self.packets)?;
        st.serialize_field("cost", &self.cost.to_string())?;
        st.serialize_field("cost_value", &self.cost_f64())?;
        st.end()
    }
}

fn collect_set(g: &CoordinatesGraph, mut picked: Vec<usize>) -> FeedbackRepairSet {
    picked.sort_unstable();
    let cost = picked.iter().map(|&e| g.edges[e].weight).sum();
    FeedbackRepairSet {
        packets: picked.into_iter().map(|e| g.edges[e].packet).collect(),
        cost,
    }
}

/// Minimum feedback repair set for unit costs: the back edges of a depth
/// first search forest.
///
/// Roots and neighbours are taken in ascending vertex label and packet index
/// order, so the result is deterministic. Linear in the graph size.
pub fn min_frs_unit(g: &CoordinatesGraph) -> Result<FeedbackRepairSet> {
    if g.edges.iter().any(|e| !e.weight.is_one()) {
        return invalid("unit solver called on a weighted graph; use min_frs_weighted");
    }
    let v = g.vertex_count();
    let e_count = g.edges.len();
    let mut start = vec![0usize; v + 1];
    for e in &g.edges {
        let (a, b) = g.endpoints(e);
        start[a + 1] += 1;
        start[b + 1] += 1;
    }
    for x in 0..v {
        start[x + 1] += start[x];
    }
    let mut adj = vec![0usize; 2 * e_count];
    let mut fill = start.clone();
    for (idx, e) in g.edges.iter().enumerate() {
        let (a, b) = g.endpoints(e);
        adj[fill[a]] = idx;
        fill[a] += 1;
        adj[fill[b]] = idx;
        fill[b] += 1;
    }

    let mut visited = vec![false; v];
    let mut used = vec![false; e_count];
    let mut back = Vec::new();
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for root in 0..v {
        if visited[root] || start[root] == start[root + 1] {
            continue;
        }
        visited[root] = true;
        stack.push((root, start[root]));
        while let Some(top) = stack.last_mut() {
            let (u, cursor) = *top;
            if cursor == start[u + 1] {
                stack.pop();
                continue;
            }
            top.1 += 1;
            let e = adj[cursor];
            if std::mem::replace(&mut used[e], true) {
                continue;
            }
            let (a, b) = g.endpoints(&g.edges[e]);
            let w = if a == u { b } else { a };
            if visited[w] {
                back.push(e);
            } else {
                visited[w] = true;
                stack.push((w, start[w]));
            }
        }
    }
    Ok(collect_set(g, back))
}

/// Minimum feedback repair set for arbitrary positive costs: the edges left
/// out of a maximum-weight spanning forest built by Kruskal's algorithm.
///
/// Edges are scanned by decreasing weight, ties by increasing packet index.
pub fn min_frs_weighted(g: &CoordinatesGraph) -> Result<FeedbackRepairSet> {
    if let Some(e) = g.edges.iter().find(|e| e.weight.is_zero()) {
        return invalid(format!("packet {} has a nonpositive weight", e.packet));
    }
    let mut order: Vec<usize> = (0..g.edges.len()).collect();
    order.sort_by(|&a, &b| {
        let (ea, eb) = (&g.edges[a], &g.edges[b]);
        eb.weight.cmp(&ea.weight).then(ea.packet.cmp(&eb.packet))
    });
    let mut sets = DisjointSets::new(g.vertex_count());
    let dropped = order
        .into_iter()
        .filter(|&e| {
            let (a, b) = g.endpoints(&g.edges[e]);
            !sets.union(a, b)
        })
        .collect();
    Ok(collect_set(g, dropped))
}

/// Minimum repair set under any cost function.
pub fn min_frs(g: &CoordinatesGraph) -> Result<FeedbackRepairSet> {
    if g.edges.iter().all(|e| e.weight.is_one()) {
        min_frs_unit(g)
    } else {
        min_frs_weighted(g)
    }
}

/// Closed form of the unit repair cost: `n_e - R - C + N_nscc`.
pub fn repair_cost_formula(n_e: usize, r: usize, c: usize, n_nscc: usize) -> Result<usize> {
    (n_e + n_nscc)
        .checked_sub(r + c)
        .ok_or_else(|| {
            Error::InvalidArgument(format!(
                "inconsistent counts: n_e={n_e}, R={r}, C={c}, N_nscc={n_nscc}"
            ))
        })
}

/// Cells of the repair set, for display.
pub fn frs_cells(frs: &FeedbackRepairSet, params: &CodeParams) -> Result<Vec<GridCoord>> {
    frs.packets.iter().map(|&k| params.coord_of(k)).collect()
}
