//! Qubit coupling graphs.
//!
//! A [`CouplingGraph`] stores the undirected edge set of a device together with
//! a partition of those edges into matchings ("edge layers"). Each layer can be
//! executed as one layer of simultaneous two-qubit gates.
//!
//! Heavy-hex patches follow the line/bridge layout of IBM heavy-hex devices:
//! horizontal lines of qubits joined by bridge qubits, with consecutive bridge
//! rows shifted by half a plaquette.

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Qubit = usize;

/// Undirected qubit connectivity with an optional edge coloring.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingGraph {
    num_qubits: usize,
    edges: Vec<(Qubit, Qubit)>,
    edge_layers: Vec<Vec<usize>>,
    coords: Option<Vec<(f64, f64)>>,
    adjacency: Vec<Vec<Qubit>>,
}

/// JSON form of a graph: `{num_qubits, edges, layers, coords}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub num_qubits: usize,
    pub edges: Vec<[Qubit; 2]>,
    pub layers: Vec<Vec<[Qubit; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<[f64; 2]>>,
}

impl CouplingGraph {
    /// Builds a graph from an edge list. Edges are stored with the smaller
    /// endpoint first, in input order.
    pub fn from_edges(num_qubits: usize, edges: &[(Qubit, Qubit)]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            for q in [a, b] {
                if q >= num_qubits {
                    return Err(Error::QubitOutOfRange {
                        qubit: q,
                        num_qubits,
                    });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::DuplicateEdge(e.0, e.1));
            }
            normalized.push(e);
        }
        let mut adjacency = vec![Vec::new(); num_qubits];
        for &(a, b) in &normalized {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Self {
            num_qubits,
            edges: normalized,
            edge_layers: Vec::new(),
            coords: None,
            adjacency,
        })
    }

    pub fn with_coords(mut self, coords: Vec<(f64, f64)>) -> Result<Self> {
        if coords.len() != self.num_qubits {
            return Err(Error::SizeMismatch {
                what: "coords",
                got: coords.len(),
                expected: self.num_qubits,
            });
        }
        self.coords = Some(coords);
        Ok(self)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn edges(&self) -> &[(Qubit, Qubit)] {
        &self.edges
    }

    /// Edge layers as lists of edge indices. Empty until [`color_edges`] runs.
    pub fn edge_layers(&self) -> &[Vec<usize>] {
        &self.edge_layers
    }

    pub fn layer_edges(&self, layer: usize) -> impl Iterator<Item = (Qubit, Qubit)> + '_ {
        self.edge_layers[layer].iter().map(|&e| self.edges[e])
    }

    pub fn coords(&self) -> Option<&[(f64, f64)]> {
        self.coords.as_deref()
    }

    pub fn neighbors(&self, q: Qubit) -> &[Qubit] {
        &self.adjacency[q]
    }

    pub fn degree(&self, q: Qubit) -> usize {
        self.adjacency[q].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_colored(&self) -> bool {
        self.edges.is_empty() || !self.edge_layers.is_empty()
    }

    fn check_qubit(&self, q: Qubit) -> Result<()> {
        if q < self.num_qubits {
            Ok(())
        } else {
            Err(Error::QubitOutOfRange {
                qubit: q,
                num_qubits: self.num_qubits,
            })
        }
    }

    /// BFS hop counts from `source`; `None` for unreachable qubits.
    pub fn distances_from(&self, source: Qubit) -> Result<Vec<Option<usize>>> {
        self.check_qubit(source)?;
        Ok(bfs(&self.adjacency, source))
    }

    /// Qubits within `radius` hops of `center`.
    pub fn ball(&self, center: Qubit, radius: usize) -> Result<Vec<bool>> {
        Ok(self
            .distances_from(center)?
            .into_iter()
            .map(|d| d.is_some_and(|d| d <= radius))
            .collect())
    }

    pub fn is_connected(&self) -> bool {
        self.num_qubits == 0 || bfs(&self.adjacency, 0).iter().all(Option::is_some)
    }

    /// Proper 2-coloring of the vertices if one exists.
    pub fn bipartition(&self) -> Option<Vec<u8>> {
        let mut side = vec![u8::MAX; self.num_qubits];
        let mut queue = VecDeque::new();
        for start in 0..self.num_qubits {
            if side[start] != u8::MAX {
                continue;
            }
            side[start] = 0;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    if side[v] == u8::MAX {
                        side[v] = 1 - side[u];
                        queue.push_back(v);
                    } else if side[v] == side[u] {
                        return None;
                    }
                }
            }
        }
        Some(side)
    }

    /// Lowest-index qubit of minimum eccentricity.
    pub fn center(&self) -> Result<Qubit> {
        let mut best: Option<(usize, Qubit)> = None;
        for q in 0..self.num_qubits {
            let dist = bfs(&self.adjacency, q);
            let mut ecc = 0;
            for (other, d) in dist.iter().enumerate() {
                match d {
                    Some(d) => ecc = ecc.max(*d),
                    None => return Err(Error::Disconnected(q, other)),
                }
            }
            if best.is_none_or(|(e, _)| ecc < e) {
                best = Some((ecc, q));
            }
        }
        best.map(|(_, q)| q).ok_or(Error::EmptyGraph)
    }

    pub fn to_export(&self) -> GraphExport {
        GraphExport {
            num_qubits: self.num_qubits,
            edges: self.edges.iter().map(|&(a, b)| [a, b]).collect(),
            layers: (0..self.edge_layers.len())
                .map(|l| self.layer_edges(l).map(|(a, b)| [a, b]).collect())
                .collect(),
            coords: self
                .coords
                .as_ref()
                .map(|c| c.iter().map(|&(x, y)| [x, y]).collect()),
        }
    }

    /// Rebuilds a graph from its JSON export, validating the stored layers.
    pub fn from_export(export: &GraphExport) -> Result<Self> {
        let edges: Vec<_> = export.edges.iter().map(|e| (e[0], e[1])).collect();
        let mut graph = Self::from_edges(export.num_qubits, &edges)?;
        if let Some(coords) = &export.coords {
            graph = graph.with_coords(coords.iter().map(|c| (c[0], c[1])).collect())?;
        }
        if !export.layers.is_empty() {
            let index_of = |a: Qubit, b: Qubit| {
                let key = (a.min(b), a.max(b));
                graph.edges.iter().position(|&e| e == key)
            };
            let mut layers = Vec::with_capacity(export.layers.len());
            for layer in &export.layers {
                let mut ids = Vec::with_capacity(layer.len());
                for e in layer {
                    ids.push(index_of(e[0], e[1]).ok_or_else(|| {
                        Error::EdgeListParse(format!("layer edge ({}, {}) not in graph", e[0], e[1]))
                    })?);
                }
                layers.push(ids);
            }
            check_layers(&graph, &layers)?;
            graph.edge_layers = layers;
        }
        Ok(graph)
    }

    /// Writes the graph as a plain "i j" edge list.
    pub fn to_edge_list(&self) -> String {
        self.edges.iter().map(|(a, b)| format!("{a} {b}\n")).collect()
    }
}

fn bfs(adjacency: &[Vec<Qubit>], source: Qubit) -> Vec<Option<usize>> {
    let mut dist = vec![None; adjacency.len()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let next = dist[u].map(|d| d + 1);
        for &v in &adjacency[u] {
            if dist[v].is_none() {
                dist[v] = next;
                queue.push_back(v);
            }
        }
    }
    dist
}

fn check_layers(graph: &CouplingGraph, layers: &[Vec<usize>]) -> Result<()> {
    let mut used = vec![false; graph.edges.len()];
    for layer in layers {
        let mut touched = vec![false; graph.num_qubits];
        for &e in layer {
            if std::mem::replace(&mut used[e], true) {
                return Err(Error::NotColorable(format!("edge {e} appears in two layers")));
            }
            let (a, b) = graph.edges[e];
            for q in [a, b] {
                if std::mem::replace(&mut touched[q], true) {
                    return Err(Error::NotColorable(format!("layer is not a matching at qubit {q}")));
                }
            }
        }
    }
    if let Some(e) = used.iter().position(|u| !u) {
        return Err(Error::NotColorable(format!("edge {e} is in no layer")));
    }
    Ok(())
}

/// Builds a heavy-hex patch with `rows` x `cols` complete plaquettes.
///
/// A single plaquette row is the bare strip: two lines of `4 * cols + 1`
/// qubits joined by `cols + 1` bridges, so `(1, 1)` is one 12-qubit ring.
/// Multi-row patches use the device row layout: `rows + 1` lines of
/// `4 * cols + 4` qubits, each followed by a row of `cols + 1` bridge qubits.
/// Bridges sit on odd columns, alternating between `4k + 3` and `4k + 1`; the
/// bridges below the last line are boundary edge-qubits. This gives
/// `5 (rows + 1) (cols + 1)` qubits, 60 for `(2, 3)`.
///
/// Qubits are numbered row-major: line 0, bridges 0, line 1, bridges 1, ...
/// The returned graph is already edge-colored.
pub fn build_heavy_hex(rows: usize, cols: usize) -> Result<CouplingGraph> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("rows/cols", "heavy-hex patch needs rows >= 1 and cols >= 1"));
    }
    let (line_len, bridge_rows) = if rows == 1 {
        (4 * cols + 1, 1)
    } else {
        (4 * cols + 4, rows + 1)
    };
    let bridge_cols = |gap: usize| -> Vec<usize> {
        let offset = match (rows, gap % 2) {
            (1, _) => 0,
            (_, 0) => 3,
            _ => 1,
        };
        (0..=cols).map(|k| offset + 4 * k).collect()
    };

    let mut coords = Vec::new();
    let mut edges = Vec::new();
    let mut line_start = Vec::with_capacity(rows + 1);
    let mut pending_bridges: Vec<(usize, Qubit)> = Vec::new();
    for line in 0..=rows {
        let start = coords.len();
        line_start.push(start);
        for col in 0..line_len {
            coords.push((col as f64, -2.0 * line as f64));
            if col > 0 {
                edges.push((start + col - 1, start + col));
            }
        }
        // bridges hanging from the previous line land here
        for (col, bridge) in pending_bridges.drain(..) {
            edges.push((bridge, start + col));
        }
        if line < bridge_rows {
            for col in bridge_cols(line) {
                let bridge = coords.len();
                coords.push((col as f64, -2.0 * line as f64 - 1.0));
                edges.push((start + col, bridge));
                if line < rows {
                    pending_bridges.push((col, bridge));
                }
            }
        }
    }
    let graph = CouplingGraph::from_edges(coords.len(), &edges)?.with_coords(coords)?;
    color_edges(&graph)
}

/// Reads a whitespace-separated list of integer pairs.
pub fn load_graph(path: impl AsRef<Path>) -> Result<CouplingGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text)
}

pub fn parse_edge_list(text: &str) -> Result<CouplingGraph> {
    let values = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| Error::EdgeListParse(format!("`{tok}` is not a qubit index")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if values.len() % 2 != 0 {
        return Err(Error::EdgeListParse("odd number of indices".into()));
    }
    let edges: Vec<_> = values.chunks_exact(2).map(|p| (p[0], p[1])).collect();
    let n = values.iter().max().map_or(0, |m| m + 1);
    CouplingGraph::from_edges(n, &edges)
}

/// Partitions the edges of a bipartite graph with maximum degree at most 3
/// into at most 3 matchings.
///
/// Edges are colored in index order. When the lowest free colors at the two
/// endpoints differ, the alternating path of those two colors starting at the
/// second endpoint is flipped; in a bipartite graph it never returns to the
/// first endpoint, so max-degree many colors always suffice.
pub fn color_edges(graph: &CouplingGraph) -> Result<CouplingGraph> {
    let max_degree = graph.max_degree();
    if max_degree > 3 {
        return Err(Error::NotColorable(format!("maximum degree {max_degree} exceeds 3")));
    }
    if graph.bipartition().is_none() {
        return Err(Error::NotColorable("graph contains an odd cycle".into()));
    }
    let ncolors = max_degree;
    // at[v][c] = edge incident to v with color c
    let mut at = vec![vec![None::<usize>; ncolors]; graph.num_qubits];
    let mut color = vec![usize::MAX; graph.edges.len()];

    for (e, &(u, v)) in graph.edges.iter().enumerate() {
        let free_u = (0..ncolors).find(|&c| at[u][c].is_none()).expect("degree bound");
        let free_v = (0..ncolors).find(|&c| at[v][c].is_none()).expect("degree bound");
        if at[v][free_u].is_some() {
            // walk the free_u/free_v alternating path out of v and swap it
            let mut path = Vec::new();
            let mut node = v;
            let mut c = free_u;
            while let Some(pe) = at[node][c] {
                path.push(pe);
                let (a, b) = graph.edges[pe];
                node = if a == node { b } else { a };
                c = if c == free_u { free_v } else { free_u };
            }
            for &pe in &path {
                let (a, b) = graph.edges[pe];
                at[a][color[pe]] = None;
                at[b][color[pe]] = None;
            }
            for &pe in &path {
                let (a, b) = graph.edges[pe];
                let swapped = if color[pe] == free_u { free_v } else { free_u };
                color[pe] = swapped;
                at[a][swapped] = Some(pe);
                at[b][swapped] = Some(pe);
            }
            debug_assert!(at[u][free_u].is_none());
        }
        color[e] = free_u;
        at[u][free_u] = Some(e);
        at[v][free_u] = Some(e);
    }

    let mut layers = vec![Vec::new(); ncolors];
    for (e, &c) in color.iter().enumerate() {
        layers[c].push(e);
    }
    layers.retain(|l| !l.is_empty());
    let mut colored = graph.clone();
    colored.edge_layers = layers;
    Ok(colored)
}

/// Shortest-path hop count between two qubits.
pub fn distance(graph: &CouplingGraph, a: Qubit, b: Qubit) -> Result<usize> {
    graph.check_qubit(b)?;
    graph.distances_from(a)?[b].ok_or(Error::Disconnected(a, b))
}
