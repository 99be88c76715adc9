//! Layered gate programs for the kicked Ising Floquet drive.
//!
//! A [`Circuit`] is a sequence of blocks, each a sequence of layers of gates on
//! disjoint qubits. Floquet step blocks mark the boundaries where per-step
//! noise (global depolarization) is applied; the single middle block of an
//! OTOC circuit holds the butterfly operator.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{CouplingGraph, Qubit};
use crate::model::{DisorderRealization, ModelParams};

/// Rotations follow `R_P(theta) = exp(-i theta P / 2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Rx { qubit: Qubit, angle: f64 },
    Rz { qubit: Qubit, angle: f64 },
    Rzz { qubits: [Qubit; 2], angle: f64 },
    X { qubit: Qubit },
    Idle { qubit: Qubit },
}

impl Gate {
    pub fn qubits(&self) -> Vec<Qubit> {
        match *self {
            Gate::Rzz { qubits, .. } => qubits.to_vec(),
            Gate::Rx { qubit, .. } | Gate::Rz { qubit, .. } | Gate::X { qubit } | Gate::Idle { qubit } => {
                vec![qubit]
            }
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::Rzz { .. })
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx { angle, .. } | Gate::Rz { angle, .. } | Gate::Rzz { angle, .. } => Some(angle),
            Gate::X { .. } | Gate::Idle { .. } => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Gate::Rx { .. } => "RX",
            Gate::Rz { .. } => "RZ",
            Gate::Rzz { .. } => "RZZ",
            Gate::X { .. } => "X",
            Gate::Idle { .. } => "IDLE",
        }
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Rx { qubit, angle } => Gate::Rx { qubit, angle: -angle },
            Gate::Rz { qubit, angle } => Gate::Rz { qubit, angle: -angle },
            Gate::Rzz { qubits, angle } => Gate::Rzz { qubits, angle: -angle },
            g @ (Gate::X { .. } | Gate::Idle { .. }) => g,
        }
    }

    /// Dense matrix in row-major order. For two-qubit gates the basis index
    /// is `b0 + 2 * b1` with `b0` the bit of `qubits[0]`.
    pub fn matrix(&self) -> Vec<Complex64> {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        match *self {
            Gate::Rx { angle, .. } => {
                let c = Complex64::new((angle / 2.0).cos(), 0.0);
                let s = Complex64::new(0.0, -(angle / 2.0).sin());
                vec![c, s, s, c]
            }
            Gate::Rz { angle, .. } => {
                vec![Complex64::from_polar(1.0, -angle / 2.0), zero, zero, Complex64::from_polar(1.0, angle / 2.0)]
            }
            Gate::Rzz { angle, .. } => {
                let even = Complex64::from_polar(1.0, -angle / 2.0);
                let odd = Complex64::from_polar(1.0, angle / 2.0);
                let mut m = vec![zero; 16];
                for (i, phase) in [even, odd, odd, even].into_iter().enumerate() {
                    m[i * 4 + i] = phase;
                }
                m
            }
            Gate::X { .. } => vec![zero, one, one, zero],
            Gate::Idle { .. } => vec![one, zero, zero, one],
        }
    }

    fn check(&self, n_qubits: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n_qubits {
                return Err(Error::QubitOutOfRange {
                    qubit: q,
                    num_qubits: n_qubits,
                });
            }
        }
        if let Gate::Rzz { qubits: [a, b], .. } = *self {
            if a == b {
                return Err(Error::SelfLoop(a));
            }
        }
        if let Some(angle) = self.angle() {
            if !angle.is_finite() {
                return Err(Error::invalid("angle", format!("{angle} is not finite")));
            }
        }
        Ok(())
    }
}

/// Gates acting on pairwise disjoint qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    gates: Vec<Gate>,
}

impl Layer {
    pub fn new(gates: Vec<Gate>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for g in &gates {
            for q in g.qubits() {
                if !seen.insert(q) {
                    return Err(Error::OverlappingLayer(q));
                }
            }
        }
        Ok(Self { gates })
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    fn inverse(&self) -> Layer {
        Layer {
            gates: self.gates.iter().map(Gate::inverse).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// One application of the Floquet operator or its inverse.
    FloquetStep,
    /// The butterfly operator (or identity) between the two halves.
    Butterfly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub kind: BlockKind,
    pub layers: Vec<Layer>,
}

impl Block {
    fn inverse(&self) -> Block {
        Block {
            kind: self.kind,
            layers: self.layers.iter().rev().map(Layer::inverse).collect(),
        }
    }
}

/// Placement of the pieces of an OTOC circuit `U^dag O U`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OtocLayout {
    pub steps: usize,
    pub butterfly: Qubit,
    pub butterfly_inserted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CircuitMeta {
    pub noise_factor: f64,
    pub pruned: bool,
    pub otoc: Option<OtocLayout>,
}

impl Default for CircuitMeta {
    fn default() -> Self {
        Self {
            noise_factor: 1.0,
            pruned: false,
            otoc: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    blocks: Vec<Block>,
    meta: CircuitMeta,
}

impl Circuit {
    pub fn new(n_qubits: usize, blocks: Vec<Block>) -> Result<Self> {
        for block in &blocks {
            for layer in &block.layers {
                for g in &layer.gates {
                    g.check(n_qubits)?;
                }
            }
        }
        Ok(Self {
            n_qubits,
            blocks,
            meta: CircuitMeta::default(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn meta(&self) -> &CircuitMeta {
        &self.meta
    }

    pub fn layers(&self) -> impl Iterator<Item = &Layer> {
        self.blocks.iter().flat_map(|b| b.layers.iter())
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> {
        self.layers().flat_map(|l| l.gates.iter())
    }

    pub fn two_qubit_count(&self) -> usize {
        self.gates().filter(|g| g.is_two_qubit()).count()
    }

    pub fn floquet_steps(&self) -> usize {
        self.blocks.iter().filter(|b| b.kind == BlockKind::FloquetStep).count()
    }

    /// The inverse circuit: blocks and layers reversed, angles negated.
    pub fn adjoint(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            blocks: self.blocks.iter().rev().map(Block::inverse).collect(),
            meta: CircuitMeta {
                otoc: None,
                ..self.meta
            },
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct GateRecord {
            kind: &'static str,
            qubits: Vec<Qubit>,
            #[serde(skip_serializing_if = "Option::is_none")]
            angle: Option<f64>,
        }
        let layers: Vec<Vec<GateRecord>> = self
            .layers()
            .map(|l| {
                l.gates
                    .iter()
                    .map(|g| GateRecord {
                        kind: g.kind(),
                        qubits: g.qubits(),
                        angle: g.angle(),
                    })
                    .collect()
            })
            .collect();
        serde_json::json!({
            "n_qubits": self.n_qubits,
            "floquet_steps": self.floquet_steps(),
            "meta": self.meta,
            "layers": layers,
        })
    }
}

/// One Floquet period: `RX(bxt[i])` on every site, `RZ(bzt)` on every site,
/// then `RZZ(jt)` on every edge, one layer per edge color.
pub fn build_floquet_step(
    graph: &CouplingGraph,
    params: &ModelParams,
    realization: &DisorderRealization,
) -> Result<Circuit> {
    params.validate()?;
    let n = graph.num_qubits();
    if realization.bxt.len() != n {
        return Err(Error::SizeMismatch {
            what: "disorder realization",
            got: realization.bxt.len(),
            expected: n,
        });
    }
    if !graph.is_colored() {
        return Err(Error::NotColored);
    }
    let mut layers = vec![
        Layer::new(
            realization
                .bxt
                .iter()
                .enumerate()
                .map(|(qubit, &angle)| Gate::Rx { qubit, angle })
                .collect(),
        )?,
        Layer::new((0..n).map(|qubit| Gate::Rz { qubit, angle: params.bzt }).collect())?,
    ];
    for l in 0..graph.edge_layers().len() {
        layers.push(Layer::new(
            graph
                .layer_edges(l)
                .map(|(a, b)| Gate::Rzz {
                    qubits: [a, b],
                    angle: params.jt,
                })
                .collect(),
        )?);
    }
    Circuit::new(
        n,
        vec![Block {
            kind: BlockKind::FloquetStep,
            layers,
        }],
    )
}

/// `(U)^dag^n O (U)^n` where `U` is `step` and `O` is `X` on `butterfly`, or
/// the identity when `insert_butterfly` is false.
pub fn build_otoc_circuit(step: &Circuit, n: usize, butterfly: Qubit, insert_butterfly: bool) -> Result<Circuit> {
    if butterfly >= step.n_qubits {
        return Err(Error::QubitOutOfRange {
            qubit: butterfly,
            num_qubits: step.n_qubits,
        });
    }
    if step.meta.otoc.is_some() {
        return Err(Error::invalid("step", "expected a Floquet step, got an OTOC circuit"));
    }
    let forward: Vec<Block> = (0..n).flat_map(|_| step.blocks.iter().cloned()).collect();
    Ok(assemble_otoc(step.n_qubits, forward, butterfly, insert_butterfly, n, false))
}

fn assemble_otoc(
    n_qubits: usize,
    forward: Vec<Block>,
    butterfly: Qubit,
    insert_butterfly: bool,
    steps: usize,
    pruned: bool,
) -> Circuit {
    let middle = if insert_butterfly {
        Gate::X { qubit: butterfly }
    } else {
        Gate::Idle { qubit: butterfly }
    };
    let mut blocks = forward.clone();
    blocks.push(Block {
        kind: BlockKind::Butterfly,
        layers: vec![Layer { gates: vec![middle] }],
    });
    blocks.extend(forward.iter().rev().map(Block::inverse));
    Circuit {
        n_qubits,
        blocks,
        meta: CircuitMeta {
            noise_factor: 1.0,
            pruned,
            otoc: Some(OtocLayout {
                steps,
                butterfly,
                butterfly_inserted: insert_butterfly,
            }),
        },
    }
}

/// Removes forward gates outside the backward light cone of the butterfly
/// qubit and rebuilds the adjoint half as the inverse of the pruned forward
/// half.
///
/// The forward step applied `d` steps before the butterfly keeps single-qubit
/// gates within `d` hops of it and two-qubit gates with an endpoint within
/// `d - 1` hops. Hops are measured on the graph spanned by the circuit's
/// two-qubit gates.
pub fn prune_causal_cone(circ: &Circuit) -> Result<Circuit> {
    let layout = circ.meta.otoc.ok_or(Error::NotOtocCircuit)?;
    let n = layout.steps;
    if circ.blocks.len() != 2 * n + 1 || circ.meta.noise_factor != 1.0 {
        return Err(Error::NotOtocCircuit);
    }
    let forward = &circ.blocks[..n];

    let mut edges = std::collections::BTreeSet::new();
    for g in forward.iter().flat_map(|b| &b.layers).flat_map(|l| &l.gates) {
        if let Gate::Rzz { qubits: [a, b], .. } = *g {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let edges: Vec<_> = edges.into_iter().collect();
    let dist = CouplingGraph::from_edges(circ.n_qubits, &edges)?.distances_from(layout.butterfly)?;
    let within = |q: Qubit, r: usize| dist[q].is_some_and(|d| d <= r);

    let pruned_forward: Vec<Block> = forward
        .iter()
        .enumerate()
        .map(|(k, block)| {
            let depth = n - k;
            let layers = block
                .layers
                .iter()
                .filter_map(|layer| {
                    let gates: Vec<Gate> = layer
                        .gates
                        .iter()
                        .filter(|g| match **g {
                            Gate::Rzz { qubits: [a, b], .. } => within(a, depth - 1) || within(b, depth - 1),
                            _ => g.qubits().iter().all(|&q| within(q, depth)),
                        })
                        .copied()
                        .collect();
                    (!gates.is_empty()).then_some(Layer { gates })
                })
                .collect();
            Block { kind: block.kind, layers }
        })
        .collect();

    Ok(assemble_otoc(
        circ.n_qubits,
        pruned_forward,
        layout.butterfly,
        layout.butterfly_inserted,
        n,
        true,
    ))
}

/// Replaces two-qubit gates `G` by `G G^dag G` to scale the expected
/// two-qubit error budget by `f`.
///
/// Each gate is folded `floor((f - 1) / 2)` times plus once more with
/// probability equal to the fractional remainder, drawn in gate order from a
/// generator seeded with `rng_seed`. For `1 <= f <= 3` this is a single
/// Bernoulli fold with probability `(f - 1) / 2`.
pub fn fold_gates(circ: &Circuit, f: f64, rng_seed: u64) -> Result<Circuit> {
    if !f.is_finite() || f < 1.0 {
        return Err(Error::invalid("noise_factor", format!("{f} must be >= 1")));
    }
    let extra = (f - 1.0) / 2.0;
    let full = extra.floor() as usize;
    let frac = extra - full as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let mut blocks = Vec::with_capacity(circ.blocks.len());
    for block in &circ.blocks {
        let mut layers = Vec::with_capacity(block.layers.len());
        for layer in &block.layers {
            let folds: Vec<usize> = layer
                .gates
                .iter()
                .map(|g| {
                    if g.is_two_qubit() {
                        full + usize::from(frac > 0.0 && rng.gen::<f64>() < frac)
                    } else {
                        0
                    }
                })
                .collect();
            layers.push(layer.clone());
            let depth = folds.iter().copied().max().unwrap_or(0);
            for round in 1..=depth {
                let selected = || layer.gates.iter().zip(&folds).filter(move |&(_, &k)| k >= round);
                layers.push(Layer {
                    gates: selected().map(|(g, _)| g.inverse()).collect(),
                });
                layers.push(Layer {
                    gates: selected().map(|(g, _)| *g).collect(),
                });
            }
        }
        blocks.push(Block { kind: block.kind, layers });
    }
    Ok(Circuit {
        n_qubits: circ.n_qubits,
        blocks,
        meta: CircuitMeta {
            noise_factor: circ.meta.noise_factor * f,
            ..circ.meta
        },
    })
}

/// Two-qubit gates left in the pruned OTOC circuit for `n` steps: the
/// ceiling on the effective quantum volume.
pub fn count_lightcone_gates(step: &Circuit, n: usize, butterfly: Qubit) -> Result<usize> {
    let otoc = build_otoc_circuit(step, n, butterfly, true)?;
    Ok(prune_causal_cone(&otoc)?.two_qubit_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_heavy_hex, color_edges, CouplingGraph};
    use crate::model::sample_disorder;

    fn path_graph(n: usize) -> CouplingGraph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        color_edges(&CouplingGraph::from_edges(n, &edges).unwrap()).unwrap()
    }

    fn step_for(graph: &CouplingGraph, w: f64, idx: u64) -> Circuit {
        let params = ModelParams::default().with_disorder(w);
        let real = sample_disorder(&params, graph.num_qubits(), 5, idx).unwrap();
        build_floquet_step(graph, &params, &real).unwrap()
    }

    #[test]
    fn step_layout() {
        let g = path_graph(2);
        let step = step_for(&g, 0.0, 0);
        let layers: Vec<_> = step.layers().collect();
        assert_eq!(layers.len(), 3);
        assert!(layers[0].gates().iter().all(|g| g.angle() == Some(std::f64::consts::FRAC_PI_2)));
        assert_eq!(
            layers[2].gates(),
            &[Gate::Rzz {
                qubits: [0, 1],
                angle: std::f64::consts::FRAC_PI_2
            }]
        );
    }

    #[test]
    fn heavy_hex_step_has_three_rzz_layers() {
        let g = build_heavy_hex(2, 3).unwrap();
        let step = step_for(&g, 0.1, 0);
        assert_eq!(step.layers().count(), 5);
        assert_eq!(step.two_qubit_count(), g.edges().len());
    }

    #[test]
    fn step_requires_matching_sizes_and_coloring() {
        let g = path_graph(3);
        let params = ModelParams::default();
        let real = sample_disorder(&params, 2, 0, 0).unwrap();
        assert!(matches!(build_floquet_step(&g, &params, &real), Err(Error::SizeMismatch { .. })));
        let uncolored = CouplingGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let real = sample_disorder(&params, 3, 0, 0).unwrap();
        assert!(matches!(build_floquet_step(&uncolored, &params, &real), Err(Error::NotColored)));
    }

    #[test]
    fn zero_step_otoc_is_a_single_x() {
        let step = step_for(&path_graph(3), 0.2, 1);
        let c = build_otoc_circuit(&step, 0, 1, true).unwrap();
        assert_eq!(c.gates().copied().collect::<Vec<_>>(), vec![Gate::X { qubit: 1 }]);
        assert!(build_otoc_circuit(&step, 2, 3, true).is_err());
    }

    #[test]
    fn layers_reject_overlap() {
        let r = Layer::new(vec![Gate::X { qubit: 0 }, Gate::Rzz { qubits: [0, 1], angle: 0.1 }]);
        assert!(matches!(r, Err(Error::OverlappingLayer(0))));
    }

    #[test]
    fn adjoint_reverses_and_negates() {
        let step = step_for(&path_graph(3), 0.3, 2);
        let adj = step.adjoint();
        let fwd: Vec<_> = step.gates().copied().collect();
        let back: Vec<_> = adj.gates().copied().collect();
        assert_eq!(fwd.len(), back.len());
        let first_layer_of_adj = adj.layers().next().unwrap();
        let last_layer_of_step = step.layers().last().unwrap();
        assert_eq!(first_layer_of_adj, &last_layer_of_step.inverse());
    }

    #[test]
    fn one_step_cone_touches_only_neighbors() {
        let g = build_heavy_hex(1, 1).unwrap();
        let b = 0;
        let step = step_for(&g, 0.1, 0);
        let pruned = prune_causal_cone(&build_otoc_circuit(&step, 1, b, true).unwrap()).unwrap();
        let dist = g.distances_from(b).unwrap();
        for gate in pruned.gates().filter(|g| g.is_two_qubit()) {
            assert!(gate.qubits().iter().all(|&q| dist[q].unwrap() <= 1));
        }
        assert_eq!(pruned.two_qubit_count(), 2 * g.degree(b));
    }

    #[test]
    fn earliest_step_is_unpruned_once_the_cone_covers_the_graph() {
        let g = build_heavy_hex(1, 1).unwrap();
        let step = step_for(&g, 0.1, 0);
        let ecc = 6;
        for n in [ecc, ecc + 2] {
            let full = build_otoc_circuit(&step, n, 0, true).unwrap();
            let pruned = prune_causal_cone(&full).unwrap();
            assert_eq!(pruned.blocks()[0], full.blocks()[0]);
            assert!(pruned.meta().pruned);
        }
    }

    #[test]
    fn lightcone_gate_counts() {
        let g = build_heavy_hex(2, 3).unwrap();
        let step = step_for(&g, 0.0, 0);
        assert_eq!(count_lightcone_gates(&step, 0, 5).unwrap(), 0);
        let deg3 = (0..g.num_qubits()).find(|&q| g.degree(q) == 3).unwrap();
        assert_eq!(count_lightcone_gates(&step, 1, deg3).unwrap(), 6);
    }

    #[test]
    fn folding_counts() {
        let step = step_for(&build_heavy_hex(1, 1).unwrap(), 0.1, 0);
        let otoc = build_otoc_circuit(&step, 2, 0, true).unwrap();
        let base = otoc.two_qubit_count();
        assert_eq!(fold_gates(&otoc, 1.0, 9).unwrap().blocks(), otoc.blocks());
        assert_eq!(fold_gates(&otoc, 3.0, 9).unwrap().two_qubit_count(), 3 * base);
        assert_eq!(fold_gates(&otoc, 5.0, 9).unwrap().two_qubit_count(), 5 * base);
        assert!(fold_gates(&otoc, 0.5, 9).is_err());
        assert!(fold_gates(&otoc, f64::NAN, 9).is_err());
        let partial = fold_gates(&otoc, 1.5, 9).unwrap();
        assert_eq!(partial, fold_gates(&otoc, 1.5, 9).unwrap());
        assert_eq!((partial.two_qubit_count() - base) % 2, 0);
        assert_eq!(partial.meta().noise_factor, 1.5);
        assert_eq!(partial.floquet_steps(), otoc.floquet_steps());
    }

    #[test]
    fn prune_rejects_plain_circuits() {
        let step = step_for(&path_graph(3), 0.0, 0);
        assert!(matches!(prune_causal_cone(&step), Err(Error::NotOtocCircuit)));
    }

    #[test]
    fn json_dump_lists_layers() {
        let step = step_for(&path_graph(3), 0.0, 0);
        let json = step.to_json();
        let layers = json["layers"].as_array().unwrap();
        assert_eq!(layers.len(), 4);
        assert_eq!(layers[0][0]["kind"], "RX");
        assert_eq!(layers[2][0]["qubits"], serde_json::json!([0, 1]));
    }
}
