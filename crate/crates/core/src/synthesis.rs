//! CSK modulator/demodulator synthesis.
//!
//! An order-m link encodes m bits into 2^m concentration levels. The
//! demodulator front-end is a bank of thresholding units producing a
//! thermometer code B_j (B_j = 1 iff the symbol index exceeds j); the
//! back-end recodes the thermometer word into binary with cell-friendly
//! logic. Two equivalent back-end formulations are provided: the plain
//! sum-of-products over valid thermometer rows, and the AND-free inverted
//! form obtained by double negation, which maps directly onto ID/NOT cell
//! populations.
//!
//! [`synthesize`] turns an order into a [`CircuitLayout`]: a DAG of cell
//! populations placed on lanes and stations, with one propagation edge per
//! designated signal path. Orders 1 and 2 use the reference placements; the
//! general recipe tiles one lane per thermometer-signal usage.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{ChannelGeometry, Surface};
use crate::kinetics::BlockKind;
use crate::species::SpeciesId;
use crate::{Error, Result};

/// Practical order cap: 2^m − 1 thresholding units get unwieldy beyond this.
pub const MAX_ORDER: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoolExpr {
    Var(usize),
    Not(Box<BoolExpr>),
    Or(Vec<BoolExpr>),
    And(Vec<BoolExpr>),
}

impl BoolExpr {
    pub fn eval(&self, bits: &[bool]) -> bool {
        match self {
            BoolExpr::Var(i) => bits[*i],
            BoolExpr::Not(e) => !e.eval(bits),
            BoolExpr::Or(es) => es.iter().any(|e| e.eval(bits)),
            BoolExpr::And(es) => es.iter().all(|e| e.eval(bits)),
        }
    }

    pub fn contains_and(&self) -> bool {
        match self {
            BoolExpr::Var(_) => false,
            BoolExpr::Not(e) => e.contains_and(),
            BoolExpr::Or(es) => es.iter().any(|e| e.contains_and()),
            BoolExpr::And(_) => true,
        }
    }

    /// Largest number of NOT nodes on any root-to-leaf path.
    pub fn max_not_depth(&self) -> usize {
        match self {
            BoolExpr::Var(_) => 0,
            BoolExpr::Not(e) => 1 + e.max_not_depth(),
            BoolExpr::Or(es) | BoolExpr::And(es) => {
                es.iter().map(|e| e.max_not_depth()).max().unwrap_or(0)
            }
        }
    }
}

impl core::fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BoolExpr::Var(i) => write!(f, "B{i}"),
            BoolExpr::Not(e) => write!(f, "!({e})"),
            BoolExpr::Or(es) => {
                let mut first = true;
                for e in es {
                    if !first {
                        write!(f, " + ")?;
                    }
                    first = false;
                    write!(f, "{e}")?;
                }
                Ok(())
            }
            BoolExpr::And(es) => {
                let mut first = true;
                for e in es {
                    if !first {
                        write!(f, "·")?;
                    }
                    first = false;
                    write!(f, "({e})")?;
                }
                Ok(())
            }
        }
    }
}

/// One thermometer-code row: inputs B_j and the binary word Y_i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    /// b[j] = B_j, j = 0 .. 2^m − 2.
    pub b: Vec<bool>,
    /// y[i] = Y_i, i = 0 .. m − 1.
    pub y: Vec<bool>,
}

/// Thermometer-to-binary decode table for order `m`.
pub fn thermometer_decode_table(m: usize) -> Result<Vec<TableRow>> {
    if m == 0 || m > MAX_ORDER {
        return Err(Error::Domain("order must be between 1 and 8"));
    }
    let symbols = 1usize << m;
    let mut rows = Vec::with_capacity(symbols);
    for s in 0..symbols {
        let b = (0..symbols - 1).map(|j| j < s).collect();
        let y = (0..m).map(|i| (s >> i) & 1 == 1).collect();
        rows.push(TableRow { b, y });
    }
    Ok(rows)
}

fn simplify_or(mut terms: Vec<BoolExpr>) -> BoolExpr {
    if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        BoolExpr::Or(terms)
    }
}

/// AND-free back-end expressions, one per output bit Y_i.
///
/// Y_{m−1} reduces to the single signal B_{2^{m−1}−1}; lower bits combine a
/// pass-through term with inverted pair-sums, which is exactly what NOT and
/// ID populations feeding a shared lane compute.
pub fn ilf_backend(m: usize) -> Result<Vec<BoolExpr>> {
    if m == 0 || m > MAX_ORDER {
        return Err(Error::Domain("order must be between 1 and 8"));
    }
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        if i == m - 1 {
            out.push(BoolExpr::Var((1 << (m - 1)) - 1));
            continue;
        }
        let q = (1usize << m) - 1 - (1 << i);
        let mut terms = vec![BoolExpr::Var(q)];
        let reps = (1usize << (m - i - 1)) - 1;
        for l in 1..=reps {
            let a = q - (2 * l - 1) * (1 << i);
            let b = q - 2 * l * (1 << i);
            terms.push(BoolExpr::Not(Box::new(BoolExpr::Or(vec![
                BoolExpr::Var(a),
                BoolExpr::Not(Box::new(BoolExpr::Var(b))),
            ]))));
        }
        out.push(simplify_or(terms));
    }
    Ok(out)
}

/// Sum-of-products back-end over the valid thermometer rows only; the
/// non-thermometer input combinations are unreachable by construction.
pub fn sop_backend(m: usize) -> Result<Vec<BoolExpr>> {
    let table = thermometer_decode_table(m)?;
    let vars = (1usize << m) - 1;
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut minterms = Vec::new();
        for row in &table {
            if !row.y[i] {
                continue;
            }
            let lits: Vec<BoolExpr> = (0..vars)
                .map(|j| {
                    if row.b[j] {
                        BoolExpr::Var(j)
                    } else {
                        BoolExpr::Not(Box::new(BoolExpr::Var(j)))
                    }
                })
                .collect();
            minterms.push(if lits.len() == 1 {
                lits.into_iter().next().unwrap()
            } else {
                BoolExpr::And(lits)
            });
        }
        out.push(simplify_or(minterms));
    }
    Ok(out)
}

/// One spatially confined cell population.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Population {
    pub name: String,
    pub kind: BlockKind,
    pub lane: Surface,
    /// Upstream face where molecules are absorbed (µm).
    pub absorb_x: f64,
    /// Downstream face where produced molecules are released (µm).
    pub emit_x: f64,
    pub input: SpeciesId,
    pub output: SpeciesId,
    /// Relative cell count (bit weighting ε).
    pub gain: f64,
    /// Threshold-molecule level (nM), thresholding units only.
    pub threshold_level: Option<f64>,
    /// Thermometer signal index this population realizes, when applicable.
    pub bit_ref: Option<usize>,
}

/// External input: one bit line releasing molecules on a lane.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SourceSpec {
    pub name: String,
    pub bit: usize,
    pub lane: Surface,
    pub emit_x: f64,
    pub species: SpeciesId,
}

/// Detection wall segment tallying absorbed molecules.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SinkSpec {
    pub name: String,
    /// Output bit index this wall reads out.
    pub bit: usize,
    pub lane: Surface,
    pub absorb_x: f64,
    pub species: SpeciesId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NodeRef {
    Source(usize),
    Population(usize),
    Sink(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Edge {
    pub from: NodeRef,
    pub to: NodeRef,
}

/// A synthesized consortium layout: populations, IO, and propagation edges.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CircuitLayout {
    pub populations: Vec<Population>,
    pub sources: Vec<SourceSpec>,
    pub sinks: Vec<SinkSpec>,
    pub edges: Vec<Edge>,
}

/// Geometry of one propagation edge: distance, emitting and absorbing
/// surfaces, species carried.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGeometry {
    pub distance: f64,
    pub emit: Surface,
    pub absorb: Surface,
    pub species: SpeciesId,
}

impl CircuitLayout {
    pub fn edge_geometry(&self, edge: &Edge) -> Result<EdgeGeometry> {
        let (emit_x, emit, species) = match edge.from {
            NodeRef::Source(i) => {
                let s = self.sources.get(i).ok_or(Error::Wiring("bad source index".into()))?;
                (s.emit_x, s.lane, s.species.clone())
            }
            NodeRef::Population(i) => {
                let p =
                    self.populations.get(i).ok_or(Error::Wiring("bad population index".into()))?;
                (p.emit_x, p.lane, p.output.clone())
            }
            NodeRef::Sink(_) => return Err(Error::Wiring("sinks cannot emit".into())),
        };
        let (absorb_x, absorb, wanted) = match edge.to {
            NodeRef::Population(i) => {
                let p =
                    self.populations.get(i).ok_or(Error::Wiring("bad population index".into()))?;
                (p.absorb_x, p.lane, p.input.clone())
            }
            NodeRef::Sink(i) => {
                let s = self.sinks.get(i).ok_or(Error::Wiring("bad sink index".into()))?;
                (s.absorb_x, s.lane, s.species.clone())
            }
            NodeRef::Source(_) => return Err(Error::Wiring("sources cannot absorb".into())),
        };
        if species != wanted {
            return Err(Error::Wiring(format!(
                "edge carries {species} into a {wanted} consumer"
            )));
        }
        let distance = absorb_x - emit_x;
        if !(distance > 0.0) {
            return Err(Error::Wiring("edge distance must be positive".into()));
        }
        Ok(EdgeGeometry { distance, emit, absorb, species })
    }

    /// Structural checks: positive, downstream-directed edges (which also
    /// rules out cycles), species-consistent wiring, and signal orthogonality
    /// (no two emitters sharing a release station and overlapping lanes may
    /// carry the same species).
    pub fn validate(&self) -> Result<()> {
        for p in &self.populations {
            if !(p.emit_x >= p.absorb_x) {
                return Err(Error::Wiring(format!(
                    "population {} releases upstream of its absorbing face",
                    p.name
                )));
            }
            if !(p.gain > 0.0) {
                return Err(Error::Wiring(format!("population {} has non-positive gain", p.name)));
            }
            if p.kind == BlockKind::Threshold && p.threshold_level.is_none() {
                return Err(Error::Config(format!(
                    "thresholding population {} has no threshold level",
                    p.name
                )));
            }
        }
        for e in &self.edges {
            self.edge_geometry(e)?;
        }
        // Orthogonality per shared release station.
        let mut emitters: BTreeMap<u64, Vec<(Surface, SpeciesId, &str)>> = BTreeMap::new();
        for s in &self.sources {
            emitters
                .entry(s.emit_x.to_bits())
                .or_default()
                .push((s.lane, s.species.clone(), &s.name));
        }
        for p in &self.populations {
            emitters
                .entry(p.emit_x.to_bits())
                .or_default()
                .push((p.lane, p.output.clone(), &p.name));
        }
        for group in emitters.values() {
            for (i, a) in group.iter().enumerate() {
                for b in &group[i + 1..] {
                    if a.0.overlaps(&b.0) && a.1 == b.1 {
                        return Err(Error::Wiring(format!(
                            "{} and {} emit {} into overlapping lanes at one station",
                            a.2, b.2, a.1
                        )));
                    }
                }
            }
        }
        // Every population must be reachable and feed something.
        let mut has_in = vec![false; self.populations.len()];
        let mut has_out = vec![false; self.populations.len()];
        for e in &self.edges {
            if let NodeRef::Population(i) = e.to {
                has_in[i] = true;
            }
            if let NodeRef::Population(i) = e.from {
                has_out[i] = true;
            }
        }
        if let Some(i) = has_in.iter().position(|v| !v) {
            return Err(Error::Wiring(format!(
                "population {} receives no input",
                self.populations[i].name
            )));
        }
        if let Some(i) = has_out.iter().position(|v| !v) {
            return Err(Error::Wiring(format!(
                "population {} feeds nothing",
                self.populations[i].name
            )));
        }
        Ok(())
    }

    /// DOT digraph description for visualization.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph consortium {\n  rankdir=LR;\n");
        for src in &self.sources {
            s += &format!(
                "  \"{}\" [shape=circle,label=\"{}\\nbit {}\"];\n",
                src.name, src.name, src.bit
            );
        }
        for p in &self.populations {
            let kind = match p.kind {
                BlockKind::Id => "ID",
                BlockKind::Not => "NOT",
                BlockKind::Threshold => "THR",
            };
            s += &format!(
                "  \"{}\" [shape=box,label=\"{} {}\\n{}->{} y[{:.2},{:.2}]\"];\n",
                p.name, kind, p.name, p.input, p.output, p.lane.y_lo, p.lane.y_hi
            );
        }
        for sink in &self.sinks {
            s += &format!(
                "  \"{}\" [shape=doublecircle,label=\"{}\\nY{}\"];\n",
                sink.name, sink.name, sink.bit
            );
        }
        let name_of = |r: &NodeRef| -> String {
            match r {
                NodeRef::Source(i) => self.sources[*i].name.clone(),
                NodeRef::Population(i) => self.populations[*i].name.clone(),
                NodeRef::Sink(i) => self.sinks[*i].name.clone(),
            }
        };
        for e in &self.edges {
            if let Ok(g) = self.edge_geometry(e) {
                s += &format!(
                    "  \"{}\" -> \"{}\" [label=\"{} {:.0}um\"];\n",
                    name_of(&e.from),
                    name_of(&e.to),
                    g.species,
                    g.distance
                );
            }
        }
        s += "}\n";
        s
    }

    /// Evaluates the layout as pure Boolean logic: thresholding units read
    /// their thermometer signal, ID passes, NOT inverts, shared absorbs OR.
    pub fn evaluate_logic(&self, b: &[bool]) -> Result<BTreeMap<String, bool>> {
        let n = self.populations.len();
        let mut value = vec![None::<bool>; n];
        // Populations are x-ordered by construction; resolve iteratively.
        let mut progress = true;
        while progress {
            progress = false;
            for (i, p) in self.populations.iter().enumerate() {
                if value[i].is_some() {
                    continue;
                }
                if p.kind == BlockKind::Threshold {
                    let j = p.bit_ref.ok_or_else(|| {
                        Error::Wiring(format!("threshold {} lacks a signal index", p.name))
                    })?;
                    value[i] = Some(*b.get(j).ok_or(Error::Domain("thermometer word too short"))?);
                    progress = true;
                    continue;
                }
                // Modulator populations sit upstream of the thresholds and
                // play no role in the back-end logic.
                if self.edges.iter().any(|e| {
                    e.to == NodeRef::Population(i) && matches!(e.from, NodeRef::Source(_))
                }) {
                    value[i] = Some(false);
                    progress = true;
                    continue;
                }
                let mut acc = Some(false);
                for e in &self.edges {
                    if e.to != NodeRef::Population(i) {
                        continue;
                    }
                    match e.from {
                        NodeRef::Population(k) => match value[k] {
                            Some(v) => acc = acc.map(|a| a || v),
                            None => {
                                acc = None;
                                break;
                            }
                        },
                        NodeRef::Source(_) | NodeRef::Sink(_) => unreachable!("handled above"),
                    }
                }
                if let Some(v) = acc {
                    value[i] = Some(match p.kind {
                        BlockKind::Id => v,
                        BlockKind::Not => !v,
                        BlockKind::Threshold => unreachable!(),
                    });
                    progress = true;
                }
            }
        }
        let mut out = BTreeMap::new();
        for sink in &self.sinks {
            let mut acc = false;
            for e in &self.edges {
                if let (NodeRef::Population(k), NodeRef::Sink(si)) = (e.from, e.to) {
                    if self.sinks[si].name == sink.name {
                        acc = acc
                            || value[k]
                                .ok_or(Error::Wiring("unresolved population in logic view".into()))?;
                    }
                }
            }
            out.insert(sink.name.clone(), acc);
        }
        Ok(out)
    }
}

mod species_names {
    //! The reusable cell library wires consortia with three molecules.
    pub const INPUT: &str = "aCa";
    pub const CARRIER: &str = "DOX";
    pub const RELAY: &str = "aSc";
}

/// Synthesizes the consortium layout for an order-`m` link.
///
/// `thresholds[j]` is the threshold-molecule level of unit B_j; every
/// physical copy of the unit shares it. Orders 1 and 2 reproduce the
/// reference binary/quadruple designs on the given geometry; higher orders
/// allocate equal-width lanes, one per thermometer-signal usage.
pub fn synthesize(
    m: usize,
    geometry: &ChannelGeometry,
    thresholds: &[f64],
) -> Result<CircuitLayout> {
    geometry.validate()?;
    if m == 0 || m > MAX_ORDER {
        return Err(Error::Synthesis(format!("order {m} outside 1..={MAX_ORDER}")));
    }
    let needed = (1usize << m) - 1;
    if thresholds.len() != needed {
        return Err(Error::Synthesis(format!(
            "order {m} needs {needed} threshold levels, got {}",
            thresholds.len()
        )));
    }
    if thresholds.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Synthesis("threshold levels must be non-negative".into()));
    }
    match m {
        1 => synthesize_order1(geometry, thresholds),
        2 => synthesize_order2(geometry, thresholds),
        _ => synthesize_general(m, geometry, thresholds),
    }
}

fn station(geometry: &ChannelGeometry, k: usize, need: usize) -> Result<f64> {
    if geometry.stations.len() < need {
        return Err(Error::Synthesis(format!(
            "layout needs {need} stations, geometry provides {}",
            geometry.stations.len()
        )));
    }
    geometry.station(k)
}

fn synthesize_order1(geometry: &ChannelGeometry, thresholds: &[f64]) -> Result<CircuitLayout> {
    let lane = Surface::new(0.0, geometry.width())?;
    let l = |k| station(geometry, k, 6);
    let aca = SpeciesId::new(species_names::INPUT);
    let dox = SpeciesId::new(species_names::CARRIER);
    let asc = SpeciesId::new(species_names::RELAY);

    let sources = vec![SourceSpec {
        name: "s0".into(),
        bit: 0,
        lane,
        emit_x: l(0)?,
        species: aca.clone(),
    }];
    let populations = vec![
        Population {
            name: "tx_id".into(),
            kind: BlockKind::Id,
            lane,
            absorb_x: l(1)?,
            emit_x: l(2)?,
            input: aca,
            output: dox.clone(),
            gain: 1.0,
            threshold_level: None,
            bit_ref: None,
        },
        Population {
            name: "rx_thr_b0".into(),
            kind: BlockKind::Threshold,
            lane,
            absorb_x: l(3)?,
            emit_x: l(4)?,
            input: dox,
            output: asc.clone(),
            gain: 1.0,
            threshold_level: Some(thresholds[0]),
            bit_ref: Some(0),
        },
    ];
    let sinks = vec![SinkSpec {
        name: "y0".into(),
        bit: 0,
        lane,
        absorb_x: l(5)?,
        species: asc,
    }];
    let edges = vec![
        Edge { from: NodeRef::Source(0), to: NodeRef::Population(0) },
        Edge { from: NodeRef::Population(0), to: NodeRef::Population(1) },
        Edge { from: NodeRef::Population(1), to: NodeRef::Sink(0) },
    ];
    let layout = CircuitLayout { populations, sources, sinks, edges };
    layout.validate()?;
    Ok(layout)
}

fn synthesize_order2(geometry: &ChannelGeometry, thresholds: &[f64]) -> Result<CircuitLayout> {
    if geometry.lanes.len() < 5 {
        return Err(Error::Synthesis("order 2 needs the five lane boundaries W0..W4".into()));
    }
    let l = |k| station(geometry, k, 10);
    let lane = |i, j| geometry.lane_surface(i, j);
    let aca = SpeciesId::new(species_names::INPUT);
    let dox = SpeciesId::new(species_names::CARRIER);
    let asc = SpeciesId::new(species_names::RELAY);

    // The S1 population holds twice the cells of S0; at order 2 that
    // weighting is realized geometrically by giving S1 the double-width
    // lane, so a 50 nM input carries 1500 molecules on the S1 line against
    // 750 on the S0 line and the released amounts weigh 2:1.
    let sources = vec![
        SourceSpec { name: "s1".into(), bit: 1, lane: lane(0, 3)?, emit_x: l(0)?, species: aca.clone() },
        SourceSpec { name: "s0".into(), bit: 0, lane: lane(3, 4)?, emit_x: l(0)?, species: aca.clone() },
    ];

    let mut populations = Vec::new();
    let mut edges = Vec::new();

    populations.push(Population {
        name: "tx_s1".into(),
        kind: BlockKind::Id,
        lane: lane(0, 3)?,
        absorb_x: l(1)?,
        emit_x: l(2)?,
        input: aca.clone(),
        output: dox.clone(),
        gain: 1.0,
        threshold_level: None,
        bit_ref: None,
    });
    populations.push(Population {
        name: "tx_s0".into(),
        kind: BlockKind::Id,
        lane: lane(3, 4)?,
        absorb_x: l(1)?,
        emit_x: l(2)?,
        input: aca.clone(),
        output: dox.clone(),
        gain: 1.0,
        threshold_level: None,
        bit_ref: None,
    });
    edges.push(Edge { from: NodeRef::Source(0), to: NodeRef::Population(0) });
    edges.push(Edge { from: NodeRef::Source(1), to: NodeRef::Population(1) });

    // Demodulator front-end: the B1 signal is consumed on two lanes, so four
    // physical thresholding populations realize the three threshold levels.
    let front = [
        ("rx_thr_b0", 0usize, (0usize, 1usize)),
        ("rx_thr_b1_y0", 1, (1, 2)),
        ("rx_thr_b2", 2, (2, 3)),
        ("rx_thr_b1_y1", 1, (3, 4)),
    ];
    let mut th_index = BTreeMap::new();
    for (name, bit, (i, j)) in front {
        th_index.insert(name, populations.len());
        populations.push(Population {
            name: name.into(),
            kind: BlockKind::Threshold,
            lane: lane(i, j)?,
            absorb_x: l(3)?,
            emit_x: l(4)?,
            input: dox.clone(),
            output: asc.clone(),
            gain: 1.0,
            threshold_level: Some(thresholds[bit]),
            bit_ref: Some(bit),
        });
        // Both transmitter populations reach every thresholding lane.
        let to = NodeRef::Population(th_index[name]);
        edges.push(Edge { from: NodeRef::Population(0), to });
        edges.push(Edge { from: NodeRef::Population(1), to });
    }

    // Back-end layer 1 (relay -> input molecules).
    let layer1 = [
        ("be_not_b0", BlockKind::Not, (0usize, 1usize), "rx_thr_b0"),
        ("be_id_b1", BlockKind::Id, (1, 2), "rx_thr_b1_y0"),
        ("be_not_b2", BlockKind::Not, (2, 3), "rx_thr_b2"),
        ("be_not_b1", BlockKind::Not, (3, 4), "rx_thr_b1_y1"),
    ];
    let mut l1_index = BTreeMap::new();
    for (name, kind, (i, j), feed) in layer1 {
        l1_index.insert(name, populations.len());
        populations.push(Population {
            name: name.into(),
            kind,
            lane: lane(i, j)?,
            absorb_x: l(5)?,
            emit_x: l(6)?,
            input: asc.clone(),
            output: aca.clone(),
            gain: 1.0,
            threshold_level: None,
            bit_ref: None,
        });
        edges.push(Edge {
            from: NodeRef::Population(th_index[feed]),
            to: NodeRef::Population(l1_index[name]),
        });
    }

    // Back-end layer 2 (input molecules -> relay): the Y0 mixed term absorbs
    // over both of its source lanes at once.
    let y0_mix = populations.len();
    populations.push(Population {
        name: "be_not_y0_mix".into(),
        kind: BlockKind::Not,
        lane: lane(0, 2)?,
        absorb_x: l(7)?,
        emit_x: l(8)?,
        input: aca.clone(),
        output: asc.clone(),
        gain: 1.0,
        threshold_level: None,
        bit_ref: None,
    });
    let y0_b2 = populations.len();
    populations.push(Population {
        name: "be_not_y0_b2".into(),
        kind: BlockKind::Not,
        lane: lane(2, 3)?,
        absorb_x: l(7)?,
        emit_x: l(8)?,
        input: aca.clone(),
        output: asc.clone(),
        gain: 1.0,
        threshold_level: None,
        bit_ref: None,
    });
    let y1_not = populations.len();
    populations.push(Population {
        name: "be_not_y1".into(),
        kind: BlockKind::Not,
        lane: lane(3, 4)?,
        absorb_x: l(7)?,
        emit_x: l(8)?,
        input: aca,
        output: asc.clone(),
        gain: 1.0,
        threshold_level: None,
        bit_ref: None,
    });
    edges.push(Edge { from: NodeRef::Population(l1_index["be_not_b0"]), to: NodeRef::Population(y0_mix) });
    edges.push(Edge { from: NodeRef::Population(l1_index["be_id_b1"]), to: NodeRef::Population(y0_mix) });
    edges.push(Edge { from: NodeRef::Population(l1_index["be_not_b2"]), to: NodeRef::Population(y0_b2) });
    edges.push(Edge { from: NodeRef::Population(l1_index["be_not_b1"]), to: NodeRef::Population(y1_not) });

    let sinks = vec![
        SinkSpec { name: "y1".into(), bit: 1, lane: lane(3, 4)?, absorb_x: l(9)?, species: asc.clone() },
        SinkSpec { name: "y0".into(), bit: 0, lane: lane(0, 3)?, absorb_x: l(9)?, species: asc },
    ];
    edges.push(Edge { from: NodeRef::Population(y1_not), to: NodeRef::Sink(0) });
    edges.push(Edge { from: NodeRef::Population(y0_b2), to: NodeRef::Sink(1) });
    edges.push(Edge { from: NodeRef::Population(y0_mix), to: NodeRef::Sink(1) });

    let layout = CircuitLayout { populations, sources, sinks, edges };
    layout.validate()?;
    Ok(layout)
}

/// General recipe: one lane slot per thermometer-signal usage, grouped per
/// output bit so each sink spans a contiguous band.
fn synthesize_general(
    m: usize,
    geometry: &ChannelGeometry,
    thresholds: &[f64],
) -> Result<CircuitLayout> {
    let l = |k| station(geometry, k, 10);
    let aca = SpeciesId::new(species_names::INPUT);
    let dox = SpeciesId::new(species_names::CARRIER);
    let asc = SpeciesId::new(species_names::RELAY);
    let width = geometry.width();

    // Terms per output bit, expressed as thermometer-signal usages.
    enum Term {
        Pass(usize),
        Mix { id_sig: usize, not_sig: usize },
    }
    let mut per_bit: Vec<Vec<Term>> = Vec::with_capacity(m);
    for i in 0..m {
        if i == m - 1 {
            per_bit.push(vec![Term::Pass((1 << (m - 1)) - 1)]);
            continue;
        }
        let q = (1usize << m) - 1 - (1 << i);
        let mut terms = vec![Term::Pass(q)];
        for level in 1..=((1usize << (m - i - 1)) - 1) {
            terms.push(Term::Mix {
                id_sig: q - (2 * level - 1) * (1 << i),
                not_sig: q - 2 * level * (1 << i),
            });
        }
        per_bit.push(terms);
    }
    let slots: usize = per_bit
        .iter()
        .flat_map(|ts| ts.iter())
        .map(|t| match t {
            Term::Pass(_) => 1,
            Term::Mix { .. } => 2,
        })
        .sum();
    let slot_w = width / slots as f64;
    let slot_lane = |s: usize, n: usize| Surface::new(s as f64 * slot_w, (s + n) as f64 * slot_w);

    let mut populations = Vec::new();
    let mut sources = Vec::new();
    let mut sinks = Vec::new();
    let mut edges = Vec::new();

    // Modulator: equal lanes, cell counts weighted 2^i.
    let tx_w = width / m as f64;
    let mut tx_ids = Vec::new();
    for bit in 0..m {
        let lane = Surface::new(bit as f64 * tx_w, (bit + 1) as f64 * tx_w)?;
        sources.push(SourceSpec {
            name: format!("s{bit}"),
            bit,
            lane,
            emit_x: l(0)?,
            species: aca.clone(),
        });
        let idx = populations.len();
        tx_ids.push(idx);
        populations.push(Population {
            name: format!("tx_s{bit}"),
            kind: BlockKind::Id,
            lane,
            absorb_x: l(1)?,
            emit_x: l(2)?,
            input: aca.clone(),
            output: dox.clone(),
            gain: (1u64 << bit) as f64,
            threshold_level: None,
            bit_ref: None,
        });
        edges.push(Edge { from: NodeRef::Source(bit), to: NodeRef::Population(idx) });
    }

    let mut slot = 0usize;
    for (bit, terms) in per_bit.iter().enumerate() {
        let band_start = slot;
        let mut feeders = Vec::new();
        for (ti, term) in terms.iter().enumerate() {
            let mut threshold_unit = |sig: usize, lane: Surface, tag: &str| -> Result<usize> {
                let idx = populations.len();
                populations.push(Population {
                    name: format!("thr_b{sig}_{tag}"),
                    kind: BlockKind::Threshold,
                    lane,
                    absorb_x: l(3)?,
                    emit_x: l(4)?,
                    input: dox.clone(),
                    output: asc.clone(),
                    gain: 1.0,
                    threshold_level: Some(thresholds[sig]),
                    bit_ref: Some(sig),
                });
                for &tx in &tx_ids {
                    edges.push(Edge { from: NodeRef::Population(tx), to: NodeRef::Population(idx) });
                }
                Ok(idx)
            };
            match term {
                Term::Pass(sig) => {
                    let lane = slot_lane(slot, 1)?;
                    let tag = format!("y{bit}t{ti}");
                    let th = threshold_unit(*sig, lane, &tag)?;
                    let n1 = populations.len();
                    populations.push(Population {
                        name: format!("inv1_{tag}"),
                        kind: BlockKind::Not,
                        lane,
                        absorb_x: l(5)?,
                        emit_x: l(6)?,
                        input: asc.clone(),
                        output: aca.clone(),
                        gain: 1.0,
                        threshold_level: None,
                        bit_ref: None,
                    });
                    let n2 = populations.len();
                    populations.push(Population {
                        name: format!("inv2_{tag}"),
                        kind: BlockKind::Not,
                        lane,
                        absorb_x: l(7)?,
                        emit_x: l(8)?,
                        input: aca.clone(),
                        output: asc.clone(),
                        gain: 1.0,
                        threshold_level: None,
                        bit_ref: None,
                    });
                    edges.push(Edge { from: NodeRef::Population(th), to: NodeRef::Population(n1) });
                    edges.push(Edge { from: NodeRef::Population(n1), to: NodeRef::Population(n2) });
                    feeders.push(n2);
                    slot += 1;
                }
                Term::Mix { id_sig, not_sig } => {
                    let lane_id = slot_lane(slot, 1)?;
                    let lane_not = slot_lane(slot + 1, 1)?;
                    let lane_both = slot_lane(slot, 2)?;
                    let tag_id = format!("y{bit}t{ti}a");
                    let tag_not = format!("y{bit}t{ti}b");
                    let th_id = threshold_unit(*id_sig, lane_id, &tag_id)?;
                    let th_not = threshold_unit(*not_sig, lane_not, &tag_not)?;
                    let pass = populations.len();
                    populations.push(Population {
                        name: format!("pass_{tag_id}"),
                        kind: BlockKind::Id,
                        lane: lane_id,
                        absorb_x: l(5)?,
                        emit_x: l(6)?,
                        input: asc.clone(),
                        output: aca.clone(),
                        gain: 1.0,
                        threshold_level: None,
                        bit_ref: None,
                    });
                    let inv = populations.len();
                    populations.push(Population {
                        name: format!("inv1_{tag_not}"),
                        kind: BlockKind::Not,
                        lane: lane_not,
                        absorb_x: l(5)?,
                        emit_x: l(6)?,
                        input: asc.clone(),
                        output: aca.clone(),
                        gain: 1.0,
                        threshold_level: None,
                        bit_ref: None,
                    });
                    let merge = populations.len();
                    populations.push(Population {
                        name: format!("inv2_y{bit}t{ti}"),
                        kind: BlockKind::Not,
                        lane: lane_both,
                        absorb_x: l(7)?,
                        emit_x: l(8)?,
                        input: aca.clone(),
                        output: asc.clone(),
                        gain: 1.0,
                        threshold_level: None,
                        bit_ref: None,
                    });
                    edges.push(Edge { from: NodeRef::Population(th_id), to: NodeRef::Population(pass) });
                    edges.push(Edge { from: NodeRef::Population(th_not), to: NodeRef::Population(inv) });
                    edges.push(Edge { from: NodeRef::Population(pass), to: NodeRef::Population(merge) });
                    edges.push(Edge { from: NodeRef::Population(inv), to: NodeRef::Population(merge) });
                    feeders.push(merge);
                    slot += 2;
                }
            }
        }
        let sink_idx = sinks.len();
        sinks.push(SinkSpec {
            name: format!("y{bit}"),
            bit,
            lane: slot_lane(band_start, slot - band_start)?,
            absorb_x: l(9)?,
            species: asc.clone(),
        });
        for f in feeders {
            edges.push(Edge { from: NodeRef::Population(f), to: NodeRef::Sink(sink_idx) });
        }
    }

    let layout = CircuitLayout { populations, sources, sinks, edges };
    layout.validate()?;
    Ok(layout)
}
