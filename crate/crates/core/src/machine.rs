//! The electrode state machine: run every input string, collect per-step
//! spike states, and analyse the resulting transition graphs.
//!
//! States are `k`-bit words with electrode 0 in the most significant bit.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::automaton::AutomatonParams;
use crate::electrodes::{bits_from_value, run_trials, Electrode, RecordingParams, Trial};
use crate::error::{Error, Result};
use crate::grid::ConductiveMatrix;

pub const MAX_ELECTRODES: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct MachineConfig {
    pub electrodes: Vec<Electrode>,
    pub params: AutomatonParams,
    pub rec: RecordingParams,
}

impl MachineConfig {
    pub fn new(electrodes: Vec<Electrode>) -> Self {
        MachineConfig {
            electrodes,
            params: AutomatonParams::default(),
            rec: RecordingParams::default(),
        }
    }

    pub fn k(&self) -> usize {
        self.electrodes.len()
    }

    pub fn state_count(&self) -> u32 {
        1 << self.k()
    }

    pub fn validate(&self) -> Result<()> {
        if self.electrodes.is_empty() || self.k() > MAX_ELECTRODES {
            return Err(Error::param(
                "electrodes",
                format!("need 1..={MAX_ELECTRODES} electrodes, got {}", self.k()),
            ));
        }
        self.params.validate()?;
        self.rec.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSequence {
    pub input: u32,
    /// State at steps `1..=T`.
    pub states: Vec<u32>,
}

impl StateSequence {
    pub fn transitions(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.states.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Simulates inputs `1..2^k`. Input 0 is not simulated.
pub fn run_input_trials(cfg: &MachineConfig, matrix: &Arc<ConductiveMatrix>) -> Result<Vec<Trial>> {
    cfg.validate()?;
    let inputs: Vec<Vec<bool>> = (1..cfg.state_count())
        .map(|v| bits_from_value(v, cfg.k()))
        .collect();
    run_trials(matrix, &cfg.params, &cfg.rec, &cfg.electrodes, &inputs)
}

/// Sequences for inputs `0..2^k`; input 0 is the all-zero trajectory.
pub fn sequences_from_trials(trials: &[Trial], steps: usize) -> Vec<StateSequence> {
    let mut seqs = Vec::with_capacity(trials.len() + 1);
    seqs.push(StateSequence {
        input: 0,
        states: vec![0; steps],
    });
    seqs.extend(trials.iter().map(|t| StateSequence {
        input: t.input_value(),
        states: t.states.clone(),
    }));
    seqs
}

pub fn run_all_inputs(cfg: &MachineConfig, matrix: &Arc<ConductiveMatrix>) -> Result<Vec<StateSequence>> {
    let trials = run_input_trials(cfg, matrix)?;
    Ok(sequences_from_trials(&trials, cfg.rec.steps))
}

pub fn sequences_csv(seqs: &[StateSequence], comment: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(c) = comment {
        let _ = writeln!(s, "# {c}");
    }
    s.push_str("input");
    for t in 1..=seqs.first().map_or(0, |q| q.states.len()) {
        let _ = write!(s, ",{t}");
    }
    s.push('\n');
    for q in seqs {
        let _ = write!(s, "{}", q.input);
        for v in &q.states {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// Distinct consecutive-state pairs of one sequence, without the `0 -> 0`
/// self-loop.
pub fn per_input_graph(seq: &StateSequence) -> BTreeSet<(u32, u32)> {
    seq.transitions().filter(|&e| e != (0, 0)).collect()
}

pub fn per_input_dot(seq: &StateSequence, comment: Option<&str>) -> String {
    let edges = per_input_graph(seq);
    let nodes: BTreeSet<u32> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    let mut s = format!("digraph input_{} {{\n", seq.input);
    if let Some(c) = comment {
        let _ = writeln!(s, "  // {c}");
    }
    for n in nodes {
        let _ = writeln!(s, "  {n};");
    }
    for (a, b) in edges {
        let _ = writeln!(s, "  {a} -> {b};");
    }
    s.push_str("}\n");
    s
}

/// Transition counts over all inputs, restricted to non-zero sources.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TransitionGraph {
    counts: BTreeMap<(u32, u32), u64>,
    out_totals: BTreeMap<u32, u64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedEdge {
    pub from: u32,
    pub to: u32,
    pub count: u64,
    pub weight: f64,
}

impl TransitionGraph {
    pub fn count(&self, a: u32, b: u32) -> u64 {
        self.counts.get(&(a, b)).copied().unwrap_or(0)
    }

    pub fn out_total(&self, a: u32) -> u64 {
        self.out_totals.get(&a).copied().unwrap_or(0)
    }

    pub fn weight(&self, a: u32, b: u32) -> f64 {
        match self.out_total(a) {
            0 => 0.0,
            total => self.count(a, b) as f64 / total as f64,
        }
    }

    pub fn edges(&self) -> impl Iterator<Item = WeightedEdge> + '_ {
        self.counts.iter().map(|(&(from, to), &count)| WeightedEdge {
            from,
            to,
            count,
            weight: count as f64 / self.out_totals[&from] as f64,
        })
    }

    pub fn edge_count(&self) -> usize {
        self.counts.len()
    }

    pub fn total_count(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn sources(&self) -> impl Iterator<Item = u32> + '_ {
        self.out_totals.keys().copied()
    }

    /// Every state that appears on some edge.
    pub fn nodes(&self) -> BTreeSet<u32> {
        self.counts.keys().flat_map(|&(a, b)| [a, b]).collect()
    }

    pub fn to_dot(&self, comment: Option<&str>) -> String {
        let mut s = String::from("digraph global {\n");
        if let Some(c) = comment {
            let _ = writeln!(s, "  // {c}");
        }
        for n in self.nodes() {
            let _ = writeln!(s, "  {n};");
        }
        for e in self.edges() {
            let _ = writeln!(
                s,
                "  {} -> {} [weight={:.6}, count={}];",
                e.from, e.to, e.weight, e.count
            );
        }
        s.push_str("}\n");
        s
    }
}

/// Counts consecutive pairs `(a, b)` with `a != 0` across all sequences.
pub fn global_graph(seqs: &[StateSequence]) -> TransitionGraph {
    let mut g = TransitionGraph::default();
    for q in seqs {
        for (a, b) in q.transitions() {
            if a == 0 {
                continue;
            }
            *g.counts.entry((a, b)).or_default() += 1;
            *g.out_totals.entry(a).or_default() += 1;
        }
    }
    g
}

/// Functional graph keeping each node's heaviest outgoing edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrunedGraph {
    pub successor: BTreeMap<u32, u32>,
    pub nodes: BTreeSet<u32>,
}

impl PrunedGraph {
    pub fn indegrees(&self) -> BTreeMap<u32, usize> {
        let mut d: BTreeMap<u32, usize> = self.nodes.iter().map(|&n| (n, 0)).collect();
        for &b in self.successor.values() {
            *d.entry(b).or_default() += 1;
        }
        d
    }

    pub fn fixed_points(&self) -> Vec<u32> {
        self.successor
            .iter()
            .filter(|(a, b)| a == b)
            .map(|(&a, _)| a)
            .collect()
    }

    /// Nodes without predecessors.
    pub fn garden_of_eden(&self) -> Vec<u32> {
        self.indegrees()
            .into_iter()
            .filter(|&(_, d)| d == 0)
            .map(|(n, _)| n)
            .collect()
    }

    /// Nodes without a kept outgoing edge.
    pub fn sinks(&self) -> Vec<u32> {
        self.nodes
            .iter()
            .copied()
            .filter(|n| !self.successor.contains_key(n))
            .collect()
    }

    /// Cycles of length two or more, each rotated to start at its smallest
    /// node.
    pub fn cycles(&self) -> Vec<Vec<u32>> {
        let mut done: BTreeSet<u32> = BTreeSet::new();
        let mut out = Vec::new();
        for &start in &self.nodes {
            if done.contains(&start) {
                continue;
            }
            let mut path = Vec::new();
            let mut on_path: BTreeMap<u32, usize> = BTreeMap::new();
            let mut cur = Some(start);
            while let Some(n) = cur {
                if done.contains(&n) {
                    break;
                }
                if let Some(&pos) = on_path.get(&n) {
                    let cyc = &path[pos..];
                    if cyc.len() >= 2 {
                        let min_at = cyc
                            .iter()
                            .enumerate()
                            .min_by_key(|&(_, v)| v)
                            .map(|(i, _)| i)
                            .unwrap_or(0);
                        let mut c = cyc[min_at..].to_vec();
                        c.extend_from_slice(&cyc[..min_at]);
                        out.push(c);
                    }
                    break;
                }
                on_path.insert(n, path.len());
                path.push(n);
                cur = self.successor.get(&n).copied();
            }
            done.extend(path);
        }
        out.sort();
        out
    }

    pub fn to_dot(&self, g: &TransitionGraph, comment: Option<&str>) -> String {
        let mut s = String::from("digraph pruned {\n");
        if let Some(c) = comment {
            let _ = writeln!(s, "  // {c}");
        }
        for n in &self.nodes {
            let _ = writeln!(s, "  {n};");
        }
        for (&a, &b) in &self.successor {
            let _ = writeln!(s, "  {a} -> {b} [weight={:.6}];", g.weight(a, b));
        }
        s.push_str("}\n");
        s
    }

    pub fn summary(&self, comment: Option<&str>) -> String {
        let list = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        if let Some(c) = comment {
            let _ = writeln!(s, "# {c}");
        }
        let _ = writeln!(s, "fixed_points: {}", list(&self.fixed_points()));
        let _ = writeln!(s, "sinks: {}", list(&self.sinks()));
        let _ = writeln!(s, "garden_of_eden: {}", list(&self.garden_of_eden()));
        let cycles: Vec<String> = self.cycles().iter().map(|c| list(c)).collect();
        let _ = writeln!(s, "cycles: {}", cycles.join("; "));
        let indeg: Vec<String> = self
            .indegrees()
            .into_iter()
            .filter(|&(_, d)| d > 0)
            .map(|(n, d)| format!("{n}={d}"))
            .collect();
        let _ = writeln!(s, "indegree: {}", indeg.join(" "));
        s
    }
}

/// Keeps, per source node, the edge of maximum weight; ties go to the
/// smallest successor.
pub fn prune_max(g: &TransitionGraph) -> PrunedGraph {
    let mut best: BTreeMap<u32, (u64, u32)> = BTreeMap::new();
    // Weights share a denominator per source, so raw counts order them exactly.
    for (&(a, b), &c) in &g.counts {
        match best.get(&a) {
            Some(&(bc, _)) if bc >= c => {}
            _ => {
                best.insert(a, (c, b));
            }
        }
    }
    PrunedGraph {
        successor: best.into_iter().map(|(a, (_, b))| (a, b)).collect(),
        nodes: g.nodes(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RichnessRow {
    /// 1-based index among response moments.
    pub moment: usize,
    /// Raw step `t` in `1..=T`.
    pub step: usize,
    /// Distinct non-zero states, ascending.
    pub states: Vec<u32>,
}

impl RichnessRow {
    pub fn mu(&self) -> usize {
        self.states.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Richness {
    pub rows: Vec<RichnessRow>,
    /// `(input, distinct states visited)`.
    pub nodes_per_input: Vec<(u32, usize)>,
    /// `(state, inputs whose sequence visits it)`.
    pub inputs_per_node: Vec<(u32, usize)>,
}

pub fn richness(seqs: &[StateSequence]) -> Richness {
    let steps = seqs.iter().map(|q| q.states.len()).max().unwrap_or(0);
    let mut rows = Vec::new();
    for t in 0..steps {
        let p: BTreeSet<u32> = seqs
            .iter()
            .filter_map(|q| q.states.get(t).copied())
            .filter(|&s| s != 0)
            .collect();
        if !p.is_empty() {
            rows.push(RichnessRow {
                moment: rows.len() + 1,
                step: t + 1,
                states: p.into_iter().collect(),
            });
        }
    }
    let mut visits: BTreeMap<u32, usize> = BTreeMap::new();
    let nodes_per_input = seqs
        .iter()
        .map(|q| {
            let distinct: BTreeSet<u32> = q.states.iter().copied().collect();
            for &s in &distinct {
                *visits.entry(s).or_default() += 1;
            }
            (q.input, distinct.len())
        })
        .collect();
    Richness {
        rows,
        nodes_per_input,
        inputs_per_node: visits.into_iter().collect(),
    }
}

impl Richness {
    pub fn row(&self, moment: usize) -> Result<&RichnessRow> {
        if moment == 0 || moment > self.rows.len() {
            return Err(Error::Domain(format!(
                "moment {moment} is not a response moment (1..={})",
                self.rows.len()
            )));
        }
        Ok(&self.rows[moment - 1])
    }

    /// First moment with the largest number of distinct states.
    pub fn richest_moment(&self) -> Option<usize> {
        self.rows
            .iter()
            .rev()
            .max_by_key(|r| r.mu())
            .map(|r| r.moment)
    }

    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = comment {
            let _ = writeln!(s, "# {c}");
        }
        s.push_str("t,step,mu,states\n");
        for r in &self.rows {
            let states: Vec<String> = r.states.iter().map(u32::to_string).collect();
            let _ = writeln!(s, "{},{},{},{}", r.moment, r.step, r.mu(), states.join(";"));
        }
        s
    }

    pub fn nodes_per_input_csv(&self, comment: Option<&str>) -> String {
        pairs_csv(comment, "input,nodes", &self.nodes_per_input)
    }

    pub fn inputs_per_node_csv(&self, comment: Option<&str>) -> String {
        pairs_csv(comment, "state,inputs", &self.inputs_per_node)
    }
}

fn pairs_csv(comment: Option<&str>, header: &str, rows: &[(u32, usize)]) -> String {
    let mut s = String::new();
    if let Some(c) = comment {
        let _ = writeln!(s, "# {c}");
    }
    let _ = writeln!(s, "{header}");
    for (a, b) in rows {
        let _ = writeln!(s, "{a},{b}");
    }
    s
}

/// `g(t)`: each input's state at response moment `moment` (1-based).
/// Inputs missing from `seqs`, including 0, map to state 0.
pub fn snapshot_function(
    seqs: &[StateSequence],
    rich: &Richness,
    moment: usize,
    k: usize,
) -> Result<BTreeMap<u32, u32>> {
    let step = rich.row(moment)?.step;
    snapshot_function_at_step(seqs, rich, step, k)
}

/// `g` at raw step `step`, which must be a response moment.
pub fn snapshot_function_at_step(
    seqs: &[StateSequence],
    rich: &Richness,
    step: usize,
    k: usize,
) -> Result<BTreeMap<u32, u32>> {
    if !rich.rows.iter().any(|r| r.step == step) {
        return Err(Error::Domain(format!("step {step} is not a response moment")));
    }
    let mut g: BTreeMap<u32, u32> = (0..1u32 << k).map(|v| (v, 0)).collect();
    for q in seqs {
        if q.input != 0 {
            g.insert(q.input, q.states[step - 1]);
        }
    }
    Ok(g)
}

pub fn snapshot_csv(g: &BTreeMap<u32, u32>, comment: Option<&str>) -> String {
    let mut s = String::new();
    if let Some(c) = comment {
        let _ = writeln!(s, "# {c}");
    }
    s.push_str("input,state\n");
    for (a, b) in g {
        let _ = writeln!(s, "{a},{b}");
    }
    s
}
