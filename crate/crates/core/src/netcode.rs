//! From a fractional rate allocation to an executable linear scheme.
//!
//! Rates are snapped to a common denominator `L`; every packet is split into
//! `L` chunks (block replication of the observation matrices), each terminal
//! sends `r_i = L R_i` random combinations of its own chunked observation over
//! an extension field, and the result is checked by rank.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use petgraph::algo::ford_fulkerson;
use petgraph::dot::Dot;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{DexError, Result};
use crate::field::{make_field, Elem, FieldSpec};
use crate::instance::Instance;
use crate::matrix::FieldMatrix;
use crate::oracle::build_lp;
use crate::rational::{limit_denominator, Rational};
use crate::set::TerminalSet;
use crate::source::LinearSource;

pub const DEFAULT_MAX_DENOMINATOR: u64 = 64;
pub const DEFAULT_MAX_ATTEMPTS: usize = 32;

/// Common denominator `L` of `rates` and the integer chunk-rates `L R_i`.
pub fn rationalize(rates: &[Rational], max_denominator: u64) -> Result<(u64, Vec<u64>)> {
    if let Some(r) = rates.iter().find(|r| r.is_negative()) {
        return Err(DexError::InvalidInstance(format!("negative rate {r}")));
    }
    let mut l = BigInt::from(1);
    for r in rates {
        l = l.lcm(r.denom());
        if l > BigInt::from(max_denominator) {
            return Err(DexError::DenominatorTooLarge {
                needed: l.to_u64().unwrap_or(u64::MAX),
                limit: max_denominator,
            });
        }
    }
    let chunks = rates
        .iter()
        .map(|r| {
            (r.numer() * (&l / r.denom()))
                .to_u64()
                .ok_or(DexError::Overflow("chunk-rate"))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((l.to_u64().expect("bounded by max_denominator"), chunks))
}

/// Rounds each rate to the nearest fraction with denominator at most
/// `max_denominator`, then raises rates until every cut constraint of
/// `instance` holds again. A violated cut is repaired on its cheapest
/// transmitter (lowest weight, then lowest index), rounded up to the current
/// common denominator so `L` does not grow.
pub fn snap_rates(instance: &Instance, rates: &[Rational], max_denominator: u64) -> Result<Vec<Rational>> {
    let m = instance.terminal_count();
    if rates.len() != m {
        return Err(DexError::DimensionMismatch(format!("{} rates for {m} terminals", rates.len())));
    }
    let lp = build_lp(instance)?;
    let senders = instance.transmitters();
    let mut snapped: Vec<Rational> = rates
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if !senders.contains(i) || !r.is_positive() {
                Rational::zero()
            } else {
                limit_denominator(r, max_denominator)
            }
        })
        .collect();
    let grid = snapped
        .iter()
        .fold(BigInt::from(1), |acc, r| acc.lcm(r.denom()));
    let grid = Rational::from_integer(grid);
    loop {
        let Some(v) = lp.violations(&snapped)?.into_iter().next() else {
            return Ok(snapped);
        };
        let target = v
            .set
            .intersection(senders)
            .iter()
            .min_by(|&a, &b| instance.weights()[a].cmp(&instance.weights()[b]).then(a.cmp(&b)))
            .ok_or_else(|| DexError::Infeasible(format!("cut {} has no transmitter", v.set)))?;
        let deficit = &v.required - &v.provided;
        let step = (deficit * &grid).ceil() / &grid;
        snapped[target] += step;
    }
}

/// Block replication of every observation matrix: the source model with each
/// packet split into `chunks` independent sub-symbols.
pub fn extend_source(source: &LinearSource, chunks: usize) -> Result<LinearSource> {
    let mats = source.matrices().iter().map(|a| a.block_replicate(chunks)).collect();
    LinearSource::new(source.field(), source.packet_count() * chunks, mats)
}

/// Smallest `t` with `q^t > 2 |A| N L`. Non-prime source fields always get
/// `t = 1`.
pub fn default_extension_degree(field: &FieldSpec, users: usize, packets: usize, chunks: u64) -> u32 {
    if !field.is_prime_field() {
        return 1;
    }
    let need = 2u128 * users as u128 * packets as u128 * chunks as u128;
    let p = field.characteristic() as u128;
    let mut t = 1;
    let mut q = p;
    while q <= need && q * p <= 1 << 32 {
        q *= p;
        t += 1;
    }
    t
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionScheme {
    source: LinearSource,
    users: TerminalSet,
    chunks: u64,
    extension_degree: u32,
    field: FieldSpec,
    chunk_rates: Vec<u64>,
    /// Chunked observations lifted to the coding field.
    observations: Vec<FieldMatrix>,
    coding: Vec<FieldMatrix>,
}

impl TransmissionScheme {
    /// Assembles a scheme from explicit coding matrices `V_i`
    /// (`r_i x l_i L`, over the extension of degree `extension_degree`).
    pub fn new(
        source: &LinearSource,
        users: TerminalSet,
        chunks: u64,
        extension_degree: u32,
        coding: Vec<FieldMatrix>,
    ) -> Result<Self> {
        let field = coding_field(source.field(), extension_degree)?;
        let m = source.terminal_count();
        if coding.len() != m {
            return Err(DexError::DimensionMismatch(format!("{} coding matrices for {m} terminals", coding.len())));
        }
        if chunks == 0 {
            return Err(DexError::InvalidConfig("chunk count must be positive".into()));
        }
        if users.is_empty() || !users.is_subset(TerminalSet::full(m)) {
            return Err(DexError::InvalidInstance(format!("users {users} invalid")));
        }
        let extended = extend_source(source, chunks as usize)?;
        let observations = extended
            .matrices()
            .iter()
            .map(|a| a.lift(&field))
            .collect::<Result<Vec<_>>>()?;
        for (i, (v, a)) in coding.iter().zip(&observations).enumerate() {
            if v.field() != &field || v.cols() != a.rows() {
                return Err(DexError::DimensionMismatch(format!(
                    "coding matrix {i} must have {} columns over GF({}^{})",
                    a.rows(),
                    field.characteristic(),
                    field.degree()
                )));
            }
        }
        Ok(TransmissionScheme {
            source: source.clone(),
            users,
            chunks,
            extension_degree,
            chunk_rates: coding.iter().map(|v| v.rows() as u64).collect(),
            field,
            observations,
            coding,
        })
    }

    pub fn source(&self) -> &LinearSource {
        &self.source
    }

    pub fn users(&self) -> TerminalSet {
        self.users
    }

    pub fn chunks(&self) -> u64 {
        self.chunks
    }

    pub fn extension_degree(&self) -> u32 {
        self.extension_degree
    }

    pub fn coding_field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn chunk_rates(&self) -> &[u64] {
        &self.chunk_rates
    }

    pub fn coding(&self) -> &[FieldMatrix] {
        &self.coding
    }

    /// Total symbols sent, in units of whole packets.
    pub fn total_rate(&self) -> Rational {
        let sum: u64 = self.chunk_rates.iter().sum();
        Rational::new(sum.into(), self.chunks.into())
    }

    /// Coded rows `V_i A'_i` of terminal `i`, in terms of the chunked source.
    pub fn transmission_matrix(&self, i: usize) -> FieldMatrix {
        self.coding[i]
            .mul(&self.observations[i])
            .expect("shapes checked at construction")
    }

    fn received(&self, user: usize) -> FieldMatrix {
        let own = &self.observations[user];
        let sent: Vec<FieldMatrix> = (0..self.coding.len())
            .filter(|&i| i != user)
            .map(|i| self.transmission_matrix(i))
            .collect();
        let mut parts = vec![own];
        parts.extend(sent.iter());
        FieldMatrix::vstack(&self.field, own.cols(), &parts).expect("same column count")
    }

    fn unknowns(&self) -> usize {
        self.source.packet_count() * self.chunks as usize
    }
}

fn coding_field(source: &FieldSpec, extension_degree: u32) -> Result<FieldSpec> {
    if extension_degree == 0 {
        return Err(DexError::InvalidConfig("extension degree must be positive".into()));
    }
    if extension_degree == 1 {
        return Ok(source.clone());
    }
    if !source.is_prime_field() {
        return Err(DexError::Unsupported(
            "field extensions are only available over prime source fields".into(),
        ));
    }
    make_field(source.characteristic(), extension_degree)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decodability {
    pub user: usize,
    pub rank: usize,
    pub deficit: usize,
}

impl Decodability {
    pub fn decodable(&self) -> bool {
        self.deficit == 0
    }
}

/// Rank of each user's own chunked observation stacked with every other
/// terminal's coded rows, against the `N L` unknowns.
pub fn verify_decodability(scheme: &TransmissionScheme) -> Vec<Decodability> {
    let need = scheme.unknowns();
    scheme
        .users
        .iter()
        .map(|l| {
            let rank = scheme.received(l).rank();
            Decodability {
                user: l,
                rank,
                deficit: need - rank,
            }
        })
        .collect()
}

pub fn is_decodable(scheme: &TransmissionScheme) -> bool {
    verify_decodability(scheme).iter().all(Decodability::decodable)
}

/// Samples coding matrices uniformly at random until every user decodes.
/// Attempt `k` draws from stream `k` of a ChaCha generator seeded with `seed`,
/// so the result depends only on the inputs.
pub fn design_transmissions(
    instance: &Instance,
    chunk_rates: &[u64],
    chunks: u64,
    extension_degree: Option<u32>,
    seed: u64,
    max_attempts: usize,
) -> Result<TransmissionScheme> {
    let source = instance
        .model()
        .as_linear()
        .ok_or(DexError::NotLinear)?;
    let m = source.terminal_count();
    if chunk_rates.len() != m {
        return Err(DexError::DimensionMismatch(format!("{} chunk-rates for {m} terminals", chunk_rates.len())));
    }
    if chunks == 0 {
        return Err(DexError::InvalidConfig("chunk count must be positive".into()));
    }
    if source.rank(source_all(source)) != source.packet_count() {
        return Err(DexError::InvalidInstance(
            "terminals jointly do not observe every packet".into(),
        ));
    }
    let rates: Vec<Rational> = chunk_rates
        .iter()
        .map(|&r| Rational::new(r.into(), chunks.into()))
        .collect();
    let violations = build_lp(instance)?.violations(&rates)?;
    if let Some(v) = violations.first() {
        return Err(DexError::Infeasible(format!(
            "chunk-rates violate cut {}: need {}/{chunks} chunk units, have {}",
            v.set,
            &v.required * Rational::from_integer(chunks.into()),
            &v.provided * Rational::from_integer(chunks.into())
        )));
    }
    let t = extension_degree.unwrap_or_else(|| {
        default_extension_degree(source.field(), instance.users().len(), source.packet_count(), chunks)
    });
    let field = coding_field(source.field(), t)?;
    let widths: Vec<usize> = source.matrices().iter().map(|a| a.rows() * chunks as usize).collect();
    for attempt in 0..max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let coding = (0..m)
            .map(|i| FieldMatrix::random(&field, chunk_rates[i] as usize, widths[i], &mut rng))
            .collect();
        let scheme = TransmissionScheme::new(source, instance.users(), chunks, t, coding)?;
        if is_decodable(&scheme) {
            return Ok(scheme);
        }
    }
    Err(DexError::DesignFailed { attempts: max_attempts })
}

fn source_all(source: &LinearSource) -> TerminalSet {
    TerminalSet::full(source.terminal_count())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reconstruction {
    pub user: usize,
    /// The received system had a unique solution.
    pub unique: bool,
    /// The unique solution equals the drawn source.
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExchangeOutcome {
    pub packets: Vec<Elem>,
    pub users: Vec<Reconstruction>,
}

impl ExchangeOutcome {
    pub fn success(&self) -> bool {
        self.users.iter().all(|u| u.unique && u.correct)
    }
}

/// Draws the chunked source uniformly over the source field, runs every
/// terminal's encoder on its own observation, and lets each user solve for
/// the source from what it holds.
pub fn simulate_exchange(scheme: &TransmissionScheme, seed: u64) -> Result<ExchangeOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = scheme.source.field().order();
    let packets: Vec<Elem> = (0..scheme.unknowns()).map(|_| rng.gen_range(0..q)).collect();
    let observed: Vec<Vec<Elem>> = scheme
        .observations
        .iter()
        .map(|a| a.mul_vec(&packets))
        .collect::<Result<_>>()?;
    let sent: Vec<Vec<Elem>> = scheme
        .coding
        .iter()
        .zip(&observed)
        .map(|(v, x)| v.mul_vec(x))
        .collect::<Result<_>>()?;
    let mut users = Vec::new();
    for l in scheme.users.iter() {
        let system = scheme.received(l);
        let mut rhs = observed[l].clone();
        for (i, f) in sent.iter().enumerate() {
            if i != l {
                rhs.extend_from_slice(f);
            }
        }
        let outcome = system.solve_linear(&rhs)?;
        let (unique, correct) = match outcome.unique() {
            Some(x) => (true, x == packets.as_slice()),
            None => (false, false),
        };
        users.push(Reconstruction { user: l, unique, correct });
    }
    Ok(ExchangeOutcome { packets, users })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Source,
    Sender(usize),
    Relay(usize),
    Receiver(usize),
}

impl std::fmt::Display for Node {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Node::Source => write!(f, "S"),
            Node::Sender(i) => write!(f, "s{i}"),
            Node::Relay(i) => write!(f, "t{i}"),
            Node::Receiver(i) => write!(f, "r{i}"),
        }
    }
}

/// Capacitated multicast network: `S -> s_i` carries terminal `i`'s chunked
/// observation, `s_j -> r_j` is a user's side information, and the broadcast
/// of terminal `i` is `s_i -> t_i` fanning out to `t_i -> r_j` for users
/// `j != i`, all with capacity `r_i`.
#[derive(Clone, Debug)]
pub struct MulticastGraph {
    graph: DiGraph<Node, u64>,
    source: NodeIndex,
    receivers: Vec<(usize, NodeIndex)>,
}

pub fn build_multicast_graph(instance: &Instance, chunk_rates: &[u64], chunks: u64) -> Result<MulticastGraph> {
    let source = instance.model().as_linear().ok_or(DexError::NotLinear)?;
    let m = source.terminal_count();
    if chunk_rates.len() != m {
        return Err(DexError::DimensionMismatch(format!("{} chunk-rates for {m} terminals", chunk_rates.len())));
    }
    let mut g = DiGraph::new();
    let s = g.add_node(Node::Source);
    let senders: Vec<NodeIndex> = (0..m).map(|i| g.add_node(Node::Sender(i))).collect();
    let relays: Vec<NodeIndex> = (0..m).map(|i| g.add_node(Node::Relay(i))).collect();
    let receivers: Vec<(usize, NodeIndex)> = instance
        .users()
        .iter()
        .map(|j| (j, g.add_node(Node::Receiver(j))))
        .collect();
    for i in 0..m {
        let width = source.matrices()[i].rows() as u64 * chunks;
        g.add_edge(s, senders[i], width);
        g.add_edge(senders[i], relays[i], chunk_rates[i]);
    }
    for &(j, r) in &receivers {
        let width = source.matrices()[j].rows() as u64 * chunks;
        g.add_edge(senders[j], r, width);
        for i in (0..m).filter(|&i| i != j) {
            g.add_edge(relays[i], r, chunk_rates[i]);
        }
    }
    Ok(MulticastGraph {
        graph: g,
        source: s,
        receivers,
    })
}

impl MulticastGraph {
    pub fn graph(&self) -> &DiGraph<Node, u64> {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// Capacity of the edge `from -> to`, if present.
    pub fn capacity(&self, from: Node, to: Node) -> Option<u64> {
        let a = self.graph.node_indices().find(|&n| self.graph[n] == from)?;
        let b = self.graph.node_indices().find(|&n| self.graph[n] == to)?;
        self.graph.find_edge(a, b).map(|e| self.graph[e])
    }

    /// Max-flow from the super source to each receiver.
    pub fn min_cuts(&self) -> Vec<(usize, u64)> {
        self.receivers
            .iter()
            .map(|&(j, r)| (j, ford_fulkerson(&self.graph, self.source, r).0))
            .collect()
    }

    pub fn to_dot(&self) -> String {
        format!("{}", Dot::new(&self.graph))
    }
}

/// Versioned text form of a scheme. Rows of `V_i` are listed per terminal as
/// space-separated field elements (integers encoding polynomial coefficients
/// in base `p`).
pub fn write_scheme(scheme: &TransmissionScheme) -> String {
    let f = scheme.source.field();
    let mut out = String::new();
    writeln!(out, "format_version 1").unwrap();
    writeln!(out, "field {} {}", f.characteristic(), f.degree()).unwrap();
    writeln!(out, "extension_degree {}", scheme.extension_degree).unwrap();
    writeln!(out, "chunks {}", scheme.chunks).unwrap();
    writeln!(out, "packets {}", scheme.source.packet_count()).unwrap();
    let users: Vec<String> = scheme.users.iter().map(|u| u.to_string()).collect();
    writeln!(out, "users {}", users.join(" ")).unwrap();
    for (i, v) in scheme.coding.iter().enumerate() {
        writeln!(out, "terminal {i} rate {} width {}", v.rows(), v.cols()).unwrap();
        for r in 0..v.rows() {
            let row: Vec<String> = v.row(r).iter().map(|e| e.to_string()).collect();
            writeln!(out, "  {}", row.join(" ")).unwrap();
        }
    }
    out
}

/// Parses [`write_scheme`] output against the source it was designed for.
pub fn read_scheme(text: &str, source: &LinearSource) -> Result<TransmissionScheme> {
    let bad = |msg: String| DexError::InvalidConfig(msg);
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    fn header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, key: &str) -> Result<Vec<String>> {
        let bad = |msg: String| DexError::InvalidConfig(msg);
        let (n, line) = lines.next().ok_or_else(|| bad(format!("missing `{key}` line")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(bad(format!("line {n}: expected `{key}`")));
        }
        Ok(parts.map(str::to_string).collect())
    }
    let num = |s: &str| -> Result<u64> { s.parse().map_err(|_| bad(format!("not a number: {s}"))) };

    if header(&mut lines, "format_version")? != ["1"] {
        return Err(bad("unsupported format_version".into()));
    }
    let field = header(&mut lines, "field")?;
    let f = source.field();
    if field.len() != 2 || num(&field[0])? != f.characteristic() || num(&field[1])? != f.degree() as u64 {
        return Err(bad("scheme field does not match the instance".into()));
    }
    let t = num(header(&mut lines, "extension_degree")?.first().ok_or_else(|| bad("extension_degree".into()))?)? as u32;
    let chunks = num(header(&mut lines, "chunks")?.first().ok_or_else(|| bad("chunks".into()))?)?;
    let packets = num(header(&mut lines, "packets")?.first().ok_or_else(|| bad("packets".into()))?)?;
    if packets as usize != source.packet_count() {
        return Err(bad("scheme packet count does not match the instance".into()));
    }
    let users = header(&mut lines, "users")?
        .iter()
        .map(|u| num(u).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let coding_f = coding_field(f, t)?;
    let mut coding = Vec::new();
    for i in 0..source.terminal_count() {
        let h = header(&mut lines, "terminal")?;
        if h.len() != 5 || num(&h[0])? != i as u64 || h[1] != "rate" || h[3] != "width" {
            return Err(bad(format!("malformed header for terminal {i}")));
        }
        let (rate, width) = (num(&h[2])? as usize, num(&h[4])? as usize);
        let mut entries = Vec::with_capacity(rate * width);
        for _ in 0..rate {
            let (n, line) = lines.next().ok_or_else(|| bad(format!("terminal {i}: missing rows")))?;
            let row = line.split_whitespace().map(num).collect::<Result<Vec<_>>>()?;
            if row.len() != width {
                return Err(bad(format!("line {n}: expected {width} entries")));
            }
            entries.extend(row);
        }
        coding.push(FieldMatrix::new(&coding_f, rate, width, entries)?);
    }
    if let Some((n, _)) = lines.next() {
        return Err(bad(format!("line {n}: trailing content")));
    }
    TransmissionScheme::new(source, TerminalSet::from_indices(users), chunks, t, coding)
}
