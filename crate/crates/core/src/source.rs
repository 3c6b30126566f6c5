//! Entropy oracles `H(X_S)` over subsets of terminals.
//!
//! Entropies are measured in symbols of the source field, so for a linear
//! source `H(X_S)` is the rank of the stacked observation matrices of `S`.
//! Every model also exposes its entropies as integers over a common
//! denominator (`entropy_unit`), which is what the solvers work with.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{DexError, Result};
use crate::field::FieldSpec;
use crate::matrix::FieldMatrix;
use crate::rational::{lcm_of_denominators, Rational};
use crate::set::{TerminalSet, MAX_TERMINALS};

/// Each terminal `i` observes `A_i W` for a uniform `W` over the field.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearSource {
    packet_count: usize,
    field: FieldSpec,
    matrices: Vec<FieldMatrix>,
}

impl LinearSource {
    pub fn new(field: &FieldSpec, packet_count: usize, matrices: Vec<FieldMatrix>) -> Result<Self> {
        for (i, a) in matrices.iter().enumerate() {
            if a.cols() != packet_count {
                return Err(DexError::DimensionMismatch(format!(
                    "terminal {i} matrix has {} columns, packet count is {packet_count}",
                    a.cols()
                )));
            }
            if a.field() != field {
                return Err(DexError::DimensionMismatch(format!(
                    "terminal {i} matrix is over a different field"
                )));
            }
        }
        Ok(LinearSource {
            packet_count,
            field: field.clone(),
            matrices,
        })
    }

    pub fn packet_count(&self) -> usize {
        self.packet_count
    }

    pub fn field(&self) -> &FieldSpec {
        &self.field
    }

    pub fn matrices(&self) -> &[FieldMatrix] {
        &self.matrices
    }

    pub fn terminal_count(&self) -> usize {
        self.matrices.len()
    }

    pub fn stacked(&self, set: TerminalSet) -> FieldMatrix {
        let parts: Vec<&FieldMatrix> = set.iter().map(|i| &self.matrices[i]).collect();
        FieldMatrix::vstack(&self.field, self.packet_count, &parts).expect("shapes checked at construction")
    }

    pub fn rank(&self, set: TerminalSet) -> usize {
        self.stacked(set).rank()
    }
}

/// Terminals that own uncoded packets: observation rows are standard basis
/// vectors of the owned packets.
pub fn raw_source(field: &FieldSpec, ownership: &[Vec<usize>], packet_count: usize) -> Result<LinearSource> {
    let matrices = ownership
        .iter()
        .map(|owned| {
            let mut rows = Vec::with_capacity(owned.len());
            for &p in owned {
                if p >= packet_count {
                    return Err(DexError::IndexOutOfRange {
                        index: p,
                        limit: packet_count,
                    });
                }
                let mut row = vec![0; packet_count];
                row[p] = 1;
                rows.push(row);
            }
            FieldMatrix::from_rows(field, packet_count, &rows)
        })
        .collect::<Result<Vec<_>>>()?;
    LinearSource::new(field, packet_count, matrices)
}

/// Explicit joint entropies for all `2^m` subsets, indexed by bitmask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntropyTable {
    terminal_count: usize,
    values: Vec<Rational>,
}

impl EntropyTable {
    /// Stores the values without checking them; see [`validate_table`].
    pub fn from_values(terminal_count: usize, values: Vec<Rational>) -> Self {
        EntropyTable {
            terminal_count,
            values,
        }
    }

    /// Tabulates another model on every subset.
    pub fn from_model(model: &SourceModel) -> Self {
        let m = model.terminal_count();
        let values = TerminalSet::full(m)
            .subsets()
            .map(|s| model.joint_entropy(s))
            .collect::<Vec<_>>();
        // subsets() yields in increasing bitmask order for the full set
        EntropyTable::from_values(m, values)
    }

    pub fn terminal_count(&self) -> usize {
        self.terminal_count
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn get(&self, set: TerminalSet) -> &Rational {
        &self.values[set.bits() as usize]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TableReport {
    /// Value of `H(empty)` when it is not zero.
    pub nonzero_empty: Option<Rational>,
    /// `(S, i)` with `H(S + i) < H(S)`.
    pub monotonicity: Vec<(TerminalSet, usize)>,
    /// `(S, i, j)` with `H(S+i) + H(S+j) < H(S+i+j) + H(S)`.
    pub submodularity: Vec<(TerminalSet, usize, usize)>,
}

impl TableReport {
    /// No hard errors (normalization and monotonicity).
    pub fn is_valid(&self) -> bool {
        self.nonzero_empty.is_none() && self.monotonicity.is_empty()
    }

    pub fn is_submodular(&self) -> bool {
        self.submodularity.is_empty()
    }
}

pub fn validate_table(table: &EntropyTable) -> Result<TableReport> {
    let m = table.terminal_count;
    if m > 24 {
        return Err(DexError::GuardExceeded {
            what: "entropy table terminals",
            limit: 24,
            got: m,
        });
    }
    let expected = 1usize << m;
    if table.values.len() != expected {
        return Err(DexError::MissingTableEntries {
            expected,
            found: table.values.len(),
        });
    }
    let h = |s: u64| &table.values[s as usize];
    let mut report = TableReport::default();
    if !h(0).is_zero() {
        report.nonzero_empty = Some(h(0).clone());
    }
    for s in 0..expected as u64 {
        for i in (0..m).filter(|&i| s >> i & 1 == 0) {
            let si = s | 1 << i;
            if h(si) < h(s) {
                report.monotonicity.push((TerminalSet(s), i));
            }
            for j in (i + 1..m).filter(|&j| s >> j & 1 == 0) {
                let sj = s | 1 << j;
                if h(si) + h(sj) < h(si | sj) + h(s) {
                    report.submodularity.push((TerminalSet(s), i, j));
                }
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SourceKind {
    Linear(LinearSource),
    /// Uncoded packets; `linear` is the equivalent identity-row source.
    Raw {
        ownership: Vec<Vec<usize>>,
        linear: LinearSource,
    },
    Tabular(EntropyTable),
}

const DENSE_CACHE_LIMIT: usize = 16;

#[derive(Debug)]
enum EntropyCache {
    Dense(Vec<OnceLock<i64>>),
    Sparse(Mutex<HashMap<u64, i64>>),
}

impl EntropyCache {
    fn new(m: usize) -> Self {
        if m <= DENSE_CACHE_LIMIT {
            EntropyCache::Dense((0..1usize << m).map(|_| OnceLock::new()).collect())
        } else {
            EntropyCache::Sparse(Mutex::new(HashMap::new()))
        }
    }

    fn get_or(&self, key: u64, compute: impl FnOnce() -> i64) -> i64 {
        match self {
            EntropyCache::Dense(v) => *v[key as usize].get_or_init(compute),
            EntropyCache::Sparse(map) => {
                if let Some(&v) = map.lock().unwrap().get(&key) {
                    return v;
                }
                let v = compute();
                map.lock().unwrap().insert(key, v);
                v
            }
        }
    }
}

/// Entropy oracle over `m` terminals. Ranks are memoized; the cache is not
/// observable.
#[derive(Debug)]
pub struct SourceModel {
    kind: SourceKind,
    terminal_count: usize,
    /// Common denominator of all entropies.
    unit: i64,
    /// Tabular entropies scaled by `unit`.
    scaled_table: Vec<i64>,
    cache: EntropyCache,
}

impl Clone for SourceModel {
    fn clone(&self) -> Self {
        SourceModel {
            kind: self.kind.clone(),
            terminal_count: self.terminal_count,
            unit: self.unit,
            scaled_table: self.scaled_table.clone(),
            cache: EntropyCache::new(self.terminal_count),
        }
    }
}

impl PartialEq for SourceModel {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

fn check_terminals(m: usize) -> Result<()> {
    if m == 0 || m > MAX_TERMINALS {
        return Err(DexError::InvalidInstance(format!(
            "terminal count must be in 1..={MAX_TERMINALS}, got {m}"
        )));
    }
    Ok(())
}

impl SourceModel {
    pub fn linear(source: LinearSource) -> Result<Self> {
        let m = source.terminal_count();
        check_terminals(m)?;
        Ok(Self::build(SourceKind::Linear(source), m, 1, Vec::new()))
    }

    pub fn raw(field: &FieldSpec, ownership: Vec<Vec<usize>>, packet_count: usize) -> Result<Self> {
        let linear = raw_source(field, &ownership, packet_count)?;
        let m = ownership.len();
        check_terminals(m)?;
        Ok(Self::build(SourceKind::Raw { ownership, linear }, m, 1, Vec::new()))
    }

    /// Rejects tables with missing entries, nonzero `H(empty)`, negative values,
    /// or monotonicity violations. Submodularity violations are accepted; use
    /// [`validate_table`] to see them.
    pub fn tabular(table: EntropyTable) -> Result<Self> {
        let m = table.terminal_count();
        check_terminals(m)?;
        let report = validate_table(&table)?;
        if let Some(v) = &report.nonzero_empty {
            return Err(DexError::InvalidTable(format!("H(empty set) = {v}, must be 0")));
        }
        if let Some((s, i)) = report.monotonicity.first() {
            return Err(DexError::InvalidTable(format!(
                "not monotone: H({}) < H({s})",
                s.with(*i)
            )));
        }
        if table.values().iter().any(|v| v.is_negative()) {
            return Err(DexError::InvalidTable("negative entropy".into()));
        }
        let unit = lcm_of_denominators(table.values());
        let unit_i64 = unit
            .to_i64()
            .filter(|&u| u <= 1 << 40)
            .ok_or_else(|| DexError::InvalidTable("entropy denominators too large".into()))?;
        let scaled = table
            .values()
            .iter()
            .map(|v| {
                let n: BigInt = v.numer() * (&unit / v.denom());
                n.to_i64()
                    .filter(|x| x.unsigned_abs() < 1 << 52)
                    .ok_or_else(|| DexError::InvalidTable("entropy value too large".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::build(SourceKind::Tabular(table), m, unit_i64, scaled))
    }

    fn build(kind: SourceKind, m: usize, unit: i64, scaled_table: Vec<i64>) -> Self {
        SourceModel {
            kind,
            terminal_count: m,
            unit,
            scaled_table,
            cache: EntropyCache::new(m),
        }
    }

    pub fn kind(&self) -> &SourceKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SourceKind::Linear(_) => "linear",
            SourceKind::Raw { .. } => "raw",
            SourceKind::Tabular(_) => "tabular",
        }
    }

    pub fn terminal_count(&self) -> usize {
        self.terminal_count
    }

    pub fn all(&self) -> TerminalSet {
        TerminalSet::full(self.terminal_count)
    }

    /// The linear realization, for linear and raw models.
    pub fn as_linear(&self) -> Option<&LinearSource> {
        match &self.kind {
            SourceKind::Linear(l) => Some(l),
            SourceKind::Raw { linear, .. } => Some(linear),
            SourceKind::Tabular(_) => None,
        }
    }

    pub fn field(&self) -> Option<&FieldSpec> {
        self.as_linear().map(|l| l.field())
    }

    /// Denominator shared by every entropy value; 1 for linear sources.
    pub fn entropy_unit(&self) -> i64 {
        self.unit
    }

    /// `H(X_S) * entropy_unit()`.
    pub fn scaled_entropy(&self, set: TerminalSet) -> i64 {
        debug_assert!(set.is_subset(self.all()));
        match &self.kind {
            SourceKind::Tabular(_) => self.scaled_table[set.bits() as usize],
            SourceKind::Raw { ownership, .. } => self.cache.get_or(set.bits(), || {
                let mut owned: Vec<usize> = set.iter().flat_map(|i| ownership[i].iter().copied()).collect();
                owned.sort_unstable();
                owned.dedup();
                owned.len() as i64
            }),
            SourceKind::Linear(l) => self.cache.get_or(set.bits(), || l.rank(set) as i64),
        }
    }

    pub fn joint_entropy(&self, set: TerminalSet) -> Rational {
        Rational::new(self.scaled_entropy(set).into(), self.unit.into())
    }

    /// `H(X_S | X_T) = H(X_{S ∪ T}) - H(X_T)`.
    pub fn cond_entropy(&self, s: TerminalSet, t: TerminalSet) -> Rational {
        Rational::new(self.scaled_cond(s, t).into(), self.unit.into())
    }

    pub fn scaled_cond(&self, s: TerminalSet, t: TerminalSet) -> i64 {
        self.scaled_entropy(s.union(t)) - self.scaled_entropy(t)
    }
}
