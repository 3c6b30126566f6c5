//! Random finite linear instances for randomized testing.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{DexError, Result};
use crate::field::FieldSpec;
use crate::instance::Instance;
use crate::matrix::FieldMatrix;
use crate::rational::Rational;
use crate::set::TerminalSet;
use crate::source::{LinearSource, SourceModel};

#[derive(Clone, Debug)]
pub struct RandomSpec {
    pub terminals: (usize, usize),
    pub primes: Vec<u64>,
    pub max_packets: usize,
    /// Inclusive range for the number of users.
    pub users: (usize, usize),
    /// Weights are drawn as `k / weight_denominator` up to `max_weight`.
    pub max_weight: u64,
    pub weight_denominator: u64,
    /// Restrict transmission to the non-users.
    pub helpers_only: bool,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec {
            terminals: (3, 6),
            primes: vec![2, 3, 5],
            max_packets: 6,
            users: (1, 1),
            max_weight: 10,
            weight_denominator: 4,
            helpers_only: false,
        }
    }
}

/// Random linear source whose terminals jointly observe all `packets`.
pub fn random_source<R: Rng + ?Sized>(field: &FieldSpec, terminals: usize, packets: usize, rng: &mut R) -> LinearSource {
    loop {
        let mats: Vec<FieldMatrix> = (0..terminals)
            .map(|_| {
                let rows = rng.gen_range(1..=packets);
                FieldMatrix::random(field, rows, packets, rng)
            })
            .collect();
        let src = LinearSource::new(field, packets, mats).expect("shapes agree");
        if src.rank(TerminalSet::full(terminals)) == packets {
            return src;
        }
    }
}

/// Draws instances until one passes validation (decodability for every user).
pub fn random_instance<R: Rng + ?Sized>(spec: &RandomSpec, rng: &mut R) -> Result<Instance> {
    let (lo, hi) = spec.terminals;
    if lo == 0 || lo > hi || spec.primes.is_empty() || spec.max_packets == 0 || spec.weight_denominator == 0 {
        return Err(DexError::InvalidConfig("empty random instance family".into()));
    }
    for _ in 0..10_000 {
        let m = rng.gen_range(lo..=hi);
        let k = rng.gen_range(spec.users.0.max(1)..=spec.users.1.min(m));
        if spec.helpers_only && k >= m {
            continue;
        }
        let p = *spec.primes.choose(rng).expect("nonempty");
        let n = rng.gen_range(1..=spec.max_packets);
        let src = random_source(&FieldSpec::prime(p), m, n, rng);
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(rng);
        let users = TerminalSet::from_indices(order[..k].iter().copied());
        let top = spec.max_weight * spec.weight_denominator;
        let weights = (0..m)
            .map(|_| Rational::new(rng.gen_range(0..=top).into(), spec.weight_denominator.into()))
            .collect();
        let transmitters = spec
            .helpers_only
            .then(|| TerminalSet::full(m).difference(users));
        let model = SourceModel::linear(src)?;
        match Instance::new(model, users, weights, transmitters) {
            Ok(inst) => return Ok(inst),
            Err(DexError::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(DexError::InvalidConfig("could not draw a decodable instance".into()))
}
