//! Greedy optimal rates for a single receiving terminal.
//!
//! With one receiver `t`, the achievable rates of the transmitters `T` form
//! the contrapolymatroid `{R : R(S) >= H(X_S | X_{(T+t)\S})}`. A linear cost
//! is minimized at the greedy vertex: order the transmitters by increasing
//! weight and give each one everything it knows that `t` and the cheaper
//! transmitters do not.

use crate::error::{DexError, Result};
use crate::instance::Instance;
use crate::rational::Rational;
use crate::set::TerminalSet;
use crate::source::SourceModel;

/// Total order used to break weight ties.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TieBreak {
    position: Vec<usize>,
}

impl TieBreak {
    /// Lower terminal index wins.
    pub fn ascending(m: usize) -> Self {
        TieBreak {
            position: (0..m).collect(),
        }
    }

    /// Terminals listed in `order` come first, in that order; the rest follow
    /// by ascending index.
    pub fn from_order(m: usize, order: &[usize]) -> Result<Self> {
        let mut position = vec![usize::MAX; m];
        for (rank, &i) in order.iter().enumerate() {
            if i >= m {
                return Err(DexError::IndexOutOfRange { index: i, limit: m });
            }
            if position[i] != usize::MAX {
                return Err(DexError::InvalidConfig(format!(
                    "terminal {i} listed twice in tie-break order"
                )));
            }
            position[i] = rank;
        }
        let mut next = order.len();
        for p in position.iter_mut().filter(|p| **p == usize::MAX) {
            *p = next;
            next += 1;
        }
        Ok(TieBreak { position })
    }

    pub fn len(&self) -> usize {
        self.position.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    pub fn position(&self, i: usize) -> usize {
        self.position[i]
    }

    /// Terminals from first to last.
    pub fn order(&self) -> Vec<usize> {
        let mut o: Vec<usize> = (0..self.position.len()).collect();
        o.sort_by_key(|&i| self.position[i]);
        o
    }
}

/// Per-terminal rates in symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RateVector(pub Vec<Rational>);

impl RateVector {
    pub fn rates(&self) -> &[Rational] {
        &self.0
    }

    pub fn objective(&self, weights: &[Rational]) -> Rational {
        weights.iter().zip(&self.0).map(|(w, r)| w * r).sum()
    }

    pub fn total(&self) -> Rational {
        self.0.iter().sum()
    }
}

/// Transmitters other than `target`, cheapest first.
pub fn greedy_order<W: Ord>(
    transmitters: TerminalSet,
    target: usize,
    weights: &[W],
    tie: &TieBreak,
) -> Vec<usize> {
    let mut order: Vec<usize> = transmitters.without(target).iter().collect();
    order.sort_by(|&a, &b| {
        weights[a]
            .cmp(&weights[b])
            .then(tie.position(a).cmp(&tie.position(b)))
    });
    order
}

/// Greedy vertex in entropy units of the model; `out` must have length `m`
/// and receives zero for the target and every non-transmitter.
pub(crate) fn greedy_scaled<W: Ord>(
    model: &SourceModel,
    transmitters: TerminalSet,
    target: usize,
    weights: &[W],
    tie: &TieBreak,
    out: &mut [i64],
) {
    out.iter_mut().for_each(|r| *r = 0);
    let mut known = TerminalSet::singleton(target);
    let mut h_known = model.scaled_entropy(known);
    for j in greedy_order(transmitters, target, weights, tie) {
        known.insert(j);
        let h = model.scaled_entropy(known);
        out[j] = h - h_known;
        h_known = h;
    }
}

fn check_args<W>(instance: &Instance, target: usize, weights: &[W], tie: &TieBreak) -> Result<()> {
    let m = instance.terminal_count();
    if target >= m {
        return Err(DexError::IndexOutOfRange { index: target, limit: m });
    }
    if weights.len() != m || tie.len() != m {
        return Err(DexError::DimensionMismatch(format!(
            "{} weights and {} tie-break entries for {m} terminals",
            weights.len(),
            tie.len()
        )));
    }
    Ok(())
}

/// Rates minimizing `sum_i weights_i R_i` over the region of receiver
/// `target`, restricted to the instance's transmitters. `R_target = 0`.
pub fn edmonds_allocate<W: Ord>(
    instance: &Instance,
    target: usize,
    weights: &[W],
    tie: &TieBreak,
) -> Result<RateVector> {
    check_args(instance, target, weights, tie)?;
    let model = instance.model();
    let mut scaled = vec![0i64; instance.terminal_count()];
    greedy_scaled(model, instance.transmitters(), target, weights, tie, &mut scaled);
    let unit = model.entropy_unit();
    Ok(RateVector(
        scaled
            .into_iter()
            .map(|r| Rational::new(r.into(), unit.into()))
            .collect(),
    ))
}

pub(crate) const REGION_GUARD: usize = 20;

/// First subset `S` of the transmitters (excluding `target`) whose cut
/// constraint `R(S) >= H(X_S | X_{(T+t)\S})` fails, or `None` when the rates
/// lie in the region. Non-transmitters must have zero rate.
pub fn region_violation(rates: &[Rational], instance: &Instance, target: usize) -> Result<Option<TerminalSet>> {
    let m = instance.terminal_count();
    if m > REGION_GUARD {
        return Err(DexError::GuardExceeded {
            what: "terminal count for exhaustive cut check",
            limit: REGION_GUARD,
            got: m,
        });
    }
    if rates.len() != m {
        return Err(DexError::DimensionMismatch(format!("{} rates for {m} terminals", rates.len())));
    }
    if target >= m {
        return Err(DexError::IndexOutOfRange { index: target, limit: m });
    }
    let model = instance.model();
    let unit = Rational::from_integer(model.entropy_unit().into());
    let scaled: Vec<Rational> = rates.iter().map(|r| r * &unit).collect();
    let senders = instance.transmitters().without(target);
    for i in model.all().difference(senders).without(target).iter() {
        if scaled[i] != Rational::default() {
            return Ok(Some(TerminalSet::singleton(i)));
        }
    }
    let receiver_side = instance.transmitters().with(target);
    for s in senders.subsets().skip(1) {
        let need = model.scaled_cond(s, receiver_side.difference(s));
        let have: Rational = s.iter().map(|i| &scaled[i]).sum();
        if have < Rational::from_integer(need.into()) {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

pub fn feasible_in_region(rates: &[Rational], instance: &Instance, target: usize) -> Result<bool> {
    Ok(region_violation(rates, instance, target)?.is_none())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSpec;
    use crate::fixtures::{triangle_instance, triangle_source};
    use crate::matrix::FieldMatrix;
    use crate::rational::{int, ratio};
    use crate::source::LinearSource;

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn reproduces_single_user_vertex() {
        let inst = triangle_instance(3, &[0]);
        let tie = TieBreak::from_order(6, &[3, 4, 5, 1, 2]).unwrap();
        let r = edmonds_allocate(&inst, 0, inst.weights(), &tie).unwrap();
        assert_eq!(r.0, ints(&[0, 0, 0, 1, 0, 1]));
        assert_eq!(r.objective(inst.weights()), int(2));
    }

    #[test]
    fn ascending_tie_break_gives_other_vertex() {
        let inst = triangle_instance(3, &[0]);
        let r = edmonds_allocate(&inst, 0, inst.weights(), &TieBreak::ascending(6)).unwrap();
        assert_eq!(r.0, ints(&[0, 1, 1, 0, 0, 0]));
        assert_eq!(r.total(), int(2));
    }

    #[test]
    fn duplicate_observer_needs_nothing() {
        let f = FieldSpec::prime(2);
        let a = FieldMatrix::from_rows(&f, 2, &[vec![1, 0], vec![0, 1]]).unwrap();
        let model = crate::source::SourceModel::linear(LinearSource::new(&f, 2, vec![a.clone(), a]).unwrap()).unwrap();
        let inst = Instance::new(model, TerminalSet(1), ints(&[1, 1]), None).unwrap();
        let r = edmonds_allocate(&inst, 0, inst.weights(), &TieBreak::ascending(2)).unwrap();
        assert_eq!(r.0, ints(&[0, 0]));
    }

    #[test]
    fn weights_drive_the_order() {
        let inst = triangle_instance(3, &[0]);
        // Make a and c expensive: b and b+c / a+c should carry the load.
        let w = ints(&[0, 1, 1, 5, 1, 5]);
        let r = edmonds_allocate(&inst, 0, &w, &TieBreak::ascending(6)).unwrap();
        assert_eq!(r.objective(&w), int(2));
        assert_eq!(r.0[3], int(0));
        assert_eq!(r.0[5], int(0));
    }

    #[test]
    fn region_membership() {
        let inst = triangle_instance(3, &[0]);
        let tie = TieBreak::from_order(6, &[3, 4, 5, 1, 2]).unwrap();
        let r = edmonds_allocate(&inst, 0, inst.weights(), &tie).unwrap();
        assert!(feasible_in_region(&r.0, &inst, 0).unwrap());
        let cut = region_violation(&ints(&[0; 6]), &inst, 0).unwrap().unwrap();
        assert!(!cut.contains(0));
        assert!(!feasible_in_region(&ints(&[0; 6]), &inst, 0).unwrap());
        assert!(feasible_in_region(&ints(&[0, 1, 1, 1, 1, 1]), &inst, 0).unwrap());
        // the full-sender cut needs 2
        assert!(!feasible_in_region(
            &[int(0), int(0), int(0), ratio(1, 2), ratio(1, 2), ratio(1, 2)],
            &inst,
            0
        )
        .unwrap());
    }

    #[test]
    fn rejects_bad_arguments() {
        let inst = triangle_instance(3, &[0]);
        let tie = TieBreak::ascending(6);
        assert!(edmonds_allocate(&inst, 6, inst.weights(), &tie).is_err());
        assert!(edmonds_allocate(&inst, 0, &inst.weights()[..5], &tie).is_err());
        assert!(TieBreak::from_order(6, &[1, 1]).is_err());
        assert!(TieBreak::from_order(6, &[7]).is_err());
        assert_eq!(TieBreak::from_order(4, &[2, 0]).unwrap().order(), vec![2, 0, 1, 3]);
    }

    #[test]
    fn restricted_transmitters() {
        let inst = triangle_instance(3, &[0])
            .with_transmitters(TerminalSet::from_indices([3, 4, 5]))
            .unwrap();
        let r = edmonds_allocate(&inst, 0, inst.weights(), &TieBreak::ascending(6)).unwrap();
        assert_eq!(r.0, ints(&[0, 0, 0, 1, 0, 1]));
        assert!(feasible_in_region(&r.0, &inst, 0).unwrap());
        // a nonzero rate for a non-transmitter is rejected
        assert!(!feasible_in_region(&ints(&[0, 1, 0, 1, 0, 1]), &inst, 0).unwrap());
    }

    /// Suffixes of the greedy order are tight and the total is `H(X_T | X_t)`.
    #[test]
    fn suffix_tightness() {
        for p in [2, 3] {
            let inst = triangle_instance(p, &[0]);
            let model = triangle_source(p);
            for t in 0..6 {
                let w = ints(&[3, 1, 4, 1, 5, 9]);
                let tie = TieBreak::ascending(6);
                let r = edmonds_allocate(&inst, t, &w, &tie).unwrap();
                let order = greedy_order(inst.transmitters(), t, &w, &tie);
                let receiver = inst.transmitters().with(t);
                for cut in 0..order.len() {
                    let suffix = TerminalSet::from_indices(order[cut..].iter().copied());
                    let rs: Rational = suffix.iter().map(|i| &r.0[i]).sum();
                    assert_eq!(rs, model.cond_entropy(suffix, receiver.difference(suffix)));
                }
                assert_eq!(r.total(), model.cond_entropy(model.all(), TerminalSet::singleton(t)));
            }
        }
    }

    /// f(S) = H(X_S | X_{S^c}, X_t) is supermodular on subsets of M \ {t}.
    #[test]
    fn cut_function_is_supermodular() {
        for p in [2, 3] {
            let model = triangle_source(p);
            let all = model.all();
            for t in 0..6 {
                let ground = all.without(t);
                let f = |s: TerminalSet| model.cond_entropy(s, all.difference(s));
                for a in ground.subsets() {
                    for b in ground.subsets() {
                        assert!(f(a.union(b)) + f(a.intersection(b)) >= f(a) + f(b));
                    }
                }
            }
        }
    }
}
