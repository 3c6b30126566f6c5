use num_traits::Signed;

use crate::error::{DexError, Result};
use crate::rational::Rational;
use crate::set::TerminalSet;
use crate::source::SourceModel;

/// A data exchange problem: who wants the file, what each transmission costs,
/// and who may transmit.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    model: SourceModel,
    users: TerminalSet,
    weights: Vec<Rational>,
    transmitters: TerminalSet,
}

impl Instance {
    /// `transmitters = None` lets every terminal transmit.
    ///
    /// Fails with [`DexError::Infeasible`] when some user cannot recover the
    /// whole source from its own observation plus everything the transmitters
    /// know.
    pub fn new(
        model: SourceModel,
        users: TerminalSet,
        weights: Vec<Rational>,
        transmitters: Option<TerminalSet>,
    ) -> Result<Self> {
        let m = model.terminal_count();
        let all = model.all();
        if users.is_empty() {
            return Err(DexError::InvalidInstance("no users".into()));
        }
        if !users.is_subset(all) {
            return Err(DexError::InvalidInstance(format!(
                "users {users} outside terminals 0..{m}"
            )));
        }
        if weights.len() != m {
            return Err(DexError::InvalidInstance(format!(
                "{} weights for {m} terminals",
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| w.is_negative()) {
            return Err(DexError::InvalidInstance(format!("weight {i} is negative")));
        }
        let transmitters = transmitters.unwrap_or(all);
        if !transmitters.is_subset(all) {
            return Err(DexError::InvalidInstance(format!(
                "transmitters {transmitters} outside terminals 0..{m}"
            )));
        }
        let inst = Instance {
            model,
            users,
            weights,
            transmitters,
        };
        let total = inst.model.scaled_entropy(all);
        for l in users.iter() {
            if inst.model.scaled_entropy(transmitters.with(l)) != total {
                return Err(DexError::Infeasible(format!(
                    "user {l} cannot decode from transmitters {transmitters}"
                )));
            }
        }
        Ok(inst)
    }

    pub fn model(&self) -> &SourceModel {
        &self.model
    }

    pub fn terminal_count(&self) -> usize {
        self.model.terminal_count()
    }

    pub fn users(&self) -> TerminalSet {
        self.users
    }

    pub fn user_list(&self) -> Vec<usize> {
        self.users.iter().collect()
    }

    pub fn weights(&self) -> &[Rational] {
        &self.weights
    }

    pub fn transmitters(&self) -> TerminalSet {
        self.transmitters
    }

    pub fn helpers(&self) -> TerminalSet {
        self.model.all().difference(self.users)
    }

    /// Weighted sum `sum_i alpha_i R_i`.
    pub fn objective(&self, rates: &[Rational]) -> Rational {
        self.weights
            .iter()
            .zip(rates)
            .map(|(w, r)| w * r)
            .sum()
    }

    /// Same instance with a different weight vector.
    pub fn with_weights(&self, weights: Vec<Rational>) -> Result<Self> {
        Instance::new(self.model.clone(), self.users, weights, Some(self.transmitters))
    }

    /// Same instance restricted to a different transmitter set.
    pub fn with_transmitters(&self, transmitters: TerminalSet) -> Result<Self> {
        Instance::new(self.model.clone(), self.users, self.weights.clone(), Some(transmitters))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{triangle_instance, triangle_source};
    use crate::rational::int;

    #[test]
    fn validation() {
        let unit = vec![int(1); 6];
        let ok = Instance::new(triangle_source(3), TerminalSet(1), unit.clone(), None).unwrap();
        assert_eq!(ok.transmitters(), TerminalSet::full(6));
        assert_eq!(ok.helpers(), TerminalSet(0b111110));

        let e = Instance::new(triangle_source(3), TerminalSet(0), unit.clone(), None);
        assert!(matches!(e, Err(DexError::InvalidInstance(_))));
        let e = Instance::new(triangle_source(3), TerminalSet(1 << 6), unit.clone(), None);
        assert!(matches!(e, Err(DexError::InvalidInstance(_))));
        let e = Instance::new(triangle_source(3), TerminalSet(1), vec![int(1); 5], None);
        assert!(matches!(e, Err(DexError::InvalidInstance(_))));
        let mut neg = unit.clone();
        neg[2] = int(-1);
        assert!(Instance::new(triangle_source(3), TerminalSet(1), neg, None).is_err());
    }

    #[test]
    fn transmitter_restriction_must_keep_users_decodable() {
        let inst = triangle_instance(3, &[0]);
        // {a+b, a, c} spans everything.
        assert!(inst.with_transmitters(TerminalSet::from_indices([3, 5])).is_ok());
        // {a+b, a} does not.
        assert!(matches!(
            inst.with_transmitters(TerminalSet::from_indices([3])),
            Err(DexError::Infeasible(_))
        ));
    }
}
