//! Reference solver: the full cut-set LP written out explicitly and solved
//! exactly. Exponential in the number of terminals, meant for checking the
//! fast allocators on small instances.
//!
//! The LP is `min alpha.R` over `R >= 0` with `R(S) >= H(X_S | X_{S^c})` for
//! every nonempty `S` that misses at least one user; rates of terminals that
//! may not transmit are fixed to zero. It is solved through its dual
//! `max sum_S h_S y_S` s.t. `sum_{S containing i} y_S <= alpha_i`, whose
//! origin is always feasible; the rates are read off the dual multipliers.

use num_traits::{Signed, Zero};

use crate::error::{DexError, Result};
use crate::instance::Instance;
use crate::lp::maximize;
use crate::rational::Rational;
use crate::set::TerminalSet;

pub const ENUMERATION_GUARD: usize = 12;
pub const SOLVE_GUARD: usize = 10;

/// Nonempty `S` strictly inside `{0..m}` with `users` not contained in `S`,
/// in increasing bitmask order.
pub fn enumerate_cutsets(m: usize, users: TerminalSet) -> Result<Vec<TerminalSet>> {
    if m > ENUMERATION_GUARD {
        return Err(DexError::GuardExceeded {
            what: "terminal count for cut-set enumeration",
            limit: ENUMERATION_GUARD,
            got: m,
        });
    }
    let all = TerminalSet::full(m);
    if users.is_empty() || !users.is_subset(all) {
        return Err(DexError::InvalidInstance(format!("users {users} invalid for {m} terminals")));
    }
    Ok(all
        .subsets()
        .filter(|s| !s.is_empty() && *s != all && !users.is_subset(*s))
        .collect())
}

/// `2^m - 2^(m-|A|) - 1`.
pub fn cutset_count(m: usize, user_count: usize) -> usize {
    (1usize << m) - (1usize << (m - user_count)) - 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutConstraint {
    pub set: TerminalSet,
    pub rhs: Rational,
    /// Lowest-indexed user outside `set`; the constraint is shared by every
    /// user outside it.
    pub user: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CutSetLP {
    pub terminal_count: usize,
    pub weights: Vec<Rational>,
    pub transmitters: TerminalSet,
    pub constraints: Vec<CutConstraint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub set: TerminalSet,
    pub required: Rational,
    pub provided: Rational,
}

impl CutSetLP {
    pub fn objective(&self, rates: &[Rational]) -> Rational {
        self.weights.iter().zip(rates).map(|(w, r)| w * r).sum()
    }

    /// Every violated constraint. A nonzero rate on a silent terminal or a
    /// negative rate is reported as a singleton with `required = 0`.
    pub fn violations(&self, rates: &[Rational]) -> Result<Vec<Violation>> {
        let m = self.terminal_count;
        if rates.len() != m {
            return Err(DexError::DimensionMismatch(format!("{} rates for {m} terminals", rates.len())));
        }
        let mut out = Vec::new();
        for (i, r) in rates.iter().enumerate() {
            if r.is_negative() || (!self.transmitters.contains(i) && !r.is_zero()) {
                out.push(Violation {
                    set: TerminalSet::singleton(i),
                    required: Rational::zero(),
                    provided: r.clone(),
                });
            }
        }
        for c in &self.constraints {
            let provided: Rational = c.set.iter().map(|i| &rates[i]).sum();
            if provided < c.rhs {
                out.push(Violation {
                    set: c.set,
                    required: c.rhs.clone(),
                    provided,
                });
            }
        }
        Ok(out)
    }

    pub fn is_feasible(&self, rates: &[Rational]) -> Result<bool> {
        Ok(self.violations(rates)?.is_empty())
    }
}

pub fn build_lp(instance: &Instance) -> Result<CutSetLP> {
    let m = instance.terminal_count();
    let users = instance.users();
    let all = instance.model().all();
    let constraints = enumerate_cutsets(m, users)?
        .into_iter()
        .map(|s| CutConstraint {
            set: s,
            rhs: instance.model().cond_entropy(s, all.difference(s)),
            user: users.difference(s).iter().next().expect("cut misses a user"),
        })
        .collect();
    Ok(CutSetLP {
        terminal_count: m,
        weights: instance.weights().to_vec(),
        transmitters: instance.transmitters(),
        constraints,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    pub rates: Vec<Rational>,
    pub value: Rational,
    /// Optimal cut multipliers, aligned with `CutSetLP::constraints`.
    pub cut_multipliers: Vec<Rational>,
}

pub fn solve_exact(lp: &CutSetLP) -> Result<OracleSolution> {
    let m = lp.terminal_count;
    if m > SOLVE_GUARD {
        return Err(DexError::GuardExceeded {
            what: "terminal count for the exact LP",
            limit: SOLVE_GUARD,
            got: m,
        });
    }
    let senders: Vec<usize> = lp.transmitters.iter().collect();
    let a: Vec<Vec<Rational>> = senders
        .iter()
        .map(|&i| {
            lp.constraints
                .iter()
                .map(|c| if c.set.contains(i) { Rational::from_integer(1.into()) } else { Rational::zero() })
                .collect()
        })
        .collect();
    let b: Vec<Rational> = senders.iter().map(|&i| lp.weights[i].clone()).collect();
    let c: Vec<Rational> = lp.constraints.iter().map(|c| c.rhs.clone()).collect();
    let sol = match maximize(&a, &b, &c) {
        Ok(sol) => sol,
        Err(DexError::LpUnbounded) => return Err(DexError::LpInfeasible),
        Err(e) => return Err(e),
    };
    let mut rates = vec![Rational::zero(); m];
    for (k, &i) in senders.iter().enumerate() {
        rates[i] = sol.row_duals[k].clone();
    }
    Ok(OracleSolution {
        rates,
        value: sol.value,
        cut_multipliers: sol.point,
    })
}

/// `build_lp` followed by `solve_exact`.
pub fn oracle(instance: &Instance) -> Result<OracleSolution> {
    solve_exact(&build_lp(instance)?)
}
