//! Multi-user rate allocation by Lagrangian dual decomposition.
//!
//! Each user `l` gets its own copy `R^(l)` of the rate vector constrained to
//! its single-receiver region, coupled through `Z_i >= R_i^(l)`. Relaxing the
//! coupling with multipliers `lambda_i^(l)` (columns summing to `alpha_i`,
//! `lambda_l^(l) = 0`) splits the dual function into `k` greedy problems. The
//! multipliers follow projected subgradient ascent; primal rates are the
//! running average of the greedy vertices, combined by a columnwise max.
//!
//! The iteration runs in fixed point: multipliers are integers in units of
//! `1 / (10^12 * lcm(denominators of alpha))`, entropies are integers over the
//! model's entropy unit. Every reported quantity (rates, objectives, gap,
//! multiplier certificate) is an exact rational.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{DexError, Result};
use crate::greedy::{edmonds_allocate, greedy_scaled, TieBreak};
use crate::instance::Instance;
use crate::rational::{int, lcm_of_denominators, parse_rational, to_f64, Rational};

const QUANTUM_DIGITS: u32 = 12;

/// Multipliers `lambda_i^(l)`: one row per user (in ascending terminal
/// order), one column per terminal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualMatrix {
    users: Vec<usize>,
    rows: Vec<Vec<Rational>>,
}

impl DualMatrix {
    pub fn new(users: Vec<usize>, rows: Vec<Vec<Rational>>) -> Self {
        DualMatrix { users, rows }
    }

    pub fn users(&self) -> &[usize] {
        &self.users
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn row(&self, l: usize) -> &[Rational] {
        &self.rows[l]
    }

    pub fn column(&self, i: usize) -> Vec<Rational> {
        self.rows.iter().map(|r| r[i].clone()).collect()
    }

    /// Row of user terminal `i`, if `i` is a user.
    pub fn row_of(&self, i: usize) -> Option<usize> {
        self.users.iter().position(|&u| u == i)
    }

    /// Checks nonnegativity, the pinned zeros `lambda_l^(l) = 0`, and that
    /// every column with an unpinned entry sums to its weight.
    pub fn check_feasible(&self, weights: &[Rational]) -> Result<()> {
        let bad = |msg: String| Err(DexError::InvalidConfig(msg));
        for (i, alpha) in weights.iter().enumerate() {
            let pinned = self.row_of(i);
            let col = self.column(i);
            if col.iter().any(|x| x.is_negative()) {
                return bad(format!("negative multiplier in column {i}"));
            }
            if let Some(p) = pinned {
                if !col[p].is_zero() {
                    return bad(format!("lambda_{i}^({i}) must be zero"));
                }
                if col.len() == 1 {
                    continue;
                }
            }
            let sum: Rational = col.iter().sum();
            if &sum != alpha {
                return bad(format!("column {i} sums to {sum}, expected {alpha}"));
            }
        }
        Ok(())
    }
}

/// Per-user rate vectors, rows aligned with [`DualMatrix`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RateMatrix {
    pub users: Vec<usize>,
    pub rows: Vec<Vec<Rational>>,
}

impl RateMatrix {
    /// `Z_i = max_l R_i^(l)`.
    pub fn column_max(&self) -> Vec<Rational> {
        let m = self.rows.first().map_or(0, |r| r.len());
        (0..m)
            .map(|i| {
                self.rows
                    .iter()
                    .map(|r| &r[i])
                    .max()
                    .cloned()
                    .unwrap_or_default()
            })
            .collect()
    }
}

/// Step size families with uniform averaging weights.
#[derive(Clone, Debug, PartialEq)]
pub enum StepSchedule {
    /// `theta[n] = a / (b + c n)` with `a > 0`, `b >= 0`, `c > 0`.
    Harmonic { a: Rational, b: Rational, c: Rational },
    /// `theta[n] = n^(-a)` with `0 < a < 1`.
    Power { a: f64 },
}

impl Default for StepSchedule {
    /// `theta[n] = 1 / (n + 1)`.
    fn default() -> Self {
        StepSchedule::Harmonic {
            a: int(1),
            b: int(1),
            c: int(1),
        }
    }
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            StepSchedule::Harmonic { a, b, c } => {
                if !a.is_positive() || b.is_negative() || !c.is_positive() {
                    return Err(DexError::InvalidConfig(
                        "harmonic schedule needs a > 0, b >= 0, c > 0".into(),
                    ));
                }
            }
            StepSchedule::Power { a } => {
                if !(*a > 0.0 && *a < 1.0) {
                    return Err(DexError::InvalidConfig("power schedule needs 0 < a < 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Step size after the `n`-th multiplier iterate (`n` from 0). Where the
    /// formula is undefined at `n = 0` (`b = 0`, or the power family) the
    /// value at `n = 1` is used.
    pub fn theta(&self, n: u64) -> Rational {
        match self {
            StepSchedule::Harmonic { a, b, c } => {
                let n = if b.is_zero() { n.max(1) } else { n };
                a / (b + c * int(n as i64))
            }
            StepSchedule::Power { a } => {
                let v = (n.max(1) as f64).powf(-a);
                Rational::from_float(v).unwrap_or_default()
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub schedule: StepSchedule,
    pub max_iterations: u64,
    pub gap_tolerance: f64,
    /// Defaults to ascending terminal index.
    pub tie_break: Option<TieBreak>,
    /// Multiply every step by `max_i alpha_i`, so that scaling all weights
    /// scales the multiplier trajectory with them. No effect on unit weights.
    pub scale_steps: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            schedule: StepSchedule::default(),
            max_iterations: 50_000,
            gap_tolerance: 1e-3,
            tie_break: None,
            scale_steps: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iteration: u64,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    /// Max-combined rates `Z`.
    pub rates: Vec<Rational>,
    pub primal_objective: Rational,
    /// Best dual value seen, attained by `dual`.
    pub dual_objective: Rational,
    pub gap: Rational,
    pub iterations: u64,
    pub converged: bool,
    pub dual: DualMatrix,
    /// Averaged per-user rates `R-hat`.
    pub averaged: RateMatrix,
}

/// Starting multipliers: `alpha_i / k` for helpers, `alpha_i / (k - 1)` for
/// the other users of a user column, zero on the pinned entries.
pub fn init_dual(instance: &Instance) -> Result<DualMatrix> {
    let users = instance.user_list();
    let k = users.len();
    if k < 2 {
        return Err(DexError::InvalidConfig(
            "dual decomposition needs at least two users; use the greedy allocation".into(),
        ));
    }
    let rows = users
        .iter()
        .map(|&l| {
            instance
                .weights()
                .iter()
                .enumerate()
                .map(|(i, alpha)| {
                    if i == l {
                        Rational::zero()
                    } else if instance.users().contains(i) {
                        alpha / int(k as i64 - 1)
                    } else {
                        alpha / int(k as i64)
                    }
                })
                .collect()
        })
        .collect();
    Ok(DualMatrix { users, rows })
}

/// Euclidean projection of `v` onto `{x >= 0, sum x = budget, x_pinned = 0}`.
pub fn project_column(v: &[Rational], budget: &Rational, pinned: Option<usize>) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); v.len()];
    let mut free: Vec<usize> = (0..v.len()).filter(|&j| Some(j) != pinned).collect();
    if free.is_empty() || !budget.is_positive() {
        return out;
    }
    free.sort_by(|&a, &b| v[b].cmp(&v[a]).then(a.cmp(&b)));
    let mut cum = Rational::zero();
    let mut tau = Rational::zero();
    for (j, &idx) in free.iter().enumerate() {
        cum += &v[idx];
        let cand = (&cum - budget) / int(j as i64 + 1);
        if v[idx] > cand {
            tau = cand;
        }
    }
    for &idx in &free {
        let x = &v[idx] - &tau;
        if x.is_positive() {
            out[idx] = x;
        }
    }
    out
}

/// Fixed-point projection onto `{x >= 0, sum x = budget, x_pinned = 0}`:
/// the exact projection rounded down, with the leftover units handed to the
/// largest coordinates so the sum is exact.
fn project_ticks(v: &mut [i128], budget: i128, pinned: Option<usize>, scratch: &mut Vec<usize>) {
    scratch.clear();
    scratch.extend((0..v.len()).filter(|&j| Some(j) != pinned));
    if let Some(p) = pinned {
        v[p] = 0;
    }
    if scratch.is_empty() || budget <= 0 {
        v.iter_mut().for_each(|x| *x = 0);
        return;
    }
    scratch.sort_by(|&a, &b| v[b].cmp(&v[a]).then(a.cmp(&b)));
    let (mut cum, mut rho, mut rho_cum) = (0i128, 0i128, 0i128);
    for (j, &idx) in scratch.iter().enumerate() {
        cum += v[idx];
        let j = j as i128 + 1;
        // v_idx > (cum - budget) / j
        if v[idx] * j > cum - budget {
            rho = j;
            rho_cum = cum;
        }
    }
    let tau_num = rho_cum - budget;
    let mut assigned = 0i128;
    for (j, &idx) in scratch.iter().enumerate() {
        if (j as i128) < rho {
            let x = (v[idx] * rho - tau_num).div_euclid(rho);
            v[idx] = x;
            assigned += x;
        } else {
            v[idx] = 0;
        }
    }
    let mut leftover = budget - assigned;
    debug_assert!((0..rho.max(1)).contains(&leftover));
    for &idx in scratch.iter() {
        if leftover == 0 {
            break;
        }
        v[idx] += 1;
        leftover -= 1;
    }
}

fn pinned_row(users: &[usize], i: usize) -> Option<usize> {
    users.iter().position(|&u| u == i)
}

/// One projected ascent step `Lambda_i + theta * R_i`, column by column.
pub fn subgradient_step(
    instance: &Instance,
    lambda: &DualMatrix,
    rates: &RateMatrix,
    theta: &Rational,
) -> Result<DualMatrix> {
    let k = lambda.rows.len();
    let m = instance.terminal_count();
    if rates.rows.len() != k || lambda.users != rates.users || lambda.rows.iter().chain(&rates.rows).any(|r| r.len() != m) {
        return Err(DexError::DimensionMismatch("dual and rate matrices disagree".into()));
    }
    let mut rows = vec![vec![Rational::zero(); m]; k];
    for (i, alpha) in instance.weights().iter().enumerate() {
        let v: Vec<Rational> = (0..k)
            .map(|l| &lambda.rows[l][i] + theta * &rates.rows[l][i])
            .collect();
        let pin = pinned_row(&lambda.users, i);
        let projected = if pin.is_some() && k == 1 {
            vec![Rational::zero()]
        } else {
            project_column(&v, alpha, pin)
        };
        for (l, x) in projected.into_iter().enumerate() {
            rows[l][i] = x;
        }
    }
    Ok(DualMatrix {
        users: lambda.users.clone(),
        rows,
    })
}

/// Convex combination `sum_j mu_j R[j]` of rate matrices.
pub fn recover_primal(history: &[RateMatrix], mu: &[Rational]) -> Result<RateMatrix> {
    if history.is_empty() || history.len() != mu.len() {
        return Err(DexError::DimensionMismatch(
            "need one averaging weight per iterate".into(),
        ));
    }
    if mu.iter().any(|w| w.is_negative()) || mu.iter().sum::<Rational>() != Rational::one() {
        return Err(DexError::InvalidConfig(
            "averaging weights must be nonnegative and sum to 1".into(),
        ));
    }
    let first = &history[0];
    let mut rows = vec![vec![Rational::zero(); first.rows[0].len()]; first.rows.len()];
    for (r, w) in history.iter().zip(mu) {
        for (acc_row, row) in rows.iter_mut().zip(&r.rows) {
            for (acc, x) in acc_row.iter_mut().zip(row) {
                *acc += w * x;
            }
        }
    }
    Ok(RateMatrix {
        users: first.users.clone(),
        rows,
    })
}

/// `sum_l g^(l)(Lambda^(l))`, each term from a fresh greedy evaluation.
pub fn dual_objective(instance: &Instance, lambda: &DualMatrix, tie: &TieBreak) -> Result<Rational> {
    let mut total = Rational::zero();
    for (l, &user) in lambda.users.iter().enumerate() {
        let w = lambda.row(l);
        let r = edmonds_allocate(instance, user, w, tie)?;
        total += r.objective(w);
    }
    Ok(total)
}

/// Primal objective of the solution's rates minus the dual value of its
/// multiplier certificate, recomputed from scratch.
pub fn duality_gap(instance: &Instance, solution: &Solution, tie: Option<&TieBreak>) -> Result<Rational> {
    let default_tie = TieBreak::ascending(instance.terminal_count());
    let tie = tie.unwrap_or(&default_tie);
    solution.dual.check_feasible(instance.weights())?;
    Ok(instance.objective(&solution.rates) - dual_objective(instance, &solution.dual, tie)?)
}

fn overflow(what: &'static str) -> DexError {
    DexError::Overflow(what)
}

fn to_i128(x: &BigInt, what: &'static str) -> Result<i128> {
    x.to_i128().ok_or(overflow(what))
}

/// Per-entry multiplier increment `theta[n] * R`, rounded to ticks.
enum Increment {
    Exact { num: i128, den: i128 },
    Float { factor: f64 },
}

impl Increment {
    fn new(schedule: &StepSchedule, gain: &Rational, n: u64, scale: i128, unit: i64) -> Result<Self> {
        match schedule {
            StepSchedule::Harmonic { .. } => {
                // gain * theta * rate / unit * scale, with rate an integer
                let theta: Ratio<BigInt> = schedule.theta(n) * gain;
                let num = theta.numer() * BigInt::from(scale);
                let den = theta.denom() * BigInt::from(unit);
                Ok(Increment::Exact {
                    num: to_i128(&num, "step size")?,
                    den: to_i128(&den, "step size")?,
                })
            }
            StepSchedule::Power { a } => Ok(Increment::Float {
                factor: (n.max(1) as f64).powf(-a) * to_f64(gain) * scale as f64 / unit as f64,
            }),
        }
    }

    fn apply(&self, rate: i64) -> Result<i128> {
        match *self {
            Increment::Exact { num, den } => {
                let p = num.checked_mul(rate as i128).ok_or(overflow("step"))?;
                Ok((2 * p + den).div_euclid(2 * den))
            }
            Increment::Float { factor } => Ok((factor * rate as f64).round() as i128),
        }
    }
}

/// Iteration state in fixed point.
struct Engine<'a> {
    instance: &'a Instance,
    users: Vec<usize>,
    m: usize,
    scale: i128,
    unit: i64,
    budgets: Vec<i128>,
    ticks: Vec<Vec<i128>>,
    sums: Vec<Vec<i128>>,
    count: i128,
    best_dual: Option<(i128, Vec<Vec<i128>>)>,
}

impl<'a> Engine<'a> {
    fn new(instance: &'a Instance) -> Result<Self> {
        let users = instance.user_list();
        let m = instance.terminal_count();
        let lcm = lcm_of_denominators(instance.weights());
        let scale_big = lcm * BigInt::from(10u64.pow(QUANTUM_DIGITS));
        let scale = to_i128(&scale_big, "multiplier scale")?;
        let budgets = instance
            .weights()
            .iter()
            .map(|a| to_i128(&(a * Rational::from_integer(scale_big.clone())).to_integer(), "weights"))
            .collect::<Result<Vec<_>>>()?;
        let init = init_dual(instance)?;
        let k = users.len();
        let mut ticks = vec![vec![0i128; m]; k];
        let mut scratch = Vec::new();
        for i in 0..m {
            let mut col: Vec<i128> = init
                .column(i)
                .iter()
                .map(|x| to_i128(&(x * Rational::from_integer(scale_big.clone())).floor().to_integer(), "weights"))
                .collect::<Result<_>>()?;
            // already feasible up to rounding; the projection restores the exact sum
            project_ticks(&mut col, budgets[i], pinned_row(&users, i), &mut scratch);
            for (l, x) in col.into_iter().enumerate() {
                ticks[l][i] = x;
            }
        }
        Ok(Engine {
            instance,
            m,
            scale,
            unit: instance.model().entropy_unit(),
            budgets,
            ticks,
            sums: vec![vec![0; m]; k],
            count: 0,
            best_dual: None,
            users,
        })
    }

    /// Greedy vertices for the current multipliers; returns the dual value
    /// numerator over `scale * unit`.
    fn evaluate(&self, tie: &TieBreak, rates: &mut [Vec<i64>]) -> Result<i128> {
        let model = self.instance.model();
        let senders = self.instance.transmitters();
        let mut dual = 0i128;
        for (l, &user) in self.users.iter().enumerate() {
            greedy_scaled(model, senders, user, &self.ticks[l], tie, &mut rates[l]);
            for i in 0..self.m {
                let term = self.ticks[l][i]
                    .checked_mul(rates[l][i] as i128)
                    .ok_or(overflow("dual objective"))?;
                dual = dual.checked_add(term).ok_or(overflow("dual objective"))?;
            }
        }
        Ok(dual)
    }

    fn accumulate(&mut self, rates: &[Vec<i64>]) {
        for (sum_row, row) in self.sums.iter_mut().zip(rates) {
            for (s, &r) in sum_row.iter_mut().zip(row) {
                *s += r as i128;
            }
        }
        self.count += 1;
    }

    /// Primal numerator over `scale * unit * count`.
    fn primal(&self) -> Result<i128> {
        let mut total = 0i128;
        for i in 0..self.m {
            let zmax = self.sums.iter().map(|r| r[i]).max().unwrap_or(0);
            let term = self.budgets[i].checked_mul(zmax).ok_or(overflow("primal objective"))?;
            total = total.checked_add(term).ok_or(overflow("primal objective"))?;
        }
        Ok(total)
    }

    fn step(&mut self, inc: &Increment, rates: &[Vec<i64>]) -> Result<()> {
        let k = self.users.len();
        let mut col = vec![0i128; k];
        let mut scratch = Vec::with_capacity(k);
        for i in 0..self.m {
            for l in 0..k {
                col[l] = self.ticks[l][i]
                    .checked_add(inc.apply(rates[l][i])?)
                    .ok_or(overflow("multiplier update"))?;
            }
            project_ticks(&mut col, self.budgets[i], pinned_row(&self.users, i), &mut scratch);
            for l in 0..k {
                self.ticks[l][i] = col[l];
            }
        }
        Ok(())
    }

    fn ticks_to_dual(&self, ticks: &[Vec<i128>]) -> DualMatrix {
        let scale = BigInt::from(self.scale);
        DualMatrix {
            users: self.users.clone(),
            rows: ticks
                .iter()
                .map(|r| r.iter().map(|&t| Rational::new(t.into(), scale.clone())).collect())
                .collect(),
        }
    }

    fn averaged(&self) -> RateMatrix {
        let den = BigInt::from(self.count) * BigInt::from(self.unit);
        RateMatrix {
            users: self.users.clone(),
            rows: self
                .sums
                .iter()
                .map(|r| r.iter().map(|&s| Rational::new(s.into(), den.clone())).collect())
                .collect(),
        }
    }
}

pub fn solve(instance: &Instance, config: &SolverConfig) -> Result<Solution> {
    solve_traced(instance, config, |_| {})
}

/// [`solve`], reporting every iteration to `trace`.
pub fn solve_traced(
    instance: &Instance,
    config: &SolverConfig,
    mut trace: impl FnMut(&TraceRecord),
) -> Result<Solution> {
    config.schedule.validate()?;
    if config.gap_tolerance.is_nan() || config.gap_tolerance < 0.0 {
        return Err(DexError::InvalidConfig("gap tolerance must be nonnegative".into()));
    }
    let m = instance.terminal_count();
    let tie = match &config.tie_break {
        Some(t) if t.len() != m => {
            return Err(DexError::InvalidConfig(format!(
                "tie-break covers {} terminals, instance has {m}",
                t.len()
            )))
        }
        Some(t) => t.clone(),
        None => TieBreak::ascending(m),
    };
    let users = instance.user_list();
    if users.len() == 1 {
        return solve_single(instance, users[0], &tie);
    }
    if config.max_iterations == 0 {
        return Err(DexError::InvalidConfig("max_iterations must be positive".into()));
    }

    let mut engine = Engine::new(instance)?;
    let k = users.len();
    let mut rates = vec![vec![0i64; m]; k];
    let denom = engine.scale as f64 * engine.unit as f64;
    let gain = match instance.weights().iter().max() {
        Some(top) if config.scale_steps && top.is_positive() => top.clone(),
        _ => Rational::one(),
    };
    // Stop when gap_num / count <= threshold, i.e. gap <= tolerance exactly
    // (the tolerance is read at its shortest decimal spelling).
    let threshold = if config.gap_tolerance.is_finite() {
        let tolerance = parse_rational(&format!("{}", config.gap_tolerance))?;
        let total = tolerance * Rational::from_integer(BigInt::from(engine.scale) * BigInt::from(engine.unit));
        to_i128(&total.floor().to_integer(), "gap tolerance").unwrap_or(i128::MAX / 4)
    } else {
        i128::MAX / 4
    };
    let mut converged = false;
    for n in 0..config.max_iterations {
        let dual = engine.evaluate(&tie, &mut rates)?;
        if engine.best_dual.as_ref().is_none_or(|(d, _)| dual > *d) {
            engine.best_dual = Some((dual, engine.ticks.clone()));
        }
        engine.accumulate(&rates);
        let primal = engine.primal()?;
        let best = engine.best_dual.as_ref().map(|(d, _)| *d).unwrap_or(dual);
        let gap_num = primal
            .checked_sub(best.checked_mul(engine.count).ok_or(overflow("gap"))?)
            .ok_or(overflow("gap"))?;
        let gap = gap_num as f64 / (denom * engine.count as f64);
        trace(&TraceRecord {
            iteration: n + 1,
            primal: primal as f64 / (denom * engine.count as f64),
            dual: dual as f64 / denom,
            gap,
        });
        if gap_num <= threshold.saturating_mul(engine.count) {
            converged = true;
            break;
        }
        if n + 1 < config.max_iterations {
            let inc = Increment::new(&config.schedule, &gain, n, engine.scale, engine.unit)?;
            engine.step(&inc, &rates)?;
        }
    }

    let averaged = engine.averaged();
    let z = averaged.column_max();
    let primal_objective = instance.objective(&z);
    let (best_num, best_ticks) = engine.best_dual.clone().expect("at least one iteration");
    let dual_objective = Rational::new(
        best_num.into(),
        BigInt::from(engine.scale) * BigInt::from(engine.unit),
    );
    let gap = &primal_objective - &dual_objective;
    Ok(Solution {
        rates: z,
        primal_objective,
        dual_objective,
        gap,
        iterations: engine.count as u64,
        converged,
        dual: engine.ticks_to_dual(&best_ticks),
        averaged,
    })
}

fn solve_single(instance: &Instance, user: usize, tie: &TieBreak) -> Result<Solution> {
    let alpha = instance.weights();
    let r = edmonds_allocate(instance, user, alpha, tie)?;
    let objective = r.objective(alpha);
    let mut row = alpha.to_vec();
    row[user] = Rational::zero();
    Ok(Solution {
        primal_objective: objective.clone(),
        dual_objective: objective,
        gap: Rational::zero(),
        iterations: 0,
        converged: true,
        dual: DualMatrix {
            users: vec![user],
            rows: vec![row],
        },
        averaged: RateMatrix {
            users: vec![user],
            rows: vec![r.0.clone()],
        },
        rates: r.0,
    })
}

impl Solution {
    pub fn gap_f64(&self) -> f64 {
        to_f64(&self.gap)
    }

    pub fn objective_f64(&self) -> f64 {
        to_f64(&self.primal_objective)
    }
}
