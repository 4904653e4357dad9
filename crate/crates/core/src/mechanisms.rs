//! Payments and incentive checks.
//!
//! A mechanism here is a stopping rule plus a payment source. Critical
//! payments charge the winner the least value they could have reported and
//! still won, probed directly against the rule; the exhaustive checker
//! verifies ex-post incentive compatibility literally: for every agent,
//! every true profile in the support product, and every deviation on the
//! reporting grid, truth must be weakly better. Opponents' signals stay
//! fixed (no interim expectation); the randomized rule's coin is the one
//! expectation taken, by exact half/half branch averaging.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::instances::{ArrivalModel, ArrivalOrder, Instance, Temporality};
use crate::rules::{prophet, Outcome, RuleKind, RuleSpec};
use crate::valuations::{CheckOutcome, SignalProfile, CHECK_TOL};

/// Bisection tolerance on critical signals over continuous reports.
pub const REPORT_TOL: f64 = 1e-9;

/// Cap on `n` for enumerating all arrival orders in exhaustive checks.
pub const EPIC_ORDER_CAP: usize = 7;

/// How the winner's charge is determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaymentRule {
    /// Whatever the rule itself computed (the randomized rule's lottery
    /// price, the sample-bar rule's critical charge).
    Embedded,
    /// The fixed threshold charge.
    PostedPrice,
    /// Critical value evaluated on the full profile (tardy).
    CriticalFarsighted,
    /// Critical value evaluated on the signals observed by the winner's
    /// arrival (prompt).
    CriticalMyopic,
    /// `max(threshold, prompt critical value)` for threshold rules.
    ThresholdOrCritical,
}

impl PaymentRule {
    pub fn parse_id(id: &str) -> Result<Self> {
        Ok(match id {
            "embedded" => PaymentRule::Embedded,
            "posted-price" => PaymentRule::PostedPrice,
            "critical-farsighted" => PaymentRule::CriticalFarsighted,
            "critical-myopic" => PaymentRule::CriticalMyopic,
            "threshold-or-critical" => PaymentRule::ThresholdOrCritical,
            _ => return Err(Error::InvalidInput(format!("unknown payment id `{id}`"))),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            PaymentRule::Embedded => "embedded",
            PaymentRule::PostedPrice => "posted-price",
            PaymentRule::CriticalFarsighted => "critical-farsighted",
            PaymentRule::CriticalMyopic => "critical-myopic",
            PaymentRule::ThresholdOrCritical => "threshold-or-critical",
        }
    }
}

/// A profitable deviation found by the checker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub agent: usize,
    pub true_signal: f64,
    pub reported_signal: f64,
    pub utility_truth: f64,
    pub utility_deviation: f64,
    /// `utility_deviation - utility_truth`.
    pub gap: f64,
    /// The true profile at which the deviation pays.
    pub profile: Vec<f64>,
    /// Arrival order (secretary mechanisms only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
}

/// Candidate reports for critical-value searches.
#[derive(Debug, Clone, PartialEq)]
pub enum ReportSpace {
    /// Exact infimum over an explicit grid of reports.
    Grid(Vec<f64>),
    /// Bisection on the qualification indicator to [`REPORT_TOL`].
    Bisection,
}

/// Stable content hash of an instance (hex SHA-256 of its canonical JSON).
pub fn instance_hash(inst: &Instance) -> Result<String> {
    let json = serde_json::to_string(inst)?;
    let digest = Sha256::digest(json.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn run_deterministic(
    rule: &RuleSpec,
    inst: &Instance,
    realized: &SignalProfile,
    order: Option<&ArrivalOrder>,
) -> Result<Outcome> {
    match inst.model {
        ArrivalModel::Prophet => rule.run(inst, Some(realized), None, None),
        ArrivalModel::Secretary => {
            let variant = inst.with_fixed_signals(realized)?;
            rule.run(&variant, None, order, None)
        }
    }
}

/// Does `winner` still win when reporting `report` (all else fixed)?
fn still_wins(
    rule: &RuleSpec,
    inst: &Instance,
    realized: &SignalProfile,
    order: Option<&ArrivalOrder>,
    winner: usize,
    report: f64,
) -> Result<bool> {
    let modified = realized.with_signal(winner, report)?;
    let out = run_deterministic(rule, inst, &modified, order)?;
    Ok(out.winner == Some(winner))
}

/// The least report at which `winner` keeps the allocation. Grid mode also
/// polices monotonicity along the sweep: an allocation that switches off as
/// the report grows is a monotonicity violation (no critical payment makes
/// such a rule truthful).
fn critical_report(
    rule: &RuleSpec,
    inst: &Instance,
    realized: &SignalProfile,
    order: Option<&ArrivalOrder>,
    winner: usize,
    reports: &ReportSpace,
) -> Result<f64> {
    let truthful = realized.get(winner);
    match reports {
        ReportSpace::Grid(grid) => {
            let mut candidates: Vec<f64> = grid.clone();
            candidates.push(truthful);
            candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
            candidates.dedup();
            let mut first_win: Option<f64> = None;
            for &r in &candidates {
                let wins = still_wins(rule, inst, realized, order, winner, r)?;
                match (first_win, wins) {
                    (None, true) => first_win = Some(r),
                    (Some(lower), false) => {
                        return Err(Error::MonotonicityViolation {
                            agent: winner,
                            lower,
                            upper: r,
                        })
                    }
                    _ => {}
                }
            }
            first_win.ok_or_else(|| {
                Error::InvalidInput("winner not allocated at any candidate report".into())
            })
        }
        ReportSpace::Bisection => {
            if still_wins(rule, inst, realized, order, winner, 0.0)? {
                return Ok(0.0);
            }
            let mut lo = 0.0;
            let mut hi = truthful;
            while hi - lo > REPORT_TOL {
                let mid = 0.5 * (lo + hi);
                if still_wins(rule, inst, realized, order, winner, mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi)
        }
    }
}

fn myopic_value_at_report(
    inst: &Instance,
    order: Option<&ArrivalOrder>,
    winner: usize,
    realized: &SignalProfile,
    report: f64,
) -> Result<f64> {
    let v = inst.valuation(winner);
    match inst.model {
        ArrivalModel::Prophet => {
            Ok(v.eval_prefix_with(realized.as_slice(), winner + 1, winner, report))
        }
        ArrivalModel::Secretary => {
            let order = order.ok_or_else(|| {
                Error::InvalidInput("secretary payment needs an arrival order".into())
            })?;
            let pos = (0..order.len())
                .find(|&p| order.agent_at(p) == winner)
                .ok_or_else(|| Error::InvalidInput("winner missing from order".into()))?;
            let mut arrived = vec![false; inst.n()];
            for q in 0..=pos {
                arrived[order.agent_at(q)] = true;
            }
            Ok(v.eval_set_with(realized.as_slice(), &arrived, winner, report))
        }
    }
}

/// Critical-value payment for an allocated winner under the given rule.
///
/// The prompt (myopic) kinds never read signals arriving after the winner;
/// the tardy (farsighted) kinds price on the full profile. The
/// threshold-or-critical kind additionally floors the charge at the rule's
/// threshold.
pub fn critical_payment(
    rule: &RuleSpec,
    inst: &Instance,
    realized: &SignalProfile,
    order: Option<&ArrivalOrder>,
    winner: usize,
    kind: PaymentRule,
    reports: &ReportSpace,
) -> Result<f64> {
    let outcome = run_deterministic(rule, inst, realized, order)?;
    if outcome.winner != Some(winner) {
        return Err(Error::InvalidInput(format!(
            "agent {winner} is not the winner under the realized signals"
        )));
    }
    match kind {
        PaymentRule::Embedded => Ok(outcome.payment),
        PaymentRule::PostedPrice => Ok(rule
            .threshold
            .ok_or_else(|| Error::InvalidInput("posted price needs a threshold".into()))?
            .value()),
        PaymentRule::CriticalFarsighted => {
            if rule.kind.is_randomized() {
                return Err(Error::Unsupported(
                    "critical probing of the randomized rule is not defined".into(),
                ));
            }
            let c = critical_report(rule, inst, realized, order, winner, reports)?;
            Ok(inst
                .valuation(winner)
                .eval_full_with(realized.as_slice(), winner, c))
        }
        PaymentRule::CriticalMyopic => {
            if rule.kind.is_randomized() {
                return Err(Error::Unsupported(
                    "critical probing of the randomized rule is not defined".into(),
                ));
            }
            let c = critical_report(rule, inst, realized, order, winner, reports)?;
            myopic_value_at_report(inst, order, winner, realized, c)
        }
        PaymentRule::ThresholdOrCritical => {
            let x = rule
                .threshold
                .ok_or_else(|| Error::InvalidInput("this payment needs a threshold".into()))?
                .value();
            let c = critical_report(rule, inst, realized, order, winner, reports)?;
            let critical_value = myopic_value_at_report(inst, order, winner, realized, c)?;
            Ok(x.max(critical_value))
        }
    }
}

// ---------------------------------------------------------------------------
// Exhaustive EPIC check
// ---------------------------------------------------------------------------

/// Machine-readable result of an exhaustive incentive check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpicReport {
    pub mechanism: String,
    pub instance_hash: String,
    pub triples_checked: u64,
    pub passed: bool,
    /// Smallest truthful winner utility seen (individual rationality needs
    /// this to stay above `-1e-9`).
    pub min_truth_utility: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<DeviationReport>,
}

struct EpicContext<'a> {
    rule: &'a RuleSpec,
    payment: PaymentRule,
    inst: &'a Instance,
    report_grids: Vec<Vec<f64>>,
}

impl<'a> EpicContext<'a> {
    /// Weighted branch outcomes of the mechanism on a reported profile.
    fn branches(
        &self,
        reported: &SignalProfile,
        order: Option<&ArrivalOrder>,
    ) -> Result<Vec<(f64, Outcome)>> {
        if self.rule.kind == RuleKind::RandomizedPostedPrice {
            let x = self
                .rule
                .threshold
                .ok_or_else(|| Error::InvalidInput("randomized rule needs a threshold".into()))?;
            let (stop, wait) = prophet::randomized_branches(self.inst, x, reported)?;
            Ok(vec![(0.5, stop), (0.5, wait)])
        } else {
            let out = run_deterministic(self.rule, self.inst, reported, order)?;
            Ok(vec![(1.0, out)])
        }
    }

    fn payment_for(
        &self,
        branch: &Outcome,
        reported: &SignalProfile,
        order: Option<&ArrivalOrder>,
        agent: usize,
    ) -> Result<f64> {
        match self.payment {
            PaymentRule::Embedded => Ok(branch.payment),
            PaymentRule::PostedPrice => {
                if self.rule.kind.is_randomized() {
                    // The lottery's own pricing: the threshold on the stop
                    // branch, free on the wait branch.
                    Ok(branch.payment)
                } else {
                    Ok(self
                        .rule
                        .threshold
                        .ok_or_else(|| {
                            Error::InvalidInput("posted price needs a threshold".into())
                        })?
                        .value())
                }
            }
            kind => critical_payment(
                self.rule,
                self.inst,
                reported,
                order,
                agent,
                kind,
                &ReportSpace::Grid(self.report_grids[agent].clone()),
            ),
        }
    }

    /// True value of `agent` under the instance temporality: farsighted
    /// values read the whole true profile, myopic values only the signals
    /// observed by the agent's arrival.
    fn true_value(
        &self,
        agent: usize,
        true_profile: &SignalProfile,
        order: Option<&ArrivalOrder>,
    ) -> Result<f64> {
        let v = self.inst.valuation(agent);
        Ok(match self.inst.temporality {
            Temporality::Farsighted => v.eval_full(true_profile.as_slice()),
            Temporality::Myopic => match self.inst.model {
                ArrivalModel::Prophet => v.eval_prefix(true_profile.as_slice(), agent + 1),
                ArrivalModel::Secretary => {
                    let order = order.ok_or_else(|| {
                        Error::InvalidInput("secretary check needs an order".into())
                    })?;
                    let pos = (0..order.len())
                        .find(|&p| order.agent_at(p) == agent)
                        .expect("order is a permutation");
                    let mut arrived = vec![false; self.inst.n()];
                    for q in 0..=pos {
                        arrived[order.agent_at(q)] = true;
                    }
                    v.eval_set(true_profile.as_slice(), &arrived)
                }
            },
        })
    }

    /// Expected utility of `agent` when the mechanism sees `reported` while
    /// the agent's true value comes from `true_profile`.
    fn utility(
        &self,
        agent: usize,
        true_profile: &SignalProfile,
        reported: &SignalProfile,
        order: Option<&ArrivalOrder>,
    ) -> Result<f64> {
        let mut u = 0.0;
        for (weight, branch) in self.branches(reported, order)? {
            if branch.winner == Some(agent) {
                let value = self.true_value(agent, true_profile, order)?;
                let pay = self.payment_for(&branch, reported, order, agent)?;
                u += weight * (value - pay);
            }
        }
        Ok(u)
    }
}

fn product_profiles(spaces: &[Vec<f64>]) -> Vec<SignalProfile> {
    let n = spaces.len();
    let mut idx = vec![0usize; n];
    let mut out = Vec::new();
    loop {
        let point: Vec<f64> = (0..n).map(|c| spaces[c][idx[c]]).collect();
        out.push(SignalProfile::new(point).expect("support values are valid signals"));
        let mut c = n;
        loop {
            if c == 0 {
                return out;
            }
            c -= 1;
            idx[c] += 1;
            if idx[c] < spaces[c].len() {
                break;
            }
            idx[c] = 0;
        }
    }
}

fn all_orders(n: usize) -> Result<Vec<ArrivalOrder>> {
    if n > EPIC_ORDER_CAP {
        return Err(Error::Capacity(format!(
            "exhaustive checks enumerate orders only up to n = {EPIC_ORDER_CAP}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    loop {
        out.push(ArrivalOrder::new(perm.clone())?);
        let Some(i) = (0..n.saturating_sub(1))
            .rev()
            .find(|&i| perm[i] < perm[i + 1])
        else {
            return Ok(out);
        };
        let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
}

fn true_spaces(inst: &Instance, overrides: Option<&[Vec<f64>]>) -> Result<Vec<Vec<f64>>> {
    if let Some(grids) = overrides {
        if grids.len() != inst.n() {
            return Err(Error::InvalidInput(format!(
                "{} true-signal grids for {} agents",
                grids.len(),
                inst.n()
            )));
        }
        for g in grids {
            if g.is_empty() {
                return Err(Error::InvalidInput("empty true-signal grid".into()));
            }
        }
        return Ok(grids.to_vec());
    }
    match inst.model {
        ArrivalModel::Prophet => inst
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| match &a.signal {
                crate::instances::SignalSource::Draw(d) => d.support_values().ok_or_else(|| {
                    Error::Unsupported(format!(
                        "agent {i} has an infinite-support prior; the exhaustive check \
                             needs finite supports"
                    ))
                }),
                crate::instances::SignalSource::Fixed(v) => Ok(vec![*v]),
            })
            .collect(),
        ArrivalModel::Secretary => {
            let signals = inst.fixed_signals()?;
            Ok(signals.as_slice().iter().map(|&s| vec![s]).collect())
        }
    }
}

/// Exhaustively verify ex-post incentive compatibility of a rule/payment
/// pair on finite signal spaces.
///
/// For every arrival order (secretary), every true profile in the product
/// of per-agent signal spaces, every agent, and every report on that
/// agent's grid, truthful utility must be at least the deviation utility
/// minus `1e-9`. Opponents' true signals stay fixed; the randomized rule is
/// averaged exactly over its coin. The first violation (in enumeration
/// order) is returned as the witness.
pub fn epic_check(
    rule: &RuleSpec,
    payment: PaymentRule,
    inst: &Instance,
    true_grids: Option<&[Vec<f64>]>,
    report_grids: Option<&[Vec<f64>]>,
) -> Result<EpicReport> {
    let n = inst.n();
    let spaces = true_spaces(inst, true_grids)?;
    let reports: Vec<Vec<f64>> = match report_grids {
        Some(g) => {
            if g.len() != n {
                return Err(Error::InvalidInput(format!(
                    "{} report grids for {n} agents",
                    g.len()
                )));
            }
            g.to_vec()
        }
        None => {
            // Default reporting grid: the union of all agents' signal
            // spaces plus zero, shared by everyone.
            let mut union: Vec<f64> = spaces.iter().flatten().copied().collect();
            union.push(0.0);
            union.sort_by(|a, b| a.partial_cmp(b).unwrap());
            union.dedup();
            vec![union; n]
        }
    };
    let orders: Vec<Option<ArrivalOrder>> = match inst.model {
        ArrivalModel::Prophet => vec![None],
        ArrivalModel::Secretary => all_orders(n)?.into_iter().map(Some).collect(),
    };
    let ctx = EpicContext {
        rule,
        payment,
        inst,
        report_grids: reports.clone(),
    };

    let mut triples = 0u64;
    let mut min_truth = f64::INFINITY;
    for profile in product_profiles(&spaces) {
        for order in &orders {
            let order = order.as_ref();
            for (agent, agent_reports) in reports.iter().enumerate() {
                let u_truth = ctx.utility(agent, &profile, &profile, order)?;
                min_truth = min_truth.min(u_truth);
                for &r in agent_reports {
                    if r == profile.get(agent) {
                        continue;
                    }
                    let deviated = profile.with_signal(agent, r)?;
                    let u_dev = ctx.utility(agent, &profile, &deviated, order)?;
                    triples += 1;
                    if u_dev > u_truth + CHECK_TOL {
                        return Ok(EpicReport {
                            mechanism: format!("{}+{}", rule.id(), payment.id()),
                            instance_hash: instance_hash(inst)?,
                            triples_checked: triples,
                            passed: false,
                            min_truth_utility: min_truth,
                            witness: Some(DeviationReport {
                                agent,
                                true_signal: profile.get(agent),
                                reported_signal: r,
                                utility_truth: u_truth,
                                utility_deviation: u_dev,
                                gap: u_dev - u_truth,
                                profile: profile.as_slice().to_vec(),
                                order: order.map(|o| o.as_slice().to_vec()),
                            }),
                        });
                    }
                }
            }
        }
    }
    Ok(EpicReport {
        mechanism: format!("{}+{}", rule.id(), payment.id()),
        instance_hash: instance_hash(inst)?,
        triples_checked: triples,
        passed: true,
        min_truth_utility: min_truth,
        witness: None,
    })
}

// ---------------------------------------------------------------------------
// Allocation monotonicity
// ---------------------------------------------------------------------------

/// A non-monotone allocation: the agent wins reporting `lower` but loses
/// reporting `upper > lower` in the same context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityWitness {
    pub agent: usize,
    /// Other agents' signals (the agent's own coordinate is the sweep).
    pub context: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<usize>>,
    pub lower: f64,
    pub upper: f64,
}

/// Sweep `agent`'s report over `grid` in every reachable context (product
/// of the other agents' finite signal spaces, times every arrival order for
/// secretary rules) and verify the allocation indicator never switches off
/// as the report grows.
pub fn allocation_monotonicity_check(
    rule: &RuleSpec,
    inst: &Instance,
    agent: usize,
    grid: &[f64],
) -> Result<CheckOutcome<MonotonicityWitness>> {
    let n = inst.n();
    if agent >= n {
        return Err(Error::InvalidInput(format!(
            "agent {agent} out of range for {n} agents"
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty report grid".into()));
    }
    let mut sweep = grid.to_vec();
    sweep.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sweep.dedup();

    let mut spaces = true_spaces(inst, None)?;
    spaces[agent] = vec![0.0]; // placeholder; the sweep overwrites it
    let orders: Vec<Option<ArrivalOrder>> = match inst.model {
        ArrivalModel::Prophet => vec![None],
        ArrivalModel::Secretary => all_orders(n)?.into_iter().map(Some).collect(),
    };

    let branch_count = if rule.kind.is_randomized() { 2 } else { 1 };
    for context in product_profiles(&spaces) {
        for order in &orders {
            let order = order.as_ref();
            for branch in 0..branch_count {
                let mut last_win: Option<f64> = None;
                for &r in &sweep {
                    let reported = context.with_signal(agent, r)?;
                    let wins = if rule.kind.is_randomized() {
                        let x = rule.threshold.ok_or_else(|| {
                            Error::InvalidInput("randomized rule needs a threshold".into())
                        })?;
                        let (stop, wait) = prophet::randomized_branches(inst, x, &reported)?;
                        let out = if branch == 0 { stop } else { wait };
                        out.winner == Some(agent)
                    } else {
                        run_deterministic(rule, inst, &reported, order)?.winner == Some(agent)
                    };
                    match (last_win, wins) {
                        (None, true) => last_win = Some(r),
                        (Some(lower), false) => {
                            return Ok(CheckOutcome::Fail(MonotonicityWitness {
                                agent,
                                context: context
                                    .as_slice()
                                    .iter()
                                    .enumerate()
                                    .map(|(i, &s)| if i == agent { f64::NAN } else { s })
                                    .collect(),
                                order: order.map(|o| o.as_slice().to_vec()),
                                lower,
                                upper: r,
                            }))
                        }
                        _ => {}
                    }
                }
            }
        }
    }
    Ok(CheckOutcome::Pass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::SignalDistribution;
    use crate::instances::{own_signal_secretary, Agent, Instance, SignalSource};
    use crate::rules::{RuleKind, Threshold};
    use crate::valuations::ValuationFunction;

    fn own_signal_prophet(n: usize, levels: &[f64]) -> Instance {
        let atoms: Vec<(f64, f64)> = levels
            .iter()
            .map(|&v| (v, 1.0 / levels.len() as f64))
            .collect();
        let agents = (0..n)
            .map(|i| Agent {
                valuation: ValuationFunction::own_signal(i),
                signal: SignalSource::Draw(SignalDistribution::finite(atoms.clone())),
            })
            .collect();
        Instance::new(ArrivalModel::Prophet, Temporality::Myopic, agents).unwrap()
    }

    #[test]
    fn critical_payment_on_a_grid() {
        // Own-signal secretary, sample-bar rule, grid {0,1,2,3}: the winner
        // pays the smallest grid signal that still beats the bar.
        let inst =
            own_signal_secretary(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], Temporality::Myopic).unwrap();
        let order = ArrivalOrder::new(vec![0, 1, 2, 3, 4, 5]).unwrap();
        let rule = RuleSpec::new(RuleKind::SampleBar);
        let realized = inst.fixed_signals().unwrap();
        let out = rule.run(&inst, None, Some(&order), None).unwrap();
        assert_eq!(out.winner, Some(4));
        let pay = critical_payment(
            &rule,
            &inst,
            &realized,
            Some(&order),
            4,
            PaymentRule::CriticalMyopic,
            &ReportSpace::Grid(vec![0.0, 1.0, 2.0, 3.0, 4.0, 4.5, 5.0, 6.0]),
        )
        .unwrap();
        // The bar is 4 (agent 3's estimate); the smallest winning grid
        // report is 4.5.
        assert_eq!(pay, 4.5);

        // The rule's own embedded payment is the continuous infimum; it is
        // the grid answer refined to the bar itself.
        let embedded = critical_payment(
            &rule,
            &inst,
            &realized,
            Some(&order),
            4,
            PaymentRule::Embedded,
            &ReportSpace::Bisection,
        )
        .unwrap();
        assert!((embedded - 4.0).abs() < 1e-6);
        let probed = critical_payment(
            &rule,
            &inst,
            &realized,
            Some(&order),
            4,
            PaymentRule::CriticalMyopic,
            &ReportSpace::Bisection,
        )
        .unwrap();
        assert!((probed - embedded).abs() < 1e-6);
    }

    #[test]
    fn unconstrained_winner_pays_value_at_zero() {
        // n=4 sample-bar: the first post-sample candidate has an empty
        // comparison set, so the infimum sits at a zero report.
        let inst = own_signal_secretary(&[1.0, 2.0, 3.0, 4.0], Temporality::Myopic).unwrap();
        let order = ArrivalOrder::new(vec![0, 1, 2, 3]).unwrap();
        let rule = RuleSpec::new(RuleKind::SampleBar);
        let realized = inst.fixed_signals().unwrap();
        let pay = critical_payment(
            &rule,
            &inst,
            &realized,
            Some(&order),
            2,
            PaymentRule::CriticalMyopic,
            &ReportSpace::Bisection,
        )
        .unwrap();
        assert_eq!(pay, 0.0);
    }

    #[test]
    fn posted_price_is_the_threshold() {
        let inst = own_signal_prophet(3, &[0.0, 1.0, 2.0]);
        let x = Threshold::new(0.9).unwrap();
        let rule = RuleSpec::with_threshold(RuleKind::GuardedThreshold, x);
        let realized = SignalProfile::new(vec![0.0, 2.0, 1.0]).unwrap();
        let pay = critical_payment(
            &rule,
            &inst,
            &realized,
            None,
            1,
            PaymentRule::PostedPrice,
            &ReportSpace::Bisection,
        )
        .unwrap();
        assert_eq!(pay, x.value());
    }

    #[test]
    fn epic_passes_for_own_signal_threshold_rule() {
        let inst = own_signal_prophet(3, &[0.0, 1.0, 2.0]);
        let x = Threshold::new(0.9).unwrap();
        let rule = RuleSpec::with_threshold(RuleKind::GuardedThreshold, x);
        let report =
            epic_check(&rule, PaymentRule::ThresholdOrCritical, &inst, None, None).unwrap();
        assert!(report.passed, "witness: {:?}", report.witness);
        assert!(report.min_truth_utility >= -1e-9);
        assert!(report.triples_checked > 0);
    }

    #[test]
    fn epic_fails_without_single_crossing() {
        // Agent 0 is worth s_0 + 1, agent 1 is worth 3*s_0: raising s_0
        // promotes the rival above agent 0, so the guarded threshold
        // allocation is not monotone and no critical payment fixes it.
        let agents = vec![
            Agent {
                valuation: ValuationFunction::SumPlusConstant {
                    base: 1.0,
                    weights: vec![1.0, 0.0],
                },
                signal: SignalSource::Draw(SignalDistribution::finite(vec![
                    (0.0, 0.9),
                    (2.0, 0.1),
                ])),
            },
            Agent {
                valuation: ValuationFunction::additive(vec![3.0, 0.0]),
                signal: SignalSource::Draw(SignalDistribution::point(0.0)),
            },
        ];
        let inst = Instance::new(ArrivalModel::Prophet, Temporality::Myopic, agents).unwrap();
        // E[max myopic] = 0.9*1 + 0.1*6 = 1.5; threshold 0.75 <= 1, so a
        // zero-signal agent 0 wins while a high signal hands the item away.
        let x = Threshold::new(0.75).unwrap();
        let rule = RuleSpec::with_threshold(RuleKind::GuardedThreshold, x);

        let mono = allocation_monotonicity_check(&rule, &inst, 0, &[0.0, 1.0, 2.0]).unwrap();
        let w = mono.witness().expect("allocation must fail monotonicity");
        assert!(w.lower < w.upper);

        // The grid critical payment reports the same defect instead of
        // inventing a charge.
        let realized = SignalProfile::new(vec![0.0, 0.0]).unwrap();
        let err = critical_payment(
            &rule,
            &inst,
            &realized,
            None,
            0,
            PaymentRule::CriticalMyopic,
            &ReportSpace::Grid(vec![0.0, 1.0, 2.0]),
        );
        assert!(matches!(err, Err(Error::MonotonicityViolation { .. })));
    }

    #[test]
    fn prompt_payment_ignores_future_signals() {
        let inst = own_signal_prophet(3, &[0.0, 1.0, 2.0]);
        let x = Threshold::new(0.9).unwrap();
        let rule = RuleSpec::with_threshold(RuleKind::GuardedThreshold, x);
        let realized = SignalProfile::new(vec![0.0, 2.0, 1.0]).unwrap();
        let grid = ReportSpace::Grid(vec![0.0, 1.0, 2.0]);
        let pay = critical_payment(
            &rule,
            &inst,
            &realized,
            None,
            1,
            PaymentRule::CriticalMyopic,
            &grid,
        )
        .unwrap();
        // Mutate a later signal; the prompt payment must not move.
        let mutated = realized.with_signal(2, 0.0).unwrap();
        let pay2 = critical_payment(
            &rule,
            &inst,
            &mutated,
            None,
            1,
            PaymentRule::CriticalMyopic,
            &grid,
        )
        .unwrap();
        assert_eq!(pay, pay2);
    }

    #[test]
    fn critical_payment_never_exceeds_truthful_value() {
        let inst =
            own_signal_secretary(&[2.0, 4.0, 1.0, 3.0, 5.0, 0.5], Temporality::Myopic).unwrap();
        let rule = RuleSpec::new(RuleKind::SampleBar);
        let realized = inst.fixed_signals().unwrap();
        let mut rng = crate::distributions::RandomSource::new(3, 9).rng();
        for _ in 0..100 {
            let order = ArrivalOrder::uniform(6, &mut rng);
            let out = rule.run(&inst, None, Some(&order), None).unwrap();
            if let Some(w) = out.winner {
                let pay = critical_payment(
                    &rule,
                    &inst,
                    &realized,
                    Some(&order),
                    w,
                    PaymentRule::CriticalMyopic,
                    &ReportSpace::Bisection,
                )
                .unwrap();
                assert!(pay <= out.myopic_welfare + 1e-6);
                // The rule's embedded charge agrees with the generic probe.
                assert!((pay - out.payment).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn monotonicity_check_passes_for_sample_bar() {
        let inst = own_signal_secretary(&[1.0, 2.0, 3.0, 4.0], Temporality::Myopic).unwrap();
        let rule = RuleSpec::new(RuleKind::SampleBar);
        for agent in 0..4 {
            let out =
                allocation_monotonicity_check(&rule, &inst, agent, &[0.0, 1.5, 2.5, 5.0]).unwrap();
            assert!(out.is_pass(), "agent {agent}");
        }
    }

    #[test]
    fn monotone_allocation_implies_epic_with_critical_payments() {
        // Checker consistency: whenever the allocation is monotone in every
        // agent's report on the full support grid, truthfulness with the
        // prompt critical payment follows.
        let x = Threshold::new(0.9).unwrap();
        let candidates = vec![
            (
                RuleSpec::with_threshold(RuleKind::GuardedThreshold, x),
                own_signal_prophet(3, &[0.0, 1.0, 2.0]),
            ),
            (
                RuleSpec::with_threshold(RuleKind::NaiveThreshold, x),
                own_signal_prophet(3, &[0.0, 1.0, 2.0]),
            ),
            (
                RuleSpec::new(RuleKind::SampleBar),
                own_signal_secretary(&[1.0, 2.0, 3.0, 4.0], Temporality::Myopic).unwrap(),
            ),
        ];
        for (rule, inst) in candidates {
            let grid: Vec<f64> = vec![0.0, 0.5, 1.0, 2.0, 3.0, 4.0];
            let all_monotone = (0..inst.n()).all(|agent| {
                allocation_monotonicity_check(&rule, &inst, agent, &grid)
                    .unwrap()
                    .is_pass()
            });
            if all_monotone {
                let report =
                    epic_check(&rule, PaymentRule::CriticalMyopic, &inst, None, None).unwrap();
                assert!(
                    report.passed,
                    "{}: monotone allocation but a profitable deviation: {:?}",
                    rule.id(),
                    report.witness
                );
            }
        }
    }

    #[test]
    fn instance_hash_is_stable() {
        let a = own_signal_secretary(&[1.0, 2.0], Temporality::Myopic).unwrap();
        let b = own_signal_secretary(&[1.0, 2.0], Temporality::Myopic).unwrap();
        assert_eq!(instance_hash(&a).unwrap(), instance_hash(&b).unwrap());
        let c = own_signal_secretary(&[1.0, 3.0], Temporality::Myopic).unwrap();
        assert_ne!(instance_hash(&a).unwrap(), instance_hash(&c).unwrap());
    }
}
