//! Exact and brute-force references: enumeration of expected optimum and
//! rule welfare on finite-support instances, the closed form for the
//! indicator-chain construction, the stopping-time distribution of
//! skip-then-best rules, and the uniform-subset sampling bound.

use num_rational::Ratio;

use crate::distributions::RandomSource;
use crate::error::{Error, Result};
use crate::instances::{ArrivalModel, ArrivalOrder, Instance, SignalSource, Temporality};
use crate::rules::{prophet, RuleKind, RuleSpec};
use crate::valuations::{SignalProfile, ValuationFunction};

/// Cap on the product of support sizes for exact prophet enumeration.
pub const SUPPORT_PRODUCT_CAP: u64 = 10_000_000;

/// Largest `n` for exact secretary enumeration (`n!` orders).
pub const ORDER_ENUM_CAP: usize = 8;

/// Cap on exhaustively enumerated subsets in the sampling bound.
pub const SUBSET_ENUM_CAP: u64 = 1_000_000;

/// An exactly computed expectation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExactExpectation {
    pub value: f64,
    /// Enumerated outcomes behind the value.
    pub atoms: u64,
    /// True only when all signal randomness (and rule randomness) was fully
    /// enumerated or integrated in closed form.
    pub is_exact: bool,
}

/// Exact expected welfare of a rule, both temporalities at once.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExactRuleValue {
    pub myopic: f64,
    pub farsighted: f64,
    pub atoms: u64,
    pub is_exact: bool,
}

// ---------------------------------------------------------------------------
// Support enumeration
// ---------------------------------------------------------------------------

/// Call `f(profile, probability)` for every point of the product support.
fn for_each_profile(supports: &[Vec<(f64, f64)>], mut f: impl FnMut(&[f64], f64)) -> Result<u64> {
    let mut total: u64 = 1;
    for s in supports {
        total = total
            .checked_mul(s.len() as u64)
            .ok_or_else(|| Error::Capacity("support product overflows".into()))?;
        if total > SUPPORT_PRODUCT_CAP {
            return Err(Error::Capacity(format!(
                "support product exceeds {SUPPORT_PRODUCT_CAP}"
            )));
        }
    }
    let n = supports.len();
    let mut idx = vec![0usize; n];
    let mut profile = vec![0.0f64; n];
    let mut atoms = 0u64;
    loop {
        let mut prob = 1.0;
        for c in 0..n {
            let (v, p) = supports[c][idx[c]];
            profile[c] = v;
            prob *= p;
        }
        f(&profile, prob);
        atoms += 1;
        let mut c = n;
        loop {
            if c == 0 {
                return Ok(atoms);
            }
            c -= 1;
            idx[c] += 1;
            if idx[c] < supports[c].len() {
                break;
            }
            idx[c] = 0;
        }
    }
}

/// Call `f(order)` for every permutation of `0..n`, in lexicographic order.
fn for_each_order(n: usize, mut f: impl FnMut(&ArrivalOrder) -> Result<()>) -> Result<u64> {
    if n > ORDER_ENUM_CAP {
        return Err(Error::Capacity(format!(
            "exact order enumeration caps at n = {ORDER_ENUM_CAP}, got {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut count = 0u64;
    loop {
        f(&ArrivalOrder::new(perm.clone())?)?;
        count += 1;
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1))
            .rev()
            .find(|&i| perm[i] < perm[i + 1])
        else {
            return Ok(count);
        };
        let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
}

// ---------------------------------------------------------------------------
// Closed form for the indicator chain
// ---------------------------------------------------------------------------

/// Recognize the indicator-chain construction: only the last signal is
/// uniform on [0,1], every other signal is a point mass at zero, and agent
/// `i` carries the `2^(i+1)` indicator on the last signal.
fn as_indicator_chain(inst: &Instance) -> Option<usize> {
    if inst.model != ArrivalModel::Prophet {
        return None;
    }
    let n = inst.n();
    for (i, agent) in inst.agents.iter().enumerate() {
        match &agent.valuation {
            ValuationFunction::IndicatorPower { exponent } if *exponent == (i + 1) as u32 => {}
            _ => return None,
        }
        match &agent.signal {
            SignalSource::Draw(d) => {
                let last = i + 1 == n;
                let ok = if last {
                    *d == crate::distributions::SignalDistribution::uniform(0.0, 1.0)
                } else {
                    *d == crate::distributions::SignalDistribution::point(0.0)
                };
                if !ok {
                    return None;
                }
            }
            SignalSource::Fixed(_) => return None,
        }
    }
    Some(n)
}

// ---------------------------------------------------------------------------
// Exact optimum and exact rule welfare
// ---------------------------------------------------------------------------

fn benchmark_max(inst: &Instance, profile: &[f64]) -> f64 {
    match inst.temporality {
        Temporality::Myopic => (0..inst.n())
            .map(|i| inst.valuation(i).eval_prefix(profile, i + 1))
            .fold(0.0, f64::max),
        Temporality::Farsighted => (0..inst.n())
            .map(|i| inst.valuation(i).eval_full(profile))
            .fold(0.0, f64::max),
    }
}

/// Expected hindsight optimum. Prophet instances integrate over the
/// (finite) support product, with a closed-form branch for the indicator
/// chain; the secretary benchmark is the deterministic maximum value over
/// the fixed signals.
pub fn exact_opt(inst: &Instance) -> Result<ExactExpectation> {
    match inst.model {
        ArrivalModel::Secretary => {
            let signals = inst.fixed_signals()?;
            let value = (0..inst.n())
                .map(|i| inst.valuation(i).eval_full(signals.as_slice()))
                .fold(0.0, f64::max);
            Ok(ExactExpectation {
                value,
                atoms: 1,
                is_exact: true,
            })
        }
        ArrivalModel::Prophet => {
            if let Some(n) = as_indicator_chain(inst) {
                // The last signal splits [0,1] into intervals of mass
                // 2^-(i+1) on which the hindsight maximum is 2^i; they sum
                // to (n+1)/2. Myopically everyone but the last agent is
                // worthless and the last is worth 1 in expectation.
                let value = match inst.temporality {
                    Temporality::Farsighted => (n as f64 + 1.0) / 2.0,
                    Temporality::Myopic => 1.0,
                };
                return Ok(ExactExpectation {
                    value,
                    atoms: n as u64 + 1,
                    is_exact: true,
                });
            }
            let supports = inst.finite_supports()?;
            let mut acc = 0.0;
            let atoms = for_each_profile(&supports, |profile, prob| {
                acc += prob * benchmark_max(inst, profile);
            })?;
            Ok(ExactExpectation {
                value: acc,
                atoms,
                is_exact: true,
            })
        }
    }
}

/// Exact expected welfare of a rule. Prophet instances enumerate the
/// support product (the randomized rule is averaged over both coin
/// branches); secretary instances enumerate all `n!` arrival orders.
pub fn exact_alg(rule: &RuleSpec, inst: &Instance) -> Result<ExactRuleValue> {
    match inst.model {
        ArrivalModel::Prophet => {
            if let Some(n) = as_indicator_chain(inst) {
                if rule.kind == RuleKind::FixedIndex {
                    let idx = rule.index.ok_or_else(|| {
                        Error::InvalidInput("fixed-index rule needs an index".into())
                    })?;
                    if idx >= n {
                        return Err(Error::InvalidInput(format!(
                            "fixed index {idx} out of range for {n} agents"
                        )));
                    }
                    // Agent idx is worth 2^(idx+1) with probability
                    // 2^-(idx+1): the farsighted expectation is exactly 1.
                    let e = (idx + 1) as i32;
                    let farsighted = 2.0f64.powi(e) * 0.5f64.powi(e);
                    let myopic = if idx + 1 == n { farsighted } else { 0.0 };
                    return Ok(ExactRuleValue {
                        myopic,
                        farsighted,
                        atoms: n as u64,
                        is_exact: true,
                    });
                }
                return Err(Error::Unsupported(
                    "no closed form for this rule on a continuous-support instance".into(),
                ));
            }
            let supports = inst.finite_supports()?;
            let mut myopic = 0.0;
            let mut farsighted = 0.0;
            let mut failure: Option<Error> = None;
            let mut coin_branches = 1u64;
            let atoms = for_each_profile(&supports, |profile, prob| {
                if failure.is_some() {
                    return;
                }
                let realized = match SignalProfile::new(profile.to_vec()) {
                    Ok(p) => p,
                    Err(e) => {
                        failure = Some(e);
                        return;
                    }
                };
                let run = if rule.kind == RuleKind::RandomizedPostedPrice {
                    coin_branches = 2;
                    let x = match rule.threshold {
                        Some(x) => x,
                        None => {
                            failure = Some(Error::InvalidInput(
                                "randomized rule needs a threshold".into(),
                            ));
                            return;
                        }
                    };
                    prophet::randomized_branches(inst, x, &realized).map(|(stop, wait)| {
                        (
                            0.5 * (stop.myopic_welfare + wait.myopic_welfare),
                            0.5 * (stop.farsighted_welfare + wait.farsighted_welfare),
                        )
                    })
                } else {
                    rule.run(inst, Some(&realized), None, None)
                        .map(|o| (o.myopic_welfare, o.farsighted_welfare))
                };
                match run {
                    Ok((m, f)) => {
                        myopic += prob * m;
                        farsighted += prob * f;
                    }
                    Err(e) => failure = Some(e),
                }
            })?;
            if let Some(e) = failure {
                return Err(e);
            }
            Ok(ExactRuleValue {
                myopic,
                farsighted,
                atoms: atoms * coin_branches,
                is_exact: true,
            })
        }
        ArrivalModel::Secretary => {
            let n = inst.n();
            let mut myopic = 0.0;
            let mut farsighted = 0.0;
            let orders = for_each_order(n, |order| {
                let out = rule.run(inst, None, Some(order), None)?;
                myopic += out.myopic_welfare;
                farsighted += out.farsighted_welfare;
                Ok(())
            })?;
            Ok(ExactRuleValue {
                myopic: myopic / orders as f64,
                farsighted: farsighted / orders as f64,
                atoms: orders,
                is_exact: true,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Stopping-time distribution of skip-then-best rules
// ---------------------------------------------------------------------------

/// Empirical stopping-time distribution of the "skip `k`, then stop on the
/// strict best of the arrived set" template, with the theoretical
/// references `k/(t(t-1))` and `k/n` attached.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingTimePmf {
    pub n: usize,
    pub k: usize,
    pub trials: u64,
    /// `counts[j]` is the number of trials stopping at 1-based time
    /// `t = k + 1 + j`.
    pub counts: Vec<u64>,
    pub none_count: u64,
}

impl StoppingTimePmf {
    /// Empirical stop probability at 1-based time `t`.
    pub fn empirical(&self, t: usize) -> f64 {
        assert!(t > self.k && t <= self.n);
        self.counts[t - self.k - 1] as f64 / self.trials as f64
    }

    /// Theoretical stop probability `k/(t(t-1))`.
    pub fn theoretical(&self, t: usize) -> f64 {
        assert!(t > self.k && t <= self.n);
        self.k as f64 / (t as f64 * (t as f64 - 1.0))
    }

    pub fn none_empirical(&self) -> f64 {
        self.none_count as f64 / self.trials as f64
    }

    pub fn none_theoretical(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// Binomial standard error of an empirical frequency around `p`.
    pub fn binomial_stderr(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// Total empirical mass (stops plus none); equals 1 by construction.
    pub fn total_mass(&self) -> f64 {
        (self.counts.iter().sum::<u64>() + self.none_count) as f64 / self.trials as f64
    }
}

/// Run `trials` uniformly random arrival orders of the skip-`k` best-of-set
/// rule on a secretary instance and tally the stopping times. Any tie for
/// the best of an observed set aborts with a tie error: the template
/// requires `best` to be a function of the set alone.
pub fn stopping_time_pmf(
    inst: &Instance,
    k: usize,
    trials: u64,
    src: &RandomSource,
) -> Result<StoppingTimePmf> {
    if inst.model != ArrivalModel::Secretary {
        return Err(Error::ModelMismatch(
            "stopping-time distribution is a secretary construct".into(),
        ));
    }
    let n = inst.n();
    if k >= n {
        return Err(Error::InvalidInput(format!(
            "skip horizon {k} leaves no stopping times for n = {n}"
        )));
    }
    let signals = inst.fixed_signals()?;
    let s = signals.as_slice();
    let mut counts = vec![0u64; n - k];
    let mut none_count = 0u64;
    let mut rng = src.rng();
    let mut values = vec![0.0f64; n];
    for _ in 0..trials {
        let order = ArrivalOrder::uniform(n, &mut rng);
        let mut arrived = vec![false; n];
        let mut stopped = false;
        for pos in 0..n {
            let agent = order.agent_at(pos);
            arrived[agent] = true;
            for (q, slot) in values[..=pos].iter_mut().enumerate() {
                let a = order.agent_at(q);
                *slot = inst.valuation(a).eval_set(s, &arrived);
            }
            let best = values[..=pos]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let best_count = values[..=pos].iter().filter(|&&v| v == best).count();
            if best_count > 1 {
                return Err(Error::TieDetected(format!(
                    "two agents tie for best at time {} (value {best})",
                    pos + 1
                )));
            }
            if pos >= k && values[pos] == best {
                counts[pos - k] += 1;
                stopped = true;
                break;
            }
        }
        if !stopped {
            none_count += 1;
        }
    }
    Ok(StoppingTimePmf {
        n,
        k,
        trials,
        counts,
        none_count,
    })
}

/// Exact telescoping identity: `sum_{t=k+1..n} k/(t(t-1)) + k/n = 1`,
/// verified in rational arithmetic.
pub fn stopping_pmf_identity(k: usize, n: usize) -> bool {
    if k == 0 || k >= n {
        // k = 0 stops at t = 1 with certainty under the template; the
        // identity form below only covers k >= 1.
        return false;
    }
    let mut acc = Ratio::new(0i128, 1i128);
    for t in (k + 1)..=n {
        acc += Ratio::new(k as i128, (t * (t - 1)) as i128);
    }
    acc += Ratio::new(k as i128, n as i128);
    acc == Ratio::new(1, 1)
}

/// Probability that the skip-`k` best-of-set rule selects the unique best
/// agent, when `m` agents with distinct positive values are mixed with
/// `n - m` worthless dummies and shuffled uniformly.
///
/// Conditioning on the best agent landing at position `p > k`, the rule
/// succeeds when either no other real agent precedes `p` (probability
/// `z(p) = C(n-p, m-1) / C(n-1, m-1)`) or the best of those predecessors
/// sits inside the skip window (probability `k/(p-1)`, since its position
/// is uniform among the first `p-1`). With `m = n` this collapses to the
/// classic `(k/n) * sum_{t>k} 1/(t-1)`.
pub fn skip_best_success_probability(n: usize, k: usize, m: usize) -> Result<f64> {
    if m == 0 || m > n {
        return Err(Error::InvalidInput(format!(
            "need 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    if k >= n {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for p in (k + 1)..=n {
        let z = if m == 1 {
            1.0
        } else if n - p < m - 1 {
            0.0
        } else {
            // C(n-p, m-1) / C(n-1, m-1) as a product of ratios.
            (0..m - 1)
                .map(|i| (n - p - i) as f64 / (n - 1 - i) as f64)
                .product()
        };
        let mut term = z;
        if p > 1 {
            term += (1.0 - z) * k as f64 / (p as f64 - 1.0);
        }
        total += term / n as f64;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Uniform-subset sampling bound
// ---------------------------------------------------------------------------

/// Result of checking `E_A[v(s_A)] >= (k/n) v(s)` over uniform size-`k`
/// subsets.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingBoundReport {
    pub mean: f64,
    pub bound: f64,
    /// Standard error of the mean (sampled mode only).
    pub stderr: Option<f64>,
    pub subsets: u64,
    pub exhaustive: bool,
    pub pass: bool,
}

fn binomial(n: u64, k: u64) -> u64 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Check the uniform size-`k` subset bound for a (submodular) valuation on
/// a fixed profile: exhaustive over all `C(n,k)` subsets when feasible,
/// otherwise Monte Carlo with a three-standard-error slack.
pub fn sampling_bound_check(
    v: &ValuationFunction,
    s: &SignalProfile,
    k: usize,
    trials: u64,
    src: &RandomSource,
) -> Result<SamplingBoundReport> {
    let n = s.len();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "subset size {k} out of range 1..={n}"
        )));
    }
    v.arity_ok(n)?;
    let bound = (k as f64 / n as f64) * v.eval_full(s.as_slice());
    let total = binomial(n as u64, k as u64);
    if total <= SUBSET_ENUM_CAP {
        let mut included = vec![false; n];
        let mut idx: Vec<usize> = (0..k).collect();
        let mut sum = 0.0;
        let mut count = 0u64;
        loop {
            included.iter_mut().for_each(|b| *b = false);
            for &i in &idx {
                included[i] = true;
            }
            sum += v.eval_set(s.as_slice(), &included);
            count += 1;
            // next combination in lexicographic order
            let mut i = k;
            loop {
                if i == 0 {
                    let mean = sum / count as f64;
                    return Ok(SamplingBoundReport {
                        mean,
                        bound,
                        stderr: None,
                        subsets: count,
                        exhaustive: true,
                        pass: mean >= bound - crate::valuations::CHECK_TOL,
                    });
                }
                i -= 1;
                if idx[i] < n - (k - i) {
                    idx[i] += 1;
                    for j in i + 1..k {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
    let mut rng = src.rng();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut included = vec![false; n];
    for _ in 0..trials {
        included.iter_mut().for_each(|b| *b = false);
        for i in rand::seq::index::sample(&mut rng, n, k) {
            included[i] = true;
        }
        let val = v.eval_set(s.as_slice(), &included);
        sum += val;
        sumsq += val * val;
    }
    let mean = sum / trials as f64;
    let var = (sumsq / trials as f64 - mean * mean).max(0.0);
    let stderr = (var / trials as f64).sqrt();
    Ok(SamplingBoundReport {
        mean,
        bound,
        stderr: Some(stderr),
        subsets: trials,
        exhaustive: false,
        pass: mean >= bound - 3.0 * stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{
        indicator_chain, own_signal_secretary, pad_with_dummies, prefix_product, threshold_trap,
    };
    use crate::rules::Threshold;

    #[test]
    fn indicator_chain_closed_forms() {
        let inst = indicator_chain(4).unwrap();
        let opt = exact_opt(&inst).unwrap();
        assert_eq!(opt.value, 2.5);
        assert!(opt.is_exact);
        let small = exact_opt(&indicator_chain(2).unwrap()).unwrap();
        assert_eq!(small.value, 1.5);
        for idx in 0..4 {
            let alg = exact_alg(&RuleSpec::fixed_index(idx), &inst).unwrap();
            assert!((alg.farsighted - 1.0).abs() < 1e-12, "idx {idx}");
        }
    }

    #[test]
    fn prefix_product_enumeration() {
        let inst = prefix_product(3).unwrap();
        let opt = exact_opt(&inst).unwrap();
        assert_eq!(opt.value, 2.0);
        assert_eq!(opt.atoms, 8);
        // Every fixed stopping position earns expected value exactly 1:
        // all sums here are dyadic, so the equality is bitwise.
        for idx in 0..3 {
            let alg = exact_alg(&RuleSpec::fixed_index(idx), &inst).unwrap();
            assert_eq!(alg.myopic, 1.0);
            assert_eq!(alg.farsighted, 1.0);
        }
        // The optimum grows with n.
        let opt10 = exact_opt(&prefix_product(10).unwrap()).unwrap();
        let opt5 = exact_opt(&prefix_product(5).unwrap()).unwrap();
        assert!(opt10.value > opt5.value);
    }

    #[test]
    fn trap_two_branch_exact_values() {
        let n = 50;
        let eps = 0.01;
        let inst = threshold_trap(n, eps).unwrap();
        let opt = exact_opt(&inst).unwrap();
        let expected_opt = (1.0 - eps) * 1.0 + eps * (n as f64 / eps);
        assert!((opt.value - expected_opt).abs() < 1e-9);
        assert_eq!(opt.atoms, 2);

        let x = Threshold::new(opt.value / 2.0).unwrap();
        let naive = exact_alg(
            &RuleSpec::with_threshold(RuleKind::NaiveThreshold, x),
            &inst,
        )
        .unwrap();
        // Low branch: nobody reaches the threshold. High branch: agent 0
        // grabs 1/eps + 1.
        assert!((naive.myopic - eps * (1.0 / eps + 1.0)).abs() < 1e-9);

        let guarded = exact_alg(
            &RuleSpec::with_threshold(RuleKind::GuardedThreshold, x),
            &inst,
        )
        .unwrap();
        // The guard defers to the last agent, worth n/eps in the high branch.
        assert!((guarded.myopic - eps * (n as f64 / eps)).abs() < 1e-9);
    }

    #[test]
    fn secretary_enumeration_matches_classic_closed_form() {
        // Distinct own-signal values: the skip-floor(n/e) rule is the
        // classic secretary rule, whose success probability is
        // (k/n) * sum_{t=k+1..n} 1/(t-1). Expected welfare restricted to
        // the best agent adds the top signal as a factor; the enumeration
        // counts every selection, so compare success probability via the
        // probability of picking the maximum.
        let n = 6;
        let signals: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let inst = own_signal_secretary(&signals, Temporality::Myopic).unwrap();
        let k = super::super::rules::secretary::skip_horizon_e(n);
        assert_eq!(k, 2);

        let mut success = 0u64;
        let mut orders = 0u64;
        for_each_order(n, |order| {
            let out = crate::rules::secretary::observed_best(&inst, order)?;
            if out.winner == Some(n - 1) {
                success += 1;
            }
            orders += 1;
            Ok(())
        })
        .unwrap();
        let empirical = success as f64 / orders as f64;
        let closed: f64 =
            (k as f64 / n as f64) * ((k + 1)..=n).map(|t| 1.0 / (t as f64 - 1.0)).sum::<f64>();
        assert!(
            (empirical - closed).abs() < 1e-12,
            "enumeration {empirical} vs closed form {closed}"
        );
    }

    #[test]
    fn exact_opt_invariant_under_padding() {
        let base = own_signal_secretary(&[2.0, 5.0, 1.0], Temporality::Myopic).unwrap();
        let padded = pad_with_dummies(&base, 20).unwrap();
        assert_eq!(
            exact_opt(&base).unwrap().value,
            exact_opt(&padded).unwrap().value
        );
    }

    #[test]
    fn pmf_matches_stop_time_reference() {
        let n = 10;
        let k = 3;
        let signals: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let inst = own_signal_secretary(&signals, Temporality::Myopic).unwrap();
        let pmf = stopping_time_pmf(&inst, k, 20_000, &RandomSource::new(71, 0)).unwrap();
        assert_eq!(pmf.total_mass(), 1.0);
        for t in (k + 1)..=n {
            let theo = pmf.theoretical(t);
            let emp = pmf.empirical(t);
            assert!(
                (emp - theo).abs() <= 3.0 * pmf.binomial_stderr(theo),
                "t={t}: emp {emp} theo {theo}"
            );
        }
        assert!(
            (pmf.none_empirical() - pmf.none_theoretical()).abs()
                <= 3.0 * pmf.binomial_stderr(pmf.none_theoretical())
        );
        // Smallest case of the reference: k=1, t=2 has mass 1/2.
        let small = own_signal_secretary(&[1.0, 2.0, 3.0], Temporality::Myopic).unwrap();
        let p = stopping_time_pmf(&small, 1, 10_000, &RandomSource::new(72, 0)).unwrap();
        assert_eq!(p.theoretical(2), 0.5);
    }

    #[test]
    fn pmf_rejects_ties() {
        let inst = own_signal_secretary(&[1.0, 1.0, 2.0], Temporality::Myopic).unwrap();
        assert!(matches!(
            stopping_time_pmf(&inst, 1, 100, &RandomSource::new(7, 0)),
            Err(Error::TieDetected(_))
        ));
    }

    #[test]
    fn telescoping_identity() {
        assert!(stopping_pmf_identity(3, 10));
        assert!(stopping_pmf_identity(1, 2));
        assert!(stopping_pmf_identity(7, 50));
    }

    #[test]
    fn sampling_bound_additive_is_tight() {
        let n = 6;
        let v = ValuationFunction::additive(vec![1.0, 0.5, 2.0, 0.0, 1.0, 3.0]);
        let s = SignalProfile::new(vec![1.0, 2.0, 0.5, 3.0, 1.5, 1.0]).unwrap();
        for k in 1..=n {
            let rep = sampling_bound_check(&v, &s, k, 0, &RandomSource::new(1, 0)).unwrap();
            assert!(rep.exhaustive);
            assert!(rep.pass);
            // Linearity: each coordinate appears in exactly k/n of the
            // subsets, so the mean matches the bound to rounding error.
            assert!(
                (rep.mean - rep.bound).abs() < 1e-12,
                "k={k}: mean {} bound {}",
                rep.mean,
                rep.bound
            );
        }
        // k = n reduces to the full value.
        let rep = sampling_bound_check(&v, &s, n, 0, &RandomSource::new(1, 0)).unwrap();
        assert_eq!(rep.mean, v.eval_full(s.as_slice()));
    }

    #[test]
    fn padded_success_probability_matches_enumeration() {
        // Three distinct agents padded with three dummies: enumerate all
        // 720 orders of the actual rule and compare the closed form.
        let base = own_signal_secretary(&[1.0, 2.0, 3.0], Temporality::Myopic).unwrap();
        let inst = pad_with_dummies(&base, 3).unwrap();
        let n = 6;
        let k = 2;
        let mut success = 0u64;
        let mut orders = 0u64;
        for_each_order(n, |order| {
            let out = skip_best_run(&inst, order, k)?;
            if out == Some(2) {
                success += 1;
            }
            orders += 1;
            Ok(())
        })
        .unwrap();
        let empirical = success as f64 / orders as f64;
        let closed = skip_best_success_probability(n, k, 3).unwrap();
        assert!(
            (empirical - closed).abs() < 1e-12,
            "enumeration {empirical} vs closed form {closed}"
        );
        // The all-real case reproduces the classic formula.
        let classic = skip_best_success_probability(6, 2, 6).unwrap();
        let reference: f64 = (2.0 / 6.0) * (3..=6).map(|t| 1.0 / (t as f64 - 1.0)).sum::<f64>();
        assert!((classic - reference).abs() < 1e-12);
        // A single nonzero agent succeeds exactly when it lands past the
        // skip window.
        let single = skip_best_success_probability(10, 3, 1).unwrap();
        assert!((single - 0.7).abs() < 1e-12);
    }

    /// Winner of the skip-`k` best-of-set rule, by original agent id.
    fn skip_best_run(inst: &Instance, order: &ArrivalOrder, k: usize) -> Result<Option<usize>> {
        let signals = inst.fixed_signals()?;
        let s = signals.as_slice();
        let n = inst.n();
        let mut arrived = vec![false; n];
        for pos in 0..n {
            let agent = order.agent_at(pos);
            arrived[agent] = true;
            let cur = inst.valuation(agent).eval_set(s, &arrived);
            let strictly_best =
                (0..pos).all(|q| cur > inst.valuation(order.agent_at(q)).eval_set(s, &arrived));
            if pos >= k && strictly_best {
                return Ok(Some(agent));
            }
        }
        Ok(None)
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(8, 4), 70);
        assert_eq!(binomial(6, 0), 1);
        assert_eq!(binomial(6, 6), 1);
        assert_eq!(binomial(52, 5), 2_598_960);
    }
}
