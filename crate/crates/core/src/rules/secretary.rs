//! Secretary-model stopping rules: signals are fixed, a uniformly random
//! permutation decides arrivals, and valuations of unarrived agents are
//! unknown to the rule.
//!
//! All comparisons run in arrival-relabeled indexing: the value of the
//! agent at position `i` on the arrivals `J` is the original valuation
//! evaluated on the fixed profile masked to the original ids of `J`.

use crate::error::{Error, Result};
use crate::instances::{ArrivalModel, ArrivalOrder, Instance, Temporality};
use crate::rules::{Outcome, TraceEvent, TraceSink};
use crate::valuations::{check_submodular, SignalGrid, SignalProfile};

/// Bisection tolerance for critical signals over continuous reports.
pub const SIGNAL_TOL: f64 = 1e-9;

/// Whether a rule verifies its valuation-class precondition before running.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precheck {
    /// Fail with a precondition error if the check does not pass.
    Require,
    /// Trust the caller (the harness verifies once per instance instead of
    /// once per trial).
    Skip,
}

fn require_secretary(inst: &Instance) -> Result<()> {
    if inst.model != ArrivalModel::Secretary {
        return Err(Error::ModelMismatch(
            "secretary rule on a prophet instance".into(),
        ));
    }
    Ok(())
}

fn check_order(inst: &Instance, order: &ArrivalOrder) -> Result<()> {
    if order.len() != inst.n() {
        return Err(Error::InvalidInput(format!(
            "order over {} positions for {} agents",
            order.len(),
            inst.n()
        )));
    }
    Ok(())
}

/// Skip horizon `k = floor(n/e)`: the rule may stop from 1-based time
/// `k + 1` on.
pub fn skip_horizon_e(n: usize) -> usize {
    (n as f64 / std::f64::consts::E).floor() as usize
}

/// Skip horizon `k = floor(n/2)` for the submodular variant.
pub fn skip_horizon_half(n: usize) -> usize {
    n / 2
}

fn selected_outcome(
    inst: &Instance,
    signals: &SignalProfile,
    arrived: &[bool],
    pos: usize,
    agent: usize,
    payment: f64,
) -> Outcome {
    let v = inst.valuation(agent);
    Outcome {
        stopping_time: Some(pos),
        winner: Some(agent),
        myopic_welfare: v.eval_set(signals.as_slice(), arrived),
        farsighted_welfare: v.eval_full(signals.as_slice()),
        payment,
        coin: None,
    }
}

fn skip_best_core(
    inst: &Instance,
    order: &ArrivalOrder,
    k: usize,
    mut sink: Option<TraceSink>,
) -> Result<Outcome> {
    require_secretary(inst)?;
    check_order(inst, order)?;
    let signals = inst.fixed_signals()?;
    let s = signals.as_slice();
    let n = inst.n();
    let mut arrived = vec![false; n];
    for pos in 0..n {
        let agent = order.agent_at(pos);
        arrived[agent] = true;
        let past_horizon = pos >= k;
        if !past_horizon && sink.is_none() {
            continue;
        }
        let cur = inst.valuation(agent).eval_set(s, &arrived);
        let mut strictly_best = true;
        for q in 0..pos {
            let e = inst.valuation(order.agent_at(q)).eval_set(s, &arrived);
            if cur <= e {
                strictly_best = false;
                if sink.is_none() {
                    break;
                }
            }
        }
        let stop = past_horizon && strictly_best;
        if let Some(sink) = sink.as_deref_mut() {
            sink(TraceEvent {
                t: pos + 1,
                signal: s[agent],
                arrived_values: (0..=pos)
                    .map(|q| inst.valuation(order.agent_at(q)).eval_set(s, &arrived))
                    .collect(),
                future_values: Vec::new(),
                stop,
                reason: if stop {
                    format!("value {cur} strictly beats all {pos} earlier arrivals")
                } else if !past_horizon {
                    format!("inside skip horizon ({} of {k})", pos + 1)
                } else {
                    "not a strict best-so-far".into()
                },
            });
        }
        if stop {
            return Ok(selected_outcome(inst, &signals, &arrived, pos, agent, 0.0));
        }
    }
    Ok(Outcome::none())
}

/// Skip `floor(n/e)` arrivals, then stop on the first agent whose value on
/// the observed signals strictly beats every earlier arrival's.
pub fn observed_best(inst: &Instance, order: &ArrivalOrder) -> Result<Outcome> {
    skip_best_core(inst, order, skip_horizon_e(inst.n()), None)
}

pub fn observed_best_traced(
    inst: &Instance,
    order: &ArrivalOrder,
    sink: TraceSink,
) -> Result<Outcome> {
    skip_best_core(inst, order, skip_horizon_e(inst.n()), Some(sink))
}

/// Per-coordinate grid `{0, s_i}` covering every masked profile a
/// secretary rule can evaluate on this instance.
pub fn instance_grid(inst: &Instance) -> Result<SignalGrid> {
    let signals = inst.fixed_signals()?;
    let levels = signals
        .as_slice()
        .iter()
        .map(|&s| if s == 0.0 { vec![0.0] } else { vec![0.0, s] })
        .collect();
    SignalGrid::new(levels)
}

/// Verify every valuation is submodular over signals on the instance grid.
pub fn verify_submodular(inst: &Instance) -> Result<()> {
    let grid = instance_grid(inst)?;
    for (i, agent) in inst.agents.iter().enumerate() {
        let out = check_submodular(&agent.valuation, &grid)?;
        if !out.is_pass() {
            return Err(Error::Precondition(format!(
                "agent {i}'s valuation is not submodular on the instance grid"
            )));
        }
    }
    Ok(())
}

/// The `floor(n/2)`-skip variant of [`observed_best`], intended for
/// submodular valuations.
pub fn half_skip_best(
    inst: &Instance,
    order: &ArrivalOrder,
    precheck: Precheck,
) -> Result<Outcome> {
    if precheck == Precheck::Require {
        verify_submodular(inst)?;
    }
    skip_best_core(inst, order, skip_horizon_half(inst.n()), None)
}

pub fn half_skip_best_traced(
    inst: &Instance,
    order: &ArrivalOrder,
    sink: TraceSink,
) -> Result<Outcome> {
    skip_best_core(inst, order, skip_horizon_half(inst.n()), Some(sink))
}

/// Sample-then-bar mechanism. With `t0 = floor(n/2)` sample arrivals and
/// skip horizon `t1 = t0 + floor(n/(2e))`, stop at the first 1-based time
/// `t > t1` whose value estimated on the sample plus the agent's own signal
/// strictly beats every post-sample predecessor's estimate. The winner is
/// charged the least value they could have reported and still cleared the
/// bar (myopic temporality prices on observed signals, farsighted on the
/// full profile).
pub fn sample_bar(inst: &Instance, order: &ArrivalOrder) -> Result<Outcome> {
    sample_bar_core(inst, order, None)
}

pub fn sample_bar_traced(
    inst: &Instance,
    order: &ArrivalOrder,
    sink: TraceSink,
) -> Result<Outcome> {
    sample_bar_core(inst, order, Some(sink))
}

fn sample_bar_core(
    inst: &Instance,
    order: &ArrivalOrder,
    mut sink: Option<TraceSink>,
) -> Result<Outcome> {
    require_secretary(inst)?;
    check_order(inst, order)?;
    let n = inst.n();
    if n < 4 {
        return Err(Error::DegenerateInstance(format!(
            "sample-bar rule needs n >= 4 (got {n}): the skip horizon leaves no candidate"
        )));
    }
    let t0 = n / 2;
    let t1 = t0 + (n as f64 / (2.0 * std::f64::consts::E)).floor() as usize;
    let signals = inst.fixed_signals()?;
    let s = signals.as_slice();

    let mut sample = vec![false; n];
    for pos in 0..t0 {
        sample[order.agent_at(pos)] = true;
    }
    // Estimate for the agent at position `pos`: its value on the sample
    // signals plus its own.
    let estimate = |pos: usize, own_signal: f64| -> f64 {
        let agent = order.agent_at(pos);
        inst.valuation(agent)
            .eval_set_with(s, &sample, agent, own_signal)
    };

    let mut arrived = vec![false; n];
    for pos in 0..t0 {
        arrived[order.agent_at(pos)] = true;
        if let Some(sink) = sink.as_deref_mut() {
            sink(TraceEvent {
                t: pos + 1,
                signal: s[order.agent_at(pos)],
                arrived_values: Vec::new(),
                future_values: Vec::new(),
                stop: false,
                reason: format!("sampling phase ({} of {t0})", pos + 1),
            });
        }
    }
    let mut bar = f64::NEG_INFINITY;
    let mut bar_pos: Option<usize> = None;
    for pos in t0..n {
        let agent = order.agent_at(pos);
        arrived[agent] = true;
        let est = estimate(pos, s[agent]);
        if let Some(sink) = sink.as_deref_mut() {
            let stop = pos >= t1 && est > bar;
            sink(TraceEvent {
                t: pos + 1,
                signal: s[agent],
                arrived_values: (t0..=pos)
                    .map(|q| estimate(q, s[order.agent_at(q)]))
                    .collect(),
                future_values: Vec::new(),
                stop,
                reason: if stop {
                    format!("estimate {est} clears the bar {bar}")
                } else if pos < t1 {
                    format!("inside skip horizon ({} of {t1})", pos + 1)
                } else {
                    format!("estimate {est} does not clear the bar {bar}")
                },
            });
        }
        if pos >= t1 && est > bar {
            // Winner found; derive the critical payment.
            let clears = |report: f64| estimate(pos, report) > bar;
            let critical = if bar_pos.is_none() || clears(0.0) {
                // Empty comparison set or a bar cleared even at zero: the
                // infimum of a monotone value is taken at zero.
                0.0
            } else {
                let mut lo = 0.0;
                let mut hi = s[agent];
                while hi - lo > SIGNAL_TOL {
                    let mid = 0.5 * (lo + hi);
                    if clears(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            };
            let payment = match inst.temporality {
                Temporality::Farsighted => inst.valuation(agent).eval_full_with(s, agent, critical),
                Temporality::Myopic => {
                    // Observed signals with the winner's own replaced by the
                    // critical report; never reads past the arrival time.
                    inst.valuation(agent).eval_set_with(
                        s,
                        &{
                            let mut seen = arrived.clone();
                            seen[agent] = false;
                            seen
                        },
                        agent,
                        critical,
                    )
                }
            };
            return Ok(selected_outcome(
                inst, &signals, &arrived, pos, agent, payment,
            ));
        }
        if est > bar {
            bar = est;
            bar_pos = Some(pos);
        }
    }
    Ok(Outcome::none())
}

/// Stop at a fixed arrival position regardless of signals.
pub fn fixed_position(inst: &Instance, order: &ArrivalOrder, pos: usize) -> Result<Outcome> {
    require_secretary(inst)?;
    check_order(inst, order)?;
    if pos >= inst.n() {
        return Err(Error::InvalidInput(format!(
            "fixed position {pos} out of range for {} agents",
            inst.n()
        )));
    }
    let signals = inst.fixed_signals()?;
    let mut arrived = vec![false; inst.n()];
    for q in 0..=pos {
        arrived[order.agent_at(q)] = true;
    }
    let agent = order.agent_at(pos);
    Ok(selected_outcome(inst, &signals, &arrived, pos, agent, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RandomSource;
    use crate::instances::{own_signal_secretary, pad_with_dummies};

    fn order(perm: &[usize]) -> ArrivalOrder {
        ArrivalOrder::new(perm.to_vec()).unwrap()
    }

    #[test]
    fn single_agent_stops_immediately() {
        // k = floor(1/e) = 0 and the comparison set is empty, so the rule
        // stops on the lone agent even when it is worthless.
        let inst = own_signal_secretary(&[0.0], Temporality::Myopic).unwrap();
        let out = observed_best(&inst, &order(&[0])).unwrap();
        assert_eq!(out.stopping_time, Some(0));
        assert_eq!(out.myopic_welfare, 0.0);
    }

    #[test]
    fn never_stops_inside_horizon() {
        let inst =
            own_signal_secretary(&[5.0, 4.0, 3.0, 2.0, 1.0, 0.5], Temporality::Myopic).unwrap();
        let k = skip_horizon_e(6);
        assert_eq!(k, 2);
        let mut rng = RandomSource::new(3, 1).rng();
        for _ in 0..200 {
            let ord = ArrivalOrder::uniform(6, &mut rng);
            let out = observed_best(&inst, &ord).unwrap();
            if let Some(t) = out.stopping_time {
                assert!(t >= k, "stopped at position {t} inside horizon {k}");
            }
            out.validate().unwrap();
        }
    }

    #[test]
    fn strict_comparison_rejects_ties() {
        // Two equal agents: whoever arrives second never strictly improves,
        // and the first is inside the skip horizon only when k > 0. For
        // n = 2, k = 0, so the first arrival (vacuous comparison) wins.
        let inst = own_signal_secretary(&[1.0, 1.0], Temporality::Myopic).unwrap();
        let out = observed_best(&inst, &order(&[0, 1])).unwrap();
        assert_eq!(out.stopping_time, Some(0));

        // With a skip past the first agent, the tie blocks any stop.
        let inst3 = own_signal_secretary(&[1.0, 1.0, 1.0], Temporality::Myopic).unwrap();
        assert_eq!(skip_horizon_e(3), 1);
        let out = observed_best(&inst3, &order(&[0, 1, 2])).unwrap();
        assert_eq!(out, Outcome::none());
    }

    #[test]
    fn dummies_are_never_selected() {
        let base = own_signal_secretary(&[2.0, 1.0], Temporality::Myopic).unwrap();
        let inst = pad_with_dummies(&base, 10).unwrap();
        let mut rng = RandomSource::new(9, 0).rng();
        for _ in 0..300 {
            let ord = ArrivalOrder::uniform(12, &mut rng);
            let out = observed_best(&inst, &ord).unwrap();
            if let Some(w) = out.winner {
                assert!(w < 2, "selected dummy {w}");
            }
        }
    }

    #[test]
    fn half_skip_uses_half_horizon() {
        let inst = own_signal_secretary(&[1.0, 2.0, 3.0, 4.0], Temporality::Myopic).unwrap();
        // n=2 case from the arithmetic: only position >= 1 can stop.
        let inst2 = own_signal_secretary(&[1.0, 2.0], Temporality::Myopic).unwrap();
        let out = half_skip_best(&inst2, &order(&[0, 1]), Precheck::Require).unwrap();
        assert_eq!(out.stopping_time, Some(1));
        assert_eq!(out.winner, Some(1));
        // The better agent arriving first leaves no strict improvement.
        let out = half_skip_best(&inst2, &order(&[1, 0]), Precheck::Require).unwrap();
        assert_eq!(out, Outcome::none());
        let mut rng = RandomSource::new(11, 4).rng();
        for _ in 0..100 {
            let ord = ArrivalOrder::uniform(4, &mut rng);
            let out = half_skip_best(&inst, &ord, Precheck::Skip).unwrap();
            if let Some(t) = out.stopping_time {
                assert!(t >= 2);
            }
        }
    }

    #[test]
    fn half_skip_precheck_rejects_non_submodular() {
        use crate::instances::{Agent, ArrivalModel, Instance, SignalSource};
        use crate::valuations::ValuationFunction;
        let agents = vec![
            Agent {
                valuation: ValuationFunction::Product {
                    indices: [0, 1].into_iter().collect(),
                },
                signal: SignalSource::Fixed(2.0),
            },
            Agent {
                valuation: ValuationFunction::own_signal(1),
                signal: SignalSource::Fixed(1.0),
            },
        ];
        let inst = Instance::new(ArrivalModel::Secretary, Temporality::Myopic, agents).unwrap();
        assert!(half_skip_best(&inst, &order(&[0, 1]), Precheck::Require).is_err());
        assert!(half_skip_best(&inst, &order(&[0, 1]), Precheck::Skip).is_ok());
    }

    #[test]
    fn sample_bar_horizons() {
        // n=4: t0 = 2, t1 = 2, candidates at 1-based times {3, 4}.
        let inst = own_signal_secretary(&[1.0, 2.0, 3.0, 4.0], Temporality::Myopic).unwrap();
        let mut rng = RandomSource::new(17, 2).rng();
        for _ in 0..200 {
            let ord = ArrivalOrder::uniform(4, &mut rng);
            let out = sample_bar(&inst, &ord).unwrap();
            if let Some(t) = out.stopping_time {
                assert!(t >= 2, "stopped at {t}, below the horizon");
            }
            out.validate().unwrap();
        }
        let small = own_signal_secretary(&[1.0, 2.0, 3.0], Temporality::Myopic).unwrap();
        assert!(matches!(
            sample_bar(&small, &order(&[0, 1, 2])),
            Err(Error::DegenerateInstance(_))
        ));
    }

    #[test]
    fn sample_bar_payment_is_the_bar_crossing() {
        // n=4, order (3,2,1,0): sample = {3,2} (signals 4,3); post-sample
        // arrivals: position 2 = agent 1 (signal 2), position 3 = agent 0.
        // t1 = 2, so position 2 qualifies with an empty comparison set:
        // payment is the value at a zero report, i.e. zero for own-signal.
        let inst = own_signal_secretary(&[1.0, 2.0, 3.0, 4.0], Temporality::Myopic).unwrap();
        let out = sample_bar(&inst, &order(&[3, 2, 1, 0])).unwrap();
        assert_eq!(out.winner, Some(1));
        assert_eq!(out.payment, 0.0);

        // Order (0,1,2,3): sample = {0,1}; position 2 = agent 2 (est 3)
        // qualifies at t1 = 2 with empty comparison set again.
        let out = sample_bar(&inst, &order(&[0, 1, 2, 3])).unwrap();
        assert_eq!(out.winner, Some(2));
        assert_eq!(out.payment, 0.0);

        // n=6: t0=3, t1=4: one post-sample predecessor sets a real bar.
        // order (0,1,2,3,4,5): sample {0,1,2}; position 3 = agent 3 (est 4)
        // sets the bar; position 4 = agent 4 (est 5) wins and must outbid
        // the bar: critical report solves est(report) > 4, i.e. 4.
        let inst6 =
            own_signal_secretary(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], Temporality::Myopic).unwrap();
        let out = sample_bar(&inst6, &order(&[0, 1, 2, 3, 4, 5])).unwrap();
        assert_eq!(out.winner, Some(4));
        assert!((out.payment - 4.0).abs() < 1e-6, "payment {}", out.payment);
        assert!(out.payment <= out.myopic_welfare);
    }

    #[test]
    fn rules_are_deterministic() {
        let inst = own_signal_secretary(&[3.0, 1.0, 4.0, 1.5, 5.0], Temporality::Myopic).unwrap();
        let ord = order(&[4, 2, 0, 1, 3]);
        assert_eq!(
            observed_best(&inst, &ord).unwrap(),
            observed_best(&inst, &ord).unwrap()
        );
        assert_eq!(
            sample_bar(&inst.clone(), &order(&[4, 2, 0, 1, 3])).unwrap(),
            sample_bar(&inst, &order(&[4, 2, 0, 1, 3])).unwrap()
        );
    }

    #[test]
    fn myopic_equals_farsighted_on_own_signal() {
        let inst = own_signal_secretary(&[3.0, 1.0, 4.0, 1.5, 5.0], Temporality::Myopic).unwrap();
        let mut rng = RandomSource::new(23, 0).rng();
        for _ in 0..100 {
            let ord = ArrivalOrder::uniform(5, &mut rng);
            for out in [
                observed_best(&inst, &ord).unwrap(),
                sample_bar(&inst, &ord).unwrap(),
                fixed_position(&inst, &ord, 2).unwrap(),
            ] {
                assert_eq!(out.myopic_welfare, out.farsighted_welfare);
            }
        }
    }
}
