//! Prophet-model stopping rules: arrival order is the instance's list
//! order, signals realize from known independent priors.

use crate::distributions::RandomSource;
use crate::error::{Error, Result};
use crate::instances::{ArrivalModel, Instance, Temporality};
use crate::rules::{Coin, Outcome, Threshold, TraceEvent, TraceSink};
use crate::valuations::SignalProfile;

use rand::Rng;

fn require_prophet(inst: &Instance) -> Result<()> {
    if inst.model != ArrivalModel::Prophet {
        return Err(Error::ModelMismatch(
            "prophet rule on a secretary instance".into(),
        ));
    }
    Ok(())
}

fn require_myopic(inst: &Instance) -> Result<()> {
    if inst.temporality != Temporality::Myopic {
        return Err(Error::ModelMismatch(
            "this rule pays against myopic values; instance is farsighted".into(),
        ));
    }
    Ok(())
}

fn check_realized(inst: &Instance, realized: &SignalProfile) -> Result<()> {
    if realized.len() != inst.n() {
        return Err(Error::InvalidInput(format!(
            "{} realized signals for {} agents",
            realized.len(),
            inst.n()
        )));
    }
    Ok(())
}

fn select(inst: &Instance, realized: &SignalProfile, pos: usize, payment: f64) -> Outcome {
    let v = inst.valuation(pos);
    Outcome {
        stopping_time: Some(pos),
        winner: Some(pos),
        myopic_welfare: v.eval_prefix(realized.as_slice(), pos + 1),
        farsighted_welfare: v.eval_full(realized.as_slice()),
        payment,
        coin: None,
    }
}

/// Threshold rule with a future guard: stop at the first `t` whose myopic
/// value reaches the threshold **and** is no worse than any future agent's
/// value projected on the signals observed so far (unarrived signals read
/// as zero).
pub fn guarded_threshold(
    inst: &Instance,
    x: Threshold,
    realized: &SignalProfile,
) -> Result<Outcome> {
    guarded_core(inst, x, realized, None)
}

pub fn guarded_threshold_traced(
    inst: &Instance,
    x: Threshold,
    realized: &SignalProfile,
    sink: TraceSink,
) -> Result<Outcome> {
    guarded_core(inst, x, realized, Some(sink))
}

fn guarded_core(
    inst: &Instance,
    x: Threshold,
    realized: &SignalProfile,
    mut sink: Option<TraceSink>,
) -> Result<Outcome> {
    require_prophet(inst)?;
    require_myopic(inst)?;
    check_realized(inst, realized)?;
    let n = inst.n();
    let s = realized.as_slice();
    for pos in 0..n {
        let seen = pos + 1;
        let cur = inst.valuation(pos).eval_prefix(s, seen);
        let meets_threshold = cur >= x.value();
        let tracing = sink.is_some();
        // The future scan is needed only past the threshold (or to trace).
        let mut dominated = false;
        let mut best_future = f64::NEG_INFINITY;
        if meets_threshold || tracing {
            for i in seen..n {
                let f = inst.valuation(i).eval_prefix(s, seen);
                best_future = best_future.max(f);
                if f > cur {
                    dominated = true;
                    if !tracing {
                        break;
                    }
                }
            }
        }
        let stop = meets_threshold && !dominated;
        if let Some(sink) = sink.as_deref_mut() {
            sink(TraceEvent {
                t: pos + 1,
                signal: s[pos],
                arrived_values: (0..seen)
                    .map(|i| inst.valuation(i).eval_prefix(s, seen))
                    .collect(),
                future_values: (seen..n)
                    .map(|i| inst.valuation(i).eval_prefix(s, seen))
                    .collect(),
                stop,
                reason: if stop {
                    format!(
                        "value {cur} >= threshold {} and >= all projected future values",
                        x.value()
                    )
                } else if !meets_threshold {
                    format!("value {cur} below threshold {}", x.value())
                } else {
                    format!("projected future value {best_future} exceeds {cur}")
                },
            });
        }
        if stop {
            return Ok(select(inst, realized, pos, 0.0));
        }
    }
    Ok(Outcome::none())
}

/// Bare threshold baseline: stop at the first myopic value at or above the
/// threshold, with no look at future agents.
pub fn naive_threshold(inst: &Instance, x: Threshold, realized: &SignalProfile) -> Result<Outcome> {
    naive_core(inst, x, realized, None)
}

pub fn naive_threshold_traced(
    inst: &Instance,
    x: Threshold,
    realized: &SignalProfile,
    sink: TraceSink,
) -> Result<Outcome> {
    naive_core(inst, x, realized, Some(sink))
}

fn naive_core(
    inst: &Instance,
    x: Threshold,
    realized: &SignalProfile,
    mut sink: Option<TraceSink>,
) -> Result<Outcome> {
    require_prophet(inst)?;
    check_realized(inst, realized)?;
    let s = realized.as_slice();
    for pos in 0..inst.n() {
        let seen = pos + 1;
        let cur = inst.valuation(pos).eval_prefix(s, seen);
        let stop = cur >= x.value();
        if let Some(sink) = sink.as_deref_mut() {
            sink(TraceEvent {
                t: pos + 1,
                signal: s[pos],
                arrived_values: (0..seen)
                    .map(|i| inst.valuation(i).eval_prefix(s, seen))
                    .collect(),
                future_values: Vec::new(),
                stop,
                reason: if stop {
                    format!("value {cur} >= threshold {}", x.value())
                } else {
                    format!("value {cur} below threshold {}", x.value())
                },
            });
        }
        if stop {
            return Ok(select(inst, realized, pos, 0.0));
        }
    }
    Ok(Outcome::none())
}

/// Both branches of the randomized posted-price rule, for exact coin
/// averaging (each branch has probability 1/2).
///
/// `T` is the first time the myopic value reaches the threshold. The stop
/// branch selects `T` and charges the threshold; the wait branch instead
/// hands the item free to the future agent with the highest value projected
/// on the signals observed up to `T` (lowest index on ties).
pub fn randomized_branches(
    inst: &Instance,
    x: Threshold,
    realized: &SignalProfile,
) -> Result<(Outcome, Outcome)> {
    require_prophet(inst)?;
    require_myopic(inst)?;
    check_realized(inst, realized)?;
    let n = inst.n();
    let s = realized.as_slice();
    let crossing = (0..n).find(|&pos| inst.valuation(pos).eval_prefix(s, pos + 1) >= x.value());
    let Some(t) = crossing else {
        return Ok((Outcome::none(), Outcome::none()));
    };

    let mut stop_branch = select(inst, realized, t, x.value());
    stop_branch.coin = Some(Coin::Stop);

    let seen = t + 1;
    let mut best: Option<(usize, f64)> = None;
    for i in seen..n {
        let projected = inst.valuation(i).eval_prefix(s, seen);
        let better = match best {
            None => true,
            Some((_, b)) => projected > b,
        };
        if better {
            best = Some((i, projected));
        }
    }
    let wait_branch = match best {
        None => Outcome::none(),
        Some((winner, _)) => {
            let mut o = select(inst, realized, winner, 0.0);
            o.coin = Some(Coin::Wait);
            o
        }
    };
    Ok((stop_branch, wait_branch))
}

/// Randomized posted-price rule with an explicit coin.
pub fn randomized_posted_price_with_coin(
    inst: &Instance,
    x: Threshold,
    realized: &SignalProfile,
    coin: Coin,
) -> Result<Outcome> {
    let (stop_branch, wait_branch) = randomized_branches(inst, x, realized)?;
    let mut out = match coin {
        Coin::Stop => stop_branch,
        Coin::Wait => wait_branch,
    };
    // Record the flip even when the branch selected nobody.
    out.coin = Some(coin);
    Ok(out)
}

/// Traced randomized rule: one event per step of the threshold scan, with
/// the coin's resolution in the crossing step's reason.
pub fn randomized_posted_price_traced(
    inst: &Instance,
    x: Threshold,
    realized: &SignalProfile,
    coin: Coin,
    sink: TraceSink,
) -> Result<Outcome> {
    let out = randomized_posted_price_with_coin(inst, x, realized, coin)?;
    let n = inst.n();
    let s = realized.as_slice();
    let crossing = (0..n).find(|&pos| inst.valuation(pos).eval_prefix(s, pos + 1) >= x.value());
    for pos in 0..n {
        let seen = pos + 1;
        let cur = inst.valuation(pos).eval_prefix(s, seen);
        let is_crossing = crossing == Some(pos);
        sink(TraceEvent {
            t: pos + 1,
            signal: s[pos],
            arrived_values: (0..seen)
                .map(|i| inst.valuation(i).eval_prefix(s, seen))
                .collect(),
            future_values: (seen..n)
                .map(|i| inst.valuation(i).eval_prefix(s, seen))
                .collect(),
            stop: out.stopping_time == Some(pos),
            reason: if is_crossing {
                format!(
                    "value {cur} >= threshold {}; coin {:?} -> winner {:?}",
                    x.value(),
                    coin,
                    out.winner
                )
            } else if crossing.is_none_or(|c| pos < c) {
                format!("value {cur} below threshold {}", x.value())
            } else {
                "after the crossing; wait branch targets the projected best".into()
            },
        });
        if crossing.is_some_and(|c| pos >= c.max(out.stopping_time.unwrap_or(c))) {
            break;
        }
    }
    Ok(out)
}

/// Randomized posted-price rule, drawing the coin from a dedicated stream.
pub fn randomized_posted_price(
    inst: &Instance,
    x: Threshold,
    realized: &SignalProfile,
    src: &RandomSource,
) -> Result<Outcome> {
    let coin = if src.rng().gen_bool(0.5) {
        Coin::Stop
    } else {
        Coin::Wait
    };
    randomized_posted_price_with_coin(inst, x, realized, coin)
}

/// Stop at a fixed arrival position regardless of signals.
pub fn fixed_index(inst: &Instance, realized: &SignalProfile, index: usize) -> Result<Outcome> {
    require_prophet(inst)?;
    check_realized(inst, realized)?;
    if index >= inst.n() {
        return Err(Error::InvalidInput(format!(
            "fixed index {index} out of range for {} agents",
            inst.n()
        )));
    }
    Ok(select(inst, realized, index, 0.0))
}
