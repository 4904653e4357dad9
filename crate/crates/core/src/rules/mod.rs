//! The stopping rules.
//!
//! Prophet rules consume a realized signal profile (arrival order is the
//! instance's list order); secretary rules consume an arrival permutation
//! over the instance's fixed signals. Every rule is a pure function of
//! `(instance, realized signals, order, coin)`: identical inputs give
//! identical outcomes, so trials parallelize freely.
//!
//! Comparison strictness is part of each rule's contract: the prophet
//! threshold rules stop on `>=` in both conditions, the secretary rules
//! demand a strict `>` improvement (ties cause rejection).

pub mod prophet;
pub mod secretary;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{ArrivalModel, ArrivalOrder, Instance};
use crate::valuations::SignalProfile;

/// The stop/wait coin of the randomized posted-price rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coin {
    Stop,
    Wait,
}

/// The threshold `X` used by the prophet rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::InvalidInput(format!(
                "threshold {value} is negative or non-finite"
            )));
        }
        Ok(Threshold(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// What a rule did on one trial. Indices are 0-based: `stopping_time` is
/// the arrival position, `winner` the original agent id (they coincide in
/// the prophet model).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub stopping_time: Option<usize>,
    pub winner: Option<usize>,
    /// Value of the selected agent on the signals observed by the stop.
    pub myopic_welfare: f64,
    /// Value of the selected agent on the full profile.
    pub farsighted_welfare: f64,
    /// Charge to the winner; zero without one or in algorithmic mode.
    pub payment: f64,
    /// Recorded internal randomization, if the rule flipped one.
    pub coin: Option<Coin>,
}

impl Outcome {
    pub fn none() -> Self {
        Outcome {
            stopping_time: None,
            winner: None,
            myopic_welfare: 0.0,
            farsighted_welfare: 0.0,
            payment: 0.0,
            coin: None,
        }
    }

    pub fn selected(&self) -> bool {
        self.winner.is_some()
    }

    /// The welfare the given temporality pays against.
    pub fn welfare(&self, temporality: crate::instances::Temporality) -> f64 {
        match temporality {
            crate::instances::Temporality::Myopic => self.myopic_welfare,
            crate::instances::Temporality::Farsighted => self.farsighted_welfare,
        }
    }

    /// Structural invariants every rule must uphold.
    pub fn validate(&self) -> Result<()> {
        if self.stopping_time.is_some() != self.winner.is_some() {
            return Err(Error::InvalidInput(
                "outcome with a stop but no winner (or vice versa)".into(),
            ));
        }
        if self.winner.is_none()
            && (self.myopic_welfare != 0.0 || self.farsighted_welfare != 0.0 || self.payment != 0.0)
        {
            return Err(Error::InvalidInput(
                "no-stop outcome must carry zero welfare and payment".into(),
            ));
        }
        if self.myopic_welfare < 0.0 || self.farsighted_welfare < 0.0 || self.payment < 0.0 {
            return Err(Error::InvalidInput("negative welfare or payment".into()));
        }
        if self.farsighted_welfare < self.myopic_welfare - 1e-9 {
            return Err(Error::InvalidInput(
                "farsighted welfare below myopic welfare".into(),
            ));
        }
        Ok(())
    }
}

/// One step of a rule's decision trace, for JSONL emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// 1-based arrival time.
    pub t: usize,
    /// The signal observed at this step.
    pub signal: f64,
    /// Values of arrived agents on the signals observed so far.
    pub arrived_values: Vec<f64>,
    /// Projected values of future agents on the signals observed so far
    /// (prophet rules; empty for secretary rules, whose future valuations
    /// are unknown).
    pub future_values: Vec<f64>,
    pub stop: bool,
    pub reason: String,
}

pub(crate) type TraceSink<'a> = &'a mut dyn FnMut(TraceEvent);

/// Which rule to run, in a form the harness and mechanisms can dispatch on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    /// Prophet: threshold plus a no-better-future guard.
    GuardedThreshold,
    /// Prophet: stop at the first threshold crosser with probability 1/2
    /// (charging the threshold), otherwise hand off to the projected best
    /// future agent for free.
    RandomizedPostedPrice,
    /// Prophet: bare threshold, no future guard (the foil).
    NaiveThreshold,
    /// Secretary: skip ~n/e arrivals, then stop on a strict best-so-far
    /// under the observed signals.
    ObservedBest,
    /// Secretary: like `ObservedBest` with an n/2 skip; intended for
    /// submodular valuations.
    HalfSkipBest,
    /// Secretary: sample half the agents, then stop on the first strict
    /// improvement over the post-sample bar; charges a critical payment.
    SampleBar,
    /// Stop at a fixed arrival position regardless of signals.
    FixedIndex,
}

impl RuleKind {
    pub fn needs_threshold(&self) -> bool {
        matches!(
            self,
            RuleKind::GuardedThreshold | RuleKind::RandomizedPostedPrice | RuleKind::NaiveThreshold
        )
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self, RuleKind::RandomizedPostedPrice)
    }
}

/// A fully resolved rule: kind plus whatever parameters it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSpec {
    pub kind: RuleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Threshold>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

impl RuleSpec {
    pub fn new(kind: RuleKind) -> Self {
        RuleSpec {
            kind,
            threshold: None,
            index: None,
        }
    }

    pub fn with_threshold(kind: RuleKind, x: Threshold) -> Self {
        RuleSpec {
            kind,
            threshold: Some(x),
            index: None,
        }
    }

    pub fn fixed_index(index: usize) -> Self {
        RuleSpec {
            kind: RuleKind::FixedIndex,
            threshold: None,
            index: Some(index),
        }
    }

    /// Parse a rule id like `"guarded-threshold"` or `"fixed:3"`.
    pub fn parse_id(id: &str) -> Result<RuleSpec> {
        if let Some(rest) = id.strip_prefix("fixed:") {
            let index: usize = rest
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad fixed-index rule id `{id}`")))?;
            return Ok(RuleSpec::fixed_index(index));
        }
        let kind = match id {
            "guarded-threshold" => RuleKind::GuardedThreshold,
            "randomized-posted-price" => RuleKind::RandomizedPostedPrice,
            "naive-threshold" => RuleKind::NaiveThreshold,
            "observed-best" => RuleKind::ObservedBest,
            "half-skip-best" => RuleKind::HalfSkipBest,
            "sample-bar" => RuleKind::SampleBar,
            _ => {
                return Err(Error::InvalidInput(format!("unknown rule id `{id}`")));
            }
        };
        Ok(RuleSpec::new(kind))
    }

    pub fn id(&self) -> String {
        match self.kind {
            RuleKind::GuardedThreshold => "guarded-threshold".into(),
            RuleKind::RandomizedPostedPrice => "randomized-posted-price".into(),
            RuleKind::NaiveThreshold => "naive-threshold".into(),
            RuleKind::ObservedBest => "observed-best".into(),
            RuleKind::HalfSkipBest => "half-skip-best".into(),
            RuleKind::SampleBar => "sample-bar".into(),
            RuleKind::FixedIndex => format!("fixed:{}", self.index.unwrap_or(0)),
        }
    }

    fn threshold_or_err(&self) -> Result<Threshold> {
        self.threshold
            .ok_or_else(|| Error::InvalidInput(format!("rule `{}` needs a threshold", self.id())))
    }

    /// Run the rule deterministically. Prophet rules need `realized`;
    /// secretary rules need `order`; the randomized rule needs `coin`.
    pub fn run(
        &self,
        inst: &Instance,
        realized: Option<&SignalProfile>,
        order: Option<&ArrivalOrder>,
        coin: Option<Coin>,
    ) -> Result<Outcome> {
        let need_realized = || {
            realized.ok_or_else(|| {
                Error::InvalidInput(format!("rule `{}` needs realized signals", self.id()))
            })
        };
        let need_order = || {
            order.ok_or_else(|| {
                Error::InvalidInput(format!("rule `{}` needs an arrival order", self.id()))
            })
        };
        match self.kind {
            RuleKind::GuardedThreshold => {
                prophet::guarded_threshold(inst, self.threshold_or_err()?, need_realized()?)
            }
            RuleKind::RandomizedPostedPrice => {
                let coin = coin.ok_or_else(|| {
                    Error::InvalidInput(
                        "randomized rule needs a coin (or use the branch evaluator)".into(),
                    )
                })?;
                prophet::randomized_posted_price_with_coin(
                    inst,
                    self.threshold_or_err()?,
                    need_realized()?,
                    coin,
                )
            }
            RuleKind::NaiveThreshold => {
                prophet::naive_threshold(inst, self.threshold_or_err()?, need_realized()?)
            }
            RuleKind::ObservedBest => secretary::observed_best(inst, need_order()?),
            RuleKind::HalfSkipBest => {
                secretary::half_skip_best(inst, need_order()?, secretary::Precheck::Skip)
            }
            RuleKind::SampleBar => secretary::sample_bar(inst, need_order()?),
            RuleKind::FixedIndex => {
                let idx = self
                    .index
                    .ok_or_else(|| Error::InvalidInput("fixed-index rule needs an index".into()))?;
                match inst.model {
                    ArrivalModel::Prophet => prophet::fixed_index(inst, need_realized()?, idx),
                    ArrivalModel::Secretary => secretary::fixed_position(inst, need_order()?, idx),
                }
            }
        }
    }
}
