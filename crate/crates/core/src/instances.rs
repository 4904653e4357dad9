//! Instances: agents with valuations and signal sources, under either the
//! prophet model (adversarial order, independent priors) or the secretary
//! model (fixed signals, uniformly random order).
//!
//! Includes generators for the named hard constructions, random benchmark
//! suites per valuation family, and dummy-agent padding for driving
//! secretary instances into the asymptotic regime without changing the
//! optimum.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::{RandomSource, SignalDistribution};
use crate::error::{Error, Result};
use crate::valuations::{SignalProfile, ValuationFunction};

/// Arrival model: who fixes the order and where randomness lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalModel {
    /// List order is the (adversarial) arrival order; signals are drawn
    /// fresh from each agent's prior every trial.
    Prophet,
    /// Signals are fixed; a uniformly random permutation decides arrivals.
    Secretary,
}

/// Whether a selected agent's realized value sees future signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Temporality {
    /// Value evaluated on the signals observed up to selection.
    Myopic,
    /// Value evaluated on the full signal profile.
    Farsighted,
}

/// Where an agent's signal comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SignalSource {
    /// A fixed signal value (secretary model).
    Fixed(f64),
    /// A prior to draw from (prophet model).
    Draw(SignalDistribution),
}

/// One agent: a public valuation plus a signal source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub valuation: ValuationFunction,
    pub signal: SignalSource,
}

fn schema_version() -> u32 {
    1
}

/// An immutable selection instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(default = "schema_version")]
    pub version: u32,
    pub model: ArrivalModel,
    pub temporality: Temporality,
    pub agents: Vec<Agent>,
}

impl Instance {
    pub fn new(model: ArrivalModel, temporality: Temporality, agents: Vec<Agent>) -> Result<Self> {
        let inst = Instance {
            version: schema_version(),
            model,
            temporality,
            agents,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != schema_version() {
            return Err(Error::InvalidInput(format!(
                "unknown instance schema version {}",
                self.version
            )));
        }
        let n = self.agents.len();
        if n == 0 {
            return Err(Error::InvalidInput("instance with no agents".into()));
        }
        for (i, agent) in self.agents.iter().enumerate() {
            agent.valuation.validate()?;
            agent.valuation.arity_ok(n)?;
            match (&agent.signal, self.model) {
                (SignalSource::Fixed(v), ArrivalModel::Secretary) => {
                    if !v.is_finite() || *v < 0.0 {
                        return Err(Error::InvalidInput(format!(
                            "agent {i} has invalid fixed signal {v}"
                        )));
                    }
                }
                (SignalSource::Draw(d), ArrivalModel::Prophet) => d.validate()?,
                (SignalSource::Fixed(_), ArrivalModel::Prophet) => {
                    return Err(Error::ModelMismatch(format!(
                        "prophet instance requires a distribution for agent {i}"
                    )));
                }
                (SignalSource::Draw(_), ArrivalModel::Secretary) => {
                    return Err(Error::ModelMismatch(format!(
                        "secretary instance requires a fixed signal for agent {i}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn valuation(&self, i: usize) -> &ValuationFunction {
        &self.agents[i].valuation
    }

    /// Fixed signals of a secretary instance.
    pub fn fixed_signals(&self) -> Result<SignalProfile> {
        let mut out = Vec::with_capacity(self.n());
        for (i, agent) in self.agents.iter().enumerate() {
            match &agent.signal {
                SignalSource::Fixed(v) => out.push(*v),
                SignalSource::Draw(_) => {
                    return Err(Error::ModelMismatch(format!(
                        "agent {i} carries a distribution, not a fixed signal"
                    )))
                }
            }
        }
        SignalProfile::new(out)
    }

    /// Per-agent distributions of a prophet instance.
    pub fn priors(&self) -> Result<Vec<&SignalDistribution>> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, agent)| match &agent.signal {
                SignalSource::Draw(d) => Ok(d),
                SignalSource::Fixed(_) => Err(Error::ModelMismatch(format!(
                    "agent {i} carries a fixed signal, not a distribution"
                ))),
            })
            .collect()
    }

    /// Per-agent finite supports as `(value, probability)` atoms; errors on
    /// continuous priors.
    pub fn finite_supports(&self) -> Result<Vec<Vec<(f64, f64)>>> {
        let priors = self.priors()?;
        priors
            .iter()
            .enumerate()
            .map(|(i, d)| {
                d.support().ok_or_else(|| {
                    Error::Unsupported(format!("agent {i} has an infinite-support prior"))
                })
            })
            .collect()
    }

    /// Draw one full signal profile from a prophet instance's priors.
    pub fn draw_signals<R: Rng>(&self, rng: &mut R) -> Result<SignalProfile> {
        let priors = self.priors()?;
        let vals: Vec<f64> = priors.iter().map(|d| d.sample(rng)).collect();
        SignalProfile::new(vals)
    }

    /// Secretary clone of this instance with the given fixed signals.
    pub fn with_fixed_signals(&self, signals: &SignalProfile) -> Result<Instance> {
        if signals.len() != self.n() {
            return Err(Error::InvalidInput(format!(
                "{} signals for {} agents",
                signals.len(),
                self.n()
            )));
        }
        let agents = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| Agent {
                valuation: a.valuation.clone(),
                signal: SignalSource::Fixed(signals.get(i)),
            })
            .collect();
        Instance::new(ArrivalModel::Secretary, self.temporality, agents)
    }

    /// Realize a prophet instance into a secretary instance by drawing the
    /// signals once.
    pub fn realize_secretary<R: Rng>(&self, rng: &mut R) -> Result<Instance> {
        let signals = self.draw_signals(rng)?;
        self.with_fixed_signals(&signals)
    }
}

/// A bijection on `{0..n-1}`; `perm[pos]` is the original agent arriving at
/// position `pos`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArrivalOrder {
    perm: Vec<usize>,
}

impl ArrivalOrder {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return Err(Error::InvalidInput(format!(
                    "not a permutation of 0..{n}: {perm:?}"
                )));
            }
            seen[p] = true;
        }
        Ok(ArrivalOrder { perm })
    }

    pub fn identity(n: usize) -> Self {
        ArrivalOrder {
            perm: (0..n).collect(),
        }
    }

    pub fn uniform<R: Rng>(n: usize, rng: &mut R) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        ArrivalOrder { perm }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Original agent id arriving at 0-based position `pos`.
    pub fn agent_at(&self, pos: usize) -> usize {
        self.perm[pos]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.perm
    }
}

// ---------------------------------------------------------------------------
// Named constructions
// ---------------------------------------------------------------------------

/// Hard farsighted prophet instance: only the last signal is random
/// (uniform on `[0,1]`), and agent `i` is worth `2^(i+1)` exactly when that
/// signal clears `1 - 2^-(i+1)`. The hindsight optimum grows linearly in
/// `n` while every fixed stopping position earns expected value 1.
pub fn indicator_chain(n: usize) -> Result<Instance> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "indicator chain needs n >= 2, got {n}"
        )));
    }
    let agents = (0..n)
        .map(|i| Agent {
            valuation: ValuationFunction::IndicatorPower {
                exponent: (i + 1) as u32,
            },
            signal: if i + 1 == n {
                SignalSource::Draw(SignalDistribution::uniform(0.0, 1.0))
            } else {
                SignalSource::Draw(SignalDistribution::point(0.0))
            },
        })
        .collect();
    Instance::new(ArrivalModel::Prophet, Temporality::Farsighted, agents)
}

/// Hard myopic prophet instance: i.i.d. signals uniform on `{0, 2}` and
/// agent `i` worth the product of the first `i+1` signals. Values double
/// until an unpredictable crash to zero.
pub fn prefix_product(n: usize) -> Result<Instance> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "prefix product needs n >= 2, got {n}"
        )));
    }
    let agents = (0..n)
        .map(|i| Agent {
            valuation: ValuationFunction::Product {
                indices: (0..=i).collect(),
            },
            signal: SignalSource::Draw(SignalDistribution::two_point(0.0, 2.0, 0.5)),
        })
        .collect();
    Instance::new(ArrivalModel::Prophet, Temporality::Myopic, agents)
}

/// Myopic prophet instance on which a bare threshold rule fails: agent 0's
/// signal is `1/eps` with probability `eps` (else 0), agents `0..n-1` are
/// worth `s_0 + 1`, and the last agent is worth `n * s_0`. A naive
/// threshold grabs the first agent in the rare branch and forfeits the
/// factor-`n` larger last agent.
pub fn threshold_trap(n: usize, eps: f64) -> Result<Instance> {
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "threshold trap needs n >= 2, got {n}"
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold trap needs eps in (0,1), got {eps}"
        )));
    }
    let mut weights_on_first = vec![0.0; n];
    weights_on_first[0] = 1.0;
    let mut last_weights = vec![0.0; n];
    last_weights[0] = n as f64;
    let agents = (0..n)
        .map(|i| Agent {
            valuation: if i + 1 == n {
                ValuationFunction::additive(last_weights.clone())
            } else {
                ValuationFunction::SumPlusConstant {
                    base: 1.0,
                    weights: weights_on_first.clone(),
                }
            },
            signal: if i == 0 {
                SignalSource::Draw(SignalDistribution::two_point(0.0, 1.0 / eps, eps))
            } else {
                SignalSource::Draw(SignalDistribution::point(0.0))
            },
        })
        .collect();
    Instance::new(ArrivalModel::Prophet, Temporality::Myopic, agents)
}

// ---------------------------------------------------------------------------
// Random benchmark suites
// ---------------------------------------------------------------------------

/// Valuation family drawn by [`random_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValuationFamily {
    /// Independent values: agent `i` is worth exactly `s_i`.
    OwnSignal,
    /// Mixed subadditive forms.
    Subadditive,
    /// Mixed submodular forms.
    Submodular,
}

fn random_finite_prior<R: Rng>(rng: &mut R) -> SignalDistribution {
    let atoms = rng.gen_range(2..=3usize);
    let mut values = Vec::with_capacity(atoms);
    values.push(0.0);
    while values.len() < atoms {
        let v = (rng.gen_range(0.2f64..3.0) * 100.0).round() / 100.0;
        if !values.contains(&v) {
            values.push(v);
        }
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut probs: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.05f64..1.0)).collect();
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    // Force the exact unit sum so validation never trips on rounding.
    let head: f64 = probs[..atoms - 1].iter().sum();
    probs[atoms - 1] = 1.0 - head;
    SignalDistribution::finite(values.into_iter().zip(probs).collect())
}

fn random_weights<R: Rng>(rng: &mut R, n: usize, own: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if rng.gen_bool(0.5) {
                (rng.gen_range(0.0f64..1.0) * 100.0).round() / 100.0
            } else {
                0.0
            }
        })
        .collect();
    // A solid own-coordinate weight keeps every agent's myopic value alive.
    w[own] = (rng.gen_range(0.5f64..1.5) * 100.0).round() / 100.0;
    w
}

fn random_valuation<R: Rng>(
    rng: &mut R,
    n: usize,
    agent: usize,
    family: ValuationFamily,
) -> ValuationFunction {
    match family {
        ValuationFamily::OwnSignal => ValuationFunction::own_signal(agent),
        ValuationFamily::Subadditive | ValuationFamily::Submodular => {
            let subadditive_only = matches!(family, ValuationFamily::Subadditive);
            let pick = rng.gen_range(0..if subadditive_only { 5 } else { 4 });
            match pick {
                0 => ValuationFunction::additive(random_weights(rng, n, agent)),
                1 => ValuationFunction::WeightedMax {
                    weights: random_weights(rng, n, agent),
                },
                2 => ValuationFunction::SumPlusConstant {
                    base: (rng.gen_range(0.0f64..0.5) * 100.0).round() / 100.0,
                    weights: random_weights(rng, n, agent),
                },
                3 => {
                    let elements = n;
                    let element_weights: Vec<f64> = (0..elements)
                        .map(|_| (rng.gen_range(0.5f64..2.0) * 100.0).round() / 100.0)
                        .collect();
                    let covers: Vec<std::collections::BTreeSet<usize>> = (0..n)
                        .map(|i| {
                            let mut set: std::collections::BTreeSet<usize> =
                                (0..elements).filter(|_| rng.gen_bool(0.4)).collect();
                            set.insert(i % elements);
                            set
                        })
                        .collect();
                    ValuationFunction::Coverage {
                        element_weights,
                        covers,
                    }
                }
                _ => ValuationFunction::own_signal(agent),
            }
        }
    }
}

/// Random prophet instances (myopic, finite supports) whose valuations come
/// from the named family. With `n <= 12` the instances stay within reach of
/// exhaustive oracles; larger `n` is allowed but Monte-Carlo-only.
pub fn random_suite(
    n: usize,
    family: ValuationFamily,
    count: usize,
    src: &RandomSource,
) -> Result<Vec<Instance>> {
    if count == 0 {
        return Err(Error::InvalidInput("suite count must be >= 1".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("suite needs n >= 1".into()));
    }
    let mut rng = src.rng();
    (0..count)
        .map(|_| {
            let agents = (0..n)
                .map(|i| Agent {
                    valuation: random_valuation(&mut rng, n, i, family),
                    signal: SignalSource::Draw(random_finite_prior(&mut rng)),
                })
                .collect();
            Instance::new(ArrivalModel::Prophet, Temporality::Myopic, agents)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Dummy padding
// ---------------------------------------------------------------------------

fn extend_valuation(v: &ValuationFunction, extra: usize) -> Result<ValuationFunction> {
    let widen = |w: &Vec<f64>| {
        let mut out = w.clone();
        out.extend(std::iter::repeat_n(0.0, extra));
        out
    };
    Ok(match v {
        ValuationFunction::Additive { weights } => ValuationFunction::Additive {
            weights: widen(weights),
        },
        ValuationFunction::WeightedMax { weights } => ValuationFunction::WeightedMax {
            weights: widen(weights),
        },
        ValuationFunction::SumPlusConstant { base, weights } => {
            ValuationFunction::SumPlusConstant {
                base: *base,
                weights: widen(weights),
            }
        }
        ValuationFunction::OwnSignalOnly { agent } => {
            ValuationFunction::OwnSignalOnly { agent: *agent }
        }
        ValuationFunction::Product { indices } => ValuationFunction::Product {
            indices: indices.clone(),
        },
        ValuationFunction::Coverage {
            element_weights,
            covers,
        } => {
            let mut covers = covers.clone();
            covers.extend(std::iter::repeat_n(std::collections::BTreeSet::new(), extra));
            ValuationFunction::Coverage {
                element_weights: element_weights.clone(),
                covers,
            }
        }
        ValuationFunction::LookupTable { grid, values } => {
            let mut grid = grid.clone();
            grid.extend(std::iter::repeat_n(vec![0.0], extra));
            ValuationFunction::LookupTable {
                grid,
                values: values.clone(),
            }
        }
        // The indicator form reads the last coordinate; appending agents
        // would silently retarget it.
        ValuationFunction::IndicatorPower { .. } => {
            return Err(Error::Unsupported(
                "last-coordinate indicator valuations cannot be padded".into(),
            ))
        }
    })
}

/// Append `extra` zero-signal, zero-value agents to a secretary instance.
/// The optimum is unchanged; strict-improvement stopping rules never select
/// a dummy.
pub fn pad_with_dummies(inst: &Instance, extra: usize) -> Result<Instance> {
    if inst.model != ArrivalModel::Secretary {
        return Err(Error::Unsupported(
            "dummy padding applies to secretary instances only".into(),
        ));
    }
    if extra == 0 {
        return Ok(inst.clone());
    }
    let n = inst.n();
    let mut agents: Vec<Agent> = inst
        .agents
        .iter()
        .map(|a| {
            Ok(Agent {
                valuation: extend_valuation(&a.valuation, extra)?,
                signal: a.signal.clone(),
            })
        })
        .collect::<Result<_>>()?;
    for _ in 0..extra {
        agents.push(Agent {
            valuation: ValuationFunction::additive(vec![0.0; n + extra]),
            signal: SignalSource::Fixed(0.0),
        });
    }
    Instance::new(ArrivalModel::Secretary, inst.temporality, agents)
}

/// Default grid for the property checkers: per coordinate, zero (the
/// masking value) plus the agent's signal levels — the full support for
/// finite priors, evenly spaced quantiles for continuous ones, the fixed
/// signal for secretary agents.
pub fn default_check_grid(inst: &Instance, levels: usize) -> Result<crate::valuations::SignalGrid> {
    let per_coord = inst
        .agents
        .iter()
        .map(|agent| {
            let mut vals = match &agent.signal {
                SignalSource::Fixed(v) => vec![*v],
                SignalSource::Draw(d) => d.quantile_levels(levels),
            };
            vals.push(0.0);
            vals
        })
        .collect();
    crate::valuations::SignalGrid::new(per_coord)
}

/// Secretary instance with independent values (`v_i = s_i`) and the given
/// fixed signals.
pub fn own_signal_secretary(signals: &[f64], temporality: Temporality) -> Result<Instance> {
    let n = signals.len();
    let agents = (0..n)
        .map(|i| Agent {
            valuation: ValuationFunction::own_signal(i),
            signal: SignalSource::Fixed(signals[i]),
        })
        .collect();
    Instance::new(ArrivalModel::Secretary, temporality, agents)
}
