//! Exact event-driven simulation by thinning.
//!
//! Between events every age grows at unit speed, so the total death hazard
//! `⟨X_s, α⟩` drifts. Proposals arrive at the dominating rate `c₁·mass` and are
//! accepted with probability `⟨X_s, α⟩ / (c₁·mass)`. A single uniform
//! `u ∈ [0, c₁·mass)` does both jobs: it is walked against the running sum of
//! `α` over ascending ages, and the proposal is rejected if it is never exceeded.
//! Immigrant groups arrive as an independent Poisson stream merged by competing
//! exponentials.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::measure::AgeMeasure;
use crate::model::{BranchingModel, ImmigrationMechanism};
use crate::rng;

/// Default cap on accepted events per replicate.
pub const DEFAULT_MAX_EVENTS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: BranchingModel,
    pub immigration: Option<ImmigrationMechanism>,
    pub initial: AgeMeasure,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub seed: u64,
    pub replicate_index: u64,
    pub max_events: u64,
    /// Keep the full event log (off for bulk Monte Carlo).
    pub record_events: bool,
}

impl SimConfig {
    /// Branching only, one snapshot at `t_end`, seed 0.
    pub fn new(model: BranchingModel, initial: AgeMeasure, t_end: f64) -> Self {
        Self {
            model,
            immigration: None,
            initial,
            t_end,
            snapshot_times: vec![t_end],
            seed: 0,
            replicate_index: 0,
            max_events: DEFAULT_MAX_EVENTS,
            record_events: false,
        }
    }

    pub fn with_immigration(mut self, imm: ImmigrationMechanism) -> Self {
        self.immigration = Some(imm);
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    /// `n + 1` equally spaced snapshots on `[0, t_end]`.
    pub fn with_uniform_snapshots(self, n: usize) -> Self {
        let t = self.t_end;
        let n = n.max(1);
        self.with_snapshots((0..=n).map(|i| t * i as f64 / n as f64).collect())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replicate(mut self, r: u64) -> Self {
        self.replicate_index = r;
        self
    }

    pub fn with_max_events(mut self, cap: u64) -> Self {
        self.max_events = cap;
        self
    }

    pub fn recording_events(mut self) -> Self {
        self.record_events = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSimConfig(m));
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive and finite, got {}", self.t_end));
        }
        if self.max_events == 0 {
            return bad("max_events must be positive".into());
        }
        if let Some(&s) = self
            .snapshot_times
            .iter()
            .find(|s| !(**s >= 0.0 && **s <= self.t_end))
        {
            return bad(format!("snapshot time {s} outside [0, {}]", self.t_end));
        }
        if self.snapshot_times.windows(2).any(|w| w[0] > w[1]) {
            return bad("snapshot times must be sorted".into());
        }
        if let Some(imm) = &self.immigration {
            imm.validate()?;
        }
        Ok(())
    }

    fn active_immigration(&self) -> Option<&ImmigrationMechanism> {
        self.immigration.as_ref().filter(|m| m.is_active())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TEnd,
    Extinction,
    EventCap,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Branch { dying_age: f64, offspring: u64 },
    Immigrate { group: AgeMeasure },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
}

/// State at a requested time together with the counters accumulated on `[0, time]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub state: AgeMeasure,
    /// `n(t)`: accepted branching events so far.
    pub branch_events: u64,
    pub immigration_events: u64,
    /// `sup_{s ≤ t} X_s(∞)`.
    pub running_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<Snapshot>,
    pub event_log: Vec<Event>,
    pub branch_events: u64,
    pub immigration_events: u64,
    pub final_state: AgeMeasure,
    pub final_time: f64,
    pub terminated_by: Termination,
}

/// Simulates the process without immigration. Errors if `cfg` carries an active mechanism.
pub fn simulate_branching<R: Rng>(cfg: &SimConfig, rng: &mut R) -> Result<Trajectory> {
    if cfg.active_immigration().is_some() {
        return Err(Error::InvalidSimConfig(
            "config carries immigration; use simulate_with_immigration".into(),
        ));
    }
    run(cfg, None, rng)
}

/// Simulates the process with immigration. A zero-rate mechanism reproduces
/// [`simulate_branching`] draw for draw.
pub fn simulate_with_immigration<R: Rng>(cfg: &SimConfig, rng: &mut R) -> Result<Trajectory> {
    if cfg.immigration.is_none() {
        return Err(Error::InvalidSimConfig(
            "config has no immigration mechanism".into(),
        ));
    }
    run(cfg, cfg.active_immigration(), rng)
}

/// Dispatches on the config and draws from the `(seed, replicate_index)` stream.
pub fn simulate(cfg: &SimConfig) -> Result<Trajectory> {
    let mut rng = rng::stream(cfg.seed, cfg.replicate_index);
    run(cfg, cfg.active_immigration(), &mut rng)
}

/// Replicate `r` of `cfg`: same config, stream `(cfg.seed, r)`.
pub fn simulate_replicate(cfg: &SimConfig, r: u64) -> Result<Trajectory> {
    let mut rng = rng::stream(cfg.seed, r);
    run(cfg, cfg.active_immigration(), &mut rng)
}

/// Particles stored by birth time, ascending; age at time `t` is `t − birth`,
/// so reverse iteration visits ages in ascending order.
struct Population {
    births: Vec<f64>,
}

impl Population {
    fn from_measure(m: &AgeMeasure) -> Self {
        Self {
            births: m.ages().iter().rev().map(|a| -a).collect(),
        }
    }

    fn len(&self) -> usize {
        self.births.len()
    }

    fn ages_at(&self, t: f64) -> AgeMeasure {
        AgeMeasure::from_sorted_unchecked(
            self.births.iter().rev().map(|b| (t - b).max(0.0)).collect(),
        )
    }

    /// Index into `births` of the particle selected by `u`, walking ascending ages.
    fn pick(&self, alpha: &ScalarField, constant: Option<f64>, t: f64, u: f64) -> Option<usize> {
        let n = self.births.len();
        if let Some(c) = constant {
            let i = ((u / c) as usize).min(n - 1);
            return Some(n - 1 - i);
        }
        let mut cum = 0.0;
        for (i, b) in self.births.iter().enumerate().rev() {
            cum += alpha.eval(t - b);
            if cum > u {
                return Some(i);
            }
        }
        None
    }

    fn insert_birth(&mut self, b: f64) {
        let at = self.births.partition_point(|x| *x <= b);
        self.births.insert(at, b);
    }
}

fn run<R: Rng>(
    cfg: &SimConfig,
    imm: Option<&ImmigrationMechanism>,
    rng: &mut R,
) -> Result<Trajectory> {
    cfg.validate()?;
    let model = &cfg.model;
    let alpha = model.alpha();
    let constant = alpha.as_constant();
    let c1 = model.constants().c1;
    let lambda = imm.map_or(0.0, |m| m.total_rate());

    let mut pop = Population::from_measure(&cfg.initial);
    let mut t = 0.0;
    let mut snaps = Vec::with_capacity(cfg.snapshot_times.len());
    let mut next_snap = 0;
    let mut log = Vec::new();
    let (mut n_branch, mut n_imm, mut accepted) = (0u64, 0u64, 0u64);
    let mut running_max = pop.len();
    let mut terminated_by = Termination::TEnd;

    let take_snapshots = |upto: f64,
                          inclusive: bool,
                          next: &mut usize,
                          snaps: &mut Vec<Snapshot>,
                          pop: &Population,
                          counters: (u64, u64, usize)| {
        while let Some(&s) = cfg.snapshot_times.get(*next) {
            if s < upto || (inclusive && s <= upto) {
                snaps.push(Snapshot {
                    time: s,
                    state: pop.ages_at(s),
                    branch_events: counters.0,
                    immigration_events: counters.1,
                    running_max: counters.2,
                });
                *next += 1;
            } else {
                break;
            }
        }
    };

    loop {
        let branch_rate = c1 * pop.len() as f64;
        let total = branch_rate + lambda;
        if total == 0.0 {
            terminated_by = Termination::Extinction;
            break;
        }
        let wait: f64 = Exp1.sample(rng);
        let t_next = t + wait / total;
        take_snapshots(
            t_next.min(cfg.t_end),
            t_next > cfg.t_end,
            &mut next_snap,
            &mut snaps,
            &pop,
            (n_branch, n_imm, running_max),
        );
        if t_next > cfg.t_end {
            break;
        }
        t = t_next;

        let u = if lambda > 0.0 {
            let v = rng.random::<f64>() * total;
            if v < lambda {
                let group = imm.expect("positive rate").sample_group(rng)?;
                for &a in group.ages() {
                    pop.insert_birth(t - a);
                }
                n_imm += 1;
                accepted += 1;
                running_max = running_max.max(pop.len());
                if cfg.record_events {
                    log.push(Event {
                        time: t,
                        kind: EventKind::Immigrate { group },
                    });
                }
                if accepted >= cfg.max_events {
                    terminated_by = Termination::EventCap;
                    break;
                }
                continue;
            }
            v - lambda
        } else {
            rng.random::<f64>() * branch_rate
        };

        let Some(i) = pop.pick(alpha, constant, t, u) else {
            continue;
        };
        let dying_age = t - pop.births.remove(i);
        let k = model.offspring().sample(dying_age, rng);
        pop.births.extend(std::iter::repeat_n(t, k as usize));
        n_branch += 1;
        accepted += 1;
        running_max = running_max.max(pop.len());
        if cfg.record_events {
            log.push(Event {
                time: t,
                kind: EventKind::Branch {
                    dying_age,
                    offspring: k,
                },
            });
        }
        if accepted >= cfg.max_events {
            terminated_by = Termination::EventCap;
            break;
        }
    }

    let final_time = match terminated_by {
        Termination::EventCap => t,
        _ => {
            take_snapshots(
                cfg.t_end,
                true,
                &mut next_snap,
                &mut snaps,
                &pop,
                (n_branch, n_imm, running_max),
            );
            cfg.t_end
        }
    };
    Ok(Trajectory {
        snapshots: snaps,
        event_log: log,
        branch_events: n_branch,
        immigration_events: n_imm,
        final_state: pop.ages_at(final_time),
        final_time,
        terminated_by,
    })
}

/// Per-snapshot `⟨X_t, f⟩` and `n(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayStats {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub branch_counts: Vec<u64>,
    /// Set when the trajectory stopped at the event cap; statistics are then biased.
    pub biased: bool,
}

pub fn replay_statistics(traj: &Trajectory, f: &ScalarField) -> ReplayStats {
    ReplayStats {
        times: traj.snapshots.iter().map(|s| s.time).collect(),
        values: traj.snapshots.iter().map(|s| s.state.integrate(f)).collect(),
        branch_counts: traj.snapshots.iter().map(|s| s.branch_events).collect(),
        biased: traj.terminated_by == Termination::EventCap,
    }
}

/// Writes the event log as `time,kind,dying_age,offspring_count,group_size`.
pub fn write_event_csv<W: Write>(traj: &Trajectory, mut out: W) -> std::io::Result<()> {
    writeln!(out, "time,kind,dying_age,offspring_count,group_size")?;
    for e in &traj.event_log {
        match &e.kind {
            EventKind::Branch {
                dying_age,
                offspring,
            } => writeln!(out, "{},branch,{},{},", e.time, dying_age, offspring)?,
            EventKind::Immigrate { group } => {
                writeln!(out, "{},immigrate,,,{}", e.time, group.total_mass())?
            }
        }
    }
    Ok(())
}
