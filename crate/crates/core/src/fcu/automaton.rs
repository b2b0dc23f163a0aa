use std::fmt;

use serde::{Deserialize, Serialize};

use super::FcuError;
use crate::vehicle::EgoState;

/// Transition and monitoring labels of the automaton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "env")]
    Env,
    #[serde(rename = "pl")]
    Pl,
    #[serde(rename = "rpl")]
    Rpl,
    #[serde(rename = "fcu-check")]
    FcuCheck,
    #[serde(rename = "safety-violation")]
    SafetyViolation,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Env => "env",
            Label::Pl => "pl",
            Label::Rpl => "rpl",
            Label::FcuCheck => "fcu-check",
            Label::SafetyViolation => "safety-violation",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Feasibility flag of the current plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Delta {
    #[default]
    Feasible,
    Infeasible,
}

impl Delta {
    /// `-` for feasible, `+` for infeasible.
    pub fn symbol(self) -> char {
        match self {
            Delta::Feasible => '-',
            Delta::Infeasible => '+',
        }
    }
}

/// Clock periods in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Clocks {
    pub tau_env: f64,
    pub tau_fcu: f64,
    pub tau_safe: f64,
    /// Integrator and automaton step.
    pub dt: f64,
}

impl Default for Clocks {
    fn default() -> Self {
        Clocks {
            tau_env: 0.2,
            tau_fcu: 0.05,
            tau_safe: 0.2,
            dt: 1e-3,
        }
    }
}

/// Clock periods as whole numbers of automaton steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockTicks {
    pub env: u64,
    pub fcu: u64,
    pub pl: u64,
    pub safe: u64,
}

fn whole_ticks(name: &str, period: f64, dt: f64) -> Result<u64, FcuError> {
    let ratio = period / dt;
    let n = ratio.round();
    if !(n >= 1.0) || (ratio - n).abs() > 1e-6 * n {
        return Err(FcuError::BadClocks(format!(
            "{name} = {period} is not a whole multiple of dt = {dt}"
        )));
    }
    Ok(n as u64)
}

impl Clocks {
    /// Converts to ticks, with `tau_pl = horizon · tau_env`.
    pub fn ticks(&self, horizon: usize) -> Result<ClockTicks, FcuError> {
        let Clocks {
            tau_env,
            tau_fcu,
            tau_safe,
            dt,
        } = *self;
        if ![tau_env, tau_fcu, tau_safe, dt].iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(FcuError::BadClocks(format!("all periods must be positive: {self:?}")));
        }
        if !(tau_fcu < tau_env && tau_env <= tau_safe) {
            return Err(FcuError::BadClocks(format!(
                "need tau_fcu < tau_env <= tau_safe, got {tau_fcu}, {tau_env}, {tau_safe}"
            )));
        }
        if dt > tau_fcu {
            return Err(FcuError::BadClocks(format!("dt = {dt} exceeds tau_fcu = {tau_fcu}")));
        }
        if horizon == 0 {
            return Err(FcuError::BadClocks("planning horizon must be at least one step".into()));
        }
        let env = whole_ticks("tau_env", tau_env, dt)?;
        Ok(ClockTicks {
            env,
            fcu: whole_ticks("tau_fcu", tau_fcu, dt)?,
            pl: env * horizon as u64,
            safe: whole_ticks("tau_safe", tau_safe, dt)?,
        })
    }
}

/// Elapsed ticks since the last firing of each clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Timers {
    pub env: u64,
    pub pl: u64,
    pub fcu: u64,
    /// Remaining safety-mode ticks, if the override is active.
    pub safe_left: Option<u64>,
}

/// Continuous ego state, discrete environment state `S`, flag and clocks.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState<S> {
    pub ego: EgoState,
    pub discrete: S,
    pub delta: Delta,
    pub timers: Timers,
    pub tick: u64,
}

impl<S> HybridState<S> {
    pub fn new(ego: EgoState, discrete: S) -> Self {
        HybridState {
            ego,
            discrete,
            delta: Delta::Feasible,
            timers: Timers::default(),
            tick: 0,
        }
    }

    pub fn in_safety_mode(&self) -> bool {
        self.timers.safe_left.is_some()
    }

    /// Labels at tick 0: the initial environment load and the first plan.
    pub fn start(&self) -> Vec<Label> {
        vec![Label::Env, Label::Pl]
    }
}

/// Advances the automaton by one tick and returns the labels that fire.
///
/// Order within a tick: `env`; `rpl` if the flag was raised by an earlier
/// check; `pl` at the end of a safety-mode window or when the planning clock
/// expires while feasible; `fcu-check`. A check fired here can only lead to
/// `rpl` on a later tick. The flag stays raised for the whole safety-mode
/// window and is cleared by the `pl` that ends it.
pub fn step_automaton<S>(q: &mut HybridState<S>, clocks: &ClockTicks) -> Vec<Label> {
    let mut fired = Vec::new();
    q.tick += 1;
    let t = &mut q.timers;
    t.env += 1;
    t.pl += 1;
    t.fcu += 1;

    if t.env >= clocks.env {
        t.env = 0;
        fired.push(Label::Env);
    }
    match t.safe_left {
        None if q.delta == Delta::Infeasible => {
            t.safe_left = Some(clocks.safe);
            fired.push(Label::Rpl);
        }
        Some(left) => {
            let left = left.saturating_sub(1);
            if left == 0 {
                t.safe_left = None;
                t.pl = 0;
                q.delta = Delta::Feasible;
                fired.push(Label::Pl);
            } else {
                t.safe_left = Some(left);
            }
        }
        None => {}
    }
    if t.safe_left.is_none() && t.pl >= clocks.pl && !fired.contains(&Label::Pl) {
        t.pl = 0;
        fired.push(Label::Pl);
    }
    if t.fcu >= clocks.fcu {
        t.fcu = 0;
        fired.push(Label::FcuCheck);
    }
    fired
}
