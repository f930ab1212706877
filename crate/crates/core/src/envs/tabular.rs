//! Finite MDPs given by explicit tables, and their plain-text file format.
//!
//! ```text
//! # comments start with '#'
//! states = 2
//! actions = 2
//! horizon = 3
//! reward_bound = 1.0        # optional; defaults to max |r|
//!
//! [initial]
//! 0.5 0.5
//!
//! [transitions]
//! # state action : one probability per next state
//! 0 0 : 1.0 0.0
//! 0 1 : 0.2 0.8
//! 1 0 : 0.5 0.5
//! 1 1 : 0.0 1.0
//!
//! [rewards]
//! # state : one reward per action
//! 0 : 1.0 0.0
//! 1 : 0.0 0.5
//! ```
//!
//! Every `(state, action)` pair must appear exactly once in `[transitions]`
//! and every state once in `[rewards]`.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{sample_index, Environment, Observation, ObservationSpace, Transition};
use crate::rng::StreamRng;

const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TabularState {
    pub state: usize,
    /// Time step within the episode.
    pub t: usize,
}

/// A validated finite MDP: transition tensor P[s][a], reward table r[s][a],
/// initial distribution ρ and horizon H. Episodes end only at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    states: usize,
    actions: usize,
    horizon: usize,
    initial: Vec<f64>,
    transitions: Vec<Vec<f64>>,
    rewards: Vec<f64>,
    reward_bound: f64,
}

fn check_distribution(p: &[f64], len: usize, what: &str, line: Option<usize>) -> Result<()> {
    if p.len() != len {
        return Err(Error::validation(line, format!("{what} has {} entries, expected {len}", p.len())));
    }
    if let Some(v) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::validation(line, format!("{what} has invalid probability {v}")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::validation(line, format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

impl TabularMdp {
    /// Builds and validates an MDP. `transitions[s * actions + a]` is the
    /// next-state distribution of `(s, a)`; `rewards[s][a]` its reward.
    pub fn new(
        initial: Vec<f64>,
        transitions: Vec<Vec<f64>>,
        rewards: Vec<Vec<f64>>,
        horizon: usize,
        reward_bound: Option<f64>,
    ) -> Result<Self> {
        let states = initial.len();
        if states == 0 {
            return Err(Error::validation(None, "an MDP needs at least one state"));
        }
        if rewards.len() != states {
            return Err(Error::validation(None, format!("reward table has {} rows, expected {states}", rewards.len())));
        }
        let actions = rewards[0].len();
        if actions == 0 {
            return Err(Error::validation(None, "an MDP needs at least one action"));
        }
        if horizon == 0 {
            return Err(Error::validation(None, "horizon must be at least 1"));
        }
        check_distribution(&initial, states, "initial distribution", None)?;
        if transitions.len() != states * actions {
            return Err(Error::validation(
                None,
                format!("expected {} transition rows, got {}", states * actions, transitions.len()),
            ));
        }
        for (i, row) in transitions.iter().enumerate() {
            check_distribution(row, states, &format!("P[{}][{}]", i / actions, i % actions), None)?;
        }
        let mut flat = Vec::with_capacity(states * actions);
        for (s, row) in rewards.iter().enumerate() {
            if row.len() != actions {
                return Err(Error::validation(None, format!("reward row {s} has {} entries", row.len())));
            }
            if let Some(r) = row.iter().find(|r| !r.is_finite()) {
                return Err(Error::validation(None, format!("reward row {s} has non-finite entry {r}")));
            }
            flat.extend_from_slice(row);
        }
        let max_abs = flat.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let reward_bound = match reward_bound {
            Some(bound) if bound < max_abs => {
                return Err(Error::validation(None, format!("reward {max_abs} exceeds declared bound {bound}")))
            }
            Some(bound) => bound,
            None => max_abs,
        };
        Ok(TabularMdp { states, actions, horizon, initial, transitions, rewards: flat, reward_bound })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self, state: usize, action: usize) -> &[f64] {
        &self.transitions[state * self.actions + action]
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state * self.actions + action]
    }

    pub fn with_horizon(mut self, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::validation(None, "horizon must be at least 1"));
        }
        self.horizon = horizon;
        Ok(self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            Header,
            Initial,
            Transitions,
            Rewards,
        }

        let mut section = Section::Header;
        let (mut states, mut actions, mut horizon, mut bound) = (None, None, None, None);
        let mut initial: Option<(usize, Vec<f64>)> = None;
        let mut transitions: Vec<(usize, usize, usize, Vec<f64>)> = Vec::new();
        let mut rewards: Vec<(usize, usize, Vec<f64>)> = Vec::new();

        let numbers = |s: &str, line: usize| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|tok| tok.parse::<f64>().map_err(|_| Error::validation(Some(line), format!("bad number '{tok}'"))))
                .collect()
        };
        let index = |s: &str, line: usize| -> Result<usize> {
            s.trim().parse::<usize>().map_err(|_| Error::validation(Some(line), format!("bad index '{}'", s.trim())))
        };

        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                section = match line {
                    "[initial]" => Section::Initial,
                    "[transitions]" => Section::Transitions,
                    "[rewards]" => Section::Rewards,
                    other => return Err(Error::validation(Some(line_no), format!("unknown section {other}"))),
                };
                continue;
            }
            match section {
                Section::Header => {
                    let (key, value) = line
                        .split_once('=')
                        .ok_or_else(|| Error::validation(Some(line_no), "expected 'key = value'"))?;
                    let value = value.trim();
                    match key.trim() {
                        "states" => states = Some(index(value, line_no)?),
                        "actions" => actions = Some(index(value, line_no)?),
                        "horizon" => horizon = Some(index(value, line_no)?),
                        "reward_bound" => {
                            bound =
                                Some(value.parse::<f64>().map_err(|_| {
                                    Error::validation(Some(line_no), format!("bad reward bound '{value}'"))
                                })?)
                        }
                        other => return Err(Error::validation(Some(line_no), format!("unknown key '{other}'"))),
                    }
                }
                Section::Initial => {
                    if initial.is_some() {
                        return Err(Error::validation(Some(line_no), "initial distribution given twice"));
                    }
                    initial = Some((line_no, numbers(line, line_no)?));
                }
                Section::Transitions => {
                    let (lhs, rhs) = line
                        .split_once(':')
                        .ok_or_else(|| Error::validation(Some(line_no), "expected 'state action : probabilities'"))?;
                    let idx: Vec<&str> = lhs.split_whitespace().collect();
                    if idx.len() != 2 {
                        return Err(Error::validation(Some(line_no), "expected 'state action' before ':'"));
                    }
                    transitions.push((
                        line_no,
                        index(idx[0], line_no)?,
                        index(idx[1], line_no)?,
                        numbers(rhs, line_no)?,
                    ));
                }
                Section::Rewards => {
                    let (lhs, rhs) = line
                        .split_once(':')
                        .ok_or_else(|| Error::validation(Some(line_no), "expected 'state : rewards'"))?;
                    rewards.push((line_no, index(lhs, line_no)?, numbers(rhs, line_no)?));
                }
            }
        }

        let missing = |what: &str| Error::validation(None, format!("missing '{what}'"));
        let states = states.ok_or_else(|| missing("states"))?;
        let actions = actions.ok_or_else(|| missing("actions"))?;
        let horizon = horizon.ok_or_else(|| missing("horizon"))?;
        if states == 0 || actions == 0 {
            return Err(Error::validation(None, "states and actions must be positive"));
        }
        let (init_line, initial) = initial.ok_or_else(|| missing("[initial]"))?;
        check_distribution(&initial, states, "initial distribution", Some(init_line))?;

        let mut table: Vec<Option<Vec<f64>>> = vec![None; states * actions];
        for (line, s, a, row) in transitions {
            if s >= states || a >= actions {
                return Err(Error::validation(Some(line), format!("pair ({s}, {a}) out of range")));
            }
            check_distribution(&row, states, &format!("P[{s}][{a}]"), Some(line))?;
            if table[s * actions + a].replace(row).is_some() {
                return Err(Error::validation(Some(line), format!("pair ({s}, {a}) given twice")));
            }
        }
        let transitions = table
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.ok_or_else(|| {
                    Error::validation(None, format!("missing transition row for ({}, {})", i / actions, i % actions))
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut reward_rows: Vec<Option<Vec<f64>>> = vec![None; states];
        for (line, s, row) in rewards {
            if s >= states {
                return Err(Error::validation(Some(line), format!("state {s} out of range")));
            }
            if row.len() != actions {
                return Err(Error::validation(Some(line), format!("expected {actions} rewards, got {}", row.len())));
            }
            if reward_rows[s].replace(row).is_some() {
                return Err(Error::validation(Some(line), format!("rewards for state {s} given twice")));
            }
        }
        let rewards = reward_rows
            .into_iter()
            .enumerate()
            .map(|(s, row)| row.ok_or_else(|| Error::validation(None, format!("missing rewards for state {s}"))))
            .collect::<Result<Vec<_>>>()?;

        TabularMdp::new(initial, transitions, rewards, horizon, bound)
    }
}

impl Environment for TabularMdp {
    type State = TabularState;

    fn reset(&self, rng: &mut StreamRng) -> TabularState {
        TabularState { state: sample_index(&self.initial, rng.gen::<f64>()), t: 0 }
    }

    fn step(&self, s: &TabularState, action: usize, rng: &mut StreamRng) -> Result<Transition<TabularState>> {
        if s.state >= self.states {
            return Err(Error::argument(format!("state {} out of range", s.state)));
        }
        if action >= self.actions {
            return Err(Error::argument(format!("action {action} out of range 0..{}", self.actions)));
        }
        let next = sample_index(self.transition(s.state, action), rng.gen::<f64>());
        Ok(Transition {
            state: TabularState { state: next, t: s.t + 1 },
            reward: self.reward(s.state, action),
            terminal: s.t + 1 >= self.horizon,
        })
    }

    fn observe(&self, s: &TabularState) -> Observation {
        Observation::Discrete(s.state)
    }

    fn observation_space(&self) -> ObservationSpace {
        ObservationSpace::Discrete(self.states)
    }

    fn action_count(&self) -> usize {
        self.actions
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn reward_bound(&self) -> f64 {
        self.reward_bound
    }
}
