//! Small finite MDPs shipped for oracle checks.

use crate::envs::TabularMdp;

pub const TWO_STATE_CHAIN: &str = include_str!("../fixtures/two_state_chain.mdp");
pub const THREE_STATE_LOOP: &str = include_str!("../fixtures/three_state_loop.mdp");
pub const THREE_ACTION_GRID: &str = include_str!("../fixtures/three_action_grid.mdp");

/// All fixtures as `(name, mdp)`.
pub fn all() -> Vec<(&'static str, TabularMdp)> {
    [
        ("two_state_chain", TWO_STATE_CHAIN),
        ("three_state_loop", THREE_STATE_LOOP),
        ("three_action_grid", THREE_ACTION_GRID),
    ]
    .into_iter()
    .map(|(name, text)| (name, TabularMdp::parse(text).expect("shipped fixture is valid")))
    .collect()
}

/// Looks a fixture up by name.
pub fn by_name(name: &str) -> Option<TabularMdp> {
    all().into_iter().find(|(n, _)| *n == name).map(|(_, m)| m)
}
