//! Per-step rewards for the two tasks.

use serde::{Deserialize, Serialize};

pub const COLLISION_PENALTY: f64 = -50.0;
pub const SEARCH_COLLISION_RADIUS: f64 = 1.0;
pub const RACING_COLLISION_RADIUS: f64 = 0.8;
pub const SEARCH_BAND: (f64, f64) = (2.0, 2.5);
pub const SEARCH_BAND_REWARD: f64 = 2.0;

/// How the search reward combines its piecewise cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// One case applies, checked in order: collision, band, base.
    #[default]
    Exclusive,
    /// The base term always applies; band bonus and collision penalty add
    /// on top of it.
    Additive,
}

fn search_base(r_m: f64, throttle: f64, steer: f64) -> f64 {
    0.005 * r_m * r_m + 5.0 * throttle * throttle - 2.0 * steer * steer
}

fn in_band(r_m: f64) -> bool {
    SEARCH_BAND.0 < r_m && r_m < SEARCH_BAND.1
}

/// Exploration reward: penalize proximity, reward skirting obstacles at
/// 2.0-2.5 m, otherwise reward clearance and throttle and penalize steering.
pub fn reward_search(r_m: f64, throttle: f64, steer: f64) -> f64 {
    if r_m < SEARCH_COLLISION_RADIUS {
        COLLISION_PENALTY
    } else if in_band(r_m) {
        SEARCH_BAND_REWARD
    } else {
        search_base(r_m, throttle, steer)
    }
}

pub fn reward_search_additive(r_m: f64, throttle: f64, steer: f64) -> f64 {
    let mut r = search_base(r_m, throttle, steer);
    if in_band(r_m) {
        r += SEARCH_BAND_REWARD;
    }
    if r_m < SEARCH_COLLISION_RADIUS {
        r += COLLISION_PENALTY;
    }
    r
}

pub fn reward_racing(r_m: f64, throttle: f64, steer: f64) -> f64 {
    if r_m < RACING_COLLISION_RADIUS {
        COLLISION_PENALTY
    } else {
        5.0 * throttle * throttle - 2.0 * steer * steer
    }
}
