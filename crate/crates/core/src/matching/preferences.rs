use serde::Serialize;

use super::LinkMatrix;

/// Counterparts ranked best first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PreferenceList {
    pub owner: usize,
    pub ranked: Vec<usize>,
}

impl PreferenceList {
    /// Position of `id` in the ranking, lower is better.
    pub fn rank_of(&self, id: usize) -> Option<usize> {
        self.ranked.iter().position(|&x| x == id)
    }
}

/// Users rank channels by descending gain; equal gains keep channel order.
pub fn build_user_preferences(gains: &LinkMatrix) -> Vec<PreferenceList> {
    (0..gains.users())
        .map(|n| {
            let mut ranked: Vec<usize> = (0..gains.channels()).collect();
            // stable sort keeps ascending index among ties
            ranked.sort_by(|&a, &b| gains.get(b, n).total_cmp(&gains.get(a, n)));
            PreferenceList { owner: n, ranked }
        })
        .collect()
}

/// Every channel ranks users nearest first; equal distances keep user order.
pub fn build_channel_preferences(distances: &[f64], channels: usize) -> Vec<PreferenceList> {
    let mut ranked: Vec<usize> = (0..distances.len()).collect();
    ranked.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
    (0..channels)
        .map(|m| PreferenceList {
            owner: m,
            ranked: ranked.clone(),
        })
        .collect()
}
