//! Part-selection strategies.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gai::GaiDecomposition;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    /// Uniform draw over parts.
    #[default]
    Random,
    /// Cycle through parts sorted by overlap `|I_p \ J_p|`, smallest first.
    Smallest,
    /// UCB1 over a surrogate of the utility gain.
    Ucb1,
}

impl FromStr for SelectionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(SelectionKind::Random),
            "smallest" | "smallest-first" => Ok(SelectionKind::Smallest),
            "ucb1" => Ok(SelectionKind::Ucb1),
            other => Err(format!("unknown selection strategy `{other}` (random, smallest, ucb1)")),
        }
    }
}

impl fmt::Display for SelectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SelectionKind::Random => "random",
            SelectionKind::Smallest => "smallest",
            SelectionKind::Ucb1 => "ucb1",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SelectionStrategy {
    kind: SelectionKind,
    rng: ChaCha8Rng,
    cycle: Vec<usize>,
    cursor: usize,
    counts: Vec<u64>,
    rewards: Vec<f64>,
    exploration: f64,
}

impl SelectionStrategy {
    pub fn new(kind: SelectionKind, decomposition: &GaiDecomposition, seed: u64) -> Self {
        let n = decomposition.ordering.len();
        let mut cycle: Vec<usize> = (0..n).collect();
        cycle.sort_by_key(|&p| (decomposition.overlap(p), p));
        SelectionStrategy {
            kind,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cycle,
            cursor: 0,
            counts: vec![0; n],
            rewards: vec![0.0; n],
            exploration: 1.0,
        }
    }

    pub fn with_exploration(mut self, c: f64) -> Self {
        self.exploration = c;
        self
    }

    pub fn kind(&self) -> SelectionKind {
        self.kind
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// The smallest-first visiting cycle.
    pub fn cycle(&self) -> &[usize] {
        &self.cycle
    }

    pub fn select_part(&mut self) -> usize {
        let n = self.counts.len();
        let p = match self.kind {
            SelectionKind::Random => self.rng.gen_range(0..n),
            SelectionKind::Smallest => {
                let p = self.cycle[self.cursor % n];
                self.cursor += 1;
                p
            }
            SelectionKind::Ucb1 => match self.counts.iter().position(|&c| c == 0) {
                Some(p) => p,
                None => {
                    let mut best = 0;
                    let mut best_index = f64::NEG_INFINITY;
                    for p in 0..n {
                        let index = self.ucb_index(p);
                        if index > best_index {
                            best = p;
                            best_index = index;
                        }
                    }
                    best
                }
            },
        };
        self.counts[p] += 1;
        p
    }

    /// `mean_p + c * sqrt(2 ln t / n_p)` with `t` the number of selections so far.
    pub fn ucb_index(&self, p: usize) -> f64 {
        let n_p = self.counts[p] as f64;
        let t: u64 = self.counts.iter().sum();
        self.rewards[p] / n_p + self.exploration * (2.0 * (t as f64).ln() / n_p).sqrt()
    }

    /// Feeds back a reward in `[0, 1]`; only UCB1 keeps statistics.
    pub fn record_reward(&mut self, part: usize, reward: f64) {
        if self.kind == SelectionKind::Ucb1 {
            self.rewards[part] += reward;
        }
    }
}

/// Normalizes an estimated gain to `[0, 1]` by clipping to `[0, scale]`.
pub fn surrogate_reward(gain: f64, scale: f64) -> f64 {
    if scale <= 0.0 {
        return 0.0;
    }
    gain.clamp(0.0, scale) / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FeatureSet;

    fn decomposition(n: usize) -> GaiDecomposition {
        GaiDecomposition {
            ordering: (0..n).collect(),
            j_sets: (0..n).map(|p| FeatureSet::new(vec![p])).collect(),
            by_part: (0..n).map(|p| FeatureSet::new(vec![p])).collect(),
            i_sets: (0..n).map(|p| FeatureSet::new(vec![p])).collect(),
        }
    }

    #[test]
    fn single_part_is_always_selected() {
        for kind in [SelectionKind::Random, SelectionKind::Smallest, SelectionKind::Ucb1] {
            let mut s = SelectionStrategy::new(kind, &decomposition(1), 3);
            for _ in 0..10 {
                assert_eq!(s.select_part(), 0);
            }
        }
    }

    #[test]
    fn ucb1_bootstraps_each_part_once() {
        let mut s = SelectionStrategy::new(SelectionKind::Ucb1, &decomposition(5), 0);
        let first: Vec<usize> = (0..5).map(|_| s.select_part()).collect();
        assert_eq!(first, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn ucb1_zero_rewards_round_robin() {
        let mut s = SelectionStrategy::new(SelectionKind::Ucb1, &decomposition(3), 0);
        for _ in 0..300 {
            let p = s.select_part();
            s.record_reward(p, 0.0);
        }
        assert_eq!(s.counts(), &[100, 100, 100]);
    }

    #[test]
    fn reward_scaling() {
        assert_eq!(surrogate_reward(-1.0, 4.0), 0.0);
        assert_eq!(surrogate_reward(2.0, 4.0), 0.5);
        assert_eq!(surrogate_reward(9.0, 4.0), 1.0);
    }

    #[test]
    fn parses_cli_names() {
        assert_eq!("ucb1".parse::<SelectionKind>().unwrap(), SelectionKind::Ucb1);
        assert!("best".parse::<SelectionKind>().is_err());
    }
}
