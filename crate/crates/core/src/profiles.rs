//! Published statistics and tuned hyperparameters of the benchmark
//! datasets.

use crate::datasets::DatasetStats;
use crate::error::{Error, Result};
use crate::layer::{DgnnHyperparams, Mode};

/// Semantic-graph neighbour count used when a profile does not override it.
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub name: &'static str,
    /// Display name used in report tables.
    pub title: &'static str,
    pub stats: DatasetStats,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
    pub layers: usize,
    pub dropout: f64,
    pub lr: f64,
    /// Reported test accuracy as `(mean, std)` in percent.
    pub reported: (f64, f64),
}

impl Profile {
    pub fn hyperparams(&self) -> DgnnHyperparams {
        DgnnHyperparams {
            lambda: self.lambda,
            alpha: self.alpha,
            beta: self.beta,
            epsilon: 0.5,
            layers: self.layers,
            mode: Mode::Network,
        }
    }
}

const fn stats(nodes: usize, features: usize, classes: usize, edges: usize, homophily: f64) -> DatasetStats {
    DatasetStats {
        nodes,
        features,
        classes,
        edges,
        homophily,
    }
}

pub const PROFILES: [Profile; 6] = [
    Profile {
        name: "cora",
        title: "Cora",
        stats: stats(2708, 1433, 7, 5429, 0.809),
        lambda: 1.0,
        alpha: 2.0,
        beta: 0.02,
        layers: 2,
        dropout: 0.25,
        lr: 0.002,
        reported: (91.06, 0.36),
    },
    Profile {
        name: "citeseer",
        title: "Citeseer",
        stats: stats(3327, 3703, 6, 4732, 0.721),
        lambda: 2.0,
        alpha: 0.5,
        beta: 0.01,
        layers: 3,
        dropout: 0.15,
        lr: 0.003,
        reported: (78.39, 0.30),
    },
    Profile {
        name: "chameleon",
        title: "Chameleon",
        stats: stats(2277, 2325, 5, 36101, 0.233),
        lambda: 1.0,
        alpha: 2.5,
        beta: 0.01,
        layers: 2,
        dropout: 0.02,
        lr: 0.05,
        reported: (78.21, 1.31),
    },
    Profile {
        name: "squirrel",
        title: "Squirrel",
        stats: stats(5201, 2089, 5, 217073, 0.203),
        lambda: 1.0,
        alpha: 2.5,
        beta: 0.01,
        layers: 2,
        dropout: 0.0,
        lr: 0.02,
        reported: (70.35, 2.49),
    },
    Profile {
        name: "computers",
        title: "Computers",
        stats: stats(13752, 767, 10, 245861, 0.791),
        lambda: 2.0,
        alpha: 1.0,
        beta: 0.01,
        layers: 2,
        dropout: 0.05,
        lr: 0.03,
        reported: (91.70, 0.18),
    },
    Profile {
        name: "photo",
        title: "Photo",
        stats: stats(7650, 745, 8, 119081, 0.824),
        lambda: 2.0,
        alpha: 0.5,
        beta: 0.01,
        layers: 2,
        dropout: 0.15,
        lr: 0.02,
        reported: (93.98, 0.16),
    },
];

/// Case-insensitive lookup.
pub fn profile(name: &str) -> Result<&'static Profile> {
    PROFILES
        .iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| {
            let known: Vec<_> = PROFILES.iter().map(|p| p.name).collect();
            Error::Config(format!("unknown profile {name:?} (known: {})", known.join(", ")))
        })
}
