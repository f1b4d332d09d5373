//! Simulation of SDEs with monotone (one-sided Lipschitz) drift together
//! with their variational processes: the Jacobian flow and its inverse, the
//! stochastic Wronskian, the Malliavin derivative field, Cameron–Martin
//! shift experiments and Bismut–Elworthy–Li sensitivities.
//!
//! Every Monte Carlo routine is reproducible from `(seed, path_index)` and
//! independent of the worker count of the [`Engine`].

pub mod engine;
pub mod error;
pub mod estimate;
pub mod greeks;
pub mod grid;
pub mod linalg;
pub mod malliavin;
pub mod models;
pub mod noise;
pub mod path;
pub mod shiftlab;
pub mod solver;
pub mod variational;

pub use engine::{reduce_paths, DivergencePolicy, Engine, PathReduction, CHUNK_SIZE, WORKERS_ENV};
pub use error::{Error, Result};
pub use estimate::{McEstimate, Moments};
pub use grid::{make_grid, TimeGrid};
pub use models::{zoo_lookup, CoefficientField, InitialCondition, ModelSpec};
pub use noise::{sample_noise, shift_noise, CameronMartinPath, History, NoisePath};
pub use path::{MatrixPath, StatePath};
pub use greeks::{bel_gradient, fd_gradient, BelConfig, BelWeight};
pub use malliavin::{directional_derivative, malliavin_field, malliavin_matrix, malliavin_row, MalliavinField, MalliavinMatrix};
pub use shiftlab::{cameron_martin_check, doleans_dade, gateaux_ladder, QuotientLadder};
pub use solver::{simulate, SchemeChoice, SchemeKind};
pub use variational::{jacobian, JacobianBundle};
