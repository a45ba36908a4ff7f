//! Measuring and improving the robustness of neural-network parameters
//! under worst-case corruption.
//!
//! A corruption is an additive perturbation `a` of the trained parameters
//! with `||a||_p = epsilon` and at most `n` nonzeros. The crate provides:
//!
//! - a small reverse-mode autodiff engine and desk-scale model zoo
//!   ([`engine`], [`model`]);
//! - closed-form constrained maximizers and the random / gradient-based
//!   corruptions built on them ([`corruption`]);
//! - estimators of the worst-case loss change plus the distribution theory
//!   for random corruptions ([`indicator`]);
//! - corruption-resistant training ([`acrt`]);
//! - per-group vulnerability scans, checkpoints, datasets and reports
//!   ([`scan`], [`checkpoint`], [`data`], [`report`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acrt;
pub mod batch;
pub mod checkpoint;
pub mod corruption;
pub mod data;
pub mod engine;
pub mod error;
pub mod indicator;
pub mod model;
pub mod norms;
pub mod params;
pub mod quad;
pub mod report;
pub mod rng;
pub mod scan;
pub mod tensor;

pub use acrt::{AcrtConfig, RobustnessRow, Variant};
pub use batch::{Batch, Targets};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use corruption::{
    apply_corruption, gradient_corruption, random_corruption, solve_constrained_max, top_n, CorruptionConstraint,
    CorruptionVector, Provenance,
};
pub use data::{load_dataset, Dataset, DatasetKind, DatasetSource, Split};
pub use engine::{eval_grad, eval_loss, finite_diff_grad, max_relative_error, GradReport, Model};
pub use error::{Error, Result};
pub use indicator::{IndicatorEstimate, McSummary};
pub use model::{build_model, GroupAxis, MetricValue, ModelSpec, Network};
pub use norms::NormOrder;
pub use params::{FlatParams, GroupKind, ParamGroup};
pub use rng::RngState;
pub use scan::{scan, ScanReport};
pub use tensor::Tensor;
