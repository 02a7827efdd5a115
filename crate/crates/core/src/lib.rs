//! Trainable unrolled ADMM denoisers and unrolled plug-and-play restorers for
//! signals on graphs, with hand-written gradients, spectral and Chebyshev
//! filtering, classical baselines and an experiment harness.
//!
//! Batch evaluation, grid search, data generation and gradient checks run on
//! rayon when the `parallel` feature is on (the default) and sequentially
//! otherwise.

pub mod baselines;
pub mod context;
pub mod dau;
pub mod data;
pub mod error;
pub mod experiment;
pub mod grad;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod nest;
pub mod par;
pub mod partition;
pub mod sparse;
pub mod spectral;
pub mod train;

pub use context::{Accel, GraphContext};
pub use dau::{dau_param_count, graphdau_denoise, graphdau_forward, soft_threshold, DauParams, Variant};
pub use error::{Error, Result};
pub use grad::{graphdau_backward, nestdau_backward, GradBundle};
pub use graph::{build_graph, graph_operators, knn_graph, synth_graph, Graph, SigmaMode, SynthKind};
pub use model::{finite_diff_check, Model, Problem};
pub use nest::{inverse_step, nest_param_count, nestdau_forward, nestdau_restore, DegradationOp, NestParams};
pub use train::{loss_mse, optimizer_step, train, OptimState, TrainConfig};
