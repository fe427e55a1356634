//! Learning-dynamics diagnostics for finetuning runs on reasoning tasks.
//!
//! The central quantity is *pre-memorization train accuracy*: the best
//! accuracy a model reaches on a training example before the perplexity of
//! that example's target solution falls to a memorization threshold `p`.
//! Averaged over the training set it tracks test accuracy, per example it
//! flags predictions that break under small prompt perturbations, and it
//! ranks examples for targeted data collection.
//!
//! Modules:
//!
//! - [`trajectory`]: accuracy, perplexity, masked and pre-memorization accuracy
//! - [`calibration`]: threshold sweep, R² and correlation statistics
//! - [`baselines`]: gradient variance, distance from init, ATC, IFD, heuristic difficulty
//! - [`robustness`]: perturbed prompts and binned accuracy degradation
//! - [`curation`]: plans and the iterative collection loop
//! - [`simulator`]: synthetic trajectories with planted ground truth
//! - [`io`]: log/manifest/vector/plan formats, tables and SVG figures
//! - [`cli`]: the `premem` command-line front end
//!
//! Runnable walkthroughs live in `examples/`.

// `!(x > y)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod calibration;
pub mod cli;
pub mod curation;
pub mod error;
pub mod io;
pub mod robustness;
pub mod simulator;
pub mod trajectory;

mod rng;

pub use error::{Error, Result};
pub use trajectory::{
    accuracy_estimate, average_premem, generalization_gap, is_memorized, masked_accuracy, perplexity,
    pre_memorization_accuracy, EvalRecord, ExampleId, ExampleTrajectory, MemorizationThreshold, Split,
    TrajectoryPoint, Variant,
};
