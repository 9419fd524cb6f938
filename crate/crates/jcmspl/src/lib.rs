//! Joint concept matching-space projection learning for inductive zero-shot
//! recognition.
//!
//! Visual features `X` (m×n) and semantic features `Y` (d×n) are projected
//! into a shared k-dimensional concept space `C` by `A` (k×m) and `B` (k×d).
//! Training minimizes
//!
//! ```text
//! ½‖AX−C‖² + (λ1/2)‖BY−C‖² + (λ2/2)‖C−H‖² + (λ3/2)‖X−AᵀC‖² + (λ4/2)‖Y−BᵀC‖²
//! ```
//!
//! by exact block-coordinate descent, where `H` is a block indicator of each
//! sample's class. Unseen classes are recognized by nearest-neighbour search,
//! either in semantic space (`BᵀA x` against prototypes) or in visual space
//! (`x` against `AᵀB y`).
//!
//! ```
//! use jcmspl::dataset::{synth_generate, SynthSpec};
//! use jcmspl::recognizer::{eval_standard, Direction, Distance};
//! use jcmspl::trainer::{fit, Hyperparams};
//!
//! let (data, _) = synth_generate(&SynthSpec { samples_per_class: 10, ..SynthSpec::default() })?;
//! let (model, trace) = fit(&data, &Hyperparams::new(40))?;
//! assert!(trace.converged_at.is_some());
//! let report = eval_standard(&model, &data, Direction::V2s, Distance::Cosine)?;
//! assert!(report.overall_accuracy > 0.5);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! The `book/` directory at the repository root walks through the model in
//! more detail; its code listings are compiled and run as doctests of this
//! crate.

pub mod cli;
pub mod dataset;
pub mod linalg;
pub mod recognizer;
pub mod trainer;

pub use dataset::ZslDataset;
pub use linalg::Matrix;
pub use recognizer::EvalReport;
pub use trainer::{fit, Hyperparams, JcmsplModel, TrainingTrace, Variant};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/datasets.md")]
    mod datasets {}
    #[doc = include_str!("../../../book/src/objective.md")]
    mod objective {}
    #[doc = include_str!("../../../book/src/sylvester.md")]
    mod sylvester {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/recognition.md")]
    mod recognition {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
