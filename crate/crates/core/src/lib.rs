//! Multigroup classification by weighted local projections.
//!
//! Every training observation owns a small linear discriminant model fitted
//! in the low-dimensional space spanned by its nearest same-class
//! neighbours. A query is projected into every local space, and the local
//! posteriors are pooled with weights that measure how well each local model
//! separates the training data.
//!
//! ```
//! use lop::{gaussian_classes, LpModel, LpOptions, Scheme};
//!
//! let train = gaussian_classes(&[15, 15, 15], 40, 5.0, 1);
//! let model = LpModel::fit(&train, 4, LpOptions::default()).unwrap();
//! let c = model.classify(train.row(0).as_slice(), Scheme::Weighted);
//! assert_eq!(c.class, 0);
//! ```

pub mod baselines;
pub mod cli;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod evaluation;
pub mod lda;
pub mod localproj;
mod persist;
pub mod synthetic;
pub mod tuning;
pub mod viz;

pub use baselines::{knn_fit, KnnK, KnnModel};
pub use dataset::{load_csv, preprocess, stratified_resample, LabeledDataset, ResamplePlan, Split, TrainSplit};
pub use ensemble::{Classification, LocalModel, LpModel, LpOptions, QualityWeights, Scheme};
pub use error::{Error, Result};
pub use evaluation::{run_experiment, run_on_dataset, ExperimentSpec, Method};
pub use lda::{fit_lda, full_rank_lda, FullRankLda, LdaModel};
pub use localproj::{Core, CoreMode, Projection};
pub use synthetic::gaussian_classes;
pub use tuning::{k_interval, training_error, tune_k, KInterval, TuneOptions, TuningReport};
pub use viz::{PosteriorDump, TernaryDiagram};
