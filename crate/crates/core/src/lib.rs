//! Reading-goal decoding from eye movements: corpus handling, evaluation
//! splits, gaze-aware question scorers and question generation prompts.

pub mod analysis;
pub mod baselines;
pub mod codec;
pub mod corpus;
pub mod embeddings;
pub mod eval_reconstruction;
pub mod eval_selection;
pub mod matrix;
pub mod scalar;
pub mod scorers;
pub mod splits;
pub mod stats;
pub mod synthetic;
pub mod text;

pub use scalar::Scalar;

pub type Matrix64 = matrix::Matrix<f64>;
pub type Matrix32 = matrix::Matrix<f32>;
pub type RnnScorer64 = scorers::RnnScorer<f64>;
pub type RnnScorer32 = scorers::RnnScorer<f32>;
pub type FusionScorer64 = scorers::FusionScorer<f64>;
pub type FusionScorer32 = scorers::FusionScorer<f32>;
pub type TrialInput64 = scorers::TrialInput<f64>;
pub type TrialInput32 = scorers::TrialInput<f32>;
pub type FixtureProvider64 = embeddings::FixtureProvider<f64>;
pub type FixtureProvider32 = embeddings::FixtureProvider<f32>;
pub type Selection64 = baselines::Selection<f64>;
pub type Selection32 = baselines::Selection<f32>;
