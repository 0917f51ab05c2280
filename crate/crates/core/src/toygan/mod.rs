//! Desk-scale stand-in for the image pipeline: labeled Gaussian mixtures, a
//! conditional GAN and a pool of small classifiers, all built from MLPs with
//! hand-written backpropagation.

mod classifier;
mod gan;
mod gradcheck;
mod mixture;
mod mlp;
mod pipeline;

pub use classifier::{
    classifier_accuracy, penultimate_features, predict_labels, predictions, train_classifier, train_classifier_pool,
    ClassifierConfig, PoolGrid,
};
pub use gan::{sample_synthetic, train_conditional_gan, AdamMoments, GanConfig, ToyGanState};
pub use gradcheck::{default_suite, gradcheck_suite, gradient_check, GradCheck};
pub use mixture::{class_names, sample_mixture, MixtureComponent, MixtureSpec};
pub use mlp::{mlp_backward, mlp_backward_acc, mlp_forward, Activation, Layer, MlpCache, MlpGrads, MlpParams};
pub use pipeline::{
    ratio_histogram, run_toy, HistBin, RatioRow, RatioStats, ToyConfig, ToyModel, ToyRun, ToySeeds, ToySummary,
    HIST_BINS, HIST_BIN_WIDTH,
};
