//! Unsupervised analysis of feature matrices.

pub mod cluster;
pub mod gmm;
pub mod preprocess;
pub mod tsne;

pub use cluster::{
    detect_model_transitions, detect_transitions, select_k, select_k_with_model, silhouette, smooth_islands,
    KSelection, Transition, TransitionSet,
};
pub use gmm::{gmm_fit, GmmModel};
pub use preprocess::{pca, standardize, standardize_matrix, Pca};
pub use tsne::{
    calibrate_sigmas, conditional_probabilities, joint_probabilities, kl_divergence, kl_gradient, output_probabilities,
    squared_distances, tsne, Embedding2D, TsneConfig, TsneInit,
};
