//! Evaluation mathematics: rank AUC, Cohen's κ, annotator agreement and seed-level statistics.

mod agreement;
mod auc;
mod kappa;
mod stats;

pub use agreement::{pairwise_agreement, PairwiseAgreement};
pub use auc::{roc_auc, stratified_auc, AucResult};
pub use kappa::{annotator_kappa_reference, cohens_kappa, kappa_sweep, AnnotatorKappaReference, KappaSweep};
pub use stats::{
    ln_gamma, regularized_incomplete_beta, student_t_two_sided_p, summarize_seeds, t_test_two_sample, top_k_mean_auc,
    SeedSummary, TTest, P_VALUE_FLOOR,
};
