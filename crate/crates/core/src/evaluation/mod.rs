//! Scores, fold schemes, cross-validation and paired comparisons.

mod cv;
mod folds;
mod scores;
mod stats;

pub use cv::{cross_val_score, CvScore};
pub use folds::{Fold, FoldKind, FoldScheme};
pub use scores::{accuracy, explained_variance, Score};
pub use stats::{paired_t_test, summarize, two_sided_p, PairedTTest, Summary};
