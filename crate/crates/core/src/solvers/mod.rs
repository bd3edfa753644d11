//! Numerical routines behind the explainers and the random forest.

mod cart;
mod em;
mod lasso;
mod linalg;

pub use cart::{cart_build, cart_path_predicates, DecisionTree, Node, TreeParams};
pub use em::{em_mixture_regression, EmOptions, MixtureRegressionModel};
pub use lasso::{lasso_cd, LassoFit};
pub use linalg::{weighted_least_squares, LinearFit, RegressionProblem};
