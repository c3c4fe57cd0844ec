//! Clustering evaluation and k-means.

mod hungarian;
mod kmeans;
mod scores;

pub use hungarian::{assignment_cost, hungarian};
pub use kmeans::{kmeans, KMeansResult};
pub use scores::{acc, ari, evaluate, nmi, ContingencyTable, Scores};
