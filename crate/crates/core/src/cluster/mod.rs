//! K-modes clustering of categorical records and cluster-count selection.

mod kmodes;
mod select;

pub use kmodes::{
    cao_init, densities, distinct_count, hamming_dissimilarity, kmodes_fit, kmodes_from_modes,
    ClusterModel, KModesConfig,
};
pub use select::{
    elbow_k, select_k, silhouette, silhouette_subset, KScore, KSearchConfig, KSelection, QualityFn,
};

