//! Evaluation and corpus-level analysis: topological and block metrics,
//! graph-level embeddings with PCA, k-means with elbow selection, and
//! street orientation histograms.

mod cluster;
mod metrics;
mod orientation;
mod pca;

pub use cluster::{
    cluster_summaries, elbow_curve, kmeans, ClusterResult, ClusterSummary, CountrySummary, ElbowCurve,
    DEFAULT_K, DEFAULT_MAX_ITER, ELBOW_RESTARTS,
};
pub use metrics::{block_metrics, ks_statistic, topo_metrics, BlockMetrics, BlockOptions, BlockReport, BlockRow, GraphMetrics};
pub use orientation::{orientation_histogram, OrientationHistogram, ORIENTATION_BINS};
pub use pca::{flatten_padded, graph_embedding, pca_fit, Pca, DEFAULT_EMBED_DIM, DEFAULT_NODE_CAP};
