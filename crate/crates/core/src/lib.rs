//! Rotation-invariant point-cloud features by aligning each local
//! neighborhood with the principal axes of a layer's weights.

pub mod error;
pub mod geometry;
pub mod linalg3;
pub mod neighbors;
pub mod procrustes;
pub mod synthdata;
pub mod toynet;
pub mod wfa;

pub use error::{Error, Result};
pub use geometry::{apply_rigid, validate_rotation, OrthogonalFrame, Point3, PointCloud, Rotation3, Seed};
pub use neighbors::{farthest_point_sample, knn, radius_neighbors, NeighborSet};
pub use wfa::{
    align_neighborhood, alignment_rotation, local_frame, weight_frame, wfa_feature_layer, AlignedNeighborhood,
    AxisOrder, LayerWeights, LocalFrame, WeightFrame, WfaConfig,
};
