//! Self-tuned kernel graph Laplacians on point clouds.
//!
//! Bandwidths come from k-nearest-neighbour distances, normalized so that
//! they estimate `p^{-1/d}` for the sampling density `p`. From them the
//! crate builds sparse affinity matrices, applies graph Laplacian
//! operators, and computes spectral embeddings. The [`experiments`] module
//! runs the convergence studies on synthetic curves.
//!
//! ```
//! use selftune::bandwidth::{knn_distances, normalize_bandwidth, Window};
//! use selftune::kernel::{build_selftuned, KernelSpec};
//! use selftune::manifold::{DensityProfile, Generator, ManifoldDataset};
//!
//! let data = ManifoldDataset::new(Generator::CircleR2, DensityProfile::uniform(), 1);
//! let x = data.sample_default(200).unwrap();
//! let bw = normalize_bandwidth(knn_distances(&x, &x, 10, true).unwrap(), 1, Window::Indicator).unwrap();
//! let w = build_selftuned(&x, &bw, &KernelSpec::selftuned_eps(1e-2, 1.0)).unwrap();
//! assert!(w.matrix.is_symmetric());
//! ```

pub mod bandwidth;
pub mod cloud;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod laplacian;
pub mod manifold;
pub mod profile;
pub mod sparse;
pub mod spatial;

pub use cloud::PointCloud;
pub use error::{Error, Result};
