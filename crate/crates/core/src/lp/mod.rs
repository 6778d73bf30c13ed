//! Nonhomogeneous Littlewood–Paley blocks `Δ_q`, cutoffs `S_q` and
//! decompositions of sampled fields.

mod blocks;
mod partition;

pub use blocks::{
    block_table, check_almost_orthogonality, check_product_support, decompose, delta_q, s_q, write_block_csv,
    BlockRow, DyadicDecomposition, OrthogonalityReport, ProductSupportReport,
};
pub(crate) use blocks::{block_hat, low_hat};
pub use partition::{build_partition, chi, phi, DyadicPartition, BALL_RADIUS, SHELL_INNER, SHELL_OUTER};
