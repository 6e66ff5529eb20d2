//! Block partitions and the telescoping HSS / one-level SSS factor types.

mod block;
mod serialize;
mod telescoping;
mod validate;

pub use block::{hss_block_column, hss_block_row, BlockDiagonal, BlockPartition};
pub use serialize::{
    decode_factorization, decode_matrix, encode_factorization, encode_matrix, read_factorization,
    read_matrix, write_factorization, write_matrix, FORMAT_VERSION,
};
pub use telescoping::{LevelFactors, SssFactorization, TelescopingFactorization};
pub use validate::{max_block_tail_ratio, validate_hss_ranks};
