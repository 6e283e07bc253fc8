//! Fixtures shared by the benchmarks.

use hmdp::io::generate::{chain_grid, token_model, ChainGridSpec, TokenLayout};
use hmdp::HierarchicalModel;

pub fn token() -> HierarchicalModel {
    token_model(TokenLayout::Reference, 3).expect("token model")
}

/// `levels x width` calls to a chain template of `chain_len` states.
pub fn grid(levels: usize, width: usize, chain_len: usize) -> HierarchicalModel {
    let spec = ChainGridSpec {
        levels,
        width,
        chain_len,
        seed: 1,
        fixed: None,
    };
    chain_grid(&spec).expect("chain grid")
}
