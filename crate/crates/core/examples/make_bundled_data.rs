//! Regenerates the bundled synthetic corpus:
//! `cargo run -p veracity-core --example make_bundled_data -- data/synthetic_pairs.csv`

use std::path::PathBuf;

use veracity_core::data::{synthetic, write_paired_csv};

pub const BUNDLED_SIZE: usize = 2000;
pub const BUNDLED_SEED: u64 = 1;

fn main() -> veracity_core::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map_or_else(|| PathBuf::from("data/synthetic_pairs.csv"), PathBuf::from);
    let pairs = synthetic::generate(BUNDLED_SIZE, BUNDLED_SEED);
    write_paired_csv(&out, &pairs)?;
    println!("wrote {} pairs to {}", pairs.len(), out.display());
    Ok(())
}
