//! Regenerates the planted-sense fixtures under `fixtures/planted`.
//!
//!     cargo run -p wsi-cli --example make_fixtures [-- OUT_DIR]

use std::path::PathBuf;

fn main() -> wsi_core::Result<()> {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/planted"));
    wsi_cli::fixture_spec().generate().write_to(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}
