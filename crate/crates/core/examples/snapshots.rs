//! Writing and reading field snapshots.

use kslab::snapshot::{self, decode_any, Snapshot, SnapshotField};
use kslab::spectral::gaussian;
use kslab::{RadialField, TorusField, TorusGrid};

fn main() -> kslab::Result<()> {
    let dir = std::env::temp_dir().join("kslab-snapshot-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("g.ksfd");
    let g = gaussian(TorusGrid::new(2, 32, 8.0)?, 1.0, 1.0);
    snapshot::save(&g, &path)?;
    let back: TorusField = snapshot::load(&path)?;
    println!("round trip exact: {}", back == g);

    let bytes = std::fs::read(&path)?;
    match decode_any(&bytes)? {
        Snapshot::Torus(f) => println!("torus snapshot, {} samples", f.grid().len()),
        Snapshot::Radial(_) => unreachable!(),
    }
    match snapshot::load::<RadialField>(&path) {
        Ok(_) => println!("unexpected"),
        Err(e) => println!("loading as radial: {e}"),
    }
    println!(
        "truncated: {}",
        TorusField::decode(&bytes[..bytes.len() - 3]).unwrap_err()
    );
    Ok(())
}
