//! German Credit with sex as the protected attribute: accuracy and
//! disparities over stratified 70/30 splits.

use std::path::Path;

use oim::experiments::{run_realdata, ExperimentConfig};

fn main() -> oim::Result<()> {
    let default = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/german_credit.yaml");
    let path = std::env::args().nth(1).unwrap_or_else(|| default.to_string());
    let config = ExperimentConfig::from_path(Path::new(&path))?;
    let results = run_realdata(&config, 0)?;
    println!("{}", results.to_table());
    Ok(())
}
