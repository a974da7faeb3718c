//! Minimal library usage: load a CSV, run the full pipeline, print the
//! estimate. Run as
//!
//!     cargo run --release --example fit_csv -- data.csv

use sparse_lingam::{load_csv, run_pipeline, CsvOptions, PipelineConfig};

fn main() -> sparse_lingam::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data.csv".into());
    // CsvOptions::default() expects a bare numeric CSV; the simulate
    // command's data.csv carries a header row
    let options = CsvOptions { has_header: true, ..CsvOptions::default() };
    let data = load_csv(path.as_ref(), options)?;
    let mut cfg = PipelineConfig::default();
    cfg.seed = 1;
    let result = run_pipeline(&data, &cfg)?;
    println!("selected alpha: {}", result.selected_alpha);
    println!("estimate:\n{}", result.estimate.b);
    for (i, v) in result.estimate.causal_order.iter().enumerate() {
        println!("position {}: x{}", i + 1, v + 1);
    }
    Ok(())
}
