//! Regenerates the bundled data files under `data/`.
//!
//! cargo run -p rebasesim --example gen_fixtures

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rebasesim::histdata::{synthetic, write_history};
use rebasesim::sweep::{sweep_grid, GridSpec};
use rebasesim::{LossWeights, MarketParams};

fn main() -> std::io::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");

    write_history(
        &synthetic::history(),
        BufWriter::new(File::create(data.join("synthetic_ampl.csv"))?),
    )?;

    let path = synthetic::path();
    let mut series = BufWriter::new(File::create(data.join("synthetic_ampl_series.csv"))?);
    writeln!(series, "t,dP,dS")?;
    for (t, (dp, ds)) in path.d_price.iter().zip(&path.d_supply).enumerate() {
        writeln!(series, "{},{},{}", t + 1, dp, ds)?;
    }

    let market = MarketParams::new(0.0, 0.05, 100e6, 100).unwrap();
    let grid = GridSpec::default_grid(1.0).unwrap();
    let surface = sweep_grid(&market, &grid, LossWeights::new(1.0).unwrap(), 200, 7).unwrap();
    surface.write_csv(BufWriter::new(File::create(data.join("golden_surface.csv"))?))?;
    Ok(())
}
