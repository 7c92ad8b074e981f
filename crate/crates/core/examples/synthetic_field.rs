//! Writes a synthetic field as `wells.csv` and `picks.csv`.
//!
//! ```text
//! cargo run -p topsrec-core --example synthetic_field -- <out_dir> [n_wells] [n_tops] [pick_rate] [seed]
//! ```

use std::path::PathBuf;

use topsrec_core::synthetic::{layered_field, FieldSpec};

fn main() -> std::io::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(out) = args.first().map(PathBuf::from) else {
        eprintln!("usage: synthetic_field <out_dir> [n_wells] [n_tops] [pick_rate] [seed]");
        std::process::exit(2);
    };
    let d = FieldSpec::default();
    let arg = |k: usize| args.get(k).map(|s| s.as_str());
    let spec = FieldSpec {
        n_wells: arg(1).map_or(d.n_wells, |s| s.parse().expect("n_wells")),
        n_tops: arg(2).map_or(d.n_tops, |s| s.parse().expect("n_tops")),
        pick_rate: arg(3).map_or(d.pick_rate, |s| s.parse().expect("pick_rate")),
        seed: arg(4).map_or(d.seed, |s| s.parse().expect("seed")),
        ..d
    };
    let field = layered_field(&spec);
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("wells.csv"), field.wells_csv())?;
    std::fs::write(out.join("picks.csv"), field.picks_csv())?;
    println!(
        "{} wells, {} picks -> {}",
        field.tables.wells.len(),
        field.tables.picks.len(),
        out.display()
    );
    Ok(())
}
