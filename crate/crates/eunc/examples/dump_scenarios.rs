//! Regenerate the checked-in scenario files from the built-in presets.
//!
//! Usage: cargo run -p eunc --example dump_scenarios -- <output-dir>

use eunc::presets;

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "scenarios".to_string());
    std::fs::create_dir_all(&dir)?;
    let mut specs = Vec::new();
    for k in 1..=7 {
        specs.push(presets::table1_case(k).unwrap());
    }
    for k in 1..=9 {
        specs.push(presets::table23_case(k).unwrap());
    }
    specs.push(presets::example1());
    specs.push(presets::example3());
    specs.push(presets::gaussian_noise_case1());
    for spec in specs {
        let path = format!("{dir}/{}.toml", spec.name);
        std::fs::write(&path, spec.to_toml_string())?;
        println!("wrote {path}");
    }
    Ok(())
}
