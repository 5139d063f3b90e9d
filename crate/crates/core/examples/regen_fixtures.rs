//! Rewrites the generated fixture files under `crates/core/fixtures`.
//!
//! cargo run -p uiddec-core --example regen_fixtures

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uiddec::fixtures::{self, DegradationInput};
use uiddec::TableModel;

fn paths(inputs: &[DegradationInput]) -> String {
    inputs.iter().map(|i| i.path.join(" ") + "\n").collect()
}

fn main() -> uiddec::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");

    let m3 = TableModel::from_spec(fixtures::m3_spec())?;
    m3.save(dir.join("m3.json"))?;
    let sources: String = (0..fixtures::M3_TARGET_SWITCH.len()).map(|i| fixtures::m3_source(i) + "\n").collect();
    fs::write(dir.join("m3.src"), sources)?;

    let mut rng = ChaCha8Rng::seed_from_u64(fixtures::DEGRADATION_SEED);
    let family = fixtures::degradation_family(&mut rng);
    TableModel::from_spec(family.spec)?.save(dir.join("degradation.json"))?;
    for (split, inputs) in [("valid", &family.valid), ("test", &family.test)] {
        fs::write(dir.join(format!("degradation.{split}.src")), paths(inputs))?;
        fs::write(dir.join(format!("degradation.{split}.ref")), paths(inputs))?;
    }
    Ok(())
}
