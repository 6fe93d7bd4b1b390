//! Regenerates the checked-in fixture corpus and its run configuration.
//!
//! Usage: `cargo run -p conserva-core --example gen_fixtures [ROOT]`
//! where ROOT defaults to the workspace `fixtures/` directory.

use std::path::PathBuf;

use conserva_core::corpus::write_demo_corpus;

fn main() -> std::io::Result<()> {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
    });

    write_demo_corpus(&root.join("corpus"))?;

    let config_dir = root.join("config");
    std::fs::create_dir_all(&config_dir)?;
    // Paths are config-file relative. The held-out sets reuse the training
    // documents: the corpus is small and the run is a demonstration, not a
    // measurement.
    let demo = r#"{
  "corpus": {
    "seeds": "../corpus/seeds",
    "benign": "../corpus/benign",
    "donor": "../corpus/donor.pdf",
    "test_malicious": "../corpus/seeds",
    "test_benign": "../corpus/benign"
  },
  "oracle": { "kind": "rule", "rules": "../corpus/rules.json" },
  "pipeline": { "depth_limit": 10, "beta": 3 },
  "learning": {
    "space": "sl2013",
    "train": { "reg": { "kind": "l2", "c": 4.0 }, "epochs": 200 },
    "attacks": [
      { "name": "coordinate-greedy", "kind": "coordinate_greedy" },
      {
        "name": "coordinate-greedy-frozen",
        "kind": "coordinate_greedy",
        "freeze_conserved": true
      },
      { "name": "salt-pepper", "kind": "salt_pepper" }
    ],
    "retrain": { "max_iterations": 6 }
  },
  "out": "out",
  "rng_seed": 7,
  "workers": 4
}
"#;
    std::fs::write(config_dir.join("demo.json"), demo)?;

    println!("fixtures written to {}", root.display());
    Ok(())
}
