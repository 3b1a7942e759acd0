//! Parse a key = value run configuration, apply an override and print the
//! effective snapshot.
//!
//! cargo run -p sabia --example run_config

use std::path::Path;

use sabia::RunConfig;

fn main() {
    let text = "\
# tiny hybrid run
seed = 80
model = sabia
sabia.encoder = tiny
sabia.epochs = 3
split.train_fraction = 0.8
";
    let mut cfg = RunConfig::from_text(text, Path::new("/experiments/run1")).unwrap();
    cfg.set_override("sabia.kernels=2,3,5").unwrap();
    match RunConfig::from_text("sabia.depth = 4\n", Path::new(".")) {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!("unknown keys are rejected"),
    }
    print!("{}", cfg.to_text(&["example snapshot".into()]));
}
