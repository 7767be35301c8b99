//! Retrains the embedded tagger model from `data/tagger_corpus.tsv`.
//!
//! Usage: cargo run --release --example train_builtin -- [EPOCHS] [SEED]

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use fgrain::tagger::{read_tagged_corpus, train_tagger, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let epochs = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20240611);
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let corpus = read_tagged_corpus(BufReader::new(File::open(root.join("data/tagger_corpus.tsv"))?))?;
    let cfg = TrainConfig { epochs, seed, holdout_fraction: 0.1 };
    let (_, report) = train_tagger(&corpus, &cfg)?;
    println!("held-out check: {report:?}");
    let full = TrainConfig { holdout_fraction: 0.0, ..cfg };
    let (model, report) = train_tagger(&corpus, &full)?;
    println!("final: {report:?}, {} features", model.feature_count());
    model.save(root.join("data/tagger_model.json"))?;
    Ok(())
}
