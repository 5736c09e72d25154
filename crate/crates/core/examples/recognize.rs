//! Cut labelled glyph patches out of tracked disc runs, train the spiking
//! classifier with BP-STDP and test it on patches from unseen runs.
//!
//! A small set is used so it finishes quickly; the full 200-per-class run
//! lives in the acceptance suite.

use vidar::recognizer::{
    evaluate, glyph_dataset, train_with, GlyphDatasetSpec, NeuronParams, SnnTopology, SnnWeights, TrainConfig,
};

fn main() -> vidar::Result<()> {
    let topo = SnnTopology::default();
    let spec = |seed, per_class| GlyphDatasetSpec {
        per_class,
        seed,
        ..GlyphDatasetSpec::default()
    };
    let train_set = glyph_dataset(&spec(1, 100), &topo)?;
    let test_set = glyph_dataset(&spec(2, 30), &topo)?;
    println!("{} training and {} test patches", train_set.len(), test_set.len());

    let mut w = SnnWeights::init(topo, NeuronParams::default(), 0)?;
    let cfg = TrainConfig {
        epochs: 15,
        ..TrainConfig::default()
    };
    train_with(&train_set, &mut w, &cfg, |s, w| {
        let held_out = evaluate(&test_set, w).map_or(f64::NAN, |r| r.accuracy);
        println!(
            "epoch {:2}: {:4} misfires, train {:.3}, held-out {:.3}",
            s.epoch, s.misfires, s.train_accuracy, held_out
        );
    })?;
    let report = evaluate(&test_set, &w)?;
    println!("held-out accuracy {:.3}", report.accuracy);
    for (label, row) in report.confusion.iter().enumerate() {
        println!("  {} -> {:?}", "PKU".chars().nth(label).unwrap(), row);
    }
    Ok(())
}
