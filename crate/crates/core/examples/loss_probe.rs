//! Loss-distribution probe on the generated low/high-entropy corpora.
//!
//!     cargo run --release --example loss_probe -- [csv-dir]

use mgt_detect::probe::{probe_report, ProbeConfig};
use mgt_detect::synthetic::probe_corpus;

fn main() -> mgt_detect::Result<()> {
    let (human, machine) = probe_corpus(500, 11);
    let (train_h, val_h) = human.split_at(400);
    let (train_m, val_m) = machine.split_at(400);
    let start = std::time::Instant::now();
    let report = probe_report(train_h, train_m, val_h, val_m, &ProbeConfig::default())?;
    print!("{}", report.render_table());
    for (lm, h, m) in &report.final_train_loss {
        println!("{}: final train loss human {h:.4}, machine {m:.4}", lm.as_str());
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    if let Some(dir) = std::env::args().nth(1) {
        for p in report.write_csv(dir)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
