//! Print the generator × domain count grid for a JSONL corpus. Defaults to the
//! bundled 40-record fixture.
//!
//!     cargo run --example stats_table -- [path.jsonl]

use mgt_detect::corpus::{corpus_stats, load_jsonl};

fn main() -> mgt_detect::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/fixture.jsonl").to_string());
    let records = load_jsonl(&path)?;
    let stats = corpus_stats(&records);
    print!("{}", stats.render_table());
    println!("\n{} generators, {} domains", stats.generators().len(), stats.domains().len());
    Ok(())
}
