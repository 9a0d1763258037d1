//! Trainable-parameter audit of every variant at both model sizes. Nothing is
//! allocated; counts come from the layouts.
//!
//!     cargo run --example param_audit

use mgt_detect::pipeline::{render_audit, variant_spec, Overrides, Preset, VariantName};

fn main() -> mgt_detect::Result<()> {
    for preset in [Preset::Base, Preset::Desk] {
        let rows = VariantName::ALL
            .iter()
            .map(|&v| variant_spec(v, preset, &Overrides::default()).map(|s| s.audit()))
            .collect::<mgt_detect::Result<Vec<_>>>()?;
        println!("{preset:?}");
        print!("{}", render_audit(&rows));
        println!();
    }
    Ok(())
}
