//! The `param-profile` subcommand: per-layer parameter counts of a zoo model.

use std::path::Path;

use bwft::error::Result;
use bwft::model::{build_backbone, head_rng, ZooEntry};

pub fn param_profile_csv(entry: ZooEntry, num_classes: usize) -> Result<String> {
    let mut model = build_backbone(entry, &[32, 32, 3], 0)?;
    model.attach_classifier(num_classes, &mut head_rng(0))?;
    let mut out = String::from("ordinal,name,kind,weighted,params\n");
    for (i, layer) in model.layers().iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{}\n",
            layer.name(),
            layer.spec().kind.label(),
            layer.weighted(),
            layer.param_count()
        ));
    }
    Ok(out)
}

pub fn cmd_param_profile(entry: ZooEntry, num_classes: usize, out: Option<&Path>) -> Result<()> {
    let csv = param_profile_csv(entry, num_classes)?;
    match out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}
