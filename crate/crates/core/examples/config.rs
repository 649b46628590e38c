//! Resolves a flat `key = value` config with a command-line override and
//! prints every setting with its source.

use mdmt::cli::resolve;
use mdmt::config::{format_log, RawConfig};

fn main() -> mdmt::Result<()> {
    let text = "\
# dotted keys, one per line
schedule.preset = desk
schedule.max_epochs = 40
model.conv_blocks = 4x3, 8x3
optimizer.learning_rate = 0.0005
";
    let mut raw = RawConfig::parse(text)?;
    raw.set_override("seed", 3);
    let settings = resolve(&raw)?;
    print!("{}", format_log(&settings.log));

    let bad = RawConfig::parse("schedule.warmup_epochs = 100\nmodel.conv_blocks = 4x\n")?;
    println!("\nrejected: {}", resolve(&bad).unwrap_err());
    Ok(())
}
