use crate::error::{Error, Result};

pub const BRIXIA_REGIONS: usize = 6;
pub const BRIXIA_MAX_GLOBAL: u32 = 18;

/// Sums six regional opacity grades (each 0–3) into a global score 0–18.
pub fn brixia_global_score(regional: &[u32]) -> Result<u32> {
    if regional.len() != BRIXIA_REGIONS {
        return Err(Error::Validation(format!(
            "expected {BRIXIA_REGIONS} regional scores, got {}",
            regional.len()
        )));
    }
    if let Some((i, v)) = regional.iter().enumerate().find(|(_, &v)| v > 3) {
        return Err(Error::Validation(format!(
            "regional score r{} = {v} is outside 0..=3",
            i + 1
        )));
    }
    Ok(regional.iter().sum())
}

/// Maps a global score to a severity category:
/// `G < 5 → 0`, `5 ≤ G < 9 → 1`, `9 ≤ G < 14 → 2`, `G ≥ 14 → 3`.
pub fn brixia_categorize(global: u32) -> Result<usize> {
    match global {
        0..=4 => Ok(0),
        5..=8 => Ok(1),
        9..=13 => Ok(2),
        14..=BRIXIA_MAX_GLOBAL => Ok(3),
        _ => Err(Error::Validation(format!(
            "global score {global} is outside 0..={BRIXIA_MAX_GLOBAL}"
        ))),
    }
}
