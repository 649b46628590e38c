mod common;

use common::oracles::brixia_oracle;
use mdmt::data::{brixia_categorize, brixia_global_score, BRIXIA_MAX_GLOBAL};


#[test]
fn all_global_scores_match_the_threshold_oracle() {
    for g in 0..=BRIXIA_MAX_GLOBAL {
        assert_eq!(brixia_categorize(g).unwrap(), brixia_oracle(g), "G = {g}");
    }
    for (below, above, cat) in [(4, 5, 1), (8, 9, 2), (13, 14, 3)] {
        assert_eq!(brixia_categorize(below).unwrap(), cat - 1);
        assert_eq!(brixia_categorize(above).unwrap(), cat);
    }
    assert!(brixia_categorize(19).is_err());
}

#[test]
fn every_regional_grading_sums_and_categorizes() {
    let mut seen = [0usize; 4];
    for code in 0..4u32.pow(6) {
        let regions: Vec<u32> = (0..6).map(|i| (code / 4u32.pow(i)) % 4).collect();
        let g = brixia_global_score(&regions).unwrap();
        assert_eq!(g, regions.iter().sum::<u32>());
        seen[brixia_categorize(g).unwrap()] += 1;
    }
    assert!(seen.iter().all(|&n| n > 0));
    assert!(brixia_global_score(&[0, 0, 0, 0, 0, 4]).is_err());
    assert!(brixia_global_score(&[0, 0, 0]).is_err());
}
