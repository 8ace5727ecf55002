//! Byte-exact prompt rendering against a transcription of the published
//! example prompt.

use foldsearch_core::feedback::{
    build_feedback, render_colon_ranges, render_dash_ranges, FeedbackConfig,
};
use foldsearch_core::oracle::generate_reference_trace;
use foldsearch_core::prompt::assemble_prompt;
use foldsearch_core::seq::{
    contiguous_ranges, ReferenceContext, ResidueRange, Sequence, StepSizeRegime,
};
use foldsearch_core::structure::FidelityMetrics;
use foldsearch_core::RewardWeights;

const FIGURE: &str = include_str!("fixtures/prompt_figure.txt");

const DEVIATION: &[(usize, usize)] = &[
    (1, 29),
    (32, 41),
    (44, 44),
    (46, 53),
    (63, 64),
    (72, 74),
    (78, 125),
    (140, 157),
    (161, 212),
    (217, 267),
    (271, 286),
    (290, 308),
];

const LOW_PLDDT: &[(usize, usize)] = &[
    (111, 111),
    (121, 121),
    (137, 137),
    (139, 139),
    (180, 180),
    (196, 201),
    (204, 206),
    (212, 214),
    (216, 222),
    (224, 226),
    (228, 237),
    (239, 239),
    (247, 247),
    (251, 252),
    (255, 255),
    (257, 257),
    (262, 263),
    (265, 265),
    (267, 271),
    (287, 288),
    (290, 290),
    (292, 293),
    (318, 333),
    (335, 335),
    (339, 340),
    (345, 345),
    (351, 351),
];

fn mask(len: usize, ranges: &[(usize, usize)]) -> Vec<bool> {
    (1..=len)
        .map(|p| ranges.iter().any(|&(a, b)| a <= p && p <= b))
        .collect()
}

fn line_after(header: &str) -> &'static str {
    let mut lines = FIGURE.lines();
    lines.find(|l| l.starts_with(header)).expect("header");
    lines.next().expect("line after header")
}

fn figure_sequences() -> (Sequence, Sequence) {
    let native = line_after("We want to increase").trim_end_matches('.');
    let current = FIGURE
        .lines()
        .find_map(|l| l.strip_prefix("(str) protein_sequence="))
        .expect("variables line");
    (
        Sequence::new(native).unwrap(),
        Sequence::new(current).unwrap(),
    )
}

#[test]
fn example_prompt_is_reproduced_byte_for_byte() {
    let (native, current) = figure_sequences();
    let len = native.len();
    assert_eq!(len, 351);
    let dev_mask = mask(len, DEVIATION);
    let plddt_mask = mask(len, LOW_PLDDT);
    let metrics = FidelityMetrics {
        mean_plddt_01: 0.3,
        tm_score: 0.3,
        ca_rmsd: 9.0,
        per_residue_deviation: dev_mask
            .iter()
            .map(|&f| if f { 8.0 } else { 0.5 })
            .collect(),
        per_residue_plddt: plddt_mask
            .iter()
            .map(|&f| if f { 20.0 } else { 80.0 })
            .collect(),
    };
    let ctx = ReferenceContext::new(Some(native), generate_reference_trace(len), vec![]).unwrap();
    // A window of one renders the raw per-residue profile, which is what
    // the fixture ranges were written against.
    let cfg = FeedbackConfig {
        plddt_threshold: Some(35.0),
        deviation_window: 1,
        ..FeedbackConfig::default()
    };
    let bundle = build_feedback(&ctx, &current, &metrics, &RewardWeights::default(), &cfg);
    assert!(bundle.reward.total < 0.4);
    let prompt = assemble_prompt(&ctx, &current, StepSizeRegime::Drastic, &bundle, true);
    assert_eq!(prompt, FIGURE);
}

#[test]
fn four_sections_in_order() {
    let (_, current) = figure_sequences();
    let ctx = ReferenceContext::new(None, generate_reference_trace(current.len()), vec![]).unwrap();
    let metrics = FidelityMetrics {
        mean_plddt_01: 0.9,
        tm_score: 0.9,
        ca_rmsd: 1.0,
        per_residue_deviation: vec![0.0; current.len()],
        per_residue_plddt: vec![90.0; current.len()],
    };
    let bundle = build_feedback(
        &ctx,
        &current,
        &metrics,
        &RewardWeights::default(),
        &FeedbackConfig::default(),
    );
    let prompt = assemble_prompt(&ctx, &current, StepSizeRegime::Unconstrained, &bundle, true);
    let headers: Vec<&str> = prompt.lines().filter(|l| l.starts_with('#')).collect();
    assert_eq!(
        headers,
        ["#Instruction", "#Variables", "#Constraints", "#Feedback"]
    );
    assert!(prompt.starts_with(
        "#Instruction\nWe want to increase the structural fidelity of the proposed protein sequence.\nUse only"
    ));
}

#[test]
fn range_renderings_match_the_figure() {
    let feedback = line_after("#Feedback");
    let dev = contiguous_ranges(&mask(351, DEVIATION));
    let low = contiguous_ranges(&mask(351, LOW_PLDDT));
    assert!(feedback.contains(&format!(
        "(local average deviation >5.0 Å): {}.",
        render_dash_ranges(&dev)
    )));
    assert!(feedback.contains(&format!("structure: {}.", render_colon_ranges(&low))));
    assert_eq!(render_dash_ranges(&[ResidueRange::new(44, 44)]), "44-44");
    assert_eq!(
        render_colon_ranges(&[ResidueRange::new(111, 111)]),
        "111:111"
    );
}
