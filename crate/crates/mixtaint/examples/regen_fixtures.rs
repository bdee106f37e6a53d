//! Regenerates the committed fixtures and golden files from the library so
//! they stay in lockstep with the emitters:
//!
//! ```text
//! cargo run --example regen_fixtures
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use mixtaint::{
    evaluate_suite, reference_chain_t1, render_report, save_calibration, save_chain, save_json,
    FeeRule, FilterCalibration, MixerScenario, ReportFormat, SampleCase, ShapePattern,
    WindowParams, build_index, DepositSpec,
};

/// Calibrations for the nine surveyed mixer services.
fn service_calibrations() -> BTreeMap<String, FilterCalibration> {
    let row = |c1, c2, c3, c4, c5| FilterCalibration {
        c1_fee: c1,
        c2_shape: c2,
        c3_chain_shape: c3,
        c4_no_reuse: c4,
        c5_constant_fee: c5,
    };
    let one_two = Some(ShapePattern::ONE_TO_TWO);
    [
        (
            "Blockchain.info",
            row(FeeRule::PercentBp(50), Some(ShapePattern::ONE_TO_ONE), one_two, true, Some(10_000)),
        ),
        (
            "Bitcoin Fog",
            row(FeeRule::PercentBp(100), one_two, one_two, true, Some(50_000)),
        ),
        (
            "BitLaundry",
            row(FeeRule::PercentBp(249), one_two, one_two, true, Some(50_000)),
        ),
        (
            "Unnamed 1",
            row(FeeRule::PercentBp(150), one_two, one_two, true, Some(10_000)),
        ),
        (
            "Unnamed 2",
            row(FeeRule::PercentBp(100), one_two, one_two, true, Some(10_000)),
        ),
        ("Bitlaunder", row(FeeRule::PercentBp(200), None, None, true, None)),
        ("Darklaunder", row(FeeRule::PercentBp(200), None, None, true, None)),
        (
            "Alphabay",
            row(FeeRule::FlatSat(10_000), one_two, None, false, None),
        ),
        (
            "Helix Light",
            row(FeeRule::PercentBp(200), Some(ShapePattern::ONE_TO_MANY), None, true, Some(50_000)),
        ),
    ]
    .into_iter()
    .map(|(name, cal)| (name.to_owned(), cal))
    .collect()
}

fn reference_mixer_calibration() -> BTreeMap<String, FilterCalibration> {
    [(
        "reference-mixer".to_owned(),
        FilterCalibration {
            c1_fee: FeeRule::PercentBp(200),
            c2_shape: Some(ShapePattern::ONE_TO_TWO),
            c3_chain_shape: Some(ShapePattern::ONE_TO_TWO),
            c4_no_reuse: true,
            c5_constant_fee: Some(1_000),
        },
    )]
    .into()
}

fn demo_scenario() -> MixerScenario {
    MixerScenario {
        seed: 7,
        background_tx_count: 400,
        deposits: vec![
            DepositSpec {
                value: 250_000,
                time: 3_600,
            },
            DepositSpec {
                value: 400_000,
                time: 10_800,
            },
        ],
        ..MixerScenario::default()
    }
}

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let fixtures = root.join("fixtures");
    let golden = root.join("tests/golden");
    fs::create_dir_all(&fixtures).unwrap();
    fs::create_dir_all(&golden).unwrap();

    save_calibration(fixtures.join("calibrations.json"), &service_calibrations()).unwrap();
    save_calibration(
        fixtures.join("t1_calibration.json"),
        &reference_mixer_calibration(),
    )
    .unwrap();

    let (txs, truth) = reference_chain_t1();
    save_chain(fixtures.join("t1_chain.jsonl"), &txs).unwrap();
    let case = SampleCase::from_truth("t1", "reference-mixer", &truth.cases[0]);
    save_json(fixtures.join("t1_case.json"), &case).unwrap();

    save_json(fixtures.join("demo_scenario.json"), &demo_scenario()).unwrap();

    let chain = build_index(txs).unwrap();
    let reports = evaluate_suite(
        &chain,
        &[case],
        &reference_mixer_calibration(),
        WindowParams::default(),
    )
    .unwrap();
    fs::write(
        golden.join("t1_report.txt"),
        render_report(&reports, ReportFormat::Table),
    )
    .unwrap();
    fs::write(
        golden.join("t1_report.jsonl"),
        render_report(&reports, ReportFormat::Jsonl),
    )
    .unwrap();

    println!("fixtures and golden files regenerated");
}
