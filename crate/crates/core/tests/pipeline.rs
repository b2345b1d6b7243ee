use std::collections::BTreeSet;

use proptest::prelude::*;
use wildfire_rnn::firegraph::{compute_stats, GraphParams};
use wildfire_rnn::ingest::{parse_detections, write_detections, BoundingBox, ColumnMap, ParseOptions};
use wildfire_rnn::pipeline::reconstruct;
use wildfire_rnn::sequence::{make_multiclass, Dataset, Task, MAX_LW, MIN_LW};
use wildfire_rnn::synth::{synth_generate, SynthOutput, SynthSpec};

/// Generated detections, written and parsed back, then grouped into fires.
fn round_trip(spec: &SynthSpec) -> (SynthOutput, Vec<Vec<u64>>) {
    let out = synth_generate(spec).unwrap();
    let mut csv = Vec::new();
    write_detections(&mut csv, &out.detections).unwrap();
    let parsed = parse_detections(csv.as_slice(), &ColumnMap::default(), ParseOptions::default()).unwrap();
    assert_eq!(parsed.detections, out.detections);
    let rec = reconstruct(&parsed.detections, &BoundingBox::SOUTH_AFRICA, &GraphParams::default()).unwrap();
    let fires = rec.fires.iter().map(|f| f.ids().collect()).collect();
    (out, fires)
}

fn as_partition(fires: &[Vec<u64>]) -> BTreeSet<Vec<u64>> {
    fires.iter().cloned().collect()
}

#[test]
fn hundred_fires_recovered() {
    let spec = SynthSpec {
        n_fires: 100,
        length_min: 1,
        length_max: 6,
        seed: 21,
        ..SynthSpec::default()
    };
    let (out, fires) = round_trip(&spec);
    assert_eq!(fires.len(), 100);
    let expected: Vec<Vec<u64>> = out
        .fires
        .iter()
        .map(|f| f.iter().map(|&i| i as u64).collect())
        .collect();
    assert_eq!(as_partition(&fires), as_partition(&expected));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_fires_round_trip(
        seed in any::<u64>(),
        n in 1usize..80,
        lo in 1usize..=9,
        span in 0usize..9,
        p_stay in 0.0f64..=1.0,
    ) {
        let spec = SynthSpec {
            n_fires: n,
            length_min: lo,
            length_max: (lo + span).min(9),
            step_max_m: 375.0,
            cadence_max_s: 21_600,
            p_stay,
            seed,
            ..SynthSpec::default()
        };
        let (out, fires) = round_trip(&spec);
        // same partition and same order inside each fire
        let expected: Vec<Vec<u64>> = out.fires.iter().map(|f| f.iter().map(|&i| i as u64).collect()).collect();
        prop_assert_eq!(as_partition(&fires), as_partition(&expected));
    }
}

#[test]
fn persistent_walks_plant_the_label() {
    let spec = SynthSpec {
        n_fires: 150,
        length_min: 3,
        length_max: 3,
        p_stay: 1.0,
        seed: 3,
        ..SynthSpec::default()
    };
    let out = synth_generate(&spec).unwrap();
    let rec = reconstruct(&out.detections, &BoundingBox::SOUTH_AFRICA, &GraphParams::default()).unwrap();
    let set = make_multiclass(&rec.fires, 3).unwrap();
    assert_eq!(set.samples.len(), 150);
    for s in &set.samples {
        // layout: 160 point features, d_0 = 0, d_1
        assert_eq!(s.input[160], 0.0);
        assert_eq!(s.input[161], f64::from(s.label.code()));
    }
}

#[test]
fn dataset_dimensions_follow_length() {
    let spec = SynthSpec {
        n_fires: 300,
        length_min: 1,
        length_max: 9,
        seed: 8,
        ..SynthSpec::default()
    };
    let out = synth_generate(&spec).unwrap();
    let rec = reconstruct(&out.detections, &BoundingBox::SOUTH_AFRICA, &GraphParams::default()).unwrap();
    let stats = compute_stats(&rec.fires).unwrap();
    assert_eq!(stats.n_fires, 300);
    for lw in MIN_LW..=MAX_LW {
        let binary = Dataset::build(&rec.fires, Task::Binary, lw).unwrap();
        let multi = Dataset::build(&rec.fires, Task::Multiclass, lw).unwrap();
        assert!(binary.inputs.iter().all(|x| x.len() == 80 * (lw - 1)));
        assert!(multi.inputs.iter().all(|x| x.len() == 81 * (lw - 1)));
        let exact = rec.fires.iter().filter(|f| f.len() == lw).count();
        let shorter = rec.fires.iter().filter(|f| f.len() == lw - 1).count();
        assert_eq!(binary.len(), exact + shorter);
        assert_eq!(multi.len(), exact);
    }
}
