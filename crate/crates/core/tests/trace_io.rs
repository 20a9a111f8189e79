mod support;

use cyclo::io::{read_trace, trace_from_str, trace_to_string, write_trace};
use cyclo::{
    run_chains, run_dcg_chain, simulate_sem, ChainConfig, DataMatrix, Error, GaussianMixture,
    Graph, ModelKind, NoiseModel, WeightedSem,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn small_data() -> DataMatrix {
    let mut b = DMatrix::zeros(3, 3);
    b[(1, 0)] = 0.7;
    b[(2, 1)] = -0.4;
    let sem = WeightedSem::from_coefficients(b).unwrap();
    let mix = GaussianMixture::new(vec![0.5, 0.5], vec![-1.0, 1.0], vec![0.3, 0.3]).unwrap();
    let sim = simulate_sem(&sem, &NoiseModel::uniform(3, mix), 150, 9).unwrap();
    sim.data.standardize().unwrap().0
}

fn short_cfg(seed: u64) -> ChainConfig {
    ChainConfig {
        iterations: 400,
        burn_in: 100,
        thin: 3,
        seed,
        ..ChainConfig::default()
    }
}

#[test]
fn sampler_traces_round_trip_exactly() {
    let data = small_data();
    for kind in [ModelKind::Dag, ModelKind::Dcg] {
        let trace = run_chains(&data, &short_cfg(4), kind, 2).unwrap();
        let text = trace_to_string(&trace);
        let back = trace_from_str(&text).unwrap();
        assert_eq!(back, trace);
        assert_eq!(trace_to_string(&back), text);
    }
}

#[test]
fn identical_seeds_write_identical_files() {
    let data = small_data();
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    write_trace(&run_dcg_chain(&data, &short_cfg(7)).unwrap(), &a).unwrap();
    write_trace(&run_dcg_chain(&data, &short_cfg(7)).unwrap(), &b).unwrap();
    write_trace(&run_dcg_chain(&data, &short_cfg(8)).unwrap(), &c).unwrap();
    let read = |p: &std::path::Path| std::fs::read(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(read_trace(&a).unwrap(), run_dcg_chain(&data, &short_cfg(7)).unwrap());
}

#[test]
fn chain_zero_of_multi_chain_run_matches_single_chain() {
    let data = small_data();
    let single = cyclo::run_dag_chain(&data, &short_cfg(3)).unwrap();
    let multi = run_chains(&data, &short_cfg(3), ModelKind::Dag, 3).unwrap();
    assert_eq!(multi.len(), 3 * single.len());
    assert_eq!(&multi.samples[..single.len()], &single.samples[..]);
    assert!(multi.samples.windows(2).all(|w| w[0].chain <= w[1].chain));
}

#[test]
fn header_only_trace_is_valid() {
    let data = small_data();
    let mut trace = cyclo::run_dag_chain(&data, &short_cfg(1)).unwrap();
    trace.samples.clear();
    let back = trace_from_str(&trace_to_string(&trace)).unwrap();
    assert!(back.is_empty());
    assert_eq!(back.meta, trace.meta);
}

#[test]
fn corrupted_final_line_is_located() {
    let data = small_data();
    let text = trace_to_string(&cyclo::run_dag_chain(&data, &short_cfg(2)).unwrap());
    let lines = text.lines().count();
    let cut = &text[..text.len() - 20];
    match trace_from_str(cut) {
        Err(Error::TruncatedRecord { line, .. }) => assert_eq!(line, lines),
        other => panic!("expected TruncatedRecord, got {other:?}"),
    }
    // garbage in a middle line names that line
    let mut rows: Vec<&str> = text.lines().collect();
    rows[3] = "{\"iteration\": 5, \"chain\"";
    let broken = rows.join("\n") + "\n";
    assert!(matches!(trace_from_str(&broken), Err(Error::TruncatedRecord { line: 4, .. })));
}

#[test]
fn version_and_ordering_are_checked() {
    let trace = support::trace_from_graphs(&[Graph::from_edges(3, &[(0, 1), (0, 2)]).unwrap()]);
    let text = trace_to_string(&trace);
    let bumped = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
    assert!(matches!(
        trace_from_str(&bumped),
        Err(Error::VersionMismatch { expected: 1, found: 2 })
    ));
    // edges are [[1,0],[2,0]]; swap them
    assert!(text.contains("[[1,0],[2,0]]"));
    let unsorted = text.replacen("[[1,0],[2,0]]", "[[2,0],[1,0]]", 1);
    assert!(matches!(trace_from_str(&unsorted), Err(Error::MalformedRecord { line: 2, .. })));
}

fn arb_value() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -1e3f64..1e3,
        Just(5e-324),
        Just(-0.1 - 0.2),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn arbitrary_floats_survive(values in proptest::collection::vec(arb_value(), 6), gamma in 0.0f64..1.0) {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (2, 0), (0, 2), (1, 0), (2, 1)]).unwrap();
        let mut trace = support::trace_from_graphs(&[g]);
        let s = &mut trace.samples[0];
        let mut k = 0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    s.coefficients[(i, j)] = if values[k] == 0.0 { 1.0 } else { values[k] };
                    k += 1;
                }
            }
        }
        s.gamma = gamma;
        s.gamma1 = values[0].abs().max(1e-300);
        let back = trace_from_str(&trace_to_string(&trace)).unwrap();
        for (a, b) in back.samples[0].coefficients.iter().zip(trace.samples[0].coefficients.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(back, trace);
    }
}
