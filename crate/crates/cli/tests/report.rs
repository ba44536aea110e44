use vite_cli::harness::{run_experiment, RunSet};
use vite_cli::report::{
    aggregate_path, emit_csv, emit_plot, locate_aggregate, read_aggregate_csv, read_runs_csv, render_svg, series_from_rows,
    series_from_runset, Series,
};
use vite_cli::ExperimentSpec;

fn small_runset(methods: &str, record_every: u64, budget: u64) -> RunSet {
    let text = format!(
        r#"{{"name": "r", "dataset": {{"synthetic": {{"dim": 3, "mu": 0.2, "l": 3, "seed": 1}}}},
        "objective": {{"kind": "least_squares"}}, "budget": {budget}, "seeds": [0], "record_every": {record_every},
        "methods": [{methods}]}}"#
    );
    run_experiment(&ExperimentSpec::from_json(&text, ".").unwrap()).unwrap()
}

#[test]
fn one_trace_three_points_gives_three_rows() {
    let runs = small_runset(r#"{"method": "sgd", "eta0": 0.1, "t0": 10, "init_scale": 1}"#, 1, 2);
    assert_eq!(runs.configs[0].traces[0].points.len(), 3);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("runs.csv");
    let (csv, agg) = emit_csv(&runs, &path).unwrap();
    assert_eq!(agg, aggregate_path(&csv));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "method,config_id,seed,grad_evals,objective,wall_seconds");
    let agg_text = std::fs::read_to_string(&agg).unwrap();
    assert_eq!(agg_text.lines().next().unwrap(), "method,config_id,grad_evals,mean_objective,variance");
}

#[test]
fn csv_round_trips_exactly() {
    let runs = small_runset(
        r#"{"method": "sgd", "eta0": 0.1, "t0": 10, "init_scale": 1},
           {"method": "vite", "eta0": 0.05, "gamma": 0.1, "rho": 10, "inner": 10, "init_scale": 1}"#,
        3,
        600,
    );
    let dir = tempfile::tempdir().unwrap();
    let (csv, agg) = emit_csv(&runs, &dir.path().join("out/rt.csv")).unwrap();
    let rows = read_runs_csv(&csv).unwrap();
    let expected: Vec<(String, u64, u64, f64)> = runs
        .configs
        .iter()
        .flat_map(|c| c.traces.iter().flat_map(move |t| t.points.iter().map(move |p| (c.config_id.clone(), t.seed, p.grad_evals, p.objective))))
        .collect();
    assert_eq!(rows.len(), expected.len());
    for (r, (id, seed, g, f)) in rows.iter().zip(&expected) {
        assert_eq!((&r.config_id, r.seed, r.grad_evals), (id, *seed, *g));
        assert_eq!(r.objective.to_bits(), f.to_bits(), "{} vs {f}", r.objective);
    }
    assert_eq!(rows[0].method, "sgd");

    let agg_rows = read_aggregate_csv(&agg).unwrap();
    assert_eq!(agg_rows.len(), runs.configs.len() * runs.checkpoints.len());
    assert!(agg_rows.iter().all(|r| r.variance >= 0.0));
    let flat: Vec<f64> = runs.aggregates.iter().flatten().map(|p| p.mean).collect();
    assert!(agg_rows.iter().zip(&flat).all(|(r, m)| r.mean_objective.to_bits() == m.to_bits()));
}

#[test]
fn aggregate_variance_is_nonnegative_across_seeds() {
    let text = r#"{"name": "v", "dataset": {"synthetic": {"dim": 4, "mu": 0.1, "l": 4, "seed": 2}},
        "objective": {"kind": "least_squares"}, "budget": 2000,
        "methods": [{"method": "res", "eta0": 0.05, "t0": 30, "gamma": 0.1, "rho": 10, "curvature_batch": 2, "init_scale": 1}]}"#;
    let runs = run_experiment(&ExperimentSpec::from_json(text, ".").unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (_, agg) = emit_csv(&runs, &dir.path().join("v.csv")).unwrap();
    let rows = read_aggregate_csv(&agg).unwrap();
    assert!(rows.iter().all(|r| r.variance >= 0.0));
    assert!(rows.iter().any(|r| r.variance > 0.0));
}

#[test]
fn empty_inputs_are_refused() {
    let mut runs = small_runset(r#"{"method": "sgd", "eta0": 0.1, "t0": 10}"#, 1, 5);
    runs.configs.clear();
    runs.aggregates.clear();
    let dir = tempfile::tempdir().unwrap();
    let err = emit_csv(&runs, &dir.path().join("e.csv")).unwrap_err();
    assert!(err.to_string().contains("empty"));
    let err = render_svg(&[], "t").unwrap_err();
    assert!(err.to_string().contains("empty"), "{err}");

    let path = dir.path().join("blank.aggregate.csv");
    std::fs::write(&path, "method,config_id,grad_evals,mean_objective,variance\n").unwrap();
    let series = series_from_rows(&read_aggregate_csv(&path).unwrap());
    assert!(emit_plot(&series, "blank", &dir.path().join("blank.svg")).is_err());
}

#[test]
fn two_methods_give_two_legend_entries_on_log_axes() {
    let runs = small_runset(
        r#"{"method": "sgd", "eta0": 0.1, "t0": 10, "init_scale": 1},
           {"method": "svrg", "eta0": 0.05, "inner": 10, "init_scale": 1}"#,
        3,
        600,
    );
    let svg = render_svg(&series_from_runset(&runs), "two").unwrap();
    assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
    assert_eq!(svg.matches("class=\"legend-entry\"").count(), 2);
    assert_eq!(svg.matches("class=\"panel\"").count(), 1);
    // decade ticks on the y axis
    assert!(svg.contains(">1e0</text>") || svg.contains(">1e-1</text>"));
    assert!(svg.contains("<polygon"), "variance band");
}

#[test]
fn panels_follow_config_prefixes() {
    let series = |id: &str| Series { config_id: id.into(), points: vec![(0, 1.0, 0.0), (10, 0.1, 0.01)] };
    let all = [series("B=1:res"), series("B=1:vite"), series("B=2.5%:res"), series("B=2.5%:vite"), series("B=2.5%:sgd")];
    let svg = render_svg(&all, "t").unwrap();
    assert_eq!(svg.matches("class=\"panel\"").count(), 2);
    assert_eq!(svg.matches("class=\"legend-entry\"").count(), 5);
    assert!(svg.contains(">B=2.5%</text>"));
}

#[test]
fn plot_reads_back_emitted_csv() {
    let runs = small_runset(r#"{"method": "sgd", "eta0": 0.1, "t0": 10, "init_scale": 1}"#, 3, 300);
    let dir = tempfile::tempdir().unwrap();
    let (csv, agg) = emit_csv(&runs, &dir.path().join("p.csv")).unwrap();
    assert_eq!(locate_aggregate(&csv).unwrap(), agg);
    assert_eq!(locate_aggregate(&agg).unwrap(), agg);
    assert!(locate_aggregate(&dir.path().join("other.csv")).is_err());
    let series = series_from_rows(&read_aggregate_csv(&agg).unwrap());
    assert_eq!(series, series_from_runset(&runs));
    let out = dir.path().join("p.svg");
    emit_plot(&series, "p", &out).unwrap();
    assert!(std::fs::read_to_string(out).unwrap().ends_with("</svg>\n"));
}
