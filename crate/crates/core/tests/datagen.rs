mod common;

use std::fs;

use common::sensor;
use gsr_core::data::{add_awgn, gen_signal, generate, load_csv_dataset, CsvGraphConfig, Dataset, SignalKind, Splits, SynthSpec};
use gsr_core::graph::extract_subgraph;
use gsr_core::linalg::rmse;
use gsr_core::partition::{partition, Partition};
use gsr_core::spectral::eigendecompose;
use gsr_core::{Error, Graph, SigmaMode, SynthKind};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

fn dense_laplacian(g: &Graph) -> DMatrix<f64> {
    let n = g.n_nodes();
    let mut l = DMatrix::zeros(n, n);
    for &(i, j, w) in g.edges() {
        l[(i, i)] += w;
        l[(j, j)] += w;
        l[(i, j)] -= w;
        l[(j, i)] -= w;
    }
    l
}

/// Energy of `x` outside the span of the `count` lowest eigenvectors of `g`.
fn out_of_band_residual(g: &Graph, x: &[f64], count: usize) -> f64 {
    let eig = SymmetricEigen::new(dense_laplacian(g));
    let mut order: Vec<usize> = (0..g.n_nodes()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let x = DVector::from_column_slice(x);
    let mut r = x.clone();
    for &k in order.iter().take(count) {
        let u = eig.eigenvectors.column(k);
        r -= u * u.dot(&x);
    }
    r.norm()
}

#[test]
fn pws_is_piecewise_bandlimited() {
    let g = sensor(150, 4);
    let part = partition(&g, 8, 4).unwrap();
    for seed in 0..5 {
        let x = gen_signal(SignalKind::Pws, &g, Some(&part), seed).unwrap();
        for c in 0..part.k() {
            let members = part.members(c);
            let (sub, _) = extract_subgraph(&g, &members).unwrap();
            let xs: Vec<f64> = members.iter().map(|&i| x[i]).collect();
            let r = out_of_band_residual(&sub, &xs, 3);
            assert!(r < 1e-9, "seed {seed} cluster {c}: {r}");
        }
    }
}

#[test]
fn pws_three_node_cluster_lies_in_its_eigenbasis() {
    let g = sensor(20, 1);
    let mut labels = vec![1; 20];
    for i in [0, 1, 2] {
        labels[i] = 0;
    }
    let part = Partition::new(labels, 2).unwrap();
    let x = gen_signal(SignalKind::Pws, &g, Some(&part), 3).unwrap();
    let (sub, _) = extract_subgraph(&g, &[0, 1, 2]).unwrap();
    assert!(out_of_band_residual(&sub, &x[..3], 3) < 1e-9);
}

#[test]
fn gs_satisfies_smoothness_bound() {
    let g = sensor(100, 6);
    let d = eigendecompose(&g.laplacian()).unwrap();
    let lambda5 = d.values()[4];
    let l = g.laplacian();
    for seed in 0..10 {
        let x = gen_signal(SignalKind::Gs, &g, None, seed).unwrap();
        let energy: f64 = x.iter().zip(l.matvec(&x)).map(|(a, b)| a * b).sum();
        let norm2: f64 = x.iter().map(|v| v * v).sum();
        assert!(energy <= lambda5 * norm2 + 1e-6, "seed {seed}: {energy} > {}", lambda5 * norm2);
        assert!(out_of_band_residual(&g, &x, 5) < 1e-8);
    }
}

#[test]
fn awgn_noise_level_matches_sigma() {
    let g = synth_gen_graph();
    let part = partition(&g, 3, 0).unwrap();
    let errs: Vec<f64> = (0..50)
        .map(|s| {
            let x = gen_signal(SignalKind::Pwc, &g, Some(&part), s).unwrap();
            rmse(&add_awgn(&x, 0.5, s).unwrap(), &x)
        })
        .collect();
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    assert!((0.47..=0.52).contains(&mean), "{mean}");
}

fn synth_gen_graph() -> Graph {
    gsr_core::synth_graph(SynthKind::community(3), 250, 0).unwrap().graph
}

fn splits(train: usize, valid: usize, test: usize) -> Splits {
    Splits { train, valid, test }
}

#[test]
fn csv_ingest_smallest_case() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = dir.path().join("nodes.csv");
    let signals = dir.path().join("signals.csv");
    fs::write(&nodes, "id,x,y\na,0,0\nb,1,0\nc,0,1\n").unwrap();
    fs::write(&signals, "sample_id,c,a,b\n0,3.5,1.5,2.5\n1,-1,0.25,7\n").unwrap();
    let cfg = CsvGraphConfig { k: 2, weight: SigmaMode::MeanDistance };
    let (g, ds) = load_csv_dataset(&nodes, &signals, cfg, splits(1, 0, 1)).unwrap();
    assert_eq!(g.n_nodes(), 3);
    assert_eq!(ds.samples.len(), 2);
    assert_eq!(ds.samples[0].clean, vec![1.5, 2.5, 3.5]);
    assert_eq!(ds.samples[1].clean, vec![0.25, 7.0, -1.0]);
}

#[test]
fn csv_ingest_reports_bad_row() {
    let dir = tempfile::tempdir().unwrap();
    let nodes = dir.path().join("nodes.csv");
    let signals = dir.path().join("signals.csv");
    fs::write(&nodes, "id,x,y\na,0,0\nb,1,0\nc,0,1\n").unwrap();
    fs::write(&signals, "sample_id,a,b,c\n0,1,2,3\n1,4,5\n").unwrap();
    let cfg = CsvGraphConfig { k: 2, weight: SigmaMode::MeanDistance };
    let err = load_csv_dataset(&nodes, &signals, cfg, splits(2, 0, 0)).unwrap_err();
    assert!(matches!(err, Error::Parse { .. }), "{err}");
    assert!(err.to_string().contains("row 2"), "{err}");

    fs::write(&signals, "sample_id,a,b,c\n0,1,2,3\n1,4,x,6\n").unwrap();
    let err = load_csv_dataset(&nodes, &signals, cfg, splits(2, 0, 0)).unwrap_err();
    assert!(err.to_string().contains("row 2"), "{err}");

    fs::write(&signals, "sample_id,a,b,zz\n0,1,2,3\n").unwrap();
    assert!(load_csv_dataset(&nodes, &signals, cfg, splits(1, 0, 0)).is_err());
}

fn small_spec(missing_rate: f64) -> SynthSpec {
    SynthSpec {
        graph: SynthKind::sensor(),
        n: 40,
        signal: SignalKind::Pws,
        clusters: Some(4),
        sigma: 0.3,
        missing_rate,
        splits: splits(6, 2, 2),
        perturbed: false,
    }
}

#[test]
fn bundle_round_trip_is_bitwise() {
    for (rate, perturbed) in [(0.0, false), (0.3, false), (0.0, true)] {
        let mut spec = small_spec(rate);
        spec.perturbed = perturbed;
        let ds = generate(&spec, 17).unwrap();
        let dir = tempfile::tempdir().unwrap();
        ds.save_bundle(dir.path()).unwrap();
        let back = Dataset::load_bundle(dir.path()).unwrap();
        assert_eq!(back, ds);
    }
}

#[test]
fn exported_signals_reingest_through_csv() {
    let ds = generate(&small_spec(0.0), 3).unwrap();
    let g = &ds.graphs[0];
    let dir = tempfile::tempdir().unwrap();
    let nodes = dir.path().join("nodes.csv");
    let signals = dir.path().join("signals.csv");
    let mut text = String::from("id,x,y\n");
    for (i, c) in g.coords().unwrap().iter().enumerate() {
        text += &format!("n{i},{},{}\n", c[0], c[1]);
    }
    fs::write(&nodes, text).unwrap();
    let mut text = String::from("sample_id");
    for i in 0..g.n_nodes() {
        text += &format!(",n{i}");
    }
    text.push('\n');
    for (s, sample) in ds.samples.iter().enumerate() {
        text += &s.to_string();
        for v in &sample.clean {
            text += &format!(",{v}");
        }
        text.push('\n');
    }
    fs::write(&signals, text).unwrap();
    let cfg = CsvGraphConfig { k: 6, weight: SigmaMode::MeanDistance };
    let (g2, back) = load_csv_dataset(&nodes, &signals, cfg, ds.meta.splits).unwrap();
    assert_eq!(g2.edges(), g.edges());
    for (a, b) in back.samples.iter().zip(&ds.samples) {
        assert_eq!(a.clean, b.clean);
    }
}

#[test]
fn generation_metadata_regenerates_samples() {
    let ds = generate(&small_spec(0.3), 8).unwrap();
    let spec = ds.meta.synth.clone().unwrap();
    assert_eq!(generate(&spec, ds.meta.seed).unwrap(), ds);
    for s in &ds.samples {
        let mask = s.mask.as_ref().unwrap();
        for (i, &o) in mask.iter().enumerate() {
            if !o {
                assert_eq!(s.degraded[i], 0.0);
            }
        }
    }
}
