mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sigcomm::community::{brute_force_partition, greedy_cnm, louvain, modularity, Partition};
use sigcomm::ingest::{filter_insufficient, read_price_panel, synthetic_dates, CsvOptions, PricePanel};
use sigcomm::matrix::SymMatrix;
use sigcomm::signature::{chen_concat, signature_of_points, TruncatedSignature};
use sigcomm::similarity::{similarity_cs, similarity_ed, similarity_rbf, FeatureMatrix, Gamma};
use sigcomm::spectral::eigh;

use common::{determinant, random_gain};

fn close(a: &TruncatedSignature, b: &TruncatedSignature, tol: f64) -> bool {
    a.words().zip(b.words()).all(|((_, x), (_, y))| (x - y).abs() <= tol * (1.0 + y.abs()))
}

fn path_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 2), 2..20)
}

fn features_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..8, 1usize..6).prop_flat_map(|(n, f)| {
        prop::collection::vec(prop::collection::vec(-3.0..3.0f64, f), n)
    })
}

fn symmetric_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..7).prop_flat_map(|n| {
        prop::collection::vec(-2.0..2.0f64, n * n).prop_map(move |v| {
            let mut rows = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..=i {
                    let x = v[i * n + j];
                    rows[i][j] = x;
                    rows[j][i] = x;
                }
            }
            rows
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn signature_is_translation_invariant(pts in path_strategy(), dx in -5.0..5.0f64, dy in -5.0..5.0f64) {
        let shifted: Vec<Vec<f64>> = pts.iter().map(|p| vec![p[0] + dx, p[1] + dy]).collect();
        let a = signature_of_points(&pts, 3).unwrap();
        let b = signature_of_points(&shifted, 3).unwrap();
        prop_assert!(close(&a, &b, 1e-12));
    }

    #[test]
    fn level_one_is_the_displacement(pts in path_strategy()) {
        let sig = signature_of_points(&pts, 2).unwrap();
        let last = pts.last().unwrap();
        prop_assert_eq!(sig.level(1), &[last[0] - pts[0][0], last[1] - pts[0][1]][..]);
    }

    #[test]
    fn signature_times_inverse_is_identity(pts in path_strategy()) {
        let sig = signature_of_points(&pts, 3).unwrap();
        let product = chen_concat(&sig, &sig.inverse()).unwrap();
        prop_assert!(close(&product, &TruncatedSignature::identity(2, 3), 1e-10));
    }

    #[test]
    fn reversed_path_gives_the_inverse(pts in path_strategy()) {
        let mut back = pts.clone();
        back.reverse();
        let forward = signature_of_points(&pts, 3).unwrap();
        let reverse = signature_of_points(&back, 3).unwrap();
        prop_assert!(close(&reverse, &forward.inverse(), 1e-10));
    }

    #[test]
    fn similarities_are_symmetric_and_bounded(rows in features_strategy()) {
        let f = FeatureMatrix::from_rows(rows.clone()).unwrap();
        let ed = similarity_ed(&f);
        for (i, j, v) in ed.upper_entries() {
            prop_assert!(v > 0.0 && v <= 1.0);
            prop_assert_eq!(v, ed.get(j, i));
        }
        if rows.iter().all(|r| r.iter().any(|x| *x != 0.0)) {
            let cs = similarity_cs(&f).unwrap();
            for (_, _, v) in cs.upper_entries() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
        if let Ok(rbf) = similarity_rbf(&f, Gamma::Median) {
            for (_, _, v) in rbf.upper_entries() {
                prop_assert!(v > 0.0 && v <= 1.0);
            }
        }
    }

    #[test]
    fn similarity_is_permutation_equivariant(rows in features_strategy(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rows.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let permuted: Vec<Vec<f64>> = perm.iter().map(|&p| rows[p].clone()).collect();
        let a = similarity_ed(&FeatureMatrix::from_rows(rows.clone()).unwrap());
        let b = similarity_ed(&FeatureMatrix::from_rows(permuted).unwrap());
        for i in 0..n {
            for j in 0..n {
                prop_assert!((b.get(i, j) - a.get(perm[i], perm[j])).abs() <= 1e-15);
            }
        }
        // a uniform column permutation leaves ED unchanged
        let mut cols: Vec<usize> = (0..rows[0].len()).collect();
        cols.shuffle(&mut rng);
        let swapped: Vec<Vec<f64>> = rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
        let c = similarity_ed(&FeatureMatrix::from_rows(swapped).unwrap());
        for i in 0..n {
            for j in 0..n {
                prop_assert!((c.get(i, j) - a.get(i, j)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn eigh_matches_trace_and_determinant(rows in symmetric_strategy()) {
        let m = SymMatrix::from_rows(&rows).unwrap();
        let eig = eigh(&m).unwrap();
        let scale = m.values().frobenius_norm().max(1.0);
        let trace: f64 = eig.values.iter().sum();
        prop_assert!((trace - m.values().trace()).abs() <= 1e-10 * scale);
        let product: f64 = eig.values.iter().product();
        let det = determinant(&rows);
        prop_assert!((product - det).abs() <= 1e-9 * scale.powi(rows.len() as i32));
        prop_assert!(eig.values.windows(2).all(|w| w[0] >= w[1]));
        let rec = eig.reconstruct().sub(m.values()).frobenius_norm();
        prop_assert!(rec <= 1e-10 * scale);
    }

    #[test]
    fn modularity_ignores_label_names(seed in any::<u64>(), n in 2usize..9, shift in 1usize..50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gain = random_gain(&mut rng, n);
        let labels: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % 3).collect();
        let renamed: Vec<usize> = labels.iter().map(|l| (l + shift) * 11).collect();
        prop_assert!((modularity(&gain, &labels) - modularity(&gain, &renamed)).abs() <= 1e-14);
    }

    #[test]
    fn optimum_is_permutation_equivariant(seed in any::<u64>(), n in 2usize..8) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gain = random_gain(&mut rng, n);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let a = brute_force_partition(&gain).unwrap();
        let b = brute_force_partition(&gain.permuted(&perm)).unwrap();
        prop_assert!((a.q - b.q).abs() <= 1e-12);
        // heuristics stay within the optimum and report consistent q
        for p in [louvain(&gain, None).partition, greedy_cnm(&gain).partition] {
            prop_assert!(p.q <= a.q + 1e-12);
            prop_assert!((p.q - modularity(&gain, &p.assignment)).abs() <= 1e-12);
        }
    }

    #[test]
    fn price_csv_round_trips(n in 1usize..5, t in 2usize..12, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tickers: Vec<String> = (0..n).map(|i| format!("T{i}")).collect();
        let values: Vec<Vec<Option<f64>>> = (0..n)
            .map(|_| (0..t).map(|k| (k == 0 || rng.random_bool(0.8)).then(|| rng.random_range(1.0..500.0))).collect())
            .collect();
        let panel = PricePanel::new(tickers, synthetic_dates(t), values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        panel.write_csv(&path).unwrap();
        let back = read_price_panel(std::fs::File::open(&path).unwrap(), &CsvOptions::default()).unwrap();
        prop_assert_eq!(&back, &panel);

        // cleaning is idempotent
        let once = filter_insufficient(&panel, 0.5);
        if let Ok(once) = once {
            prop_assert_eq!(once.missing_count(), 0);
            let twice = filter_insufficient(&once, 0.5).unwrap();
            prop_assert_eq!(twice, once);
        }
    }
}

#[test]
fn brute_force_same_grouping_survives_relabel() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let gain = random_gain(&mut rng, 6);
    let p = brute_force_partition(&gain).unwrap();
    let shifted: Vec<usize> = p.assignment.iter().map(|l| l + 5).collect();
    assert!(Partition::same_grouping(&p.assignment, &shifted));
    let q = Partition::from_labels(&gain, &shifted);
    assert_eq!(q.assignment, p.assignment);
}
