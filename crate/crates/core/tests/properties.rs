mod common;

use std::sync::Mutex;

use agd::cut::{supervised_cut, unsupervised_cut_select, CutConfig};
use agd::estimators::{
    anova_select, brr_fit, enet_fit_with, svc_fit, BayesianRidge, BrrConfig, EnetConfig, Estimator, Fitted, SvcConfig,
};
use agd::evaluation::{accuracy, explained_variance, FoldScheme, Score};
use agd::parcellation::NodeSignals;
use agd::searchlight::sphere_neighbors;
use agd::simulation::gaussian_smooth;
use agd::{
    backproject_weights, build_connectivity, main_branches_cut, parcel_averages, ward_build, Adjacency,
    ConnectivityGraph, DataFormat, Dataset, Parcellation, Target, Task, VoxelGrid,
};
use common::{gaussian, gaussian_vec, random_graph};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 100,
        ..ProptestConfig::default()
    }
}

fn tree_and_data(seed: u64, max_p: usize, n: usize) -> (ConnectivityGraph, Array2<f64>, agd::Dendrogram) {
    let graph = random_graph(seed, max_p);
    let x = gaussian(n, graph.n_features(), seed, "prop-x");
    let tree = ward_build(x.view(), &graph).unwrap();
    (graph, x, tree)
}

fn assert_partition(parc: &Parcellation, p: usize) {
    assert_eq!(parc.labels().len(), p);
    assert_eq!(parc.sizes().iter().sum::<usize>(), p);
    let mut seen = vec![false; p];
    for k in 0..parc.n_parcels() {
        let members = parc.members(k);
        assert_eq!(members.len(), parc.sizes()[k]);
        assert!(!members.is_empty());
        for j in members {
            assert!(!seen[j]);
            seen[j] = true;
        }
    }
    assert!(seen.iter().all(|&s| s));
}

/// Records the targets of every fit so fold hygiene can be checked.
struct Spy {
    inner: BayesianRidge,
    seen: Mutex<Vec<Vec<u64>>>,
}

impl Estimator for Spy {
    fn name(&self) -> String {
        "spy".into()
    }

    fn task(&self) -> Task {
        Task::Regression
    }

    fn fit(&self, x: ArrayView2<f64>, y: &Target) -> agd::Result<Fitted> {
        let mut bits: Vec<u64> = y.as_continuous()?.iter().map(|v| v.to_bits()).collect();
        bits.sort_unstable();
        self.seen.lock().unwrap().push(bits);
        self.inner.fit(x, y)
    }
}

proptest! {
    #![proptest_config(config())]

    // ---- grid-data

    #[test]
    fn connectivity_symmetric_without_self_loops(
        dims in (1usize..5, 1usize..5, 1usize..4),
        mask_seed in any::<u64>(),
    ) {
        let (a, b, c) = dims;
        let cells = a * b * c;
        let mut mask: Vec<bool> = (0..cells).map(|i| (mask_seed >> (i % 64)) & 1 == 1 || i == 0).collect();
        mask[0] = true;
        let grid = VoxelGrid::with_mask([a, b, c], mask).unwrap();
        let g = build_connectivity(&grid, Adjacency::Face6).unwrap();
        for j in 0..g.n_features() {
            for &k in g.neighbors(j) {
                prop_assert_ne!(j, k);
                prop_assert!(g.neighbors(k).contains(&j));
            }
        }
    }

    #[test]
    fn dataset_round_trips_exactly(seed in any::<u64>(), n in 1usize..8, p in 1usize..6, labels in any::<bool>()) {
        let x = gaussian(n, p, seed, "rt-x");
        let y = if labels {
            Target::Labels((0..n as i64).map(|i| i % 3 - 1).collect())
        } else {
            Target::Continuous(gaussian_vec(n, seed, "rt-y"))
        };
        let groups = (seed % 2 == 0).then(|| (0..n as i64).map(|i| i / 2).collect());
        let ds = Dataset::new(x, y, groups).unwrap();
        prop_assert_eq!(&Dataset::from_csv(&ds.to_csv()).unwrap(), &ds);
        prop_assert_eq!(&Dataset::from_raw(&ds.to_raw()).unwrap(), &ds);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.bin");
        ds.save(&path, DataFormat::RawF64).unwrap();
        prop_assert_eq!(&Dataset::load(&path, DataFormat::RawF64).unwrap(), &ds);
    }

    // ---- ward-tree and parcellation

    #[test]
    fn tree_nodes_partition_their_leaves(seed in any::<u64>()) {
        let (_, _, tree) = tree_and_data(seed, 30, 4);
        let p = tree.n_leaves();
        prop_assert_eq!(tree.leaves(tree.root()), (0..p).collect::<Vec<_>>());
        for node in p..tree.node_count() {
            let (a, b) = tree.children(node).unwrap();
            let mut joined = tree.leaves(a);
            joined.extend(tree.leaves(b));
            joined.sort_unstable();
            prop_assert_eq!(joined, tree.leaves(node));
        }
    }

    #[test]
    fn main_branch_cuts_nest_and_partition(seed in any::<u64>()) {
        let (graph, _, tree) = tree_and_data(seed, 30, 4);
        let p = tree.n_leaves();
        let mut prev = main_branches_cut(&tree, 1).unwrap();
        prop_assert_eq!(prev.n_parcels(), 1);
        for k in 2..=p {
            let cut = main_branches_cut(&tree, k).unwrap();
            prop_assert_eq!(cut.n_parcels(), k);
            assert_partition(&cut, p);
            prop_assert!(cut.refines(&prev));
            for parcel in 0..k {
                prop_assert!(graph.is_connected_subset(&cut.members(parcel)));
            }
            prev = cut;
        }
    }

    #[test]
    fn refine_adds_exactly_one_parcel(seed in any::<u64>(), picks in proptest::collection::vec(any::<usize>(), 1..20)) {
        let (_, _, tree) = tree_and_data(seed, 30, 4);
        let p = tree.n_leaves();
        let mut parc = Parcellation::root(&tree);
        for pick in picks {
            let splittable: Vec<usize> = (0..parc.n_parcels()).filter(|&k| parc.sizes()[k] > 1).collect();
            if splittable.is_empty() {
                break;
            }
            let k = splittable[pick % splittable.len()];
            let next = parc.refine(k, &tree).unwrap();
            prop_assert_eq!(next.n_parcels(), parc.n_parcels() + 1);
            assert_partition(&next, p);
            prop_assert!(next.refines(&parc));
            for (j, &node) in next.parcel_nodes().iter().enumerate() {
                prop_assert_eq!(tree.leaves(node), next.members(j));
            }
            parc = next;
        }
    }

    #[test]
    fn averaging_commutes_with_row_selection(seed in any::<u64>(), k in 1usize..10, rows in proptest::collection::vec(0usize..8, 1..8)) {
        let (_, x, tree) = tree_and_data(seed, 20, 8);
        let parc = main_branches_cut(&tree, k.min(tree.n_leaves())).unwrap();
        let full = parcel_averages(x.view(), &parc).unwrap();
        let sub = parcel_averages(x.select(Axis(0), &rows).view(), &parc).unwrap();
        prop_assert_eq!(full.select(Axis(0), &rows), sub.clone());
        let signals = NodeSignals::new(x.view(), &tree).unwrap();
        let gathered = signals.gather(parc.parcel_nodes(), Some(&rows));
        for (a, b) in gathered.iter().zip(sub.iter()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn identity_partition_averages_are_identity(seed in any::<u64>()) {
        let (_, x, tree) = tree_and_data(seed, 20, 5);
        let leaves: Vec<usize> = (0..tree.n_leaves()).collect();
        let parc = Parcellation::from_nodes(&tree, &leaves).unwrap();
        prop_assert_eq!(parcel_averages(x.view(), &parc).unwrap(), x);
    }

    #[test]
    fn backprojection_sums_back_and_preserves_predictions(seed in any::<u64>(), k in 1usize..12) {
        let (_, x, tree) = tree_and_data(seed, 20, 6);
        let p = tree.n_leaves();
        let parc = main_branches_cut(&tree, k.min(p)).unwrap();
        let w = gaussian_vec(parc.n_parcels(), seed, "bp-w");
        let map = backproject_weights(w.view(), &parc, &VoxelGrid::line(p).unwrap()).unwrap();
        for parcel in 0..parc.n_parcels() {
            let s: f64 = parc.members(parcel).iter().map(|&j| map.values()[j]).sum();
            prop_assert!((s - w[parcel]).abs() < 1e-12);
        }
        let direct = parcel_averages(x.view(), &parc).unwrap().dot(&w);
        let expanded = x.dot(map.values());
        for (a, b) in direct.iter().zip(expanded.iter()) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    // ---- cut-search

    #[test]
    fn supervised_cut_nests_dominates_and_counts(seed in any::<u64>(), steps in 1usize..12) {
        let graph = random_graph(seed, 12);
        let p = graph.n_features();
        let x = gaussian(15, p, seed, "cut-x");
        let y = x.column(0).to_owned() + gaussian_vec(15, seed, "cut-y");
        let ds = Dataset::regression(x.clone(), y).unwrap();
        let tree = ward_build(x.view(), &graph).unwrap();
        let cfg = CutConfig {
            max_steps: steps,
            explore: FoldScheme::kfold(3, seed),
            select: FoldScheme::kfold(3, seed ^ 1),
            score: Score::ExplainedVariance,
        };
        let trace = supervised_cut(&ds, &tree, &BayesianRidge::default(), &cfg).unwrap();
        let expected_steps = steps.min(p - 1);
        prop_assert_eq!(trace.parcellations.len(), expected_steps);
        let mut prev = Parcellation::root(&tree);
        let mut fits = 0;
        for (d, parc) in trace.parcellations.iter().enumerate() {
            prop_assert_eq!(parc.n_parcels(), d + 2);
            prop_assert!(parc.refines(&prev));
            assert_partition(parc, p);
            for k in 0..parc.n_parcels() {
                prop_assert!(graph.is_connected_subset(&parc.members(k)));
            }
            let step = &trace.steps[d];
            let chosen = step.candidates.iter().find(|c| c.parcel == step.chosen_parcel).unwrap();
            for c in &step.candidates {
                let (cs, os) = (chosen.score.unwrap_or(f64::NEG_INFINITY), c.score.unwrap_or(f64::NEG_INFINITY));
                prop_assert!(cs >= os);
                if cs == os {
                    prop_assert!(step.chosen_parcel <= c.parcel);
                }
            }
            fits += 3 * step.candidates.len();
            prev = parc.clone();
        }
        fits += 3 * expected_steps;
        prop_assert_eq!(trace.fit_count, fits);
        if trace.skipped_singletons == 0 {
            prop_assert_eq!(trace.fit_count, agd::cut::expected_fit_count(expected_steps, 3, 3));
        }
        prop_assert!(trace.chosen_delta >= 1 && trace.chosen_delta <= expected_steps);
        let best = trace.selection_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(trace.selection_scores[trace.chosen_delta - 1], best);
        prop_assert!(trace.selection_scores[..trace.chosen_delta - 1].iter().all(|&s| s < best));
    }

    #[test]
    fn cut_fits_only_see_training_rows(seed in any::<u64>()) {
        let graph = ConnectivityGraph::chain(8);
        let x = gaussian(12, 8, seed, "hyg-x");
        let y = gaussian_vec(12, seed, "hyg-y");
        let ds = Dataset::regression(x.clone(), y.clone()).unwrap();
        let tree = ward_build(x.view(), &graph).unwrap();
        let explore = FoldScheme::kfold(3, seed);
        let select = FoldScheme::kfold(4, seed ^ 7);
        let allowed: Vec<Vec<u64>> = explore
            .folds(12, None)
            .unwrap()
            .into_iter()
            .chain(select.folds(12, None).unwrap())
            .map(|f| {
                let mut b: Vec<u64> = f.train.iter().map(|&i| y[i].to_bits()).collect();
                b.sort_unstable();
                b
            })
            .collect();
        let spy = Spy { inner: BayesianRidge::default(), seen: Mutex::new(Vec::new()) };
        let cfg = CutConfig { max_steps: 4, explore, select, score: Score::ExplainedVariance };
        supervised_cut(&ds, &tree, &spy, &cfg).unwrap();
        unsupervised_cut_select(&ds, &tree, &spy, &cfg).unwrap();
        for seen in spy.seen.lock().unwrap().iter() {
            prop_assert!(allowed.contains(seen));
        }
    }

    // ---- estimators

    #[test]
    fn enet_satisfies_kkt(seed in any::<u64>(), n in 5usize..30, p in 1usize..15, ratio in 0.0f64..1.0, l2 in 0.0f64..5.0) {
        let x = gaussian(n, p, seed, "kkt-x");
        let y = gaussian_vec(n, seed, "kkt-y") + x.column(0).mapv(|v| 2.0 * v);
        let xc = &x - &x.mean_axis(Axis(0)).unwrap();
        let yc = &y - y.mean().unwrap();
        let lmax = xc.t().dot(&yc).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let l1 = ratio * lmax;
        let tight = EnetConfig { tol: 1e-9, ..EnetConfig::default() };
        let model = enet_fit_with(x.view(), y.view(), l1, l2, &tight).unwrap();
        let w = model.coef();
        let r = &yc - &xc.dot(&w);
        let grad = xc.t().dot(&r);
        for j in 0..p {
            if w[j] == 0.0 {
                prop_assert!(grad[j].abs() <= l1 + 1e-5, "zero coord {j}: {} > {l1}", grad[j].abs());
            } else {
                let resid = grad[j] - l2 * w[j] - l1 * w[j].signum();
                prop_assert!(resid.abs() < 1e-5, "active coord {j}: residual {resid}");
            }
        }
    }

    #[test]
    fn brr_fit_state_is_valid(seed in any::<u64>(), n in 3usize..30, d in 1usize..10) {
        let x = gaussian(n, d, seed, "brr-x");
        let y = gaussian_vec(n, seed, "brr-y");
        let fit = brr_fit(x.view(), y.view(), &BrrConfig::default()).unwrap();
        prop_assert!(fit.alpha > 0.0 && fit.lambda > 0.0);
        prop_assert!(fit.gamma_eff >= 0.0 && fit.gamma_eff <= (d + 1) as f64 + 1e-9);
        for i in 0..=d {
            prop_assert!(fit.sigma[[i, i]] > 0.0);
            for j in 0..=d {
                prop_assert!((fit.sigma[[i, j]] - fit.sigma[[j, i]]).abs() <= 1e-12 * fit.sigma[[i, i]].abs().max(1.0));
            }
        }
    }

    #[test]
    fn svc_invariant_under_duplication(seed in any::<u64>(), n in 4usize..20, d in 1usize..5) {
        let x = gaussian(n, d, seed, "dup-x");
        let labels: Vec<i64> = (0..n).map(|i| if x[[i, 0]] + 0.3 * (i as f64).sin() > 0.0 { 1 } else { -1 }).collect();
        prop_assume!(labels.contains(&1) && labels.contains(&-1));
        let cfg = SvcConfig::with_c(1.0);
        let once = svc_fit(x.view(), &labels, &cfg).unwrap();
        let x2 = ndarray::concatenate(Axis(0), &[x.view(), x.view()]).unwrap();
        let l2: Vec<i64> = labels.iter().chain(&labels).copied().collect();
        let twice = svc_fit(x2.view(), &l2, &cfg).unwrap();
        let a = once.decision(x.view()).unwrap();
        let b = twice.decision(x.view()).unwrap();
        for (u, v) in a.iter().zip(b.iter()) {
            prop_assert!((u - v).abs() < 1e-6, "{u} vs {v}");
        }
    }

    #[test]
    fn anova_selection_invariances(seed in any::<u64>(), k in 1usize..6, scale in 0.01f64..100.0) {
        let x = gaussian(12, 6, seed, "an-x");
        let y = gaussian_vec(12, seed, "an-y");
        let a = anova_select(x.view(), &Target::Continuous(y.clone()), k).unwrap();
        let b = anova_select(x.view(), &Target::Continuous(y.mapv(|v| v * scale)), k).unwrap();
        prop_assert_eq!(a, b);
        let labels: Vec<i64> = (0..12).map(|i| i % 3).collect();
        let relabeled: Vec<i64> = labels.iter().map(|&l| [7, -2, 40][l as usize]).collect();
        prop_assert_eq!(
            anova_select(x.view(), &Target::Labels(labels), k).unwrap(),
            anova_select(x.view(), &Target::Labels(relabeled), k).unwrap()
        );
    }

    // ---- evaluation

    #[test]
    fn explained_variance_shift_invariant_and_bounded(seed in any::<u64>(), n in 2usize..40, shift in -100.0f64..100.0) {
        let y = gaussian_vec(n, seed, "ev-y");
        prop_assume!(y.iter().any(|&v| v != y[0]));
        let pred = gaussian_vec(n, seed, "ev-p");
        let a = explained_variance(y.view(), pred.view()).unwrap();
        let b = explained_variance((&y + shift).view(), (&pred + shift).view()).unwrap();
        prop_assert!(a <= 1.0);
        prop_assert!((a - b).abs() < 1e-8 * a.abs().max(1.0));
    }

    #[test]
    fn accuracy_invariant_under_relabeling(a in proptest::collection::vec(0i64..4, 1..30), seed in any::<u64>()) {
        let b: Vec<i64> = a.iter().enumerate().map(|(i, &v)| if (seed >> (i % 64)) & 1 == 1 { v } else { (v + 1) % 4 }).collect();
        let perm = [3i64, 0, 2, 1];
        let pa: Vec<i64> = a.iter().map(|&v| perm[v as usize]).collect();
        let pb: Vec<i64> = b.iter().map(|&v| perm[v as usize]).collect();
        prop_assert_eq!(accuracy(&a, &b).unwrap(), accuracy(&pa, &pb).unwrap());
    }

    #[test]
    fn folds_partition_samples(n in 2usize..60, k in 2usize..10, seed in any::<u64>(), n_groups in 2i64..6) {
        prop_assume!(k <= n);
        for fold_set in [
            FoldScheme::kfold(k, seed).folds(n, None).unwrap(),
            FoldScheme::leave_one_out().folds(n, None).unwrap(),
        ] {
            let mut count = vec![0; n];
            for f in &fold_set {
                prop_assert_eq!(f.train.len() + f.test.len(), n);
                for &i in &f.test {
                    count[i] += 1;
                    prop_assert!(!f.train.contains(&i));
                }
            }
            prop_assert!(count.iter().all(|&c| c == 1));
        }
        let groups: Vec<i64> = (0..n).map(|i| (i as i64 * 7 + seed as i64 % 5).rem_euclid(n_groups)).collect();
        let distinct = { let mut g = groups.clone(); g.sort_unstable(); g.dedup(); g.len() };
        prop_assume!(distinct >= 2);
        let folds = FoldScheme::leave_one_group_out().folds(n, Some(&groups)).unwrap();
        prop_assert_eq!(folds.len(), distinct);
        for f in &folds {
            let g = groups[f.test[0]];
            prop_assert!(f.test.iter().all(|&i| groups[i] == g));
            prop_assert!(f.train.iter().all(|&i| groups[i] != g));
        }
    }

    // ---- searchlight and simulation

    #[test]
    fn spheres_are_symmetric(dims in (1usize..6, 1usize..6, 1usize..6), r in 1.0f64..3.0) {
        let grid = VoxelGrid::full([dims.0, dims.1, dims.2]).unwrap();
        let spheres: Vec<Vec<usize>> = (0..grid.n_features()).map(|v| sphere_neighbors(&grid, v, r).unwrap()).collect();
        for (i, s) in spheres.iter().enumerate() {
            prop_assert!(s.contains(&i));
            for &j in s {
                prop_assert!(spheres[j].contains(&i));
            }
        }
    }

    #[test]
    fn smoothing_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0, sigma in 0.5f64..2.5) {
        let dims = [6, 5, 4];
        let v1 = gaussian_vec(120, seed, "sm-1");
        let v2 = gaussian_vec(120, seed, "sm-2");
        let mixed: Vec<f64> = v1.iter().zip(v2.iter()).map(|(p, q)| a * p + b * q).collect();
        let lhs = gaussian_smooth(&mixed, dims, sigma).unwrap();
        let s1 = gaussian_smooth(v1.as_slice().unwrap(), dims, sigma).unwrap();
        let s2 = gaussian_smooth(v2.as_slice().unwrap(), dims, sigma).unwrap();
        for i in 0..120 {
            prop_assert!((lhs[i] - (a * s1[i] + b * s2[i])).abs() < 1e-12);
        }
    }
}

#[test]
fn zeta_of_true_model_on_noiseless_holdout() {
    let x = gaussian(30, 5, 1, "resub-x");
    let w = Array1::from(vec![1.0, -2.0, 0.5, 0.0, 3.0]);
    let y = x.dot(&w);
    let ds = Dataset::regression(x.clone(), y.clone()).unwrap();
    let tree = ward_build(x.view(), &ConnectivityGraph::chain(5)).unwrap();
    let leaves: Vec<usize> = (0..5).collect();
    let trace_parc = Parcellation::from_nodes(&tree, &leaves).unwrap();
    let model = agd::cut::CutModel::fit(trace_parc, &ds, &BayesianRidge::default()).unwrap();
    let pred = model.predict(x.view()).unwrap();
    let z = Score::ExplainedVariance.evaluate(ds.y(), &pred).unwrap();
    assert!(z >= 0.99, "{z}");
}
