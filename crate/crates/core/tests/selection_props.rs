use poolcv::dataset::{
    stratified_holdout, stratified_kfold, synthesize_dataset, Dataset, SynthConfig,
};
use poolcv::rng::{self, Purpose};
use poolcv::selection::{
    build_loss_table, enumerate_subsets, finalize_model, pool_losses, run_recipe, select_classic,
    select_pooled, train_machine, FeatureSubset, LossTable, Recipe,
};
use poolcv::svm::TrainConfig;
use poolcv::{FoldAssignment, HoldoutSplit};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PLANTED: usize = 5;

fn planted_dataset(seed: u64) -> Dataset {
    synthesize_dataset(&SynthConfig {
        planted: vec![(PLANTED, 6.0)],
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn split_and_folds(ds: &Dataset, seed: u64) -> (HoldoutSplit, FoldAssignment) {
    let split = stratified_holdout(
        ds.labels(),
        0.3,
        &mut rng::stream(seed, Purpose::Holdout, 0),
    )
    .unwrap();
    let folds = stratified_kfold(
        ds.labels(),
        &split.dev_indices,
        5,
        &mut rng::stream(seed, Purpose::Folds, 0),
    )
    .unwrap();
    (split, folds)
}

#[test]
fn table_shape_and_granularity() {
    let ds = planted_dataset(1);
    let (split, folds) = split_and_folds(&ds, 1);
    let subsets = enumerate_subsets(16, 2).unwrap();
    let table =
        build_loss_table(&ds, &split, &folds, &subsets, &TrainConfig::default(), true).unwrap();
    assert_eq!(table.k(), 5);
    assert_eq!(table.subsets().len(), 136);
    assert_eq!(table.val_counts(), &[8; 5]);
    assert_eq!(
        table.val_counts().iter().sum::<usize>(),
        split.dev_indices.len()
    );
    for k in 0..5 {
        for s in 0..136 {
            let scaled = table.loss(k, s) * 8.0;
            assert_eq!(scaled, scaled.round());
        }
    }
}

#[test]
fn pooled_loss_equals_direct_error_count() {
    let ds = planted_dataset(2);
    let (split, folds) = split_and_folds(&ds, 2);
    let subsets = enumerate_subsets(16, 2).unwrap();
    let cfg = TrainConfig::default();
    let table = build_loss_table(&ds, &split, &folds, &subsets, &cfg, true).unwrap();
    let pooled = pool_losses(&table);
    for (s, subset) in subsets.iter().enumerate().step_by(9) {
        let mut errors = 0;
        for k in 0..folds.k() {
            let m = train_machine(&ds, &folds, k, subset, &cfg, true).unwrap();
            errors += m.errors_on(&ds, &folds.folds[k]).unwrap();
        }
        assert_eq!(pooled[s], errors as f64 / split.dev_indices.len() as f64);
    }
}

#[test]
fn table_does_not_depend_on_subset_order() {
    let ds = planted_dataset(3);
    let (split, folds) = split_and_folds(&ds, 3);
    let subsets = enumerate_subsets(16, 2).unwrap();
    let cfg = TrainConfig::default();
    let table = build_loss_table(&ds, &split, &folds, &subsets, &cfg, true).unwrap();

    let mut perm: Vec<usize> = (0..subsets.len()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(3));
    let shuffled: Vec<FeatureSubset> = perm.iter().map(|&p| subsets[p].clone()).collect();
    let shuffled_table = build_loss_table(&ds, &split, &folds, &shuffled, &cfg, true).unwrap();
    assert_eq!(shuffled_table, table.permute_subsets(&perm));

    // un-permute
    let mut inverse = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inverse[old] = new;
    }
    assert_eq!(shuffled_table.permute_subsets(&inverse), table);
}

#[test]
fn finalized_model_reproduces_the_table_cell() {
    let ds = planted_dataset(4);
    let (split, folds) = split_and_folds(&ds, 4);
    let subsets = enumerate_subsets(16, 2).unwrap();
    let cfg = TrainConfig::default();
    let table = build_loss_table(&ds, &split, &folds, &subsets, &cfg, true).unwrap();
    for recipe in Recipe::BOTH {
        let choice = recipe.select(&table);
        let subset = &subsets[choice.subset];
        let a = finalize_model(&ds, &folds, choice.fold, subset, &cfg, true).unwrap();
        let b = train_machine(&ds, &folds, choice.fold, subset, &cfg, true).unwrap();
        assert_eq!(a, b);
        let errs = a.errors_on(&ds, &folds.folds[choice.fold]).unwrap();
        assert_eq!(errs, table.errors(choice.fold, choice.subset));

        let outcome = run_recipe(recipe, &table, &ds, &split, &folds, &cfg, true).unwrap();
        assert_eq!(split.test_indices.len(), 16);
        assert_eq!(outcome.test_loss * 16.0, (outcome.test_loss * 16.0).round());
    }
}

#[test]
fn planted_feature_drives_selection() {
    let subsets = enumerate_subsets(16, 2).unwrap();
    let singleton = subsets
        .iter()
        .position(|s| s.indices() == [PLANTED])
        .unwrap();
    let cfg = TrainConfig::default();
    let seeds = 50;
    let (mut pooled_hits, mut good_test) = (0, 0);
    for seed in 0..seeds {
        let ds = planted_dataset(seed);
        let (split, folds) = split_and_folds(&ds, seed);
        let table = build_loss_table(&ds, &split, &folds, &subsets, &cfg, true).unwrap();
        assert!(pool_losses(&table)[singleton] <= 0.1, "seed {seed}");
        let outcome = run_recipe(Recipe::Pooled, &table, &ds, &split, &folds, &cfg, true).unwrap();
        if outcome.subset.contains(PLANTED) {
            pooled_hits += 1;
        }
        if outcome.test_loss <= 0.2 {
            good_test += 1;
        }
    }
    assert!(
        pooled_hits as f64 >= 0.9 * seeds as f64,
        "{pooled_hits}/{seeds}"
    );
    assert!(
        good_test as f64 >= 0.9 * seeds as f64,
        "{good_test}/{seeds}"
    );
}

fn table_strategy() -> impl Strategy<Value = LossTable> {
    (1usize..5, 1usize..5, 2usize..6).prop_flat_map(|(k, d, m)| {
        let subsets = enumerate_subsets(d, d.min(2)).unwrap();
        let s = subsets.len();
        prop::collection::vec(prop::collection::vec(0..=m, s), k).prop_map(move |errs| {
            let losses = errs
                .into_iter()
                .map(|row| row.into_iter().map(|e| e as f64 / m as f64).collect())
                .collect();
            LossTable::from_losses(losses, vec![m; k], subsets.clone()).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn selections_are_permutation_invariant(table in table_strategy(), seed in any::<u64>()) {
        let mut perm: Vec<usize> = (0..table.subsets().len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let shuffled = table.permute_subsets(&perm);
        for recipe in Recipe::BOTH {
            let a = recipe.select(&table);
            let b = recipe.select(&shuffled);
            prop_assert_eq!(a.fold, b.fold);
            prop_assert_eq!(&table.subsets()[a.subset], &shuffled.subsets()[b.subset]);
        }
    }

    #[test]
    fn single_fold_recipes_coincide(table in table_strategy()) {
        if table.k() == 1 {
            prop_assert_eq!(select_classic(&table), select_pooled(&table));
        }
    }

    #[test]
    fn dominant_column_wins_both(table in table_strategy(), pick in any::<prop::sample::Index>()) {
        // make column `s` strictly best in every fold
        let s = pick.index(table.subsets().len());
        let k = table.k();
        let m = table.val_counts()[0];
        let losses: Vec<Vec<f64>> = (0..k)
            .map(|f| {
                (0..table.subsets().len())
                    .map(|c| {
                        if c == s { 0.0 } else { (table.errors(f, c).max(1)) as f64 / m as f64 }
                    })
                    .collect()
            })
            .collect();
        let dominated = LossTable::from_losses(losses, table.val_counts().to_vec(), table.subsets().to_vec()).unwrap();
        prop_assert_eq!(select_classic(&dominated).subset, s);
        prop_assert_eq!(select_pooled(&dominated).subset, s);
    }

    #[test]
    fn pooled_is_total_errors_over_total(table in table_strategy()) {
        let pooled = pool_losses(&table);
        for (s, p) in pooled.iter().enumerate() {
            let errs: usize = (0..table.k()).map(|k| table.errors(k, s)).sum();
            prop_assert_eq!(*p, errs as f64 / table.total_validation() as f64);
        }
    }
}
