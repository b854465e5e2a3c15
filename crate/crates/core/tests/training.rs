use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wela::dataset::{build_weak_labels, generate_dataset, BlobDataset, GenerateConfig, WeakLabelConfig, WeakLabelSet};
use wela::model::{init_params, load_checkpoint, ModelConfig};
use wela::numerics::{ParamStore, Tensor};
use wela::trainer::{fit, label_accuracy, read_log_csv, read_run, train, TrainConfig};
use wela::Error;

fn small(side: usize, variants: usize, p: usize) -> (BlobDataset, WeakLabelSet) {
    let ds = generate_dataset(&GenerateConfig::new(side, variants)).unwrap();
    let labels = build_weak_labels(&ds, &WeakLabelConfig::new(p, side)).unwrap();
    (ds, labels)
}

fn quick(model: ModelConfig, seed: u64, epochs: usize, batch: usize) -> TrainConfig {
    let mut cfg = TrainConfig::new(model, seed);
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    cfg.learning_rate = 1e-3;
    cfg
}

#[test]
fn one_epoch_of_1024_samples_in_batches_of_256_is_four_steps() {
    let (ds, labels) = small(16, 4, 2);
    assert_eq!(ds.len(), 1024);
    let model = ModelConfig::wela(ds.dim(), 2, 2, 40.0, 40.0).with_hidden(32);
    let cfg = quick(model, 0, 1, 256);
    let dir = tempfile::tempdir().unwrap();
    let run = train(&ds, Some(&labels), &cfg, dir.path()).unwrap();
    let rows = read_log_csv(&run.log_path).unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().map(|r| r.step).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    assert!(rows.iter().all(|r| r.epoch == 1));
    assert_eq!(load_checkpoint(dir.path()).unwrap().meta.loss.steps, 4);
}

#[test]
fn final_partial_batch_is_used() {
    let (ds, _) = small(10, 1, 2);
    let model = ModelConfig::tcvae(ds.dim(), 2, 1.0).with_hidden(16);
    let trained = fit(&ds, None, &quick(model, 0, 2, 32)).unwrap();
    // 100 samples: three full batches and one of four
    assert_eq!(trained.log.len(), 8);
}

#[test]
fn same_seed_gives_bit_identical_checkpoints() {
    let (ds, labels) = small(8, 2, 3);
    let model = ModelConfig::wela(ds.dim(), 3, 2, 10.0, 40.0).with_hidden(24);
    let cfg = quick(model, 11, 3, 32);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = train(&ds, Some(&labels), &cfg, a.path()).unwrap();
    let rb = train(&ds, Some(&labels), &cfg, b.path()).unwrap();
    assert_eq!(ra.checkpoint_sha256, rb.checkpoint_sha256);
    for file in ["checkpoint.bin", "checkpoint.json", "train_log.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(file)).unwrap(),
            std::fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
    let other = train(&ds, Some(&labels), &TrainConfig { seed: 12, ..cfg }, a.path()).unwrap();
    assert_ne!(other.checkpoint_sha256, ra.checkpoint_sha256);
}

#[test]
fn run_metadata_points_at_verified_artifacts() {
    let (ds, labels) = small(8, 2, 2);
    let model = ModelConfig::wela(ds.dim(), 2, 2, 10.0, 40.0).with_hidden(16);
    let dir = tempfile::tempdir().unwrap();
    let run = train(&ds, Some(&labels), &quick(model, 3, 2, 16), dir.path()).unwrap();
    let back = read_run(dir.path()).unwrap();
    assert_eq!(back, run);
    assert_eq!(wela::model::verify_checkpoint(dir.path()), Some(run.checkpoint_sha256.clone()));
    assert_eq!(run.label_accuracy.len(), 2);
    assert!(run.label_accuracy.iter().all(|a| (0.0..=1.0).contains(a)));
    let rows = read_log_csv(&run.log_path).unwrap();
    assert_eq!(rows.last().unwrap().total, run.final_loss.total);
    assert!(rows.windows(2).all(|w| (w[0].epoch, w[0].step) < (w[1].epoch, w[1].step)));
}

#[test]
fn loss_decreases_over_a_short_run() {
    let (ds, labels) = small(16, 4, 3);
    let model = ModelConfig::wela(ds.dim(), 3, 2, 42.0, 40.0).with_hidden(64);
    let trained = fit(&ds, Some(&labels), &quick(model, 0, 30, 128)).unwrap();
    let s = &trained.loss_summary;
    assert!(s.final_total < s.first_epoch_mean_total, "{s:?}");
}

#[test]
fn training_leaves_the_dataset_untouched() {
    let (ds, labels) = small(8, 2, 2);
    let before = (ds.clone(), labels.clone());
    let model = ModelConfig::wela(ds.dim(), 2, 2, 10.0, 40.0).with_hidden(16);
    fit(&ds, Some(&labels), &quick(model, 0, 2, 16)).unwrap();
    assert_eq!(ds.images, before.0.images);
    assert_eq!(labels.onehots, before.1.onehots);
}

#[test]
fn runaway_updates_abort_with_a_diagnostic() {
    let (ds, _) = small(8, 1, 2);
    let model = ModelConfig::tcvae(ds.dim(), 2, 1.0).with_hidden(8);
    let mut cfg = quick(model, 0, 5, 16);
    cfg.learning_rate = 1e30;
    match fit(&ds, None, &cfg) {
        Err(Error::Diverged { epoch, step, term }) => {
            assert!(step >= 2 && epoch >= 1);
            assert!(!term.is_empty());
        }
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn out_of_range_pixels_are_rejected() {
    let (mut ds, _) = small(8, 1, 2);
    ds.images.data_mut()[5] = f32::NAN;
    let model = ModelConfig::tcvae(ds.dim(), 2, 1.0).with_hidden(8);
    assert!(matches!(fit(&ds, None, &quick(model, 0, 1, 64)), Err(Error::Domain(_))));
}

#[test]
fn labels_must_match_the_model() {
    let (ds, labels) = small(8, 1, 2);
    let tcvae = ModelConfig::tcvae(ds.dim(), 2, 1.0).with_hidden(8);
    assert!(matches!(fit(&ds, Some(&labels), &quick(tcvae, 0, 1, 8)), Err(Error::Config(_))));
    let wela = ModelConfig::wela(ds.dim(), 3, 2, 10.0, 1.0).with_hidden(8);
    assert!(matches!(fit(&ds, Some(&labels), &quick(wela.clone(), 0, 1, 8)), Err(Error::Config(_))));
    assert!(matches!(fit(&ds, None, &quick(wela, 0, 1, 8)), Err(Error::Config(_))));
    let mut big = quick(ModelConfig::tcvae(ds.dim(), 2, 1.0).with_hidden(8), 0, 1, 8);
    big.batch_size = ds.len() + 1;
    assert!(matches!(fit(&ds, None, &big), Err(Error::Config(_))));
}

fn zero_params(cfg: &ModelConfig) -> ParamStore<f32> {
    let mut params = init_params(cfg, 0).unwrap();
    for (_, p) in params.iter_mut() {
        p.value.fill(0.0);
    }
    params
}

#[test]
fn zero_logit_model_scores_the_class_zero_frequency() {
    let (ds, labels) = small(12, 2, 2);
    let cfg = ModelConfig::wela(ds.dim(), 2, 2, 10.0, 1.0).with_hidden(8);
    let acc = label_accuracy(&zero_params(&cfg), &ds, &labels, &cfg).unwrap();
    for (j, a) in acc.iter().enumerate() {
        let zeros = (0..ds.len()).filter(|&i| labels.onehots[j].row(i)[0] == 1.0).count();
        assert_eq!(*a, zeros as f64 / ds.len() as f64);
    }
}

fn set(params: &mut ParamStore<f32>, name: &str, f: impl Fn(usize, usize) -> f32) {
    let t = params.param_mut(name).unwrap();
    let cols = if t.value.shape().len() == 2 { t.value.cols() } else { 1 };
    for (idx, v) in t.value.data_mut().iter_mut().enumerate() {
        *v = f(idx / cols, idx % cols);
    }
}

/// Encoder copies each one-hot into a class index; decoder heads score
/// class c with 2c·z − c², maximal at c = z.
fn oracle_model(d: usize, p: usize) -> (ModelConfig, ParamStore<f32>) {
    let cfg = ModelConfig::wela(d, p, 2, 10.0, 1.0).with_hidden(2 * p);
    let mut params = zero_params(&cfg);
    let copy = |r: usize, c: usize| if r == c { 1.0 } else { 0.0 };
    set(&mut params, "enc.h0.w", |r, c| if r >= d && r - d == c { 1.0 } else { 0.0 });
    set(&mut params, "enc.h1.w", copy);
    set(&mut params, "enc.head.w", |r, c| {
        if c < 2 && r / p == c {
            (r % p) as f32
        } else {
            0.0
        }
    });
    set(&mut params, "dec.h0.w", copy);
    set(&mut params, "dec.h1.w", copy);
    for j in 0..2 {
        set(&mut params, &format!("dec.label{j}.w"), |r, c| if r == j { 2.0 * c as f32 } else { 0.0 });
        set(&mut params, &format!("dec.label{j}.b"), |r, _| -((r * r) as f32));
    }
    (cfg, params)
}

#[test]
fn hard_wired_oracle_heads_are_fully_accurate() {
    let (ds, labels) = small(12, 2, 4);
    let (cfg, params) = oracle_model(ds.dim(), 4);
    assert_eq!(label_accuracy(&params, &ds, &labels, &cfg).unwrap(), vec![1.0, 1.0]);
}

#[test]
fn accuracy_ignores_sample_order() {
    let (ds, labels) = small(8, 2, 3);
    let cfg = ModelConfig::wela(ds.dim(), 3, 2, 10.0, 1.0).with_hidden(16);
    let params = fit(&ds, Some(&labels), &quick(cfg.clone(), 0, 3, 16)).unwrap().params;
    let mut perm: Vec<usize> = (0..ds.len()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
    let mut shuffled = ds.clone();
    shuffled.images = ds.images.select_rows(&perm);
    shuffled.coords = perm.iter().map(|&i| ds.coords[i]).collect();
    shuffled.sigmas = perm.iter().map(|&i| ds.sigmas[i]).collect();
    let mut shuffled_labels = labels.clone();
    shuffled_labels.onehots = labels.onehots.iter().map(|t: &Tensor<f32>| t.select_rows(&perm)).collect();
    assert_eq!(
        label_accuracy(&params, &ds, &labels, &cfg).unwrap(),
        label_accuracy(&params, &shuffled, &shuffled_labels, &cfg).unwrap()
    );
}

#[test]
fn unlabeled_model_has_no_accuracies() {
    let (ds, labels) = small(8, 1, 2);
    let cfg = ModelConfig::tcvae(ds.dim(), 2, 1.0).with_hidden(8);
    assert!(label_accuracy(&zero_params(&cfg), &ds, &labels, &cfg).unwrap().is_empty());
}
