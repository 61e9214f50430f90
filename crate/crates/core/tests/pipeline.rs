use motionforge::motion::{MotionClass, MotionProfile};
use motionforge::nn::{load_checkpoint, save_checkpoint, train, DatasetManifest, ModelConfig, Split};
use motionforge::pipeline::{audit_entry, build_dataset, generate_phantom, RunConfig};
use motionforge::rng::{derive_seed, stream};
use motionforge::volume::{normalize_intensity, read_volume, write_mrvol};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

fn write_phantoms(dir: &Path, n: usize, dims: [usize; 3]) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        let v = generate_phantom(dims, 4, derive_seed(7, stream::PHANTOM, i as u64)).unwrap();
        write_mrvol(&v, dir.join(format!("phantom_{i:03}.mrvol"))).unwrap();
    }
}

fn tiny_config() -> RunConfig {
    let m = ModelConfig::tiny();
    RunConfig {
        input_size: m.input_size,
        conv_channels: m.conv_channels,
        dense_units: m.dense_units,
        slices_per_volume: 4,
        epochs: 2,
        batch_size: 8,
        ..RunConfig::default()
    }
}

#[test]
fn phantom_head_is_brighter_than_background() {
    let dims = [40, 40, 40];
    let v = generate_phantom(dims, 6, 11).unwrap();
    let (mut inside, mut n_in, mut outside, mut n_out) = (0.0f64, 0usize, 0.0f64, 0usize);
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let val = f64::from(v.get(x, y, z));
                let d = [x, y, z].iter().map(|&c| (c as f64 - 19.5).abs()).fold(0.0, f64::max);
                if d < 4.0 {
                    inside += val;
                    n_in += 1;
                } else if [x, y, z].iter().any(|&c| !(6..34).contains(&c)) {
                    outside += val;
                    n_out += 1;
                }
            }
        }
    }
    let (inside, outside) = (inside / n_in as f64, outside / n_out as f64);
    assert!(inside > 3.0 * outside, "inside {inside} outside {outside}");
}

#[test]
fn dataset_of_thirty_is_balanced_split_and_auditable() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    write_phantoms(&src, 30, [32, 32, 32]);
    let manifest_path = tmp.path().join("ds").join("manifest.json");
    let config = tiny_config();
    let built = build_dataset(&src, &manifest_path, &config).unwrap();
    let m = &built.manifest;

    let mut per_class = BTreeMap::new();
    for e in &m.entries {
        *per_class.entry(e.label.index()).or_insert(0) += 1;
        assert_eq!(e.curve.is_some(), e.label != MotionClass::None);
    }
    assert_eq!(per_class.values().copied().collect::<Vec<_>>(), vec![10, 10, 10]);
    assert_eq!(
        [m.count(Split::Train), m.count(Split::Val), m.count(Split::Test)],
        [20, 4, 6]
    );
    let mut seen = BTreeSet::new();
    for e in &m.entries {
        assert!(seen.insert(e.subject.clone()), "subject {} appears twice", e.subject);
    }

    let reread = DatasetManifest::read(&manifest_path).unwrap();
    assert_eq!(&reread, m);
    let base = manifest_path.parent().unwrap();
    for i in 0..m.entries.len() {
        assert!(audit_entry(m, base, i).unwrap(), "entry {i} failed audit");
    }

    let clean = m.entries.iter().find(|e| e.label == MotionClass::None).unwrap();
    let source = read_volume(clean.source.as_ref().unwrap()).unwrap();
    let stored = read_volume(base.join(&clean.path)).unwrap();
    assert_eq!(stored, normalize_intensity(&source));
}

#[test]
fn dataset_build_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    write_phantoms(&src, 15, [32, 32, 32]);
    let config = tiny_config();
    let a = build_dataset(&src, &tmp.path().join("a/manifest.json"), &config).unwrap();
    let b = build_dataset(&src, &tmp.path().join("b/manifest.json"), &config).unwrap();
    assert_eq!(a.manifest, b.manifest);
    for e in &a.manifest.entries {
        let va = std::fs::read(tmp.path().join("a").join(&e.path)).unwrap();
        let vb = std::fs::read(tmp.path().join("b").join(&e.path)).unwrap();
        assert_eq!(va, vb, "{}", e.path);
    }
}

#[test]
fn too_few_volumes_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    write_phantoms(&src, 4, [32, 32, 32]);
    assert!(build_dataset(&src, &tmp.path().join("m.json"), &tiny_config()).is_err());
}

#[test]
fn trained_checkpoint_survives_disk_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("src");
    write_phantoms(&src, 15, [32, 32, 32]);
    let manifest_path = tmp.path().join("ds/manifest.json");
    let config = tiny_config();
    let built = build_dataset(&src, &manifest_path, &config).unwrap();
    let outcome = train(
        &built.manifest,
        manifest_path.parent().unwrap(),
        &config.model_config(),
        &config.train_options(),
    )
    .unwrap();
    assert_eq!(outcome.history.len(), 2);
    assert!(outcome.history.iter().all(|e| e.train_loss.is_finite()));

    let ckpt = tmp.path().join("model.ckpt");
    save_checkpoint(&ckpt, &outcome.params, Some(&outcome.adam)).unwrap();
    let loaded = load_checkpoint(&ckpt).unwrap();
    assert_eq!(loaded.params, outcome.params);
    assert_eq!(loaded.adam.unwrap().t, outcome.adam.t);
}

#[test]
fn default_profile_validates() {
    MotionProfile::default().validate().unwrap();
    RunConfig::default().validate().unwrap();
}
