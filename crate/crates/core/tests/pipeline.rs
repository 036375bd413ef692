use bowfire::baselines::{cluster_segment, ClusterSpec};
use bowfire::config::Config;
use bowfire::eval::{evaluate_methods, DatasetTag, EvalDatasets, InMemorySample};
use bowfire::imaging::{mask_and, BinaryMask, ImageRgb};
use bowfire::model::train;
use bowfire::pipeline::{detect, BowfireModel, DetectionMode, Method};
use bowfire::synth::{generate, Corpus, SynthParams};
use bowfire::Error;

fn small_corpus() -> Corpus {
    generate(&SynthParams {
        width: 64,
        height: 48,
        fire_images: 4,
        non_fire_images: 4,
        fire_patches: 20,
        not_fire_patches: 40,
        ..SynthParams::default()
    })
}

fn trained(c: &Corpus) -> BowfireModel {
    let cfg = Config {
        ksp: 60,
        ..Config::default()
    };
    train(&c.fire_patches, &c.not_fire_patches, &cfg).unwrap()
}

#[test]
fn fused_is_intersection_of_branches() {
    let c = small_corpus();
    let model = trained(&c);
    for scene in c.fire_scenes.iter().chain(&c.non_fire_scenes) {
        let color = detect(&model, &scene.image, DetectionMode::ColorOnly).unwrap();
        let texture = detect(&model, &scene.image, DetectionMode::TextureOnly).unwrap();
        let fused = detect(&model, &scene.image, DetectionMode::Fused).unwrap();
        assert_eq!(fused, mask_and(&color, &texture).unwrap());
        assert!(fused.popcount() <= color.popcount().min(texture.popcount()));
        assert_eq!(fused.dims(), scene.image.dims());
    }
}

#[test]
fn single_patch_per_class_with_one_neighbor() {
    let c = small_corpus();
    let fire = vec![c.fire_patches[0].clone()];
    let not_fire = vec![ImageRgb::filled(50, 50, [40, 90, 200]).unwrap()];
    let cfg = Config {
        k: 1,
        ksp: 4,
        ..Config::default()
    };
    let model = train(&fire, &not_fire, &cfg).unwrap();
    assert_eq!(model.texture.training().len(), 2);

    let sky = detect(&model, &not_fire[0], DetectionMode::Fused).unwrap();
    assert_eq!(sky.popcount(), 0);
    let texture = detect(&model, &fire[0], DetectionMode::TextureOnly).unwrap();
    assert!(texture.fire_fraction() > 0.5, "{}", texture.fire_fraction());
}

#[test]
fn training_needs_both_classes() {
    let patch = ImageRgb::filled(50, 50, [1, 2, 3]).unwrap();
    let err = train(&[patch], &[], &Config::default()).unwrap_err();
    assert!(matches!(err, Error::Training(_)), "{err}");
}

#[test]
fn baselines_report_no_fire_on_flat_images() {
    let img = ImageRgb::filled(12, 9, [230, 120, 20]).unwrap();
    assert!(matches!(
        cluster_segment(&img, &ClusterSpec::rudz()),
        Err(Error::DegenerateInput(_))
    ));
    let model = trained(&small_corpus());
    for m in [Method::RossiCluster, Method::RudzCluster] {
        assert_eq!(
            m.run(&model, &img).unwrap(),
            BinaryMask::filled(12, 9, false)
        );
        assert!(m.description().contains("clustering step only"));
    }
}

#[test]
fn method_names_round_trip() {
    for m in Method::ALL {
        assert_eq!(m.name().parse::<Method>().unwrap(), m);
    }
    assert!("laser".parse::<Method>().is_err());
}

#[test]
fn complete_report_sums_fire_and_non_fire() {
    let c = small_corpus();
    let model = trained(&c);
    let samples = |scenes: &[bowfire::synth::Scene]| -> Vec<InMemorySample> {
        scenes
            .iter()
            .enumerate()
            .map(|(i, s)| InMemorySample {
                name: i.to_string(),
                image: s.image.clone(),
                truth: s.truth.clone(),
            })
            .collect()
    };
    let (fire, non_fire) = (samples(&c.fire_scenes), samples(&c.non_fire_scenes));
    let datasets = EvalDatasets {
        fire: Some(&fire[..]),
        non_fire: Some(&non_fire[..]),
    };
    let methods = [Method::Bowfire(DetectionMode::Fused), Method::RossiCluster];
    let reports = evaluate_methods(&model, &methods, datasets, 3).unwrap();
    assert_eq!(reports.len(), 6);
    for run in reports.chunks(3) {
        let tags: Vec<_> = run.iter().map(|r| r.dataset).collect();
        assert_eq!(
            tags,
            [DatasetTag::Fire, DatasetTag::NonFire, DatasetTag::Complete]
        );
        assert_eq!(run[2].matrix, run[0].matrix + run[1].matrix);
        assert_eq!(run[2].images, 8);
        assert_eq!(run[1].matrix.tp + run[1].matrix.fn_, 0);
        assert_eq!(run[1].metrics.recall, None);
        if run[1].matrix.fp == 0 {
            assert_eq!(run[1].metrics.precision, None);
        }
    }
    let serial = evaluate_methods(&model, &methods, datasets, 1).unwrap();
    assert_eq!(serial, reports);
}
