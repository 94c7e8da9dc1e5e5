use condrum::encoding::sequence::encode_song;
use condrum::encoding::song::{Bar, DrumEvent, NoteEvent, PhraseMark, Song};
use condrum::encoding::Component;
use condrum::model::checkpoint::{Checkpoint, FORMAT_VERSION};
use condrum::model::train::continue_training;
use condrum::model::{ModelConfig, TrainOptions, Trainer};
use condrum::Error;

fn corpus() -> Vec<condrum::encoding::sequence::EncodedSequence> {
    (0..4)
        .map(|i| {
            let mut song = Song {
                title: format!("p{i}"),
                bars: vec![
                    Bar::new(4, 4, 120.0, PhraseMark::Start),
                    Bar::new(4, 4, 120.0, PhraseMark::End),
                ],
                guitar: vec![NoteEvent { onset: 0.0, duration: 16.0, pitch: 60 }],
                bass: vec![],
                drums: vec![],
            };
            for s in (0..32).step_by(4 + i) {
                song.drums.push(DrumEvent { step: s as f64, component: Component::Kick });
                song.bass.push(NoteEvent { onset: s as f64, duration: 2.0, pitch: 40 });
            }
            song.drums.push(DrumEvent { step: 4.0, component: Component::Snare });
            encode_song(&song, 4, 4).unwrap()
        })
        .collect()
}

fn config() -> ModelConfig {
    ModelConfig {
        hidden: 5,
        seq_len: 10,
        batch_size: 3,
        ..Default::default()
    }
}

fn trained(epochs: usize) -> Trainer {
    let corpus = corpus();
    let mut t = Trainer::new(&config(), 42).unwrap();
    for _ in 0..epochs {
        t.run_epoch(&corpus).unwrap();
    }
    t
}

#[test]
fn round_trip_is_bit_exact() {
    let ckpt = trained(2).checkpoint();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    ckpt.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ckpt);
    assert_eq!(back.to_bytes(), ckpt.to_bytes());
}

#[test]
fn resume_matches_uninterrupted_training() {
    let corpus = corpus();
    let straight = trained(3);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mid.ckpt");
    trained(2).checkpoint().save(&path).unwrap();
    let mut resumed = Trainer::from_checkpoint(&Checkpoint::load(&path).unwrap()).unwrap();
    resumed.run_epoch(&corpus).unwrap();

    assert_eq!(resumed.checkpoint().to_bytes(), straight.checkpoint().to_bytes());
}

#[test]
fn continue_training_reaches_target_epoch() {
    let corpus = corpus();
    let opts = TrainOptions { epochs: 3, snapshot_epochs: vec![], seed: 0 };
    let run = continue_training(trained(1), &corpus, &opts).unwrap();
    assert_eq!(run.checkpoints.len(), 1);
    assert_eq!(run.checkpoints[0].epoch, 3);
    assert_eq!(run.loss_curve.len(), 3);
}

#[test]
fn every_corrupted_byte_is_detected() {
    let bytes = trained(1).checkpoint().to_bytes();
    for i in (0..bytes.len()).step_by(97) {
        let mut bad = bytes.clone();
        bad[i] ^= 0x10;
        let err = Checkpoint::from_bytes(&bad).unwrap_err();
        assert!(matches!(err, Error::Integrity(_) | Error::Version { .. }), "byte {i}: {err}");
    }
}

#[test]
fn truncation_is_detected() {
    let bytes = trained(0).checkpoint().to_bytes();
    assert!(matches!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Integrity(_))));
    assert!(matches!(Checkpoint::from_bytes(&bytes[..10]), Err(Error::Integrity(_))));
}

#[test]
fn version_mismatch_is_reported() {
    let mut bytes = trained(0).checkpoint().to_bytes();
    bytes[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
    match Checkpoint::from_bytes(&bytes) {
        Err(Error::Version { found, expected }) => {
            assert_eq!(found, FORMAT_VERSION + 1);
            assert_eq!(expected, FORMAT_VERSION);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_file_names_the_path() {
    let err = Checkpoint::load(std::path::Path::new("/nonexistent/x.ckpt")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/x.ckpt"), "{err}");
}
