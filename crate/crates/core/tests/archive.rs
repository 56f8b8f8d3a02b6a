use std::fs;
use std::path::Path;

use objectness_core::net::{load_weights, load_weights_for, save_weights, Network, NetworkConfig, MANIFEST_FILE};
use objectness_core::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn toy() -> Network<f32> {
    Network::random(NetworkConfig::toy(), &mut ChaCha8Rng::seed_from_u64(7)).unwrap()
}

#[test]
fn round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let net = toy();
    save_weights(&net, dir.path(), None).unwrap();
    let (back, iteration) = load_weights(dir.path()).unwrap();
    assert_eq!(iteration, None);
    assert_eq!(back.config(), net.config());
    for (layer, p) in net.params() {
        let q = &back.params()[layer];
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(p.weights.data()), bits(q.weights.data()));
        assert_eq!(bits(&p.bias), bits(&q.bias));
    }
}

#[test]
fn optimizer_state_survives_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    let mut net = toy();
    for v in net.params_mut().values_mut() {
        v.bias.iter_mut().for_each(|b| *b = 0.25);
    }
    save_weights(&net, dir.path(), Some(42)).unwrap();
    let (back, iteration) = load_weights(dir.path()).unwrap();
    assert_eq!(iteration, Some(42));
    assert_eq!(back, net);
    assert_eq!(back.velocity(), net.velocity());
}

#[test]
fn saving_twice_gives_identical_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    save_weights(&toy(), a.path(), Some(3)).unwrap();
    save_weights(&toy(), b.path(), Some(3)).unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap());
    }
}

fn edit_manifest(dir: &Path, f: impl Fn(String) -> String) {
    let p = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&p).unwrap();
    fs::write(&p, f(text)).unwrap();
}

#[test]
fn wrong_manifest_shape_names_the_layer() {
    let dir = tempfile::tempdir().unwrap();
    save_weights(&toy(), dir.path(), None).unwrap();
    // Layer 2 is the second 16-channel conv: weight shape [16, 16, 3, 3].
    edit_manifest(dir.path(), |t| t.replacen("shape = [16, 16, 3, 3]", "shape = [16, 16, 5, 5]", 1));
    match load_weights(dir.path()) {
        Err(Error::ArchiveShape { layer, expected, found, .. }) => {
            assert_eq!(layer, 2);
            assert_eq!(expected, vec![16, 16, 3, 3]);
            assert_eq!(found, vec![16, 16, 5, 5]);
        }
        other => panic!("expected a shape error, got {other:?}"),
    }
}

#[test]
fn toy_archive_does_not_fit_paper_preset() {
    let dir = tempfile::tempdir().unwrap();
    save_weights(&toy(), dir.path(), None).unwrap();
    match load_weights_for(NetworkConfig::paper(), dir.path()) {
        Err(Error::ArchiveShape { layer: 0, expected, found, .. }) => {
            assert_eq!(expected, vec![64, 3, 3, 3]);
            assert_eq!(found, vec![16, 3, 3, 3]);
        }
        other => panic!("expected a shape error, got {other:?}"),
    }
}

#[test]
fn truncated_blob_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    save_weights(&toy(), dir.path(), None).unwrap();
    let blob = dir.path().join("layer000.weight.bin");
    let bytes = fs::read(&blob).unwrap();
    fs::write(&blob, &bytes[..bytes.len() - 8]).unwrap();
    assert!(matches!(
        load_weights(dir.path()),
        Err(Error::ArchiveTruncated { expected: 1728, found: 1720, .. })
    ));
}

#[test]
fn flipped_byte_fails_checksum() {
    let dir = tempfile::tempdir().unwrap();
    save_weights(&toy(), dir.path(), None).unwrap();
    let blob = dir.path().join("layer002.bias.bin");
    let mut bytes = fs::read(&blob).unwrap();
    bytes[5] ^= 0x40;
    fs::write(&blob, bytes).unwrap();
    assert!(matches!(load_weights(dir.path()), Err(Error::ArchiveChecksum { .. })));
}

#[test]
fn garbage_manifest_is_a_manifest_error() {
    let dir = tempfile::tempdir().unwrap();
    save_weights(&toy(), dir.path(), None).unwrap();
    edit_manifest(dir.path(), |_| "format = [[[".into());
    assert!(matches!(load_weights(dir.path()), Err(Error::Manifest { .. })));
    edit_manifest(dir.path(), |_| String::new());
    assert!(matches!(load_weights(dir.path()), Err(Error::Manifest { .. })));
    fs::remove_file(dir.path().join(MANIFEST_FILE)).unwrap();
    assert!(matches!(load_weights(dir.path()), Err(Error::Io { .. })));
}
