use std::path::Path;

use cnls_vortex::config::parse_config;
use cnls_vortex::geometry::Domain;
use cnls_vortex::io::{decode_snapshot, encode_snapshot};
use cnls_vortex::reduced_dynamics::Trajectory;
use proptest::prelude::*;

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files.iter().map(|p| std::fs::read(p).unwrap()).collect()
}

/// A seed with a few bytes overwritten and an optional truncation.
fn mutated(target: &'static str) -> impl Strategy<Value = Vec<u8>> {
    let all = seeds(target);
    (
        0..all.len(),
        prop::collection::vec((any::<prop::sample::Index>(), any::<u8>()), 0..8),
        any::<prop::sample::Index>(),
        any::<bool>(),
    )
        .prop_map(move |(k, edits, cut, truncate)| {
            let mut b = all[k].clone();
            if !b.is_empty() {
                for (at, byte) in &edits {
                    let i = at.index(b.len());
                    b[i] = *byte;
                }
                if truncate {
                    b.truncate(cut.index(b.len() + 1));
                }
            }
            b
        })
}

fn config_property(data: &[u8]) -> Result<(), TestCaseError> {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = parse_config(text) {
            prop_assert!(cfg.validate().is_ok());
        }
    }
    Ok(())
}

fn snapshot_property(data: &[u8]) -> Result<(), TestCaseError> {
    let domain = Domain::centered_square(1.0).unwrap();
    if let Ok(state) = decode_snapshot(data, &domain) {
        prop_assert_eq!(encode_snapshot(&state), data);
    }
    Ok(())
}

fn trajectory_property(data: &[u8]) -> Result<(), TestCaseError> {
    if let Ok(traj) = Trajectory::read_csv(data) {
        let mut out = Vec::new();
        traj.write_csv(&mut out).unwrap();
        let again = Trajectory::read_csv(out.as_slice()).unwrap();
        prop_assert_eq!(again.frames, traj.frames);
    }
    Ok(())
}

#[test]
fn seeds_are_accepted_where_expected() {
    let configs = seeds("config_parse");
    let ok = configs
        .iter()
        .filter(|c| parse_config(std::str::from_utf8(c).unwrap()).is_ok())
        .count();
    assert_eq!(ok, configs.len() - 1);
    let domain = Domain::centered_square(1.0).unwrap();
    let snaps = seeds("snapshot_decode");
    assert_eq!(
        snaps
            .iter()
            .filter(|s| decode_snapshot(s, &domain).is_ok())
            .count(),
        2
    );
    for t in seeds("trajectory_csv") {
        Trajectory::read_csv(t.as_slice()).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, ..ProptestConfig::default() })]

    #[test]
    fn config_parser_survives_mutations(data in mutated("config_parse")) {
        config_property(&data)?;
    }

    #[test]
    fn config_parser_survives_arbitrary_text(text in "[a-z_.\\[\\]0-9 =#,\\n-]{0,200}") {
        config_property(text.as_bytes())?;
    }

    #[test]
    fn snapshot_decoder_survives_mutations(data in mutated("snapshot_decode")) {
        snapshot_property(&data)?;
    }

    #[test]
    fn snapshot_decoder_survives_arbitrary_bytes(data in prop::collection::vec(any::<u8>(), 0..256)) {
        snapshot_property(&data)?;
    }

    #[test]
    fn trajectory_reader_survives_mutations(data in mutated("trajectory_csv")) {
        trajectory_property(&data)?;
    }

    #[test]
    fn trajectory_reader_survives_arbitrary_text(text in "(t,component,index,degree,x,y\\n)?([-0-9.e,uv ]{0,40}\\n){0,6}") {
        trajectory_property(text.as_bytes())?;
    }
}
