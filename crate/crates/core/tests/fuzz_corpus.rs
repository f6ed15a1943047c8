//! Replays the fuzz corpus seeds and random inputs through the same entry
//! points as the cargo-fuzz targets.

use std::path::{Path, PathBuf};

use orbiquant::experiments::{validate, ErrorTable, ExperimentConfig};
use orbiquant::group_actions::AffineIsometryAction;
use orbiquant::modes::OperatorMatrix;
use proptest::prelude::*;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            let text = std::fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn experiment_config(text: &str) -> bool {
    match ExperimentConfig::from_toml(text) {
        Ok(cfg) => {
            let ok = validate(&cfg).is_ok();
            assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
            ok
        }
        Err(_) => false,
    }
}

fn error_table_csv(text: &str) -> bool {
    match ErrorTable::from_csv(text) {
        Ok(t) => {
            assert_eq!(
                ErrorTable::from_csv(&t.to_csv()).unwrap().summary(),
                t.summary()
            );
            true
        }
        Err(_) => false,
    }
}

fn error_table_json(text: &str) -> bool {
    match ErrorTable::from_json(text) {
        Ok(t) => {
            let _ = t.summary();
            let _ = t.to_csv();
            true
        }
        Err(_) => false,
    }
}

fn operator_json(text: &str) -> bool {
    match OperatorMatrix::from_json(text) {
        Ok(op) => {
            assert_eq!(
                OperatorMatrix::from_json(&op.to_json()).unwrap().to_json(),
                op.to_json()
            );
            true
        }
        Err(_) => false,
    }
}

fn action_name(text: &str) -> bool {
    AffineIsometryAction::by_name(text).is_ok_and(|a| a.order() >= 1)
}

type Check = fn(&str) -> bool;

const TARGETS: [(&str, Check); 5] = [
    ("experiment_config", experiment_config),
    ("error_table_csv", error_table_csv),
    ("error_table_json", error_table_json),
    ("operator_json", operator_json),
    ("action_name", action_name),
];

#[test]
fn corpus_seeds_are_accepted() {
    for (target, check) in TARGETS {
        for (path, text) in seeds(target) {
            // Z65 sits just past the largest cyclic group
            let expected = !path.ends_with("Z65");
            assert_eq!(check(&text), expected, "{}", path.display());
        }
    }
}

fn mutated() -> impl Strategy<Value = (usize, String)> {
    let all: Vec<(usize, String)> = TARGETS
        .iter()
        .enumerate()
        .flat_map(|(i, (t, _))| seeds(t).into_iter().map(move |(_, s)| (i, s)))
        .collect();
    (
        prop::sample::select(all),
        any::<prop::sample::Index>(),
        any::<prop::sample::Index>(),
        "\\PC{0,6}",
    )
        .prop_map(|((i, s), a, b, insert)| {
            let chars: Vec<char> = s.chars().collect();
            let (mut lo, mut hi) = (a.index(chars.len() + 1), b.index(chars.len() + 1));
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
            let text: String = chars[..lo]
                .iter()
                .chain(insert.chars().collect::<Vec<_>>().iter())
                .chain(&chars[hi..])
                .collect();
            (i, text)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn arbitrary_text_never_panics(text in "\\PC{0,64}") {
        for (_, check) in TARGETS {
            check(&text);
        }
    }

    #[test]
    fn mutated_seeds_never_panic((i, text) in mutated()) {
        TARGETS[i].1(&text);
    }
}
