use std::path::PathBuf;

use mpgraph::examples::{gen_separation, gen_separation_universe, gen_sliding_window, gen_square, gen_square_with};
use mpgraph::modelfmt::{parse_model, serialize_model, Model};
use mpgraph::Domain;

fn fixtures() -> Vec<(&'static str, Model)> {
    let bit = Domain::int(0, 1);
    vec![
        ("square.mpp", gen_square().unwrap()),
        ("square_pay3.mpp", gen_square_with(&Domain::int(0, 2)).unwrap()),
        ("separation.mpp", gen_separation(&[4, 5], &[1]).unwrap()),
        ("separation_open.mpp", gen_separation_universe(0, 1, 2).unwrap()),
        ("window2.mpp", gen_sliding_window(2, &bit, 1).unwrap()),
        ("window3.mpp", gen_sliding_window(3, &bit, 1).unwrap()),
        ("window3_cap2.mpp", gen_sliding_window(3, &bit, 2).unwrap()),
    ]
}

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

#[test]
fn fixtures_match_generators_byte_for_byte() {
    let bless = std::env::var_os("MPGRAPH_BLESS").is_some();
    for (file, m) in fixtures() {
        let text = serialize_model(&m) + "\n";
        let path = dir().join(file);
        if bless {
            std::fs::write(&path, &text).unwrap();
        }
        let on_disk = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(on_disk, text, "{file} is stale; rerun with MPGRAPH_BLESS=1");
    }
}

#[test]
fn fixtures_parse_back_to_the_generated_model() {
    for (file, m) in fixtures() {
        let text = std::fs::read_to_string(dir().join(file)).unwrap();
        let parsed = parse_model(&text).unwrap_or_else(|e| panic!("{file}:{e}"));
        assert_eq!(parsed, m, "{file}");
        assert_eq!(serialize_model(&parsed) + "\n", text, "{file}");
    }
}
