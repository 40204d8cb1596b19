//! Pinned scenario traces. Set `AMRT_BLESS=1` to rewrite them after an
//! intended behavior change.

use std::path::PathBuf;

use amrt::scenario::{run_scenario, Overrides, Scenario};

const SCENARIOS: [&str; 3] = ["fault-restart", "decoupled-only", "hot-swap"];

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn trace(name: &str) -> Vec<u8> {
    let path = root().join("scenarios").join(format!("{name}.json"));
    let s = Scenario::load(&path, &Overrides::default()).unwrap();
    let mut out = Vec::new();
    run_scenario(&s, &mut out).unwrap();
    out
}

#[test]
fn traces_match_golden_files() {
    for name in SCENARIOS {
        let got = trace(name);
        let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("tests/golden/{name}.jsonl"));
        if std::env::var_os("AMRT_BLESS").is_some() {
            std::fs::write(&path, &got).unwrap();
            continue;
        }
        let want = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e} (run with AMRT_BLESS=1)", path.display()));
        assert!(got == want, "{name} trace differs from {}", path.display());
    }
}

#[test]
fn every_decision_follows_an_event_or_evaluation_in_its_tick() {
    for name in SCENARIOS {
        let text = String::from_utf8(trace(name)).unwrap();
        let mut seen: Option<u64> = None;
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            let tick = v["tick"].as_u64().unwrap();
            match v["kind"].as_str().unwrap() {
                "event" | "evaluation" => seen = Some(tick),
                "decision" => assert_eq!(seen, Some(tick), "{name}: {line}"),
                _ => {}
            }
        }
    }
}

#[test]
fn history_has_one_record_per_adapting_tick() {
    let text = String::from_utf8(trace("fault-restart")).unwrap();
    let decisions = text.lines().filter(|l| l.contains("\"kind\":\"decision\"")).count();
    let summary: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(summary["kind"], "summary");
    assert_eq!(summary["payload"]["adaptations"].as_u64().unwrap() as usize, decisions);
    assert_eq!(summary["payload"]["finalAvailability"], 1.0);
}
