use pgsynth_api::*;

#[test]
fn stats_keys_match_the_schema() {
    let v = serde_json::to_value(Stats::default()).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    keys.sort_unstable();
    assert_eq!(
        keys,
        [
            "approach",
            "build_ms",
            "comparisons",
            "model",
            "num_accepting",
            "num_edges",
            "num_nodes",
            "num_symmetries",
            "orderings_enumerated",
            "realizable",
            "solve_ms"
        ]
    );
}

#[test]
fn run_request_defaults() {
    let r: RunRequest = serde_json::from_str(r#"{"model":"m","approach":"canonical"}"#).unwrap();
    assert_eq!(r, RunRequest { model: "m".into(), approach: "canonical".into(), ..Default::default() });
    let back: RunRequest = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn error_kinds_are_lowercase() {
    let e = ErrorBody::input("bad");
    assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"kind":"input","message":"bad"}"#);
    let b: ErrorBody = serde_json::from_str(r#"{"kind":"budget","message":"x"}"#).unwrap();
    assert_eq!(b.kind, ErrorKind::Budget);
}

#[test]
fn large_symmetry_counts_round_trip() {
    let s = Stats { num_symmetries: 2432902008176640000u128 * 21, ..Default::default() };
    let back: Stats = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(back, s);
}

#[test]
fn model_hash_is_stable() {
    assert_eq!(model_hash("abc"), "ba7816bf8f01cfea");
    assert_ne!(model_hash("abc"), model_hash("abd"));
}
