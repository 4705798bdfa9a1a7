use std::process::Command;

fn epike(args: &[&str]) -> (bool, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_epike")).args(args).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.success(), text)
}

#[test]
fn check_run_generate() {
    let (ok, text) = epike(&["check", "breakfast-case2"]);
    assert!(ok, "{text}");
    assert!(text.contains("scenario breakfast-case2"));

    let dir = std::env::temp_dir().join(format!("epike-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let trace = dir.join("t.jsonl");
    let (ok, text) = epike(&["run", "breakfast-case3", "--agents", "epike,pike", "--seed", "4", "--iterations", "300", "--trace", trace.to_str().unwrap()]);
    assert!(ok, "{text}");
    assert!(text.contains("verdict: failure"), "{text}");
    let lines: Vec<serde_json::Value> = std::fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines[0]["payload"], "e_juice");
    assert!(lines.iter().all(|l| l.get("seq").is_some() && l.get("elapsed_ms").is_some()));

    let task = dir.join("task.json");
    let (ok, text) = epike(&["generate", "--diff", "2", "--seed", "9", "--out", task.to_str().unwrap()]);
    assert!(ok, "{text}");
    let (ok, text) = epike(&["check", task.to_str().unwrap()]);
    assert!(ok, "{text}");
    assert!(text.contains("world w3"), "{text}");

    let (ok, _) = epike(&["run", "breakfast-case1", "--agents", "epike"]);
    assert!(!ok);
    let (ok, _) = epike(&["generate", "--diff", "5"]);
    assert!(!ok);
    std::fs::remove_dir_all(dir).unwrap();
}
