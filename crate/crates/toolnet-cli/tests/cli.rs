//! End-to-end tests of the `toolnet` binary: exit codes, byte-stable
//! outputs, environment-variable precedence, and input immutability.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_toolnet"));
    // Isolate from any ambient configuration.
    for var in [
        "TOOLNET_ALPHA",
        "TOOLNET_BETA",
        "TOOLNET_SEED",
        "TOOLNET_K",
        "TOOLNET_WEIGHT_FORMAT",
    ] {
        cmd.env_remove(var);
    }
    cmd
}

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary should run");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8(out.stdout).expect("stdout is UTF-8"),
        stderr: String::from_utf8(out.stderr).expect("stderr is UTF-8"),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path
}

const REGISTRY: &str = r#"[
  {"id": "alpha", "description": "fetch the records"},
  {"id": "beta", "description": "summarize the records"},
  {"id": "gamma", "description": "file the summary"}
]"#;

fn corpus_jsonl() -> String {
    let step = |tool: &str| {
        format!(
            r#"{{"tool":"{tool}","thought":"","arguments":"","observation":""}}"#
        )
    };
    let line = |task: &str, outcome: &str, tools: &[&str]| {
        format!(
            r#"{{"task_id":"{task}","query":"process the records","outcome":"{outcome}","steps":[{}]}}"#,
            tools.iter().map(|t| step(t)).collect::<Vec<_>>().join(",")
        )
    };
    [
        line("t1", "success", &["alpha", "beta"]),
        line("t2", "success", &["alpha", "beta", "gamma"]),
        line("t3", "success", &["alpha"]),
        line("t4", "failure", &["beta", "beta"]),
    ]
    .join("\n")
        + "\n"
}

const SCENARIO: &str = r#"{
  "tools": [
    {"id": "signal", "description": "returns the needed answer",
     "behavior": {"kind": "answer_relevant"}},
    {"id": "noise", "description": "returns random numbers",
     "behavior": {"kind": "noisy_random_number"}}
  ],
  "agent": {"kind": "epsilon_greedy", "epsilon": 0.2, "tool_steps": 2},
  "evaluator": {"base_scores": {"signal": 2, "noise": -1}},
  "iterations": 20,
  "seed": 7,
  "mode": "toolnet"
}"#;

#[test]
fn build_from_corpus_is_byte_stable_and_leaves_inputs_alone() {
    let dir = TempDir::new().unwrap();
    let registry = write(dir.path(), "registry.json", REGISTRY);
    let corpus = write(dir.path(), "corpus.jsonl", &corpus_jsonl());
    let registry_before = fs::read(&registry).unwrap();
    let corpus_before = fs::read(&corpus).unwrap();

    let out_a = dir.path().join("a.json");
    let out_b = dir.path().join("b.json");
    for out in [&out_a, &out_b] {
        let result = run(bin()
            .arg("build")
            .arg("--registry")
            .arg(&registry)
            .arg("--corpus")
            .arg(&corpus)
            .arg("--out")
            .arg(out));
        assert_eq!(result.code, 0, "stderr: {}", result.stderr);
        assert!(result.stdout.contains("3 tools"));
    }
    assert_eq!(fs::read(&out_a).unwrap(), fs::read(&out_b).unwrap());
    assert_eq!(fs::read(&registry).unwrap(), registry_before);
    assert_eq!(fs::read(&corpus).unwrap(), corpus_before);

    let graph: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out_a).unwrap()).unwrap();
    assert_eq!(graph["format_version"], 1);
    assert_eq!(graph["iteration"], 0);
    assert_eq!(graph["nodes"].as_array().unwrap().len(), 3);
}

#[test]
fn build_include_failures_changes_the_weights() {
    let dir = TempDir::new().unwrap();
    let registry = write(dir.path(), "registry.json", REGISTRY);
    let corpus = write(dir.path(), "corpus.jsonl", &corpus_jsonl());
    let strict = dir.path().join("strict.json");
    let lenient = dir.path().join("lenient.json");
    assert_eq!(
        run(bin()
            .args(["build", "--registry"])
            .arg(&registry)
            .arg("--corpus")
            .arg(&corpus)
            .arg("--out")
            .arg(&strict))
        .code,
        0
    );
    assert_eq!(
        run(bin()
            .args(["build", "--include-failures", "--registry"])
            .arg(&registry)
            .arg("--corpus")
            .arg(&corpus)
            .arg("--out")
            .arg(&lenient))
        .code,
        0
    );
    assert_ne!(fs::read(&strict).unwrap(), fs::read(&lenient).unwrap());
}

#[test]
fn build_missing_registry_exits_one() {
    let dir = TempDir::new().unwrap();
    let result = run(bin()
        .args(["build", "--no-corpus", "--registry"])
        .arg(dir.path().join("absent.json"))
        .arg("--out")
        .arg(dir.path().join("g.json")));
    assert_eq!(result.code, 1);
    assert!(result.stderr.contains("cannot read"));
}

#[test]
fn build_requires_corpus_or_no_corpus() {
    let dir = TempDir::new().unwrap();
    let registry = write(dir.path(), "registry.json", REGISTRY);
    let result = run(bin()
        .args(["build", "--registry"])
        .arg(&registry)
        .arg("--out")
        .arg(dir.path().join("g.json")));
    assert_eq!(result.code, 2);
}

#[test]
fn build_rejects_malformed_registry_with_exit_two() {
    let dir = TempDir::new().unwrap();
    let registry = write(dir.path(), "registry.json", "{not json");
    let result = run(bin()
        .args(["build", "--no-corpus", "--registry"])
        .arg(&registry)
        .arg("--out")
        .arg(dir.path().join("g.json")));
    assert_eq!(result.code, 2);
}

#[test]
fn env_vars_set_params_and_flags_override_them() {
    let dir = TempDir::new().unwrap();
    let registry = write(dir.path(), "registry.json", REGISTRY);

    let from_env = dir.path().join("env.json");
    let result = run(bin()
        .env("TOOLNET_ALPHA", "0.9")
        .env("TOOLNET_BETA", "0.6")
        .args(["build", "--no-corpus", "--registry"])
        .arg(&registry)
        .arg("--out")
        .arg(&from_env));
    assert_eq!(result.code, 0, "stderr: {}", result.stderr);
    let graph: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&from_env).unwrap()).unwrap();
    assert_eq!(graph["params"]["alpha"], 0.9);
    assert_eq!(graph["params"]["beta"], 0.6);

    let from_flag = dir.path().join("flag.json");
    let result = run(bin()
        .env("TOOLNET_ALPHA", "0.9")
        .args(["build", "--no-corpus", "--alpha", "0.7", "--registry"])
        .arg(&registry)
        .arg("--out")
        .arg(&from_flag));
    assert_eq!(result.code, 0);
    let graph: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&from_flag).unwrap()).unwrap();
    assert_eq!(graph["params"]["alpha"], 0.7);

    // Out-of-range parameters are a validation error.
    let result = run(bin()
        .args(["build", "--no-corpus", "--beta", "1.5", "--registry"])
        .arg(&registry)
        .arg("--out")
        .arg(dir.path().join("bad.json")));
    assert_eq!(result.code, 2);
}

#[test]
fn update_advances_iteration_and_rejects_bad_scores() {
    let dir = TempDir::new().unwrap();
    let registry = write(dir.path(), "registry.json", REGISTRY);
    let graph_path = dir.path().join("graph.json");
    assert_eq!(
        run(bin()
            .args(["build", "--no-corpus", "--registry"])
            .arg(&registry)
            .arg("--out")
            .arg(&graph_path))
        .code,
        0
    );

    let report = write(
        dir.path(),
        "report.json",
        r#"{"trajectory_id": "t9",
            "scores_of_tools": [{"tool_name": "alpha", "score": 2, "reason": "helped"}]}"#,
    );
    let updated = dir.path().join("updated.json");
    let result = run(bin()
        .args(["update", "--graph"])
        .arg(&graph_path)
        .arg("--report")
        .arg(&report)
        .arg("--out")
        .arg(&updated));
    assert_eq!(result.code, 0, "stderr: {}", result.stderr);
    assert!(result.stdout.contains("iteration 1"));
    let graph: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&updated).unwrap()).unwrap();
    assert_eq!(graph["iteration"], 1);
    let alpha_node = graph["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .find(|n| n["id"] == "alpha")
        .unwrap();
    assert_eq!(alpha_node["accumulated_score"], 2);

    // A score outside [-3, 3] is rejected atomically: exit 2, no output.
    let bad_report = write(
        dir.path(),
        "bad_report.json",
        r#"{"trajectory_id": "t10",
            "scores_of_tools": [{"tool_name": "alpha", "score": 7, "reason": "too good"}]}"#,
    );
    let rejected = dir.path().join("rejected.json");
    let result = run(bin()
        .args(["update", "--graph"])
        .arg(&graph_path)
        .arg("--report")
        .arg(&bad_report)
        .arg("--out")
        .arg(&rejected));
    assert_eq!(result.code, 2);
    assert!(!rejected.exists());
}

#[test]
fn successors_renders_session_menus() {
    let dir = TempDir::new().unwrap();
    let registry = write(dir.path(), "registry.json", REGISTRY);
    let corpus = write(dir.path(), "corpus.jsonl", &corpus_jsonl());
    let graph_path = dir.path().join("graph.json");
    assert_eq!(
        run(bin()
            .args(["build", "--registry"])
            .arg(&registry)
            .arg("--corpus")
            .arg(&corpus)
            .arg("--out")
            .arg(&graph_path))
        .code,
        0
    );

    // Successes: alpha -> beta twice, alpha -> end once: 2/3 and 1/3.
    let result = run(bin()
        .args(["successors", "--from", "alpha", "--graph"])
        .arg(&graph_path));
    assert_eq!(result.code, 0);
    assert!(result.stdout.contains("1. beta (score: 667)"));
    assert!(result.stdout.contains("2. Finish —"));

    // The none format hides scores everywhere.
    let result = run(bin()
        .args(["successors", "--from", "alpha", "--format", "none", "--graph"])
        .arg(&graph_path));
    assert_eq!(result.code, 0);
    assert!(!result.stdout.contains("score"));
    assert!(result.stdout.contains("1. beta —"));

    // The env var sets the format; a flag would beat it.
    let result = run(bin()
        .env("TOOLNET_WEIGHT_FORMAT", "div10")
        .args(["successors", "--from", "alpha", "--graph"])
        .arg(&graph_path));
    assert!(result.stdout.contains("(score: 6.7)"));

    // The start row lists every tool.
    let result = run(bin()
        .args(["successors", "--from", "start", "--graph"])
        .arg(&graph_path));
    assert_eq!(result.code, 0);
    assert!(result.stdout.contains("alpha"));
    assert!(result.stdout.contains("beta"));
    assert!(result.stdout.contains("gamma"));
    assert!(!result.stdout.contains("Finish"));

    // The end node has no successors; unknown nodes are validation errors.
    let result = run(bin()
        .args(["successors", "--from", "end", "--graph"])
        .arg(&graph_path));
    assert_eq!(result.code, 2);
    let result = run(bin()
        .args(["successors", "--from", "delta", "--graph"])
        .arg(&graph_path));
    assert_eq!(result.code, 2);
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = TempDir::new().unwrap();
    let scenario = write(dir.path(), "scenario.json", SCENARIO);

    let mut outputs = Vec::new();
    for name in ["first", "second"] {
        let trace = dir.path().join(format!("{name}.csv"));
        let graph = dir.path().join(format!("{name}.json"));
        let sessions = dir.path().join(format!("{name}.jsonl"));
        let result = run(bin()
            .args(["simulate", "--scenario"])
            .arg(&scenario)
            .arg("--trace")
            .arg(&trace)
            .arg("--graph-out")
            .arg(&graph)
            .arg("--sessions-out")
            .arg(&sessions));
        assert_eq!(result.code, 0, "stderr: {}", result.stderr);
        assert!(result.stdout.contains("mode: toolnet"));
        assert!(result.stdout.contains("iterations: 20"));
        assert!(result.stdout.contains("total_tokens:"));
        outputs.push((
            fs::read(&trace).unwrap(),
            fs::read(&graph).unwrap(),
            fs::read(&sessions).unwrap(),
            result.stdout,
        ));
    }
    assert_eq!(outputs[0], outputs[1]);

    let (trace, _, sessions, _) = &outputs[0];
    let trace_text = String::from_utf8(trace.clone()).unwrap();
    assert!(trace_text.starts_with("iteration,tool_id,accumulated_score,mean_inbound_weight\n"));
    // 20 iterations x 2 tools + header.
    assert_eq!(trace_text.lines().count(), 41);
    let sessions_text = String::from_utf8(sessions.clone()).unwrap();
    assert_eq!(sessions_text.lines().count(), 20);
    for line in sessions_text.lines() {
        let session: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(session["trajectory"]["task_id"]
            .as_str()
            .unwrap()
            .starts_with("iter-"));
    }
}

#[test]
fn simulate_seed_flag_and_env_agree() {
    let dir = TempDir::new().unwrap();
    let scenario = write(dir.path(), "scenario.json", SCENARIO);
    let by_flag = dir.path().join("flag.csv");
    let by_env = dir.path().join("env.csv");
    assert_eq!(
        run(bin()
            .args(["simulate", "--seed", "99", "--scenario"])
            .arg(&scenario)
            .arg("--trace")
            .arg(&by_flag))
        .code,
        0
    );
    assert_eq!(
        run(bin()
            .env("TOOLNET_SEED", "99")
            .args(["simulate", "--scenario"])
            .arg(&scenario)
            .arg("--trace")
            .arg(&by_env))
        .code,
        0
    );
    assert_eq!(fs::read(&by_flag).unwrap(), fs::read(&by_env).unwrap());
}

#[test]
fn simulate_failed_assertions_exit_three() {
    let dir = TempDir::new().unwrap();
    let mut spec: serde_json::Value = serde_json::from_str(SCENARIO).unwrap();
    spec["assertions"] = serde_json::json!([
        {"kind": "final_score_at_least", "tool": "noise", "min": 100}
    ]);
    let scenario = write(dir.path(), "scenario.json", &spec.to_string());
    let result = run(bin().args(["simulate", "--scenario"]).arg(&scenario));
    assert_eq!(result.code, 3);
    assert!(result.stderr.contains("assertion failed"));
    assert!(result.stderr.contains("noise"));
}

#[test]
fn simulate_with_prior_graph_routes_sessions() {
    let dir = TempDir::new().unwrap();
    let registry = write(
        dir.path(),
        "registry.json",
        r#"[{"id": "signal", "description": "returns the needed answer"},
            {"id": "noise", "description": "returns random numbers"}]"#,
    );
    let corpus = write(
        dir.path(),
        "corpus.jsonl",
        &(r#"{"task_id":"t1","query":"q","outcome":"success","steps":[{"tool":"signal","thought":"","arguments":"","observation":""}]}"#.to_string() + "\n"),
    );
    let prior = dir.path().join("prior.json");
    assert_eq!(
        run(bin()
            .args(["build", "--registry"])
            .arg(&registry)
            .arg("--corpus")
            .arg(&corpus)
            .arg("--out")
            .arg(&prior))
        .code,
        0
    );
    let scenario = write(dir.path(), "scenario.json", SCENARIO);
    let graph_out = dir.path().join("final.json");
    let result = run(bin()
        .args(["simulate", "--scenario"])
        .arg(&scenario)
        .arg("--prior")
        .arg(&prior)
        .arg("--graph-out")
        .arg(&graph_out));
    assert_eq!(result.code, 0, "stderr: {}", result.stderr);
    let graph: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&graph_out).unwrap()).unwrap();
    assert_eq!(graph["iteration"], 20);
}

#[test]
fn stats_report_is_identical_on_stdout_and_disk() {
    let dir = TempDir::new().unwrap();
    let corpus = write(dir.path(), "corpus.jsonl", &corpus_jsonl());
    let to_stdout = run(bin().args(["stats", "--corpus"]).arg(&corpus));
    assert_eq!(to_stdout.code, 0);

    let out = dir.path().join("stats.json");
    let to_file = run(bin()
        .args(["stats", "--corpus"])
        .arg(&corpus)
        .arg("--out")
        .arg(&out));
    assert_eq!(to_file.code, 0);
    assert_eq!(fs::read_to_string(&out).unwrap(), to_stdout.stdout);

    let report: serde_json::Value = serde_json::from_str(&to_stdout.stdout).unwrap();
    // Successes and the failure both count: alpha -> {beta}, beta -> {gamma, beta}.
    assert_eq!(report["successor_count_histogram"]["1"], 0.5);
    assert_eq!(report["successor_count_histogram"]["2"], 0.5);
    assert_eq!(report["top_tools"][0]["id"], "beta");
}

#[test]
fn export_dot_is_stable_and_honors_min_weight() {
    let dir = TempDir::new().unwrap();
    let registry = write(dir.path(), "registry.json", REGISTRY);
    let graph_path = dir.path().join("graph.json");
    assert_eq!(
        run(bin()
            .args(["build", "--no-corpus", "--registry"])
            .arg(&registry)
            .arg("--out")
            .arg(&graph_path))
        .code,
        0
    );

    let first = run(bin().args(["export-dot", "--graph"]).arg(&graph_path));
    let second = run(bin().args(["export-dot", "--graph"]).arg(&graph_path));
    assert_eq!(first.code, 0);
    assert_eq!(first.stdout, second.stdout);
    assert!(first.stdout.starts_with("digraph toolnet {"));
    // 3 start edges + 3 tools x 4 edges.
    assert_eq!(first.stdout.matches("->").count(), 15);

    let filtered = run(bin()
        .args(["export-dot", "--min-weight", "0.3", "--graph"])
        .arg(&graph_path));
    // Only the start edges (1/3) survive; tool rows sit at 1/4.
    assert_eq!(filtered.stdout.matches("->").count(), 3);

    let out = dir.path().join("graph.dot");
    let to_file = run(bin()
        .args(["export-dot", "--graph"])
        .arg(&graph_path)
        .arg("--out")
        .arg(&out));
    assert_eq!(to_file.code, 0);
    assert_eq!(fs::read_to_string(&out).unwrap(), first.stdout);
}
