//! End-to-end checks of the command-line surface: exit codes, file
//! outputs, help text, and bitwise reproducibility of reruns.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vimae"))
}

fn write_config(dir: &Path, out_dir: &Path, extra: &str) -> std::path::PathBuf {
    let path = dir.join("run.json");
    let body = format!(
        r#"{{
  "dataset": "synthetic",
  "output_dir": "{}",
  "synth_classes": 3,
  "synth_train_per_class": 20,
  "synth_test_per_class": 10,
  "synth_image_size": 8,
  "latent_dim": 2,
  "hidden_sizes": [16],
  "epochs": 2,
  "batch_size": 10,
  "num_labeled": 30{}
}}"#,
        out_dir.display(),
        extra
    );
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn train_happy_path_writes_checkpoint_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &out, "");
    let res = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("model.ckpt").exists());
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(metrics.starts_with("epoch,total,distortion,divergence,seconds\n"));
    assert_eq!(metrics.lines().count(), 3);
}

#[test]
fn unknown_flag_exits_one_and_names_the_flag() {
    let res = run(&["train", "--bogus", "1"]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("--bogus"));
}

#[test]
fn unknown_subcommand_exits_one() {
    let res = run(&["frobnicate"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"dataset":"synthetic","output_dir":"{}","epocs":3}}"#,
            out.display()
        ),
    )
    .unwrap();
    let res = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("epocs"));
}

#[test]
fn eval_on_missing_checkpoint_exits_two_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never-trained");
    let cfg = write_config(dir.path(), &out, "");
    let res = run(&["eval", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("model.ckpt"));
}

#[test]
fn help_lists_all_config_keys_with_defaults() {
    for sub in ["train", "eval", "generate", "reconstruct", "export-latents", "decompose-rate", "make-synth", "compare"] {
        let res = run(&[sub, "--help"]);
        assert!(res.status.success());
        let text = String::from_utf8_lossy(&res.stdout);
        for key in ["--config", "--dataset", "--output-dir", "--latent-dim", "--epochs", "--seed", "--lambda", "--no-timestamp"] {
            assert!(text.contains(key), "{sub} --help missing {key}");
        }
        assert!(text.contains("[default:"), "{sub} --help shows defaults");
    }
}

#[test]
fn overrides_take_precedence_over_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &out, "");
    let res = run(&["train", "--config", cfg.to_str().unwrap(), "--epochs", "1"]);
    assert!(res.status.success());
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 2, "one epoch row expected");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    let cfg1 = write_config(dir.path(), &out1, "");
    assert!(run(&["train", "--config", cfg1.to_str().unwrap()]).status.success());
    let cfg2 = dir.path().join("run2.json");
    std::fs::copy(&cfg1, &cfg2).unwrap();
    let res = bin()
        .args(["train", "--config", cfg2.to_str().unwrap(), "--output-dir"])
        .arg(&out2)
        .output()
        .unwrap();
    assert!(res.status.success());
    assert_eq!(
        std::fs::read(out1.join("model.ckpt")).unwrap(),
        std::fs::read(out2.join("model.ckpt")).unwrap()
    );
    assert_eq!(
        std::fs::read(out1.join("metrics.csv")).unwrap(),
        std::fs::read(out2.join("metrics.csv")).unwrap()
    );
}

#[test]
fn full_artifact_pipeline_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &out, r#", "gen_count": 9, "recon_count": 4"#);
    let c = cfg.to_str().unwrap();
    assert!(run(&["train", "--config", c]).status.success());
    assert!(run(&["eval", "--config", c]).status.success());
    assert!(run(&["generate", "--config", c]).status.success());
    assert!(run(&["reconstruct", "--config", c]).status.success());
    assert!(run(&["export-latents", "--config", c]).status.success());
    for artifact in ["eval.csv", "generated.pgm", "reconstruction.pgm", "latents.csv"] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }
    let eval = std::fs::read_to_string(out.join("eval.csv")).unwrap();
    assert!(eval.starts_with("model,corruption,param,probe,accuracy\n"));
    assert_eq!(eval.lines().count(), 6, "header plus five grid cells");
}

#[test]
fn decompose_rate_needs_gaussian_encoder_and_normal_prior() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &out,
        r#", "family": "vae", "prior": "normal", "decompose_points": 4, "decompose_mc_samples": 500"#,
    );
    let c = cfg.to_str().unwrap();
    assert!(run(&["train", "--config", c]).status.success());
    let res = run(&["decompose-rate", "--config", c]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("decompose.csv").exists());

    // the default VIMAE setup (deterministic encoder) is refused at runtime
    let out2 = dir.path().join("out2");
    let cfg2 = write_config(dir.path(), &out2, "");
    let c2 = cfg2.to_str().unwrap();
    assert!(run(&["train", "--config", c2]).status.success());
    let res = run(&["decompose-rate", "--config", c2]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn make_synth_exports_loadable_idx_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    let cfg = write_config(dir.path(), &out, "");
    assert!(run(&["make-synth", "--config", cfg.to_str().unwrap()]).status.success());

    // train again from the exported IDX pair
    let out2 = dir.path().join("out2");
    let idx_cfg = dir.path().join("idx.json");
    std::fs::write(
        &idx_cfg,
        format!(
            r#"{{
  "dataset": "idx",
  "output_dir": "{}",
  "idx_train_images": "{}",
  "idx_train_labels": "{}",
  "idx_test_images": "{}",
  "idx_test_labels": "{}",
  "latent_dim": 2,
  "hidden_sizes": [16],
  "epochs": 1,
  "batch_size": 10
}}"#,
            out2.display(),
            out.join("train.images.idx").display(),
            out.join("train.labels.idx").display(),
            out.join("test.images.idx").display(),
            out.join("test.labels.idx").display(),
        ),
    )
    .unwrap();
    let res = run(&["train", "--config", idx_cfg.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    assert!(out2.join("model.ckpt").exists());
}

#[test]
fn compare_writes_a_merged_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let cfg = write_config(dir.path(), &out, r#", "epochs": 1, "num_labeled": 20"#);
    let res = run(&["compare", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let table = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(table.starts_with("model,corruption,param,probe,accuracy\n"));
    // 4 models × 5 grid cells + header
    assert_eq!(table.lines().count(), 21);
    for model in ["vae", "beta-vae", "vimae-n", "vimae-l"] {
        assert!(table.contains(&format!("\n{model},")), "missing rows for {model}");
        assert!(out.join(model).join("model.ckpt").exists());
    }
}

#[test]
fn resume_flag_continues_training() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &out, "");
    let c = cfg.to_str().unwrap();
    assert!(run(&["train", "--config", c, "--epochs", "1"]).status.success());
    assert!(run(&["train", "--config", c, "--epochs", "2", "--resume", "true"]).status.success());
    let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 3, "two epoch rows after resume");
}
