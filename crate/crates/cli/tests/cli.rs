//! End-to-end checks of the binary: artifact layout, exit codes, and
//! byte-identical reruns.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swingup"))
}

fn tiny_config(dir: &Path) -> PathBuf {
    let text = r#"
[run]
seed = 9
setting = "pendubot"

[model]
m1 = 0.5
m2 = 0.5
l1 = 0.3
l2 = 0.3
r1 = 0.15
r2 = 0.15
i1 = 0.015
i2 = 0.015
b1 = 0.01
b2 = 0.01
cf1 = 0.0
cf2 = 0.0
g = 9.81
tau_max = 3.0

[reward]
y_th = 0.35
alpha = 2.0
beta = 1.0
rho1 = 0.1
rho2 = 0.02
phi1 = 0.15
phi2 = 0.15
eta = 0.02

[sac]
gamma = 0.99
polyak_tau = 0.01
lr = 0.001
batch_size = 16
buffer_capacity = 1000
hidden_sizes = [16]
activation = "relu"
ent_alpha_mode = "auto"
ent_alpha_init = 0.2
control_hz = 100
episode_seconds = 0.5
total_steps = 60
warmup_steps = 20
eval_every = 1000
eval_episodes = 1
log_every = 20

[snes]
population_size = 4
sigma_init = 0.01
generations = 1
fitness_repeats = 1
action_noise_sigma = 0.1
scope = "final_layer"

[scoring.criteria.success]
height_threshold = 0.35
window_seconds = 2.0

[scoring.criteria.weights]
time = 0.4
torque = 0.2
energy = 0.2
peak_torque = 0.1
peak_velocity = 0.1

[scoring.criteria.normalizers]
time = 10.0
torque = 30.0
energy = 60.0
peak_torque = 6.0
peak_velocity = 20.0

[[scoring.perturbations]]
category = "torque_delay"
magnitudes = [0.002]
trials = 1
"#;
    let path = dir.join("tiny.toml");
    fs::write(&path, text).unwrap();
    path
}

fn assert_code(out: &Output, expected: i32) {
    let code = out.status.code().unwrap();
    assert_eq!(
        code,
        expected,
        "exit {code}, stdout: {}, stderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn pipeline_subcommands_produce_artifacts_and_reproduce() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());

    let train = |out: &Path| {
        bin()
            .args(["train", "--config"])
            .arg(&cfg)
            .arg("--output")
            .arg(out)
            .output()
            .unwrap()
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_code(&train(&a), 0);
    assert_code(&train(&b), 0);
    assert!(a.join("config.resolved").exists(), "missing config.resolved");
    // The snapshot embeds the output path, so only the other artifacts are
    // expected to match byte for byte across directories.
    for rel in [
        "checkpoints/sac.ckpt",
        "checkpoints/sac-final.ckpt",
        "logs/train.jsonl",
    ] {
        assert!(a.join(rel).exists(), "missing {rel}");
        assert_eq!(
            fs::read(a.join(rel)).unwrap(),
            fs::read(b.join(rel)).unwrap(),
            "{rel} not reproducible"
        );
    }

    let ckpt = a.join("checkpoints/sac.ckpt");
    let tune_dir = tmp.path().join("tune");
    let out = bin()
        .args(["finetune", "--config"])
        .arg(&cfg)
        .arg("--checkpoint")
        .arg(&ckpt)
        .arg("--output")
        .arg(&tune_dir)
        .output()
        .unwrap();
    assert_code(&out, 0);
    assert!(tune_dir.join("checkpoints/snes.ckpt").exists());
    assert!(tune_dir.join("logs/finetune.jsonl").exists());

    let eval_dir = tmp.path().join("eval");
    let out = bin()
        .args(["eval", "--config"])
        .arg(&cfg)
        .arg("--checkpoint")
        .arg(tune_dir.join("checkpoints/snes.ckpt"))
        .arg("--output")
        .arg(&eval_dir)
        .arg("--robustness")
        .output()
        .unwrap();
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("performance:"), "{stdout}");
    assert!(stdout.contains("robustness:"), "{stdout}");
    assert!(stdout.contains("average:"), "{stdout}");
    for rel in [
        "reports/report.json",
        "reports/trajectory.csv",
        "plots/trajectory.svg",
        "plots/robustness.svg",
    ] {
        assert!(eval_dir.join(rel).exists(), "missing {rel}");
    }

    let plot_out = bin()
        .arg("plot")
        .arg(eval_dir.join("reports/trajectory.csv"))
        .output()
        .unwrap();
    assert_code(&plot_out, 0);
    assert!(eval_dir.join("reports/trajectory.svg").exists());
}

#[test]
fn seed_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out_dir = tmp.path().join("seeded");
    let out = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .args(["--seed", "123", "--output"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_code(&out, 0);
    let snapshot = fs::read_to_string(out_dir.join("config.resolved")).unwrap();
    assert!(snapshot.contains("seed = 123"), "{snapshot}");
}

#[test]
fn missing_required_key_exits_two_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let broken = fs::read_to_string(&cfg).unwrap().replace("y_th = 0.35\n", "");
    fs::write(&cfg, broken).unwrap();
    let out = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--output")
        .arg(tmp.path().join("run"))
        .output()
        .unwrap();
    assert_code(&out, 2);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("y_th"), "{stderr}");
}

#[test]
fn output_collision_requires_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let out_dir = tmp.path().join("run");
    fs::create_dir_all(&out_dir).unwrap();
    fs::write(out_dir.join("keep.txt"), "data").unwrap();
    let out = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--output")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_code(&out, 3);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--force"), "{stderr}");
    let out = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--output")
        .arg(&out_dir)
        .arg("--force")
        .output()
        .unwrap();
    assert_code(&out, 0);
}

#[test]
fn corrupt_checkpoint_exits_three_with_checksum_message() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path());
    let train_dir = tmp.path().join("train");
    let out = bin()
        .args(["train", "--config"])
        .arg(&cfg)
        .arg("--output")
        .arg(&train_dir)
        .output()
        .unwrap();
    assert_code(&out, 0);
    let ckpt_path = train_dir.join("checkpoints/sac.ckpt");
    let mut bytes = fs::read(&ckpt_path).unwrap();
    let n = bytes.len();
    bytes[n - 1] ^= 0x01;
    fs::write(&ckpt_path, bytes).unwrap();
    let out = bin()
        .args(["eval", "--config"])
        .arg(&cfg)
        .arg("--checkpoint")
        .arg(&ckpt_path)
        .arg("--output")
        .arg(tmp.path().join("eval"))
        .output()
        .unwrap();
    assert_code(&out, 3);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("checksum"), "{stderr}");
}

#[test]
fn malformed_csv_reports_row_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("broken.csv");
    fs::write(
        &path,
        "t,theta1,theta2,omega1,omega2,tau1,tau2,action,reward\n\
         0.0,0,0,0,0,0,0,0,0\n\
         0.002,0,bogus,0,0,0,0,0,0\n",
    )
    .unwrap();
    let out = bin().arg("plot").arg(&path).output().unwrap();
    assert_code(&out, 3);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("row 3"), "{stderr}");
    assert!(stderr.contains("theta2"), "{stderr}");

    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = bin().arg("plot").arg(&empty).output().unwrap();
    assert_code(&out, 3);
}

#[test]
fn shipped_presets_parse_and_validate() {
    for name in ["pendubot.toml", "acrobot.toml", "smoke.toml"] {
        let path = Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../configs")
            .join(name);
        let cfg = swingup_core::config::ExperimentConfig::load(&path)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
        cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
