use std::process::Command;

fn main() {
    let describe = std::env::var("STOCHFLOCK_GIT_DESCRIBE").ok().or_else(|| {
        Command::new("git")
            .args(["describe", "--always", "--dirty", "--tags"])
            .output()
            .ok()
            .filter(|o| o.status.success())
            .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
            .filter(|s| !s.is_empty())
    });
    println!(
        "cargo:rustc-env=STOCHFLOCK_GIT_DESCRIBE={}",
        describe.unwrap_or_else(|| "unknown".into())
    );
    println!("cargo:rerun-if-env-changed=STOCHFLOCK_GIT_DESCRIBE");
    for p in ["../../.git/HEAD", "../../.git/index"] {
        if std::path::Path::new(p).exists() {
            println!("cargo:rerun-if-changed={p}");
        }
    }
}
