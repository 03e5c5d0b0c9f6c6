use std::process::Command;

// Records the current commit for the version string in run manifests.
fn main() {
    let rev = Command::new("git")
        .args(["rev-parse", "--short=12", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_default();
    println!("cargo:rustc-env=NEXFAM_GIT_REV={rev}");
    println!("cargo:rerun-if-changed=build.rs");
}
