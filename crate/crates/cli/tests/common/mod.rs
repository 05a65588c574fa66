#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lge_synthlab::volcore::{save_labels, save_volume};

#[path = "../../../core/tests/support/mod.rs"]
pub mod support;

pub fn lge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lge-synthlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn ok(args: &[&str]) -> Output {
    let out = lge(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf8 path")
}

pub struct PhantomFiles {
    pub volume: PathBuf,
    pub endo: PathBuf,
    pub wall: PathBuf,
}

/// Writes a phantom volume and its masks as NIfTI under `dir`.
pub fn write_phantom(dir: &Path, tag: &str, dims: [usize; 3], seed: u64) -> PhantomFiles {
    let p = support::fixtures::phantom(dims, [1.0; 3], seed);
    let files = PhantomFiles {
        volume: dir.join(format!("{tag}.nii")),
        endo: dir.join(format!("{tag}_endo.nii")),
        wall: dir.join(format!("{tag}_wall.nii")),
    };
    save_volume(&p.volume, &files.volume).unwrap();
    save_labels(&p.endo, &files.endo).unwrap();
    save_labels(&p.wall, &files.wall).unwrap();
    files
}
