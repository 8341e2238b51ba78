#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_trayforge"))
}

pub fn core_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

pub fn cli_fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Fresh scratch directory under the target dir.
pub struct Scratch {
    pub dir: PathBuf,
}

impl Scratch {
    pub fn new(name: &str) -> Self {
        let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
        let _ = fs::remove_dir_all(&dir);
        fs::create_dir_all(&dir).unwrap();
        Scratch { dir }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, contents).unwrap();
        p
    }

    pub fn read(&self, name: &str) -> String {
        fs::read_to_string(self.path(name)).unwrap()
    }
}

pub fn run(cmd: &mut Command) -> Output {
    cmd.env_remove("TRAYFORGE_SEED").output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Packs the 20-instrument fixture into `scratch/layout.json`.
pub fn pack_fixture(s: &Scratch) -> PathBuf {
    let out = s.path("layout.json");
    let o = run(bin()
        .arg("pack")
        .arg("--catalog")
        .arg(core_fixture("catalog31.json"))
        .arg("--checklist")
        .arg(core_fixture("checklist20.json"))
        .arg("--tray")
        .arg(core_fixture("tray.json"))
        .arg("--padding")
        .arg(core_fixture("padding.json"))
        .arg("--out")
        .arg(&out)
        .arg("--svg")
        .arg(s.path("layout.svg")));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    out
}
