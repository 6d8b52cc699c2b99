//! The CLI pipeline used by the golden-file tests and the acceptance suite.

use std::path::{Path, PathBuf};

use chainforge::cli::run_cli_with;

pub const M: &str = "m_{\\chi}";
pub const OMEGA: &str = "Omega_{\\chi}h^2";
pub const LOG_M: &str = "log(m_{\\chi})";

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(name: &str) -> PathBuf {
    manifest_dir().join("tests/fixtures").join(name)
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("chainforge").chain(args.iter().copied());
    let code = run_cli_with(argv, &mut out, &mut err);
    Run {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

pub fn ok(args: &[&str]) -> String {
    let r = cli(args);
    assert_eq!(r.code, 0, "{args:?} failed: {}", r.stderr);
    r.stdout
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub struct Pipeline {
    pub info: String,
    pub derive: String,
    pub regions: String,
    pub json: Vec<u8>,
    pub csv: Vec<u8>,
    pub png: Vec<u8>,
}

/// convert -> derive -> marginalize (2D) -> regions -> export -> plot.
pub fn run_pipeline(dir: &Path, chunk_rows: &str) -> Pipeline {
    let store = dir.join("chain.cf");
    let grid = dir.join("grid.json");
    let csv = dir.join("grid.csv");
    let png = dir.join("grid.png");
    let chain = fixture("chain.txt");
    let names = fixture("chain.names");

    ok(&[
        "convert",
        s(&chain),
        "-o",
        s(&store),
        "--params-file",
        s(&names),
        "--chunk-rows",
        chunk_rows,
    ]);
    let derive = ok(&[
        "derive",
        s(&store),
        "--name",
        LOG_M,
        "--expr",
        "log10(`m_{\\chi}`)",
    ]);
    let info = ok(&["info", s(&store)]);
    ok(&[
        "marginalize",
        s(&store),
        "-x",
        LOG_M,
        "--xlim",
        "0,3",
        "-y",
        OMEGA,
        "--ylim",
        "0,0.2",
        "-o",
        s(&grid),
    ]);
    let regions = ok(&["regions", s(&grid), "--credible", "0.95,0.68"]);
    ok(&["export", s(&grid), "-o", s(&csv)]);
    ok(&["plot", s(&grid), "-o", s(&png)]);

    Pipeline {
        info,
        derive,
        regions,
        json: std::fs::read(&grid).unwrap(),
        csv: std::fs::read(&csv).unwrap(),
        png: std::fs::read(&png).unwrap(),
    }
}

pub fn check_golden(name: &str, actual: &[u8]) {
    let path = manifest_dir().join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with UPDATE_GOLDEN=1)", path.display()));
    assert!(expected == actual, "{name} differs from its golden file");
}
