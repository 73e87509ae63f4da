use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_cnls-lab");

fn lab(args: &[&str], env_out: Option<&Path>, cwd: &Path) -> Output {
    let mut c = Command::new(BIN);
    c.args(args).current_dir(cwd).env_remove("CNLS_LAB_OUT");
    if let Some(p) = env_out {
        c.env("CNLS_LAB_OUT", p);
    }
    c.output().expect("spawn cnls-lab")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SMALL_EVOLVE: &str = "\
name = small
[grid]
r_max = 12
n = 240
[solver]
t_end = 0.05
dt0 = 1e-3
record_stride = 10
[initial]
kind = gaussian
a = 0.5
[diagnostics]
virial_radii = 1, 2
morawetz_r0 = 4
morawetz_count = 4
morawetz_cells = 60
n_theta = 64
snapshot_every = 2
";

const SMALL_SCAN: &str = "\
name = grid-scan
[grid]
r_max = 12
n = 240
[scan]
family = gaussian
a = 0.2, 0.6, 1.0, 3.0
lam = 1, 2
evolve = true
t_end = 0.02
";

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn usage_errors_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    assert_eq!(code(&lab(&["frobnicate"], None, d)), 3);
    assert_eq!(code(&lab(&["evolve", "--preset", "nope"], None, d)), 3);
    assert_eq!(code(&lab(&["verify", "--n", "0"], None, d)), 3);
    assert_eq!(
        code(&lab(&["evolve", "--config", "/nonexistent.ini"], None, d)),
        3
    );

    let bad = write_config(d, "bad.ini", "[grid]\nr_max = 10\nwat = 1\n");
    let o = lab(&["evolve", "--config", bad.to_str().unwrap()], None, d);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let zero = write_config(
        d,
        "zero.ini",
        "[grid]\nr_max = 10\nn = 100\n[initial]\nkind = gaussian\na = 0\n",
    );
    assert_eq!(
        code(&lab(
            &["minimize", "--config", zero.to_str().unwrap()],
            None,
            d
        )),
        3
    );
}

#[test]
fn help_and_version_exit_0() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(&["--help"], None, tmp.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("morawetz"));
    assert_eq!(code(&lab(&["--version"], None, tmp.path())), 0);
}

#[test]
fn verify_reference_grid_passes_and_coarse_grid_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lab(&["verify", "--json"], None, tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], true);

    let o = lab(&["verify", "--n", "200"], None, tmp.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL m_rel"));
}

#[test]
fn minimize_without_convergence_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "m.ini",
        "[grid]\nr_max = 40\nn = 800\n[minimize]\nmax_iters = 3\n",
    );
    let out = tmp.path().join("run");
    let o = lab(
        &[
            "minimize",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--json",
        ],
        None,
        tmp.path(),
    );
    assert_eq!(code(&o), 4);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["converged"], false);
    assert_eq!(v["iterations"], 3);
    assert!(out.join("minimize.csv").exists());
}

#[test]
fn output_root_comes_from_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "e.ini", SMALL_EVOLVE);
    let root = tmp.path().join("elsewhere");
    let o = lab(
        &["evolve", "--config", cfg.to_str().unwrap()],
        Some(&root),
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(root.join("small").join("series.csv").exists());
    assert!(!tmp.path().join("cnls-out").exists());

    // without the variable the default root under the working directory is used
    let o = lab(
        &["evolve", "--config", cfg.to_str().unwrap()],
        None,
        tmp.path(),
    );
    assert_eq!(code(&o), 0);
    assert!(tmp.path().join("cnls-out/small/series.csv").exists());
}

#[test]
fn evolve_outputs_are_deterministic_and_stamped() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "e.ini", SMALL_EVOLVE);
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = lab(
            &[
                "evolve",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
            ],
            None,
            tmp.path(),
        );
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let files = files_under(&a);
    assert_eq!(files, files_under(&b));
    for f in &files {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{}",
            f.display()
        );
    }

    let hash = {
        let text = fs::read_to_string(a.join("config.ini")).unwrap();
        cnls_lab::experiment::config::hash_text(&text)
    };
    for f in files
        .iter()
        .filter(|f| f.extension().is_some_and(|e| e == "csv"))
    {
        let text = fs::read_to_string(a.join(f)).unwrap();
        let head: Vec<&str> = text.lines().take(3).collect();
        assert!(head[0].starts_with("# cnls-lab "), "{}", f.display());
        assert_eq!(
            head[1],
            format!("# config_sha256={hash}"),
            "{}",
            f.display()
        );
        assert_eq!(
            head[2],
            "# grid r_max=1.2000000000000000e1 n=240",
            "{}",
            f.display()
        );
    }

    // the stored snapshots feed the morawetz subcommand
    let o = lab(
        &[
            "morawetz",
            a.to_str().unwrap(),
            "--r0",
            "4",
            "--count",
            "4",
            "--n-theta",
            "64",
            "--cells",
            "60",
            "--out",
            tmp.path().join("mw").to_str().unwrap(),
            "--json",
        ],
        None,
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["bounded"], true);
    assert!(v["snapshots"].as_u64().unwrap() >= 2);
}

#[test]
fn scan_resume_completes_a_torn_table() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.ini", SMALL_SCAN);
    let scan = |out: &Path, extra: &[&str]| {
        let mut args = vec![
            "scan",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let o = lab(&args, None, tmp.path());
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read_to_string(out.join("scan.csv")).unwrap()
    };
    let full = scan(&tmp.path().join("full"), &[]);
    let rows: Vec<&str> = full
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    assert_eq!(rows.len(), 8);
    assert!(
        rows[0].starts_with("2.0000000000000001e-1,1.0000000000000000e0,K_PLUS,COMPLETED"),
        "{}",
        rows[0]
    );

    let parallel = scan(&tmp.path().join("par"), &["--jobs", "3"]);
    assert_eq!(parallel, full);

    // a crash after three rows, mid-way through the fourth
    let torn_dir = tmp.path().join("torn");
    fs::create_dir_all(&torn_dir).unwrap();
    let keep = full.lines().count() - 5;
    let mut torn: String = full.lines().take(keep).map(|l| format!("{l}\n")).collect();
    torn.push_str(&full.lines().nth(keep).unwrap()[..7]);
    fs::write(torn_dir.join("scan.csv"), torn).unwrap();
    let resumed = scan(&torn_dir, &["--resume", "--json"]);
    assert_eq!(resumed, full);

    // a table from another configuration is refused
    let other = write_config(
        tmp.path(),
        "o.ini",
        &SMALL_SCAN.replace("t_end = 0.02", "t_end = 0.03"),
    );
    let o = lab(
        &[
            "scan",
            "--config",
            other.to_str().unwrap(),
            "--out",
            torn_dir.to_str().unwrap(),
            "--resume",
        ],
        None,
        tmp.path(),
    );
    assert_eq!(code(&o), 3);
    assert_eq!(fs::read_to_string(torn_dir.join("scan.csv")).unwrap(), full);
}
