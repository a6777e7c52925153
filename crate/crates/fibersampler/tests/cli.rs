use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fibersampler::manifest::read_checksums;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fibersampler"))
}

fn run(cmd: &str, config: &Path, extra: &[&str]) -> Output {
    bin().arg(cmd).arg("--config").arg(config).args(extra).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn enumerate_two_by_two() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "dims=2x2\n1,0\n0,1\n");
    let cfg = write(dir.path(), "run.cfg", "model.family=independence\nmodel.dims=2x2\ndata.table=t.csv\n");
    let out = run("enumerate", &cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("out/fiber.csv"));
    assert_eq!(rows, vec![vec!["0", "1", "1", "0"], vec!["1", "0", "0", "1"]]);
}

#[test]
fn enumerate_zero_table_is_one_row() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "dims=2x3\n0,0,0,0,0,0\n");
    let cfg = write(dir.path(), "run.cfg", "model.family=independence\nmodel.dims=2x3\ndata.table=t.csv\n");
    assert!(run("enumerate", &cfg, &[]).status.success());
    assert_eq!(csv_rows(&dir.path().join("out/fiber.csv")), vec![vec!["0"; 6]]);
}

#[test]
fn enumerate_output_sorted_and_unique() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "dims=3x3\n2,1,0\n0,1,1\n1,0,2\n");
    let cfg = write(dir.path(), "run.cfg", "model.family=independence\nmodel.dims=3x3\ndata.table=t.csv\n");
    assert!(run("enumerate", &cfg, &[]).status.success());
    let rows: Vec<Vec<i64>> = csv_rows(&dir.path().join("out/fiber.csv"))
        .into_iter()
        .map(|r| r.iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(rows.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(rows.len(), 35);
}

#[test]
fn enumerate_cap_refuses_with_capacity_code() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "dims=3x3\n2,1,0\n0,1,1\n1,0,2\n");
    let cfg = write(dir.path(), "run.cfg", "model.family=independence\nmodel.dims=3x3\ndata.table=t.csv\nenumerate.cap=10\n");
    assert_eq!(run("enumerate", &cfg, &[]).status.code(), Some(4));
}

#[test]
fn invalid_header_exits_two_and_names_the_rule() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "rows=2,cols=2\n1,0\n0,1\n");
    let cfg = write(dir.path(), "run.cfg", "model.family=independence\nmodel.dims=2x2\ndata.table=t.csv\n");
    let out = run("train", &cfg, &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[table]") && err.contains("dims=d1xd2[xd3]"), "{err}");
}

const SMALL_TRAIN: &str = "model.family=independence\nmodel.dims=3x3\ndata.table=t.csv\ntrain.episodes=20\ntrain.hidden=16,16\n";

#[test]
fn same_seed_gives_identical_checksums() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.csv", "dims=3x3\n2,1,0\n0,1,1\n1,0,2\n");
    let cfg = write(dir.path(), "run.cfg", SMALL_TRAIN);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    for (out, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        let o = run("train", &cfg, &["--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let sa = read_checksums(&a.join("manifest.json")).unwrap();
    assert_eq!(sa, read_checksums(&b.join("manifest.json")).unwrap());
    assert_ne!(sa["policy.txt"], read_checksums(&c.join("manifest.json")).unwrap()["policy.txt"]);
    assert_eq!(sa.len(), 3);
}

fn trained(dir: &Path, cfg_text: &str, table: &str) -> PathBuf {
    write(dir, "t.csv", table);
    let cfg = write(dir, "train.cfg", cfg_text);
    let o = run("train", &cfg, &["--out", dir.join("model").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("model/policy.txt")
}

#[test]
fn sample_and_test_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path(), SMALL_TRAIN, "dims=3x3\n2,1,0\n0,1,1\n1,0,2\n");
    let cfg = write(
        dir.path(),
        "use.cfg",
        &format!("{SMALL_TRAIN}data.policy=model/policy.txt\nsample.steps=500\ntest.chains=1\ntest.chain_length=1\n"),
    );
    let o = run("sample", &cfg, &["--out", dir.path().join("s").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("s/samples.csv"));
    assert_eq!(rows.len(), 501);
    for r in &rows {
        let v: Vec<i64> = r[..9].iter().map(|x| x.parse().unwrap()).collect();
        assert_eq!([v[0] + v[1] + v[2], v[3] + v[4] + v[5], v[6] + v[7] + v[8]], [3, 2, 3]);
        assert_eq!([v[0] + v[3] + v[6], v[1] + v[4] + v[7], v[2] + v[5] + v[8]], [3, 2, 3]);
    }

    let o = run("test", &cfg, &["--out", dir.path().join("g").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let pv = csv_rows(&dir.path().join("g/p_values.csv"));
    assert_eq!(pv.len(), 1);
    let p: f64 = pv[0][1].parse().unwrap();
    assert!(p == 0.5 || p == 1.0, "{p}");
    assert!(dir.path().join("g/histogram.csv").exists());
}

#[test]
fn policy_for_another_basis_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    trained(dir.path(), SMALL_TRAIN, "dims=3x3\n2,1,0\n0,1,1\n1,0,2\n");
    write(dir.path(), "u.csv", "dims=3x4\n1,1,1,1\n1,1,1,1\n1,1,1,1\n");
    let cfg = write(
        dir.path(),
        "use.cfg",
        "model.family=independence\nmodel.dims=3x4\ndata.table=u.csv\ndata.policy=model/policy.txt\n",
    );
    let o = run("sample", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("incompatible policy"));
}

#[test]
fn structural_zeros_survive_sampling() {
    let dir = tempfile::tempdir().unwrap();
    let mut cells = vec![2i64; 27];
    for z in [0, 13, 26] {
        cells[z] = 0;
    }
    let table = format!("dims=3x3x3\n{}\n", cells.iter().map(i64::to_string).collect::<Vec<_>>().join(","));
    let base = "model.family=all_two_way\nmodel.dims=3x3x3\nmodel.structural_zeros=0,13,26\ndata.table=t.csv\ntrain.episodes=10\ntrain.hidden=16\n";
    trained(dir.path(), base, &table);
    let cfg = write(dir.path(), "use.cfg", &format!("{base}data.policy=model/policy.txt\nsample.steps=2000\nsample.kind=explore\n"));
    let o = run("sample", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("out/samples.csv"));
    assert_eq!(rows.len(), 2001);
    let distinct: std::collections::BTreeSet<_> = rows.iter().map(|r| r[..27].to_vec()).collect();
    assert!(distinct.len() > 1);
    for r in &rows {
        for z in [0, 13, 26] {
            assert_eq!(r[z], "0");
        }
    }
}

#[test]
fn lift_places_moves_in_parent_kernel() {
    let dir = tempfile::tempdir().unwrap();
    // 4-cycle on nodes 1..4 plus a pendant node 5
    write(dir.path(), "g.txt", "1 2\n2 3\n3 4\n4 1\n4 5\n");
    // pairs of {1,2,3,4}: 12 13 14 23 24 34
    write(dir.path(), "m.txt", "c=1 d=6\n1 0 -1 -1 0 1\n");
    let cfg = write(
        dir.path(),
        "lift.cfg",
        "model.family=beta\nmodel.nodes=5\ndata.edges=g.txt\ndata.move=m.txt\nlift.sub_nodes=1,2,3,4\n",
    );
    let o = run("lift", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("out/lifted_moves.txt")).unwrap();
    // parent pairs: 12 13 14 15 23 24 25 34 35 45
    assert_eq!(text, "c=1 d=10\n1 0 -1 0 -1 0 0 1 0 0\n");
}

#[test]
fn beta_training_with_decomposition() {
    let dir = tempfile::tempdir().unwrap();
    // two K4 blocks joined by the bridge 4-5
    write(
        dir.path(),
        "g.txt",
        "1 2\n1 3\n1 4\n2 3\n2 4\n3 4\n4 5\n5 6\n5 7\n5 8\n6 7\n6 8\n7 8\n",
    );
    let cfg = write(
        dir.path(),
        "b.cfg",
        "model.family=beta\nmodel.nodes=8\ndata.edges=g.txt\ndecompose.strategy=bridges\ntrain.episodes=5\ntrain.hidden=8\n",
    );
    let o = run("train", &cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let basis = std::fs::read_to_string(dir.path().join("out/basis.txt")).unwrap();
    // each K4 block contributes 6 - 4 = 2 moves
    assert!(basis.starts_with("c=4 d=28\n"), "{basis}");
    let rows: Vec<Vec<i64>> =
        basis.lines().skip(1).map(|l| l.split(' ').map(|v| v.parse().unwrap()).collect()).collect();
    // no move touches the bridge pair (4, 5), 0-based (3, 4) at index 18
    let bridge = 3 * 8 - 3 * 4 / 2;
    assert!(rows.iter().all(|r| r[bridge] == 0));
}
