use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use tempfile::TempDir;

const ALICE: &str = include_str!("../../core/fixtures/alice_schmidt.txt");
const ALICE_ATTRS: &str = "text\tFull Name\tAlice Schmidt\ntext\tNationality\tGerman\ndate\tDate of Birth\t29.07.1984\n";

struct Env {
    dir: TempDir,
}

impl Env {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.path(name);
        std::fs::write(&p, contents).unwrap();
        p
    }

    fn cmd(&self, args: &[&str]) -> Command {
        let mut c = Command::new(env!("CARGO_BIN_EXE_oblivion"));
        c.args(args)
            .env("OBLIVION_HOME", self.path("home"))
            .env("RUST_LOG", "warn")
            .current_dir(self.dir.path());
        c
    }

    fn run(&self, args: &[&str]) -> Output {
        self.cmd(args).output().unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    }

    /// CA, user and OCP keys plus Alice's credentials; returns their paths.
    fn setup_alice(&self) -> Vec<String> {
        self.ok(&["ca", "init", "512", "--seed", "1"]);
        self.ok(&["user", "keygen", "--bits", "512", "--seed", "2"]);
        self.ok(&["keygen", "ocp", "--bits", "512", "--seed", "3"]);
        let attrs = self.write("alice.tsv", ALICE_ATTRS);
        let out = self.ok(&["ca", "certify", "home/user.vk", attrs.to_str().unwrap()]);
        out.lines().map(str::to_owned).collect()
    }
}

fn code(out: &Output) -> Option<i32> {
    out.status.code()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn certify_five_attributes_gives_five_verifiable_files() {
    let env = Env::new();
    env.ok(&["ca", "init", "1024", "--seed", "7"]);
    env.ok(&["user", "keygen", "--seed", "8"]);
    let attrs = env.write(
        "five.tsv",
        "text\tFull Name\tAlice Schmidt\ntext\tNationality\tGerman\ndate\tDate of Birth\t29.07.1984\n\
         text\tPlace of Birth\tHamburg\ntext\tCurrent Residence\tBerlin\n",
    );
    let files = env.ok(&["ca", "certify", "home/user.vk", attrs.to_str().unwrap()]);
    let files: Vec<&str> = files.lines().collect();
    assert_eq!(files.len(), 5);
    assert!(files[0].ends_with("01-full-name.attr"));
    let mut args = vec!["ca", "verify"];
    args.extend(&files);
    let out = env.ok(&args);
    assert_eq!(out.lines().filter(|l| l.starts_with("ok\t")).count(), 5);
}

#[test]
fn tampered_credential_fails_verification() {
    let env = Env::new();
    let files = env.setup_alice();
    let mut bytes = std::fs::read(&files[0]).unwrap();
    let at = bytes.windows(5).position(|w| w == b"Alice").unwrap();
    bytes[at] = b'E';
    std::fs::write(&files[0], bytes).unwrap();
    let out = env.run(&["ca", "verify", &files[0]]);
    assert_eq!(code(&out), Some(1), "{}", stderr(&out));
}

#[test]
fn duplicate_attribute_names_are_refused() {
    let env = Env::new();
    env.ok(&["ca", "init", "512", "--seed", "1"]);
    env.ok(&["user", "keygen", "--bits", "512", "--seed", "2"]);
    let attrs = env.write("dup.tsv", "text\tFull Name\tA\ntext\tFull Name\tB\n");
    let out = env.run(&["ca", "certify", "home/user.vk", attrs.to_str().unwrap()]);
    assert_eq!(code(&out), Some(2));
    assert!(stderr(&out).contains("more than once"), "{}", stderr(&out));
}

#[test]
fn missing_and_corrupt_keys_are_io_errors() {
    let env = Env::new();
    let attrs = env.write("a.tsv", ALICE_ATTRS);
    let out = env.run(&["ca", "certify", "nope.vk", attrs.to_str().unwrap()]);
    assert_eq!(code(&out), Some(2));
    env.ok(&["ca", "init", "512", "--seed", "1"]);
    let bad = env.write("bad.vk", "OBLV-KEY garbage");
    let out = env.run(&["ca", "certify", bad.to_str().unwrap(), attrs.to_str().unwrap()]);
    assert_eq!(code(&out), Some(2));
    assert!(stderr(&out).contains("bad.vk"), "{}", stderr(&out));
}

#[test]
fn existing_keys_are_not_overwritten() {
    let env = Env::new();
    env.ok(&["ca", "init", "512", "--seed", "1"]);
    assert_eq!(code(&env.run(&["ca", "init", "512", "--seed", "1"])), Some(2));
    env.ok(&["ca", "init", "512", "--seed", "1", "--force"]);
}

#[test]
fn tag_reports_the_three_alice_matches() {
    let env = Env::new();
    let article = env.write("alice.txt", ALICE);
    let attrs = env.write("alice.tsv", ALICE_ATTRS);
    let out = env.ok(&["user", "tag", article.to_str().unwrap(), "--attrs", attrs.to_str().unwrap()]);
    let matches: Vec<Vec<&str>> = out
        .lines()
        .filter(|l| l.starts_with("match\t"))
        .map(|l| l.split('\t').collect())
        .collect();
    let summary: Vec<(&str, &str, &str)> = matches.iter().map(|m| (m[1], m[2], m[4])).collect();
    assert_eq!(
        summary,
        vec![
            ("Full Name", "exact", "Alice Schmidt"),
            ("Nationality", "synonym", "citizen of Germany"),
            ("Date of Birth", "age-derived", "30 years old"),
        ]
    );
    assert!(out.contains("score\t1.00\taffected"));
}

#[test]
fn claim_without_matches_cannot_claim() {
    let env = Env::new();
    let files = env.setup_alice();
    let article = env.write("other.txt", "url: https://example.org/x\n\nNothing about anyone here.\n");
    let mut args = vec!["user", "claim", article.to_str().unwrap()];
    args.extend(files.iter().map(String::as_str));
    let out = env.run(&args);
    assert_eq!(code(&out), Some(1));
    assert!(stderr(&out).contains("cannot claim"), "{}", stderr(&out));
}

#[test]
fn claim_writes_a_request_message() {
    let env = Env::new();
    let files = env.setup_alice();
    let article = env.write("alice.txt", ALICE);
    let mut args = vec!["user", "claim", article.to_str().unwrap(), "--out", "req.msg"];
    args.extend(files.iter().map(String::as_str));
    env.ok(&args);
    let bytes = std::fs::read(env.path("req.msg")).unwrap();
    assert!(bytes.starts_with(b"OBLV-MSG"));
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn start_server(env: &Env, article: &Path) -> (Server, String) {
    start_party(env, &["--index", article.to_str().unwrap()])
}

fn start_party(env: &Env, extra: &[&str]) -> (Server, String) {
    let mut args = vec!["serve", "--listen", "127.0.0.1:0"];
    args.extend(extra);
    let mut child = env
        .cmd(&args)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("address line").to_owned();
    (Server(child), addr)
}

#[test]
fn claim_end_to_end_against_local_server() {
    let env = Env::new();
    let files = env.setup_alice();
    let article = env.write("alice.txt", ALICE);
    let (_server, addr) = start_server(&env, &article);
    let mut args = vec!["user", "claim", article.to_str().unwrap(), "--submit", &addr];
    args.extend(files.iter().map(String::as_str));
    let out = env.ok(&args);
    assert!(out.contains("delisted https://news.example.org/"), "{out}");

    // The link is gone now, so a fresh claim is turned away by the index.
    std::thread::sleep(std::time::Duration::from_millis(1100));
    let out = env.run(&args);
    assert_eq!(code(&out), Some(1));
    assert!(stderr(&out).contains("not indexed"), "{}", stderr(&out));
}

#[test]
fn ocp_and_indexing_system_can_run_apart() {
    let env = Env::new();
    let files = env.setup_alice();
    let article = env.write("alice.txt", ALICE);
    let (_ocp, ocp_addr) = start_party(&env, &["--only", "ocp"]);
    let (_is, is_addr) = start_party(&env, &["--only", "is", "--index", article.to_str().unwrap()]);
    let mut args = vec!["user", "claim", article.to_str().unwrap(), "--submit", &ocp_addr, "--is", &is_addr];
    args.extend(files.iter().map(String::as_str));
    let out = env.ok(&args);
    assert!(out.contains("delisted"), "{out}");

    // Reports sent to the OCP-only node are not understood there.
    std::thread::sleep(std::time::Duration::from_millis(1100));
    let mut args = vec!["user", "claim", article.to_str().unwrap(), "--submit", &ocp_addr];
    args.extend(files.iter().map(String::as_str));
    let out = env.run(&args);
    assert_eq!(code(&out), Some(1));
    assert!(stderr(&out).contains("malformed"), "{}", stderr(&out));
}

#[test]
fn bench_writes_csv_with_stable_counts() {
    let env = Env::new();
    let run = || {
        env.ok(&[
            "bench", "verify-attrs", "--bits", "512", "--attrs", "1-3,10", "--reps", "2", "--warmup", "0",
        ])
    };
    let (a, b) = (run(), run());
    let counts = |csv: &str| -> Vec<String> {
        csv.lines()
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                format!("{},{},{}", f[2], f[11], f[12])
            })
            .collect()
    };
    assert_eq!(counts(&a), counts(&b));
    assert_eq!(
        counts(&a),
        vec!["attrs,packed_modexp,individual_modexp", "1,1,1", "2,1,2", "3,1,3", "10,1,10"]
    );
}

#[test]
fn bench_unknown_experiment_is_a_usage_error() {
    let env = Env::new();
    let out = env.run(&["bench", "warp-speed"]);
    assert_eq!(code(&out), Some(2));
    let out = env.run(&["bench", "certify", "--bits", "768"]);
    assert_eq!(code(&out), Some(2));
}

#[test]
fn corpus_fixtures_feed_the_sign_benchmark() {
    let env = Env::new();
    env.ok(&["corpus", "--out", "articles", "--count", "3"]);
    assert_eq!(std::fs::read_dir(env.path("articles")).unwrap().count(), 3);
    let csv = env.ok(&[
        "bench", "sign", "--bits", "512", "--corpus", "articles", "--reps", "2", "--out", "sign.csv",
    ]);
    assert!(csv.is_empty());
    let csv = std::fs::read_to_string(env.path("sign.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("experiment,bits,attrs,articles,requests,samples,mean_ms,median_ms,min_ms,max_ms,words,message_bytes\n"));
}
