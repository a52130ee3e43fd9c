use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use shallow_vacuum::config::LoadedConfig;
use shallow_vacuum::export::RunStamp;
use shallow_vacuum::pipeline::execute_run;

const CONFIG: &str = "[grid]\nn1 = 12\nn2 = 12\n[solver]\nn_modes = 12\nt_final = 0.02\ndt = 0.001\n[output]\nstride = 5\n";

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn twin_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let loaded = LoadedConfig::from_text(CONFIG.into(), PathBuf::from(".")).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    execute_run(&loaded, &a, RunStamp::fixed(1_700_000_000)).unwrap();
    execute_run(&loaded, &b, RunStamp::fixed(1_700_000_000)).unwrap();
    let (fa, fb) = (files(&a), files(&b));
    assert!(fa.len() > 5);
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (name, bytes) in &fa {
        assert!(bytes == &fb[name], "{name} differs");
    }
    let manifest = String::from_utf8(fa["manifest.toml"].clone()).unwrap();
    let echoed: toml::Value = toml::from_str(&manifest).unwrap();
    assert_eq!(echoed["config"].as_str(), Some(CONFIG));
}
