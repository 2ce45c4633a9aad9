#![allow(dead_code)]

use std::path::Path;

use lexcom::ExperimentManifest;

/// Small enough to run in seconds; covers both tables.
pub const TINY: &str = r#"
name = "tiny"
output_dir = "out"
seeds = [0, 1]

[data]
oracle_samples = 3000
sl_pool = 400
sl_train = 200
sl_test = 60
rl_contexts = 96
eval_targets = 40
eval_repeats = 3

[train]
epochs_sl = 2
epochs_rl = 2
batch_size = 16
agent = { hidden = 8, dropout = 0.1 }

[[pipeline]]
sl_context_aware = false

[[pipeline]]
sl_context_aware = true
rl_context_aware = true

[[pipeline]]
name = "AllFar"
sl_context_aware = true
rl_context_aware = true
rl_distribution = "AllFar"
eval = "dist50"

[[pipeline]]
name = "AllClose"
sl_context_aware = true
rl_context_aware = true
rl_distribution = "AllClose"
eval = "dist50"
"#;

pub fn tiny() -> ExperimentManifest {
    ExperimentManifest::from_toml(TINY).unwrap()
}

/// Relative paths of every file under `root`, sorted.
pub fn files(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_string_lossy().into_owned());
            }
        }
    }
    out.sort();
    out
}
