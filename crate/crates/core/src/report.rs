//! Text artifacts written by training runs and the CLI.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::checkpoint::{checkpoint_file_name, Checkpoint};
use crate::error::{Error, Result};
use crate::margins::{MarginTable, SymMatrix};
use crate::taxonomy::Taxonomy;
use crate::trainer::{StepRecord, TrainObserver, TrainState};

pub const LOG_FILE: &str = "train.log";
pub const FINAL_CHECKPOINT: &str = "checkpoint-final.json";

/// Writes `train.log` and per-epoch checkpoints into a run directory.
pub struct RunWriter {
    dir: PathBuf,
    seed: u64,
    log: String,
    echo: bool,
}

impl RunWriter {
    pub fn new(dir: impl Into<PathBuf>, seed: u64) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut log = String::from(StepRecord::LOG_HEADER);
        log.push('\n');
        Ok(RunWriter {
            dir,
            seed,
            log,
            echo: false,
        })
    }

    /// Also print each log line to stdout.
    pub fn echo(mut self, on: bool) -> Self {
        self.echo = on;
        self
    }

    /// Flushes the log and writes the final checkpoint.
    pub fn finish(self, state: &TrainState) -> Result<()> {
        let path = self.dir.join(LOG_FILE);
        fs::write(&path, &self.log).map_err(|e| Error::io(&path, e))?;
        Checkpoint::new(&state.params, self.seed, state.epoch).save(self.dir.join(FINAL_CHECKPOINT))
    }
}

impl TrainObserver for RunWriter {
    fn on_step(&mut self, record: &StepRecord) -> Result<()> {
        let line = record.log_line();
        if self.echo {
            println!("{line}");
        }
        self.log.push_str(&line);
        self.log.push('\n');
        Ok(())
    }

    fn on_checkpoint(&mut self, state: &TrainState) -> Result<()> {
        Checkpoint::new(&state.params, self.seed, state.epoch)
            .save(self.dir.join(checkpoint_file_name(state.epoch)))
    }
}

/// Tab-separated matrix with class names on the header row and first
/// column, preceded by an `# epoch N` comment line.
pub fn matrix_tsv(t: &Taxonomy, table: &MarginTable, m: &SymMatrix) -> String {
    let names: Vec<String> = table.classes.iter().map(|c| t.path_name(*c)).collect();
    let mut s = format!("# epoch {}\nclass", table.epoch);
    for n in &names {
        write!(s, "\t{n}").unwrap();
    }
    s.push('\n');
    for (i, n) in names.iter().enumerate() {
        s.push_str(n);
        for v in m.row(i) {
            write!(s, "\t{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

/// Writes `semantic.tsv`, `visual.tsv` and `combined.tsv` into `dir`.
pub fn write_margin_tables(dir: &Path, t: &Taxonomy, table: &MarginTable) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    [
        ("semantic.tsv", &table.semantic),
        ("visual.tsv", &table.visual),
        ("combined.tsv", &table.combined),
    ]
    .into_iter()
    .map(|(name, m)| {
        let path = dir.join(name);
        fs::write(&path, matrix_tsv(t, table, m)).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    })
    .collect()
}
