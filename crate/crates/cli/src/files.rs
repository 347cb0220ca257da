//! Reading inputs and writing outputs with the exit-code contract applied:
//! a missing input is a usage error, unreadable content is a data error and
//! an unwritable output location is a usage error.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crowdtrack::dataset::{SourceTag, TrajectoryDataset};
use crowdtrack::scenario::Scenario;
use crowdtrack::synthesis::Provenance;
use crowdtrack::Error;

use crate::fail::Failure;

fn require(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("input file {} does not exist", path.display())))
    }
}

fn content_error(path: &Path, e: Error) -> Failure {
    Failure::data(format!("{}: {e}", path.display()))
}

pub fn read_trajectories(path: &Path, dt: f64, source: SourceTag) -> Result<TrajectoryDataset, Failure> {
    require(path)?;
    TrajectoryDataset::read(path, 1.0 / dt, source).map_err(|e| content_error(path, e))
}

pub fn read_scenario(path: &Path) -> Result<Scenario, Failure> {
    require(path)?;
    Scenario::read(path).map_err(|e| content_error(path, e))
}

pub fn read_provenance(path: &Path) -> Result<Provenance, Failure> {
    require(path)?;
    let text = fs::read_to_string(path).map_err(|e| content_error(path, e.into()))?;
    Provenance::from_json(&text).map_err(|e| content_error(path, e))
}

/// Output directory, created on first use.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(root)
            .map_err(|e| Failure::usage(format!("cannot create output directory {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn unwritable(&self, name: &str, e: impl std::fmt::Display) -> Failure {
        Failure::usage(format!("cannot write {}: {e}", self.path(name).display()))
    }

    pub fn text(&self, name: &str, contents: &str) -> Result<(), Failure> {
        fs::write(self.path(name), contents).map_err(|e| self.unwritable(name, e))
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| self.unwritable(name, e))?;
        text.push('\n');
        self.text(name, &text)
    }

    /// Runs a writer-based serializer into `name`.
    pub fn with_writer(
        &self,
        name: &str,
        write: impl FnOnce(std::io::BufWriter<fs::File>) -> crowdtrack::Result<()>,
    ) -> Result<(), Failure> {
        let file = fs::File::create(self.path(name)).map_err(|e| self.unwritable(name, e))?;
        write(std::io::BufWriter::new(file)).map_err(|e| self.unwritable(name, e))
    }

    pub fn trajectories(&self, name: &str, ds: &TrajectoryDataset) -> Result<(), Failure> {
        self.with_writer(name, |w| ds.write_csv(w))
    }

    pub fn scenario(&self, name: &str, scenario: &Scenario) -> Result<(), Failure> {
        let text = scenario.to_json().map_err(|e| self.unwritable(name, e))?;
        self.text(name, &(text + "\n"))
    }
}
