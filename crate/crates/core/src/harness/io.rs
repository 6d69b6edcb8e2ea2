//! File formats: MDP/policy JSON in, CSV and JSON reports out.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::mdp::{Cmp, MdpDescription, PolicyFile, TabularPolicy};
use crate::{Error, Result};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Pretty JSON with a trailing newline; parent directories are created.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_cmp(path: &Path) -> Result<Cmp> {
    Cmp::from_description(&read_json::<MdpDescription>(path)?)
}

pub fn save_cmp(c: &Cmp, path: &Path) -> Result<()> {
    write_json(&c.to_description(), path)
}

pub fn load_policy(path: &Path) -> Result<TabularPolicy> {
    TabularPolicy::from_rows(&read_json::<PolicyFile>(path)?.pi)
}

/// One CSV row per item, header from the field names.
pub fn write_csv<T: Serialize>(rows: &[T], header: &[&str], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(create(path)?);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    File::create(path).map(BufWriter::new).map_err(Error::from)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cmp_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/mdp.json");
        let c = Cmp::new(2, 1, vec![0.5, 0.5, 0.0, 1.0], vec![1.0, 0.0], 0.9, None).unwrap();
        save_cmp(&c, &path).unwrap();
        assert_eq!(load_cmp(&path).unwrap(), c);
    }

    #[test]
    fn generated_models_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mdp.json");
        for seed in 0..20 {
            let c = crate::harness::generate_random_mdp(&crate::harness::GeneratorConfig {
                num_states: 5,
                num_actions: 3,
                branching: 2,
                seed,
                reversible: seed % 2 == 0,
                gamma: 0.9,
            })
            .unwrap();
            save_cmp(&c, &path).unwrap();
            assert_eq!(load_cmp(&path).unwrap(), c);
        }
    }

    #[test]
    fn header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        write_csv::<(u32, f64)>(&[], &["a", "b"], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n");
    }
}
