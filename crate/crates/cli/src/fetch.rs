//! Downloads and unpacks a TUDataset archive. The only networked command;
//! everything else runs offline.

use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::Context;

use crate::config::DATA_DIR_ENV;
use crate::CliError;

pub const DEFAULT_BASE_URL: &str = "https://www.chrsmrrs.com/graphkerneldatasets";

pub fn execute_fetch(
    name: &str,
    base_url: &str,
    out: Option<PathBuf>,
) -> Result<(), CliError> {
    let root = out
        .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data"));
    std::fs::create_dir_all(&root)
        .with_context(|| format!("creating {}", root.display()))
        .map_err(CliError::Runtime)?;

    let url = format!("{}/{name}.zip", base_url.trim_end_matches('/'));
    println!("fetching {url}");
    let response = ureq::get(&url)
        .call()
        .with_context(|| format!("downloading {url}"))
        .map_err(CliError::Runtime)?;
    let mut body = Vec::new();
    response
        .into_reader()
        .read_to_end(&mut body)
        .context("reading archive body")
        .map_err(CliError::Runtime)?;

    unpack_zip(&body, &root)?;
    println!("unpacked {name} into {}", root.display());
    Ok(())
}

fn unpack_zip(bytes: &[u8], root: &Path) -> Result<(), CliError> {
    let reader = std::io::Cursor::new(bytes);
    let mut archive = zip::ZipArchive::new(reader)
        .context("opening archive")
        .map_err(CliError::Runtime)?;
    for i in 0..archive.len() {
        let mut entry = archive
            .by_index(i)
            .context("reading archive entry")
            .map_err(CliError::Runtime)?;
        let Some(rel) = entry.enclosed_name() else {
            continue; // refuse paths escaping the target directory
        };
        let target = root.join(rel);
        if entry.is_dir() {
            std::fs::create_dir_all(&target).map_err(|e| CliError::Runtime(e.into()))?;
            continue;
        }
        if let Some(parent) = target.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::Runtime(e.into()))?;
        }
        let mut out = std::fs::File::create(&target).map_err(|e| CliError::Runtime(e.into()))?;
        std::io::copy(&mut entry, &mut out).map_err(|e| CliError::Runtime(e.into()))?;
    }
    Ok(())
}
