use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub fn bytes(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

pub fn file(path: &Path) -> Result<String, detkit::Error> {
    let data = std::fs::read(path).map_err(|e| detkit::Error::io(path, e))?;
    Ok(bytes(&data))
}

/// Digest over every file below `dir`: sorted `relative path NUL digest`
/// lines, so it does not depend on where the directory lives.
pub fn dir(dir: &Path) -> Result<String, detkit::Error> {
    let mut files = Vec::new();
    walk(dir, &mut files)?;
    files.sort();
    let mut listing = String::new();
    for f in &files {
        let rel = f.strip_prefix(dir).unwrap_or(f);
        listing.push_str(&format!("{}\0{}\n", rel.to_string_lossy().replace('\\', "/"), file(f)?));
    }
    Ok(bytes(listing.as_bytes()))
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), detkit::Error> {
    let entries = std::fs::read_dir(dir).map_err(|e| detkit::Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| detkit::Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            walk(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

pub fn path(p: &Path) -> Result<String, detkit::Error> {
    if p.is_dir() {
        dir(p)
    } else {
        file(p)
    }
}
