use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

fn sibling(path: &Path, tag: &str) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = format!(".{name}.{tag}-{}", std::process::id());
    match path.parent() {
        Some(p) => p.join(tmp),
        None => PathBuf::from(tmp),
    }
}

/// Write `contents` to `path` through a temporary sibling file and a rename,
/// so readers never observe a half-written artifact.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> io::Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let tmp = sibling(path, "tmp");
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res
}

/// Populate a directory through `fill` in a temporary sibling, then swap it
/// into place at `path`, replacing any previous directory.
pub fn write_dir_atomic<F>(path: impl AsRef<Path>, fill: F) -> io::Result<()>
where
    F: FnOnce(&Path) -> io::Result<()>,
{
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let tmp = sibling(path, "tmpdir");
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;
    if let Err(e) = fill(&tmp) {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if path.exists() {
        let old = sibling(path, "old");
        fs::rename(path, &old)?;
        fs::rename(&tmp, path)?;
        fs::remove_dir_all(&old)?;
    } else {
        fs::rename(&tmp, path)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_and_dir_writes() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("sub/a.txt");
        write_atomic(&f, b"one").unwrap();
        write_atomic(&f, b"two").unwrap();
        assert_eq!(fs::read(&f).unwrap(), b"two");

        let d = dir.path().join("out");
        write_dir_atomic(&d, |p| fs::write(p.join("x"), "1")).unwrap();
        write_dir_atomic(&d, |p| fs::write(p.join("y"), "2")).unwrap();
        assert!(!d.join("x").exists());
        assert_eq!(fs::read_to_string(d.join("y")).unwrap(), "2");

        let failed = write_dir_atomic(&d, |_| Err(io::Error::other("boom")));
        assert!(failed.is_err());
        assert!(d.join("y").exists());
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(names.len(), 2);
    }
}
