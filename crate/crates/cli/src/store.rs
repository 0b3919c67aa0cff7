//! Key, credential and fixture files under the home directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use oblivion_core::credentials::{parse_attribute_list, Attribute, SignedAttribute};
use oblivion_core::matching::{Article, SynonymTable};
use oblivion_core::rsa_fdh::{KeyFile, SigningKey, VerificationKey};

pub struct Home {
    root: PathBuf,
}

impl Home {
    pub fn new(root: PathBuf) -> Self {
        Self { root }
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }

    pub fn signing_key_path(&self, name: &str) -> PathBuf {
        self.path(&format!("{name}.sk"))
    }

    pub fn verification_key_path(&self, name: &str) -> PathBuf {
        self.path(&format!("{name}.vk"))
    }

    /// Writes `<name>.sk` and `<name>.vk`, refusing to replace an existing key.
    pub fn save_keypair(&self, name: &str, sk: &SigningKey, force: bool) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(&self.root).with_context(|| format!("creating {}", self.root.display()))?;
        let (sk_path, vk_path) = (self.signing_key_path(name), self.verification_key_path(name));
        if !force && sk_path.exists() {
            bail!("{} already exists (use --force to replace it)", sk_path.display());
        }
        write(&sk_path, &KeyFile::for_signing(sk).encode())?;
        write(&vk_path, &KeyFile::for_verification(sk.verification_key()).encode())?;
        Ok((sk_path, vk_path))
    }

    pub fn signing_key(&self, name: &str) -> Result<SigningKey> {
        load_signing_key(&self.signing_key_path(name))
    }

    pub fn verification_key(&self, name: &str) -> Result<VerificationKey> {
        load_verification_key(&self.verification_key_path(name))
    }
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn load_verification_key(path: &Path) -> Result<VerificationKey> {
    let file = KeyFile::decode(&read(path)?).with_context(|| format!("decoding {}", path.display()))?;
    file.into_verification_key()
        .with_context(|| format!("{} is not a verification key", path.display()))
}

/// Loads `X.sk` together with the `X.vk` beside it.
pub fn load_signing_key(path: &Path) -> Result<SigningKey> {
    let vk = load_verification_key(&path.with_extension("vk"))?;
    let file = KeyFile::decode(&read(path)?).with_context(|| format!("decoding {}", path.display()))?;
    file.into_signing_key(vk)
        .with_context(|| format!("{} is not a signing key", path.display()))
}

pub fn load_attributes(path: &Path) -> Result<Vec<Attribute>> {
    parse_attribute_list(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_signed_attribute(path: &Path) -> Result<SignedAttribute> {
    SignedAttribute::decode(&read(path)?).with_context(|| format!("decoding {}", path.display()))
}

pub fn load_article(path: &Path) -> Result<Article> {
    Article::parse_fixture(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))
}

/// The bundled table unless a file is given.
pub fn load_synonyms(path: Option<&Path>) -> Result<SynonymTable> {
    match path {
        Some(p) => SynonymTable::parse(&read_text(p)?).with_context(|| format!("parsing {}", p.display())),
        None => Ok(oblivion_core::fixtures::synonyms()),
    }
}

/// Every `*.txt` fixture in `dir`, in file-name order.
pub fn load_corpus(dir: &Path) -> Result<Vec<Article>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .txt articles in {}", dir.display());
    }
    paths.iter().map(|p| load_article(p)).collect()
}

/// File-name friendly form of an attribute name.
pub fn slug(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect();
    let parts: Vec<&str> = s.split('-').filter(|p| !p.is_empty()).collect();
    if parts.is_empty() {
        "attribute".to_owned()
    } else {
        parts.join("-")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slugs() {
        assert_eq!(slug("Date of Birth"), "date-of-birth");
        assert_eq!(slug("  ID  Picture!"), "id-picture");
        assert_eq!(slug("Ünïcode"), "n-code");
        assert_eq!(slug("***"), "attribute");
    }
}
