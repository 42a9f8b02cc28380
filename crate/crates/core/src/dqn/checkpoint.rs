//! Binary network checkpoint with a TOML config beside it.
//!
//! Layout, little-endian: magic `SPQN`, u32 version, 32-byte SHA-256 of the
//! config TOML, u32 layer-size count, u32 sizes, then per layer the weights
//! (row-major, `out x in`) and the bias as f64.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};

use super::agent::AgentConfig;
use super::network::{Layer, QNetwork};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SPQN";
pub const VERSION: u32 = 1;

pub fn write_network<W: Write>(w: &mut W, net: &QNetwork, config_hash: &[u8; 32]) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(config_hash)?;
    let sizes = net.layer_sizes();
    w.write_all(&(sizes.len() as u32).to_le_bytes())?;
    for s in sizes {
        w.write_all(&(s as u32).to_le_bytes())?;
    }
    for v in net.params() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> std::io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_network<R: Read>(r: &mut R, path: &Path) -> Result<(QNetwork, [u8; 32])> {
    let bad = |reason: String| Error::Checkpoint { path: path.to_path_buf(), reason };
    let io = |e: std::io::Error| bad(format!("truncated or unreadable: {e}"));
    if &read_array::<4>(r).map_err(io)? != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(r).map_err(io)?);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let hash = read_array::<32>(r).map_err(io)?;
    let count = u32::from_le_bytes(read_array(r).map_err(io)?) as usize;
    if !(2..=64).contains(&count) {
        return Err(bad(format!("implausible layer count {count}")));
    }
    let mut sizes = Vec::with_capacity(count);
    for _ in 0..count {
        sizes.push(u32::from_le_bytes(read_array(r).map_err(io)?) as usize);
    }
    let mut layers = Vec::with_capacity(count - 1);
    let mut f = || -> Result<f64> { Ok(f64::from_le_bytes(read_array(r).map_err(io)?)) };
    for win in sizes.windows(2) {
        let (fan_in, fan_out) = (win[0], win[1]);
        let mut weights = Vec::with_capacity(fan_in * fan_out);
        for _ in 0..fan_in * fan_out {
            weights.push(f()?);
        }
        let mut bias = Vec::with_capacity(fan_out);
        for _ in 0..fan_out {
            bias.push(f()?);
        }
        layers.push(Layer {
            weights: Array2::from_shape_vec((fan_out, fan_in), weights).expect("shape matches length"),
            bias: Array1::from(bias),
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io)? != 0 {
        return Err(bad("trailing bytes".into()));
    }
    Ok((QNetwork::from_layers(layers).map_err(|e| bad(e.to_string()))?, hash))
}

/// Network and config file paths for checkpoint `name` in `dir`.
pub fn checkpoint_paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.qnet")), dir.join(format!("{name}.toml")))
}

pub fn save(dir: &Path, name: &str, net: &QNetwork, config: &AgentConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    let (net_path, cfg_path) = checkpoint_paths(dir, name);
    let mut buf = Vec::with_capacity(16 + 8 * net.num_params());
    write_network(&mut buf, net, &config.hash())?;
    fs::write(net_path, buf)?;
    fs::write(cfg_path, config.to_toml())?;
    Ok(())
}

pub fn exists(dir: &Path, name: &str) -> bool {
    let (a, b) = checkpoint_paths(dir, name);
    a.is_file() && b.is_file()
}

pub fn load(dir: &Path, name: &str) -> Result<(QNetwork, AgentConfig)> {
    let (net_path, cfg_path) = checkpoint_paths(dir, name);
    for p in [&net_path, &cfg_path] {
        if !p.is_file() {
            return Err(Error::MissingCheckpoint(p.clone()));
        }
    }
    let config = AgentConfig::from_toml(&fs::read_to_string(&cfg_path)?)?;
    let bytes = fs::read(&net_path)?;
    let (net, hash) = read_network(&mut bytes.as_slice(), &net_path)?;
    if hash != config.hash() {
        return Err(Error::Checkpoint { path: net_path, reason: "config hash does not match the config file".into() });
    }
    if net.layer_sizes() != config.layer_sizes() {
        return Err(Error::Checkpoint { path: net_path, reason: "layer sizes do not match the config".into() });
    }
    Ok((net, config))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::dqn::agent::tests::small_config;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config();
        let net = QNetwork::new(&cfg.layer_sizes(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        save(dir.path(), "embb", &net, &cfg).unwrap();
        let (back, cfg_back) = load(dir.path(), "embb").unwrap();
        assert_eq!(cfg_back, cfg);
        let a: Vec<u64> = net.params().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = back.params().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);
        let first = fs::read(dir.path().join("embb.qnet")).unwrap();
        save(dir.path(), "embb", &back, &cfg_back).unwrap();
        assert_eq!(first, fs::read(dir.path().join("embb.qnet")).unwrap());
    }

    #[test]
    fn rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load(dir.path(), "none"), Err(Error::MissingCheckpoint(_))));
        let cfg = small_config();
        let net = QNetwork::new(&cfg.layer_sizes(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        save(dir.path(), "a", &net, &cfg).unwrap();
        let path = dir.path().join("a.qnet");
        let bytes = fs::read(&path).unwrap();

        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load(dir.path(), "a"), Err(Error::Checkpoint { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        fs::write(&path, &bad).unwrap();
        assert!(matches!(load(dir.path(), "a"), Err(Error::Checkpoint { .. })));

        fs::write(&path, &bytes).unwrap();
        let other = AgentConfig { rng_seed: 99, ..cfg };
        fs::write(dir.path().join("a.toml"), other.to_toml()).unwrap();
        assert!(matches!(load(dir.path(), "a"), Err(Error::Checkpoint { .. })));
    }
}
