//! Parameter checkpoint file format.
//!
//! Layout: 8-byte magic `UQT1CKPT`, then per parameter:
//! u32 name length, UTF-8 name, u32 rank, rank x u32 dims, raw
//! little-endian f32 data. Round-trips are bit-exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"UQT1CKPT";

pub fn save(path: &Path, params: &[(String, Tensor)]) -> Result<()> {
    let mut buf = Vec::with_capacity(64);
    buf.extend_from_slice(MAGIC);
    for (name, tensor) in params {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
        for &d in tensor.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in tensor.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    parse(&bytes)
}

fn bad(msg: String) -> Error {
    Error::CheckpointFormat { msg }
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize, what: &str) -> Result<&'a [u8]> {
    if *pos + n > bytes.len() {
        return Err(bad(format!("truncated while reading {what} at byte {pos}")));
    }
    let s = &bytes[*pos..*pos + n];
    *pos += n;
    Ok(s)
}

fn read_u32(bytes: &[u8], pos: &mut usize, what: &str) -> Result<u32> {
    Ok(u32::from_le_bytes(take(bytes, pos, 4, what)?.try_into().unwrap()))
}

fn parse(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(bad("missing UQT1CKPT magic".into()));
    }
    let mut pos = 8;
    let mut params = Vec::new();
    while pos < bytes.len() {
        let name_len = read_u32(bytes, &mut pos, "name length")? as usize;
        let name = String::from_utf8(take(bytes, &mut pos, name_len, "name")?.to_vec())
            .map_err(|e| bad(format!("name is not UTF-8: {e}")))?;
        let rank = read_u32(bytes, &mut pos, "rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(read_u32(bytes, &mut pos, "dim")? as usize);
        }
        let numel: usize = shape.iter().product();
        let raw = take(bytes, &mut pos, numel * 4, "tensor data")?;
        let data: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let tensor = Tensor::from_vec(shape, data)
            .map_err(|e| bad(format!("bad tensor for {name}: {e}")))?;
        params.push((name, tensor));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = std::env::temp_dir().join("uqt_ckpt_test");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.ckpt");

        let params = vec![
            (
                "g.down1.w".to_string(),
                Tensor::from_vec(vec![2, 1, 3, 3], (0..18).map(|i| i as f32 * 0.37 - 1.0).collect())
                    .unwrap(),
            ),
            (
                "g.head_mu.b".to_string(),
                Tensor::from_vec(vec![1], vec![f32::MIN_POSITIVE]).unwrap(),
            ),
        ];
        save(&path, &params).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        for ((n0, t0), (n1, t1)) in params.iter().zip(&loaded) {
            assert_eq!(n0, n1);
            assert_eq!(t0.shape(), t1.shape());
            let bits0: Vec<u32> = t0.data().iter().map(|v| v.to_bits()).collect();
            let bits1: Vec<u32> = t1.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits0, bits1);
        }

        // Saving again produces identical bytes.
        let first = fs::read(&path).unwrap();
        save(&path, &params).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(parse(b"NOTMAGIC").is_err());
        let params = vec![("w".to_string(), Tensor::scalar(1.0))];
        let dir = std::env::temp_dir().join("uqt_ckpt_test2");
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.ckpt");
        save(&path, &params).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert!(parse(&bytes[..bytes.len() - 2]).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }
}
