//! Model file layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes  "TRCOMPMD"
//! version    u32
//! config     u32 length + UTF-8 text, one `key=value` per line
//! vocab      words, upos, chars, deprels; each an index:
//!              u32 reserved, u32 count, count × (u32 length + UTF-8)
//!            then word counts: u32 count, count × u64
//! params     u32 count, then per parameter:
//!              u32 name length + UTF-8 name, u32 rows, u32 cols,
//!              rows × cols × f64 (row-major)
//! ```
//!
//! Optimizer state is not stored. Loading and saving again reproduces the
//! file byte for byte.

use std::io::{Read, Write};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{ModelError, ParserModel};
use crate::autodiff::ParameterStore;
use crate::scalar::Scalar;
use crate::wordrep::{Index, ReprConfig, Vocabulary};

pub const MAGIC: &[u8; 8] = b"TRCOMPMD";
pub const VERSION: u32 = 1;

fn bad(msg: impl Into<String>) -> ModelError {
    ModelError::Format(msg.into())
}

fn write_len<W: Write>(w: &mut W, n: usize) -> Result<(), ModelError> {
    let n = u32::try_from(n).map_err(|_| bad("length exceeds u32"))?;
    w.write_u32::<LE>(n)?;
    Ok(())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<(), ModelError> {
    write_len(w, s.len())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_len<R: Read>(r: &mut R) -> Result<usize, ModelError> {
    Ok(r.read_u32::<LE>()? as usize)
}

fn read_str<R: Read>(r: &mut R) -> Result<String, ModelError> {
    let n = read_len(r)?;
    let mut buf = Vec::new();
    r.take(n as u64).read_to_end(&mut buf)?;
    if buf.len() != n {
        return Err(bad("truncated string"));
    }
    String::from_utf8(buf).map_err(|_| bad("invalid UTF-8"))
}

fn write_index<W: Write>(w: &mut W, index: &Index) -> Result<(), ModelError> {
    write_len(w, index.reserved())?;
    write_len(w, index.len())?;
    for item in index.items() {
        write_str(w, item)?;
    }
    Ok(())
}

fn read_index<R: Read>(r: &mut R) -> Result<Index, ModelError> {
    let reserved = read_len(r)?;
    let n = read_len(r)?;
    if reserved > n {
        return Err(bad("reserved entries exceed index size"));
    }
    let items = (0..n).map(|_| read_str(r)).collect::<Result<Vec<_>, _>>()?;
    Ok(Index::from_items(items, reserved))
}

impl<T: Scalar> ParserModel<T> {
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), ModelError> {
        w.write_all(MAGIC)?;
        w.write_u32::<LE>(VERSION)?;
        let config: String = self
            .config
            .to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        write_str(&mut w, &config)?;

        let v = &self.vocab;
        for index in [&v.words, &v.upos, &v.chars, &v.deprels] {
            write_index(&mut w, index)?;
        }
        write_len(&mut w, v.word_counts.len())?;
        for &c in &v.word_counts {
            w.write_u64::<LE>(c)?;
        }

        write_len(&mut w, self.store.len())?;
        for p in self.store.iter() {
            write_str(&mut w, &p.name)?;
            write_len(&mut w, p.rows)?;
            write_len(&mut w, p.cols)?;
            for &x in &p.value {
                w.write_f64::<LE>(x.as_f64())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.save(&mut buf).expect("writing to memory");
        buf
    }

    pub fn load<R: Read>(mut r: R) -> Result<Self, ModelError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("not a model file"))?;
        if &magic != MAGIC {
            return Err(bad("not a model file"));
        }
        let version = r.read_u32::<LE>()?;
        if version != VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let text = read_str(&mut r)?;
        let mut config = ReprConfig::default();
        for line in text.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("config line {line:?}")))?;
            let known = config.set(k, v).map_err(|e| bad(e.to_string()))?;
            if !known {
                return Err(bad(format!("unknown config key {k:?}")));
            }
        }

        let words = read_index(&mut r)?;
        let upos = read_index(&mut r)?;
        let chars = read_index(&mut r)?;
        let deprels = read_index(&mut r)?;
        let n = read_len(&mut r)?;
        if n != words.len() {
            return Err(bad("word counts do not match the word index"));
        }
        let word_counts = (0..n)
            .map(|_| r.read_u64::<LE>())
            .collect::<Result<Vec<_>, _>>()?;
        let vocab = Vocabulary {
            words,
            word_counts,
            upos,
            chars,
            deprels,
        };

        let mut store = ParameterStore::new();
        for _ in 0..read_len(&mut r)? {
            let name = read_str(&mut r)?;
            let rows = read_len(&mut r)?;
            let cols = read_len(&mut r)?;
            let values = (0..rows * cols)
                .map(|_| r.read_f64::<LE>().map(T::of))
                .collect::<Result<Vec<_>, _>>()?;
            store.insert(&name, rows, cols, values)?;
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(bad("trailing bytes"));
        }
        ParserModel::from_store(config, vocab, store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::parse_conllu;
    use crate::wordrep::{build_vocab, Composition, Dims, Extractor};

    fn model(composition: Composition) -> ParserModel<f64> {
        let tb = parse_conllu("1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n2\tb\t_\tY\t_\t_\t1\tdep\t_\t_\n\n").unwrap();
        let vocab = build_vocab(&tb, 1).unwrap();
        let cfg = ReprConfig {
            extractor: Extractor::Bw,
            composition,
            dims: Dims::tiny(),
            ..ReprConfig::default()
        };
        ParserModel::new(cfg, vocab, 3).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        for &c in Composition::ALL {
            let m = model(c);
            let bytes = m.to_bytes();
            let back = ParserModel::<f64>::load(bytes.as_slice()).unwrap();
            assert_eq!(back.to_bytes(), bytes);
            assert_eq!(back.config, m.config);
            assert_eq!(back.vocab, m.vocab);
            assert_eq!(back.store.snapshot(), m.store.snapshot());
        }
    }

    #[test]
    fn rejects_foreign_and_truncated_files() {
        assert!(ParserModel::<f64>::load(&b"NOTMODEL\x01\0\0\0"[..]).is_err());
        let bytes = model(Composition::None).to_bytes();
        assert!(ParserModel::<f64>::load(&bytes[..bytes.len() - 3]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(ParserModel::<f64>::load(extra.as_slice()).is_err());
    }

    #[test]
    fn f32_model_reads_f64_file() {
        let m = model(Composition::Lc);
        let small = ParserModel::<f32>::load(m.to_bytes().as_slice()).unwrap();
        assert_eq!(small.store.len(), m.store.len());
    }
}
