use std::io::Write;
use std::path::Path;

use super::{create, finish, read_all, write_bytes, Cursor, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::radar::ComplexCube;

pub const DATASET_MAGIC: &[u8; 4] = b"RGC1";
pub const DATASET_HEADER_LEN: usize = 18;

/// Labelled complex cubes sharing one `(K, M, N)` shape.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFile {
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub num_classes: usize,
    pub records: Vec<(ComplexCube, usize)>,
}

impl DatasetFile {
    /// Takes the cube shape from the first record; an empty file has shape (0, 0, 0).
    pub fn new(records: Vec<(ComplexCube, usize)>, num_classes: usize) -> Result<Self> {
        let dims = records.first().map(|(c, _)| c.dims()).unwrap_or((0, 0, 0));
        Self::with_dims(dims, records, num_classes)
    }

    pub fn with_dims(
        dims: (usize, usize, usize),
        records: Vec<(ComplexCube, usize)>,
        num_classes: usize,
    ) -> Result<Self> {
        let (k, m, n) = dims;
        let file = DatasetFile {
            k,
            m,
            n,
            num_classes,
            records,
        };
        file.validate()?;
        Ok(file)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("K", self.k),
            ("M", self.m),
            ("N", self.n),
            ("classes", self.num_classes),
        ] {
            if v > u16::MAX as usize {
                return Err(Error::format(format!("{name} = {v} does not fit the u16 header field")));
            }
        }
        if self.records.len() > u32::MAX as usize {
            return Err(Error::format("too many records for the u32 header field"));
        }
        for (i, (c, l)) in self.records.iter().enumerate() {
            if c.dims() != (self.k, self.m, self.n) {
                return Err(Error::config(format!(
                    "record {i} has shape {:?}, expected {:?}",
                    c.dims(),
                    (self.k, self.m, self.n)
                )));
            }
            if *l >= self.num_classes {
                return Err(Error::config(format!(
                    "record {i} has label {l} but the file declares {} classes",
                    self.num_classes
                )));
            }
        }
        Ok(())
    }

    /// Record count per label.
    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.num_classes];
        for &(_, l) in &self.records {
            h[l] += 1;
        }
        h
    }
}

/// Exact byte length of a dataset file.
pub fn dataset_file_len(k: usize, m: usize, n: usize, records: usize) -> usize {
    DATASET_HEADER_LEN + records * (2 + k * m * n * 8)
}

pub fn write_dataset<W: Write>(w: &mut W, file: &DatasetFile) -> std::io::Result<()> {
    write_bytes(w, DATASET_MAGIC)?;
    for v in [FORMAT_VERSION, file.k as u16, file.m as u16, file.n as u16] {
        write_bytes(w, &v.to_le_bytes())?;
    }
    write_bytes(w, &(file.records.len() as u32).to_le_bytes())?;
    write_bytes(w, &(file.num_classes as u16).to_le_bytes())?;
    let mut buf = Vec::with_capacity(file.k * file.m * file.n * 8);
    for (cube, label) in &file.records {
        write_bytes(w, &(*label as u16).to_le_bytes())?;
        buf.clear();
        for (re, im) in cube.re().iter().zip(cube.im()) {
            buf.extend_from_slice(&(*re as f32).to_le_bytes());
            buf.extend_from_slice(&(*im as f32).to_le_bytes());
        }
        write_bytes(w, &buf)?;
    }
    Ok(())
}

pub fn save_dataset(path: &Path, file: &DatasetFile) -> Result<()> {
    file.validate()?;
    let mut w = create(path)?;
    write_dataset(&mut w, file).map_err(|e| Error::io(path, e))?;
    finish(path, w)
}

pub fn read_dataset(bytes: &[u8]) -> Result<DatasetFile> {
    let mut c = Cursor::new(bytes, "dataset file");
    c.magic(DATASET_MAGIC)?;
    c.version()?;
    let (k, m, n) = (c.u16()? as usize, c.u16()? as usize, c.u16()? as usize);
    let count = c.u32()? as usize;
    let num_classes = c.u16()? as usize;
    let expected = dataset_file_len(k, m, n, count);
    if bytes.len() != expected {
        return Err(Error::format(format!(
            "dataset file is {} bytes but its header implies {expected}",
            bytes.len()
        )));
    }
    let len = k * m * n;
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let label = c.u16()? as usize;
        if label >= num_classes {
            return Err(Error::format(format!(
                "record {i} has label {label} outside {num_classes} classes"
            )));
        }
        let mut re = Vec::with_capacity(len);
        let mut im = Vec::with_capacity(len);
        for _ in 0..len {
            re.push(c.f32()? as f64);
            im.push(c.f32()? as f64);
        }
        records.push((ComplexCube::new(k, m, n, re, im)?, label));
    }
    c.finish()?;
    Ok(DatasetFile {
        k,
        m,
        n,
        num_classes,
        records,
    })
}

pub fn load_dataset(path: &Path) -> Result<DatasetFile> {
    read_dataset(&read_all(path)?)
}
