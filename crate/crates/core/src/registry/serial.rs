//! Binary model file: magic, spec, then every model in canonical order.
//!
//! All integers and floats are little-endian; floats round-trip bit-exactly.
//! Client models are written in sorted client order (the registry map is
//! ordered), so saving, loading, and saving again produces byte-identical
//! files. The reader validates structure as it goes and rejects trailing
//! bytes, so truncated or padded files never load.

use super::{DetectorKind, DetectorModel, DetectorParams, DetectorSpec, Mode, ModelRegistry};
use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::mahalanobis::PcaModel;
use crate::ocsrc::{Dictionary, HomotopyConfig, LambdaStop};
use crate::ocsvm::{OcsvmModel, RbfKernel};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

const MAGIC: &[u8] = b"OCPAD-MODEL v1\n";

pub fn save_registry(registry: &ModelRegistry, path: &Path) -> Result<()> {
    fs::write(path, render_registry(registry)?)?;
    Ok(())
}

pub fn load_registry(path: &Path) -> Result<ModelRegistry> {
    let bytes = fs::read(path)?;
    parse_registry(&bytes)
}

pub fn render_registry(registry: &ModelRegistry) -> Result<Vec<u8>> {
    registry.spec.validate()?;
    let mut w = Vec::new();
    w.extend_from_slice(MAGIC);
    w.push(match registry.spec.mode {
        Mode::ClientSpecific => 0,
        Mode::ClientIndependent => 1,
    });
    put_f64(&mut w, registry.spec.train_fraction);
    match &registry.spec.params {
        DetectorParams::Ocsvm { nu, gamma } => {
            w.push(0);
            put_f64(&mut w, *nu);
            match gamma {
                None => w.push(0),
                Some(g) => {
                    w.push(1);
                    put_f64(&mut w, *g);
                }
            }
        }
        DetectorParams::Ocsrc { dict_fraction, homotopy } => {
            w.push(1);
            put_f64(&mut w, *dict_fraction);
            put_homotopy(&mut w, homotopy);
        }
        DetectorParams::Md { variance_fraction } => {
            w.push(2);
            put_f64(&mut w, *variance_fraction);
        }
    }
    put_u64(&mut w, registry.per_client.len() as u64);
    for (client, model) in &registry.per_client {
        let id = client.as_bytes();
        put_u32(&mut w, id.len() as u32);
        w.extend_from_slice(id);
        put_model(&mut w, model)?;
    }
    match &registry.pooled {
        None => w.push(0),
        Some(model) => {
            w.push(1);
            put_model(&mut w, model)?;
        }
    }
    Ok(w)
}

pub fn parse_registry(bytes: &[u8]) -> Result<ModelRegistry> {
    let mut r = Reader { bytes, at: 0 };
    let magic = r.take(MAGIC.len())?;
    if magic != MAGIC {
        return Err(Error::ModelFile("bad magic; not a model file or wrong version".into()));
    }
    let mode = match r.u8()? {
        0 => Mode::ClientSpecific,
        1 => Mode::ClientIndependent,
        other => return Err(Error::ModelFile(format!("unknown mode tag {other}"))),
    };
    let train_fraction = r.f64()?;
    let params = match r.u8()? {
        0 => {
            let nu = r.f64()?;
            let gamma = match r.u8()? {
                0 => None,
                1 => Some(r.f64()?),
                other => return Err(Error::ModelFile(format!("bad gamma presence tag {other}"))),
            };
            DetectorParams::Ocsvm { nu, gamma }
        }
        1 => {
            let dict_fraction = r.f64()?;
            let homotopy = get_homotopy(&mut r)?;
            DetectorParams::Ocsrc { dict_fraction, homotopy }
        }
        2 => DetectorParams::Md { variance_fraction: r.f64()? },
        other => return Err(Error::ModelFile(format!("unknown detector tag {other}"))),
    };
    let spec = DetectorSpec { mode, train_fraction, params };
    spec.validate().map_err(|e| Error::ModelFile(format!("stored spec invalid: {e}")))?;

    let n_clients = r.u64()? as usize;
    if mode == Mode::ClientIndependent && n_clients != 0 {
        return Err(Error::ModelFile("client-independent registry carries client models".into()));
    }
    let mut per_client = BTreeMap::new();
    let mut previous: Option<String> = None;
    for _ in 0..n_clients {
        let len = r.u32()? as usize;
        let id = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::ModelFile("client id is not UTF-8".into()))?;
        if !crate::dataset::valid_id(&id) {
            return Err(Error::ModelFile(format!("invalid client id {id:?}")));
        }
        if let Some(prev) = &previous {
            if *prev >= id {
                return Err(Error::ModelFile("client models out of canonical order".into()));
            }
        }
        let model = get_model(&mut r, spec.kind())?;
        previous = Some(id.clone());
        per_client.insert(id, model);
    }
    let pooled = match r.u8()? {
        0 => None,
        1 => Some(get_model(&mut r, spec.kind())?),
        other => return Err(Error::ModelFile(format!("bad pooled presence tag {other}"))),
    };
    match mode {
        Mode::ClientSpecific => {
            if per_client.is_empty() {
                return Err(Error::ModelFile("client-specific registry has no client models".into()));
            }
            if pooled.is_some() {
                return Err(Error::ModelFile("client-specific registry carries a pooled model".into()));
            }
        }
        Mode::ClientIndependent => {
            if pooled.is_none() {
                return Err(Error::ModelFile("client-independent registry is missing its pooled model".into()));
            }
        }
    }
    if r.at != bytes.len() {
        return Err(Error::ModelFile(format!("{} trailing bytes after registry", bytes.len() - r.at)));
    }
    Ok(ModelRegistry { spec, per_client, pooled })
}

fn put_model(w: &mut Vec<u8>, model: &DetectorModel) -> Result<()> {
    match model {
        DetectorModel::Ocsvm(m) => {
            w.push(0);
            let n = m.support_vectors.len();
            let dim = m.support_vectors[0].dim();
            put_u64(w, n as u64);
            put_u64(w, dim as u64);
            put_f64(w, m.nu);
            put_f64(w, m.kernel.gamma());
            put_f64(w, m.rho);
            for a in &m.alphas {
                put_f64(w, *a);
            }
            for sv in &m.support_vectors {
                for v in sv.iter() {
                    put_f64(w, *v);
                }
            }
        }
        DetectorModel::Ocsrc { dictionary, homotopy } => {
            w.push(1);
            put_u64(w, dictionary.len() as u64);
            put_u64(w, dictionary.dim() as u64);
            put_f64(w, dictionary.fraction());
            put_homotopy(w, homotopy);
            for atom in dictionary.atoms() {
                for v in atom.iter() {
                    put_f64(w, *v);
                }
            }
        }
        DetectorModel::Md(m) => {
            w.push(2);
            put_u64(w, m.dim() as u64);
            put_u64(w, m.retained() as u64);
            put_f64(w, m.variance_fraction);
            for v in m.mean.iter() {
                put_f64(w, *v);
            }
            for s in &m.scales {
                put_f64(w, *s);
            }
            for c in &m.components {
                for v in c.iter() {
                    put_f64(w, *v);
                }
            }
        }
    }
    Ok(())
}

fn get_model(r: &mut Reader<'_>, expect: DetectorKind) -> Result<DetectorModel> {
    let tag = r.u8()?;
    let kind = match tag {
        0 => DetectorKind::Ocsvm,
        1 => DetectorKind::Ocsrc,
        2 => DetectorKind::Md,
        other => return Err(Error::ModelFile(format!("unknown model tag {other}"))),
    };
    if kind != expect {
        return Err(Error::ModelFile(format!(
            "model kind {} does not match registry detector {}",
            kind.as_str(),
            expect.as_str()
        )));
    }
    match kind {
        DetectorKind::Ocsvm => {
            let n = r.u64()? as usize;
            let dim = r.u64()? as usize;
            if n == 0 || dim == 0 {
                return Err(Error::ModelFile("empty support vector set".into()));
            }
            r.ensure_remaining((3 + n + n * dim) * 8)?;
            let nu = r.f64()?;
            let gamma = r.f64()?;
            let rho = r.f64()?;
            let mut alphas = Vec::with_capacity(n);
            for _ in 0..n {
                let a = r.f64()?;
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::ModelFile(format!("support weight {a} outside (0, inf)")));
                }
                alphas.push(a);
            }
            if !rho.is_finite() {
                return Err(Error::ModelFile("non-finite offset".into()));
            }
            let mut support_vectors = Vec::with_capacity(n);
            for _ in 0..n {
                support_vectors.push(r.vector(dim)?);
            }
            let kernel = RbfKernel::new(gamma)
                .map_err(|e| Error::ModelFile(format!("stored kernel invalid: {e}")))?;
            if !(nu > 0.0 && nu <= 1.0) {
                return Err(Error::ModelFile(format!("stored nu {nu} outside (0, 1]")));
            }
            Ok(DetectorModel::Ocsvm(OcsvmModel { support_vectors, alphas, rho, kernel, nu }))
        }
        DetectorKind::Ocsrc => {
            let n = r.u64()? as usize;
            let dim = r.u64()? as usize;
            if n == 0 || dim == 0 {
                return Err(Error::ModelFile("empty dictionary".into()));
            }
            let fraction = r.f64()?;
            let homotopy = get_homotopy(r)?;
            homotopy.validate().map_err(|e| Error::ModelFile(format!("stored homotopy config invalid: {e}")))?;
            r.ensure_remaining(n * dim * 8)?;
            let mut atoms = Vec::with_capacity(n);
            for _ in 0..n {
                atoms.push(r.vector(dim)?);
            }
            let dictionary = Dictionary::new(atoms, fraction)
                .map_err(|e| Error::ModelFile(format!("stored dictionary invalid: {e}")))?;
            Ok(DetectorModel::Ocsrc { dictionary, homotopy })
        }
        DetectorKind::Md => {
            let dim = r.u64()? as usize;
            let k = r.u64()? as usize;
            if dim == 0 || k == 0 {
                return Err(Error::ModelFile("empty covariance model".into()));
            }
            if k > dim {
                return Err(Error::ModelFile(format!("{k} components exceed dimension {dim}")));
            }
            let variance_fraction = r.f64()?;
            if !(variance_fraction > 0.0 && variance_fraction <= 1.0) {
                return Err(Error::ModelFile(format!(
                    "stored variance fraction {variance_fraction} outside (0, 1]"
                )));
            }
            r.ensure_remaining((dim + k + k * dim) * 8)?;
            let mean = r.vector(dim)?;
            let mut scales = Vec::with_capacity(k);
            for _ in 0..k {
                let s = r.f64()?;
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::ModelFile(format!("whitening scale {s} outside (0, inf)")));
                }
                scales.push(s);
            }
            let mut components = Vec::with_capacity(k);
            for _ in 0..k {
                components.push(r.vector(dim)?);
            }
            Ok(DetectorModel::Md(PcaModel { mean, components, scales, variance_fraction }))
        }
    }
}

fn put_homotopy(w: &mut Vec<u8>, cfg: &HomotopyConfig) {
    match cfg.stop {
        LambdaStop::Absolute(v) => {
            w.push(0);
            put_f64(w, v);
        }
        LambdaStop::RelativeToFirst(f) => {
            w.push(1);
            put_f64(w, f);
        }
    }
    match cfg.max_active {
        None => w.push(0),
        Some(m) => {
            w.push(1);
            put_u64(w, m as u64);
        }
    }
    put_u64(w, cfg.max_steps as u64);
}

fn get_homotopy(r: &mut Reader<'_>) -> Result<HomotopyConfig> {
    let stop = match r.u8()? {
        0 => LambdaStop::Absolute(r.f64()?),
        1 => LambdaStop::RelativeToFirst(r.f64()?),
        other => return Err(Error::ModelFile(format!("bad lambda stop tag {other}"))),
    };
    let max_active = match r.u8()? {
        0 => None,
        1 => Some(r.u64()? as usize),
        other => return Err(Error::ModelFile(format!("bad max_active presence tag {other}"))),
    };
    let max_steps = r.u64()? as usize;
    Ok(HomotopyConfig { stop, max_active, max_steps })
}

fn put_u32(w: &mut Vec<u8>, v: u32) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(w: &mut Vec<u8>, v: u64) {
    w.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(w: &mut Vec<u8>, v: f64) {
    w.extend_from_slice(&v.to_le_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.at + n > self.bytes.len() {
            return Err(Error::ModelFile(format!(
                "truncated: wanted {n} bytes at offset {}, file has {}",
                self.at,
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn ensure_remaining(&self, n: usize) -> Result<()> {
        if self.at + n > self.bytes.len() {
            return Err(Error::ModelFile(format!(
                "truncated: payload of {n} bytes does not fit at offset {}",
                self.at
            )));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("length checked")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("length checked")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("length checked")))
    }

    fn vector(&mut self, dim: usize) -> Result<Vector> {
        let mut v = Vec::with_capacity(dim);
        for _ in 0..dim {
            v.push(self.f64()?);
        }
        Vector::new(v).map_err(|e| Error::ModelFile(format!("stored vector invalid: {e}")))
    }
}
