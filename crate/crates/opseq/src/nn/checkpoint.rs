//! Model checkpoint container: little-endian, magic `OPSM`, a JSON-encoded
//! config block, then named parameter records (name, rank, dims, float32
//! data). Adam moments and the step counter are appended only for
//! resume-capable checkpoints.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::adam::Moments;
use super::lstm::LstmLayer;
use super::tensor::Tensor;
use super::{ConvLayer, ModelConfig, ModelState, NnError, NUM_CONV_STAGES};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"OPSM";
pub const CHECKPOINT_VERSION: u32 = 1;

fn write_record(buf: &mut Vec<u8>, name: &str, tensor: &Tensor<f32>) {
    buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
    for &d in tensor.shape() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in tensor.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn write_checkpoint(
    path: &Path,
    state: &ModelState<f32>,
    with_moments: bool,
) -> Result<(), NnError> {
    let config_json = serde_json::to_vec(&state.config)
        .map_err(|e| NnError::BadFormat(format!("config serialization failed: {e}")))?;
    let names = state.param_names();
    let params = state.params();

    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&config_json);
    buf.extend_from_slice(&(state.input_channels as u32).to_le_bytes());
    buf.push(u8::from(with_moments));
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, tensor) in names.iter().zip(&params) {
        write_record(&mut buf, name, tensor);
    }
    if with_moments {
        buf.extend_from_slice(&state.step.to_le_bytes());
        for (name, moment) in names.iter().zip(&state.moments) {
            write_record(&mut buf, &format!("adam.m.{name}"), &moment.m);
            write_record(&mut buf, &format!("adam.v.{name}"), &moment.v);
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.bytes.len() {
            return Err(NnError::BadFormat("truncated checkpoint".to_string()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn record(&mut self) -> Result<(String, Tensor<f32>), NnError> {
        let name_len = self.u16()? as usize;
        let name = String::from_utf8(self.take(name_len)?.to_vec())
            .map_err(|_| NnError::BadFormat("non-UTF-8 parameter name".to_string()))?;
        let rank = self.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(self.u32()? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f32::from_le_bytes(self.take(4)?.try_into().unwrap()));
        }
        Ok((name, Tensor::from_vec(&shape, data)))
    }
}

pub fn read_checkpoint(path: &Path) -> Result<ModelState<f32>, NnError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(4)? != CHECKPOINT_MAGIC {
        return Err(NnError::BadFormat("bad checkpoint magic".to_string()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(NnError::BadFormat(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let config_len = r.u32()? as usize;
    let config: ModelConfig = serde_json::from_slice(r.take(config_len)?)
        .map_err(|e| NnError::BadFormat(format!("config parse failed: {e}")))?;
    config.validate()?;
    let input_channels = r.u32()? as usize;
    let with_moments = r.take(1)?[0] != 0;
    let count = r.u32()? as usize;
    let mut records: HashMap<String, Tensor<f32>> = HashMap::with_capacity(count);
    for _ in 0..count {
        let (name, tensor) = r.record()?;
        records.insert(name, tensor);
    }

    let mut take = |name: &str| -> Result<Tensor<f32>, NnError> {
        records
            .remove(name)
            .ok_or_else(|| NnError::BadFormat(format!("missing parameter {name:?}")))
    };

    let mut conv = Vec::with_capacity(NUM_CONV_STAGES);
    for i in 0..NUM_CONV_STAGES {
        conv.push(ConvLayer {
            w: take(&format!("conv{}.weight", i + 1))?,
            b: take(&format!("conv{}.bias", i + 1))?,
        });
    }
    let mut lstm = Vec::with_capacity(config.lstm_depth);
    for i in 0..config.lstm_depth {
        lstm.push(LstmLayer {
            w: take(&format!("lstm{i}.w"))?,
            u: take(&format!("lstm{i}.u"))?,
            b: take(&format!("lstm{i}.b"))?,
        });
    }
    let dense_w = take("dense.weight")?;
    let dense_b = take("dense.bias")?;
    if !records.is_empty() {
        return Err(NnError::BadFormat(format!(
            "unexpected extra parameters: {:?}",
            records.keys().collect::<Vec<_>>()
        )));
    }

    let mut state = ModelState {
        config,
        input_channels,
        conv,
        lstm,
        dense_w,
        dense_b,
        moments: Vec::new(),
        step: 0,
    };

    if with_moments {
        state.step = r.u64()?;
        let names = state.param_names();
        let mut moment_records: HashMap<String, Tensor<f32>> = HashMap::new();
        for _ in 0..names.len() * 2 {
            let (name, tensor) = r.record()?;
            moment_records.insert(name, tensor);
        }
        for name in &names {
            let m = moment_records
                .remove(&format!("adam.m.{name}"))
                .ok_or_else(|| NnError::BadFormat(format!("missing moment adam.m.{name}")))?;
            let v = moment_records
                .remove(&format!("adam.v.{name}"))
                .ok_or_else(|| NnError::BadFormat(format!("missing moment adam.v.{name}")))?;
            state.moments.push(Moments { m, v });
        }
    } else {
        state.moments = state
            .params()
            .into_iter()
            .map(Moments::zeros_like)
            .collect();
    }

    // Geometry sanity: shapes must be what the config dictates.
    let expected = ModelState::<f32>::init(&state.config, state.input_channels, 0)?;
    for ((got, want), name) in state
        .params()
        .iter()
        .zip(expected.params().iter())
        .zip(state.param_names())
    {
        if got.shape() != want.shape() {
            return Err(NnError::BadFormat(format!(
                "parameter {name} has shape {:?}, config dictates {:?}",
                got.shape(),
                want.shape()
            )));
        }
    }
    Ok(state)
}
