//! Binary container for trained discriminators.
//!
//! Layout (little endian): magic `LOBD`, u16 version, u8 architecture code,
//! u32 window, u32 filters, u32 width, 3+3 f64 input mean/std, u32 feature
//! count followed by that many f64 means and stds, u32 parameter count and
//! the parameters.

use std::io::{self, Read, Write};

use lobbench_core::adversarial::{Architecture, Discriminator, CHANNELS};

const MAGIC: &[u8; 4] = b"LOBD";
pub const FORMAT_VERSION: u16 = 1;

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

fn put_u32(out: &mut impl Write, v: usize) -> io::Result<()> {
    let v = u32::try_from(v).map_err(|_| bad("dimension exceeds u32"))?;
    out.write_all(&v.to_le_bytes())
}

fn put_f64s(out: &mut impl Write, v: &[f64]) -> io::Result<()> {
    v.iter().try_for_each(|x| out.write_all(&x.to_le_bytes()))
}

pub fn write_model(mut out: impl Write, m: &Discriminator) -> io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&[m.arch.code()])?;
    put_u32(&mut out, m.window)?;
    put_u32(&mut out, m.filters)?;
    put_u32(&mut out, m.width)?;
    put_f64s(&mut out, &m.input_mean)?;
    put_f64s(&mut out, &m.input_std)?;
    if m.feature_mean.len() != m.feature_std.len() {
        return Err(bad("feature mean/std length mismatch"));
    }
    put_u32(&mut out, m.feature_mean.len())?;
    put_f64s(&mut out, &m.feature_mean)?;
    put_f64s(&mut out, &m.feature_std)?;
    put_u32(&mut out, m.params.len())?;
    put_f64s(&mut out, &m.params)?;
    out.flush()
}

struct Reader<R>(R);

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> io::Result<[u8; N]> {
        let mut b = [0u8; N];
        self.0.read_exact(&mut b)?;
        Ok(b)
    }

    fn u32(&mut self) -> io::Result<usize> {
        Ok(u32::from_le_bytes(self.bytes()?) as usize)
    }

    fn f64s(&mut self, n: usize) -> io::Result<Vec<f64>> {
        (0..n).map(|_| Ok(f64::from_le_bytes(self.bytes()?))).collect()
    }
}

pub fn read_model(input: impl Read) -> io::Result<Discriminator> {
    let mut r = Reader(input);
    if &r.bytes::<4>()? != MAGIC {
        return Err(bad("not a discriminator file"));
    }
    let version = u16::from_le_bytes(r.bytes()?);
    if version != FORMAT_VERSION {
        return Err(bad(format!("unsupported model format version {version}")));
    }
    let [code] = r.bytes::<1>()?;
    let arch = Architecture::from_code(code).ok_or_else(|| bad(format!("unknown architecture code {code}")))?;
    let (window, filters, width) = (r.u32()?, r.u32()?, r.u32()?);
    let mut input_mean = [0.0; CHANNELS];
    let mut input_std = [0.0; CHANNELS];
    input_mean.copy_from_slice(&r.f64s(CHANNELS)?);
    input_std.copy_from_slice(&r.f64s(CHANNELS)?);
    let nf = r.u32()?;
    let feature_mean = r.f64s(nf)?;
    let feature_std = r.f64s(nf)?;
    let np = r.u32()?;
    let expected = lobbench_core::adversarial::param_count(arch, filters, width);
    if np != expected {
        return Err(bad(format!("expected {expected} parameters, file has {np}")));
    }
    let params = r.f64s(np)?;
    Ok(Discriminator { arch, window, filters, width, input_mean, input_std, feature_mean, feature_std, params })
}
