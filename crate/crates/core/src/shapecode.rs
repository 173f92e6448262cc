//! The fixed-layout biometric template and its binary file format.
//!
//! A code is an `m x n` matrix of `b`-bit gray values: for each of the four
//! retained bands and its two objects, the three contour signatures are
//! quantized into one strip of `n` samples each. Strips are ordered
//! kind-major (all RVF, then all SF, then all TAF), template-major and
//! object-minor within a kind, giving m = 3 x 4 x 2 = 24 and a default code
//! size of 24 x 100 x 8 = 19,200 bits.

use std::fmt;

use crate::binarize::SelectedObject;
use crate::error::{CodecError, Error, Result};
use crate::imaging::Session;
use crate::scalar::Real;
use crate::shapedesc::{
    radius_vector, start_point_canonicalize, support_function, tangent_angle, DescriptorKind,
    FeatureCurve,
};

pub const MAGIC: [u8; 4] = *b"SHPC";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;
const FLAG_DEGRADED: u8 = 0x01;

/// Strips per single-session code: 3 kinds x 4 templates x 2 objects.
pub const DEFAULT_STRIPS: usize = 24;
pub const DEFAULT_SAMPLES: usize = 100;
pub const DEFAULT_BITS: u8 = 8;

/// Position of one strip in the code layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StripLabel {
    pub kind: DescriptorKind,
    /// Retained band number, 2..=5.
    pub template: u8,
    /// 1 or 2 by area rank.
    pub object: u8,
    /// Present on fused codes only.
    pub session: Option<Session>,
}

impl fmt::Display for StripLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(session) = self.session {
            write!(f, "{}_", session)?;
        }
        write!(f, "{}{}_{}", self.kind.short_name(), self.object, self.template)
    }
}

/// Quantizes a unit-interval curve to `bits`-bit levels by round-half-up:
/// `q = floor(v (2^b - 1) + 0.5)`, so 0 maps to 0 and 1 to the top level.
pub fn quantize<T: Real>(curve: &FeatureCurve<T>, bits: u8) -> Result<Vec<u16>> {
    validate_bits(bits)?;
    let levels = T::from_u32((1u32 << bits) - 1).unwrap();
    let half = T::of(0.5);
    curve
        .samples
        .iter()
        .map(|&v| {
            if !(T::zero()..=T::one()).contains(&v) {
                return Err(Error::SampleRange { value: v.as_f64() });
            }
            Ok((v * levels + half).floor().to_u16().unwrap())
        })
        .collect()
}

/// Midpoint of the quantization level, the inverse of [`quantize`] up to
/// half a step.
pub fn dequantize(q: u16, bits: u8) -> f64 {
    q as f64 / ((1u32 << bits) - 1) as f64
}

fn validate_bits(bits: u8) -> Result<()> {
    if bits == 0 || bits > 16 {
        return Err(Error::InvalidParameter(format!("bits per sample must be 1..=16, got {bits}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeCode {
    m: u16,
    n: u16,
    b: u8,
    degraded: bool,
    /// Row-major samples, strip by strip; values fit in `b` bits.
    strips: Vec<u16>,
}

impl ShapeCode {
    pub fn from_parts(m: u16, n: u16, b: u8, degraded: bool, strips: Vec<u16>) -> Result<Self> {
        validate_bits(b)?;
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter("code dimensions must be nonzero".into()));
        }
        if strips.len() != m as usize * n as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} samples for an {m}x{n} code",
                strips.len()
            )));
        }
        let mask = Self::sample_mask(b);
        if let Some(&v) = strips.iter().find(|&&v| v > mask) {
            return Err(Error::InvalidParameter(format!("sample {v} exceeds {b}-bit range")));
        }
        Ok(Self { m, n, b, degraded, strips })
    }

    /// Builds the 24-strip code from the eight selected objects (bands 2..=5
    /// in order, two objects each). Contours are start-point canonicalized
    /// before the signatures are evaluated.
    pub fn assemble<T: Real>(objects: &[SelectedObject<T>], n: usize, bits: u8) -> Result<Self> {
        validate_bits(bits)?;
        if objects.len() != DEFAULT_STRIPS / 3 {
            return Err(Error::InvalidParameter(format!(
                "expected {} objects, got {}",
                DEFAULT_STRIPS / 3,
                objects.len()
            )));
        }
        if n == 0 || n > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!("samples per strip out of range: {n}")));
        }
        let degraded = objects.iter().any(|o| o.placeholder);
        let mut per_object: Vec<[Vec<u16>; 3]> = Vec::with_capacity(objects.len());
        for object in objects {
            let contour = start_point_canonicalize(&object.contour);
            per_object.push([
                quantize(&radius_vector(&contour, n), bits)?,
                quantize(&support_function(&contour, n), bits)?,
                quantize(&tangent_angle(&contour, n), bits)?,
            ]);
        }
        let mut strips = Vec::with_capacity(DEFAULT_STRIPS * n);
        for kind in 0..3 {
            for object in &per_object {
                strips.extend_from_slice(&object[kind]);
            }
        }
        Self::from_parts(DEFAULT_STRIPS as u16, n as u16, bits, degraded, strips)
    }

    pub fn strip_count(&self) -> usize {
        self.m as usize
    }

    pub fn samples_per_strip(&self) -> usize {
        self.n as usize
    }

    pub fn bits_per_sample(&self) -> u8 {
        self.b
    }

    pub fn degraded(&self) -> bool {
        self.degraded
    }

    /// Total template size in bits: m x n x b.
    pub fn bits(&self) -> usize {
        self.m as usize * self.n as usize * self.b as usize
    }

    pub fn strip(&self, index: usize) -> &[u16] {
        let n = self.n as usize;
        &self.strips[index * n..(index + 1) * n]
    }

    pub fn samples(&self) -> &[u16] {
        &self.strips
    }

    pub fn sample_mask(bits: u8) -> u16 {
        (((1u32 << bits) - 1) & 0xffff) as u16
    }

    /// Strip labels derived from the layout: standard for 24-strip codes,
    /// session-prefixed halves for 48-strip fused codes. Codes with other
    /// strip counts have no named layout and yield an empty list.
    pub fn layout(&self) -> Vec<StripLabel> {
        match self.m as usize {
            DEFAULT_STRIPS => standard_layout(None),
            m if m == 2 * DEFAULT_STRIPS => {
                let mut labels = standard_layout(Some(Session::Vl));
                labels.extend(standard_layout(Some(Session::Nir)));
                labels
            }
            _ => Vec::new(),
        }
    }

    /// Copy with every strip circularly shifted by `s` samples (sample `j`
    /// of the result is sample `j - s` of the original).
    pub fn shifted(&self, s: i32) -> Self {
        let n = self.n as i64;
        let mut strips = Vec::with_capacity(self.strips.len());
        for strip in self.strips.chunks_exact(self.n as usize) {
            for j in 0..n {
                let src = (j - s as i64).rem_euclid(n) as usize;
                strips.push(strip[src]);
            }
        }
        Self { strips, ..*self }
    }

    /// Concatenates two codes strip-wise; used for VL+NIR fusion.
    pub fn concatenated(&self, other: &ShapeCode) -> Result<ShapeCode> {
        if self.n != other.n || self.b != other.b {
            return Err(Error::DimensionMismatch(format!(
                "cannot concatenate {}x{}b codes with {}x{}b codes",
                self.n, self.b, other.n, other.b
            )));
        }
        let m = self
            .m
            .checked_add(other.m)
            .ok_or_else(|| Error::InvalidParameter("fused strip count overflows".into()))?;
        let mut strips = self.strips.clone();
        strips.extend_from_slice(&other.strips);
        Ok(ShapeCode { m, n: self.n, b: self.b, degraded: self.degraded || other.degraded, strips })
    }

    fn bytes_per_sample(bits: u8) -> usize {
        if bits <= 8 {
            1
        } else {
            2
        }
    }

    /// Binary layout, little-endian: 16-byte header (magic "SHPC", version,
    /// flags, m u16, n u16, b u8, 5 reserved zero bytes), the payload of
    /// m x n samples at ceil(b/8) bytes each, and a CRC-32 over header plus
    /// payload.
    pub fn serialize(&self) -> Vec<u8> {
        let bps = Self::bytes_per_sample(self.b);
        let mut out = Vec::with_capacity(HEADER_LEN + self.strips.len() * bps + 4);
        out.extend_from_slice(&MAGIC);
        out.push(FORMAT_VERSION);
        out.push(if self.degraded { FLAG_DEGRADED } else { 0 });
        out.extend_from_slice(&self.m.to_le_bytes());
        out.extend_from_slice(&self.n.to_le_bytes());
        out.push(self.b);
        out.extend_from_slice(&[0u8; 5]);
        debug_assert_eq!(out.len(), HEADER_LEN);
        for &v in &self.strips {
            if bps == 1 {
                out.push(v as u8);
            } else {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn deserialize(bytes: &[u8]) -> std::result::Result<ShapeCode, CodecError> {
        if bytes.len() < HEADER_LEN + 4 {
            return Err(CodecError::Truncated { expected: HEADER_LEN + 4, got: bytes.len() });
        }
        if bytes[0..4] != MAGIC {
            return Err(CodecError::BadMagic);
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(CodecError::Version(bytes[4]));
        }
        let flags = bytes[5];
        if flags & !FLAG_DEGRADED != 0 {
            return Err(CodecError::Flags(flags & !FLAG_DEGRADED));
        }
        let m = u16::from_le_bytes([bytes[6], bytes[7]]);
        let n = u16::from_le_bytes([bytes[8], bytes[9]]);
        let b = bytes[10];
        if m == 0 || n == 0 {
            return Err(CodecError::Header(format!("zero dimension {m}x{n}")));
        }
        if b == 0 || b > 16 {
            return Err(CodecError::Header(format!("bits per sample {b}")));
        }
        if bytes[11..16].iter().any(|&v| v != 0) {
            return Err(CodecError::Header("nonzero reserved bytes".into()));
        }
        let bps = Self::bytes_per_sample(b);
        let payload_len = m as usize * n as usize * bps;
        let expected = HEADER_LEN + payload_len + 4;
        match bytes.len().cmp(&expected) {
            std::cmp::Ordering::Less => {
                return Err(CodecError::Truncated { expected, got: bytes.len() })
            }
            std::cmp::Ordering::Greater => {
                return Err(CodecError::Trailing(bytes.len() - expected))
            }
            std::cmp::Ordering::Equal => {}
        }
        let stored = u32::from_le_bytes(
            bytes[expected - 4..expected].try_into().expect("length checked"),
        );
        let computed = crc32fast::hash(&bytes[..expected - 4]);
        if stored != computed {
            return Err(CodecError::Checksum { stored, computed });
        }
        let payload = &bytes[HEADER_LEN..HEADER_LEN + payload_len];
        let mask = Self::sample_mask(b);
        let mut strips = Vec::with_capacity(m as usize * n as usize);
        for (index, chunk) in payload.chunks_exact(bps).enumerate() {
            let v = if bps == 1 { chunk[0] as u16 } else { u16::from_le_bytes([chunk[0], chunk[1]]) };
            if v > mask {
                return Err(CodecError::SampleRange { index, value: v, bits: b });
            }
            strips.push(v);
        }
        Ok(ShapeCode { m, n, b, degraded: flags & FLAG_DEGRADED != 0, strips })
    }
}

fn standard_layout(session: Option<Session>) -> Vec<StripLabel> {
    let mut labels = Vec::with_capacity(DEFAULT_STRIPS);
    for kind in DescriptorKind::ALL {
        for template in 2..=5u8 {
            for object in 1..=2u8 {
                labels.push(StripLabel { kind, template, object, session });
            }
        }
    }
    labels
}
