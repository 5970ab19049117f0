//! Binary model image.
//!
//! Every field is little-endian and every section starts on a 4-byte
//! boundary.
//!
//! ```text
//! header   32 bytes
//!   0  magic          b"RMNI"
//!   4  version        u16 (1)
//!   6  kind           u16 (1 = float32 graph, 2 = int8 model)
//!   8  tensor count   u32
//!  12  node count     u32
//!  16  input tensor   u32
//!  20  output tensor  u32
//!  24  payload bytes  u32 (everything between header and checksum)
//!  28  reserved       u32 (0)
//! payload
//!   architecture block
//!     u32 tag: 0 custom, 1 REMNet, 2 MLP
//!     REMNet: cir_len, filters, modules, stem_kernel, block_kernel (u32),
//!             dropout_rate (f64), flags (u32, bit 0 = reference layout)
//!     MLP:    input_dim (u32), hidden layer count n (u32), n x u32
//!   tensor table, 16 bytes per tensor
//!     len u32, channels u32, scale f32, zero_point i32 (float image: 0, 0)
//!   node table, 72 bytes per node
//!     opcode u32 (1 conv, 2 dense, 3 add, 4 relu, 5 dropout, 6 flatten)
//!     flags u32 (bit 0 fused ReLU, bit 1 has bias)
//!     input_a u32, input_b u32 (0xFFFF_FFFF when unused), output u32
//!     kernel_size u32, in u32, out u32, stride u32 (add: headroom bits)
//!     m0_a i32, shift_a u32, m0_b i32, shift_b u32
//!     weight_scale f32 (dropout: rate)
//!     weight_offset u32, weight_bytes u32, bias_offset u32, bias_bytes u32
//!   blob section
//!     weights (int8 or f32) and biases (int32 or f32); offsets are
//!     relative to the section start and 4-byte aligned
//! checksum  u32 CRC-32 (IEEE) of header and payload
//! ```

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::nn::{Activation, ConvKernel, DenseLayer};
use crate::quant::{
    Architecture, FixedPointMultiplier, FloatGraph, FloatNode, FloatOp, QAdd, QConv, QDense, QNode, QOp,
    QTensor, QuantParams, QuantizedModel, Shape,
};

pub const MAGIC: [u8; 4] = *b"RMNI";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 32;
pub const TENSOR_BYTES: usize = 16;
pub const NODE_BYTES: usize = 72;
const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u16)]
pub enum ImageKind {
    Float32 = 1,
    Int8 = 2,
}

/// Decoded fixed-size header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageHeader {
    pub version: u16,
    pub kind: ImageKind,
    pub tensor_count: u32,
    pub node_count: u32,
    pub input: u32,
    pub output: u32,
    pub payload_bytes: u32,
}

const OP_CONV: u32 = 1;
const OP_DENSE: u32 = 2;
const OP_ADD: u32 = 3;
const OP_RELU: u32 = 4;
const OP_DROPOUT: u32 = 5;
const OP_FLATTEN: u32 = 6;

const FLAG_RELU: u32 = 1;
const FLAG_BIAS: u32 = 2;

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn i32(&mut self, v: i32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Image(format!("{v} does not fit in u32")))?;
        self.u32(v);
        Ok(())
    }
    fn pad(&mut self) {
        while !self.buf.len().is_multiple_of(4) {
            self.buf.push(0);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Image("truncated image".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn i32(&mut self) -> Result<i32> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
}

/// Raw 72-byte node descriptor.
#[derive(Debug, Default, Clone, Copy)]
struct Descriptor {
    opcode: u32,
    flags: u32,
    input_a: u32,
    input_b: u32,
    output: u32,
    kernel_size: u32,
    in_dim: u32,
    out_dim: u32,
    stride: u32,
    m0_a: i32,
    shift_a: u32,
    m0_b: i32,
    shift_b: u32,
    weight_scale: f32,
    weight_offset: u32,
    weight_bytes: u32,
    bias_offset: u32,
    bias_bytes: u32,
}

impl Descriptor {
    fn write(&self, w: &mut Writer) {
        for v in [
            self.opcode,
            self.flags,
            self.input_a,
            self.input_b,
            self.output,
            self.kernel_size,
            self.in_dim,
            self.out_dim,
            self.stride,
        ] {
            w.u32(v);
        }
        w.i32(self.m0_a);
        w.u32(self.shift_a);
        w.i32(self.m0_b);
        w.u32(self.shift_b);
        w.f32(self.weight_scale);
        for v in [
            self.weight_offset,
            self.weight_bytes,
            self.bias_offset,
            self.bias_bytes,
        ] {
            w.u32(v);
        }
    }

    fn read(r: &mut Reader) -> Result<Self> {
        Ok(Descriptor {
            opcode: r.u32()?,
            flags: r.u32()?,
            input_a: r.u32()?,
            input_b: r.u32()?,
            output: r.u32()?,
            kernel_size: r.u32()?,
            in_dim: r.u32()?,
            out_dim: r.u32()?,
            stride: r.u32()?,
            m0_a: r.i32()?,
            shift_a: r.u32()?,
            m0_b: r.i32()?,
            shift_b: r.u32()?,
            weight_scale: r.f32()?,
            weight_offset: r.u32()?,
            weight_bytes: r.u32()?,
            bias_offset: r.u32()?,
            bias_bytes: r.u32()?,
        })
    }

    fn inputs(&self) -> Vec<usize> {
        let mut v = vec![self.input_a as usize];
        if self.input_b != NONE {
            v.push(self.input_b as usize);
        }
        v
    }

    fn weights<'a>(&self, blobs: &'a [u8]) -> Result<&'a [u8]> {
        blob(blobs, self.weight_offset, self.weight_bytes)
    }

    fn bias<'a>(&self, blobs: &'a [u8]) -> Result<Option<&'a [u8]>> {
        if self.flags & FLAG_BIAS == 0 {
            return Ok(None);
        }
        blob(blobs, self.bias_offset, self.bias_bytes).map(Some)
    }

    fn relu(&self) -> bool {
        self.flags & FLAG_RELU != 0
    }

    fn activation(&self) -> Activation {
        if self.relu() {
            Activation::Relu
        } else {
            Activation::None
        }
    }
}

fn blob(blobs: &[u8], offset: u32, len: u32) -> Result<&[u8]> {
    let (o, l) = (offset as usize, len as usize);
    if o % 4 != 0 {
        return Err(Error::Image(format!("blob offset {o} is not 4-byte aligned")));
    }
    blobs
        .get(o..o.saturating_add(l))
        .ok_or_else(|| Error::Image(format!("blob [{o}, +{l}) outside the blob section")))
}

fn idx(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Image(format!("{v} does not fit in u32")))
}

#[derive(Default)]
struct Blobs {
    w: Writer,
}

impl Blobs {
    fn push(&mut self, bytes: impl IntoIterator<Item = u8>) -> Result<(u32, u32)> {
        let start = self.w.buf.len();
        self.w.buf.extend(bytes);
        let len = self.w.buf.len() - start;
        self.w.pad();
        Ok((idx(start)?, idx(len)?))
    }

    fn push_f32(&mut self, v: &[f64]) -> Result<(u32, u32)> {
        self.push(v.iter().flat_map(|&x| (x as f32).to_le_bytes()))
    }

    fn push_i32(&mut self, v: &[i32]) -> Result<(u32, u32)> {
        self.push(v.iter().flat_map(|x| x.to_le_bytes()))
    }
}

fn write_architecture(w: &mut Writer, arch: &Architecture) -> Result<()> {
    match arch {
        Architecture::Custom => w.u32(0),
        Architecture::Remnet(c) => {
            w.u32(1);
            for v in [c.cir_len, c.filters, c.modules, c.stem_kernel, c.block_kernel] {
                w.usize(v)?;
            }
            w.f64(c.dropout_rate);
            w.u32(u32::from(c.reference_layout));
        }
        Architecture::Mlp { input_dim, hidden } => {
            w.u32(2);
            w.usize(*input_dim)?;
            w.usize(hidden.len())?;
            for &h in hidden {
                w.usize(h)?;
            }
        }
    }
    Ok(())
}

fn read_architecture(r: &mut Reader) -> Result<Architecture> {
    match r.u32()? {
        0 => Ok(Architecture::Custom),
        1 => {
            let mut v = [0usize; 5];
            for x in &mut v {
                *x = r.usize()?;
            }
            let dropout_rate = r.f64()?;
            let flags = r.u32()?;
            let config = ModelConfig {
                cir_len: v[0],
                filters: v[1],
                modules: v[2],
                stem_kernel: v[3],
                block_kernel: v[4],
                dropout_rate,
                reference_layout: flags & 1 != 0,
            };
            config
                .validate()
                .map_err(|e| Error::Image(format!("architecture block: {e}")))?;
            Ok(Architecture::Remnet(config))
        }
        2 => {
            let input_dim = r.usize()?;
            let n = r.usize()?;
            if n > 64 {
                return Err(Error::Image(format!("{n} hidden layers is implausible")));
            }
            let hidden = (0..n).map(|_| r.usize()).collect::<Result<Vec<_>>>()?;
            Ok(Architecture::Mlp { input_dim, hidden })
        }
        t => Err(Error::Image(format!("unknown architecture tag {t}"))),
    }
}

fn finish(
    kind: ImageKind,
    tensor_count: usize,
    node_count: usize,
    input: usize,
    output: usize,
    body: Writer,
    blobs: Blobs,
) -> Result<Vec<u8>> {
    let mut payload = body.buf;
    payload.extend_from_slice(&blobs.w.buf);
    let mut w = Writer::default();
    w.buf.extend_from_slice(&MAGIC);
    w.u16(FORMAT_VERSION);
    w.u16(kind as u16);
    w.usize(tensor_count)?;
    w.usize(node_count)?;
    w.usize(input)?;
    w.usize(output)?;
    w.usize(payload.len())?;
    w.u32(0);
    w.buf.extend_from_slice(&payload);
    let crc = crc32fast::hash(&w.buf);
    w.u32(crc);
    Ok(w.buf)
}

/// Serializes an int8 model.
pub fn serialize(model: &QuantizedModel) -> Result<Vec<u8>> {
    model.validate()?;
    let mut body = Writer::default();
    write_architecture(&mut body, &model.architecture)?;
    for t in &model.tensors {
        body.usize(t.shape.len)?;
        body.usize(t.shape.channels)?;
        body.f32(t.qparams.scale);
        body.i32(t.qparams.zero_point);
    }
    let mut blobs = Blobs::default();
    for node in &model.nodes {
        let mut d = Descriptor {
            input_a: idx(node.inputs[0])?,
            input_b: node.inputs.get(1).map_or(Ok(NONE), |&t| idx(t))?,
            output: idx(node.output)?,
            ..Default::default()
        };
        match &node.op {
            QOp::Conv(c) => {
                d.opcode = OP_CONV;
                d.kernel_size = idx(c.kernel_size)?;
                d.in_dim = idx(c.in_channels)?;
                d.out_dim = idx(c.out_channels)?;
                d.stride = idx(c.stride)?;
                d.flags = if c.relu { FLAG_RELU } else { 0 };
                (d.m0_a, d.shift_a) = (c.multiplier.m0, c.multiplier.shift);
                d.weight_scale = c.weight_scale;
                (d.weight_offset, d.weight_bytes) = blobs.push(c.weights.iter().map(|&v| v as u8))?;
                if let Some(b) = &c.bias {
                    d.flags |= FLAG_BIAS;
                    (d.bias_offset, d.bias_bytes) = blobs.push_i32(b)?;
                }
            }
            QOp::Dense(l) => {
                d.opcode = OP_DENSE;
                d.kernel_size = 1;
                d.in_dim = idx(l.in_dim)?;
                d.out_dim = idx(l.out_dim)?;
                d.stride = 1;
                d.flags = FLAG_BIAS | if l.relu { FLAG_RELU } else { 0 };
                (d.m0_a, d.shift_a) = (l.multiplier.m0, l.multiplier.shift);
                d.weight_scale = l.weight_scale;
                (d.weight_offset, d.weight_bytes) = blobs.push(l.weights.iter().map(|&v| v as u8))?;
                (d.bias_offset, d.bias_bytes) = blobs.push_i32(&l.bias)?;
            }
            QOp::Add(a) => {
                d.opcode = OP_ADD;
                d.flags = if a.relu { FLAG_RELU } else { 0 };
                (d.m0_a, d.shift_a) = (a.multiplier_a.m0, a.multiplier_a.shift);
                (d.m0_b, d.shift_b) = (a.multiplier_b.m0, a.multiplier_b.shift);
                d.stride = a.headroom;
            }
        }
        d.write(&mut body);
    }
    finish(
        ImageKind::Int8,
        model.tensors.len(),
        model.nodes.len(),
        model.input,
        model.output,
        body,
        blobs,
    )
}

/// Serializes a float graph with f32 weights.
pub fn serialize_float(graph: &FloatGraph) -> Result<Vec<u8>> {
    graph.validate()?;
    let mut body = Writer::default();
    write_architecture(&mut body, &graph.architecture)?;
    for t in &graph.tensors {
        body.usize(t.len)?;
        body.usize(t.channels)?;
        body.f32(0.0);
        body.i32(0);
    }
    let mut blobs = Blobs::default();
    for node in &graph.nodes {
        let mut d = Descriptor {
            input_a: idx(node.inputs[0])?,
            input_b: node.inputs.get(1).map_or(Ok(NONE), |&t| idx(t))?,
            output: idx(node.output)?,
            ..Default::default()
        };
        let relu = |a: Activation| if a == Activation::Relu { FLAG_RELU } else { 0 };
        match &node.op {
            FloatOp::Conv(k) => {
                d.opcode = OP_CONV;
                d.kernel_size = idx(k.kernel_size)?;
                d.in_dim = idx(k.in_channels)?;
                d.out_dim = idx(k.out_channels)?;
                d.stride = idx(k.stride)?;
                d.flags = relu(k.activation);
                (d.weight_offset, d.weight_bytes) = blobs.push_f32(&k.weights)?;
                if let Some(b) = &k.bias {
                    d.flags |= FLAG_BIAS;
                    (d.bias_offset, d.bias_bytes) = blobs.push_f32(b)?;
                }
            }
            FloatOp::Dense { layer, activation } => {
                d.opcode = OP_DENSE;
                d.kernel_size = 1;
                d.in_dim = idx(layer.in_dim)?;
                d.out_dim = idx(layer.out_dim)?;
                d.stride = 1;
                d.flags = FLAG_BIAS | relu(*activation);
                (d.weight_offset, d.weight_bytes) = blobs.push_f32(&layer.weights)?;
                (d.bias_offset, d.bias_bytes) = blobs.push_f32(&layer.bias)?;
            }
            FloatOp::Add { activation } => {
                d.opcode = OP_ADD;
                d.flags = relu(*activation);
            }
            FloatOp::Relu => d.opcode = OP_RELU,
            FloatOp::Dropout { rate } => {
                d.opcode = OP_DROPOUT;
                d.weight_scale = *rate as f32;
            }
            FloatOp::Flatten => d.opcode = OP_FLATTEN,
        }
        d.write(&mut body);
    }
    finish(
        ImageKind::Float32,
        graph.tensors.len(),
        graph.nodes.len(),
        graph.input,
        graph.output,
        body,
        blobs,
    )
}

/// Checks magic, version, length and checksum, and decodes the header.
pub fn read_header(bytes: &[u8]) -> Result<ImageHeader> {
    if bytes.len() < HEADER_BYTES + 4 {
        return Err(Error::Image(format!("{} bytes is too short", bytes.len())));
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Image("bad magic".into()));
    }
    let mut r = Reader { buf: bytes, pos: 4 };
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::Image(format!(
            "unsupported format version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let kind = match r.u16()? {
        1 => ImageKind::Float32,
        2 => ImageKind::Int8,
        k => return Err(Error::Image(format!("unknown image kind {k}"))),
    };
    let header = ImageHeader {
        version,
        kind,
        tensor_count: r.u32()?,
        node_count: r.u32()?,
        input: r.u32()?,
        output: r.u32()?,
        payload_bytes: r.u32()?,
    };
    if r.u32()? != 0 {
        return Err(Error::Image("reserved header field is not zero".into()));
    }
    let expected = HEADER_BYTES + header.payload_bytes as usize + 4;
    if bytes.len() != expected {
        return Err(Error::Image(format!(
            "image is {} bytes, header declares {expected}",
            bytes.len()
        )));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(Error::Image(format!(
            "checksum mismatch: stored {stored:#010x}, computed {actual:#010x}"
        )));
    }
    Ok(header)
}

struct Sections<'a> {
    header: ImageHeader,
    architecture: Architecture,
    tensors: Vec<(Shape, f32, i32)>,
    nodes: Vec<Descriptor>,
    blobs: &'a [u8],
}

fn read_sections(bytes: &[u8], kind: ImageKind) -> Result<Sections<'_>> {
    let header = read_header(bytes)?;
    if header.kind != kind {
        return Err(Error::Image(format!(
            "expected a {kind:?} image, found {:?}",
            header.kind
        )));
    }
    let end = bytes.len() - 4;
    let mut r = Reader {
        buf: &bytes[..end],
        pos: HEADER_BYTES,
    };
    let architecture = read_architecture(&mut r)?;
    let (tc, nc) = (header.tensor_count as usize, header.node_count as usize);
    if tc.saturating_mul(TENSOR_BYTES) + nc.saturating_mul(NODE_BYTES) > end - r.pos {
        return Err(Error::Image("tables overrun the payload".into()));
    }
    let tensors = (0..tc)
        .map(|_| {
            let shape = Shape::new(r.usize()?, r.usize()?);
            Ok((shape, r.f32()?, r.i32()?))
        })
        .collect::<Result<Vec<_>>>()?;
    let nodes = (0..nc)
        .map(|_| Descriptor::read(&mut r))
        .collect::<Result<Vec<_>>>()?;
    if !r.pos.is_multiple_of(4) {
        return Err(Error::Image("blob section is not 4-byte aligned".into()));
    }
    Ok(Sections {
        header,
        architecture,
        tensors,
        nodes,
        blobs: &bytes[r.pos..end],
    })
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::Image(format!("{what}: {got} bytes, expected {want}")));
    }
    Ok(())
}

fn i32s(b: &[u8]) -> Vec<i32> {
    b.chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

fn f32s(b: &[u8]) -> Vec<f64> {
    b.chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect()
}

/// Decodes and validates an int8 image.
pub fn deserialize(bytes: &[u8]) -> Result<QuantizedModel> {
    let s = read_sections(bytes, ImageKind::Int8)?;
    let tensors = s
        .tensors
        .iter()
        .map(|&(shape, scale, zero_point)| QTensor {
            shape,
            qparams: QuantParams { scale, zero_point },
        })
        .collect();
    let mut nodes = Vec::with_capacity(s.nodes.len());
    for (i, d) in s.nodes.iter().enumerate() {
        let what = format!("node {i}");
        let weights = || -> Result<Vec<i8>> { Ok(d.weights(s.blobs)?.iter().map(|&b| b as i8).collect()) };
        let (k, cin, cout) = (d.kernel_size as usize, d.in_dim as usize, d.out_dim as usize);
        let m_a = FixedPointMultiplier {
            m0: d.m0_a,
            shift: d.shift_a,
        };
        let op = match d.opcode {
            OP_CONV => {
                check_len(&what, d.weight_bytes as usize, k * cin * cout)?;
                let bias = d.bias(s.blobs)?;
                if let Some(b) = bias {
                    check_len(&what, b.len(), 4 * cout)?;
                }
                QOp::Conv(QConv {
                    kernel_size: k,
                    in_channels: cin,
                    out_channels: cout,
                    stride: d.stride as usize,
                    relu: d.relu(),
                    weights: weights()?,
                    weight_scale: d.weight_scale,
                    bias: bias.map(i32s),
                    multiplier: m_a,
                })
            }
            OP_DENSE => {
                check_len(&what, d.weight_bytes as usize, cin * cout)?;
                let bias = d
                    .bias(s.blobs)?
                    .ok_or_else(|| Error::Image(format!("{what}: dense without bias")))?;
                check_len(&what, bias.len(), 4 * cout)?;
                QOp::Dense(QDense {
                    in_dim: cin,
                    out_dim: cout,
                    relu: d.relu(),
                    weights: weights()?,
                    weight_scale: d.weight_scale,
                    bias: i32s(bias),
                    multiplier: m_a,
                })
            }
            OP_ADD => QOp::Add(QAdd {
                relu: d.relu(),
                multiplier_a: m_a,
                multiplier_b: FixedPointMultiplier {
                    m0: d.m0_b,
                    shift: d.shift_b,
                },
                headroom: d.stride,
            }),
            op => {
                return Err(Error::Image(format!(
                    "{what}: opcode {op} not valid in an int8 image"
                )))
            }
        };
        nodes.push(QNode {
            op,
            inputs: d.inputs(),
            output: d.output as usize,
        });
    }
    let model = QuantizedModel {
        architecture: s.architecture,
        tensors,
        nodes,
        input: s.header.input as usize,
        output: s.header.output as usize,
    };
    model
        .validate()
        .map_err(|e| Error::Image(format!("inconsistent model: {e}")))?;
    Ok(model)
}

/// Decodes and validates a float image.
pub fn deserialize_float(bytes: &[u8]) -> Result<FloatGraph> {
    let s = read_sections(bytes, ImageKind::Float32)?;
    let tensors = s.tensors.iter().map(|t| t.0).collect();
    let mut nodes = Vec::with_capacity(s.nodes.len());
    for (i, d) in s.nodes.iter().enumerate() {
        let what = format!("node {i}");
        let (k, cin, cout) = (d.kernel_size as usize, d.in_dim as usize, d.out_dim as usize);
        let op = match d.opcode {
            OP_CONV => {
                check_len(&what, d.weight_bytes as usize, 4 * k * cin * cout)?;
                let bias = d.bias(s.blobs)?;
                if let Some(b) = bias {
                    check_len(&what, b.len(), 4 * cout)?;
                }
                FloatOp::Conv(ConvKernel {
                    kernel_size: k,
                    in_channels: cin,
                    out_channels: cout,
                    stride: d.stride as usize,
                    activation: d.activation(),
                    weights: f32s(d.weights(s.blobs)?),
                    bias: bias.map(f32s),
                })
            }
            OP_DENSE => {
                check_len(&what, d.weight_bytes as usize, 4 * cin * cout)?;
                let bias = d
                    .bias(s.blobs)?
                    .ok_or_else(|| Error::Image(format!("{what}: dense without bias")))?;
                check_len(&what, bias.len(), 4 * cout)?;
                FloatOp::Dense {
                    layer: DenseLayer {
                        in_dim: cin,
                        out_dim: cout,
                        weights: f32s(d.weights(s.blobs)?),
                        bias: f32s(bias),
                    },
                    activation: d.activation(),
                }
            }
            OP_ADD => FloatOp::Add {
                activation: d.activation(),
            },
            OP_RELU => FloatOp::Relu,
            OP_DROPOUT => FloatOp::Dropout {
                rate: d.weight_scale as f64,
            },
            OP_FLATTEN => FloatOp::Flatten,
            op => return Err(Error::Image(format!("{what}: unknown opcode {op}"))),
        };
        nodes.push(FloatNode {
            op,
            inputs: d.inputs(),
            output: d.output as usize,
        });
    }
    let graph = FloatGraph {
        architecture: s.architecture,
        tensors,
        nodes,
        input: s.header.input as usize,
        output: s.header.output as usize,
    };
    graph
        .validate()
        .map_err(|e| Error::Image(format!("inconsistent graph: {e}")))?;
    Ok(graph)
}
