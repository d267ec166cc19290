//! File formats: CFLD1 complex fields, KRN1 kernel banks, CSV kernels,
//! binary PGM images, network descriptions and layer output directories.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmDecoder, PnmSubtype, SampleEncoding};
use image::DynamicImage;
use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{ChannelPolicy, LayerOutput};
use crate::backend::{ActivationKind, FirstLayerMode, LayerSpec, LrnParams, NetworkSpec, Padding};
use crate::correlator::Kernel;
use crate::elements::ElementMask;
use crate::error::{Error, Result};
use crate::field::{ComplexField, GridSpec};

const FIELD_MAGIC: &[u8] = b"CFLD1\n";
const KERNEL_MAGIC: &[u8] = b"KRN1\n";

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Little-endian cursor over an in-memory file.
struct Reader<'a> {
    bytes: &'a [u8],
    format: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::format(self.format, "unexpected end of data"));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn magic(&mut self, magic: &[u8]) -> Result<()> {
        if self.bytes.len() < magic.len() || &self.bytes[..magic.len()] != magic {
            return Err(Error::format(self.format, "bad magic bytes"));
        }
        self.bytes = &self.bytes[magic.len()..];
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(Error::format(
                self.format,
                format!("{} trailing bytes", self.bytes.len()),
            ))
        }
    }
}

pub fn encode_field(grid: &GridSpec, values: &Array2<Complex64>) -> Result<Vec<u8>> {
    if values.dim() != grid.shape() {
        return Err(Error::Shape(format!(
            "{:?} values for a {}x{} grid",
            values.dim(),
            grid.nx,
            grid.ny
        )));
    }
    let nx = u32::try_from(grid.nx).map_err(|_| Error::format("CFLD1", "nx exceeds u32"))?;
    let ny = u32::try_from(grid.ny).map_err(|_| Error::format("CFLD1", "ny exceeds u32"))?;
    let mut out = Vec::with_capacity(FIELD_MAGIC.len() + 24 + 16 * values.len());
    out.extend_from_slice(FIELD_MAGIC);
    out.extend_from_slice(&nx.to_le_bytes());
    out.extend_from_slice(&ny.to_le_bytes());
    out.extend_from_slice(&grid.pitch.to_le_bytes());
    out.extend_from_slice(&grid.wavelength.to_le_bytes());
    for v in values.iter() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_field(bytes: &[u8]) -> Result<ComplexField> {
    let mut r = Reader {
        bytes,
        format: "CFLD1",
    };
    r.magic(FIELD_MAGIC)?;
    let nx = r.u32()? as usize;
    let ny = r.u32()? as usize;
    let pitch = r.f64()?;
    let wavelength = r.f64()?;
    let grid = GridSpec::new(nx, ny, pitch, wavelength)
        .map_err(|e| Error::format("CFLD1", e.to_string()))?;
    let count = nx
        .checked_mul(ny)
        .filter(|n| n.checked_mul(16) == Some(r.bytes.len()))
        .ok_or_else(|| {
            Error::format("CFLD1", format!("payload does not hold {nx}x{ny} samples"))
        })?;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(Complex64::new(r.f64()?, r.f64()?));
    }
    r.finish()?;
    let values = Array2::from_shape_vec((ny, nx), values).expect("length checked");
    ComplexField::new(grid, values).map_err(|e| Error::format("CFLD1", e.to_string()))
}

pub fn write_field(path: impl AsRef<Path>, field: &ComplexField) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_field(field.grid(), field.amplitudes())?;
    let mut w = create(path)?;
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<ComplexField> {
    decode_field(&read_all(path.as_ref())?)
}

/// Store a mask's transmittance; the wavelength slot holds the design
/// wavelength of the mask grid.
pub fn write_mask(path: impl AsRef<Path>, mask: &ElementMask) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_field(mask.grid(), mask.transmittance())?;
    let mut w = create(path)?;
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<ElementMask> {
    let field = read_field(path)?;
    let grid = *field.grid();
    ElementMask::new(grid, field.into_amplitudes())
}

pub fn encode_kernels(kernels: &[Kernel]) -> Result<Vec<u8>> {
    let count =
        u32::try_from(kernels.len()).map_err(|_| Error::format("KRN1", "too many kernels"))?;
    let mut out = Vec::new();
    out.extend_from_slice(KERNEL_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    for k in kernels {
        let (rows, cols) = k.dim();
        out.extend_from_slice(&(rows as u32).to_le_bytes());
        out.extend_from_slice(&(cols as u32).to_le_bytes());
        for w in k.weights().iter() {
            out.extend_from_slice(&w.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_kernels(bytes: &[u8]) -> Result<Vec<Kernel>> {
    let mut r = Reader {
        bytes,
        format: "KRN1",
    };
    r.magic(KERNEL_MAGIC)?;
    let count = r.u32()?;
    let mut kernels = Vec::new();
    for i in 0..count {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let n = rows
            .checked_mul(cols)
            .filter(|n| n.checked_mul(8).is_some_and(|b| b <= r.bytes.len()))
            .ok_or_else(|| {
                Error::format(
                    "KRN1",
                    format!("kernel {i} ({rows}x{cols}) runs past the end"),
                )
            })?;
        let mut w = Vec::with_capacity(n);
        for _ in 0..n {
            w.push(r.f64()?);
        }
        let w = Array2::from_shape_vec((rows, cols), w).expect("length checked");
        kernels
            .push(Kernel::new(w).map_err(|e| Error::format("KRN1", format!("kernel {i}: {e}")))?);
    }
    r.finish()?;
    Ok(kernels)
}

pub fn write_kernels(path: impl AsRef<Path>, kernels: &[Kernel]) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_kernels(kernels)?;
    let mut w = create(path)?;
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_kernels(path: impl AsRef<Path>) -> Result<Vec<Kernel>> {
    decode_kernels(&read_all(path.as_ref())?)
}

/// One kernel from comma-separated rows. Blank lines and lines starting
/// with `#` are ignored.
pub fn parse_kernel_csv(text: &str) -> Result<Kernel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format("CSV kernel", e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    Error::format(
                        "CSV kernel",
                        format!("row {}: cannot parse {v:?}", line + 1),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::format(
            "CSV kernel",
            "rows must be non-empty and of equal length",
        ));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    let w = Array2::from_shape_vec((rows.len(), cols), flat).expect("rectangular");
    Kernel::new(w).map_err(|e| Error::format("CSV kernel", e.to_string()))
}

pub fn read_kernel_csv(path: impl AsRef<Path>) -> Result<Kernel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kernel_csv(&text)
}

/// Kernels from a KRN1 file, or a single kernel from a CSV file
/// (chosen by the `.csv` extension).
pub fn read_kernel_file(path: impl AsRef<Path>) -> Result<Vec<Kernel>> {
    let path = path.as_ref();
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        Ok(vec![read_kernel_csv(path)?])
    } else {
        read_kernels(path)
    }
}

/// Binary graymap (P5) with samples scaled to `[0, 1]` by the maxval.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::format("PGM", format!("{}: {reason}", path.display()));
    let decoder = PnmDecoder::new(BufReader::new(file)).map_err(|e| bad(e.to_string()))?;
    if decoder.subtype() != PnmSubtype::Graymap(SampleEncoding::Binary) {
        return Err(bad("only binary graymaps (P5) are supported".into()));
    }
    let img = DynamicImage::from_decoder(decoder).map_err(|e| bad(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values: Vec<f64> = match img {
        DynamicImage::ImageLuma8(b) => b
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 255.0)
            .collect(),
        DynamicImage::ImageLuma16(b) => b
            .into_raw()
            .into_iter()
            .map(|v| f64::from(v) / 65535.0)
            .collect(),
        _ => return Err(bad("unexpected sample layout".into())),
    };
    Ok(Array2::from_shape_vec((h, w), values).expect("decoder returns w*h samples"))
}

/// Write a 16-bit P5 image scaled so the largest value maps to 65535.
/// Negative values clip to 0. Returns the peak used.
pub fn write_pgm16(path: impl AsRef<Path>, map: &Array2<f64>) -> Result<f64> {
    let path = path.as_ref();
    if map.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "{}: map has non-finite values",
            path.display()
        )));
    }
    let peak = map.iter().fold(0.0f64, |m, &v| m.max(v));
    let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
    let samples: Vec<u16> = map
        .iter()
        .map(|&v| (v * scale).round().clamp(0.0, 65535.0) as u16)
        .collect();
    write_pgm_samples(path, map.dim(), &samples)?;
    Ok(peak)
}

/// Write values in `[0, 1]` as an 8-bit P5 image.
pub fn write_pgm8(path: impl AsRef<Path>, map: &Array2<f64>) -> Result<()> {
    let samples: Vec<u8> = map
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    write_pgm_raw(path.as_ref(), map.dim(), 255, &samples)
}

fn write_pgm_samples(path: &Path, dim: (usize, usize), samples: &[u16]) -> Result<()> {
    let bytes: Vec<u8> = samples.iter().flat_map(|v| v.to_be_bytes()).collect();
    write_pgm_raw(path, dim, 65535, &bytes)
}

fn write_pgm_raw(path: &Path, (h, w): (usize, usize), maxval: u32, data: &[u8]) -> Result<()> {
    let mut out = create(path)?;
    write!(out, "P5\n{w} {h}\n{maxval}\n")
        .and_then(|_| out.write_all(data))
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapEntry {
    pub kernel_index: usize,
    pub file: String,
    /// Value that maps to full scale in the 16-bit file.
    pub peak: f64,
    /// Mask passivity scale per channel.
    pub scale_factors: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerManifest {
    pub channel_policy: ChannelPolicy,
    pub grids: Vec<GridSpec>,
    pub maps: Vec<MapEntry>,
}

/// Write `map_NNN.pgm` per kernel plus `manifest.json` into `dir`.
pub fn write_layer_output(dir: impl AsRef<Path>, output: &LayerOutput) -> Result<LayerManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut maps = Vec::with_capacity(output.maps.len());
    for (j, map) in output.maps.iter().enumerate() {
        let file = format!("map_{j:03}.pgm");
        let peak = write_pgm16(dir.join(&file), map)?;
        maps.push(MapEntry {
            kernel_index: j,
            file,
            peak,
            scale_factors: output.scale_factors[j].clone(),
        });
    }
    let manifest = LayerManifest {
        channel_policy: output.channel_policy,
        grids: output.grids.clone(),
        maps,
    };
    write_json(dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// On-disk form of a network layer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LayerDoc {
    Conv {
        /// KRN1 (or single-kernel CSV) file, relative to the document.
        #[serde(default)]
        kernels_file: Option<PathBuf>,
        /// Inline weights `[out][in][row][col]`.
        #[serde(default)]
        kernels: Option<Vec<Vec<Vec<Vec<f64>>>>>,
        /// Input channels; needed to split a kernel file into `[out][in]`.
        #[serde(default)]
        in_channels: Option<usize>,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        padding: Padding,
        #[serde(default)]
        biases: Option<Vec<f64>>,
    },
    Activation {
        function: ActivationKind,
    },
    Maxpool {
        window: usize,
        stride: usize,
    },
    Lrn {
        #[serde(default = "lrn_radius")]
        depth_radius: usize,
        #[serde(default = "lrn_k")]
        k_const: f64,
        #[serde(default = "lrn_alpha")]
        alpha_const: f64,
        #[serde(default = "lrn_beta")]
        beta_const: f64,
    },
    Bias {
        values: Vec<f64>,
    },
}

fn one() -> usize {
    1
}

fn lrn_radius() -> usize {
    LrnParams::default().depth_radius
}

fn lrn_k() -> f64 {
    LrnParams::default().k_const
}

fn lrn_alpha() -> f64 {
    LrnParams::default().alpha_const
}

fn lrn_beta() -> f64 {
    LrnParams::default().beta_const
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    #[serde(default)]
    pub first_layer_mode: FirstLayerMode,
    #[serde(default)]
    pub channel_policy: ChannelPolicy,
    #[serde(default = "yes")]
    pub normalize_first_layer: bool,
    pub layers: Vec<LayerDoc>,
}

impl LayerDoc {
    fn resolve(&self, base: &Path) -> Result<LayerSpec> {
        Ok(match self {
            LayerDoc::Conv {
                kernels_file,
                kernels,
                in_channels,
                stride,
                padding,
                biases,
            } => {
                let kernels = match (kernels_file, kernels) {
                    (Some(file), None) => {
                        let flat = read_kernel_file(base.join(file))?;
                        let n_in = in_channels.unwrap_or(1);
                        if n_in == 0 || flat.is_empty() || flat.len() % n_in != 0 {
                            return Err(Error::Config(format!(
                                "{} kernels cannot be split into groups of {n_in} input channels",
                                flat.len()
                            )));
                        }
                        flat.chunks(n_in).map(<[Kernel]>::to_vec).collect()
                    }
                    (None, Some(inline)) => inline
                        .iter()
                        .map(|per_out| {
                            per_out
                                .iter()
                                .map(|rows| {
                                    let refs: Vec<&[f64]> =
                                        rows.iter().map(Vec::as_slice).collect();
                                    Kernel::from_rows(&refs)
                                        .map_err(|e| Error::Config(e.to_string()))
                                })
                                .collect::<Result<Vec<_>>>()
                        })
                        .collect::<Result<Vec<_>>>()?,
                    _ => {
                        return Err(Error::Config(
                            "conv layer needs exactly one of kernels_file and kernels".into(),
                        ))
                    }
                };
                LayerSpec::Conv {
                    kernels,
                    stride: *stride,
                    padding: *padding,
                    biases: biases.clone(),
                }
            }
            LayerDoc::Activation { function } => LayerSpec::Activation(*function),
            LayerDoc::Maxpool { window, stride } => LayerSpec::MaxPool {
                window: *window,
                stride: *stride,
            },
            LayerDoc::Lrn {
                depth_radius,
                k_const,
                alpha_const,
                beta_const,
            } => LayerSpec::Lrn(LrnParams {
                depth_radius: *depth_radius,
                k_const: *k_const,
                alpha_const: *alpha_const,
                beta_const: *beta_const,
            }),
            LayerDoc::Bias { values } => LayerSpec::Bias(values.clone()),
        })
    }
}

impl NetworkDoc {
    /// Build the network, loading kernel files relative to `base`.
    pub fn resolve(&self, base: &Path) -> Result<NetworkSpec> {
        let layers = self
            .layers
            .iter()
            .map(|l| l.resolve(base))
            .collect::<Result<Vec<_>>>()?;
        Ok(NetworkSpec {
            layers,
            first_layer_mode: self.first_layer_mode,
            channel_policy: self.channel_policy,
            normalize_first_layer: self.normalize_first_layer,
        })
    }
}

/// Load and validate a network description.
pub fn read_network(path: impl AsRef<Path>) -> Result<NetworkSpec> {
    let path = path.as_ref();
    let doc: NetworkDoc = read_json(path)?;
    let net = doc.resolve(path.parent().unwrap_or(Path::new(".")))?;
    net.validate()?;
    Ok(net)
}
