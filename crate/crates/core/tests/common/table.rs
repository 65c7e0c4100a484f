//! The super-resolution network's layer table, transcribed symbolically, and
//! a comparison against the recorded forward trace.

use std::cell::Cell;

use hlfsr_core::networks::{HlfssrNet, NetworkConfig, RowKind, TraceRow};

/// One table row. Shapes are comma-separated symbolic dims over `b`, `h`,
/// `w`, `a` and `n = a^2`; the kernel is `kh,kw,c_in,c_out`.
pub struct Row {
    pub label: &'static str,
    pub inputs: &'static [&'static str],
    pub kernel: Option<&'static str>,
    pub output: &'static str,
}

const fn r(
    label: &'static str,
    inputs: &'static [&'static str],
    kernel: Option<&'static str>,
    output: &'static str,
) -> Row {
    Row {
        label,
        inputs,
        kernel,
        output,
    }
}

const LRELU: &str = "LeakyReLU";
const HR_MACPI: &str = "b,64,2ah,2aw";

/// The 2D branch with its first Distg-Block expanded, then the 4D branch and
/// the hybrid fusion. Groups and later blocks appear as single rows. Rows
/// with an empty input list only carry an output shape.
pub const TABLE: &[Row] = &[
    // 2D branch
    r("Conv2d", &["b,1,2h,2w"], Some("3,3,1,n"), "b,n,2h,2w"),
    r(LRELU, &[], None, "b,n,2h,2w"),
    r("LF2MacPI", &["b,n,2h,2w"], None, "b,1,2ah,2aw"),
    r("Conv2d", &["b,1,2ah,2aw"], Some("3,3,1,64"), HR_MACPI),
    // SFE
    r("Conv2d", &[HR_MACPI], Some("3,3,64,64"), HR_MACPI),
    r(LRELU, &[], None, HR_MACPI),
    r("Conv2d", &[HR_MACPI], Some("3,3,64,64"), HR_MACPI),
    r(LRELU, &[], None, HR_MACPI),
    // AFE
    r("Conv2d", &[HR_MACPI], Some("a,a,64,16"), "b,16,2h,2w"),
    r(LRELU, &[], None, "b,16,2h,2w"),
    r("Conv2d", &["b,16,2h,2w"], Some("1,1,16,16a^2"), "b,16a^2,2h,2w"),
    r(LRELU, &[], None, "b,16a^2,2h,2w"),
    r("PixelShuffle", &["b,16a^2,2h,2w"], None, "b,16,2ah,2aw"),
    // EFE-H
    r("Conv2d", &[HR_MACPI], Some("1,a^2,64,32"), "b,32,2ah,2w"),
    r(LRELU, &[], None, "b,32,2ah,2w"),
    r("Conv2d", &["b,32,2ah,2w"], Some("1,1,32,32a"), "b,32a,2ah,2w"),
    r(LRELU, &[], None, "b,32a,2ah,2w"),
    r("PixelShuffle1D", &["b,32a,2ah,2w"], None, "b,32,2ah,2aw"),
    r("EFE-V", &[HR_MACPI], None, "b,32,2ah,2aw"),
    r(
        "Cat",
        &[HR_MACPI, "b,16,2ah,2aw", "b,32,2ah,2aw", "b,32,2ah,2aw"],
        None,
        "b,144,2ah,2aw",
    ),
    // Fusion of the four extractors
    r("Conv2d", &["b,144,2ah,2aw"], Some("1,1,144,64"), HR_MACPI),
    r(LRELU, &[], None, HR_MACPI),
    r("Conv2d", &[HR_MACPI], Some("3,3,64,64"), HR_MACPI),
    r("Distg-Block", &[HR_MACPI], None, HR_MACPI),
    r("Distg-Block", &[HR_MACPI], None, HR_MACPI),
    r("Distg-Block", &[HR_MACPI], None, HR_MACPI),
    r("Conv2d", &[HR_MACPI], Some("3,3,64,1"), "b,1,2ah,2aw"),
    // 4D branch
    r("Conv2d", &["b,1,ah,aw"], Some("3,3,1,64"), "b,64,ah,aw"),
    r("Distg-Group", &["b,64,ah,aw"], None, "b,64,ah,aw"),
    r("Distg-Group", &["b,64,ah,aw"], None, "b,64,ah,aw"),
    r("Distg-Group", &["b,64,ah,aw"], None, "b,64,ah,aw"),
    r("Distg-Group", &["b,64,ah,aw"], None, "b,64,ah,aw"),
    r("Conv2d", &["b,64,ah,aw"], Some("1,1,64,256"), "b,256,ah,aw"),
    r("PixelShuffle", &["b,256,ah,aw"], None, HR_MACPI),
    r("Conv2d", &[HR_MACPI], Some("1,1,64,1"), "b,1,2ah,2aw"),
    // Hybrid features fusion
    r("Cat", &["b,1,2ah,2aw", "b,1,2ah,2aw"], None, "b,2,2ah,2aw"),
    r("Conv2d", &["b,2,2ah,2aw"], Some("3,3,2,64"), HR_MACPI),
    r("Distg-Group", &[HR_MACPI], None, HR_MACPI),
    r("Conv2d", &[HR_MACPI], Some("3,3,64,16"), "b,16,2ah,2aw"),
    r(LRELU, &[], None, "b,16,2ah,2aw"),
    r("Conv2d", &["b,16,2ah,2aw"], Some("3,3,16,1"), "b,1,2ah,2aw"),
];

/// Evaluates a symbolic dim such as `2ah`, `16a^2` or `n`.
pub fn dim(token: &str, b: usize, h: usize, w: usize, a: usize) -> usize {
    let digits: String = token.chars().take_while(char::is_ascii_digit).collect();
    let mut value = if digits.is_empty() { 1 } else { digits.parse().unwrap() };
    let mut rest = token[digits.len()..].chars().peekable();
    while let Some(c) = rest.next() {
        let v = match c {
            'b' => b,
            'h' => h,
            'w' => w,
            'a' => a,
            'n' => a * a,
            _ => panic!("unknown symbol {c:?} in {token:?}"),
        };
        let mut power = 1;
        if rest.peek() == Some(&'^') {
            rest.next();
            power = rest.next().and_then(|p| p.to_digit(10)).expect("digit after ^");
        }
        value *= v.pow(power);
    }
    value
}

fn shape(spec: &str, b: usize, h: usize, w: usize, a: usize) -> Vec<usize> {
    spec.split(',').map(|t| dim(t.trim(), b, h, w, a)).collect()
}

/// Projects the trace of a network with angular extent `a` and 64 channels
/// to the table's level of detail.
pub fn projected_trace(a: usize, b: usize, h: usize, w: usize) -> Vec<TraceRow> {
    let cfg = NetworkConfig {
        angular: a,
        channels: 64,
        ..NetworkConfig::default()
    };
    let net = HlfssrNet::<f32>::new(&cfg, 0).unwrap();
    let trace = net.trace(b, h, w).unwrap();
    let first_2d_block = Cell::new(true);
    let rows = trace.project(|row| {
        let in_2d = row.parents.first().map(String::as_str) == Some("2D Branch");
        match row.label.as_str() {
            "2D Branch" | "4D Branch" | "Hybrid Features Fusion" => true,
            "Spatial-Conv" | "Up-sampling" | "Fusion-Conv" => true,
            "SFE" | "AFE" | "EFE-H" | "Fusion" => true,
            "Distg-Group" => in_2d,
            "Distg-Block" if in_2d => first_2d_block.replace(false),
            _ => false,
        }
    });
    // Layout changes, residual additions and the bicubic skip are not rows of
    // the table.
    rows.into_iter()
        .filter(|r| !matches!(r.kind, RowKind::Rearrange | RowKind::Add | RowKind::Resample))
        .collect()
}

/// Compares the projected trace against the table row by row.
pub fn compare(a: usize, b: usize, h: usize, w: usize) -> Result<usize, String> {
    let rows = projected_trace(a, b, h, w);
    if rows.len() != TABLE.len() {
        let labels: Vec<&str> = rows.iter().map(|r| r.label.as_str()).collect();
        return Err(format!(
            "{} trace rows vs {} table rows: {labels:?}",
            rows.len(),
            TABLE.len()
        ));
    }
    for (i, (got, want)) in rows.iter().zip(TABLE).enumerate() {
        let fail = |what: &str| Err(format!("row {i} ({}): {what}: {got:?}", want.label));
        if got.label != want.label {
            return fail("label");
        }
        if got.output != shape(want.output, b, h, w, a) {
            return fail("output shape");
        }
        if want.inputs.is_empty() {
            // Elementwise rows keep their input shape.
            if got.inputs.len() != 1 || got.inputs[0] != got.output {
                return fail("elementwise input");
            }
        } else {
            let inputs: Vec<Vec<usize>> = want.inputs.iter().map(|s| shape(s, b, h, w, a)).collect();
            if got.inputs != inputs {
                return fail("input shapes");
            }
        }
        let kernel = want.kernel.map(|k| {
            let v = shape(k, b, h, w, a);
            [v[0], v[1], v[2], v[3]]
        });
        if got.kernel != kernel {
            return fail("kernel");
        }
    }
    Ok(rows.len())
}
