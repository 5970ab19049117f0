mod common;

use std::path::PathBuf;

use common::{remnet_pipeline, toy_model, uniform_inputs};
use remnet_core::engine::{
    deserialize, deserialize_float, emit_embedded_source, plan_memory, read_header, serialize,
    serialize_float, Engine, ImageKind, MemoryPlan,
};
use remnet_core::quant::{
    Architecture, FixedPointMultiplier, QConv, QNode, QOp, QTensor, QuantParams, QuantizedModel, Shape,
};

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

/// Compares against a checked-in file; `UPDATE_GOLDEN=1` rewrites it.
fn check_golden(name: &str, actual: &[u8]) {
    let path = golden(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{name} differs from the golden file");
}

/// Independent reader for the emitted C array.
fn parse_c_array(src: &str) -> Vec<u8> {
    let body = &src[src.find('{').unwrap() + 1..src.find("};").unwrap()];
    body.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| u8::from_str_radix(t.trim_start_matches("0x"), 16).unwrap())
        .collect()
}

fn parse_c_len(src: &str) -> usize {
    let line = src.lines().find(|l| l.contains("_len =")).unwrap();
    let v = line
        .split('=')
        .nth(1)
        .unwrap()
        .trim()
        .trim_end_matches(';')
        .trim_end_matches('u');
    v.parse().unwrap()
}

#[test]
fn toy_image_golden() {
    let image = serialize(&toy_model()).unwrap();
    check_golden("toy_int8.bin", &image);
    let src = emit_embedded_source(&image, "toy_model").unwrap();
    check_golden("toy_int8.c", src.as_bytes());
}

#[test]
fn toy_header_fields() {
    let image = serialize(&toy_model()).unwrap();
    assert_eq!(&image[..4], b"RMNI");
    let h = read_header(&image).unwrap();
    assert_eq!(h.version, 1);
    assert_eq!(h.kind, ImageKind::Int8);
    assert_eq!((h.tensor_count, h.node_count, h.input, h.output), (3, 2, 0, 2));
    assert_eq!(image.len() % 4, 0);
    assert_eq!(image.len(), 32 + h.payload_bytes as usize + 4);
}

#[test]
fn round_trip_is_a_fixpoint() {
    let p = remnet_pipeline(64, 1);
    let bytes = serialize(&p.quantized).unwrap();
    let back = deserialize(&bytes).unwrap();
    assert_eq!(back, p.quantized);
    assert_eq!(serialize(&back).unwrap(), bytes);

    for g in [&p.reference, &p.optimized] {
        let fb = serialize_float(g).unwrap();
        assert_eq!(serialize_float(&deserialize_float(&fb).unwrap()).unwrap(), fb);
    }
}

#[test]
fn round_trip_inference_identical() {
    let p = remnet_pipeline(157, 2);
    let back = deserialize(&serialize(&p.quantized).unwrap()).unwrap();
    for x in uniform_inputs(50, 157, 3) {
        let q = p.quantized.quantize_input(&x).unwrap();
        assert_eq!(
            p.quantized.int_forward(&q).unwrap(),
            back.int_forward(&q).unwrap()
        );
    }
}

#[test]
fn corrupted_images_rejected() {
    let image = serialize(&toy_model()).unwrap();
    for pos in [40, image.len() / 2, image.len() - 5] {
        let mut bad = image.clone();
        bad[pos] ^= 0x01;
        let err = deserialize(&bad).unwrap_err().to_string();
        assert!(err.contains("checksum"), "{err}");
    }
    let mut bad = image.clone();
    bad[0] = b'X';
    assert!(deserialize(&bad).unwrap_err().to_string().contains("magic"));
    let mut bad = image.clone();
    bad[4] = 9;
    assert!(deserialize(&bad).unwrap_err().to_string().contains("version"));
    assert!(deserialize(&image[..image.len() - 1]).is_err());
    assert!(deserialize(&image[..10]).is_err());
}

#[test]
fn wrong_kind_rejected() {
    let p = remnet_pipeline(16, 4);
    assert!(deserialize(&serialize_float(&p.optimized).unwrap()).is_err());
    assert!(deserialize_float(&serialize(&p.quantized).unwrap()).is_err());
}

#[test]
fn size_ordering_and_caps() {
    for k in [157, 128, 64, 32, 16, 8] {
        let p = remnet_pipeline(k, 5);
        let float = serialize_float(&p.reference).unwrap().len();
        let opt = serialize_float(&p.optimized).unwrap().len();
        let int8 = serialize(&p.quantized).unwrap().len();
        assert!(int8 < opt && opt < float, "K={k}: {int8} {opt} {float}");
        assert!(int8 as f64 <= 0.35 * float as f64, "K={k}");
        assert!(int8 <= 32 * 1024);
    }
}

#[test]
fn embedded_source_reparses() {
    let p = remnet_pipeline(157, 6);
    let image = serialize(&p.quantized).unwrap();
    let src = emit_embedded_source(&image, "remnet_k157").unwrap();
    assert_eq!(parse_c_array(&src), image);
    assert_eq!(parse_c_len(&src), image.len());
    assert!(src.contains("remnet_k157_data[]"));
    assert_eq!(src, emit_embedded_source(&image, "remnet_k157").unwrap());
    assert!(emit_embedded_source(&image, "9lives").is_err());
}

/// Every pair of tensors live at the same step must occupy disjoint bytes.
fn assert_no_interference(plan: &MemoryPlan) {
    for step in 0..plan.steps() {
        let live: Vec<usize> = plan.live_at(step).collect();
        for (i, &a) in live.iter().enumerate() {
            assert!(plan.range(a).end <= plan.arena_bytes);
            for &b in &live[i + 1..] {
                let (ra, rb) = (plan.range(a), plan.range(b));
                assert!(
                    ra.end <= rb.start || rb.end <= ra.start,
                    "step {step}: tensors {a} and {b} overlap"
                );
            }
        }
    }
}

fn conv_chain(len: usize, layers: usize) -> QuantizedModel {
    let qp = QuantParams {
        scale: 0.05,
        zero_point: 0,
    };
    let tensors = (0..=layers)
        .map(|_| QTensor {
            shape: Shape::new(len, 4),
            qparams: qp,
        })
        .collect();
    let nodes = (0..layers)
        .map(|i| QNode {
            op: QOp::Conv(QConv {
                kernel_size: 3,
                in_channels: 4,
                out_channels: 4,
                stride: 1,
                relu: true,
                weights: vec![1; 48],
                weight_scale: 0.01,
                bias: None,
                multiplier: FixedPointMultiplier::from_real(0.05f32 as f64 * 0.01f32 as f64 / 0.05f32 as f64)
                    .unwrap(),
            }),
            inputs: vec![i],
            output: i + 1,
        })
        .collect();
    QuantizedModel {
        architecture: Architecture::Custom,
        tensors,
        nodes,
        input: 0,
        output: layers,
    }
}

#[test]
fn plan_single_layer() {
    let m = conv_chain(10, 1);
    m.validate().unwrap();
    let plan = plan_memory(&m);
    assert_eq!(plan.arena_bytes, 40 + 40);
    assert_no_interference(&plan);
}

#[test]
fn plan_chain_ping_pongs() {
    let plan = plan_memory(&conv_chain(10, 6));
    assert_eq!(plan.arena_bytes, 2 * 40);
    assert_no_interference(&plan);
}

#[test]
fn plan_remnet() {
    let p = remnet_pipeline(157, 7);
    let plan = plan_memory(&p.quantized);
    assert_no_interference(&plan);
    assert!(plan.arena_bytes >= plan.peak_live_bytes());
    assert!(plan.arena_bytes >= *plan.sizes.iter().max().unwrap());
    assert!(plan.max_live_tensors() <= 3);
    assert!(plan.arena_bytes < 16 * 1024);
}

#[test]
fn engine_matches_int_forward() {
    let p = remnet_pipeline(157, 8);
    let mut engine = Engine::new(p.quantized.clone()).unwrap();
    for x in uniform_inputs(30, 157, 9) {
        let q = p.quantized.quantize_input(&x).unwrap();
        let (expected, deq) = p.quantized.int_forward(&q).unwrap();
        assert_eq!(engine.run(&q).unwrap(), expected.as_slice());
        assert_eq!(engine.predict(&x).unwrap(), deq[0]);
    }
    assert!(engine.run(&[0; 3]).is_err());
}

#[test]
fn engine_from_image() {
    let m = toy_model();
    let mut engine = Engine::from_image(&serialize(&m).unwrap()).unwrap();
    let x = [-128i8, -3, 0, 77, 127];
    assert_eq!(engine.run(&x).unwrap(), m.int_forward(&x).unwrap().0.as_slice());
}

mod embed {
    use remnet_core::engine::*;

    #[test]
    fn prefixes() {
        for ok in ["model", "_m", "remnet_157", "A1"] {
            validate_symbol_prefix(ok).unwrap();
        }
        for bad in ["", "1abc", "a-b", "int", "a b", "ümlaut"] {
            assert!(validate_symbol_prefix(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn small_image() {
        let src = emit_embedded_source(&[0, 1, 0xab, 0xff], "m").unwrap();
        assert!(src.contains("const unsigned char m_data[] = {\n    0x00, 0x01, 0xab, 0xff,\n};"));
        assert!(src.contains("const size_t m_len = 4u;"));
    }

    #[test]
    fn deterministic() {
        let img: Vec<u8> = (0..100u8).collect();
        assert_eq!(
            emit_embedded_source(&img, "x").unwrap(),
            emit_embedded_source(&img, "x").unwrap()
        );
    }
}

mod perf {
    use remnet_core::engine::*;

    #[test]
    fn energy_table_values() {
        let e = energy_per_inference(53.4, 17.2).unwrap();
        assert_eq!((e * 10.0).round() / 10.0, 3.1);
        let e = energy_per_inference(51.6, 140.0).unwrap();
        assert_eq!((e * 100.0).round() / 100.0, 0.37);
    }

    #[test]
    fn energy_scale_invariant() {
        let a = energy_per_inference(40.0, 25.0).unwrap();
        let b = energy_per_inference(80.0, 50.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn energy_rejects_nonpositive() {
        assert!(energy_per_inference(0.0, 1.0).is_err());
        assert!(energy_per_inference(1.0, -1.0).is_err());
        assert!(energy_per_inference(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn power_from_supply() {
        assert!((power_mw(3.3, 16.2).unwrap() - 53.46).abs() < 1e-9);
        assert!(power_mw(0.0, 1.0).is_err());
    }

    #[test]
    fn stats_reciprocal_of_max() {
        let s = LatencyStats::from_durations_ms(&[1.0, 4.0, 2.0]).unwrap();
        assert_eq!(s.max_ms, 4.0);
        assert_eq!(s.f_m_hz * s.max_ms / 1000.0, 1.0);
        assert!((s.mean_ms - 7.0 / 3.0).abs() < 1e-12);
    }
}
