//! Feedforward policy: depthwise + pointwise convolution over the ray axis,
//! a small perceptron, a linear output, and a tanh squash to one action
//! scalar in (-1, 1).

use crate::arena::WallId;
use crate::error::CoreError;
use crate::vision::VisualFrame;
use serde::{Deserialize, Serialize};

pub const IN_CHANNELS: usize = WallId::COUNT;

/// Architecture descriptor; parameter counts and the flat packing order are
/// pure functions of this.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    /// Input width: number of rays.
    pub upsilon: usize,
    /// Input channels: the four wall columns.
    pub in_channels: usize,
    /// Depthwise kernel width (odd, same-padded).
    pub kernel: usize,
    /// Channels after the pointwise mix.
    pub conv_out: usize,
    /// Hidden perceptron widths; empty for a direct linear readout.
    pub mlp: Vec<usize>,
}

impl ArchSpec {
    pub fn with_defaults(upsilon: usize) -> Self {
        ArchSpec {
            upsilon,
            in_channels: IN_CHANNELS,
            kernel: 3,
            conv_out: 4,
            mlp: vec![2],
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.upsilon < 2 {
            return Err(CoreError::InvalidArch(format!(
                "need at least 2 rays, got {}",
                self.upsilon
            )));
        }
        if self.in_channels != IN_CHANNELS {
            return Err(CoreError::InvalidArch(format!(
                "input channels fixed at {IN_CHANNELS} wall columns, got {}",
                self.in_channels
            )));
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return Err(CoreError::InvalidArch(format!(
                "kernel width must be odd, got {}",
                self.kernel
            )));
        }
        // Two channel outputs are insufficient for the task; treat the
        // minimum of three as structural.
        if self.conv_out < 3 {
            return Err(CoreError::InvalidArch(format!(
                "need at least 3 conv output channels, got {}",
                self.conv_out
            )));
        }
        if self.mlp.iter().any(|&w| w == 0) {
            return Err(CoreError::InvalidArch("zero-width perceptron layer".into()));
        }
        Ok(())
    }

    /// Total number of parameters, biases included.
    pub fn param_count(&self) -> usize {
        let depthwise = self.in_channels * self.kernel + self.in_channels;
        let pointwise = self.in_channels * self.conv_out + self.conv_out;
        let mut dense = 0;
        let mut width = self.upsilon * self.conv_out;
        for &w in &self.mlp {
            dense += width * w + w;
            width = w;
        }
        dense += width + 1; // linear scalar output
        depthwise + pointwise + dense
    }
}

/// Structured view of the parameters, produced by [`PolicyGenome::unpack`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyWeights {
    /// `[channel][tap]` depthwise kernels.
    pub depthwise_w: Vec<Vec<f64>>,
    pub depthwise_b: Vec<f64>,
    /// `[out_channel][in_channel]` pointwise mix.
    pub pointwise_w: Vec<Vec<f64>>,
    pub pointwise_b: Vec<f64>,
    /// Dense layers in order, `(weights[out][in], biases[out])`; the last
    /// entry is the scalar output layer.
    pub dense: Vec<(Vec<Vec<f64>>, Vec<f64>)>,
}

/// Flat parameter vector plus its architecture.
///
/// Packing order (stable across versions): depthwise kernels channel-major,
/// depthwise biases, pointwise weights out-channel-major, pointwise biases,
/// then each dense layer as row-major weights followed by biases.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGenome {
    arch: ArchSpec,
    params: Vec<f64>,
}

impl PolicyGenome {
    pub fn zeros(arch: ArchSpec) -> Result<Self, CoreError> {
        arch.validate()?;
        let n = arch.param_count();
        Ok(PolicyGenome {
            arch,
            params: vec![0.0; n],
        })
    }

    pub fn from_params(arch: ArchSpec, params: Vec<f64>) -> Result<Self, CoreError> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(CoreError::ParamLength {
                got: params.len(),
                want: arch.param_count(),
            });
        }
        Ok(PolicyGenome { arch, params })
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Splits the flat vector into structured weights.
    pub fn unpack(&self) -> PolicyWeights {
        let a = &self.arch;
        let mut cursor = self.params.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { cursor.by_ref().take(n).collect() };

        let depthwise_w = (0..a.in_channels).map(|_| take(a.kernel)).collect();
        let depthwise_b = take(a.in_channels);
        let pointwise_w = (0..a.conv_out).map(|_| take(a.in_channels)).collect();
        let pointwise_b = take(a.conv_out);

        let mut dense = Vec::new();
        let mut width = a.upsilon * a.conv_out;
        for &w in a.mlp.iter().chain(std::iter::once(&1)) {
            let weights = (0..w).map(|_| take(width)).collect();
            let biases = take(w);
            dense.push((weights, biases));
            width = w;
        }
        PolicyWeights {
            depthwise_w,
            depthwise_b,
            pointwise_w,
            pointwise_b,
            dense,
        }
    }

    /// Rebuilds the flat vector from structured weights; inverse of
    /// [`PolicyGenome::unpack`].
    pub fn pack(arch: ArchSpec, weights: &PolicyWeights) -> Result<Self, CoreError> {
        let mut params = Vec::with_capacity(arch.param_count());
        for row in &weights.depthwise_w {
            params.extend_from_slice(row);
        }
        params.extend_from_slice(&weights.depthwise_b);
        for row in &weights.pointwise_w {
            params.extend_from_slice(row);
        }
        params.extend_from_slice(&weights.pointwise_b);
        for (w, b) in &weights.dense {
            for row in w {
                params.extend_from_slice(row);
            }
            params.extend_from_slice(b);
        }
        PolicyGenome::from_params(arch, params)
    }

    /// Runs the perception-to-action pipeline on one frame.
    pub fn forward(&self, frame: &VisualFrame) -> Result<f64, CoreError> {
        let mut scratch = PolicyScratch::new(&self.arch);
        self.forward_with(frame, &mut scratch)
    }

    /// Forward pass with caller-owned scratch buffers for hot loops.
    pub fn forward_with(
        &self,
        frame: &VisualFrame,
        scratch: &mut PolicyScratch,
    ) -> Result<f64, CoreError> {
        let a = &self.arch;
        if frame.upsilon != a.upsilon {
            return Err(CoreError::ShapeMismatch {
                got: frame.upsilon,
                want: a.upsilon,
            });
        }
        let u = a.upsilon;
        let half = (a.kernel / 2) as isize;
        let p = &self.params;
        let values = frame.values();

        let dw_w = 0;
        let dw_b = dw_w + a.in_channels * a.kernel;
        let pw_w = dw_b + a.in_channels;
        let pw_b = pw_w + a.in_channels * a.conv_out;
        let dense0 = pw_b + a.conv_out;

        // Depthwise: one kernel per wall channel, zero same-padding.
        scratch.depthwise.resize(a.in_channels * u, 0.0);
        for c in 0..a.in_channels {
            let kernel = &p[dw_w + c * a.kernel..dw_w + (c + 1) * a.kernel];
            let bias = p[dw_b + c];
            for i in 0..u {
                let mut acc = bias;
                for (k, &w) in kernel.iter().enumerate() {
                    let j = i as isize + k as isize - half;
                    if (0..u as isize).contains(&j) {
                        acc += w * values[j as usize * IN_CHANNELS + c];
                    }
                }
                scratch.depthwise[c * u + i] = acc;
            }
        }

        // Pointwise channel mix, then the CNN's rectifier.
        scratch.flat.resize(a.conv_out * u, 0.0);
        for o in 0..a.conv_out {
            let row = &p[pw_w + o * a.in_channels..pw_w + (o + 1) * a.in_channels];
            let bias = p[pw_b + o];
            for i in 0..u {
                let mut acc = bias;
                for (c, &w) in row.iter().enumerate() {
                    acc += w * scratch.depthwise[c * u + i];
                }
                scratch.flat[o * u + i] = acc.max(0.0);
            }
        }

        // Perceptron layers with rectifiers, then the linear scalar readout.
        let mut offset = dense0;
        let mut width = a.conv_out * u;
        std::mem::swap(&mut scratch.layer_in, &mut scratch.flat);
        for &w_out in &a.mlp {
            scratch.layer_out.resize(w_out, 0.0);
            for o in 0..w_out {
                let row = &p[offset + o * width..offset + (o + 1) * width];
                let mut acc = p[offset + w_out * width + o];
                for (j, &w) in row.iter().enumerate() {
                    acc += w * scratch.layer_in[j];
                }
                scratch.layer_out[o] = acc.max(0.0);
            }
            offset += w_out * width + w_out;
            width = w_out;
            std::mem::swap(&mut scratch.layer_in, &mut scratch.layer_out);
        }
        let mut out = p[offset + width];
        for j in 0..width {
            out += p[offset + j] * scratch.layer_in[j];
        }
        // f64 tanh saturates to exactly +/-1 for |x| > ~19; keep the action
        // strictly inside the open interval.
        Ok(out.tanh().clamp((-1.0f64).next_up(), 1.0f64.next_down()))
    }

    /// Conv-stack activations before flattening, `[out_channel][position]`.
    /// Exposed for the equivariance checks.
    pub fn conv_activations(&self, frame: &VisualFrame) -> Result<Vec<Vec<f64>>, CoreError> {
        let a = &self.arch;
        if frame.upsilon != a.upsilon {
            return Err(CoreError::ShapeMismatch {
                got: frame.upsilon,
                want: a.upsilon,
            });
        }
        let w = self.unpack();
        let u = a.upsilon;
        let half = (a.kernel / 2) as isize;
        let mut depthwise = vec![vec![0.0; u]; a.in_channels];
        for c in 0..a.in_channels {
            for i in 0..u {
                let mut acc = w.depthwise_b[c];
                for (k, &wk) in w.depthwise_w[c].iter().enumerate() {
                    let j = i as isize + k as isize - half;
                    if (0..u as isize).contains(&j) {
                        acc += wk * frame.value(j as usize, c);
                    }
                }
                depthwise[c][i] = acc;
            }
        }
        let mut out = vec![vec![0.0; u]; a.conv_out];
        for o in 0..a.conv_out {
            for i in 0..u {
                let mut acc = w.pointwise_b[o];
                for c in 0..a.in_channels {
                    acc += w.pointwise_w[o][c] * depthwise[c][i];
                }
                out[o][i] = acc.max(0.0);
            }
        }
        Ok(out)
    }
}

/// Reusable buffers for [`PolicyGenome::forward_with`].
#[derive(Debug, Default, Clone)]
pub struct PolicyScratch {
    depthwise: Vec<f64>,
    flat: Vec<f64>,
    layer_in: Vec<f64>,
    layer_out: Vec<f64>,
}

impl PolicyScratch {
    pub fn new(arch: &ArchSpec) -> Self {
        PolicyScratch {
            depthwise: Vec::with_capacity(arch.in_channels * arch.upsilon),
            flat: Vec::with_capacity(arch.conv_out * arch.upsilon),
            layer_in: Vec::new(),
            layer_out: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{ArenaSpec, WallId};
    use crate::vision::{cast_rays, encode_frame, EncodingCalibration};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame_from(rows: Vec<(usize, WallId, f64)>, upsilon: usize) -> VisualFrame {
        let mut values = vec![0.0; upsilon * 4];
        for (ray, wall, v) in rows {
            values[ray * 4 + wall.column()] = v;
        }
        VisualFrame::new(values, upsilon, 0.4, 0.0).unwrap()
    }

    fn random_genome(arch: &ArchSpec, seed: u64) -> PolicyGenome {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = (0..arch.param_count())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        PolicyGenome::from_params(arch.clone(), params).unwrap()
    }

    fn random_frame(arena: &ArenaSpec, upsilon: usize, seed: u64) -> VisualFrame {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = crate::arena::random_init(&mut rng, arena);
        let cal = EncodingCalibration::for_arena(1.0, arena).unwrap();
        let hits = cast_rays(&state, arena, 0.4, upsilon).unwrap();
        encode_frame(&hits, &cal)
    }

    #[test]
    fn param_count_matches_layer_arithmetic() {
        let arch = ArchSpec::with_defaults(8);
        // depthwise 4*3+4, pointwise 4*4+4, dense (32*2+2) + (2*1+1)
        assert_eq!(arch.param_count(), 16 + 20 + 66 + 3);
        assert_eq!(arch.param_count(), 105);
        assert!(arch.param_count() < 300);

        let no_hidden = ArchSpec {
            mlp: vec![],
            ..ArchSpec::with_defaults(8)
        };
        assert_eq!(no_hidden.param_count(), 16 + 20 + 33);

        // Doubling the rays only doubles the flatten-to-dense weight term.
        let wide = ArchSpec::with_defaults(16);
        assert_eq!(
            wide.param_count() - arch.param_count(),
            (16 - 8) * 4 * 2 // extra flat inputs times hidden width
        );
    }

    #[test]
    fn arch_validation_rejects_degenerate_shapes() {
        let mut arch = ArchSpec::with_defaults(8);
        arch.conv_out = 2;
        assert!(arch.validate().is_err());
        let mut arch = ArchSpec::with_defaults(8);
        arch.kernel = 4;
        assert!(arch.validate().is_err());
        let mut arch = ArchSpec::with_defaults(8);
        arch.in_channels = 3;
        assert!(arch.validate().is_err());
    }

    #[test]
    fn zero_genome_outputs_zero() {
        let arch = ArchSpec::with_defaults(8);
        let genome = PolicyGenome::zeros(arch).unwrap();
        let frame = frame_from(
            (0..8).map(|i| (i, WallId::East, 1.0)).collect(),
            8,
        );
        assert_eq!(genome.forward(&frame).unwrap(), 0.0);
    }

    #[test]
    fn output_bias_alone_yields_tanh_bias() {
        let arch = ArchSpec::with_defaults(8);
        let mut params = vec![0.0; arch.param_count()];
        let n = params.len();
        params[n - 1] = 0.7; // scalar output bias is packed last
        let genome = PolicyGenome::from_params(arch, params).unwrap();
        let frame = frame_from((0..8).map(|i| (i, WallId::North, 1.0)).collect(), 8);
        assert_eq!(genome.forward(&frame).unwrap(), 0.7f64.tanh());
    }

    #[test]
    fn forward_is_pure_and_bounded() {
        let arena = ArenaSpec::default();
        let arch = ArchSpec::with_defaults(8);
        for seed in 0..20 {
            let genome = random_genome(&arch, seed);
            let frame = random_frame(&arena, 8, seed + 100);
            let a = genome.forward(&frame).unwrap();
            let b = genome.forward(&frame).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
            assert!(a > -1.0 && a < 1.0);
        }
    }

    #[test]
    fn width_mismatch_is_a_shape_error() {
        let arena = ArenaSpec::default();
        let genome = PolicyGenome::zeros(ArchSpec::with_defaults(8)).unwrap();
        let frame = random_frame(&arena, 16, 1);
        assert!(matches!(
            genome.forward(&frame),
            Err(CoreError::ShapeMismatch { got: 16, want: 8 })
        ));
    }

    #[test]
    fn mirrored_frame_with_mirrored_kernels_mirrors_activations() {
        let arena = ArenaSpec::default();
        let arch = ArchSpec::with_defaults(8);
        for seed in 0..10 {
            let genome = random_genome(&arch, seed);
            let mut weights = genome.unpack();
            for kernel in weights.depthwise_w.iter_mut() {
                kernel.reverse();
            }
            let mirrored = PolicyGenome::pack(arch.clone(), &weights).unwrap();

            let frame = random_frame(&arena, 8, seed + 777);
            let a = genome.conv_activations(&frame).unwrap();
            let b = mirrored.conv_activations(&frame.mirrored()).unwrap();
            for o in 0..arch.conv_out {
                for i in 0..arch.upsilon {
                    let expect = a[o][arch.upsilon - 1 - i];
                    assert!(
                        (b[o][i] - expect).abs() < 1e-12,
                        "channel {o} position {i}: {} vs {expect}",
                        b[o][i]
                    );
                }
            }
        }
    }

    #[test]
    fn depthwise_stage_is_shift_equivariant_in_the_interior() {
        let arena = ArenaSpec::default();
        let arch = ArchSpec::with_defaults(16);
        let genome = random_genome(&arch, 42);
        let frame = random_frame(&arena, 16, 43);

        // Shift the input columns right by 2 with zero fill.
        let shift = 2usize;
        let mut shifted = vec![0.0; frame.values().len()];
        for ray in shift..16 {
            for c in 0..4 {
                shifted[ray * 4 + c] = frame.value(ray - shift, c);
            }
        }
        let shifted_frame = VisualFrame::new(shifted, 16, 0.4, 1.0).unwrap();

        let a = genome.conv_activations(&frame).unwrap();
        let b = genome.conv_activations(&shifted_frame).unwrap();
        // Interior positions: kernel never touches the zero fill or the edge.
        for o in 0..arch.conv_out {
            for i in (shift + 1)..(16 - 1) {
                assert!(
                    (b[o][i] - a[o][i - shift]).abs() < 1e-12,
                    "channel {o} position {i}"
                );
            }
        }
    }

    #[test]
    fn pack_unpack_round_trips_exactly() {
        let arch = ArchSpec::with_defaults(8);
        let genome = random_genome(&arch, 9);
        let weights = genome.unpack();
        let packed = PolicyGenome::pack(arch, &weights).unwrap();
        assert_eq!(packed.params(), genome.params());
    }

    proptest! {
        #[test]
        fn outputs_stay_strictly_inside_unit_interval(seed in 0u64..500) {
            let arena = ArenaSpec::default();
            let arch = ArchSpec::with_defaults(8);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params: Vec<f64> =
                (0..arch.param_count()).map(|_| rng.random_range(-20.0..20.0)).collect();
            let genome = PolicyGenome::from_params(arch, params).unwrap();
            let frame = random_frame(&arena, 8, seed);
            let r = genome.forward(&frame).unwrap();
            prop_assert!(r > -1.0 && r < 1.0);
            prop_assert!(r.is_finite());
        }
    }
}
