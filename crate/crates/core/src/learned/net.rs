//! Three-layer 3x3 convolutional network proposing deviations.

use rand::Rng;

use crate::error::{Error, Result};
use crate::learned::tape::{ConvShape, Grads, Tape, Var};

pub const DEFAULT_HIDDEN: usize = 32;
pub const DEFAULT_SLOPE: f64 = 0.2;

/// `IN -> conv(cin, hidden) -> IN -> lrelu -> conv(hidden, hidden) -> IN -> lrelu -> conv(hidden, 1)`.
///
/// Parameters are one flat vector laid out as `w1, b1, w2, b2, w3, b3` with
/// weights in `[cout, cin, 3, 3]` order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvNet {
    in_channels: usize,
    hidden: usize,
    slope: f64,
    params: Vec<f64>,
}

/// Parameter leaves of one network on a tape.
#[derive(Clone, Copy, Debug)]
pub struct BoundNet {
    vars: [Var; 6],
}

impl ConvNet {
    /// Fan-in scaled uniform init for the hidden layers; the output layer is
    /// zero so the untrained rule proposes nothing.
    pub fn new<R: Rng + ?Sized>(in_channels: usize, rng: &mut R) -> Result<Self> {
        Self::with_width(in_channels, DEFAULT_HIDDEN, DEFAULT_SLOPE, rng)
    }

    pub fn with_width<R: Rng + ?Sized>(
        in_channels: usize,
        hidden: usize,
        slope: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(in_channels, hidden, slope)?;
        let [(w1, b1), (w2, b2), _] = net.layer_ranges();
        for (w, b, fan_in) in [(w1, b1, in_channels * 9), (w2, b2, hidden * 9)] {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for i in w.start..b.end {
                net.params[i] = rng.random_range(-bound..bound);
            }
        }
        Ok(net)
    }

    /// All-zero parameters.
    pub fn zeros(in_channels: usize, hidden: usize, slope: f64) -> Result<Self> {
        if in_channels == 0 || hidden == 0 {
            return Err(Error::InvalidParameter("network widths must be positive".into()));
        }
        if !(slope.is_finite() && slope >= 0.0) {
            return Err(Error::InvalidParameter(format!("bad leaky slope {slope}")));
        }
        Ok(Self {
            in_channels,
            hidden,
            slope,
            params: vec![0.0; Self::count(in_channels, hidden)],
        })
    }

    /// `(9 cin + 1) hidden + (9 hidden + 1) hidden + 9 hidden + 1`.
    pub fn count(in_channels: usize, hidden: usize) -> usize {
        (9 * in_channels + 1) * hidden + (9 * hidden + 1) * hidden + 9 * hidden + 1
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::InvalidParameter(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        self.params = params;
        Ok(())
    }

    fn layer_ranges(&self) -> [(std::ops::Range<usize>, std::ops::Range<usize>); 3] {
        let (c, h) = (self.in_channels, self.hidden);
        let sizes = [(9 * c * h, h), (9 * h * h, h), (9 * h, 1)];
        let mut off = 0;
        sizes.map(|(w, b)| {
            let wr = off..off + w;
            let br = off + w..off + w + b;
            off += w + b;
            (wr, br)
        })
    }

    /// Puts the parameters on the tape as leaves.
    pub fn bind(&self, tape: &mut Tape) -> Result<BoundNet> {
        let r = self.layer_ranges();
        let mut vars = Vec::with_capacity(6);
        for (w, b) in r {
            vars.push(tape.leaf_raw(&[w.len()], self.params[w].to_vec())?);
            vars.push(tape.leaf_raw(&[b.len()], self.params[b].to_vec())?);
        }
        Ok(BoundNet {
            vars: vars.try_into().expect("six leaves"),
        })
    }

    /// Flat parameter gradient in the same layout as [`ConvNet::params`].
    pub fn gradient(&self, grads: &Grads, bound: &BoundNet) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.params.len());
        for (k, (w, b)) in self.layer_ranges().into_iter().enumerate() {
            out.extend(grads.get_or_zero(bound.vars[2 * k], w.len()));
            out.extend(grads.get_or_zero(bound.vars[2 * k + 1], b.len()));
        }
        out
    }

    /// Applies the network to a `[in_channels, h, w]` stack and returns a
    /// `[h, w]` image.
    pub fn forward(&self, tape: &mut Tape, bound: &BoundNet, input: Var, h: usize, w: usize) -> Result<Var> {
        let (c, hid) = (self.in_channels, self.hidden);
        let v = &bound.vars;
        let x = tape.instance_norm(input, c)?;
        let shape = |cin, cout| ConvShape { cin, cout, h, w };
        let x = tape.conv3x3(x, v[0], v[1], shape(c, hid))?;
        let x = tape.instance_norm(x, hid)?;
        let x = tape.leaky_relu(x, self.slope)?;
        let x = tape.conv3x3(x, v[2], v[3], shape(hid, hid))?;
        let x = tape.instance_norm(x, hid)?;
        let x = tape.leaky_relu(x, self.slope)?;
        let x = tape.conv3x3(x, v[4], v[5], shape(hid, 1))?;
        tape.reshape(x, &[h, w])
    }

    /// Header fields describing the architecture.
    pub(crate) fn describe(&self) -> String {
        format!(
            "in={} hidden={} slope={} params={}",
            self.in_channels,
            self.hidden,
            self.slope,
            self.params.len()
        )
    }
}
