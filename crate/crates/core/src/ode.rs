//! Dormand–Prince 5(4) with step-size control and the standard fourth-order
//! dense output.

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Copy, Debug)]
pub struct Options {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; chosen automatically when `None`.
    pub h0: Option<f64>,
    pub max_steps: usize,
}

impl Options {
    pub fn with_tol(tol: f64) -> Self {
        Options { rtol: tol, atol: tol, h0: None, max_steps: 5_000_000 }
    }
}

impl Default for Options {
    fn default() -> Self {
        Self::with_tol(1e-10)
    }
}

/// One accepted step with its interpolant.
#[derive(Clone, Copy, Debug)]
pub struct Segment<const N: usize> {
    pub t0: f64,
    pub h: f64,
    cont: [[f64; N]; 5],
}

impl<const N: usize> Segment<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn start(&self) -> [f64; N] {
        self.cont[0]
    }

    pub fn end(&self) -> [f64; N] {
        std::array::from_fn(|i| self.cont[0][i] + self.cont[1][i])
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.h > 0.0 { (self.t0, self.t1()) } else { (self.t1(), self.t0) };
        t >= lo && t <= hi
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        self.eval_local((t - self.t0) / self.h)
    }

    /// Interpolant at `t0 + θ h`.
    pub fn eval_local(&self, th: f64) -> [f64; N] {
        let th1 = 1.0 - th;
        let c = &self.cont;
        std::array::from_fn(|i| c[0][i] + th * (c[1][i] + th1 * (c[2][i] + th * (c[3][i] + th1 * c[4][i]))))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Completed,
    /// The step size fell below the resolution of `t`.
    StepUnderflow,
    MaxSteps,
    /// The step callback asked to stop.
    Halted,
}

#[derive(Clone, Copy, Debug)]
pub struct Report<const N: usize> {
    pub status: Status,
    pub t: f64,
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * terms.iter().map(|(a, k)| a * k[i]).sum::<f64>())
}

fn norm<const N: usize>(v: &[f64; N], y: &[f64; N], opts: &Options) -> f64 {
    let s: f64 = (0..N)
        .map(|i| {
            let sk = opts.atol + opts.rtol * y[i].abs();
            (v[i] / sk).powi(2)
        })
        .sum();
    (s / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(f: &mut F, t0: f64, y0: &[f64; N], k0: &[f64; N], dir: f64, opts: &Options) -> f64
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
{
    let d0 = norm(y0, y0, opts);
    let d1 = norm(k0, y0, opts);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = axpy(y0, dir * h0, &[(1.0, k0)]);
    let k1 = f(t0 + dir * h0, &y1);
    let diff: [f64; N] = std::array::from_fn(|i| k1[i] - k0[i]);
    let d2 = norm(&diff, y0, opts) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1)
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction),
/// handing each accepted step to `on_step`; returning `false` from the
/// callback stops the integration.
pub fn integrate<const N: usize, F, S>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    opts: &Options,
    mut on_step: S,
) -> Report<N>
where
    F: FnMut(f64, &[f64; N]) -> [f64; N],
    S: FnMut(&Segment<N>) -> bool,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = opts.h0.map(f64::abs).unwrap_or_else(|| initial_step(&mut f, t0, &y0, &k1, dir, opts));
    let mut report = Report { status: Status::Completed, t, y, accepted: 0, rejected: 0 };
    let mut last_rejected = false;

    while (t_end - t) * dir > 0.0 {
        if report.accepted + report.rejected >= opts.max_steps {
            report.status = Status::MaxSteps;
            break;
        }
        if h < 16.0 * f64::EPSILON * t.abs().max(1e-300) {
            report.status = Status::StepUnderflow;
            break;
        }
        let remaining = (t_end - t).abs();
        let last = h >= remaining;
        let hs = if last { remaining } else { h } * dir;

        let k2 = f(t + C2 * hs, &axpy(&y, hs, &[(A21, &k1)]));
        let k3 = f(t + C3 * hs, &axpy(&y, hs, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(t + C4 * hs, &axpy(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(t + C5 * hs, &axpy(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = f(t + hs, &axpy(&y, hs, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
        let y_new = axpy(&y, hs, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let t_new = if last { t_end } else { t + hs };
        let k7 = f(t_new, &y_new);

        let err_vec: [f64; N] = std::array::from_fn(|i| {
            hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
        });
        let scale: [f64; N] = std::array::from_fn(|i| y[i].abs().max(y_new[i].abs()));
        let err = norm(&err_vec, &scale, opts);

        if err <= 1.0 {
            let ydiff: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
            let bspl: [f64; N] = std::array::from_fn(|i| hs * k1[i] - ydiff[i]);
            let cont = [
                y,
                ydiff,
                bspl,
                std::array::from_fn(|i| ydiff[i] - hs * k7[i] - bspl[i]),
                std::array::from_fn(|i| {
                    hs * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
                }),
            ];
            let seg = Segment { t0: t, h: t_new - t, cont };
            t = t_new;
            y = y_new;
            k1 = k7;
            report.accepted += 1;
            report.t = t;
            report.y = y;
            if !on_step(&seg) {
                report.status = Status::Halted;
                break;
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= if last_rejected { fac.min(1.0) } else { fac };
            last_rejected = false;
        } else {
            report.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            last_rejected = true;
        }
    }
    report
}

/// All accepted segments of one integration, for evaluation anywhere in
/// the covered range.
#[derive(Clone, Debug, Default)]
pub struct DenseSolution<const N: usize> {
    pub segments: Vec<Segment<N>>,
}

impl<const N: usize> DenseSolution<N> {
    pub fn t_start(&self) -> Option<f64> {
        self.segments.first().map(|s| s.t0)
    }

    pub fn t_end(&self) -> Option<f64> {
        self.segments.last().map(Segment::t1)
    }

    fn find(&self, t: f64) -> Option<&Segment<N>> {
        let first = self.segments.first()?;
        let forward = first.h > 0.0;
        let idx = self.segments.partition_point(|s| if forward { s.t1() < t } else { s.t1() > t });
        self.segments.get(idx).filter(|s| s.contains(t))
    }

    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        self.find(t).map(|s| s.eval(t))
    }
}

/// Zero of component `i` of the interpolant inside `seg`, assuming the
/// endpoint values have opposite signs.
pub fn segment_root<const N: usize>(seg: &Segment<N>, i: usize) -> f64 {
    let (mut a, mut b) = (seg.t0, seg.t1());
    let mut fa = seg.start()[i];
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        let fm = seg.eval(m)[i];
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}
