use crate::fxp::{Q15_16, Q7_8};

/// Per-layer activation selector, switchable at run time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Relu,
    SigmoidPlan,
    Identity,
}

impl ActivationKind {
    /// Code used by the NNSM container.
    pub const fn code(self) -> u8 {
        match self {
            ActivationKind::Relu => 0,
            ActivationKind::SigmoidPlan => 1,
            ActivationKind::Identity => 2,
        }
    }

    pub const fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ActivationKind::Relu),
            1 => Some(ActivationKind::SigmoidPlan),
            2 => Some(ActivationKind::Identity),
            _ => None,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::SigmoidPlan => "sigmoid-plan",
            ActivationKind::Identity => "identity",
        }
    }
}

/// One linear piece `y = t >> slope_shift + offset` of the PLAN sigmoid,
/// valid for `lower ≤ t` up to the next segment's lower bound. All values
/// are Q15.16 raws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanSegment {
    pub lower: i32,
    pub slope_shift: u32,
    pub offset: i32,
}

const fn q16(int: i32, frac_num: i32, frac_den_log2: u32) -> i32 {
    (int << 16) + (frac_num << (16 - frac_den_log2))
}

/// PLAN segments for `t = |x|`, ascending by lower bound:
///
/// | range           | y                     |
/// |-----------------|-----------------------|
/// | `[0, 1)`        | `t/4 + 0.5`           |
/// | `[1, 2.375)`    | `t/8 + 0.625`         |
/// | `[2.375, 5)`    | `t/32 + 0.84375`      |
/// | `[5, ∞)`        | `1`                   |
///
/// The last segment is constant and is represented by [`PLAN_SATURATION`].
pub const PLAN_SEGMENTS: [PlanSegment; 3] = [
    PlanSegment {
        lower: 0,
        slope_shift: 2,
        offset: q16(0, 1, 1),
    },
    PlanSegment {
        lower: q16(1, 0, 0),
        slope_shift: 3,
        offset: q16(0, 5, 3),
    },
    PlanSegment {
        lower: q16(2, 3, 3),
        slope_shift: 5,
        offset: q16(0, 27, 5),
    },
];

/// `t ≥ 5` maps to exactly 1.
pub const PLAN_SATURATION: i32 = 5 << 16;

pub fn relu(x: Q15_16) -> Q15_16 {
    if x.raw() < 0 {
        Q15_16::ZERO
    } else {
        x
    }
}

/// Piecewise-linear sigmoid, evaluated on Q15.16 with power-of-two slopes.
/// Negative inputs use `1 - y(|x|)`, so the odd symmetry is exact.
pub fn sigmoid_plan(x: Q15_16) -> Q15_16 {
    let t = x.raw().unsigned_abs();
    let y = if t >= PLAN_SATURATION as u32 {
        Q15_16::ONE.raw()
    } else {
        let t = t as i32;
        let seg = PLAN_SEGMENTS
            .iter()
            .rev()
            .find(|s| t >= s.lower)
            .expect("first segment starts at zero");
        (t >> seg.slope_shift) + seg.offset
    };
    if x.raw() < 0 {
        Q15_16::from_raw(Q15_16::ONE.raw() - y)
    } else {
        Q15_16::from_raw(y)
    }
}

/// Applies the activation at accumulator precision, then narrows to Q7.8.
pub fn apply_activation(kind: ActivationKind, x: Q15_16) -> Q7_8 {
    let y = match kind {
        ActivationKind::Relu => relu(x),
        ActivationKind::SigmoidPlan => sigmoid_plan(x),
        ActivationKind::Identity => x,
    };
    y.to_q7_8_saturating()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(x: f64) -> Q15_16 {
        Q15_16::from_real(x)
    }

    #[test]
    fn segment_table_values() {
        assert_eq!(PLAN_SEGMENTS[0].offset, a(0.5).raw());
        assert_eq!(PLAN_SEGMENTS[1].lower, a(1.0).raw());
        assert_eq!(PLAN_SEGMENTS[1].offset, a(0.625).raw());
        assert_eq!(PLAN_SEGMENTS[2].lower, a(2.375).raw());
        assert_eq!(PLAN_SEGMENTS[2].offset, a(0.84375).raw());
        assert_eq!(PLAN_SATURATION, a(5.0).raw());
    }

    #[test]
    fn relu_examples() {
        assert_eq!(relu(a(-3.25)), Q15_16::ZERO);
        assert_eq!(relu(Q15_16::ZERO), Q15_16::ZERO);
        assert_eq!(relu(a(7.125)), a(7.125));
    }

    #[test]
    fn sigmoid_examples() {
        assert_eq!(sigmoid_plan(Q15_16::ZERO), a(0.5));
        assert_eq!(sigmoid_plan(a(5.0)), a(1.0));
        assert_eq!(sigmoid_plan(a(-1.0)), a(0.25));
        assert_eq!(sigmoid_plan(a(1.0)), a(0.75));
        assert_eq!(sigmoid_plan(Q15_16::MIN), Q15_16::ZERO);
        assert_eq!(sigmoid_plan(Q15_16::MAX), Q15_16::ONE);
        assert!((sigmoid_plan(a(5.0)).to_f64() - 1.0 / (1.0 + (-5.0f64).exp())).abs() <= 0.007);
    }

    #[test]
    fn apply_activation_examples() {
        assert_eq!(apply_activation(ActivationKind::Relu, a(-1.0)), Q7_8::ZERO);
        assert_eq!(
            apply_activation(ActivationKind::SigmoidPlan, Q15_16::ZERO),
            Q7_8::from_real(0.5)
        );
        assert_eq!(
            apply_activation(ActivationKind::Identity, a(1.25)),
            Q7_8::from_real(1.25)
        );
    }

    #[test]
    fn sigmoid_close_to_logistic_on_grid() {
        let mut worst = 0.0f64;
        for raw in (-8 * 256)..=(8 * 256) {
            let x = Q15_16::from_raw(raw << 8);
            let exact = 1.0 / (1.0 + (-x.to_f64()).exp());
            worst = worst.max((sigmoid_plan(x).to_f64() - exact).abs());
        }
        assert!(worst <= 0.02, "max error {worst}");
    }

    // The table's third breakpoint (2.375) sits slightly past the point where
    // the second and third lines intersect (7/3), so the curve steps down by
    // 255/65536 there. Everywhere else it is non-decreasing.
    #[test]
    fn sigmoid_monotone_apart_from_breakpoint_step() {
        let step_at = a(2.375).raw();
        let mut prev = sigmoid_plan(Q15_16::from_raw(-(9 << 16)));
        for raw in (-(9 << 16) + 1)..=(9 << 16) {
            let y = sigmoid_plan(Q15_16::from_raw(raw));
            if y < prev {
                assert!(raw == step_at || raw == -step_at + 1, "decrease at raw {raw}");
                assert_eq!(prev.raw() - y.raw(), 255);
            }
            prev = y;
        }
    }

    proptest! {
        #[test]
        fn sigmoid_odd_symmetry(raw in (i32::MIN + 1)..=i32::MAX) {
            let x = Q15_16::from_raw(raw);
            let neg = Q15_16::from_raw(-raw);
            prop_assert_eq!(sigmoid_plan(neg).raw(), Q15_16::ONE.raw() - sigmoid_plan(x).raw());
        }

        #[test]
        fn relu_idempotent_and_nonnegative(raw in any::<i32>()) {
            let x = Q15_16::from_raw(raw);
            prop_assert_eq!(relu(relu(x)), relu(x));
            prop_assert!(relu(x).raw() >= 0);
        }
    }
}
