/// Linear warmup followed by inverse-square-root decay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub warmup_steps: usize,
    pub lr_start: f64,
    pub lr_peak: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            warmup_steps: 2000,
            lr_start: 1e-7,
            lr_peak: 5e-3,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> crate::Result<()> {
        if self.warmup_steps == 0 || !(self.lr_start > 0.0 && self.lr_start < self.lr_peak) {
            return Err(crate::Error::Config(
                "schedule needs warmup >= 1 and 0 < lr_start < lr_peak".into(),
            ));
        }
        Ok(())
    }
}

/// Learning rate for 1-based `step`. At `step == warmup` both branches give
/// `lr_peak`; the decay branch is used there so the value is exact.
pub fn lr_at_step(step: usize, schedule: &Schedule) -> f64 {
    let step = step.max(1);
    let w = schedule.warmup_steps;
    if step < w {
        schedule.lr_start + (schedule.lr_peak - schedule.lr_start) * step as f64 / w as f64
    } else {
        schedule.lr_peak * (w as f64 / step as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landmarks() {
        let s = Schedule::default();
        assert_eq!(lr_at_step(2000, &s), 5e-3);
        assert_eq!(lr_at_step(8000, &s), 2.5e-3);
        assert_eq!(lr_at_step(1, &s), 1e-7 + (5e-3 - 1e-7) / 2000.0);
    }

    #[test]
    fn continuous_at_warmup() {
        let s = Schedule::default();
        let linear = s.lr_start + (s.lr_peak - s.lr_start) * 2000.0 / 2000.0;
        assert!((linear - lr_at_step(2000, &s)).abs() < 1e-18);
        assert!(lr_at_step(1999, &s) < lr_at_step(2000, &s));
        assert!(lr_at_step(2001, &s) < lr_at_step(2000, &s));
    }
}
